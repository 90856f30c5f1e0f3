//! The strongly benign zero-sum example from the documented start, with the
//! per-player convergence bound printed alongside the trajectory.
//!
//!     cargo run --release --example fig1_trajectory -- [T]

use std::error::Error;

use gnep_fpm::analysis::{convergence_bound, Regime};
use gnep_fpm::fpm::{fpm_run, EngineConfig, EtaRule, PlayerInit};
use gnep_fpm::game::{load_builtin, BuiltinParams};
use gnep_fpm::harness::documented_init;

fn main() -> Result<(), Box<dyn Error>> {
    let horizon: usize = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(10_000);
    let problem = load_builtin("example_sb", &BuiltinParams::new())?;
    let (_, specs) = documented_init("fig1").expect("fig1 preset");
    let init = specs.iter().map(|s| s.to_player_init()).collect::<Result<Vec<PlayerInit>, _>>()?;

    let config = EngineConfig::new(horizon).with_eta_rule(EtaRule::Theorem);
    let trace = fpm_run(&problem, &init, &config)?;
    let x1 = trace.joint(1);
    let bound = convergence_bound(&problem, horizon, Regime::StronglyBenign, &x1)?;

    println!("eta = {:.4e}, t0 = {}, rho = {:.8}", trace.eta, bound.t0, bound.rho);
    println!("{:>8} {:>12} {:>12} {:>12} {:>12}", "t", "x", "y", "bound x", "bound y");
    let mut t = 1;
    while t <= horizon {
        let x = trace.joint(t);
        let b = |i| bound.at(i, t).map_or("-".to_string(), |v| format!("{v:.4e}"));
        println!("{t:>8} {:>12.4e} {:>12.4e} {:>12} {:>12}", x[0], x[1], b(0), b(1));
        t *= 4;
    }
    println!("final {:?}, all feasible: {}, phases: {}", trace.final_x, trace.all_feasible(), trace.phase_starts().len() + 1);
    Ok(())
}
