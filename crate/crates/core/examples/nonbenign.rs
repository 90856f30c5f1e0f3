//! The two non-benign examples: nb1 still converges, nb2 stalls on the
//! boundary from one start and converges from another.

use std::error::Error;

use gnep_fpm::fpm::{fpm_run, EngineConfig, PlayerInit};
use gnep_fpm::game::{load_builtin, BuiltinParams};
use gnep_fpm::harness::documented_init;

fn preset(name: &str) -> Result<Vec<PlayerInit>, Box<dyn Error>> {
    let (_, specs) = documented_init(name).ok_or("unknown preset")?;
    Ok(specs.iter().map(|s| s.to_player_init()).collect::<Result<_, _>>()?)
}

fn main() -> Result<(), Box<dyn Error>> {
    let params = BuiltinParams::new();
    for (problem, start) in [("example_nb1", "fig2"), ("example_nb2", "fig3-stall"), ("example_nb2", "fig3-converge")] {
        let p = load_builtin(problem, &params)?;
        let trace = fpm_run(&p, &preset(start)?, &EngineConfig::new(10_000))?;
        let last = trace.rounds.last().expect("non-empty run");
        let grads: Vec<String> = (0..p.n())
            .map(|i| p.gradient(i, &trace.final_x).map(|g| format!("{:.3}", gnep_fpm::linalg::norm(&g))))
            .collect::<Result<_, _>>()?;
        println!(
            "{problem:<12} from {start:<14} -> x = {:?}, dist to u = {:.3e}, |grad| = [{}], feasible = {}",
            trace.final_x,
            last.dist_to_u.unwrap_or(f64::NAN),
            grads.join(", "),
            trace.all_feasible()
        );
    }
    Ok(())
}
