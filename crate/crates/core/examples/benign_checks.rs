//! Sampled estimates of the angular condition, monotonicity and D_min for
//! every built-in problem.

use std::error::Error;

use gnep_fpm::analysis::benign_report;
use gnep_fpm::game::{load_builtin, BuiltinParams, BUILTIN_NAMES};

fn main() -> Result<(), Box<dyn Error>> {
    for name in BUILTIN_NAMES {
        let p = load_builtin(name, &BuiltinParams::new())?;
        let r = benign_report(&p, &[0.5, 0.9], 20_000, 1)?;
        let delta = r.delta_hat.map_or("n/a".into(), |d| format!("{d:+.4}"));
        let dmin: Vec<String> = r.dmin_hat.iter().map(|(phi, v)| format!("{phi}: {v:.4}")).collect();
        println!("{name:<16} delta ~ {delta:<8} monotonicity ~ {:+.4e}  D_min {{{}}}", r.monotonicity_hat, dmin.join(", "));
    }
    Ok(())
}
