//! FPM against alternating projected gradient descent and the
//! wait-your-turn protocol on the same start.

use std::error::Error;

use gnep_fpm::fpm::{altgd_run, fpm_run, naive_wait_run, seeded_init, EngineConfig};
use gnep_fpm::game::{load_builtin, BuiltinParams};

fn main() -> Result<(), Box<dyn Error>> {
    let problem = load_builtin("example_sb", &BuiltinParams::new())?;
    let init = seeded_init(&problem, 3)?;
    let config = EngineConfig::new(5_000);
    let runs = [
        ("fpm", fpm_run(&problem, &init, &config)?),
        ("altgd", altgd_run(&problem, &init, &config)?),
        ("naive", naive_wait_run(&problem, &init, &config)?),
    ];
    for (name, trace) in &runs {
        let first_close = trace.rounds.iter().find(|r| r.dist_to_u.is_some_and(|d| d <= 1e-3)).map(|r| r.t);
        println!(
            "{name:<6} final dist to u {:.3e}, first t within 1e-3: {}, violations {}",
            trace.rounds.last().and_then(|r| r.dist_to_u).unwrap_or(f64::NAN),
            first_close.map_or("never".into(), |t| t.to_string()),
            trace.violations()
        );
    }
    Ok(())
}
