//! The Moreau envelope of `a‖x − u‖` next to the function itself: the
//! envelope sits between `f − γa²/2` and `f`, and is smooth at `u`.

use std::error::Error;

use gnep_fpm::analysis::{moreau_norm, moreau_norm_grad};

fn main() -> Result<(), Box<dyn Error>> {
    let (a, gamma, u) = (2.0, 0.25, [1.0, -1.0]);
    println!("{:>6} {:>10} {:>10} {:>10} {:>10}", "s", "f", "envelope", "f-ga2/2", "|grad|");
    for k in -8..=8 {
        let s = k as f64 * 0.125;
        let x = [u[0] + s, u[1]];
        let f = a * s.abs();
        let m = moreau_norm(a, gamma, &u, &x)?;
        let g = moreau_norm_grad(a, gamma, &u, &x)?;
        println!("{s:>6.3} {f:>10.4} {m:>10.4} {:>10.4} {:>10.4}", f - gamma * a * a / 2.0, gnep_fpm::linalg::norm(&g));
    }
    Ok(())
}
