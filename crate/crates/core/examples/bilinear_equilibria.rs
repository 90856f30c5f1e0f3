//! Boundary equilibria of the bilinear affine game for a few 1-D instances,
//! plus a 2×2 one.

use std::error::Error;

use gnep_fpm::analysis::bilinear_boundary_equilibria;
use gnep_fpm::game::BilinearAffineGame;

fn main() -> Result<(), Box<dyn Error>> {
    for (a, cx, cy, b) in [(0.1, 1.0, 1.0, 1.0), (2.0, 1.0, -1.0, 1.0), (-1.5, 0.5, 1.0, 2.0)] {
        let game = BilinearAffineGame::one_d(a, cx, cy, b)?;
        let r = bilinear_boundary_equilibria(&game)?;
        println!("a={a:+} c=({cx:+}, {cy:+}) B={b}: u1={:+.4} u2={:+.4} -> {:?}", r.u1, r.u2, r.classification);
        if let Some(e) = r.samples.first() {
            println!("    e.g. x={:?} y={:?} (max KKT residual {:.1e})", e.x, e.y, r.max_residual);
        }
    }

    let game = BilinearAffineGame::new(vec![vec![0.5, -1.0], vec![1.0, 0.3]], vec![1.0, 0.5], vec![-0.5, 1.0], 1.0)?;
    let r = bilinear_boundary_equilibria(&game)?;
    println!("2x2 game: {:?} with {} sampled points", r.classification, r.samples.len());
    Ok(())
}
