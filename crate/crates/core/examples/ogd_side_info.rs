//! Online gradient descent that sees the next feasible set before moving,
//! against both regret bounds.

use std::error::Error;

use gnep_fpm::analysis::{ogd_regret_bound, ogd_strongly_convex_bound};
use gnep_fpm::fpm::{ogd_side_info_run, MovingSetInstance, OgdSchedule};

fn main() -> Result<(), Box<dyn Error>> {
    for horizon in [100, 1_000, 10_000] {
        let inst = MovingSetInstance::generate(42, 3, horizon, None)?;
        let out = ogd_side_info_run(&inst, OgdSchedule::SqrtT, 1e-9)?;
        let bound = ogd_regret_bound(inst.d, inst.g, inst.c, inst.c_prime, horizon)?;
        println!("T={horizon:<6} sqrt-t          Reg_f {:>10.3} <= {bound:>10.3}  violations {}", out.reg_f, out.violations);

        let inst = MovingSetInstance::generate(42, 3, horizon, Some(1.0))?;
        let out = ogd_side_info_run(&inst, OgdSchedule::StronglyConvex, 1e-9)?;
        let bound = ogd_strongly_convex_bound(&inst)?;
        println!("T={horizon:<6} strongly convex Reg_f {:>10.3} <= {bound:>10.3}  violations {}", out.reg_f, out.violations);
    }
    Ok(())
}
