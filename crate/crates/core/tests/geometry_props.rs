use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use gnep_fpm::game::{load_builtin, BuiltinParams, BUILTIN_NAMES};
use gnep_fpm::geometry::{BoxSet, Halfspace, Polytope};
use gnep_fpm::linalg::{dist, dot};

fn unit_triangle() -> Polytope {
    Polytope::new(vec![
        Halfspace::new(vec![-1.0, 0.0], 0.0),
        Halfspace::new(vec![0.0, -1.0], 0.0),
        Halfspace::new(vec![1.0, 1.0], 1.0),
    ])
    .unwrap()
}

prop_compose! {
    fn boxes(dim: usize)(lo in prop::collection::vec(-5.0f64..5.0, dim),
                         w in prop::collection::vec(0.0f64..3.0, dim)) -> BoxSet {
        let hi = lo.iter().zip(&w).map(|(l, w)| l + w).collect();
        BoxSet::new(lo, hi).unwrap()
    }
}

fn point_in(b: &BoxSet, s: &[f64]) -> Vec<f64> {
    b.lower().iter().zip(b.upper()).zip(s).map(|((l, h), s)| l + s * (h - l)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    /// Translating by `v` keeps the box inside every halfspace whose slack
    /// (measured at the box's worst corner) covers `⟨a_j, v⟩`.
    #[test]
    fn translation_criterion(b in boxes(2), v in prop::collection::vec(-1.0f64..1.0, 2)) {
        let c = unit_triangle();
        let moved = b.translate(&v).unwrap();
        for h in c.halfspaces() {
            let before = b.max_linear(&h.normal);
            let after = moved.max_linear(&h.normal);
            if dot(&h.normal, &v) <= 0.0 {
                prop_assert!(after <= before + 1e-12);
            }
        }
        let fits = c.halfspaces().iter().all(|h| dot(&h.normal, &v) - (h.offset - b.max_linear(&h.normal)) <= 0.0);
        if fits {
            prop_assert!(c.contains_box(&moved, 1e-12));
        }
    }

    #[test]
    fn support_min_is_the_minimising_face(b in boxes(3), g in prop::collection::vec(-2.0f64..2.0, 3), seed in 0u64..1000) {
        let face = b.support_min(&g).unwrap();
        let value = face.min_linear(&g);
        prop_assert_eq!(value, face.max_linear(&g));
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut sampled = f64::INFINITY;
        for _ in 0..2000 {
            let s: Vec<f64> = (0..3).map(|_| rng.random_range(0.0..=1.0)).collect();
            sampled = sampled.min(dot(&g, &point_in(&b, &s)));
        }
        prop_assert!(value <= sampled + 1e-12);
        prop_assert!((value - b.min_linear(&g)).abs() <= 1e-12);
    }

    #[test]
    fn max_step_inside_is_tight(b in boxes(2), s in prop::collection::vec(0.0f64..=1.0, 2),
                                g in prop::collection::vec(-2.0f64..2.0, 2)) {
        let x = point_in(&b, &s);
        let a = b.max_step_inside(&x, &g).unwrap();
        if g.iter().all(|&v| v == 0.0) {
            prop_assert!(a.is_infinite());
        } else {
            prop_assert!(a.is_finite() && a >= 0.0);
            for frac in [0.0, 0.25, 0.5, 0.75, 1.0] {
                let y: Vec<f64> = x.iter().zip(&g).map(|(xi, gi)| xi - frac * a * gi).collect();
                prop_assert!(b.contains(&y, 1e-12));
            }
            let y: Vec<f64> = x.iter().zip(&g).map(|(xi, gi)| xi - (a + 1e-9) * gi).collect();
            prop_assert!(!b.contains(&y, 0.0));
        }
    }

    #[test]
    fn shrink_around_posts(b in boxes(3), s in prop::collection::vec(0.05f64..0.95, 3), factor in 0.05f64..0.95) {
        prop_assume!(b.widths().iter().all(|&w| w > 1e-3));
        let x = point_in(&b, &s);
        let small = b.shrink_around(&x, factor).unwrap();
        prop_assert!(b.contains(small.lower(), 0.0) && b.contains(small.upper(), 0.0));
        prop_assert!(small.contains_relint(&x));
        prop_assert!((small.diameter() - factor * b.diameter()).abs() <= 1e-12 * (1.0 + b.diameter()));
    }
}

/// Grid scan of `dist_point_boundary` over ~10⁶ points of a box.
fn grid_min_dist(c: &Polytope, b: &BoxSet) -> f64 {
    let d = b.dim();
    let per_axis = (1e6f64.powf(1.0 / d as f64)).round() as usize;
    let mut idx = vec![0usize; d];
    let mut best = f64::INFINITY;
    loop {
        let x: Vec<f64> = (0..d)
            .map(|k| b.lower()[k] + (b.upper()[k] - b.lower()[k]) * idx[k] as f64 / (per_axis - 1) as f64)
            .collect();
        best = best.min(c.dist_point_boundary(&x).unwrap());
        let mut k = 0;
        loop {
            if k == d {
                return best;
            }
            idx[k] += 1;
            if idx[k] < per_axis {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

#[test]
fn dist_box_boundary_matches_grid_on_builtins() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for name in BUILTIN_NAMES {
        let p = load_builtin(name, &BuiltinParams::new()).unwrap();
        let c = p.constraint();
        let diam = c.bounding_box().diameter();
        let mut checked = 0;
        while checked < 2 {
            let centre = c.sample(&mut rng, 100_000).unwrap();
            let margin = c.dist_point_boundary(&centre).unwrap();
            if margin < 1e-2 * diam {
                continue;
            }
            let half = 0.4 * margin / (p.total_dim() as f64).sqrt();
            let b = BoxSet::new(centre.iter().map(|v| v - half).collect(), centre.iter().map(|v| v + half).collect()).unwrap();
            let exact = c.dist_box_boundary(&b).unwrap();
            let scanned = grid_min_dist(c, &b);
            assert!((exact - scanned).abs() <= 1e-6 * diam, "{name}: {exact} vs {scanned}");
            checked += 1;
        }
    }
}

/// Active-set oracle for projections onto a polygon: the nearest among the
/// point itself, its projections onto each edge line, and the vertices,
/// restricted to feasible candidates.
fn qp_oracle(c: &Polytope, y: &[f64]) -> Vec<f64> {
    let mut cands = vec![y.to_vec()];
    for h in c.halfspaces() {
        let nn = dot(&h.normal, &h.normal);
        let t = (dot(&h.normal, y) - h.offset) / nn;
        cands.push(y.iter().zip(&h.normal).map(|(yi, a)| yi - t * a).collect());
    }
    cands.extend(c.vertices());
    cands
        .into_iter()
        .filter(|z| c.contains(z, 1e-12))
        .min_by(|a, b| dist(a, y).total_cmp(&dist(b, y)))
        .unwrap()
}

#[test]
fn polytope_projection_matches_qp_oracle_in_2d() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for name in ["example_sb", "example_nb1", "example_nb2", "bilinear_affine"] {
        let p = load_builtin(name, &BuiltinParams::new()).unwrap();
        let c = p.constraint();
        let bb = c.bounding_box();
        for _ in 0..200 {
            let y: Vec<f64> = (0..2)
                .map(|k| {
                    let w = bb.upper()[k] - bb.lower()[k];
                    rng.random_range(bb.lower()[k] - w..bb.upper()[k] + w)
                })
                .collect();
            let got = c.project(&y, 1e-10).unwrap();
            let want = qp_oracle(c, &y);
            assert!(dist(&got, &want) <= 1e-8, "{name}: {y:?} -> {got:?} vs {want:?}");
        }
    }
}
