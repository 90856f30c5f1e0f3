//! Verification oracles: benign-condition estimators, theoretical bounds,
//! regret accounting, the Moreau envelope of a scaled norm, and the boundary
//! equilibria of the bilinear affine game.
//!
//! Estimators sample the shared polytope uniformly (rejection from its
//! bounding box) with a ChaCha stream seeded by the caller, so reports are
//! reproducible. They return upper estimates of infima.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fpm::{MovingSetInstance, OgdSchedule, RunTrace};
use crate::game::{BilinearAffineGame, GameError, GnepProblem};
use crate::geometry::{GeometryError, Halfspace, AUDIT_TOL};
use crate::linalg::{dist, dot, norm, sub};

/// Default sample count for the sampling estimators.
pub const DEFAULT_SAMPLES: usize = 100_000;
/// Tolerance for KKT residuals of emitted equilibria.
pub const KKT_TOL: f64 = 1e-10;
/// Points sampled along a half-line of boundary equilibria.
pub const RAY_SAMPLES: usize = 16;

const MAX_REJECTION_TRIES: usize = 100_000;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("missing problem constants: {}", .0.join(", "))]
    MissingConstants(Vec<&'static str>),
    #[error("no valid samples (all coincided with u, had zero gradient, or rejection sampling failed)")]
    NoValidSamples,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Game(#[from] GameError),
}

pub type Result<T> = std::result::Result<T, AnalysisError>;

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(AnalysisError::InvalidArgument(format!("{name} must be positive and finite, got {v}")))
    }
}

// ---------------------------------------------------------------------------
// Moreau envelope

/// Moreau envelope with parameter `γ` of `f(x) = a‖x − u‖`:
/// `a‖x−u‖ − γa²/2` when `aγ ≤ ‖x−u‖`, else `‖x−u‖²/(2γ)`.
pub fn moreau_norm(a: f64, gamma: f64, u: &[f64], x: &[f64]) -> Result<f64> {
    positive("a", a)?;
    positive("gamma", gamma)?;
    check_len(u.len(), x.len())?;
    let r = dist(x, u);
    let f = a * r;
    let v = if a * gamma <= r { f - 0.5 * gamma * a * a } else { r * r / (2.0 * gamma) };
    // Both branches lie in [f − γa²/2, f] analytically. Clamp away rounding,
    // with the lower end nudged so that `v − f ≥ −γa²/2` also holds when the
    // difference is evaluated in floating point.
    let drop = 0.5 * gamma * a * a;
    let mut floor = f - drop;
    while floor - f < -drop {
        floor = floor.next_up();
    }
    Ok(v.clamp(floor.min(f), f))
}

/// Gradient of [`moreau_norm`]: `a(x−u)/‖x−u‖` on the far branch, `(x−u)/γ`
/// on the near one.
pub fn moreau_norm_grad(a: f64, gamma: f64, u: &[f64], x: &[f64]) -> Result<Vec<f64>> {
    positive("a", a)?;
    positive("gamma", gamma)?;
    check_len(u.len(), x.len())?;
    let d = sub(x, u);
    let r = norm(&d);
    Ok(if a * gamma <= r && r > 0.0 {
        d.iter().map(|v| a * v / r).collect()
    } else {
        d.iter().map(|v| v / gamma).collect()
    })
}

fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(AnalysisError::DimensionMismatch { expected, got })
    }
}

// ---------------------------------------------------------------------------
// Benign-condition estimators

fn sampler(problem: &GnepProblem, seed: u64) -> impl FnMut() -> Option<Vec<f64>> + '_ {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    move || problem.constraint().sample(&mut rng, MAX_REJECTION_TRIES)
}

/// Min over sampled feasible `x` and players of the cosine between
/// `∇ν^{(i)}(x)` and `x^{(i)} − u^{(i)}`. Samples where either vector
/// vanishes are skipped.
pub fn check_angular(problem: &GnepProblem, u: &[f64], samples: usize, seed: u64) -> Result<f64> {
    check_len(problem.total_dim(), u.len())?;
    if samples == 0 {
        return Err(AnalysisError::InvalidArgument("samples must be >= 1".into()));
    }
    let mut draw = sampler(problem, seed);
    let mut best = f64::INFINITY;
    for _ in 0..samples {
        let Some(x) = draw() else { break };
        for i in 0..problem.n() {
            let g = problem.gradient(i, &x)?;
            let d = sub(problem.block(&x, i), problem.block(u, i));
            let (ng, nd) = (norm(&g), norm(&d));
            if ng == 0.0 || nd == 0.0 {
                continue;
            }
            best = best.min((dot(&g, &d) / (ng * nd)).clamp(-1.0, 1.0));
        }
    }
    if best.is_finite() {
        Ok(best)
    } else {
        Err(AnalysisError::NoValidSamples)
    }
}

/// Min over sampled pairs of `Σ_i ⟨∇ν^{(i)}(x) − ∇ν^{(i)}(y), x^{(i)} − y^{(i)}⟩ / ‖x − y‖²`.
pub fn check_monotonicity(problem: &GnepProblem, samples: usize, seed: u64) -> Result<f64> {
    let mut draw = sampler(problem, seed);
    let pseudo = |x: &[f64]| -> Result<Vec<f64>> {
        let mut f = Vec::with_capacity(x.len());
        for i in 0..problem.n() {
            f.extend(problem.gradient(i, x)?);
        }
        Ok(f)
    };
    let mut best = f64::INFINITY;
    for _ in 0..samples {
        let (Some(x), Some(y)) = (draw(), draw()) else { break };
        let d = sub(&x, &y);
        let dd = dot(&d, &d);
        if dd < 1e-24 {
            continue;
        }
        let df = sub(&pseudo(&x)?, &pseudo(&y)?);
        best = best.min(dot(&df, &d) / dd);
    }
    if best.is_finite() {
        Ok(best)
    } else {
        Err(AnalysisError::NoValidSamples)
    }
}

/// Upper estimate of `D_min(φ)`: for sampled feasible `x` and each player with
/// a nonzero gradient, the largest `α` such that
/// `(B(x^{(i)}, φ) ∩ 𝒳^{(i)}(x^{(−i)})) − α·∇/‖∇‖ ⊆ 𝒳^{(i)}(x^{(−i)})`.
///
/// The largest shift has a closed form over the slice facets, so no
/// bisection is needed; see [`max_feasible_shift`].
pub fn estimate_dmin(problem: &GnepProblem, phi: f64, samples: usize, seed: u64) -> Result<f64> {
    positive("phi", phi)?;
    let dims = problem.dims();
    let mut draw = sampler(problem, seed);
    let mut best = f64::INFINITY;
    for _ in 0..samples {
        let Some(x) = draw() else { break };
        for i in 0..problem.n() {
            let g = problem.gradient(i, &x)?;
            let ng = norm(&g);
            if ng == 0.0 {
                continue;
            }
            let dir: Vec<f64> = g.iter().map(|v| v / ng).collect();
            let slice = problem.constraint().slice_halfspaces(i, &problem.others(&x, i), &dims)?;
            if let Some(alpha) = max_feasible_shift(&slice, problem.block(&x, i), phi, &dir) {
                best = best.min(alpha);
            }
        }
    }
    if best.is_finite() {
        Ok(best)
    } else {
        Err(AnalysisError::NoValidSamples)
    }
}

/// Largest `α ≥ 0` with `(B(c, φ) ∩ P) − α·n ⊆ P` where `P = {z : ⟨a_j, z⟩ ≤ h_j}`
/// and `c ∈ P`. Only facets with `⟨a_j, n⟩ < 0` limit the shift, each at
/// `(h_j − M_j)/(−⟨a_j, n⟩)` with `M_j = max_{B ∩ P} ⟨a_j, z⟩`.
///
/// `M_j` is exact in one and two dimensions. Above that it is replaced by the
/// ball-only bound `min(⟨a_j, c⟩ + φ‖a_j‖, h_j)`, which can only shrink the
/// answer. `None` if no facet limits the shift (unbounded slice).
pub fn max_feasible_shift(halfspaces: &[Halfspace], c: &[f64], phi: f64, n: &[f64]) -> Option<f64> {
    let mut best = f64::INFINITY;
    for h in halfspaces {
        let an = dot(&h.normal, n);
        if an >= 0.0 {
            continue;
        }
        let m = match c.len() {
            1 => support_on_interval(halfspaces, c[0], phi, h.normal[0]),
            2 => support_on_disc_polygon(halfspaces, c, phi, &h.normal),
            _ => None,
        }
        .unwrap_or_else(|| (dot(&h.normal, c) + phi * norm(&h.normal)).min(h.offset));
        best = best.min(((h.offset - m) / -an).max(0.0));
    }
    best.is_finite().then_some(best)
}

/// `max a·z` over `[c−φ, c+φ] ∩ P` for a one-dimensional `P`.
fn support_on_interval(halfspaces: &[Halfspace], c: f64, phi: f64, a: f64) -> Option<f64> {
    let (mut lo, mut hi) = (c - phi, c + phi);
    for h in halfspaces {
        let s = h.normal[0];
        if s > 0.0 {
            hi = hi.min(h.offset / s);
        } else if s < 0.0 {
            lo = lo.max(h.offset / s);
        }
    }
    (lo <= hi).then(|| (a * lo).max(a * hi))
}

/// `max ⟨a, z⟩` over the disc `B(c, φ)` intersected with a polygon. The
/// maximiser is the disc's tangent point, a polygon vertex inside the disc,
/// or an edge–circle crossing; every candidate is enumerated.
fn support_on_disc_polygon(halfspaces: &[Halfspace], c: &[f64], phi: f64, a: &[f64]) -> Option<f64> {
    let tol = |h: &Halfspace| 1e-12 * (1.0 + h.offset.abs() + norm(&h.normal));
    let inside = |z: &[f64]| halfspaces.iter().all(|h| h.slack(z) >= -tol(h));
    let in_disc = |z: &[f64]| dist(z, c) <= phi * (1.0 + 1e-12);
    let mut best = f64::NEG_INFINITY;
    let mut consider = |z: &[f64]| best = best.max(dot(a, z));

    let na = norm(a);
    if na > 0.0 {
        let t = [c[0] + phi * a[0] / na, c[1] + phi * a[1] / na];
        if inside(&t) {
            consider(&t);
        }
    }
    for (j, p) in halfspaces.iter().enumerate() {
        // Polygon vertices.
        for q in &halfspaces[j + 1..] {
            let det = p.normal[0] * q.normal[1] - p.normal[1] * q.normal[0];
            if det.abs() < 1e-14 * norm(&p.normal) * norm(&q.normal) {
                continue;
            }
            let z = [
                (p.offset * q.normal[1] - p.normal[1] * q.offset) / det,
                (p.normal[0] * q.offset - p.offset * q.normal[0]) / det,
            ];
            if inside(&z) && in_disc(&z) {
                consider(&z);
            }
        }
        // Circle crossings of the edge line ⟨p, z⟩ = h.
        let np = norm(&p.normal);
        let unit = [p.normal[0] / np, p.normal[1] / np];
        let off = (p.offset - dot(&p.normal, c)) / np;
        if off.abs() <= phi {
            let foot = [c[0] + off * unit[0], c[1] + off * unit[1]];
            let half = (phi * phi - off * off).max(0.0).sqrt();
            let tangent = [-unit[1], unit[0]];
            for s in [-1.0, 1.0] {
                let z = [foot[0] + s * half * tangent[0], foot[1] + s * half * tangent[1]];
                if inside(&z) {
                    consider(&z);
                }
            }
        }
    }
    best.is_finite().then_some(best)
}

/// Result of the sampling checks for the benign conditions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenignReport {
    pub problem: String,
    /// Min sampled cosine; `None` when the problem declares no `u`.
    pub delta_hat: Option<f64>,
    /// `(φ, D̂_min(φ))` per requested `φ`.
    pub dmin_hat: Vec<(f64, f64)>,
    pub monotonicity_hat: f64,
    pub samples: usize,
    pub seed: u64,
}

/// Runs the three estimators with a shared seed.
pub fn benign_report(problem: &GnepProblem, phis: &[f64], samples: usize, seed: u64) -> Result<BenignReport> {
    let delta_hat = match &problem.constants().u {
        Some(u) => Some(check_angular(problem, u, samples, seed)?),
        None => None,
    };
    let mut dmin_hat = Vec::with_capacity(phis.len());
    for &phi in phis {
        dmin_hat.push((phi, estimate_dmin(problem, phi, samples, seed)?));
    }
    Ok(BenignReport {
        problem: problem.name().to_string(),
        delta_hat,
        dmin_hat,
        monotonicity_hat: check_monotonicity(problem, samples, seed)?,
        samples,
        seed,
    })
}

// ---------------------------------------------------------------------------
// Regret

/// Constraint regret of one player: zero, or infinite from some round on.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstraintRegret {
    pub infinite: bool,
    pub first_violation: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegretReport {
    pub u: Vec<f64>,
    pub rounds: usize,
    /// `Σ_t ν^{(i)}(x_t) − ν^{(i)}(u^{(i)}, x_t^{(−i)})` per player.
    pub reg_f: Vec<f64>,
    pub reg_c: Vec<ConstraintRegret>,
}

impl RegretReport {
    pub fn max_reg_f(&self) -> f64 {
        self.reg_f.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn reg_c_zero(&self) -> bool {
        self.reg_c.iter().all(|c| !c.infinite)
    }
}

/// Function and constraint regret of the played actions in `trace` against
/// the comparator `u`. A round violates player `i`'s constraint when
/// `x_t^{(i)} ∉ 𝒳^{(i)}(x_t^{(−i)})`, i.e. when `x_t ∉ 𝔠` at the audit tolerance.
pub fn regret(trace: &RunTrace, problem: &GnepProblem, u: &[f64]) -> Result<RegretReport> {
    check_len(problem.total_dim(), u.len())?;
    let n = problem.n();
    let mut reg_f = vec![0.0; n];
    let mut reg_c = vec![ConstraintRegret { infinite: false, first_violation: None }; n];
    for round in &trace.rounds {
        let x = round.joint();
        check_len(problem.total_dim(), x.len())?;
        let feasible = problem.feasible(&x, AUDIT_TOL);
        for i in 0..n {
            let swapped = problem.replace_block(&x, i, problem.block(u, i));
            reg_f[i] += problem.value(i, &x)? - problem.value(i, &swapped)?;
            if !feasible && !reg_c[i].infinite {
                reg_c[i] = ConstraintRegret { infinite: true, first_violation: Some(round.t) };
            }
        }
    }
    Ok(RegretReport { u: u.to_vec(), rounds: trace.rounds.len(), reg_f, reg_c })
}

// ---------------------------------------------------------------------------
// Convergence and regret bounds

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Regime {
    StronglyBenign,
    /// `eps` defaults to `D/√T`.
    Benign { eps: Option<f64> },
}

/// Per-player distance bound `Ξ‖x₁^{(i)} − u^{(i)}‖ρ^{(t+1)/n} + tail` for
/// `t ∈ [t₀, T]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TheoreticalBound {
    pub regime: Regime,
    pub horizon: usize,
    pub t0: usize,
    /// `t₀` before rounding up.
    pub t0_raw: f64,
    pub xi: f64,
    /// Contraction factor per `n` rounds.
    pub rho: f64,
    pub tail: f64,
    /// Resolved `ε` in the benign regime.
    pub eps: Option<f64>,
    pub initial_gap: Vec<f64>,
    /// `values[i][t − t₀]`; empty when `t₀ > T`.
    pub values: Vec<Vec<f64>>,
}

impl TheoreticalBound {
    /// Bound for player `i` at round `t`, if `t ∈ [t₀, T]`.
    pub fn at(&self, i: usize, t: usize) -> Option<f64> {
        if t < self.t0 {
            return None;
        }
        self.values.get(i)?.get(t - self.t0).copied()
    }
}

fn require(problem: &GnepProblem, regime: Regime) -> Result<(f64, f64, f64, f64, Vec<f64>)> {
    let c = problem.constants();
    let mut missing = Vec::new();
    let mut need = |name: &'static str, v: Option<f64>| {
        if v.is_none() {
            missing.push(name);
        }
        v.unwrap_or(f64::NAN)
    };
    let delta = need("delta", c.delta);
    let phi = need("phi", c.phi);
    let d_min = need("D_min", c.d_min);
    // Strongly benign: μ and L. Benign: Δ.
    let rate = match regime {
        Regime::StronglyBenign => {
            need("L", c.l);
            need("mu", c.mu)
        }
        Regime::Benign { .. } => need("Delta", c.big_delta),
    };
    if c.u.is_none() {
        missing.push("u");
    }
    if !missing.is_empty() {
        return Err(AnalysisError::MissingConstants(missing));
    }
    Ok((delta, phi, d_min, rate, c.u.clone().unwrap()))
}

/// Evaluates the finite-horizon distance bound for a run of length `horizon`
/// started at `x1`, using the constants declared on the problem.
///
/// Strongly benign:
/// `t₀ = max(4D/φ + 1, (D/(2D_min))², (DL/(2Gδ))²)`, `ρ = 1 − μδD/(4G√T)`,
/// tail `2D/(δ√T)`. Benign: `t₀ = max(4D/φ + 1, (D/(2D_min))², (D/(2εδ))²)`,
/// `ρ = 1 − δΔD/(2G√T)`, tail `(2D/√T + 2ε)/δ`. In both, `Ξ = ρ^{−t₀/n}`.
pub fn convergence_bound(problem: &GnepProblem, horizon: usize, regime: Regime, x1: &[f64]) -> Result<TheoreticalBound> {
    if horizon == 0 {
        return Err(AnalysisError::InvalidArgument("horizon must be >= 1".into()));
    }
    check_len(problem.total_dim(), x1.len())?;
    let (delta, phi, d_min, rate, u) = require(problem, regime)?;
    let c = problem.constants();
    let (d, g) = (c.d, c.g);
    let n = problem.n() as f64;
    let root_t = (horizon as f64).sqrt();
    let base = (4.0 * d / phi + 1.0).max((d / (2.0 * d_min)).powi(2));
    let (t0_raw, rho, tail, eps) = match regime {
        Regime::StronglyBenign => {
            let l = c.l.expect("checked");
            let t0 = base.max((d * l / (2.0 * g * delta)).powi(2));
            (t0, 1.0 - rate * delta * d / (4.0 * g * root_t), 2.0 * d / (delta * root_t), None)
        }
        Regime::Benign { eps } => {
            let eps = eps.unwrap_or(d / root_t);
            positive("eps", eps)?;
            let t0 = base.max((d / (2.0 * eps * delta)).powi(2));
            (t0, 1.0 - delta * rate * d / (2.0 * g * root_t), (2.0 * d / root_t + 2.0 * eps) / delta, Some(eps))
        }
    };
    if !(rho > 0.0 && rho <= 1.0) {
        return Err(AnalysisError::InvalidArgument(format!(
            "contraction factor {rho} outside (0, 1]; constants are inconsistent"
        )));
    }
    let t0 = t0_raw.ceil() as usize;
    let xi = rho.powf(-(t0 as f64) / n);
    let initial_gap: Vec<f64> = (0..problem.n())
        .map(|i| dist(problem.block(x1, i), problem.block(&u, i)))
        .collect();
    let values = initial_gap
        .iter()
        .map(|&gap| {
            (t0..=horizon)
                .map(|t| xi * gap * rho.powf((t as f64 + 1.0) / n) + tail)
                .collect()
        })
        .collect();
    Ok(TheoreticalBound { regime, horizon, t0, t0_raw, xi, rho, tail, eps, initial_gap, values })
}

/// Function-regret bound `DG(√T(2ΞnG/(μD) + 2/δ) + t₀)` for strongly benign
/// problems, with `Ξ` and `t₀` from [`convergence_bound`].
pub fn regret_bound(problem: &GnepProblem, horizon: usize) -> Result<f64> {
    let zero = vec![0.0; problem.total_dim()];
    let b = convergence_bound(problem, horizon, Regime::StronglyBenign, &zero)?;
    let c = problem.constants();
    let (d, g) = (c.d, c.g);
    let mu = c.mu.expect("checked");
    let delta = c.delta.expect("checked");
    let n = problem.n() as f64;
    let root_t = (horizon as f64).sqrt();
    Ok(d * g * (root_t * (2.0 * b.xi * n * g / (mu * d) + 2.0 / delta) + b.t0 as f64))
}

/// `(3D + (6 + 4c′)c)/2 · G√T`, the regret bound of OGD with side
/// information under the `η_t = (D + c)/(G√t)` schedule.
pub fn ogd_regret_bound(d: f64, g: f64, c: f64, c_prime: f64, horizon: usize) -> Result<f64> {
    positive("D", d)?;
    positive("G", g)?;
    if !(c >= 0.0 && c.is_finite() && c_prime >= 0.0 && c_prime.is_finite()) {
        return Err(AnalysisError::InvalidArgument("c and c' must be nonnegative and finite".into()));
    }
    if horizon == 0 {
        return Err(AnalysisError::InvalidArgument("T must be >= 1".into()));
    }
    Ok((3.0 * d + (6.0 + 4.0 * c_prime) * c) / 2.0 * g * (horizon as f64).sqrt())
}

/// Strongly convex variant with `η_t = 1/(tμ)`:
/// `(G²/μ) log T + Σ_{t=1}^{T−1} (ω_{t+1}/η_t + G)·dist(S_{t+1}, u)`.
pub fn ogd_strongly_convex_bound(instance: &MovingSetInstance) -> Result<f64> {
    let mu = instance
        .mu
        .ok_or(AnalysisError::MissingConstants(vec!["mu"]))?;
    positive("mu", mu)?;
    let horizon = instance.horizon();
    let g = instance.g;
    let mut total = g * g / mu * (horizon as f64).ln();
    for (t, omega) in instance.omegas().iter().enumerate().map(|(k, w)| (k + 1, w)) {
        let eta = instance
            .eta(OgdSchedule::StronglyConvex, t)
            .map_err(|e| AnalysisError::InvalidArgument(e.to_string()))?;
        total += (omega / eta + g) * instance.sets[t].dist_to_point(&instance.u);
    }
    Ok(total)
}

// ---------------------------------------------------------------------------
// Bilinear affine game: boundary equilibria

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundaryClass {
    /// No equilibrium saturates the constraint; the interior one at the
    /// origin is the only GNE.
    Empty,
    Segment,
    HalfLine,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryEquilibrium {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub alpha: f64,
    pub beta: f64,
    /// [`kkt_residual`] at this point.
    pub residual: [f64; 5],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryEquilibriaReport {
    pub u1: f64,
    pub u2: f64,
    pub classification: BoundaryClass,
    pub samples: Vec<BoundaryEquilibrium>,
    pub max_residual: f64,
}

fn to_dmatrix(a: &[Vec<f64>], rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |i, j| a[i][j])
}

/// Solves `m z = rhs` by LU with one round of residual refinement.
fn solve_refined(m: &DMatrix<f64>, rhs: &DVector<f64>) -> DVector<f64> {
    let lu = m.clone().lu();
    let mut z = lu.solve(rhs).expect("I + AAᵀ is positive definite");
    let r = rhs - m * &z;
    if let Some(dz) = lu.solve(&r) {
        z += dz;
    }
    z
}

struct BilinearSolver {
    a: DMatrix<f64>,
    mx: DMatrix<f64>,
    my: DMatrix<f64>,
    cx: DVector<f64>,
    cy: DVector<f64>,
}

impl BilinearSolver {
    fn new(game: &BilinearAffineGame) -> Self {
        let (dx, dy) = (game.dx(), game.dy());
        let a = to_dmatrix(&game.a, dx, dy);
        let mx = DMatrix::identity(dx, dx) + &a * a.transpose();
        let my = DMatrix::identity(dy, dy) + a.transpose() * &a;
        Self { a, mx, my, cx: DVector::from_column_slice(&game.c_x), cy: DVector::from_column_slice(&game.c_y) }
    }

    /// `x = (I+AAᵀ)⁻¹(−αc_x + βAc_y)`, `y = (I+AᵀA)⁻¹(−αAᵀc_x − βc_y)`.
    fn point(&self, alpha: f64, beta: f64) -> (Vec<f64>, Vec<f64>) {
        let rx = -alpha * &self.cx + beta * (&self.a * &self.cy);
        let ry = -alpha * (self.a.transpose() * &self.cx) - beta * &self.cy;
        let x = solve_refined(&self.mx, &rx);
        let y = solve_refined(&self.my, &ry);
        (x.as_slice().to_vec(), y.as_slice().to_vec())
    }

    fn u1_u2(&self) -> (f64, f64) {
        let mx_cx = solve_refined(&self.mx, &self.cx);
        let my_cy = solve_refined(&self.my, &self.cy);
        let u1 = -self.cx.dot(&(&mx_cx + &self.a * &my_cy));
        let u2 = -self.cy.dot(&(&my_cy - self.a.transpose() * &mx_cx));
        (u1, u2)
    }
}

/// `(u1, u2)` such that boundary equilibria satisfy `B = αu1 + βu2`.
pub fn bilinear_u(game: &BilinearAffineGame) -> (f64, f64) {
    BilinearSolver::new(game).u1_u2()
}

/// Boundary classification from the signs of `u1, u2`. The set
/// `{(α, β) ≥ 0 : αu1 + βu2 = B}` with `B > 0` is empty iff neither
/// coefficient is positive; since `u1 + u2 < 0` they are never both positive.
pub fn classify(u1: f64, u2: f64) -> BoundaryClass {
    if u1 > 0.0 && u2 > 0.0 {
        BoundaryClass::Segment
    } else if u1 <= 0.0 && u2 <= 0.0 {
        BoundaryClass::Empty
    } else {
        BoundaryClass::HalfLine
    }
}

/// Equilibria of the bilinear affine game that saturate the shared
/// constraint, sampled along their solution set and re-verified.
pub fn bilinear_boundary_equilibria(game: &BilinearAffineGame) -> Result<BoundaryEquilibriaReport> {
    if !(game.b > 0.0) {
        return Err(AnalysisError::InvalidArgument(format!("B must be positive, got {}", game.b)));
    }
    let solver = BilinearSolver::new(game);
    let (u1, u2) = solver.u1_u2();
    let classification = classify(u1, u2);
    let mut pairs = Vec::new();
    match classification {
        BoundaryClass::Empty => {}
        BoundaryClass::Segment => {
            // Both positive: the segment between the two axis intercepts.
            for k in 0..RAY_SAMPLES {
                let s = k as f64 / (RAY_SAMPLES - 1) as f64;
                pairs.push((s * game.b / u1, (1.0 - s) * game.b / u2));
            }
        }
        BoundaryClass::HalfLine => {
            // Free parameter on the ray: β when u1 > 0, α otherwise. Its
            // values are 0 followed by geometrically spaced points.
            let scale = game.b / u1.abs().max(u2.abs());
            for k in 0..RAY_SAMPLES {
                let s = if k == 0 { 0.0 } else { scale * 1e-3 * 10f64.powf(6.0 * (k - 1) as f64 / (RAY_SAMPLES - 2) as f64) };
                if u1 > 0.0 {
                    pairs.push(((game.b - s * u2) / u1, s));
                } else {
                    pairs.push((s, (game.b - s * u1) / u2));
                }
            }
        }
    }
    let mut samples = Vec::with_capacity(pairs.len());
    let mut max_residual: f64 = 0.0;
    for (alpha, beta) in pairs {
        let (x, y) = solver.point(alpha, beta);
        let residual = kkt_residual(game, &x, &y, alpha, beta)?;
        max_residual = residual.iter().copied().fold(max_residual, f64::max);
        samples.push(BoundaryEquilibrium { x, y, alpha, beta, residual });
    }
    Ok(BoundaryEquilibriaReport { u1, u2, classification, samples, max_residual })
}

/// `[‖x + Ay + αc_x‖, ‖y − Aᵀx + βc_y‖, |⟨x,c_x⟩ + ⟨y,c_y⟩ − B|, max(0,−α), max(0,−β)]`.
pub fn kkt_residual(game: &BilinearAffineGame, x: &[f64], y: &[f64], alpha: f64, beta: f64) -> Result<[f64; 5]> {
    check_len(game.dx(), x.len())?;
    check_len(game.dy(), y.len())?;
    let (gx, gy) = game.gradients(x, y);
    let sx: Vec<f64> = gx.iter().zip(&game.c_x).map(|(g, c)| g + alpha * c).collect();
    let sy: Vec<f64> = gy.iter().zip(&game.c_y).map(|(g, c)| g + beta * c).collect();
    Ok([
        norm(&sx),
        norm(&sy),
        (dot(x, &game.c_x) + dot(y, &game.c_y) - game.b).abs(),
        (-alpha).max(0.0),
        (-beta).max(0.0),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{load_builtin, BuiltinParams};
    use proptest::prelude::*;

    fn builtin(name: &str) -> GnepProblem {
        load_builtin(name, &BuiltinParams::new()).unwrap()
    }

    /// Brute-force `min_y a|y| + (y − x)²/(2γ)` in 1-D by golden section on a
    /// bracket that contains the minimiser.
    fn moreau_oracle(a: f64, gamma: f64, x: f64) -> f64 {
        let h = |y: f64| a * y.abs() + (y - x).powi(2) / (2.0 * gamma);
        let (mut lo, mut hi) = (-x.abs() - 1.0, x.abs() + 1.0);
        let r = (5f64.sqrt() - 1.0) / 2.0;
        for _ in 0..200 {
            let m1 = hi - r * (hi - lo);
            let m2 = lo + r * (hi - lo);
            if h(m1) < h(m2) {
                hi = m2;
            } else {
                lo = m1;
            }
        }
        h(0.5 * (lo + hi)).min(h(0.0))
    }

    #[test]
    fn moreau_examples() {
        assert!((moreau_norm(2.0, 1.0, &[0.0], &[3.0]).unwrap() - 4.0).abs() < 1e-15);
        assert!((moreau_norm(2.0, 1.0, &[0.0], &[1.0]).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(moreau_norm(2.0, 1.0, &[1.5, -2.0], &[1.5, -2.0]).unwrap(), 0.0);
        assert!((moreau_norm(2.0, 1.0, &[0.0], &[3.0]).unwrap() - moreau_oracle(2.0, 1.0, 3.0)).abs() < 1e-9);
        assert!((moreau_norm(2.0, 1.0, &[0.0], &[1.0]).unwrap() - moreau_oracle(2.0, 1.0, 1.0)).abs() < 1e-9);
        assert!(moreau_norm(0.0, 1.0, &[0.0], &[1.0]).is_err());
        assert!(moreau_norm(1.0, -1.0, &[0.0], &[1.0]).is_err());
    }

    #[test]
    fn moreau_gradient_matches_finite_differences() {
        let (a, gamma, u) = (1.5, 0.7, [0.3, -0.2]);
        for x in [[2.0, 1.0], [0.4, -0.1], [0.3, 0.9]] {
            let g = moreau_norm_grad(a, gamma, &u, &x).unwrap();
            for k in 0..2 {
                let h = 1e-6;
                let mut xp = x;
                let mut xm = x;
                xp[k] += h;
                xm[k] -= h;
                let fd = (moreau_norm(a, gamma, &u, &xp).unwrap() - moreau_norm(a, gamma, &u, &xm).unwrap()) / (2.0 * h);
                assert!((fd - g[k]).abs() < 1e-6, "{fd} vs {}", g[k]);
            }
        }
    }

    #[test]
    fn angular_on_sb_is_one() {
        let p = builtin("example_sb");
        let u = p.constants().u.clone().unwrap();
        let delta = check_angular(&p, &u, 2000, 3).unwrap();
        assert!((delta - 1.0).abs() < 1e-12);
    }

    #[test]
    fn angular_violated_on_nb2() {
        let p = builtin("example_nb2");
        let u = p.constants().u.clone().unwrap_or(vec![0.0; 2]);
        assert!(check_angular(&p, &u, 20_000, 1).unwrap() <= 0.0);
    }

    #[test]
    fn angular_rejects_zero_samples_and_all_at_u() {
        let p = builtin("example_sb");
        assert!(check_angular(&p, &[0.0, 0.0], 0, 1).is_err());
        assert!(matches!(check_angular(&p, &[0.0], 10, 1), Err(AnalysisError::DimensionMismatch { .. })));
    }

    #[test]
    fn monotonicity_on_sb() {
        let p = builtin("example_sb");
        assert!(check_monotonicity(&p, 5000, 4).unwrap() >= 2.0 - 1e-9);
    }

    #[test]
    fn dmin_on_sb_matches_one_minus_phi() {
        let p = builtin("example_sb");
        let v = estimate_dmin(&p, 0.9, 5000, 2).unwrap();
        assert!(v > 0.0);
        assert!((v - 0.1).abs() < 1e-2, "{v}");
        assert!(estimate_dmin(&p, 0.0, 10, 2).is_err());
    }

    #[test]
    fn dmin_shift_in_a_square() {
        // Unit square, centre, φ = 0.25, pushing along −e₁: room 0.5 − 0.25.
        let hs = vec![
            Halfspace::new(vec![1.0, 0.0], 1.0),
            Halfspace::new(vec![-1.0, 0.0], 0.0),
            Halfspace::new(vec![0.0, 1.0], 1.0),
            Halfspace::new(vec![0.0, -1.0], 0.0),
        ];
        let a = max_feasible_shift(&hs, &[0.5, 0.5], 0.25, &[1.0, 0.0]).unwrap();
        assert!((a - 0.25).abs() < 1e-12);
        // Near a wall the clipped ball already touches x = 0: no room.
        let a = max_feasible_shift(&hs, &[0.1, 0.5], 0.25, &[1.0, 0.0]).unwrap();
        assert!(a.abs() < 1e-12);
        // Clipped ball around (0.9, 0.9) reaches the corner (1, 1): no room
        // to move up-right.
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let a = max_feasible_shift(&hs, &[0.9, 0.9], 0.5, &[-s, -s]).unwrap();
        assert!(a.abs() < 1e-12);
        // Moving down-left, the arc points (0.4, 0.9) and (0.9, 0.4) are the
        // binding ones: 0.4 of room per axis.
        let a = max_feasible_shift(&hs, &[0.9, 0.9], 0.5, &[s, s]).unwrap();
        assert!((a - 0.4 / s).abs() < 1e-9, "{a}");
    }

    #[test]
    fn bounds_on_sb() {
        let p = builtin("example_sb");
        let b = convergence_bound(&p, 10_000, Regime::StronglyBenign, &[2.0, 6.0]).unwrap();
        let c = p.constants();
        assert!((b.tail - 2.0 * c.d / (c.delta.unwrap() * 100.0)).abs() < 1e-15);
        assert!(b.t0 <= 10_000);
        assert!(b.rho < 1.0);
        for v in &b.values {
            assert!(v.windows(2).all(|w| w[1] <= w[0]));
        }
        assert!(regret_bound(&p, 10_000).unwrap().is_finite());
        let benign = convergence_bound(&p, 10_000, Regime::Benign { eps: Some(0.01) }, &[2.0, 6.0]);
        // example_sb declares no Δ.
        if c.big_delta.is_none() {
            assert!(matches!(benign, Err(AnalysisError::MissingConstants(ref m)) if m.contains(&"Delta")));
        }
    }

    #[test]
    fn benign_tail_has_eps_term() {
        let p = builtin("example_sb");
        let spec = p.constants_spec();
        let p = p
            .with_constants(crate::game::ConstantsSpec { big_delta: Some(2.0), ..spec })
            .unwrap();
        let c = p.constants().clone();
        let b = convergence_bound(&p, 10_000, Regime::Benign { eps: Some(0.01) }, &[2.0, 6.0]).unwrap();
        let delta = c.delta.unwrap();
        assert!((b.tail - (2.0 * c.d / 100.0 + 0.02) / delta).abs() < 1e-15);
        assert_eq!(b.eps, Some(0.01));
    }

    #[test]
    fn missing_constants_are_listed() {
        let p = builtin("example_nb2");
        match convergence_bound(&p, 100, Regime::StronglyBenign, &[0.0, 0.0]) {
            Err(AnalysisError::MissingConstants(m)) => assert!(!m.is_empty()),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn ogd_bound_examples() {
        assert!((ogd_regret_bound(1.0, 1.0, 0.0, 0.0, 100).unwrap() - 15.0).abs() < 1e-12);
        assert!((ogd_regret_bound(2.0, 3.0, 0.0, 0.0, 49).unwrap() - 1.5 * 2.0 * 3.0 * 7.0).abs() < 1e-12);
        assert!(ogd_regret_bound(0.0, 1.0, 0.0, 0.0, 100).is_err());
        assert!(ogd_regret_bound(1.0, 1.0, -1.0, 0.0, 100).is_err());
    }

    #[test]
    fn bilinear_examples() {
        let g = BilinearAffineGame::one_d(0.1, 1.0, 1.0, 1.0).unwrap();
        let r = bilinear_boundary_equilibria(&g).unwrap();
        assert!((r.u1 + 1.1 / 1.01).abs() < 1e-12);
        assert!((r.u2 + 0.9 / 1.01).abs() < 1e-12);
        assert_eq!(r.classification, BoundaryClass::Empty);
        assert!(r.samples.is_empty());

        let g = BilinearAffineGame::one_d(2.0, 1.0, 1.0, 1.0).unwrap();
        let r = bilinear_boundary_equilibria(&g).unwrap();
        assert!((r.u1 + 0.6).abs() < 1e-12);
        assert!((r.u2 - 0.2).abs() < 1e-12);
        assert_eq!(r.classification, BoundaryClass::HalfLine);
        assert_eq!(r.samples.len(), RAY_SAMPLES);
        assert!(r.max_residual <= KKT_TOL);
        for s in &r.samples {
            assert!(s.alpha >= 0.0 && s.beta >= 0.0);
            assert!((s.alpha * r.u1 + s.beta * r.u2 - 1.0).abs() <= KKT_TOL);
        }
    }

    #[test]
    fn kkt_residual_examples() {
        let g = BilinearAffineGame::one_d(2.0, 1.0, 1.0, 1.0).unwrap();
        assert_eq!(kkt_residual(&g, &[0.0], &[0.0], 0.0, 0.0).unwrap(), [0.0, 0.0, 1.0, 0.0, 0.0]);
        let r = bilinear_boundary_equilibria(&g).unwrap();
        let s = &r.samples[3];
        let res = kkt_residual(&g, &[s.x[0] + 1e-3], &s.y, s.alpha, s.beta).unwrap();
        assert!((res[0] - 1e-3).abs() < 1e-9);
    }

    #[test]
    fn b_must_be_positive() {
        let mut g = BilinearAffineGame::one_d(2.0, 1.0, 1.0, 1.0).unwrap();
        g.b = 0.0;
        assert!(bilinear_boundary_equilibria(&g).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(256))]

        #[test]
        fn moreau_sandwich(a in 0.01f64..10.0, gamma in 0.01f64..10.0,
                           u in prop::collection::vec(-5.0f64..5.0, 3),
                           x in prop::collection::vec(-5.0f64..5.0, 3)) {
            let v = moreau_norm(a, gamma, &u, &x).unwrap();
            let f = a * dist(&x, &u);
            prop_assert!(v - f <= 0.0);
            prop_assert!(v - f >= -0.5 * gamma * a * a);
        }

        #[test]
        fn moreau_gradient_is_lipschitz(a in 0.1f64..5.0, gamma in 0.1f64..5.0,
                                        x in prop::collection::vec(-3.0f64..3.0, 2),
                                        y in prop::collection::vec(-3.0f64..3.0, 2)) {
            let u = [0.2, -0.1];
            let gx = moreau_norm_grad(a, gamma, &u, &x).unwrap();
            let gy = moreau_norm_grad(a, gamma, &u, &y).unwrap();
            let d = dist(&x, &y);
            prop_assume!(d > 1e-9);
            prop_assert!(dist(&gx, &gy) / d <= 1.0 / gamma + 1e-6);
        }

        #[test]
        fn never_both_positive(a in prop::collection::vec(-5.0f64..5.0, 4),
                               cx in prop::collection::vec(-3.0f64..3.0, 2),
                               cy in prop::collection::vec(-3.0f64..3.0, 2),
                               b in 0.1f64..5.0) {
            prop_assume!(norm(&cx) + norm(&cy) > 1e-6);
            let game = BilinearAffineGame::new(vec![a[..2].to_vec(), a[2..].to_vec()], cx, cy, b).unwrap();
            let r = bilinear_boundary_equilibria(&game).unwrap();
            prop_assert!(!(r.u1 > 0.0 && r.u2 > 0.0));
            prop_assert!(r.u1 + r.u2 < 1e-12);
            prop_assert_eq!(r.classification, classify(r.u1, r.u2));
            for s in &r.samples {
                prop_assert!(s.alpha >= 0.0 && s.beta >= 0.0);
                prop_assert!((s.alpha * r.u1 + s.beta * r.u2 - b).abs() <= KKT_TOL * (1.0 + b));
            }
        }
    }
}
