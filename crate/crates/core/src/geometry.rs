//! Axis-aligned boxes and halfspace polytopes.
//!
//! Boxes carry the desired sets the players announce to each other, the
//! polytope carries the shared constraint set. All operations here are exact
//! closed forms except [`Polytope::project`], which warm-starts an active-set
//! solve with Dykstra's alternating projections.

use minilp::{ComparisonOp, OptimizationDirection, Problem};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{dot, norm};

/// Relative tolerance of the feasibility audit: halfspace `j` is considered
/// satisfied when `<a_j, x> <= h_j + AUDIT_TOL * (1 + |h_j|)`.
pub const AUDIT_TOL: f64 = 1e-9;

/// Sweep cap for Dykstra's projection.
pub const MAX_DYKSTRA_SWEEPS: usize = 100_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("box must have dimension >= 1")]
    EmptyDimension,
    #[error("invalid box bounds on axis {axis}: lower {lower} > upper {upper}")]
    InvertedBounds { axis: usize, lower: f64, upper: f64 },
    #[error("non-finite value in geometry input")]
    NonFinite,
    #[error("halfspace {index} has a zero normal")]
    ZeroNormal { index: usize },
    #[error("polytope is empty")]
    EmptyPolytope,
    #[error("polytope is unbounded")]
    UnboundedPolytope,
    #[error("point is not inside the set")]
    PointOutside,
    #[error("box is not contained in the polytope")]
    BoxOutside,
    #[error("shrink factor {0} must lie in (0, 1)")]
    BadFactor(f64),
    #[error("Dykstra projection did not converge after {sweeps} sweeps")]
    ProjectionNotConverged { sweeps: usize, best: Vec<f64> },
    #[error("constraint slice for player {player} is empty")]
    EmptySlice { player: usize },
    #[error("linear program failed: {0}")]
    Lp(String),
}

pub type Result<T> = std::result::Result<T, GeometryError>;

fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(GeometryError::DimensionMismatch { expected, got });
    }
    Ok(())
}

#[inline]
fn audit_slack(h: f64) -> f64 {
    AUDIT_TOL * (1.0 + h.abs())
}

/// Axis-aligned box `[lower, upper]`. Zero-width axes are allowed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxSet {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl BoxSet {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        check_dim(lower.len(), upper.len())?;
        if lower.is_empty() {
            return Err(GeometryError::EmptyDimension);
        }
        for (axis, (&lo, &hi)) in lower.iter().zip(&upper).enumerate() {
            if !lo.is_finite() || !hi.is_finite() {
                return Err(GeometryError::NonFinite);
            }
            if lo > hi {
                return Err(GeometryError::InvertedBounds { axis, lower: lo, upper: hi });
            }
        }
        Ok(Self { lower, upper })
    }

    /// Degenerate box `{x}`.
    pub fn point(x: &[f64]) -> Result<Self> {
        Self::new(x.to_vec(), x.to_vec())
    }

    /// Cartesian product of boxes, in order.
    pub fn product<'a>(parts: impl IntoIterator<Item = &'a BoxSet>) -> BoxSet {
        let mut lower = Vec::new();
        let mut upper = Vec::new();
        for b in parts {
            lower.extend_from_slice(&b.lower);
            upper.extend_from_slice(&b.upper);
        }
        BoxSet { lower, upper }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn center(&self) -> Vec<f64> {
        self.lower.iter().zip(&self.upper).map(|(l, u)| 0.5 * (l + u)).collect()
    }

    pub fn widths(&self) -> Vec<f64> {
        self.lower.iter().zip(&self.upper).map(|(l, u)| u - l).collect()
    }

    /// Euclidean length of the main diagonal.
    pub fn diameter(&self) -> f64 {
        norm(&self.widths())
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(&xi, (&lo, &hi))| xi >= lo - tol && xi <= hi + tol)
    }

    /// Relative interior membership: strict on every non-degenerate axis,
    /// equality on degenerate ones.
    pub fn contains_relint(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter().zip(self.lower.iter().zip(&self.upper)).all(|(&xi, (&lo, &hi))| {
                if lo == hi {
                    xi == lo
                } else {
                    xi > lo && xi < hi
                }
            })
    }

    /// `S + {v}`.
    pub fn translate(&self, v: &[f64]) -> Result<BoxSet> {
        check_dim(self.dim(), v.len())?;
        Ok(BoxSet {
            lower: self.lower.iter().zip(v).map(|(l, d)| l + d).collect(),
            upper: self.upper.iter().zip(v).map(|(u, d)| u + d).collect(),
        })
    }

    /// `argmin_{z in S} <g, z>` as a sub-box.
    pub fn support_min(&self, g: &[f64]) -> Result<BoxSet> {
        check_dim(self.dim(), g.len())?;
        let mut lower = self.lower.clone();
        let mut upper = self.upper.clone();
        for k in 0..g.len() {
            if g[k] > 0.0 {
                upper[k] = lower[k];
            } else if g[k] < 0.0 {
                lower[k] = upper[k];
            }
        }
        Ok(BoxSet { lower, upper })
    }

    /// `max_{z in S} <a, z>`.
    pub fn max_linear(&self, a: &[f64]) -> f64 {
        a.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(&ak, (&lo, &hi))| if ak > 0.0 { ak * hi } else { ak * lo })
            .sum()
    }

    /// `min_{z in S} <a, z>`.
    pub fn min_linear(&self, a: &[f64]) -> f64 {
        a.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(&ak, (&lo, &hi))| if ak > 0.0 { ak * lo } else { ak * hi })
            .sum()
    }

    /// Largest `alpha >= 0` with `x - alpha * g` in `S`.
    ///
    /// Returns `f64::INFINITY` when `g = 0`; callers take `min(eta, .)` and
    /// multiply by `g`, so the displacement is zero anyway.
    pub fn max_step_inside(&self, x: &[f64], g: &[f64]) -> Result<f64> {
        check_dim(self.dim(), x.len())?;
        check_dim(self.dim(), g.len())?;
        if !self.contains(x, AUDIT_TOL) {
            return Err(GeometryError::PointOutside);
        }
        let mut alpha = f64::INFINITY;
        for k in 0..g.len() {
            let room = if g[k] > 0.0 {
                (x[k] - self.lower[k]) / g[k]
            } else if g[k] < 0.0 {
                (self.upper[k] - x[k]) / -g[k]
            } else {
                continue;
            };
            alpha = alpha.min(room.max(0.0));
        }
        Ok(alpha)
    }

    /// Euclidean projection (componentwise clamp).
    pub fn project(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim(), x.len())?;
        Ok(x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(&xi, (&lo, &hi))| xi.clamp(lo, hi))
            .collect())
    }

    /// Euclidean distance from `u` to the box.
    pub fn dist_to_point(&self, u: &[f64]) -> f64 {
        let p = self.project(u).expect("dimension checked by caller");
        crate::linalg::dist(&p, u)
    }

    /// `max_{a in self} dist(other, a)`: how far a point of `self` can be from `other`.
    ///
    /// The distance to a box is separable across axes and convex per axis, so
    /// the maximum is attained axis by axis at an endpoint.
    pub fn excess_over(&self, other: &BoxSet) -> Result<f64> {
        check_dim(self.dim(), other.dim())?;
        let mut sq = 0.0;
        for k in 0..self.dim() {
            let d = |t: f64| {
                if t < other.lower[k] {
                    other.lower[k] - t
                } else if t > other.upper[k] {
                    t - other.upper[k]
                } else {
                    0.0
                }
            };
            let m = d(self.lower[k]).max(d(self.upper[k]));
            sq += m * m;
        }
        Ok(sq.sqrt())
    }

    /// Shrinks every axis width by `factor`, recentred at `x` and then shifted
    /// the least amount that keeps the result inside `self`.
    ///
    /// `x` stays in the relative interior of the result. An axis whose
    /// recentred bounds would collapse onto `x` in floating point keeps its old
    /// bounds.
    pub fn shrink_around(&self, x: &[f64], factor: f64) -> Result<BoxSet> {
        check_dim(self.dim(), x.len())?;
        if !(factor > 0.0 && factor < 1.0) {
            return Err(GeometryError::BadFactor(factor));
        }
        if !self.contains(x, 0.0) {
            return Err(GeometryError::PointOutside);
        }
        let mut lower = self.lower.clone();
        let mut upper = self.upper.clone();
        for k in 0..self.dim() {
            let (lo, hi) = (self.lower[k], self.upper[k]);
            let w = (hi - lo) * factor;
            if w == 0.0 {
                continue;
            }
            let (mut nlo, mut nhi) = (x[k] - 0.5 * w, x[k] + 0.5 * w);
            if nlo < lo {
                nlo = lo;
                nhi = lo + w;
            } else if nhi > hi {
                nhi = hi;
                nlo = hi - w;
            }
            let strict = nlo < x[k] && x[k] < nhi;
            let was_strict = lo < x[k] && x[k] < hi;
            if strict || !was_strict {
                lower[k] = nlo;
                upper[k] = nhi;
            }
        }
        Ok(BoxSet { lower, upper })
    }
}

/// `{x : <normal, x> <= offset}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Halfspace {
    pub normal: Vec<f64>,
    pub offset: f64,
}

impl Halfspace {
    pub fn new(normal: Vec<f64>, offset: f64) -> Self {
        Self { normal, offset }
    }

    pub fn slack(&self, x: &[f64]) -> f64 {
        self.offset - dot(&self.normal, x)
    }

    pub fn satisfied(&self, x: &[f64], tol: f64) -> bool {
        dot(&self.normal, x) <= self.offset + tol * (1.0 + self.offset.abs())
    }

    fn project(&self, y: &[f64], norm_sq: f64) -> Vec<f64> {
        let excess = dot(&self.normal, y) - self.offset;
        if excess <= 0.0 {
            return y.to_vec();
        }
        let s = excess / norm_sq;
        y.iter().zip(&self.normal).map(|(yi, ai)| yi - s * ai).collect()
    }
}

/// Non-empty bounded intersection of halfspaces.
#[derive(Clone, Debug, PartialEq)]
pub struct Polytope {
    halfspaces: Vec<Halfspace>,
    norms: Vec<f64>,
    bbox: BoxSet,
}

impl Polytope {
    /// Validates the halfspaces and computes the bounding box with one linear
    /// program per axis and direction. Fails if the set is empty or unbounded.
    pub fn new(halfspaces: Vec<Halfspace>) -> Result<Self> {
        let dim = halfspaces.first().map(|h| h.normal.len()).unwrap_or(0);
        if dim == 0 {
            return Err(GeometryError::EmptyDimension);
        }
        let mut norms = Vec::with_capacity(halfspaces.len());
        for (index, h) in halfspaces.iter().enumerate() {
            check_dim(dim, h.normal.len())?;
            if !h.offset.is_finite() || h.normal.iter().any(|a| !a.is_finite()) {
                return Err(GeometryError::NonFinite);
            }
            let n = norm(&h.normal);
            if n == 0.0 {
                return Err(GeometryError::ZeroNormal { index });
            }
            norms.push(n);
        }
        let bbox = bounding_box(&halfspaces, dim, 0.0)?;
        Ok(Self { halfspaces, norms, bbox })
    }

    pub fn dim(&self) -> usize {
        self.bbox.dim()
    }

    pub fn halfspaces(&self) -> &[Halfspace] {
        &self.halfspaces
    }

    pub fn bounding_box(&self) -> &BoxSet {
        &self.bbox
    }

    /// Every halfspace satisfied within `tol * (1 + |h_j|)`.
    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        x.len() == self.dim() && self.halfspaces.iter().all(|h| h.satisfied(x, tol))
    }

    /// Largest scaled violation `(<a_j, x> - h_j) / (1 + |h_j|)`; non-positive
    /// for feasible points.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        self.halfspaces
            .iter()
            .map(|h| -h.slack(x) / (1.0 + h.offset.abs()))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Box containment within the audit tolerance.
    pub fn contains_box(&self, s: &BoxSet, tol: f64) -> bool {
        s.dim() == self.dim()
            && self
                .halfspaces
                .iter()
                .all(|h| s.max_linear(&h.normal) <= h.offset + tol * (1.0 + h.offset.abs()))
    }

    /// Euclidean distance from an inner point to the boundary.
    pub fn dist_point_boundary(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim(), x.len())?;
        if !self.contains(x, AUDIT_TOL) {
            return Err(GeometryError::PointOutside);
        }
        Ok(self
            .halfspaces
            .iter()
            .zip(&self.norms)
            .map(|(h, n)| h.slack(x) / n)
            .fold(f64::INFINITY, f64::min)
            .max(0.0))
    }

    /// Euclidean distance from a contained box to the boundary: the smallest
    /// facet slack of the box, each slack measured at the box's support point.
    pub fn dist_box_boundary(&self, s: &BoxSet) -> Result<f64> {
        check_dim(self.dim(), s.dim())?;
        let mut best = f64::INFINITY;
        for (h, n) in self.halfspaces.iter().zip(&self.norms) {
            let slack = h.offset - s.max_linear(&h.normal);
            if slack < -audit_slack(h.offset) {
                return Err(GeometryError::BoxOutside);
            }
            best = best.min(slack / n);
        }
        Ok(best.max(0.0))
    }

    /// Largest `alpha >= 0` such that `s + alpha * dir` stays inside.
    /// `f64::INFINITY` if no facet is approached.
    pub fn max_translation(&self, s: &BoxSet, dir: &[f64]) -> Result<f64> {
        check_dim(self.dim(), s.dim())?;
        check_dim(self.dim(), dir.len())?;
        let mut alpha = f64::INFINITY;
        for h in &self.halfspaces {
            let rate = dot(&h.normal, dir);
            if rate <= 0.0 {
                continue;
            }
            let slack = h.offset - s.max_linear(&h.normal);
            if slack < -audit_slack(h.offset) {
                return Err(GeometryError::BoxOutside);
            }
            alpha = alpha.min(slack.max(0.0) / rate);
        }
        Ok(alpha)
    }

    /// Euclidean projection. Dykstra's alternating projections find the
    /// active constraints, then an active-set pass on the equality-constrained
    /// subproblem makes the answer exact up to rounding. Dykstra's per-sweep
    /// movement can stall far from the solution near acute vertices, so its
    /// output alone is only a warm start.
    pub fn project(&self, x: &[f64], tol: f64) -> Result<Vec<f64>> {
        check_dim(self.dim(), x.len())?;
        if self.contains(x, 0.0) {
            return Ok(x.to_vec());
        }
        let scale = 1.0 + norm(x);
        let (warm, converged) = self.dykstra(x, tol, scale);
        if let Some(z) = self.polish(x, &warm, scale) {
            if self.max_scaled_violation(&z) <= tol.max(8.0 * f64::EPSILON * scale) {
                return Ok(z);
            }
        }
        if converged {
            Ok(warm)
        } else {
            Err(GeometryError::ProjectionNotConverged { sweeps: MAX_DYKSTRA_SWEEPS, best: warm })
        }
    }

    fn max_scaled_violation(&self, z: &[f64]) -> f64 {
        self.halfspaces
            .iter()
            .zip(&self.norms)
            .map(|(h, n)| (-h.slack(z) / n).max(0.0))
            .fold(0.0, f64::max)
    }

    fn dykstra(&self, x: &[f64], tol: f64, scale: f64) -> (Vec<f64>, bool) {
        let norms_sq: Vec<f64> = self.norms.iter().map(|n| n * n).collect();
        let m = self.halfspaces.len();
        let d = self.dim();
        let mut cur = x.to_vec();
        let mut incr = vec![vec![0.0; d]; m];
        // Never ask for less than a few ulps of the iterate's magnitude.
        let floor = 8.0 * f64::EPSILON * scale;
        for _ in 0..MAX_DYKSTRA_SWEEPS {
            let before = cur.clone();
            for j in 0..m {
                let y: Vec<f64> = cur.iter().zip(&incr[j]).map(|(c, p)| c + p).collect();
                let next = self.halfspaces[j].project(&y, norms_sq[j]);
                for k in 0..d {
                    incr[j][k] = y[k] - next[k];
                }
                cur = next;
            }
            let moved = crate::linalg::dist(&before, &cur);
            if moved <= (1e-3 * tol * scale).max(floor) && self.max_scaled_violation(&cur) <= (1e-3 * tol).max(floor) {
                return (cur, true);
            }
        }
        (cur, false)
    }

    /// Primal active-set method for `min ½‖z − x‖²` over the polytope,
    /// started from `start`. `None` on degenerate working sets.
    fn polish(&self, x: &[f64], start: &[f64], scale: f64) -> Option<Vec<f64>> {
        let m = self.halfspaces.len();
        let band = 1e-9 * scale;
        let mut z = start.to_vec();
        let mut work: Vec<usize> = Vec::new();
        for j in 0..m {
            if self.halfspaces[j].slack(&z) / self.norms[j] <= band {
                work.push(j);
                if self.affine_projection(x, &work).is_none() {
                    work.pop();
                }
            }
        }
        for _ in 0..4 * m + 16 {
            let (target, lambda) = self.affine_projection(x, &work)?;
            let dir: Vec<f64> = target.iter().zip(&z).map(|(t, zi)| t - zi).collect();
            let mut alpha = 1.0;
            let mut block = None;
            for (j, h) in self.halfspaces.iter().enumerate() {
                if work.contains(&j) {
                    continue;
                }
                let rate = dot(&h.normal, &dir);
                if rate > 0.0 {
                    let reach = h.slack(&z).max(0.0) / rate;
                    if reach < alpha {
                        alpha = reach;
                        block = Some(j);
                    }
                }
            }
            for (zi, di) in z.iter_mut().zip(&dir) {
                *zi += alpha * di;
            }
            if let Some(j) = block {
                work.push(j);
                self.affine_projection(x, &work)?;
                continue;
            }
            z = target;
            let (k, worst) = lambda.iter().enumerate().fold((0, f64::INFINITY), |acc, (k, &l)| if l < acc.1 { (k, l) } else { acc });
            if work.is_empty() || worst >= -1e-12 * scale {
                return Some(z);
            }
            work.remove(k);
        }
        None
    }

    /// Projection of `x` onto `{z : ⟨a_j, z⟩ = h_j, j ∈ work}` and the
    /// multipliers, or `None` if the working normals are (nearly) dependent.
    fn affine_projection(&self, x: &[f64], work: &[usize]) -> Option<(Vec<f64>, Vec<f64>)> {
        if work.is_empty() {
            return Some((x.to_vec(), Vec::new()));
        }
        let k = work.len();
        if k > self.dim() {
            return None;
        }
        let gram = nalgebra::DMatrix::from_fn(k, k, |r, c| {
            dot(&self.halfspaces[work[r]].normal, &self.halfspaces[work[c]].normal)
        });
        let eig = gram.clone().symmetric_eigen();
        let (lo, hi) = eig.eigenvalues.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &e| (lo.min(e), hi.max(e)));
        if lo <= 1e-10 * hi {
            return None;
        }
        let rhs = nalgebra::DVector::from_fn(k, |r, _| -self.halfspaces[work[r]].slack(x));
        let lambda = gram.cholesky()?.solve(&rhs);
        let mut z = x.to_vec();
        for (r, &j) in work.iter().enumerate() {
            for (zi, a) in z.iter_mut().zip(&self.halfspaces[j].normal) {
                *zi -= lambda[r] * a;
            }
        }
        Some((z, lambda.iter().copied().collect()))
    }

    /// Halfspaces of [`Polytope::slice`] without the bounding-box work.
    /// Constraints that do not involve the player are checked and dropped.
    pub fn slice_halfspaces(&self, player: usize, x_other: &[f64], dims: &[usize]) -> Result<Vec<Halfspace>> {
        let total: usize = dims.iter().sum();
        check_dim(self.dim(), total)?;
        let di = *dims.get(player).ok_or(GeometryError::DimensionMismatch {
            expected: dims.len(),
            got: player,
        })?;
        check_dim(total - di, x_other.len())?;
        let start: usize = dims[..player].iter().sum();
        let mut kept = Vec::new();
        for h in &self.halfspaces {
            let own: Vec<f64> = h.normal[start..start + di].to_vec();
            let rest: f64 = h.normal[..start]
                .iter()
                .chain(&h.normal[start + di..])
                .zip(x_other)
                .map(|(a, x)| a * x)
                .sum();
            let offset = h.offset - rest;
            if own.iter().all(|&a| a == 0.0) {
                if offset < -audit_slack(h.offset) {
                    return Err(GeometryError::EmptySlice { player });
                }
                continue;
            }
            kept.push(Halfspace::new(own, offset));
        }
        Ok(kept)
    }

    /// `X^(i)(x^(-i))`: the polytope over one player's coordinates obtained by
    /// fixing everybody else. `offsets[i]` and `dims[i]` locate the player's
    /// block; `x_other` is the joint point with that block removed.
    pub fn slice(&self, player: usize, x_other: &[f64], dims: &[usize]) -> Result<Polytope> {
        let kept = self.slice_halfspaces(player, x_other, dims)?;
        let di = dims[player];
        if kept.is_empty() {
            // Only reachable for constraints that never involve this player;
            // bounded polytopes always constrain every coordinate.
            return Err(GeometryError::UnboundedPolytope);
        }
        let mut norms = Vec::with_capacity(kept.len());
        for h in &kept {
            norms.push(norm(&h.normal));
        }
        // Boundary slices can be single points; accept them within the audit
        // tolerance.
        let bbox = match bounding_box(&kept, di, 0.0) {
            Ok(b) => b,
            Err(GeometryError::EmptyPolytope) => match bounding_box(&kept, di, AUDIT_TOL) {
                Ok(b) => b,
                Err(GeometryError::EmptyPolytope) => return Err(GeometryError::EmptySlice { player }),
                Err(e) => return Err(e),
            },
            Err(e) => return Err(e),
        };
        Ok(Polytope { halfspaces: kept, norms, bbox })
    }

    /// Uniform sample by rejection from the bounding box. `None` if no
    /// candidate is accepted within `max_tries` (thin polytopes).
    pub fn sample<R: rand::Rng + ?Sized>(&self, rng: &mut R, max_tries: usize) -> Option<Vec<f64>> {
        let (lo, hi) = (self.bbox.lower(), self.bbox.upper());
        for _ in 0..max_tries {
            let x: Vec<f64> = lo
                .iter()
                .zip(hi)
                .map(|(&l, &h)| if h > l { rng.random_range(l..=h) } else { l })
                .collect();
            if self.contains(&x, 0.0) {
                return Some(x);
            }
        }
        None
    }

    /// All vertices, by enumerating `dim`-subsets of facets. Intended for the
    /// small dimensions of the built-in problems.
    pub fn vertices(&self) -> Vec<Vec<f64>> {
        use nalgebra::{DMatrix, DVector};
        let d = self.dim();
        let m = self.halfspaces.len();
        let mut out: Vec<Vec<f64>> = Vec::new();
        let mut idx: Vec<usize> = (0..d).collect();
        if m < d {
            return out;
        }
        loop {
            let a = DMatrix::from_fn(d, d, |r, c| self.halfspaces[idx[r]].normal[c]);
            let b = DVector::from_fn(d, |r, _| self.halfspaces[idx[r]].offset);
            if let Some(sol) = a.lu().solve(&b) {
                let v: Vec<f64> = sol.iter().copied().collect();
                if v.iter().all(|t| t.is_finite())
                    && self.contains(&v, 1e-9)
                    && !out.iter().any(|w| crate::linalg::dist(w, &v) < 1e-9 * (1.0 + norm(&v)))
                {
                    out.push(v);
                }
            }
            // next combination
            let mut k = d;
            loop {
                if k == 0 {
                    return out;
                }
                k -= 1;
                if idx[k] < m - d + k {
                    idx[k] += 1;
                    for r in k + 1..d {
                        idx[r] = idx[r - 1] + 1;
                    }
                    break;
                }
            }
        }
    }
}

/// Bounding box of `{x : <a_j, x> <= h_j + relax * (1 + |h_j|)}` via 2d LPs.
fn bounding_box(halfspaces: &[Halfspace], dim: usize, relax: f64) -> Result<BoxSet> {
    if dim == 1 {
        return interval(halfspaces, relax);
    }
    let mut lower = vec![0.0; dim];
    let mut upper = vec![0.0; dim];
    for axis in 0..dim {
        for (dir, slot) in [
            (OptimizationDirection::Maximize, &mut upper),
            (OptimizationDirection::Minimize, &mut lower),
        ] {
            let mut lp = Problem::new(dir);
            let vars: Vec<_> = (0..dim)
                .map(|k| lp.add_var(if k == axis { 1.0 } else { 0.0 }, (f64::NEG_INFINITY, f64::INFINITY)))
                .collect();
            for h in halfspaces {
                let terms: Vec<_> = vars
                    .iter()
                    .zip(&h.normal)
                    .filter(|(_, &a)| a != 0.0)
                    .map(|(&v, &a)| (v, a))
                    .collect();
                lp.add_constraint(terms.as_slice(), ComparisonOp::Le, h.offset + relax * (1.0 + h.offset.abs()));
            }
            match lp.solve() {
                Ok(sol) if sol.objective().is_finite() => slot[axis] = sol.objective(),
                Ok(_) => return Err(GeometryError::UnboundedPolytope),
                Err(minilp::Error::Infeasible) => return Err(GeometryError::EmptyPolytope),
                Err(minilp::Error::Unbounded) => return Err(GeometryError::UnboundedPolytope),
            }
        }
    }
    for k in 0..dim {
        if lower[k] > upper[k] {
            // LP round-off on a degenerate (point-like) axis.
            let mid = 0.5 * (lower[k] + upper[k]);
            lower[k] = mid;
            upper[k] = mid;
        }
    }
    BoxSet::new(lower, upper)
}

/// Exact solution set of one-dimensional constraints `a_j t <= h_j`.
fn interval(halfspaces: &[Halfspace], relax: f64) -> Result<BoxSet> {
    let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
    for h in halfspaces {
        let a = h.normal[0];
        let rhs = h.offset + relax * (1.0 + h.offset.abs());
        if a > 0.0 {
            hi = hi.min(rhs / a);
        } else {
            lo = lo.max(rhs / a);
        }
    }
    if !(lo.is_finite() && hi.is_finite()) {
        return Err(GeometryError::UnboundedPolytope);
    }
    if lo > hi {
        return Err(GeometryError::EmptyPolytope);
    }
    BoxSet::new(vec![lo], vec![hi])
}
