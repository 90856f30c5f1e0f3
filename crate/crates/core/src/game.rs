//! GNEP problem definitions: players, loss-gradient oracles, the shared
//! polytope, problem constants, and the built-in instances.
//!
//! Joint points are flat vectors with the players' blocks concatenated in
//! player order. `x^{(-i)}` always means the joint point with block `i` cut
//! out, remaining blocks in order. Player indices are 0-based.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{GeometryError, Halfspace, Polytope};
use crate::linalg::{dot, mat_vec, norm};

pub type Matrix = Vec<Vec<f64>>;

/// Names accepted by [`load_builtin`].
pub const BUILTIN_NAMES: [&str; 5] = ["example_sb", "example_sb2", "example_nb1", "example_nb2", "bilinear_affine"];

/// Samples used when `G` has to be estimated.
pub const G_ESTIMATE_SAMPLES: usize = 100_000;
/// Inflation applied to the sampled maximum gradient norm.
pub const G_ESTIMATE_INFLATION: f64 = 1.05;
const G_ESTIMATE_SEED: u64 = 0x6e65_7073;

#[derive(Debug, Error)]
pub enum GameError {
    #[error("player index {index} out of range for {n} players")]
    PlayerOutOfRange { index: usize, n: usize },
    #[error("unknown built-in problem `{0}` (expected one of example_sb, example_sb2, example_nb1, example_nb2, bilinear_affine)")]
    UnknownBuiltin(String),
    #[error("parameter `{key}` is not accepted by `{problem}`")]
    UnknownParameter { problem: String, key: String },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid problem: {0}")]
    Invalid(String),
    #[error("custom losses cannot be serialized")]
    NotSerializable,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("problem file: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, GameError>;

/// Which side of a two-player saddle game a player is on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SaddleRole {
    /// Owns `x`, loss `‖x‖² + (xᵀPy)²`.
    Min,
    /// Owns `y`, loss `‖y‖² − (xᵀPy)² − ‖x‖²`.
    Max,
}

type CustomFn = dyn Fn(&[f64], &[f64]) -> (f64, Vec<f64>) + Send + Sync;

/// Externally supplied `(own, others) -> (value, own-gradient)` callback.
/// Must be a pure function.
#[derive(Clone)]
pub struct CustomLoss(pub Arc<CustomFn>);

impl CustomLoss {
    pub fn new(f: impl Fn(&[f64], &[f64]) -> (f64, Vec<f64>) + Send + Sync + 'static) -> Self {
        Self(Arc::new(f))
    }
}

impl fmt::Debug for CustomLoss {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("CustomLoss(..)")
    }
}

/// Per-player loss `ν^{(i)}(x^{(i)}, x^{(-i)})` with its own-variable gradient.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum LossOracle {
    /// `½ xᵢᵀ Q xᵢ + xᵢᵀ A x₋ᵢ + bᵀ xᵢ + ½ x₋ᵢᵀ R x₋ᵢ`.
    ///
    /// The `R` term only depends on the opponents; it never enters the
    /// gradient and is kept for value reporting.
    QuadraticBilinear {
        q: Matrix,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        a: Option<Matrix>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        b: Option<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        r: Option<Matrix>,
    },
    /// Two-player game built around `(xᵀPy)²`; see [`SaddleRole`].
    SaddleQuartic { p: Matrix, role: SaddleRole },
    #[serde(skip)]
    Custom(CustomLoss),
}

fn quad_form(m: &Matrix, v: &[f64]) -> f64 {
    dot(v, &mat_vec(m, v))
}

fn transpose_mat_vec(m: &Matrix, v: &[f64]) -> Vec<f64> {
    let cols = m.first().map_or(0, |r| r.len());
    let mut out = vec![0.0; cols];
    for (row, vi) in m.iter().zip(v) {
        for (o, mij) in out.iter_mut().zip(row) {
            *o += mij * vi;
        }
    }
    out
}

fn check_shape(m: &Matrix, rows: usize, cols: usize, what: &str) -> Result<()> {
    if m.len() != rows || m.iter().any(|r| r.len() != cols) {
        return Err(GameError::Invalid(format!("{what} must be {rows}x{cols}")));
    }
    if m.iter().flatten().any(|v| !v.is_finite()) {
        return Err(GameError::Invalid(format!("{what} has non-finite entries")));
    }
    Ok(())
}

fn min_eigenvalue(q: &Matrix) -> f64 {
    let d = q.len();
    let m = DMatrix::from_fn(d, d, |r, c| 0.5 * (q[r][c] + q[c][r]));
    SymmetricEigen::new(m).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
}

impl LossOracle {
    pub fn value(&self, own: &[f64], others: &[f64]) -> f64 {
        match self {
            LossOracle::QuadraticBilinear { q, a, b, r } => {
                let mut v = 0.5 * quad_form(q, own);
                if let Some(a) = a {
                    v += dot(own, &mat_vec(a, others));
                }
                if let Some(b) = b {
                    v += dot(b, own);
                }
                if let Some(r) = r {
                    v += 0.5 * quad_form(r, others);
                }
                v
            }
            LossOracle::SaddleQuartic { p, role } => match role {
                SaddleRole::Min => {
                    let s = dot(own, &mat_vec(p, others));
                    dot(own, own) + s * s
                }
                SaddleRole::Max => {
                    let s = dot(others, &mat_vec(p, own));
                    dot(own, own) - s * s - dot(others, others)
                }
            },
            LossOracle::Custom(f) => (f.0)(own, others).0,
        }
    }

    pub fn gradient(&self, own: &[f64], others: &[f64]) -> Vec<f64> {
        match self {
            LossOracle::QuadraticBilinear { q, a, b, .. } => {
                let mut g = mat_vec(q, own);
                if let Some(a) = a {
                    for (gi, ai) in g.iter_mut().zip(mat_vec(a, others)) {
                        *gi += ai;
                    }
                }
                if let Some(b) = b {
                    for (gi, bi) in g.iter_mut().zip(b) {
                        *gi += bi;
                    }
                }
                g
            }
            LossOracle::SaddleQuartic { p, role } => match role {
                SaddleRole::Min => {
                    let py = mat_vec(p, others);
                    let s = dot(own, &py);
                    own.iter().zip(&py).map(|(x, v)| 2.0 * x + 2.0 * s * v).collect()
                }
                SaddleRole::Max => {
                    let ptx = transpose_mat_vec(p, others);
                    let s = dot(own, &ptx);
                    own.iter().zip(&ptx).map(|(y, v)| 2.0 * y - 2.0 * s * v).collect()
                }
            },
            LossOracle::Custom(f) => (f.0)(own, others).1,
        }
    }

    /// Gradient is affine in the joint point (so its norm peaks at vertices).
    pub fn is_affine(&self) -> bool {
        matches!(self, LossOracle::QuadraticBilinear { .. })
    }

    fn validate(&self, own_dim: usize, other_dim: usize) -> Result<()> {
        match self {
            LossOracle::QuadraticBilinear { q, a, b, r } => {
                check_shape(q, own_dim, own_dim, "Q")?;
                let scale = q.iter().flatten().fold(1.0f64, |m, v| m.max(v.abs()));
                for i in 0..own_dim {
                    for j in 0..i {
                        if (q[i][j] - q[j][i]).abs() > 1e-12 * scale {
                            return Err(GameError::Invalid("Q must be symmetric".into()));
                        }
                    }
                }
                if min_eigenvalue(q) <= 0.0 {
                    return Err(GameError::Invalid("Q must be positive definite".into()));
                }
                if let Some(a) = a {
                    check_shape(a, own_dim, other_dim, "A")?;
                }
                if let Some(b) = b {
                    if b.len() != own_dim || b.iter().any(|v| !v.is_finite()) {
                        return Err(GameError::Invalid(format!("b must have length {own_dim}")));
                    }
                }
                if let Some(r) = r {
                    check_shape(r, other_dim, other_dim, "R")?;
                }
                Ok(())
            }
            LossOracle::SaddleQuartic { p, role } => {
                if own_dim != other_dim {
                    return Err(GameError::Invalid("saddle-quartic needs equal player dimensions".into()));
                }
                let _ = role;
                check_shape(p, own_dim, own_dim, "P")
            }
            LossOracle::Custom(_) => Ok(()),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Player {
    pub name: String,
    pub dim: usize,
    pub loss: LossOracle,
}

impl Player {
    pub fn new(name: impl Into<String>, dim: usize, loss: LossOracle) -> Self {
        Self { name: name.into(), dim, loss }
    }
}

/// Problem constants as written in a problem file: everything optional.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantsSpec {
    #[serde(rename = "G", default, skip_serializing_if = "Option::is_none")]
    pub g: Option<f64>,
    #[serde(rename = "D", default, skip_serializing_if = "Option::is_none")]
    pub d: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[serde(rename = "L", default, skip_serializing_if = "Option::is_none")]
    pub l: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi: Option<f64>,
    #[serde(rename = "D_min", default, skip_serializing_if = "Option::is_none")]
    pub d_min: Option<f64>,
    /// Monotonicity-type constant used by the benign regime.
    #[serde(rename = "Delta", default, skip_serializing_if = "Option::is_none")]
    pub big_delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u: Option<Vec<f64>>,
}

/// Resolved constants: `G` and `D` always present.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Constants {
    #[serde(rename = "G")]
    pub g: f64,
    #[serde(rename = "D")]
    pub d: f64,
    pub mu: Option<f64>,
    #[serde(rename = "L")]
    pub l: Option<f64>,
    pub delta: Option<f64>,
    pub phi: Option<f64>,
    #[serde(rename = "D_min")]
    pub d_min: Option<f64>,
    #[serde(rename = "Delta")]
    pub big_delta: Option<f64>,
    pub u: Option<Vec<f64>>,
}

impl Constants {
    fn to_spec(&self) -> ConstantsSpec {
        ConstantsSpec {
            g: Some(self.g),
            d: Some(self.d),
            mu: self.mu,
            l: self.l,
            delta: self.delta,
            phi: self.phi,
            d_min: self.d_min,
            big_delta: self.big_delta,
            u: self.u.clone(),
        }
    }
}

/// On-disk problem schema:
/// `{ "name": .., "players": [..], "halfspaces": [[[a..], h], ..], "constants": {..} }`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    #[serde(default)]
    pub name: Option<String>,
    pub players: Vec<Player>,
    pub halfspaces: Vec<(Vec<f64>, f64)>,
    #[serde(default)]
    pub constants: ConstantsSpec,
}

/// An immutable GNEP instance.
#[derive(Clone, Debug)]
pub struct GnepProblem {
    name: String,
    players: Vec<Player>,
    offsets: Vec<usize>,
    constraint: Polytope,
    constants: Constants,
}

impl GnepProblem {
    /// Validates shapes and constants. Missing `G` is estimated (exactly at
    /// vertices for affine gradients, by sampling otherwise); missing `D`
    /// defaults to the diagonal of the constraint's bounding box.
    pub fn new(name: impl Into<String>, players: Vec<Player>, constraint: Polytope, spec: ConstantsSpec) -> Result<Self> {
        if players.is_empty() {
            return Err(GameError::Invalid("at least one player required".into()));
        }
        let total: usize = players.iter().map(|p| p.dim).sum();
        if total != constraint.dim() {
            return Err(GameError::DimensionMismatch { expected: constraint.dim(), got: total });
        }
        let mut offsets = Vec::with_capacity(players.len());
        let mut off = 0;
        for p in &players {
            if p.dim == 0 {
                return Err(GameError::Invalid(format!("player `{}` has dimension 0", p.name)));
            }
            offsets.push(off);
            off += p.dim;
            p.loss.validate(p.dim, total - p.dim)?;
        }
        if players.iter().any(|p| matches!(p.loss, LossOracle::SaddleQuartic { .. })) {
            let roles: Vec<_> = players
                .iter()
                .map(|p| match p.loss {
                    LossOracle::SaddleQuartic { role, .. } => Some(role),
                    _ => None,
                })
                .collect();
            if roles != [Some(SaddleRole::Min), Some(SaddleRole::Max)] {
                return Err(GameError::Invalid("saddle-quartic needs exactly a min player followed by a max player".into()));
            }
        }
        let bbox_diam = constraint.bounding_box().diameter();
        let d = spec.d.unwrap_or(bbox_diam);
        if !(d.is_finite() && d >= bbox_diam * (1.0 - 1e-6)) {
            return Err(GameError::Invalid(format!("D = {d} is below the bounding-box diameter {bbox_diam}")));
        }
        for (key, v) in [
            ("mu", spec.mu),
            ("L", spec.l),
            ("delta", spec.delta),
            ("phi", spec.phi),
            ("D_min", spec.d_min),
            ("Delta", spec.big_delta),
        ] {
            if let Some(v) = v {
                if !(v.is_finite() && v > 0.0) {
                    return Err(GameError::Invalid(format!("constant {key} must be positive, got {v}")));
                }
            }
        }
        if let Some(delta) = spec.delta {
            if delta > 1.0 {
                return Err(GameError::Invalid("delta is a cosine and must be <= 1".into()));
            }
        }
        if let Some(mu) = spec.mu {
            for p in &players {
                if let LossOracle::QuadraticBilinear { q, .. } = &p.loss {
                    if min_eigenvalue(q) < mu * (1.0 - 1e-9) {
                        return Err(GameError::Invalid(format!("player `{}` is not {mu}-strongly convex", p.name)));
                    }
                }
            }
        }
        if let Some(u) = &spec.u {
            if u.len() != total {
                return Err(GameError::DimensionMismatch { expected: total, got: u.len() });
            }
        }
        let mut problem = GnepProblem {
            name: name.into(),
            players,
            offsets,
            constraint,
            constants: Constants {
                g: 0.0,
                d,
                mu: spec.mu,
                l: spec.l,
                delta: spec.delta,
                phi: spec.phi,
                d_min: spec.d_min,
                big_delta: spec.big_delta,
                u: spec.u,
            },
        };
        problem.constants.g = match spec.g {
            Some(g) if g.is_finite() && g > 0.0 => g,
            Some(g) => return Err(GameError::Invalid(format!("G must be positive, got {g}"))),
            None if problem.players.iter().all(|p| p.loss.is_affine()) => problem.vertex_gradient_bound(),
            None => problem.estimate_gradient_bound(G_ESTIMATE_SAMPLES, G_ESTIMATE_SEED),
        };
        Ok(problem)
    }

    pub fn from_file(file: ProblemFile) -> Result<Self> {
        let halfspaces = file.halfspaces.into_iter().map(|(a, h)| Halfspace::new(a, h)).collect();
        let constraint = Polytope::new(halfspaces)?;
        Self::new(file.name.unwrap_or_else(|| "custom".into()), file.players, constraint, file.constants)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_file(serde_json::from_str(text)?)
    }

    pub fn to_file(&self) -> Result<ProblemFile> {
        if self.players.iter().any(|p| matches!(p.loss, LossOracle::Custom(_))) {
            return Err(GameError::NotSerializable);
        }
        Ok(ProblemFile {
            name: Some(self.name.clone()),
            players: self.players.clone(),
            halfspaces: self.constraint.halfspaces().iter().map(|h| (h.normal.clone(), h.offset)).collect(),
            constants: self.constants.to_spec(),
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_file()?)?)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn n(&self) -> usize {
        self.players.len()
    }

    pub fn players(&self) -> &[Player] {
        &self.players
    }

    pub fn dims(&self) -> Vec<usize> {
        self.players.iter().map(|p| p.dim).collect()
    }

    pub fn total_dim(&self) -> usize {
        self.constraint.dim()
    }

    /// Start of player `i`'s block in the joint vector.
    pub fn offset(&self, i: usize) -> usize {
        self.offsets[i]
    }

    pub fn constraint(&self) -> &Polytope {
        &self.constraint
    }

    pub fn constants(&self) -> &Constants {
        &self.constants
    }

    /// Copy of the problem with some constants replaced (validated again).
    pub fn with_constants(&self, spec: ConstantsSpec) -> Result<Self> {
        Self::new(self.name.clone(), self.players.clone(), self.constraint.clone(), spec)
    }

    pub fn constants_spec(&self) -> ConstantsSpec {
        self.constants.to_spec()
    }

    fn check_player(&self, i: usize) -> Result<()> {
        if i >= self.n() {
            return Err(GameError::PlayerOutOfRange { index: i, n: self.n() });
        }
        Ok(())
    }

    fn check_joint(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.total_dim() {
            return Err(GameError::DimensionMismatch { expected: self.total_dim(), got: x.len() });
        }
        Ok(())
    }

    /// Player `i`'s block of a joint point.
    pub fn block<'a>(&self, x: &'a [f64], i: usize) -> &'a [f64] {
        &x[self.offsets[i]..self.offsets[i] + self.players[i].dim]
    }

    /// Joint point without player `i`'s block.
    pub fn others(&self, x: &[f64], i: usize) -> Vec<f64> {
        let (s, e) = (self.offsets[i], self.offsets[i] + self.players[i].dim);
        x[..s].iter().chain(&x[e..]).copied().collect()
    }

    /// Joint point with player `i`'s block replaced by `own`.
    pub fn replace_block(&self, x: &[f64], i: usize, own: &[f64]) -> Vec<f64> {
        let mut out = x.to_vec();
        out[self.offsets[i]..self.offsets[i] + self.players[i].dim].copy_from_slice(own);
        out
    }

    /// `∇_{x^{(i)}} ν^{(i)}(x)`.
    pub fn gradient(&self, i: usize, x: &[f64]) -> Result<Vec<f64>> {
        self.check_player(i)?;
        self.check_joint(x)?;
        let g = self.players[i].loss.gradient(self.block(x, i), &self.others(x, i));
        if g.len() != self.players[i].dim {
            return Err(GameError::DimensionMismatch { expected: self.players[i].dim, got: g.len() });
        }
        Ok(g)
    }

    /// `ν^{(i)}(x)`.
    pub fn value(&self, i: usize, x: &[f64]) -> Result<f64> {
        self.check_player(i)?;
        self.check_joint(x)?;
        Ok(self.players[i].loss.value(self.block(x, i), &self.others(x, i)))
    }

    /// Every halfspace satisfied within `tol · (1 + |h_j|)`.
    pub fn feasible(&self, x: &[f64], tol: f64) -> bool {
        self.constraint.contains(x, tol)
    }

    /// Max per-player gradient norm over the vertices of the constraint; exact
    /// for affine gradients.
    fn vertex_gradient_bound(&self) -> f64 {
        let mut g: f64 = 0.0;
        for v in self.constraint.vertices() {
            for i in 0..self.n() {
                g = g.max(norm(&self.gradient(i, &v).expect("validated shapes")));
            }
        }
        if g > 0.0 {
            g
        } else {
            1.0
        }
    }

    /// Sampled max per-player gradient norm over the constraint (plus its
    /// vertices), inflated by 5%.
    pub fn estimate_gradient_bound(&self, samples: usize, seed: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut g: f64 = 0.0;
        let mut eval = |x: &[f64]| {
            for i in 0..self.n() {
                if let Ok(gi) = self.gradient(i, x) {
                    g = g.max(norm(&gi));
                }
            }
        };
        for v in self.constraint.vertices() {
            eval(&v);
        }
        for _ in 0..samples {
            match self.constraint.sample(&mut rng, 10_000) {
                Some(x) => eval(&x),
                None => break,
            }
        }
        if g > 0.0 {
            g * G_ESTIMATE_INFLATION
        } else {
            1.0
        }
    }
}

/// Optional overrides for built-in parameters, keyed by name.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BuiltinParams(pub BTreeMap<String, f64>);

impl BuiltinParams {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, key: &str, value: f64) -> Self {
        self.0.insert(key.to_string(), value);
        self
    }

    fn accept(&self, problem: &str, allowed: &[&str]) -> Result<()> {
        for key in self.0.keys() {
            if !allowed.contains(&key.as_str()) {
                return Err(GameError::UnknownParameter { problem: problem.into(), key: key.clone() });
            }
        }
        Ok(())
    }

    fn get(&self, key: &str, default: f64) -> f64 {
        self.0.get(key).copied().unwrap_or(default)
    }
}

fn hs(a: &[f64], h: f64) -> Halfspace {
    Halfspace::new(a.to_vec(), h)
}

fn scalar_quadratic(q: f64, a: f64, r: f64) -> LossOracle {
    LossOracle::QuadraticBilinear {
        q: vec![vec![q]],
        a: (a != 0.0).then(|| vec![vec![a]]),
        b: None,
        r: (r != 0.0).then(|| vec![vec![r]]),
    }
}

/// Built-in instances.
///
/// * `example_sb`: `x² − y²` vs `y² − x²` on `{−1 ≤ x, y ≤ 8, x + y ≤ 10}`.
/// * `example_sb2`: `‖x‖² − ‖y‖² + (xᵀPy)²` on `[−1,1]⁴ ∩ {x₁ + y₁ + ε(x₂ + y₂) ≤ 1}`;
///   parameters `p_scale` (P = p_scale·I, default 0.5) and `eps` (default 0.01).
/// * `example_nb1`: `x² − y²` on `{y ≥ −2, 4x + y ≤ 0, −4x + y ≤ 0}`; GNE on the boundary.
/// * `example_nb2`: `x² − 10xy − 2y²` on `{x ≥ −5, y ≤ 5, x − y/3 ≤ 5, y − x/3 ≥ −5}`.
/// * `bilinear_affine`: one-dimensional `x²/2 − y²/2 + a·x·y` with `c_x x + c_y y ≤ B`;
///   parameters `a` (2), `cx` (1), `cy` (1), `b` (1), `box` (5, the `|coord| ≤ box` cap
///   that keeps the set bounded).
pub fn load_builtin(name: &str, params: &BuiltinParams) -> Result<GnepProblem> {
    match name {
        "example_sb" => {
            params.accept(name, &[])?;
            let c = Polytope::new(vec![
                hs(&[-1.0, 0.0], 1.0),
                hs(&[1.0, 0.0], 8.0),
                hs(&[0.0, -1.0], 1.0),
                hs(&[0.0, 1.0], 8.0),
                hs(&[1.0, 1.0], 10.0),
            ])?;
            let players = vec![
                Player::new("x", 1, scalar_quadratic(2.0, 0.0, -2.0)),
                Player::new("y", 1, scalar_quadratic(2.0, 0.0, -2.0)),
            ];
            // The own-slice boundary never comes closer than 1 to the
            // equilibrium, so D_min(φ) = 1 − φ; φ = 0.5 gives 0.5.
            GnepProblem::new(
                name,
                players,
                c,
                ConstantsSpec {
                    g: Some(16.0),
                    mu: Some(2.0),
                    l: Some(2.0),
                    delta: Some(1.0),
                    phi: Some(0.5),
                    d_min: Some(0.5),
                    u: Some(vec![0.0, 0.0]),
                    ..Default::default()
                },
            )
        }
        "example_sb2" => {
            params.accept(name, &["p_scale", "eps"])?;
            let p = params.get("p_scale", 0.5);
            let eps = params.get("eps", 0.01);
            if !(p > 0.0 && 2.0 * p * p < 1.0) {
                return Err(GameError::Invalid("p_scale must lie in (0, 1/√2) for strong convexity".into()));
            }
            if !(eps > 0.0 && eps.is_finite()) {
                return Err(GameError::Invalid("eps must be positive".into()));
            }
            let mut halfspaces = Vec::new();
            for k in 0..4 {
                let mut e = vec![0.0; 4];
                e[k] = 1.0;
                halfspaces.push(Halfspace::new(e.clone(), 1.0));
                e[k] = -1.0;
                halfspaces.push(Halfspace::new(e, 1.0));
            }
            halfspaces.push(hs(&[1.0, eps, 1.0, eps], 1.0));
            let c = Polytope::new(halfspaces)?;
            let pm = vec![vec![p, 0.0], vec![0.0, p]];
            let players = vec![
                Player::new("x", 2, LossOracle::SaddleQuartic { p: pm.clone(), role: SaddleRole::Min }),
                Player::new("y", 2, LossOracle::SaddleQuartic { p: pm, role: SaddleRole::Max }),
            ];
            // Own Hessians: 2I + 2(Py)(Py)ᵀ and 2I − 2(Pᵀx)(Pᵀx)ᵀ with ‖x‖², ‖y‖² ≤ 2.
            GnepProblem::new(
                name,
                players,
                c,
                ConstantsSpec {
                    mu: Some(2.0 - 4.0 * p * p),
                    l: Some(2.0 + 4.0 * p * p),
                    u: Some(vec![0.0; 4]),
                    ..Default::default()
                },
            )
        }
        "example_nb1" => {
            params.accept(name, &[])?;
            let c = Polytope::new(vec![hs(&[0.0, -1.0], 2.0), hs(&[4.0, 1.0], 0.0), hs(&[-4.0, 1.0], 0.0)])?;
            let players = vec![
                Player::new("x", 1, scalar_quadratic(2.0, 0.0, 0.0)),
                Player::new("y", 1, scalar_quadratic(2.0, 0.0, -2.0)),
            ];
            GnepProblem::new(
                name,
                players,
                c,
                ConstantsSpec {
                    g: Some(4.0),
                    mu: Some(2.0),
                    l: Some(2.0),
                    u: Some(vec![0.0, 0.0]),
                    ..Default::default()
                },
            )
        }
        "example_nb2" => {
            params.accept(name, &[])?;
            let c = Polytope::new(vec![
                hs(&[-1.0, 0.0], 5.0),
                hs(&[0.0, 1.0], 5.0),
                hs(&[1.0, -1.0 / 3.0], 5.0),
                hs(&[1.0 / 3.0, -1.0], 5.0),
            ])?;
            let players = vec![
                Player::new("x", 1, scalar_quadratic(2.0, -10.0, 0.0)),
                Player::new("y", 1, scalar_quadratic(4.0, 10.0, -2.0)),
            ];
            GnepProblem::new(
                name,
                players,
                c,
                ConstantsSpec {
                    g: Some(260.0 / 3.0),
                    mu: Some(2.0),
                    l: Some(4.0),
                    u: Some(vec![0.0, 0.0]),
                    ..Default::default()
                },
            )
        }
        "bilinear_affine" => {
            params.accept(name, &["a", "cx", "cy", "b", "box"])?;
            let game = BilinearAffineGame::new(
                vec![vec![params.get("a", 2.0)]],
                vec![params.get("cx", 1.0)],
                vec![params.get("cy", 1.0)],
                params.get("b", 1.0),
            )?;
            game.to_problem(params.get("box", 5.0))
        }
        other => Err(GameError::UnknownBuiltin(other.to_string())),
    }
}

/// `f(x, y) = ‖x‖²/2 − ‖y‖²/2 + ⟨x, Ay⟩` with the single shared constraint
/// `⟨x, c_x⟩ + ⟨y, c_y⟩ ≤ B`, `B > 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BilinearAffineGame {
    pub a: Matrix,
    pub c_x: Vec<f64>,
    pub c_y: Vec<f64>,
    pub b: f64,
}

impl BilinearAffineGame {
    pub fn new(a: Matrix, c_x: Vec<f64>, c_y: Vec<f64>, b: f64) -> Result<Self> {
        if !(b > 0.0 && b.is_finite()) {
            return Err(GameError::Invalid(format!("B must be positive, got {b}")));
        }
        if c_x.is_empty() || c_y.is_empty() {
            return Err(GameError::Invalid("empty player dimension".into()));
        }
        check_shape(&a, c_x.len(), c_y.len(), "A")?;
        if c_x.iter().chain(&c_y).any(|v| !v.is_finite()) {
            return Err(GameError::Invalid("non-finite constraint normal".into()));
        }
        Ok(Self { a, c_x, c_y, b })
    }

    /// Scalar special case.
    pub fn one_d(a: f64, c_x: f64, c_y: f64, b: f64) -> Result<Self> {
        Self::new(vec![vec![a]], vec![c_x], vec![c_y], b)
    }

    pub fn dx(&self) -> usize {
        self.c_x.len()
    }

    pub fn dy(&self) -> usize {
        self.c_y.len()
    }

    /// `(x + Ay, y − Aᵀx)`, the two players' own gradients.
    pub fn gradients(&self, x: &[f64], y: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let gx = x.iter().zip(mat_vec(&self.a, y)).map(|(a, b)| a + b).collect();
        let gy = y.iter().zip(transpose_mat_vec(&self.a, x)).map(|(a, b)| a - b).collect();
        (gx, gy)
    }

    /// Full GNEP with the extra cap `|coord| ≤ bound` so the shared set is a
    /// bounded polytope.
    pub fn to_problem(&self, bound: f64) -> Result<GnepProblem> {
        if !(bound > 0.0 && bound.is_finite()) {
            return Err(GameError::Invalid("box bound must be positive".into()));
        }
        let (dx, dy) = (self.dx(), self.dy());
        let d = dx + dy;
        let mut halfspaces = Vec::with_capacity(2 * d + 1);
        let mut joint = self.c_x.clone();
        joint.extend_from_slice(&self.c_y);
        if norm(&joint) > 0.0 {
            halfspaces.push(Halfspace::new(joint, self.b));
        }
        for k in 0..d {
            let mut e = vec![0.0; d];
            e[k] = 1.0;
            halfspaces.push(Halfspace::new(e.clone(), bound));
            e[k] = -1.0;
            halfspaces.push(Halfspace::new(e, bound));
        }
        let c = Polytope::new(halfspaces)?;
        let at: Matrix = (0..dy).map(|j| (0..dx).map(|i| -self.a[i][j]).collect()).collect();
        let eye = |n: usize| -> Matrix { (0..n).map(|i| (0..n).map(|j| f64::from(u8::from(i == j))).collect()).collect() };
        let players = vec![
            Player::new("x", dx, LossOracle::QuadraticBilinear { q: eye(dx), a: Some(self.a.clone()), b: None, r: None }),
            Player::new("y", dy, LossOracle::QuadraticBilinear { q: eye(dy), a: Some(at), b: None, r: None }),
        ];
        GnepProblem::new(
            "bilinear_affine",
            players,
            c,
            ConstantsSpec { mu: Some(1.0), l: Some(1.0), u: Some(vec![0.0; d]), ..Default::default() },
        )
    }
}

/// `n` uncoupled players, each in the corner simplex `{x ≥ 0, Σx ≤ 1} ⊂ ℝ^d`
/// with loss `½‖x − c‖²`, `c = (1/(d+1), …)` strictly inside. The GNE is `c`
/// for everybody.
pub fn simplex_product(n: usize, d: usize) -> Result<GnepProblem> {
    if n == 0 || d == 0 {
        return Err(GameError::Invalid("simplex_product needs n, d >= 1".into()));
    }
    let total = n * d;
    let mut halfspaces = Vec::new();
    for i in 0..n {
        for k in 0..d {
            let mut e = vec![0.0; total];
            e[i * d + k] = -1.0;
            halfspaces.push(Halfspace::new(e, 0.0));
        }
        let mut s = vec![0.0; total];
        s[i * d..(i + 1) * d].iter_mut().for_each(|v| *v = 1.0);
        halfspaces.push(Halfspace::new(s, 1.0));
    }
    let c = Polytope::new(halfspaces)?;
    let centre = 1.0 / (d as f64 + 1.0);
    let players = (0..n)
        .map(|i| {
            let q = (0..d).map(|r| (0..d).map(|c| if r == c { 1.0 } else { 0.0 }).collect()).collect();
            Player::new(format!("p{}", i + 1), d, LossOracle::QuadraticBilinear { q, a: None, b: Some(vec![-centre; d]), r: None })
        })
        .collect();
    // ‖x − c‖ peaks at a simplex vertex.
    let g = ((1.0 - centre).powi(2) + (d as f64 - 1.0) * centre * centre).sqrt();
    GnepProblem::new(
        format!("simplex_product_{n}x{d}"),
        players,
        c,
        ConstantsSpec { g: Some(g), mu: Some(1.0), l: Some(1.0), u: Some(vec![centre; total]), ..Default::default() },
    )
}
