//! Round-based protocol engine: the online feasible point method with
//! alternating coordination, plus the alternating projected-gradient and
//! wait-your-turn baselines and single-player OGD on moving sets.
//!
//! Players are 0-based here; at round `t` (1-based) the set-mover is player
//! `t mod n`.

use std::collections::VecDeque;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::game::{GameError, GnepProblem};
use crate::geometry::{BoxSet, GeometryError, Polytope};
use crate::linalg::{descend, dist, dot, norm, scale};

/// Shrink factor applied to every desired set when the termination criterion fires.
pub const SHRINK_FACTOR: f64 = 0.5;
/// Sets with diameter below this fraction of `D` are no longer shrunk.
pub const MIN_SET_DIAMETER: f64 = 1e-12;
/// Smallest face gap (relative to coordinate magnitude) an interior step may create.
const FACE_GAP: f64 = 1e-13;

#[derive(Debug, Error)]
pub enum FpmError {
    #[error("invalid initialization: {0}")]
    InvalidInit(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Game(#[from] GameError),
}

pub type Result<T> = std::result::Result<T, FpmError>;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "rule", content = "value")]
pub enum EtaRule {
    /// `min(D/(G√T), δ/L)`; needs δ and L on the problem.
    Theorem,
    /// `D/(G√T)`.
    #[serde(rename = "sqrtT")]
    SqrtT,
    Fixed(f64),
}

/// How the set-mover's safety margin is measured.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IotaMode {
    /// Euclidean distance of the worst-case product box to the boundary.
    Euclidean,
    /// Largest multiple of `−g` the worst-case product box can be moved by.
    Directional,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EngineConfig {
    pub horizon: usize,
    pub eta_rule: EtaRule,
    pub iota_mode: IotaMode,
    pub seed: u64,
    pub audit_tol: f64,
}

impl EngineConfig {
    pub fn new(horizon: usize) -> Self {
        Self { horizon, eta_rule: EtaRule::SqrtT, iota_mode: IotaMode::Euclidean, seed: 0, audit_tol: 1e-9 }
    }

    pub fn with_eta_rule(mut self, rule: EtaRule) -> Self {
        self.eta_rule = rule;
        self
    }

    pub fn with_iota_mode(mut self, mode: IotaMode) -> Self {
        self.iota_mode = mode;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(FpmError::InvalidConfig("T must be >= 1".into()));
        }
        if let EtaRule::Fixed(v) = self.eta_rule {
            if !(v > 0.0 && v.is_finite()) {
                return Err(FpmError::InvalidConfig(format!("fixed step size must be positive, got {v}")));
            }
        }
        if !(self.audit_tol >= 0.0) {
            return Err(FpmError::InvalidConfig("audit tolerance must be >= 0".into()));
        }
        Ok(())
    }

    /// Step size for `problem` under this configuration.
    pub fn eta(&self, problem: &GnepProblem) -> Result<f64> {
        self.validate()?;
        let c = problem.constants();
        let base = c.d / (c.g * (self.horizon as f64).sqrt());
        match self.eta_rule {
            EtaRule::SqrtT => Ok(base),
            EtaRule::Fixed(v) => Ok(v),
            EtaRule::Theorem => match (c.delta, c.l) {
                (Some(delta), Some(l)) => Ok(base.min(delta / l)),
                _ => Err(FpmError::InvalidConfig("theorem step rule needs delta and L on the problem".into())),
            },
        }
    }
}

/// Initial iterate and desired set of one player.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlayerInit {
    pub x: Vec<f64>,
    pub set: BoxSet,
}

impl PlayerInit {
    pub fn new(x: Vec<f64>, lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        Ok(Self { x, set: BoxSet::new(lower, upper)? })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepKind {
    /// Moved its desired set together with its iterate.
    SetMover,
    /// Moved inside its fixed desired set.
    Interior,
    /// Termination-criterion round: iterate frozen, set shrunk.
    Frozen,
    /// Projected gradient step onto the constraint slice (baselines).
    Projected,
    /// Waiting for its turn (baselines).
    Idle,
    /// Projected OGD step onto the next side-information set.
    Ogd,
}

impl StepKind {
    pub fn as_str(self) -> &'static str {
        match self {
            StepKind::SetMover => "set-mover",
            StepKind::Interior => "interior",
            StepKind::Frozen => "frozen",
            StepKind::Projected => "projected",
            StepKind::Idle => "idle",
            StepKind::Ogd => "ogd",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Fpm,
    Altgd,
    Naive,
    OgdSideinfo,
}

impl Algorithm {
    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::Fpm => "fpm",
            Algorithm::Altgd => "altgd",
            Algorithm::Naive => "naive",
            Algorithm::OgdSideinfo => "ogd-sideinfo",
        }
    }
}

/// What one player played and did in one round.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PlayerLog {
    /// Iterate played this round.
    pub x: Vec<f64>,
    /// Desired set in force this round.
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub kind: StepKind,
    /// Multiplier `s` of the applied displacement `−s·g`.
    pub step_len: f64,
    pub iota: Option<f64>,
    pub eta_bar: Option<f64>,
    pub grad_norm: f64,
    pub in_relint: bool,
}

/// One round of play, logged before the round's update is applied.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RoundLog {
    pub t: usize,
    pub phase_k: usize,
    pub players: Vec<PlayerLog>,
    /// Joint iterate inside the constraint at the audit tolerance.
    pub feasible: bool,
    /// Product of the desired sets inside the constraint at the audit tolerance.
    pub sets_feasible: bool,
    pub max_violation: f64,
    pub tc_fired: bool,
    pub shrink_applied: bool,
    /// Norm of this round's product-set translation.
    pub translation: f64,
    pub dist_to_u: Option<f64>,
}

impl RoundLog {
    pub fn joint(&self) -> Vec<f64> {
        self.players.iter().flat_map(|p| p.x.iter().copied()).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunTrace {
    pub algorithm: Algorithm,
    pub problem: String,
    pub dims: Vec<usize>,
    pub horizon: usize,
    pub eta: f64,
    pub u: Option<Vec<f64>>,
    pub rounds: Vec<RoundLog>,
    /// Joint iterate after the last round.
    pub final_x: Vec<f64>,
}

impl RunTrace {
    pub fn joint(&self, t: usize) -> Vec<f64> {
        self.rounds[t - 1].joint()
    }

    /// Joint iterate of the last logged round, `x_T`.
    pub fn last_played(&self) -> Vec<f64> {
        self.rounds.last().map(RoundLog::joint).unwrap_or_default()
    }

    pub fn all_feasible(&self) -> bool {
        self.rounds.iter().all(|r| r.feasible && r.sets_feasible)
    }

    pub fn violations(&self) -> usize {
        self.rounds.iter().filter(|r| !(r.feasible && r.sets_feasible)).count()
    }

    /// Rounds at which a new phase starts (`p_s(k)` for `k ≥ 2`).
    pub fn phase_starts(&self) -> Vec<usize> {
        self.rounds.iter().filter(|r| r.tc_fired).map(|r| r.t + 1).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlayerState {
    pub x: Vec<f64>,
    pub set: BoxSet,
}

/// Everything the protocol carries between rounds.
#[derive(Clone, Debug)]
pub struct ProtocolState {
    pub t: usize,
    pub k: usize,
    pub phase_start: usize,
    pub players: Vec<PlayerState>,
    /// Product-set translation norms since the phase started, at most `n` kept.
    pub window: VecDeque<f64>,
    pub eta: f64,
    /// `D/√T`.
    pub tc_threshold: f64,
    /// Sets below this diameter are not shrunk any more.
    pub min_diameter: f64,
}

impl ProtocolState {
    /// Validates `x₁ ∈ relint S₁` per player and `∏ S₁ ⊆ 𝔠`.
    pub fn new(problem: &GnepProblem, init: &[PlayerInit], config: &EngineConfig) -> Result<Self> {
        let eta = config.eta(problem)?;
        let dims = problem.dims();
        if init.len() != dims.len() {
            return Err(FpmError::InvalidInit(format!("expected {} players, got {}", dims.len(), init.len())));
        }
        for (i, (p, &d)) in init.iter().zip(&dims).enumerate() {
            if p.x.len() != d || p.set.dim() != d {
                return Err(FpmError::InvalidInit(format!("player {i}: expected dimension {d}")));
            }
            if !p.set.contains_relint(&p.x) {
                return Err(FpmError::InvalidInit(format!("player {i}: iterate not in the relative interior of its set")));
            }
        }
        let product = BoxSet::product(init.iter().map(|p| &p.set));
        if !problem.constraint().contains_box(&product, config.audit_tol) {
            return Err(FpmError::InvalidInit("product of the initial sets is not inside the constraint".into()));
        }
        let c = problem.constants();
        Ok(Self {
            t: 1,
            k: 1,
            phase_start: 1,
            players: init.iter().map(|p| PlayerState { x: p.x.clone(), set: p.set.clone() }).collect(),
            window: VecDeque::with_capacity(init.len()),
            eta,
            tc_threshold: c.d / (config.horizon as f64).sqrt(),
            min_diameter: MIN_SET_DIAMETER * c.d,
        })
    }

    pub fn n(&self) -> usize {
        self.players.len()
    }

    pub fn joint(&self) -> Vec<f64> {
        self.players.iter().flat_map(|p| p.x.iter().copied()).collect()
    }

    pub fn product_set(&self) -> BoxSet {
        BoxSet::product(self.players.iter().map(|p| &p.set))
    }

    /// Set-mover of the current round.
    pub fn mover(&self) -> usize {
        self.t % self.n()
    }
}

/// Result of a set-mover step.
#[derive(Clone, Debug, PartialEq)]
pub struct SetMoverStep {
    pub x: Vec<f64>,
    pub set: BoxSet,
    pub step: f64,
    pub iota: f64,
    /// Largest multiplier keeping the whole product set feasible.
    pub sigma: f64,
    pub grad_norm: f64,
}

/// Result of an interior step.
#[derive(Clone, Debug, PartialEq)]
pub struct InteriorStep {
    pub x: Vec<f64>,
    pub step: f64,
    pub eta_bar: f64,
    pub grad_norm: f64,
}

fn embed(problem: &GnepProblem, i: usize, v: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; problem.total_dim()];
    let off = problem.offset(i);
    out[off..off + v.len()].copy_from_slice(v);
    out
}

fn product_with(sets: &[&BoxSet], i: usize, replacement: &BoxSet) -> BoxSet {
    BoxSet::product(sets.iter().enumerate().map(|(j, s)| if j == i { replacement } else { *s }))
}

/// The set-mover's update: iterate and desired set move by the same vector
/// `−s·g` with `s = min(η, ι, σ)`.
///
/// `ι` is the margin of the worst-case product box `argmin_{S^{(i)}}⟨g,·⟩ × S^{(−i)}`.
/// `σ` is the exact largest multiplier for which the translated product set
/// stays in the constraint; it only binds when `‖g‖ > 1` or when facets with
/// mixed-sign normals make the worst-case box slacker than the full set.
pub fn step_set_mover(state: &ProtocolState, problem: &GnepProblem, i: usize, config: &EngineConfig) -> Result<SetMoverStep> {
    let joint = state.joint();
    let g = problem.gradient(i, &joint)?;
    let me = &state.players[i];
    let sets: Vec<&BoxSet> = state.players.iter().map(|p| &p.set).collect();
    let worst = me.set.support_min(&g)?;
    let worst_product = product_with(&sets, i, &worst);
    let g_embedded = embed(problem, i, &g);
    let minus_g: Vec<f64> = g_embedded.iter().map(|v| -v).collect();
    let c = problem.constraint();
    let iota = match config.iota_mode {
        IotaMode::Euclidean => c.dist_box_boundary(&worst_product)?,
        IotaMode::Directional => c.max_translation(&worst_product, &minus_g)?,
    };
    let sigma = c.max_translation(&state.product_set(), &minus_g)?;
    let grad_norm = norm(&g);
    let mut step = state.eta.min(iota).min(sigma);
    if grad_norm == 0.0 || !step.is_finite() {
        step = if grad_norm == 0.0 { state.eta.min(iota) } else { 0.0 };
        return Ok(SetMoverStep { x: me.x.clone(), set: me.set.clone(), step, iota, sigma, grad_norm });
    }
    let v = scale(&g, -step);
    let x: Vec<f64> = me.x.iter().zip(&v).map(|(a, b)| a + b).collect();
    let set = me.set.translate(&v)?;
    // Float guard: a translation that rounds the iterate onto a face of its
    // own set, or the set across a facet, is dropped.
    let moved_product = product_with(&sets, i, &set);
    if !set.contains_relint(&x) || !c.contains_box(&moved_product, 0.01 * config.audit_tol) {
        return Ok(SetMoverStep { x: me.x.clone(), set: me.set.clone(), step: 0.0, iota, sigma, grad_norm });
    }
    Ok(SetMoverStep { x, set, step, iota, sigma, grad_norm })
}

/// A non-mover's update inside its own set: `x − min(η, η̄/2)·g`.
pub fn step_interior(state: &ProtocolState, problem: &GnepProblem, i: usize, config: &EngineConfig) -> Result<InteriorStep> {
    let _ = config;
    let g = problem.gradient(i, &state.joint())?;
    let me = &state.players[i];
    let eta_bar = me.set.max_step_inside(&me.x, &g)?;
    let grad_norm = norm(&g);
    let step = state.eta.min(0.5 * eta_bar);
    if grad_norm == 0.0 || step == 0.0 {
        return Ok(InteriorStep { x: me.x.clone(), step: 0.0, eta_bar, grad_norm });
    }
    let x = descend(&me.x, step, &g);
    if !me.set.contains_relint(&x) || !keeps_face_gaps(&me.set, &me.x, &x) {
        return Ok(InteriorStep { x: me.x.clone(), step: 0.0, eta_bar, grad_norm });
    }
    Ok(InteriorStep { x, step, eta_bar, grad_norm })
}

/// Repeated half-steps approach a face geometrically; once sets stop
/// shrinking the iterate would reach the face in floating point and the next
/// set translation could round it out of the relative interior. A step may
/// therefore not bring any face gap below a few hundred ulps.
fn keeps_face_gaps(set: &BoxSet, old: &[f64], new: &[f64]) -> bool {
    (0..set.dim()).all(|k| {
        let (lo, hi) = (set.lower()[k], set.upper()[k]);
        if lo == hi {
            return true;
        }
        let margin = FACE_GAP * (1.0 + new[k].abs().max(lo.abs()).max(hi.abs()));
        let gap_new = (new[k] - lo).min(hi - new[k]);
        let gap_old = (old[k] - lo).min(hi - old[k]);
        gap_new >= margin.min(gap_old)
    })
}

/// Termination criterion: either `n` rounds of the phase have elapsed and the
/// last `n` product-set translations were all at most `D/√T`, or the phase
/// has lasted `2^k` rounds.
pub fn tc_check(state: &ProtocolState, config: &EngineConfig) -> bool {
    let _ = config;
    let elapsed = state.t - state.phase_start;
    let n = state.n();
    let stalled = elapsed >= n
        && state.window.len() >= n
        && state.window.iter().rev().take(n).all(|&m| m <= state.tc_threshold);
    let overdue = state.k < usize::BITS as usize && elapsed >= 1usize << state.k;
    stalled || overdue
}

/// Termination-criterion round: iterates frozen, every set halved around its
/// iterate, new phase starting at `t + 1`. Returns whether any set shrank.
pub fn on_termination(state: &mut ProtocolState, config: &EngineConfig) -> Result<bool> {
    let _ = config;
    let mut shrunk = false;
    for p in &mut state.players {
        if p.set.diameter() < state.min_diameter {
            continue;
        }
        let next = p.set.shrink_around(&p.x, SHRINK_FACTOR)?;
        shrunk |= next != p.set;
        p.set = next;
    }
    state.phase_start = state.t + 1;
    state.k += 1;
    state.window.clear();
    Ok(shrunk)
}

fn audit(problem: &GnepProblem, joint: &[f64], product: &BoxSet, tol: f64) -> (bool, bool, f64) {
    let c = problem.constraint();
    (c.contains(joint, tol), c.contains_box(product, tol), c.max_violation(joint))
}

fn dist_to_u(problem: &GnepProblem, joint: &[f64]) -> Option<f64> {
    problem.constants().u.as_ref().map(|u| dist(joint, u))
}

/// Runs the online feasible point method for `config.horizon` rounds.
pub fn fpm_run(problem: &GnepProblem, init: &[PlayerInit], config: &EngineConfig) -> Result<RunTrace> {
    let mut state = ProtocolState::new(problem, init, config)?;
    let n = state.n();
    let mut rounds = Vec::with_capacity(config.horizon);
    for t in 1..=config.horizon {
        debug_assert_eq!(state.t, t);
        let joint = state.joint();
        let product = state.product_set();
        let (feasible, sets_feasible, max_violation) = audit(problem, &joint, &product, config.audit_tol);
        let mut logs: Vec<PlayerLog> = state
            .players
            .iter()
            .map(|p| PlayerLog {
                x: p.x.clone(),
                lower: p.set.lower().to_vec(),
                upper: p.set.upper().to_vec(),
                kind: StepKind::Frozen,
                step_len: 0.0,
                iota: None,
                eta_bar: None,
                grad_norm: 0.0,
                in_relint: p.set.contains_relint(&p.x),
            })
            .collect();
        let mut log = RoundLog {
            t,
            phase_k: state.k,
            players: Vec::new(),
            feasible,
            sets_feasible,
            max_violation,
            tc_fired: false,
            shrink_applied: false,
            translation: 0.0,
            dist_to_u: dist_to_u(problem, &joint),
        };
        if tc_check(&state, config) {
            for (i, l) in logs.iter_mut().enumerate() {
                l.grad_norm = norm(&problem.gradient(i, &joint)?);
            }
            log.tc_fired = true;
            log.shrink_applied = on_termination(&mut state, config)?;
        } else {
            // Every step reads the same start-of-round snapshot.
            let mover = state.mover();
            let mut next = state.players.clone();
            for i in 0..n {
                if i == mover {
                    let s = step_set_mover(&state, problem, i, config)?;
                    log.translation = s.step * s.grad_norm;
                    logs[i].kind = StepKind::SetMover;
                    logs[i].step_len = s.step;
                    logs[i].iota = Some(s.iota);
                    logs[i].grad_norm = s.grad_norm;
                    next[i] = PlayerState { x: s.x, set: s.set };
                } else {
                    let s = step_interior(&state, problem, i, config)?;
                    logs[i].kind = StepKind::Interior;
                    logs[i].step_len = s.step;
                    logs[i].eta_bar = Some(s.eta_bar);
                    logs[i].grad_norm = s.grad_norm;
                    next[i].x = s.x;
                }
            }
            state.players = next;
            if state.window.len() == n {
                state.window.pop_front();
            }
            state.window.push_back(log.translation);
        }
        log.players = logs;
        rounds.push(log);
        state.t += 1;
    }
    Ok(RunTrace {
        algorithm: Algorithm::Fpm,
        problem: problem.name().to_string(),
        dims: problem.dims(),
        horizon: config.horizon,
        eta: state.eta,
        u: problem.constants().u.clone(),
        rounds,
        final_x: state.joint(),
    })
}

/// Projection of `y` onto `X^{(i)}(x^{(−i)})`: exact interval clamp for
/// one-dimensional players, Dykstra otherwise.
pub fn project_slice(problem: &GnepProblem, i: usize, joint: &[f64], y: &[f64], tol: f64) -> Result<Vec<f64>> {
    let slice: Polytope = problem.constraint().slice(i, &problem.others(joint, i), &problem.dims())?;
    if y.len() == 1 {
        return Ok(slice.bounding_box().project(y)?);
    }
    Ok(slice.project(y, tol)?)
}

fn alternating_run(problem: &GnepProblem, init: &[PlayerInit], config: &EngineConfig, singleton_sets: bool) -> Result<RunTrace> {
    let eta = config.eta(problem)?;
    let dims = problem.dims();
    let n = dims.len();
    if init.len() != n {
        return Err(FpmError::InvalidInit(format!("expected {n} players, got {}", init.len())));
    }
    let mut joint: Vec<f64> = Vec::with_capacity(problem.total_dim());
    for (i, (p, &d)) in init.iter().zip(&dims).enumerate() {
        if p.x.len() != d {
            return Err(FpmError::InvalidInit(format!("player {i}: expected dimension {d}")));
        }
        joint.extend_from_slice(&p.x);
    }
    if !problem.feasible(&joint, config.audit_tol) {
        return Err(FpmError::InvalidInit("initial joint iterate is infeasible".into()));
    }
    let proj_tol = 1e-12 * (1.0 + problem.constants().d);
    let mut rounds = Vec::with_capacity(config.horizon);
    for t in 1..=config.horizon {
        let mover = t % n;
        let (feasible, _, max_violation) = audit(problem, &joint, &BoxSet::point(&joint)?, config.audit_tol);
        let mut logs = Vec::with_capacity(n);
        let mut next = joint.clone();
        for i in 0..n {
            let own = problem.block(&joint, i).to_vec();
            let (lower, upper) = if singleton_sets {
                (own.clone(), own.clone())
            } else {
                (Vec::new(), Vec::new())
            };
            let mut log = PlayerLog {
                x: own.clone(),
                lower,
                upper,
                kind: StepKind::Idle,
                step_len: 0.0,
                iota: None,
                eta_bar: None,
                grad_norm: 0.0,
                in_relint: true,
            };
            if i == mover {
                let g = problem.gradient(i, &joint)?;
                let y = descend(&own, eta, &g);
                let x = project_slice(problem, i, &joint, &y, proj_tol)?;
                log.kind = StepKind::Projected;
                log.step_len = eta;
                log.grad_norm = norm(&g);
                next = problem.replace_block(&next, i, &x);
            }
            logs.push(log);
        }
        let translation = if singleton_sets { dist(&joint, &next) } else { 0.0 };
        rounds.push(RoundLog {
            t,
            phase_k: 1,
            players: logs,
            feasible,
            sets_feasible: feasible,
            max_violation,
            tc_fired: false,
            shrink_applied: false,
            translation,
            dist_to_u: dist_to_u(problem, &joint),
        });
        joint = next;
    }
    Ok(RunTrace {
        algorithm: if singleton_sets { Algorithm::Naive } else { Algorithm::Altgd },
        problem: problem.name().to_string(),
        dims,
        horizon: config.horizon,
        eta,
        u: problem.constants().u.clone(),
        rounds,
        final_x: joint,
    })
}

/// Alternating projected gradient descent: at round `t` player `t mod n`
/// takes a projected step onto its constraint slice, the others hold still.
/// Only the iterates of `init` are used.
pub fn altgd_run(problem: &GnepProblem, init: &[PlayerInit], config: &EngineConfig) -> Result<RunTrace> {
    alternating_run(problem, init, config, false)
}

/// Wait-your-turn protocol: every player announces the singleton `{x}` and
/// moves only on its turn, by a projected gradient step onto its slice.
pub fn naive_wait_run(problem: &GnepProblem, init: &[PlayerInit], config: &EngineConfig) -> Result<RunTrace> {
    alternating_run(problem, init, config, true)
}

/// Random valid initialization: a box of random shape around a random point
/// well inside the constraint, with the iterate drawn inside the box.
pub fn random_init<R: Rng + ?Sized>(problem: &GnepProblem, rng: &mut R) -> Result<Vec<PlayerInit>> {
    let c = problem.constraint();
    let d_total = problem.total_dim() as f64;
    let floor = 1e-3 * problem.constants().d;
    for _ in 0..10_000 {
        let Some(p) = c.sample(rng, 100_000) else { break };
        let margin = c.dist_point_boundary(&p)?;
        if margin < floor {
            continue;
        }
        let radius = rng.random_range(0.1..0.9) * margin / d_total.sqrt();
        let mut init = Vec::with_capacity(problem.n());
        for i in 0..problem.n() {
            let centre = problem.block(&p, i);
            let mut lower = Vec::with_capacity(centre.len());
            let mut upper = Vec::with_capacity(centre.len());
            let mut x = Vec::with_capacity(centre.len());
            for &ck in centre {
                let w = radius * rng.random_range(0.2..1.0);
                lower.push(ck - w);
                upper.push(ck + w);
                x.push(ck + w * rng.random_range(-0.9..0.9));
            }
            init.push(PlayerInit::new(x, lower, upper)?);
        }
        return Ok(init);
    }
    Err(FpmError::InvalidInit("could not sample an interior initialization".into()))
}

/// [`random_init`] from a seed.
pub fn seeded_init(problem: &GnepProblem, seed: u64) -> Result<Vec<PlayerInit>> {
    random_init(problem, &mut ChaCha8Rng::seed_from_u64(seed))
}

type StageLoss = dyn Fn(usize, &[f64]) -> (f64, Vec<f64>) + Send + Sync;

/// Step-size schedule of OGD with side information.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OgdSchedule {
    /// `η_t = (D + c)/(G√t)`.
    SqrtT,
    /// `η_t = 1/(tμ)`.
    StronglyConvex,
}

/// A single-player online problem whose learner is told `S_{t+1}` before
/// choosing `x_{t+1}`.
#[derive(Clone)]
pub struct MovingSetInstance {
    /// `S_1, …, S_T`.
    pub sets: Vec<BoxSet>,
    /// `f_t(x) -> (value, gradient)`, `t` 1-based.
    pub loss: Arc<StageLoss>,
    pub u: Vec<f64>,
    pub x1: Vec<f64>,
    /// Bound on the set diameters.
    pub d: f64,
    /// Bound on the gradient norms over the sets.
    pub g: f64,
    /// `dist(S_t, u) ≤ c/√t`.
    pub c: f64,
    /// `ω_{t+1} ≤ c′ G η_t`.
    pub c_prime: f64,
    /// Strong convexity of every `f_t`, if any.
    pub mu: Option<f64>,
}

impl std::fmt::Debug for MovingSetInstance {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MovingSetInstance")
            .field("T", &self.sets.len())
            .field("d", &self.d)
            .field("g", &self.g)
            .field("c", &self.c)
            .field("c_prime", &self.c_prime)
            .field("mu", &self.mu)
            .finish()
    }
}

impl MovingSetInstance {
    pub fn horizon(&self) -> usize {
        self.sets.len()
    }

    pub fn eta(&self, schedule: OgdSchedule, t: usize) -> Result<f64> {
        match schedule {
            OgdSchedule::SqrtT => Ok((self.d + self.c) / (self.g * (t as f64).sqrt())),
            OgdSchedule::StronglyConvex => match self.mu {
                Some(mu) => Ok(1.0 / (t as f64 * mu)),
                None => Err(FpmError::InvalidConfig("strongly convex schedule needs mu".into())),
            },
        }
    }

    /// `ω_{t+1} = max_{a ∈ S_t} dist(S_{t+1}, a)` for `t = 1..T−1`.
    pub fn omegas(&self) -> Vec<f64> {
        self.sets.windows(2).map(|w| w[0].excess_over(&w[1]).expect("equal dimensions")).collect()
    }

    /// A conforming instance: box sets converging to `u` at rate `c/√t`,
    /// random convex quadratic losses (strongly convex if `mu` is given), and
    /// `G`, `c′` computed exactly from the generated data.
    pub fn generate(seed: u64, dim: usize, horizon: usize, mu: Option<f64>) -> Result<Self> {
        if dim == 0 || horizon < 2 {
            return Err(FpmError::InvalidConfig("need dim >= 1 and T >= 2".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let c = rng.random_range(0.1..1.0);
        let half: Vec<f64> = (0..dim).map(|_| rng.random_range(0.2..1.0)).collect();
        let signs: Vec<f64> = (0..dim).map(|_| if rng.random_bool(0.5) { 1.0 } else { -1.0 }).collect();
        let wobble = rng.random_range(0.0..0.2);
        let root_d = (dim as f64).sqrt();
        let mut sets = Vec::with_capacity(horizon);
        for t in 1..=horizon {
            let tf = t as f64;
            // Per-axis excess c/√(t·d) gives dist(S_t, u) = c/√t exactly.
            let excess = c / (tf.sqrt() * root_d);
            let w: Vec<f64> = half.iter().map(|h| h * (1.0 + wobble * (0.7 * tf).sin())).collect();
            let centre: Vec<f64> = (0..dim).map(|k| u[k] + signs[k] * (w[k] + excess)).collect();
            sets.push(BoxSet::new(
                centre.iter().zip(&w).map(|(m, wk)| m - wk).collect(),
                centre.iter().zip(&w).map(|(m, wk)| m + wk).collect(),
            )?);
        }
        let d = sets.iter().map(BoxSet::diameter).fold(0.0, f64::max);
        // f_t(x) = ½ a_t ‖x − z_t‖² + ⟨b_t, x⟩
        let mut params = Vec::with_capacity(horizon);
        for _ in 0..horizon {
            let a = match mu {
                Some(m) => rng.random_range(m..2.0 * m),
                None => rng.random_range(0.0..1.0),
            };
            let z: Vec<f64> = (0..dim).map(|_| rng.random_range(-2.0..2.0)).collect();
            let b: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
            params.push((a, z, b));
        }
        // The gradient is affine, so its norm over a box peaks at a corner.
        let mut g: f64 = 0.0;
        for (s, (a, z, b)) in sets.iter().zip(&params) {
            for mask in 0..(1usize << dim) {
                let corner: Vec<f64> = (0..dim)
                    .map(|k| if mask >> k & 1 == 1 { s.upper()[k] } else { s.lower()[k] })
                    .collect();
                let grad: Vec<f64> = (0..dim).map(|k| a * (corner[k] - z[k]) + b[k]).collect();
                g = g.max(norm(&grad));
            }
        }
        let g = g.max(1e-12);
        let loss: Arc<StageLoss> = Arc::new(move |t: usize, x: &[f64]| {
            let (a, z, b) = &params[t - 1];
            let diff: Vec<f64> = x.iter().zip(z).map(|(xi, zi)| xi - zi).collect();
            let value = 0.5 * a * dot(&diff, &diff) + dot(b, x);
            let grad = diff.iter().zip(b).map(|(di, bi)| a * di + bi).collect();
            (value, grad)
        });
        let x1 = sets[0].center();
        let mut inst = MovingSetInstance { sets, loss, u, x1, d, g, c, c_prime: 0.0, mu };
        let omegas = inst.omegas();
        let mut c_prime: f64 = 0.0;
        for (t, w) in omegas.iter().enumerate() {
            c_prime = c_prime.max(w / (g * inst.eta(OgdSchedule::SqrtT, t + 1)?));
        }
        inst.c_prime = c_prime;
        Ok(inst)
    }
}

/// Outcome of [`ogd_side_info_run`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OgdOutcome {
    pub trace: RunTrace,
    /// `Σ_t f_t(x_t) − f_t(u)`.
    pub reg_f: f64,
    /// Rounds with `x_t ∉ S_t`.
    pub violations: usize,
    /// `x_{T+1}` before any projection (there is no `S_{T+1}`).
    pub final_x: Vec<f64>,
}

/// Online gradient descent with side information:
/// `x_{t+1} = Π_{S_{t+1}}(x_t − η_t ∇f_t(x_t))`.
pub fn ogd_side_info_run(instance: &MovingSetInstance, schedule: OgdSchedule, audit_tol: f64) -> Result<OgdOutcome> {
    let horizon = instance.horizon();
    if horizon == 0 {
        return Err(FpmError::InvalidConfig("instance has no rounds".into()));
    }
    if !instance.sets[0].contains(&instance.x1, 0.0) {
        return Err(FpmError::InvalidInit("x1 must lie in S_1".into()));
    }
    let mut x = instance.x1.clone();
    let mut reg_f = 0.0;
    let mut violations = 0;
    let mut rounds = Vec::with_capacity(horizon);
    for t in 1..=horizon {
        let s = &instance.sets[t - 1];
        let feasible = s.contains(&x, audit_tol);
        violations += usize::from(!feasible);
        let (fx, g) = (instance.loss)(t, &x);
        let (fu, _) = (instance.loss)(t, &instance.u);
        reg_f += fx - fu;
        let eta = instance.eta(schedule, t)?;
        let y = descend(&x, eta, &g);
        let next = match instance.sets.get(t) {
            Some(s_next) => s_next.project(&y)?,
            None => y,
        };
        rounds.push(RoundLog {
            t,
            phase_k: 1,
            players: vec![PlayerLog {
                x: x.clone(),
                lower: s.lower().to_vec(),
                upper: s.upper().to_vec(),
                kind: StepKind::Ogd,
                step_len: eta,
                iota: None,
                eta_bar: None,
                grad_norm: norm(&g),
                in_relint: s.contains_relint(&x),
            }],
            feasible,
            sets_feasible: true,
            max_violation: 0.0,
            tc_fired: false,
            shrink_applied: false,
            translation: 0.0,
            dist_to_u: Some(dist(&x, &instance.u)),
        });
        x = next;
    }
    Ok(OgdOutcome {
        trace: RunTrace {
            algorithm: Algorithm::OgdSideinfo,
            problem: "moving-set".into(),
            dims: vec![instance.x1.len()],
            horizon,
            eta: instance.eta(schedule, 1)?,
            u: Some(instance.u.clone()),
            rounds,
            final_x: x.clone(),
        },
        reg_f,
        violations,
        final_x: x,
    })
}
