//! Experiment plumbing behind the `gnep-fpm` binary: configuration, run
//! orchestration, CSV traces, JSON reports and SVG plots.
//!
//! Every `cli_*` function is usable as a library call; the binary only parses
//! flags and maps [`HarnessError`] to an exit code.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{
    self, benign_report, bilinear_boundary_equilibria, BenignReport, BoundaryEquilibriaReport, Regime, RegretReport,
};
use crate::fpm::{
    altgd_run, fpm_run, naive_wait_run, ogd_side_info_run, seeded_init, Algorithm, EngineConfig, EtaRule, IotaMode,
    MovingSetInstance, OgdSchedule, PlayerInit, RunTrace,
};
use crate::game::{load_builtin, BilinearAffineGame, BuiltinParams, GnepProblem, BUILTIN_NAMES};
use crate::linalg::norm;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config: {0}")]
    Config(String),
    #[error("run: {0}")]
    Run(String),
    #[error("i/o: {0}")]
    Io(String),
}

impl HarnessError {
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 2,
            HarnessError::Run(_) => 3,
            HarnessError::Io(_) => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;

fn io_err(path: &Path, e: impl std::fmt::Display) -> HarnessError {
    HarnessError::Io(format!("{}: {e}", path.display()))
}

fn run_err(e: impl std::fmt::Display) -> HarnessError {
    HarnessError::Run(e.to_string())
}

// ---------------------------------------------------------------------------
// Configuration

/// One player's starting iterate and desired box, as stored in init files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InitSpec {
    pub x: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl InitSpec {
    pub fn to_player_init(&self) -> Result<PlayerInit> {
        PlayerInit::new(self.x.clone(), self.lower.clone(), self.upper.clone())
            .map_err(|e| HarnessError::Config(format!("init: {e}")))
    }
}

fn spec(x: f64, lower: f64, upper: f64) -> InitSpec {
    InitSpec { x: vec![x], lower: vec![lower], upper: vec![upper] }
}

/// Named initializations for the documented example runs.
///
/// * `fig1` (`example_sb`): `x = 2 ∈ [1, 3]`, `y = 6 ∈ [5, 7]`.
/// * `fig2` (`example_nb1`, repo-chosen): `x = 0 ∈ [−0.2, 0.2]`, `y = −1.5 ∈ [−1.7, −1.3]`.
/// * `fig3-stall` (`example_nb2`, repo-chosen): `x = 5.5 ∈ [5.3, 5.7]`, `y = 4 ∈ [3.8, 4.2]`;
///   the run slides onto the facet `x − y/3 = 5` and stops short of the GNE.
/// * `fig3-converge` (`example_nb2`, repo-chosen): `x = 1 ∈ [0.5, 1.5]`, `y = −1 ∈ [−1.5, −0.5]`.
pub fn documented_init(name: &str) -> Option<(&'static str, Vec<InitSpec>)> {
    match name {
        "fig1" => Some(("example_sb", vec![spec(2.0, 1.0, 3.0), spec(6.0, 5.0, 7.0)])),
        "fig2" => Some(("example_nb1", vec![spec(0.0, -0.2, 0.2), spec(-1.5, -1.7, -1.3)])),
        "fig3-stall" => Some(("example_nb2", vec![spec(5.5, 5.3, 5.7), spec(4.0, 3.8, 4.2)])),
        "fig3-converge" => Some(("example_nb2", vec![spec(1.0, 0.5, 1.5), spec(-1.0, -1.5, -0.5)])),
        _ => None,
    }
}

/// Preset used when no initialization is requested.
pub fn default_preset(problem: &str) -> Option<&'static str> {
    match problem {
        "example_sb" => Some("fig1"),
        "example_nb1" => Some("fig2"),
        "example_nb2" => Some("fig3-stall"),
        _ => None,
    }
}

/// Knobs of the generated moving-set instance used by `ogd-sideinfo`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OgdConfig {
    pub dim: usize,
    /// Strong convexity of the stage losses; switches to `η_t = 1/(tμ)`.
    pub mu: Option<f64>,
}

impl Default for OgdConfig {
    fn default() -> Self {
        Self { dim: 2, mu: None }
    }
}

/// Everything one run needs. Loaded from JSON; command-line flags override
/// individual fields.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Built-in name or path to a problem JSON file.
    pub problem: String,
    pub params: BuiltinParams,
    pub algorithm: Algorithm,
    #[serde(rename = "T")]
    pub horizon: usize,
    pub seed: u64,
    pub eta_rule: EtaRule,
    pub iota_mode: IotaMode,
    /// Feasibility audit tolerance.
    pub tol: f64,
    /// Explicit initialization; wins over `init_preset`.
    pub init: Option<Vec<InitSpec>>,
    /// `random` (seeded) or one of the names of [`documented_init`].
    pub init_preset: Option<String>,
    /// Comparator; defaults to the problem's declared `u`.
    pub u: Option<Vec<f64>>,
    pub trace: Option<PathBuf>,
    pub report: Option<PathBuf>,
    pub plot: Option<PathBuf>,
    pub plot_sets: bool,
    /// Plot only every second round.
    pub plot_every_second: bool,
    pub ogd: OgdConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            problem: "example_sb".into(),
            params: BuiltinParams::new(),
            algorithm: Algorithm::Fpm,
            horizon: 1000,
            seed: 0,
            eta_rule: EtaRule::SqrtT,
            iota_mode: IotaMode::Euclidean,
            tol: crate::geometry::AUDIT_TOL,
            init: None,
            init_preset: None,
            u: None,
            trace: None,
            report: None,
            plot: None,
            plot_sets: false,
            plot_every_second: false,
            ogd: OgdConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
        serde_json::from_str(&text).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))
    }

    pub fn engine(&self) -> EngineConfig {
        EngineConfig { horizon: self.horizon, eta_rule: self.eta_rule, iota_mode: self.iota_mode, seed: self.seed, audit_tol: self.tol }
    }

    pub fn validate(&self) -> Result<()> {
        self.engine().validate().map_err(|e| HarnessError::Config(e.to_string()))?;
        if let Some(p) = &self.init_preset {
            if p != "random" && documented_init(p).is_none() {
                return Err(HarnessError::Config(format!(
                    "unknown init preset `{p}` (expected random, fig1, fig2, fig3-stall, fig3-converge)"
                )));
            }
        }
        if self.algorithm == Algorithm::OgdSideinfo {
            if self.horizon < 2 {
                return Err(HarnessError::Config("ogd-sideinfo needs T >= 2".into()));
            }
            if self.ogd.dim == 0 || self.ogd.dim > 16 {
                return Err(HarnessError::Config("ogd dim must be in 1..=16".into()));
            }
        }
        Ok(())
    }

    pub fn load_problem(&self) -> Result<GnepProblem> {
        load_problem(&self.problem, &self.params)
    }

    /// Initialization in effect for `problem`.
    pub fn resolve_init(&self, problem: &GnepProblem) -> Result<Vec<PlayerInit>> {
        if let Some(init) = &self.init {
            return init.iter().map(InitSpec::to_player_init).collect();
        }
        let preset = self.init_preset.as_deref().or_else(|| default_preset(problem.name())).unwrap_or("random");
        if preset == "random" {
            return seeded_init(problem, self.seed).map_err(run_err);
        }
        let (owner, specs) = documented_init(preset)
            .ok_or_else(|| HarnessError::Config(format!("unknown init preset `{preset}`")))?;
        if owner != problem.name() {
            return Err(HarnessError::Config(format!("preset `{preset}` belongs to {owner}, not {}", problem.name())));
        }
        specs.iter().map(InitSpec::to_player_init).collect()
    }
}

/// Built-in by name, otherwise a problem JSON file.
pub fn load_problem(name: &str, params: &BuiltinParams) -> Result<GnepProblem> {
    if BUILTIN_NAMES.contains(&name) {
        return load_builtin(name, params).map_err(|e| HarnessError::Config(e.to_string()));
    }
    let path = Path::new(name);
    if !path.exists() {
        return Err(HarnessError::Config(format!(
            "`{name}` is neither a built-in ({}) nor an existing file",
            BUILTIN_NAMES.join(", ")
        )));
    }
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    GnepProblem::from_json(&text).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))
}

/// Reads a JSON list of [`InitSpec`].
pub fn read_init_file(path: &Path) -> Result<Vec<InitSpec>> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    serde_json::from_str(&text).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))
}

// ---------------------------------------------------------------------------
// Running

/// Summary written as the run report.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunReport {
    pub problem: String,
    pub algorithm: Algorithm,
    #[serde(rename = "T")]
    pub horizon: usize,
    pub seed: u64,
    pub eta: f64,
    pub feasible: bool,
    pub violations: usize,
    pub final_x: Vec<f64>,
    /// Per-player gradient norm at the last played point.
    pub final_grad_norms: Vec<f64>,
    pub final_dist_to_u: Option<f64>,
    pub phase_starts: Vec<usize>,
    pub regret: Option<RegretReport>,
    /// `Reg_f` bound for strongly benign problems.
    pub regret_bound: Option<f64>,
    /// `OGD` runs: `Reg_f(u)` and its bound.
    pub ogd_reg_f: Option<f64>,
    pub ogd_bound: Option<f64>,
}

/// A finished run with its report.
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub trace: RunTrace,
    pub report: RunReport,
}

/// Runs the configured algorithm and builds the report, writing nothing.
pub fn execute(config: &ExperimentConfig) -> Result<RunOutcome> {
    config.validate()?;
    if config.algorithm == Algorithm::OgdSideinfo {
        return execute_ogd(config);
    }
    let problem = config.load_problem()?;
    let init = config.resolve_init(&problem)?;
    let engine = config.engine();
    let trace = match config.algorithm {
        Algorithm::Fpm => fpm_run(&problem, &init, &engine),
        Algorithm::Altgd => altgd_run(&problem, &init, &engine),
        Algorithm::Naive => naive_wait_run(&problem, &init, &engine),
        Algorithm::OgdSideinfo => unreachable!(),
    }
    .map_err(run_err)?;
    let u = config.u.clone().or_else(|| problem.constants().u.clone());
    let last = trace.last_played();
    let final_grad_norms = (0..problem.n())
        .map(|i| problem.gradient(i, &last).map(|g| norm(&g)))
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(run_err)?;
    let regret = match &u {
        Some(u) => Some(analysis::regret(&trace, &problem, u).map_err(run_err)?),
        None => None,
    };
    let regret_bound = analysis::regret_bound(&problem, config.horizon).ok();
    let report = RunReport {
        problem: problem.name().to_string(),
        algorithm: config.algorithm,
        horizon: config.horizon,
        seed: config.seed,
        eta: trace.eta,
        feasible: trace.all_feasible(),
        violations: trace.violations(),
        final_x: last.clone(),
        final_grad_norms,
        final_dist_to_u: u.as_ref().map(|u| crate::linalg::dist(&last, u)),
        phase_starts: trace.phase_starts(),
        regret,
        regret_bound,
        ogd_reg_f: None,
        ogd_bound: None,
    };
    Ok(RunOutcome { trace, report })
}

fn execute_ogd(config: &ExperimentConfig) -> Result<RunOutcome> {
    let instance = MovingSetInstance::generate(config.seed, config.ogd.dim, config.horizon, config.ogd.mu).map_err(run_err)?;
    let schedule = if config.ogd.mu.is_some() { OgdSchedule::StronglyConvex } else { OgdSchedule::SqrtT };
    let outcome = ogd_side_info_run(&instance, schedule, config.tol).map_err(run_err)?;
    let bound = match schedule {
        OgdSchedule::SqrtT => analysis::ogd_regret_bound(instance.d, instance.g, instance.c, instance.c_prime, config.horizon),
        OgdSchedule::StronglyConvex => analysis::ogd_strongly_convex_bound(&instance),
    }
    .map_err(run_err)?;
    let trace = outcome.trace;
    let report = RunReport {
        problem: trace.problem.clone(),
        algorithm: Algorithm::OgdSideinfo,
        horizon: config.horizon,
        seed: config.seed,
        eta: trace.eta,
        feasible: outcome.violations == 0,
        violations: outcome.violations,
        final_x: trace.last_played(),
        final_grad_norms: vec![trace.rounds.last().map_or(0.0, |r| r.players[0].grad_norm)],
        final_dist_to_u: trace.rounds.last().and_then(|r| r.dist_to_u),
        phase_starts: Vec::new(),
        regret: None,
        regret_bound: None,
        ogd_reg_f: Some(outcome.reg_f),
        ogd_bound: Some(bound),
    };
    Ok(RunOutcome { trace, report })
}

/// `run`: execute, then write the trace CSV, JSON report and SVG plot that
/// are configured. Fails with a run error if an fpm run was ever infeasible.
pub fn cli_run(config: &ExperimentConfig) -> Result<RunOutcome> {
    let outcome = execute(config)?;
    if let Some(path) = &config.trace {
        write_trace_csv(&outcome.trace, path)?;
    }
    if let Some(path) = &config.report {
        write_json(&outcome.report, path)?;
    }
    if let Some(path) = &config.plot {
        let problem = if config.algorithm == Algorithm::OgdSideinfo { None } else { Some(config.load_problem()?) };
        let opts = PlotOptions { sets: config.plot_sets, every_second: config.plot_every_second };
        write_text(&render_svg(&trace_rows(&outcome.trace), problem.as_ref(), &opts), path)?;
    }
    if config.algorithm == Algorithm::Fpm && !outcome.report.feasible {
        return Err(HarnessError::Run(format!(
            "feasibility audit failed in {} of {} rounds",
            outcome.report.violations, config.horizon
        )));
    }
    Ok(outcome)
}

/// Per-round comparison of two runs.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CompareSide {
    pub algorithm: Algorithm,
    pub feasible: bool,
    /// First round with `‖x_t − u‖ ≤ τ`.
    pub rounds_to_tau: Option<usize>,
    pub final_dist_to_u: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CompareReport {
    pub problem: String,
    pub tau: f64,
    pub a: CompareSide,
    pub b: CompareSide,
}

fn rounds_to_tau(trace: &RunTrace, tau: f64) -> Option<usize> {
    trace.rounds.iter().find(|r| r.dist_to_u.is_some_and(|d| d <= tau)).map(|r| r.t)
}

/// `compare`: runs both configurations (in parallel), writes the joint
/// distance CSV (`t, dist_to_u_a, dist_to_u_b`) to `a.trace` and the summary
/// to `a.report`.
pub fn cli_compare(a: &ExperimentConfig, b: &ExperimentConfig, tau: f64) -> Result<(CompareReport, RunTrace, RunTrace)> {
    if !(tau > 0.0) {
        return Err(HarnessError::Config("tau must be positive".into()));
    }
    let (ra, rb) = std::thread::scope(|s| {
        let ha = s.spawn(|| execute(a));
        let hb = s.spawn(|| execute(b));
        (ha.join().expect("run thread panicked"), hb.join().expect("run thread panicked"))
    });
    let (ra, rb) = (ra?, rb?);
    let side = |o: &RunOutcome| CompareSide {
        algorithm: o.report.algorithm,
        feasible: o.report.feasible,
        rounds_to_tau: rounds_to_tau(&o.trace, tau),
        final_dist_to_u: o.report.final_dist_to_u,
    };
    let report = CompareReport { problem: ra.report.problem.clone(), tau, a: side(&ra), b: side(&rb) };
    if let Some(path) = &a.trace {
        write_compare_csv(&ra.trace, &rb.trace, path)?;
    }
    if let Some(path) = &a.report {
        write_json(&report, path)?;
    }
    Ok((report, ra.trace, rb.trace))
}

/// Output of `check`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckReport {
    pub benign: BenignReport,
    /// Embedded for `bilinear_affine`.
    pub equilibria: Option<BoundaryEquilibriaReport>,
}

/// `check`: benign-condition estimates (plus boundary equilibria for the
/// bilinear game).
pub fn cli_check(problem: &str, params: &BuiltinParams, phis: &[f64], samples: usize, seed: u64) -> Result<CheckReport> {
    let p = load_problem(problem, params)?;
    let benign = benign_report(&p, phis, samples, seed).map_err(run_err)?;
    let equilibria = if problem == "bilinear_affine" {
        Some(bilinear_boundary_equilibria(&bilinear_from_params(params)?).map_err(run_err)?)
    } else {
        None
    };
    Ok(CheckReport { benign, equilibria })
}

/// The one-dimensional bilinear game described by built-in parameters.
pub fn bilinear_from_params(params: &BuiltinParams) -> Result<BilinearAffineGame> {
    let get = |k: &str, d: f64| params.0.get(k).copied().unwrap_or(d);
    for key in params.0.keys() {
        if !["a", "cx", "cy", "b", "box"].contains(&key.as_str()) {
            return Err(HarnessError::Config(format!("unknown bilinear parameter `{key}`")));
        }
    }
    BilinearAffineGame::one_d(get("a", 2.0), get("cx", 1.0), get("cy", 1.0), get("b", 1.0))
        .map_err(|e| HarnessError::Config(e.to_string()))
}

/// Convergence bound for the report of a strongly benign run, if the problem
/// declares the constants.
pub fn bound_for(problem: &GnepProblem, trace: &RunTrace) -> Option<analysis::TheoreticalBound> {
    let x1 = trace.rounds.first()?.joint();
    analysis::convergence_bound(problem, trace.horizon, Regime::StronglyBenign, &x1).ok()
}

// ---------------------------------------------------------------------------
// Output

pub fn write_text(text: &str, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    fs::write(path, text).map_err(|e| io_err(path, e))
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| io_err(path, e))?;
    write_text(&(text + "\n"), path)
}

/// 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

/// One CSV row: one player in one round.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceRow {
    pub t: usize,
    pub phase_k: usize,
    pub player: usize,
    pub step_kind: String,
    pub x: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub step_len: f64,
    pub iota: Option<f64>,
    pub eta_bar: Option<f64>,
    pub feasible: bool,
    pub dist_to_u: Option<f64>,
}

pub fn trace_rows(trace: &RunTrace) -> Vec<TraceRow> {
    let mut rows = Vec::with_capacity(trace.rounds.len() * trace.dims.len());
    for r in &trace.rounds {
        for (i, p) in r.players.iter().enumerate() {
            rows.push(TraceRow {
                t: r.t,
                phase_k: r.phase_k,
                player: i,
                step_kind: p.kind.as_str().to_string(),
                x: p.x.clone(),
                lower: p.lower.clone(),
                upper: p.upper.clone(),
                step_len: p.step_len,
                iota: p.iota,
                eta_bar: p.eta_bar,
                feasible: r.feasible && r.sets_feasible,
                dist_to_u: r.dist_to_u,
            });
        }
    }
    rows
}

fn header(width: usize) -> Vec<String> {
    let mut h: Vec<String> = ["t", "phase_k", "player", "step_kind"].iter().map(|s| s.to_string()).collect();
    for prefix in ["x", "S_lower", "S_upper"] {
        h.extend((1..=width).map(|k| format!("{prefix}_{k}")));
    }
    h.extend(["step_len", "iota", "eta_bar", "feasible", "dist_to_u"].iter().map(|s| s.to_string()));
    h
}

/// Coordinates of players with fewer than `width` dimensions leave the
/// trailing cells empty.
pub fn trace_csv_string(trace: &RunTrace) -> Result<String> {
    let width = trace.dims.iter().copied().max().unwrap_or(1);
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| HarnessError::Io(e.to_string());
    w.write_record(header(width)).map_err(io)?;
    for row in trace_rows(trace) {
        let mut rec = vec![row.t.to_string(), row.phase_k.to_string(), row.player.to_string(), row.step_kind.clone()];
        for v in [&row.x, &row.lower, &row.upper] {
            rec.extend((0..width).map(|k| v.get(k).map(|&c| fmt_f64(c)).unwrap_or_default()));
        }
        rec.push(fmt_f64(row.step_len));
        rec.push(fmt_opt(row.iota));
        rec.push(fmt_opt(row.eta_bar));
        rec.push(row.feasible.to_string());
        rec.push(fmt_opt(row.dist_to_u));
        w.write_record(&rec).map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| HarnessError::Io(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| HarnessError::Io(e.to_string()))
}

pub fn write_trace_csv(trace: &RunTrace, path: &Path) -> Result<()> {
    write_text(&trace_csv_string(trace)?, path)
}

/// Parses a trace written by [`write_trace_csv`].
pub fn read_trace_csv(path: &Path) -> Result<Vec<TraceRow>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| io_err(path, e))?;
    let bad = |msg: String| HarnessError::Config(format!("{}: {msg}", path.display()));
    let headers = r.headers().map_err(|e| io_err(path, e))?.clone();
    let width = headers.iter().filter(|h| h.starts_with("x_")).count();
    if width == 0 || headers.len() != 9 + 3 * width {
        return Err(bad("not a trace CSV".into()));
    }
    let num = |s: &str| -> Result<f64> { s.parse().map_err(|_| bad(format!("bad number `{s}`"))) };
    let opt = |s: &str| -> Result<Option<f64>> { if s.is_empty() { Ok(None) } else { num(s).map(Some) } };
    let int = |s: &str| -> Result<usize> { s.parse().map_err(|_| bad(format!("bad integer `{s}`"))) };
    let coords = |rec: &csv::StringRecord, start: usize| -> Result<Vec<f64>> {
        (start..start + width).map(|k| &rec[k]).filter(|s| !s.is_empty()).map(num).collect()
    };
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| io_err(path, e))?;
        let tail = 4 + 3 * width;
        rows.push(TraceRow {
            t: int(&rec[0])?,
            phase_k: int(&rec[1])?,
            player: int(&rec[2])?,
            step_kind: rec[3].to_string(),
            x: coords(&rec, 4)?,
            lower: coords(&rec, 4 + width)?,
            upper: coords(&rec, 4 + 2 * width)?,
            step_len: num(&rec[tail])?,
            iota: opt(&rec[tail + 1])?,
            eta_bar: opt(&rec[tail + 2])?,
            feasible: &rec[tail + 3] == "true",
            dist_to_u: opt(&rec[tail + 4])?,
        });
    }
    Ok(rows)
}

pub fn write_compare_csv(a: &RunTrace, b: &RunTrace, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| HarnessError::Io(e.to_string());
    w.write_record(["t", "dist_to_u_a", "dist_to_u_b"]).map_err(io)?;
    for k in 0..a.rounds.len().max(b.rounds.len()) {
        let da = a.rounds.get(k).and_then(|r| r.dist_to_u);
        let db = b.rounds.get(k).and_then(|r| r.dist_to_u);
        w.write_record([(k + 1).to_string(), fmt_opt(da), fmt_opt(db)]).map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| HarnessError::Io(e.to_string()))?;
    write_text(&String::from_utf8(bytes).map_err(|e| HarnessError::Io(e.to_string()))?, path)
}

// ---------------------------------------------------------------------------
// SVG plots

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct PlotOptions {
    /// Draw one rectangle per logged desired set.
    pub sets: bool,
    /// Keep only odd rounds (and the last one).
    pub every_second: bool,
}

const PANEL_W: f64 = 420.0;
const PANEL_H: f64 = 360.0;
const MARGIN: f64 = 40.0;
const COLOURS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

struct Frame {
    x0: f64,
    lo: [f64; 2],
    hi: [f64; 2],
}

impl Frame {
    fn new(x0: f64, points: impl Iterator<Item = [f64; 2]>) -> Self {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for p in points {
            for k in 0..2 {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        for k in 0..2 {
            if !lo[k].is_finite() {
                lo[k] = 0.0;
                hi[k] = 1.0;
            }
            let pad = 0.05 * (hi[k] - lo[k]).max(1e-9);
            lo[k] -= pad;
            hi[k] += pad;
        }
        Self { x0, lo, hi }
    }

    fn map(&self, p: [f64; 2]) -> (f64, f64) {
        let w = PANEL_W - 2.0 * MARGIN;
        let h = PANEL_H - 2.0 * MARGIN;
        (
            self.x0 + MARGIN + (p[0] - self.lo[0]) / (self.hi[0] - self.lo[0]) * w,
            PANEL_H - MARGIN - (p[1] - self.lo[1]) / (self.hi[1] - self.lo[1]) * h,
        )
    }

    fn axes(&self, out: &mut String, xlabel: &str, ylabel: &str) {
        let (ax, ay) = (self.x0 + MARGIN, PANEL_H - MARGIN);
        let _ = writeln!(
            out,
            r##"<rect x="{ax:.2}" y="{MARGIN:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="#888" stroke-width="0.5"/>"##,
            PANEL_W - 2.0 * MARGIN,
            PANEL_H - 2.0 * MARGIN
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" font-size="11" text-anchor="middle">{}</text>"#,
            self.x0 + PANEL_W / 2.0,
            PANEL_H - 10.0,
            escape(xlabel)
        );
        let _ = writeln!(out, r#"<text x="{:.2}" y="{:.2}" font-size="11">{}</text>"#, self.x0 + 4.0, MARGIN - 8.0, escape(ylabel));
        let _ = writeln!(
            out,
            r#"<text x="{ax:.2}" y="{:.2}" font-size="9">[{:.3}, {:.3}] × [{:.3}, {:.3}]</text>"#,
            ay + 14.0,
            self.lo[0],
            self.hi[0],
            self.lo[1],
            self.hi[1]
        );
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn polyline(out: &mut String, frame: &Frame, pts: &[[f64; 2]], class: &str, colour: &str) {
    let mut coords = String::new();
    for &p in pts {
        let (x, y) = frame.map(p);
        let _ = write!(coords, "{x:.2},{y:.2} ");
    }
    let _ = writeln!(
        out,
        r#"<polyline class="{class}" points="{}" fill="none" stroke="{colour}" stroke-width="1.2"/>"#,
        coords.trim_end()
    );
}

fn rect(out: &mut String, frame: &Frame, lo: [f64; 2], hi: [f64; 2], class: &str, colour: &str) {
    let (x0, y1) = frame.map(lo);
    let (x1, y0) = frame.map(hi);
    let _ = writeln!(
        out,
        r#"<rect class="{class}" x="{x0:.2}" y="{y0:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="{colour}" stroke-opacity="0.35" stroke-width="0.6"/>"#,
        (x1 - x0).max(0.0),
        (y1 - y0).max(0.0)
    );
}

/// Standalone SVG 1.1 document: one panel per player with its trajectory
/// (class `trajectory`; time series for one-dimensional players) and,
/// optionally, its desired sets (class `set`). Two-player games with scalar
/// players get an extra joint-plane panel with the shared constraint when
/// `problem` is given.
pub fn render_svg(rows: &[TraceRow], problem: Option<&GnepProblem>, opts: &PlotOptions) -> String {
    let last_t = rows.iter().map(|r| r.t).max().unwrap_or(0);
    let keep = |t: usize| !opts.every_second || t % 2 == 1 || t == last_t;
    let n = rows.iter().map(|r| r.player + 1).max().unwrap_or(0);
    let scalar = rows.iter().all(|r| r.x.len() == 1);
    let joint_panel = n == 2 && scalar;
    let panels = n + usize::from(joint_panel);
    let mut out = String::new();
    let _ = writeln!(out, r#"<?xml version="1.0" encoding="UTF-8" standalone="no"?>"#);
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{:.0}" height="{:.0}" viewBox="0 0 {:.0} {:.0}">"#,
        PANEL_W * panels as f64,
        PANEL_H,
        PANEL_W * panels as f64,
        PANEL_H
    );
    let _ = writeln!(out, r#"<rect x="0" y="0" width="100%" height="100%" fill="white"/>"#);

    for i in 0..n {
        let mine: Vec<&TraceRow> = rows.iter().filter(|r| r.player == i && keep(r.t)).collect();
        let colour = COLOURS[i % COLOURS.len()];
        let point = |r: &TraceRow| if r.x.len() == 1 { [r.t as f64, r.x[0]] } else { [r.x[0], r.x[1]] };
        let boxes = |r: &TraceRow| -> ([f64; 2], [f64; 2]) {
            if r.x.len() == 1 {
                let t = r.t as f64;
                ([t - 0.4, r.lower[0]], [t + 0.4, r.upper[0]])
            } else {
                ([r.lower[0], r.lower[1]], [r.upper[0], r.upper[1]])
            }
        };
        let extent = mine.iter().flat_map(|r| {
            let (lo, hi) = boxes(r);
            let mut v = vec![point(r)];
            if opts.sets {
                v.extend([lo, hi]);
            }
            v
        });
        let frame = Frame::new(PANEL_W * i as f64, extent);
        let _ = writeln!(out, r#"<g id="player-{i}">"#);
        let (xl, yl) = if scalar { ("t".to_string(), format!("player {i}")) } else { (format!("player {i}: coord 1"), "coord 2".to_string()) };
        frame.axes(&mut out, &xl, &yl);
        if opts.sets {
            for r in &mine {
                let (lo, hi) = boxes(r);
                rect(&mut out, &frame, lo, hi, "set", colour);
            }
        }
        let pts: Vec<[f64; 2]> = mine.iter().map(|r| point(r)).collect();
        polyline(&mut out, &frame, &pts, "trajectory", colour);
        out.push_str("</g>\n");
    }

    if joint_panel {
        let mut rounds: Vec<(usize, [f64; 2])> = Vec::new();
        for r in rows.iter().filter(|r| keep(r.t)) {
            match rounds.last_mut() {
                Some((t, p)) if *t == r.t => p[r.player] = r.x[0],
                _ => {
                    let mut p = [0.0; 2];
                    p[r.player] = r.x[0];
                    rounds.push((r.t, p));
                }
            }
        }
        let polygon = problem.map(|p| {
            let mut v = p.constraint().vertices();
            let c = v.iter().fold([0.0, 0.0], |a, q| [a[0] + q[0], a[1] + q[1]]);
            let c = [c[0] / v.len() as f64, c[1] / v.len() as f64];
            v.sort_by(|a, b| {
                let ta = (a[1] - c[1]).atan2(a[0] - c[0]);
                let tb = (b[1] - c[1]).atan2(b[0] - c[0]);
                ta.total_cmp(&tb)
            });
            v
        });
        let mut extent: Vec<[f64; 2]> = rounds.iter().map(|(_, p)| *p).collect();
        if let Some(poly) = &polygon {
            extent.extend(poly.iter().map(|q| [q[0], q[1]]));
        }
        let frame = Frame::new(PANEL_W * n as f64, extent.into_iter());
        let _ = writeln!(out, r#"<g id="joint">"#);
        frame.axes(&mut out, "player 0", "player 1");
        if let Some(poly) = &polygon {
            let mut coords = String::new();
            for q in poly {
                let (x, y) = frame.map([q[0], q[1]]);
                let _ = write!(coords, "{x:.2},{y:.2} ");
            }
            let _ = writeln!(
                out,
                r##"<polygon class="constraint" points="{}" fill="#eef3fb" stroke="#456" stroke-width="0.8"/>"##,
                coords.trim_end()
            );
        }
        let pts: Vec<[f64; 2]> = rounds.iter().map(|(_, p)| *p).collect();
        polyline(&mut out, &frame, &pts, "joint", "#333");
        for &p in pts.first().iter().chain(pts.last().iter()) {
            let (x, y) = frame.map(*p);
            let _ = writeln!(out, r##"<circle cx="{x:.2}" cy="{y:.2}" r="2.5" fill="#333"/>"##);
        }
        out.push_str("</g>\n");
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(problem: &str, horizon: usize) -> ExperimentConfig {
        ExperimentConfig { problem: problem.into(), horizon, ..Default::default() }
    }

    #[test]
    fn exit_codes() {
        assert_eq!(HarnessError::Config(String::new()).exit_code(), 2);
        assert_eq!(HarnessError::Run(String::new()).exit_code(), 3);
        assert_eq!(HarnessError::Io(String::new()).exit_code(), 4);
    }

    #[test]
    fn unknown_problem_is_config_error() {
        let e = execute(&cfg("no_such_problem", 10)).unwrap_err();
        assert_eq!(e.exit_code(), 2);
    }

    #[test]
    fn preset_must_match_problem() {
        let mut c = cfg("example_nb1", 10);
        c.init_preset = Some("fig1".into());
        assert_eq!(execute(&c).unwrap_err().exit_code(), 2);
    }

    #[test]
    fn config_json_round_trip_and_flags() {
        let text = r#"{"problem": "example_nb1", "T": 40, "eta_rule": {"rule": "fixed", "value": 0.01}}"#;
        let c: ExperimentConfig = serde_json::from_str(text).unwrap();
        assert_eq!(c.horizon, 40);
        assert_eq!(c.eta_rule, EtaRule::Fixed(0.01));
        assert_eq!(c.algorithm, Algorithm::Fpm);
        let back: ExperimentConfig = serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"bogus": 1}"#).is_err());
    }

    #[test]
    fn csv_shape_and_round_trip() {
        let out = execute(&cfg("example_sb", 24)).unwrap();
        let text = trace_csv_string(&out.trace).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "t,phase_k,player,step_kind,x_1,S_lower_1,S_upper_1,step_len,iota,eta_bar,feasible,dist_to_u"
        );
        assert_eq!(lines.count(), 48);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trace.csv");
        write_trace_csv(&out.trace, &path).unwrap();
        let rows = read_trace_csv(&path).unwrap();
        assert_eq!(rows, trace_rows(&out.trace));
    }

    #[test]
    fn svg_counts() {
        let out = execute(&cfg("example_sb", 24)).unwrap();
        let rows = trace_rows(&out.trace);
        let p = load_builtin("example_sb", &BuiltinParams::new()).unwrap();
        let svg = render_svg(&rows, Some(&p), &PlotOptions { sets: true, every_second: false });
        assert_eq!(svg.matches(r#"class="trajectory""#).count(), 2);
        assert_eq!(svg.matches(r#"class="set""#).count(), 48);
        let half = render_svg(&rows, Some(&p), &PlotOptions { sets: true, every_second: true });
        assert_eq!(half.matches(r#"class="set""#).count(), 2 * 13);
        let none = render_svg(&rows, None, &PlotOptions::default());
        assert_eq!(none.matches(r#"class="set""#).count(), 0);
    }

    #[test]
    fn ogd_run_reports_bound() {
        let mut c = cfg("example_sb", 200);
        c.algorithm = Algorithm::OgdSideinfo;
        let out = execute(&c).unwrap();
        assert_eq!(out.report.violations, 0);
        assert!(out.report.ogd_reg_f.unwrap() <= out.report.ogd_bound.unwrap());
    }
}
