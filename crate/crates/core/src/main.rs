use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use gnep_fpm::analysis::{bilinear_boundary_equilibria, DEFAULT_SAMPLES};
use gnep_fpm::fpm::{Algorithm, EtaRule, IotaMode};
use gnep_fpm::game::{BilinearAffineGame, BuiltinParams};
use gnep_fpm::harness::{
    self, bilinear_from_params, cli_check, cli_compare, cli_run, read_init_file, read_trace_csv, render_svg,
    write_json, write_text, ExperimentConfig, HarnessError, OgdConfig, PlotOptions,
};

#[derive(Parser)]
#[command(name = "gnep-fpm", version, about = "Online feasible point method for repeated GNEPs with shared constraints")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one algorithm and write its trace, report and plot.
    Run(RunArgs),
    /// Run two algorithms on the same problem and compare distances to u.
    Compare(CompareArgs),
    /// Estimate the benign-condition constants of a problem.
    Check(CheckArgs),
    /// Boundary equilibria of the bilinear affine game.
    Equilibria(EquilibriaArgs),
    /// Render an SVG from a trace CSV.
    Plot(PlotArgs),
}

#[derive(Args, Clone)]
struct RunFlags {
    /// JSON experiment config; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in name (example_sb, example_sb2, example_nb1, example_nb2, bilinear_affine) or problem JSON path.
    #[arg(long)]
    problem: Option<String>,
    /// Built-in parameter override, `key=value`; repeatable.
    #[arg(long = "param", value_parser = parse_param)]
    params: Vec<(String, f64)>,
    #[arg(long, value_parser = parse_algorithm)]
    algorithm: Option<Algorithm>,
    #[arg(long = "T")]
    horizon: Option<usize>,
    #[arg(long, env = "GNEP_FPM_SEED")]
    seed: Option<u64>,
    /// theorem | sqrtT | fixed:<eta>
    #[arg(long, value_parser = parse_eta_rule)]
    eta_rule: Option<EtaRule>,
    /// euclidean | directional
    #[arg(long, value_parser = parse_iota_mode)]
    iota_mode: Option<IotaMode>,
    /// Named initialization: random, fig1, fig2, fig3-stall, fig3-converge.
    #[arg(long)]
    init: Option<String>,
    /// JSON list of {"x": [...], "lower": [...], "upper": [...]}, one per player.
    #[arg(long)]
    init_file: Option<PathBuf>,
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long)]
    plot: Option<PathBuf>,
    /// Draw every logged desired set in the plot.
    #[arg(long)]
    plot_sets: bool,
    /// Plot only every second round.
    #[arg(long)]
    plot_every_second: bool,
    /// Feasibility audit tolerance.
    #[arg(long)]
    tol: Option<f64>,
    /// Dimension of the generated instance for ogd-sideinfo.
    #[arg(long)]
    ogd_dim: Option<usize>,
    /// Strong convexity of the generated ogd-sideinfo losses.
    #[arg(long)]
    ogd_mu: Option<f64>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    flags: RunFlags,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    flags: RunFlags,
    /// Algorithm of the second run (same problem, init and step rule).
    #[arg(long, value_parser = parse_algorithm, default_value = "altgd")]
    against: Algorithm,
    /// Separate JSON config for the second run; overrides --against.
    #[arg(long)]
    config_b: Option<PathBuf>,
    /// Distance to u counted as converged.
    #[arg(long, default_value_t = 1e-3)]
    tau: f64,
}

#[derive(Args)]
struct CheckArgs {
    #[arg(long, default_value = "example_sb")]
    problem: String,
    #[arg(long = "param", value_parser = parse_param)]
    params: Vec<(String, f64)>,
    /// Radius for the D_min estimate; repeatable.
    #[arg(long = "phi", default_values_t = vec![0.5, 0.9])]
    phis: Vec<f64>,
    #[arg(long, default_value_t = DEFAULT_SAMPLES)]
    samples: usize,
    #[arg(long, env = "GNEP_FPM_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct EquilibriaArgs {
    /// One-dimensional game parameters a, cx, cy, b as `key=value`.
    #[arg(long = "param", value_parser = parse_param)]
    params: Vec<(String, f64)>,
    /// JSON `{"a": [[..]], "c_x": [..], "c_y": [..], "b": ..}` for higher dimensions.
    #[arg(long)]
    game_file: Option<PathBuf>,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct PlotArgs {
    /// Trace CSV written by `run --trace`.
    #[arg(long)]
    trace: PathBuf,
    /// Output SVG.
    #[arg(long)]
    plot: PathBuf,
    /// Problem to draw the shared constraint from.
    #[arg(long)]
    problem: Option<String>,
    #[arg(long = "param", value_parser = parse_param)]
    params: Vec<(String, f64)>,
    #[arg(long)]
    plot_sets: bool,
    #[arg(long)]
    plot_every_second: bool,
}

fn parse_param(s: &str) -> Result<(String, f64), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected key=value, got `{s}`"))?;
    let v: f64 = v.trim().parse().map_err(|_| format!("`{v}` is not a number"))?;
    Ok((k.trim().to_string(), v))
}

fn parse_algorithm(s: &str) -> Result<Algorithm, String> {
    match s {
        "fpm" => Ok(Algorithm::Fpm),
        "altgd" => Ok(Algorithm::Altgd),
        "naive" => Ok(Algorithm::Naive),
        "ogd-sideinfo" => Ok(Algorithm::OgdSideinfo),
        _ => Err(format!("unknown algorithm `{s}` (fpm, altgd, naive, ogd-sideinfo)")),
    }
}

fn parse_eta_rule(s: &str) -> Result<EtaRule, String> {
    match s {
        "theorem" => Ok(EtaRule::Theorem),
        "sqrtT" | "sqrt-t" => Ok(EtaRule::SqrtT),
        _ => match s.strip_prefix("fixed:") {
            Some(v) => v.parse().map(EtaRule::Fixed).map_err(|_| format!("bad fixed step `{v}`")),
            None => Err(format!("unknown eta rule `{s}` (theorem, sqrtT, fixed:<eta>)")),
        },
    }
}

fn parse_iota_mode(s: &str) -> Result<IotaMode, String> {
    match s {
        "euclidean" => Ok(IotaMode::Euclidean),
        "directional" => Ok(IotaMode::Directional),
        _ => Err(format!("unknown iota mode `{s}` (euclidean, directional)")),
    }
}

fn params_of(list: &[(String, f64)]) -> BuiltinParams {
    list.iter().fold(BuiltinParams::new(), |p, (k, v)| p.with(k, *v))
}

impl RunFlags {
    fn resolve(&self) -> harness::Result<ExperimentConfig> {
        let mut c = match &self.config {
            Some(path) => ExperimentConfig::from_json_file(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(p) = &self.problem {
            c.problem = p.clone();
        }
        for (k, v) in &self.params {
            c.params = c.params.clone().with(k, *v);
        }
        if let Some(a) = self.algorithm {
            c.algorithm = a;
        }
        if let Some(t) = self.horizon {
            c.horizon = t;
        }
        if let Some(s) = self.seed {
            c.seed = s;
        }
        if let Some(r) = self.eta_rule {
            c.eta_rule = r;
        }
        if let Some(m) = self.iota_mode {
            c.iota_mode = m;
        }
        if let Some(name) = &self.init {
            c.init_preset = Some(name.clone());
            c.init = None;
        }
        if let Some(path) = &self.init_file {
            c.init = Some(read_init_file(path)?);
        }
        if self.trace.is_some() {
            c.trace = self.trace.clone();
        }
        if self.report.is_some() {
            c.report = self.report.clone();
        }
        if self.plot.is_some() {
            c.plot = self.plot.clone();
        }
        c.plot_sets |= self.plot_sets;
        c.plot_every_second |= self.plot_every_second;
        if let Some(t) = self.tol {
            c.tol = t;
        }
        if self.ogd_dim.is_some() || self.ogd_mu.is_some() {
            c.ogd = OgdConfig { dim: self.ogd_dim.unwrap_or(c.ogd.dim), mu: self.ogd_mu.or(c.ogd.mu) };
        }
        Ok(c)
    }
}

fn print_json<T: serde::Serialize>(value: &T) {
    println!("{}", serde_json::to_string_pretty(value).expect("reports serialize"));
}

fn dispatch(cli: Cli) -> harness::Result<()> {
    match cli.command {
        Command::Run(args) => {
            let config = args.flags.resolve()?;
            let out = cli_run(&config)?;
            let r = &out.report;
            eprintln!(
                "{} on {}: T={} feasible={} final_x={:?} final_dist_to_u={}",
                r.algorithm.as_str(),
                r.problem,
                r.horizon,
                r.feasible,
                r.final_x,
                r.final_dist_to_u.map_or("n/a".into(), |d| format!("{d:.3e}"))
            );
            if config.report.is_none() {
                print_json(r);
            }
        }
        Command::Compare(args) => {
            let a = args.flags.resolve()?;
            let b = match &args.config_b {
                Some(path) => ExperimentConfig::from_json_file(path)?,
                None => ExperimentConfig { algorithm: args.against, trace: None, report: None, plot: None, ..a.clone() },
            };
            let (report, _, _) = cli_compare(&a, &b, args.tau)?;
            if a.report.is_none() {
                print_json(&report);
            }
        }
        Command::Check(args) => {
            let report = cli_check(&args.problem, &params_of(&args.params), &args.phis, args.samples, args.seed)?;
            match &args.report {
                Some(path) => write_json(&report, path)?,
                None => print_json(&report),
            }
        }
        Command::Equilibria(args) => {
            let game = match &args.game_file {
                Some(path) => {
                    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))?;
                    let g: BilinearAffineGame =
                        serde_json::from_str(&text).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
                    BilinearAffineGame::new(g.a, g.c_x, g.c_y, g.b).map_err(|e| HarnessError::Config(e.to_string()))?
                }
                None => bilinear_from_params(&params_of(&args.params))?,
            };
            let report = bilinear_boundary_equilibria(&game).map_err(|e| HarnessError::Config(e.to_string()))?;
            match &args.report {
                Some(path) => write_json(&report, path)?,
                None => print_json(&report),
            }
        }
        Command::Plot(args) => {
            let rows = read_trace_csv(&args.trace)?;
            let problem = match &args.problem {
                Some(p) => Some(harness::load_problem(p, &params_of(&args.params))?),
                None => None,
            };
            let opts = PlotOptions { sets: args.plot_sets, every_second: args.plot_every_second };
            write_text(&render_svg(&rows, problem.as_ref(), &opts), &args.plot)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("gnep-fpm: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
