//! Command-line front end and experiment file output.
//!
//! Floats in CSV files are written in `{:.16e}` form (17 significant digits)
//! so every value round-trips exactly. Missing values are empty cells.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::acquisition::{gei_value, AcqConfig, DEFAULT_QUADRATURE_NODES};
use crate::bo::{derive_seed, run_bo, sweep, BoConfig, Hyperfit, OutputTransform, RunRecord, SweepJob};
use crate::config::{BenchConfigFile, ObjectiveSpec, RunConfigFile};
use crate::diagnostics::regret_trace;
use crate::error::{BoError, Result};
use crate::kernel::KernelFamily;
use crate::objectives::{list_builtins, toy_objective};
use crate::schedule::{schedule_limit, simulate_stream, BiasMode, ScheduleMode};

/// Environment variable naming the default output root.
pub const OUT_ENV: &str = "TEMPERED_BO_OUT";
const DEFAULT_OUT: &str = "tempered-bo-out";

#[derive(Debug, Parser)]
#[command(name = "tempered-bo", version, about = "Bayesian optimization with tempered surrogate posteriors")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one optimization from a TOML config.
    Run(RunArgs),
    /// Run a benchmark grid from a TOML config.
    Bench(BenchArgs),
    /// Reproduce the one-dimensional toy study.
    Toy(ToyArgs),
    /// Feed the adaptive schedule a synthetic prequential stream.
    ScheduleSim(ScheduleSimArgs),
    /// Print registries or the version.
    Info {
        #[arg(value_enum)]
        what: InfoWhat,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum InfoWhat {
    Objectives,
    Kernels,
    Version,
}

#[derive(Debug, clap::Args)]
pub struct RunArgs {
    pub config: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub horizon: Option<usize>,
    #[arg(long)]
    pub init_size: Option<usize>,
    #[arg(long)]
    pub g: Option<f64>,
    /// `adaptive` or `fixed:<alpha>`.
    #[arg(long, value_parser = parse_schedule)]
    pub schedule: Option<ScheduleMode>,
}

#[derive(Debug, clap::Args)]
pub struct BenchArgs {
    pub config: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Run grid members one at a time.
    #[arg(long)]
    pub sequential: bool,
}

#[derive(Debug, Clone, clap::Args)]
pub struct ToyArgs {
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = 20)]
    pub seeds: usize,
    #[arg(long, value_delimiter = ',', default_values_t = vec![0.1, 0.5, 1.0])]
    pub alphas: Vec<f64>,
    #[arg(long, default_value_t = 0.0)]
    pub g: f64,
    #[arg(long, default_value_t = 15)]
    pub iterations: usize,
    #[arg(long, default_value_t = 0.01)]
    pub xi: f64,
    #[arg(long, default_value_t = 0.05)]
    pub noise_sd: f64,
    #[arg(long, default_value_t = 5)]
    pub init_size: usize,
    #[arg(long, default_value_t = 0)]
    pub base_seed: u64,
    #[arg(long, default_value_t = 512)]
    pub acq_budget: usize,
    /// Seeds (from the first) whose surrogate curves are written.
    #[arg(long, default_value_t = 1)]
    pub curve_seeds: usize,
    #[arg(long, default_value_t = 201)]
    pub grid: usize,
}

#[derive(Parser)]
struct ToyDefaults {
    #[command(flatten)]
    args: ToyArgs,
}

impl Default for ToyArgs {
    fn default() -> Self {
        ToyDefaults::parse_from(["toy"]).args
    }
}

#[derive(Debug, Clone, clap::Args)]
pub struct ScheduleSimArgs {
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// `vanishing` or `constant:<b>`.
    #[arg(long, value_parser = parse_bias, default_value = "vanishing")]
    pub bias: BiasMode,
    #[arg(long, default_value_t = 1000)]
    pub t_max: usize,
    #[arg(long, default_value_t = 20)]
    pub seeds: usize,
    #[arg(long, default_value_t = 1.0)]
    pub noise_variance: f64,
    /// Constant predictive variance fed to the schedule.
    #[arg(long, default_value_t = 0.0)]
    pub pv: f64,
    #[arg(long, default_value_t = crate::schedule::DEFAULT_ALPHA_FLOOR)]
    pub floor: f64,
    #[arg(long, default_value_t = 0)]
    pub base_seed: u64,
}

fn parse_schedule(s: &str) -> std::result::Result<ScheduleMode, String> {
    match s.split_once(':') {
        None if s == "adaptive" => Ok(ScheduleMode::Adaptive),
        Some(("fixed", a)) => a
            .parse::<f64>()
            .map(|alpha| ScheduleMode::Fixed { alpha })
            .map_err(|e| format!("bad alpha `{a}`: {e}")),
        _ => Err(format!("expected `adaptive` or `fixed:<alpha>`, got `{s}`")),
    }
}

fn parse_bias(s: &str) -> std::result::Result<BiasMode, String> {
    match s.split_once(':') {
        None if s == "vanishing" => Ok(BiasMode::Vanishing),
        Some(("constant", b)) => b
            .parse::<f64>()
            .map(|b| BiasMode::Constant { b })
            .map_err(|e| format!("bad bias `{b}`: {e}")),
        _ => Err(format!("expected `vanishing` or `constant:<b>`, got `{s}`")),
    }
}

/// Parse arguments and run; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let result = match cli.command {
        Command::Run(a) => cmd_run(&a),
        Command::Bench(a) => cmd_bench(&a),
        Command::Toy(a) => cmd_toy(&a),
        Command::ScheduleSim(a) => cmd_schedule_sim(&a),
        Command::Info { what } => cmd_info(what),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn out_dir(explicit: Option<&Path>, from_config: Option<&Path>, command: &str) -> PathBuf {
    if let Some(p) = explicit.or(from_config) {
        return p.to_path_buf();
    }
    let root = std::env::var_os(OUT_ENV).map_or_else(|| PathBuf::from(DEFAULT_OUT), PathBuf::from);
    root.join(command)
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, contents)?;
    Ok(())
}

pub fn fmt_f(v: f64) -> String {
    format!("{v:.16e}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f).unwrap_or_default()
}

/// Column names of `trace.csv` for a `dim`-dimensional run.
pub fn trace_header(dim: usize) -> Vec<String> {
    let mut h: Vec<String> = vec!["index".into(), "iteration".into()];
    h.extend((0..dim).map(|j| format!("x{j}")));
    h.extend(
        [
            "y",
            "f",
            "best_observed",
            "alpha",
            "mu_plus",
            "acq_value",
            "mean_untempered",
            "var_untempered",
            "mean_tempered",
            "var_tempered",
            "var_at_xplus",
            "n_train",
            "signal_variance",
            "noise_variance",
            "y_shift",
            "y_scale",
            "jitter",
            "sigma2_hat",
        ]
        .map(String::from),
    );
    h.extend((0..dim).map(|j| format!("lengthscale{j}")));
    h.extend((0..dim).map(|j| format!("xplus{j}")));
    h
}

pub fn trace_csv(record: &RunRecord) -> String {
    let d = record.dim;
    let mut out = trace_header(d).join(",");
    out.push('\n');
    for r in &record.rows {
        let mut cells: Vec<String> = vec![r.index.to_string(), r.iteration.to_string()];
        cells.extend(r.x.iter().map(|v| fmt_f(*v)));
        cells.extend([fmt_f(r.y), fmt_f(r.f), fmt_f(r.best_observed)]);
        match &r.step {
            Some(s) => {
                cells.extend(
                    [
                        s.alpha,
                        s.mu_plus,
                        s.acq_value,
                        s.mean_untempered,
                        s.var_untempered,
                        s.mean_tempered,
                        s.var_tempered,
                        s.var_at_xplus,
                    ]
                    .map(fmt_f),
                );
                cells.push(s.n_train.to_string());
                cells.extend(
                    [s.signal_variance, s.noise_variance, s.y_shift, s.y_scale, s.jitter, s.sigma2_hat].map(fmt_f),
                );
                cells.extend(s.lengthscales.iter().map(|v| fmt_f(*v)));
                cells.extend(s.x_plus.iter().map(|v| fmt_f(*v)));
            }
            None => cells.extend(std::iter::repeat_n(String::new(), 15 + 2 * d)),
        }
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct RegretSummary {
    pub f_star: f64,
    pub estimated_optimum: bool,
    pub cumulative: f64,
    pub normalized_final: Option<f64>,
    pub clipped: f64,
}

pub fn regret_summary(record: &RunRecord) -> Result<Option<RegretSummary>> {
    let Some(tb) = &record.true_best else {
        return Ok(None);
    };
    let tr = regret_trace(record, tb.value, tb.estimated)?;
    Ok(Some(RegretSummary {
        f_star: tb.value,
        estimated_optimum: tb.estimated,
        cumulative: tr.cumulative.last().copied().unwrap_or(0.0),
        normalized_final: tr.normalized.as_ref().and_then(|n| n.last().copied()),
        clipped: tr.clipped,
    }))
}

fn apply_overrides(cfg: &mut RunConfigFile, a: &RunArgs) {
    if let Some(s) = a.seed {
        cfg.bo.seed = s;
    }
    if let Some(h) = a.horizon {
        cfg.bo.horizon = Some(h);
    }
    if let Some(n) = a.init_size {
        cfg.bo.init_size = Some(n);
    }
    if let Some(g) = a.g {
        cfg.bo.acquisition.g = g;
    }
    if let Some(m) = a.schedule {
        cfg.bo.schedule = m;
    }
}

pub fn cmd_run(a: &RunArgs) -> Result<i32> {
    let mut cfg = RunConfigFile::load(&a.config)?;
    apply_overrides(&mut cfg, a);
    cfg.validate()?;
    let base = a.config.parent();
    let objective = cfg.objective.build(base)?;
    let bo = cfg.effective_bo();
    let record = run_bo(&objective, &bo)?;
    let dir = out_dir(a.out.as_deref(), cfg.output.dir.as_deref(), "run");
    write_file(&dir.join("trace.csv"), &trace_csv(&record))?;
    let summary = serde_json::json!({
        "objective": record.objective,
        "dim": record.dim,
        "seed": record.seed,
        "config_hash": record.config_hash,
        "effective_config": { "objective": cfg.objective, "bo": bo },
        "init_size": record.init_size,
        "horizon": record.horizon,
        "hyperfit": record.hyperfit,
        "evaluations": record.evaluations,
        "failed": record.failed,
        "wall_ms": record.wall_ms as u64,
        "best_observed_final": record.rows.last().map(|r| r.best_observed),
        "best_f_final": record.best_f(),
        "recommended_by_mean": record.recommended_by_mean,
        "recommended_by_observation": record.recommended_by_observation,
        "true_best": record.true_best,
        "regret": regret_summary(&record)?,
    });
    write_file(
        &dir.join("summary.json"),
        &serde_json::to_string_pretty(&summary).expect("summary serializes"),
    )?;
    println!("wrote {}", dir.display());
    if let Some(msg) = &record.failed {
        eprintln!("run stopped early: {msg}");
        return Ok(3);
    }
    Ok(0)
}

/// One member of a benchmark grid.
#[derive(Debug)]
pub struct BenchRun {
    pub function: String,
    pub dim: usize,
    pub g: f64,
    pub mode: ScheduleMode,
    pub seed_index: usize,
    pub seed: u64,
    pub result: Result<RunRecord>,
}

impl BenchRun {
    pub fn succeeded(&self) -> bool {
        matches!(&self.result, Ok(r) if r.failed.is_none())
    }
}

/// Run every `(objective, g, mode, seed)` combination of the grid. Seeds
/// depend only on the objective and seed index, so runs that differ in `g`
/// or mode share their initial design and noise draws.
pub fn run_bench(cfg: &BenchConfigFile, base_dir: Option<&Path>, parallel: bool) -> Result<Vec<BenchRun>> {
    let b = &cfg.bench;
    let mut jobs = Vec::new();
    let mut keys = Vec::new();
    for spec in &b.objectives {
        let obj = spec.build(base_dir)?;
        for &g in &b.g {
            for &mode in &b.modes {
                for s in 0..b.seeds {
                    let seed = derive_seed(b.base_seed, obj.name(), obj.dim(), s);
                    let mut bo = cfg.bo.clone();
                    bo.acquisition.g = g;
                    bo.schedule = mode;
                    bo.seed = seed;
                    if bo.noise_variance.is_none() {
                        bo.noise_variance = spec.known_noise_variance();
                    }
                    keys.push((obj.name().to_string(), obj.dim(), g, mode, s, seed));
                    jobs.push(SweepJob {
                        objective: obj.clone(),
                        config: bo,
                    });
                }
            }
        }
    }
    let results = sweep(&jobs, parallel);
    Ok(keys
        .into_iter()
        .zip(results)
        .map(|((function, dim, g, mode, seed_index, seed), result)| BenchRun {
            function,
            dim,
            g,
            mode,
            seed_index,
            seed,
            result,
        })
        .collect())
}

pub const CHECKPOINTS: [usize; 6] = [5, 10, 15, 20, 25, 30];

pub fn aggregate_header() -> Vec<String> {
    let mut h: Vec<String> = ["function", "dim", "g", "alpha_mode", "seed", "best_observed_final"]
        .map(String::from)
        .to_vec();
    h.extend(CHECKPOINTS.iter().map(|k| format!("best_observed@{k}")));
    h.extend(["R_T", "D_T", "wall_ms", "run_seed", "best_f_final", "status"].map(String::from));
    h
}

pub fn aggregate_csv(runs: &[BenchRun], timing: bool) -> Result<String> {
    let mut out = aggregate_header().join(",");
    out.push('\n');
    for r in runs {
        let mut cells = vec![
            r.function.clone(),
            r.dim.to_string(),
            fmt_f(r.g),
            r.mode.label(),
            r.seed_index.to_string(),
        ];
        match &r.result {
            Ok(rec) => {
                cells.push(fmt_opt(rec.rows.last().map(|x| x.best_observed)));
                for k in CHECKPOINTS {
                    cells.push(fmt_opt(if k <= rec.iterations() { rec.best_observed_at(k) } else { None }));
                }
                let reg = regret_summary(rec)?;
                cells.push(fmt_opt(reg.as_ref().map(|s| s.cumulative)));
                cells.push(fmt_opt(reg.as_ref().and_then(|s| s.normalized_final)));
                cells.push(if timing { rec.wall_ms.to_string() } else { "0".into() });
                cells.push(r.seed.to_string());
                cells.push(fmt_f(rec.best_f()));
                cells.push(if rec.failed.is_some() { "failed" } else { "ok" }.into());
            }
            Err(_) => {
                cells.extend(std::iter::repeat_n(String::new(), 1 + CHECKPOINTS.len() + 2));
                cells.push("0".into());
                cells.push(r.seed.to_string());
                cells.push(String::new());
                cells.push("error".into());
            }
        }
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct WinCount {
    pub wins: usize,
    pub losses: usize,
    pub ties: usize,
}

impl WinCount {
    fn add(&mut self, a: f64, b: f64) {
        if a > b {
            self.wins += 1;
        } else if a < b {
            self.losses += 1;
        } else {
            self.ties += 1;
        }
    }

    pub fn decided(&self) -> usize {
        self.wins + self.losses
    }
}

/// Paired comparison of `mode` against `baseline` on one function and `g`.
#[derive(Debug, Clone, Serialize)]
pub struct FunctionComparison {
    pub function: String,
    pub dim: usize,
    pub g: f64,
    /// Per-seed pairs of final best observations.
    pub pairs: WinCount,
    /// Seed-averaged final best observations.
    pub mean_mode: f64,
    pub mean_baseline: f64,
}

/// Compare `mode` with `baseline` on the final best observation. Pairs with
/// a failed member are skipped.
pub fn paired_comparisons(runs: &[BenchRun], mode: ScheduleMode, baseline: ScheduleMode) -> Vec<FunctionComparison> {
    let mut out: Vec<FunctionComparison> = Vec::new();
    for r in runs.iter().filter(|r| r.mode == mode) {
        let Some(base) = runs
            .iter()
            .find(|b| b.mode == baseline && b.function == r.function && b.dim == r.dim && b.g == r.g && b.seed_index == r.seed_index)
        else {
            continue;
        };
        let (Ok(a), Ok(b)) = (&r.result, &base.result) else {
            continue;
        };
        if a.failed.is_some() || b.failed.is_some() {
            continue;
        }
        let pos = match out.iter().position(|c| c.function == r.function && c.dim == r.dim && c.g == r.g) {
            Some(p) => p,
            None => {
                out.push(FunctionComparison {
                    function: r.function.clone(),
                    dim: r.dim,
                    g: r.g,
                    pairs: WinCount::default(),
                    mean_mode: 0.0,
                    mean_baseline: 0.0,
                });
                out.len() - 1
            }
        };
        let c = &mut out[pos];
        let (va, vb) = (final_best(a), final_best(b));
        c.pairs.add(va, vb);
        c.mean_mode += va;
        c.mean_baseline += vb;
    }
    for c in &mut out {
        let n = (c.pairs.wins + c.pairs.losses + c.pairs.ties) as f64;
        c.mean_mode /= n;
        c.mean_baseline /= n;
    }
    out
}

fn final_best(r: &RunRecord) -> f64 {
    r.rows.last().map_or(f64::NEG_INFINITY, |x| x.best_observed)
}

/// Function-level wins (seed-averaged) for one `g`.
pub fn function_wins(comparisons: &[FunctionComparison], g: f64) -> WinCount {
    let mut w = WinCount::default();
    for c in comparisons.iter().filter(|c| c.g == g) {
        w.add(c.mean_mode, c.mean_baseline);
    }
    w
}

fn wins_csv(runs: &[BenchRun], modes: &[ScheduleMode], gs: &[f64]) -> (String, String) {
    let mut detail = String::from("function,dim,g,alpha_mode,baseline,wins,losses,ties,mean_best_observed,mean_best_observed_baseline\n");
    let mut summary =
        String::from("g,alpha_mode,baseline,function_wins,function_losses,function_ties,pair_wins,pair_losses,pair_ties\n");
    let baseline = modes[0];
    for &mode in &modes[1..] {
        let comps = paired_comparisons(runs, mode, baseline);
        for c in &comps {
            let _ = writeln!(
                detail,
                "{},{},{},{},{},{},{},{},{},{}",
                c.function,
                c.dim,
                fmt_f(c.g),
                mode.label(),
                baseline.label(),
                c.pairs.wins,
                c.pairs.losses,
                c.pairs.ties,
                fmt_f(c.mean_mode),
                fmt_f(c.mean_baseline)
            );
        }
        for &g in gs {
            let f = function_wins(&comps, g);
            let mut p = WinCount::default();
            for c in comps.iter().filter(|c| c.g == g) {
                p.wins += c.pairs.wins;
                p.losses += c.pairs.losses;
                p.ties += c.pairs.ties;
            }
            let _ = writeln!(
                summary,
                "{},{},{},{},{},{},{},{},{}",
                fmt_f(g),
                mode.label(),
                baseline.label(),
                f.wins,
                f.losses,
                f.ties,
                p.wins,
                p.losses,
                p.ties
            );
        }
    }
    (detail, summary)
}

fn g_label(g: f64) -> String {
    format!("{g}").replace('.', "p")
}

pub fn cmd_bench(a: &BenchArgs) -> Result<i32> {
    let cfg = BenchConfigFile::load(&a.config)?;
    let dir = out_dir(a.out.as_deref(), cfg.output.dir.as_deref(), "bench");
    let runs = run_bench(&cfg, a.config.parent(), cfg.bench.parallel && !a.sequential)?;
    if cfg.bench.write_traces {
        for r in &runs {
            if let Ok(rec) = &r.result {
                let name = format!("{}_d{}_g{}_{}_s{}.csv", r.function, r.dim, g_label(r.g), r.mode.label(), r.seed_index);
                write_file(&dir.join("traces").join(name), &trace_csv(rec))?;
            }
        }
    }
    write_file(&dir.join("aggregate.csv"), &aggregate_csv(&runs, cfg.bench.timing)?)?;
    let (detail, summary) = wins_csv(&runs, &cfg.bench.modes, &cfg.bench.g);
    write_file(&dir.join("wins.csv"), &detail)?;
    write_file(&dir.join("wins_summary.csv"), &summary)?;
    write_file(&dir.join("effective_config.toml"), &cfg.to_toml())?;
    let ok = runs.iter().filter(|r| r.succeeded()).count();
    for r in runs.iter().filter(|r| !r.succeeded()) {
        let msg = match &r.result {
            Ok(rec) => rec.failed.clone().unwrap_or_default(),
            Err(e) => e.to_string(),
        };
        eprintln!("run {} g={} {} seed {} failed: {msg}", r.function, r.g, r.mode.label(), r.seed_index);
    }
    println!("{ok}/{} runs succeeded; wrote {}", runs.len(), dir.display());
    Ok(if ok * 10 >= runs.len() * 9 { 0 } else { 3 })
}

/// Optimizer settings of the toy study: Matérn 5/2 kernel, zero prior mean
/// on raw observations, hyperparameters (including the noise term) refit
/// every step under the untempered marginal likelihood, shared initial
/// design per seed.
pub fn toy_config(args: &ToyArgs, alpha: f64, seed_index: usize) -> BoConfig {
    BoConfig {
        kernel: KernelFamily::Matern52,
        acquisition: AcqConfig {
            g: args.g,
            nu: 1.0,
            xi: args.xi,
            quadrature_nodes: DEFAULT_QUADRATURE_NODES,
        },
        schedule: ScheduleMode::Fixed { alpha },
        noise_variance: Some(args.noise_sd * args.noise_sd),
        fit_noise: Some(true),
        horizon: Some(args.iterations),
        init_size: Some(args.init_size),
        acq_budget: args.acq_budget,
        hyperfit: Hyperfit::EveryStep,
        hyperfit_tempered: false,
        output_transform: OutputTransform::None,
        seed: derive_seed(args.base_seed, "toy", 1, seed_index),
        ..BoConfig::default()
    }
}

#[derive(Debug)]
pub struct ToyRun {
    pub seed_index: usize,
    pub alpha: f64,
    pub record: RunRecord,
}

/// Run the toy study for every `(seed, alpha)` pair.
pub fn run_toy(args: &ToyArgs) -> Result<Vec<ToyRun>> {
    let obj = toy_objective(args.noise_sd)?;
    let mut jobs = Vec::new();
    let mut keys = Vec::new();
    for s in 0..args.seeds {
        for &alpha in &args.alphas {
            let config = toy_config(args, alpha, s);
            config.validate()?;
            keys.push((s, alpha));
            jobs.push(SweepJob {
                objective: obj.clone(),
                config,
            });
        }
    }
    keys.into_iter()
        .zip(sweep(&jobs, true))
        .map(|((seed_index, alpha), r)| r.map(|record| ToyRun { seed_index, alpha, record }))
        .collect()
}

pub fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Best observation after `k` iterations of the toy run (0 = initial design).
pub fn toy_best_at(run: &ToyRun, k: usize) -> f64 {
    run.record.rows[..run.record.init_size + k.min(run.record.iterations())]
        .iter()
        .map(|r| r.y)
        .fold(f64::NEG_INFINITY, f64::max)
}

pub fn cmd_toy(a: &ToyArgs) -> Result<i32> {
    let dir = out_dir(a.out.as_deref(), None, "toy");
    let runs = run_toy(a)?;
    let mut traces = String::from("seed,alpha,iteration,best_observed,best_f\n");
    for r in &runs {
        let mut best_f = f64::NEG_INFINITY;
        for (k, row) in r.record.rows.iter().enumerate() {
            best_f = best_f.max(row.f);
            if k + 1 < r.record.init_size {
                continue;
            }
            let it = k + 1 - r.record.init_size;
            let _ = writeln!(traces, "{},{},{it},{},{}", r.seed_index, fmt_f(r.alpha), fmt_f(row.best_observed), fmt_f(best_f));
        }
    }
    write_file(&dir.join("toy_traces.csv"), &traces)?;
    for r in &runs {
        let name = format!("s{}_a{}.csv", r.seed_index, g_label(r.alpha));
        write_file(&dir.join("runs").join(name), &trace_csv(&r.record))?;
    }

    let mut summary = String::from("alpha,iteration,median_best_observed\n");
    for &alpha in &a.alphas {
        for k in 0..=a.iterations {
            let mut v: Vec<f64> = runs.iter().filter(|r| r.alpha == alpha).map(|r| toy_best_at(r, k)).collect();
            let _ = writeln!(summary, "{},{k},{}", fmt_f(alpha), fmt_f(median(&mut v)));
        }
    }
    write_file(&dir.join("toy_summary.csv"), &summary)?;

    let mut curves = String::from("seed,alpha,iteration,x,mean,sd,acquisition\n");
    let grid: Vec<f64> = (0..a.grid.max(2)).map(|i| i as f64 / (a.grid.max(2) - 1) as f64).collect();
    for r in runs.iter().filter(|r| r.seed_index < a.curve_seeds) {
        for it in 1..=r.record.iterations() {
            let (state, step) = r.record.planning_state(it, r.alpha)?;
            let acq = AcqConfig {
                xi: a.xi / step.y_scale,
                ..AcqConfig::new(a.g)?
            };
            let inc = (step.mu_plus - step.y_shift) / step.y_scale;
            for &x in &grid {
                let p = state.predict(&[x])?;
                let value = gei_value(p.mean, p.sd(), inc, &acq) * step.y_scale.powf(a.g);
                let _ = writeln!(
                    curves,
                    "{},{},{it},{},{},{},{}",
                    r.seed_index,
                    fmt_f(r.alpha),
                    fmt_f(x),
                    fmt_f(step.y_shift + step.y_scale * p.mean),
                    fmt_f(step.y_scale * p.sd()),
                    fmt_f(value)
                );
            }
        }
    }
    write_file(&dir.join("toy_curves.csv"), &curves)?;
    print!("{summary}");
    println!("wrote {}", dir.display());
    Ok(0)
}

/// Trajectories of the adaptive schedule on synthetic streams, one per seed.
pub fn run_schedule_sim(a: &ScheduleSimArgs) -> Result<Vec<Vec<f64>>> {
    (0..a.seeds)
        .map(|s| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(a.base_seed, "schedule", 0, s));
            simulate_stream(a.bias, a.noise_variance, a.pv, a.t_max, a.floor, &mut rng)
        })
        .collect()
}

pub fn cmd_schedule_sim(a: &ScheduleSimArgs) -> Result<i32> {
    if a.t_max == 0 || a.seeds == 0 {
        return Err(BoError::config("t_max/seeds", "must be at least 1"));
    }
    let dir = out_dir(a.out.as_deref(), None, "schedule-sim");
    let trajs = run_schedule_sim(a)?;
    let mut csv = String::from("seed,t,alpha\n");
    for (s, tr) in trajs.iter().enumerate() {
        for (t, v) in tr.iter().enumerate() {
            let _ = writeln!(csv, "{s},{},{}", t + 1, fmt_f(*v));
        }
    }
    write_file(&dir.join("schedule_sim.csv"), &csv)?;
    let limit = schedule_limit(a.bias, a.noise_variance, a.pv);
    let mut finals: Vec<f64> = trajs.iter().filter_map(|t| t.last().copied()).collect();
    let med = median(&mut finals);
    let meta = serde_json::json!({
        "bias": a.bias,
        "noise_variance": a.noise_variance,
        "pv": a.pv,
        "t_max": a.t_max,
        "seeds": a.seeds,
        "limit": limit,
        "median_final_alpha": med,
    });
    write_file(&dir.join("schedule_limit.json"), &serde_json::to_string_pretty(&meta).expect("serializes"))?;
    println!("limit = {limit}");
    println!("median final alpha = {med}");
    Ok(0)
}

pub fn cmd_info(what: InfoWhat) -> Result<i32> {
    match what {
        InfoWhat::Objectives => {
            println!("name\tdefault_dim\tdims");
            for b in list_builtins() {
                let dims = b.fixed_dim.map_or_else(|| "any".to_string(), |d| d.to_string());
                println!("{}\t{}\t{dims}", b.name, b.default_dim);
            }
        }
        InfoWhat::Kernels => {
            for k in KernelFamily::ALL {
                println!("{}", k.name());
            }
        }
        InfoWhat::Version => println!("{}", env!("CARGO_PKG_VERSION")),
    }
    Ok(0)
}

/// Objective spec helper for tests and scripts.
pub fn named_objective(name: &str, dim: Option<usize>, noise_sd: f64) -> ObjectiveSpec {
    ObjectiveSpec {
        noise_sd,
        ..ObjectiveSpec::named(name, dim)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_flag_parsing() {
        assert_eq!(parse_schedule("adaptive").unwrap(), ScheduleMode::Adaptive);
        assert_eq!(parse_schedule("fixed:0.5").unwrap(), ScheduleMode::Fixed { alpha: 0.5 });
        assert!(parse_schedule("fixed").is_err());
        assert_eq!(parse_bias("constant:2").unwrap(), BiasMode::Constant { b: 2.0 });
    }

    #[test]
    fn float_format_round_trips() {
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 12345.678] {
            assert_eq!(fmt_f(v).parse::<f64>().unwrap(), v);
        }
    }

    #[test]
    fn medians() {
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&mut [4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn toy_defaults() {
        let a = ToyArgs::default();
        assert_eq!(a.seeds, 20);
        assert_eq!(a.alphas, vec![0.1, 0.5, 1.0]);
        let c = toy_config(&a, 0.1, 3);
        assert_eq!(c.seed, toy_config(&a, 1.0, 3).seed);
    }
}
