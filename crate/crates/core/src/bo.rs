//! Sequential optimization loop and seeded sweeps.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::acquisition::{ei_closed_form, gei_value, maximize_acquisition, AcqConfig};
use crate::design::{halton_screen, initialize_design, Domain};
use crate::error::{BoError, Result};
use crate::gp::{fit_hyperparams, posterior_mean_max, FitOptions, GpState, HyperBounds, JitterPolicy};
use crate::kernel::{KernelFamily, KernelSpec};
use crate::linear::{ei_linear_select, FeatureMap, LinearState};
use crate::objectives::{evaluate_noisy, Objective, TrueBest};
use crate::schedule::{NoiseMode, ScheduleMode, ScheduleState, DEFAULT_ALPHA_FLOOR};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Surrogate {
    #[default]
    Gp,
    Linear {
        /// Random Fourier feature count; 0 selects the identity map.
        #[serde(default)]
        features: usize,
        /// Feature length-scale as a fraction of the mean domain width.
        #[serde(default = "default_rel_lengthscale")]
        lengthscale: f64,
        #[serde(default = "default_lambda")]
        lambda: f64,
    },
}

fn default_rel_lengthscale() -> f64 {
    0.2
}

fn default_lambda() -> f64 {
    1.0
}

/// Hyperparameter refit cadence. `Auto` refits every step for `d <= 3` and
/// every fifth step otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Hyperfit {
    Off,
    EveryStep,
    Every(usize),
    #[default]
    Auto,
}

impl Hyperfit {
    fn resolve(self, dim: usize) -> Hyperfit {
        match self {
            Hyperfit::Auto if dim <= 3 => Hyperfit::EveryStep,
            Hyperfit::Auto => Hyperfit::Every(5),
            other => other,
        }
    }

    fn due(self, iteration: usize) -> bool {
        match self {
            Hyperfit::Off | Hyperfit::Auto => false,
            Hyperfit::EveryStep => true,
            Hyperfit::Every(k) => k > 0 && (iteration - 1).is_multiple_of(k),
        }
    }

    pub fn label(self) -> String {
        match self {
            Hyperfit::Off => "off".into(),
            Hyperfit::EveryStep => "every_step".into(),
            Hyperfit::Every(k) => format!("every_{k}"),
            Hyperfit::Auto => "auto".into(),
        }
    }
}

/// Affine map applied to observations before they reach the surrogate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum OutputTransform {
    None,
    Center,
    #[default]
    Standardize,
}

impl OutputTransform {
    fn fit(self, y: &[f64]) -> (f64, f64) {
        let n = y.len() as f64;
        let mean = y.iter().sum::<f64>() / n;
        match self {
            OutputTransform::None => (0.0, 1.0),
            OutputTransform::Center => (mean, 1.0),
            OutputTransform::Standardize => {
                let var = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
                let sd = var.sqrt();
                (mean, if sd > 1e-12 { sd } else { 1.0 })
            }
        }
    }
}

fn default_family() -> KernelFamily {
    KernelFamily::Matern52
}

fn default_one() -> f64 {
    1.0
}

fn default_acq() -> AcqConfig {
    AcqConfig {
        g: 1.0,
        nu: 1.0,
        xi: 0.0,
        quadrature_nodes: crate::acquisition::DEFAULT_QUADRATURE_NODES,
    }
}

fn default_schedule() -> ScheduleMode {
    ScheduleMode::Adaptive
}

fn default_floor() -> f64 {
    DEFAULT_ALPHA_FLOOR
}

fn default_budget() -> usize {
    1000
}

fn default_restarts() -> usize {
    3
}

fn default_max_iter() -> usize {
    60
}

fn default_initial_noise() -> f64 {
    1e-2
}

fn default_bounds() -> HyperBounds {
    HyperBounds {
        lengthscale: (0.01, 2.0),
        signal_variance: (0.05, 20.0),
        noise_variance: (1e-6, 1.0),
    }
}

fn default_true() -> bool {
    true
}

/// Settings for one optimization run.
///
/// Hyperparameter bounds and the initial noise are in surrogate units (after
/// the output transform). Length-scale bounds and the initial length-scale
/// are fractions of each axis width.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoConfig {
    #[serde(default)]
    pub surrogate: Surrogate,
    #[serde(default = "default_family")]
    pub kernel: KernelFamily,
    #[serde(default = "default_rel_lengthscale")]
    pub lengthscale: f64,
    #[serde(default = "default_one")]
    pub signal_variance: f64,
    #[serde(default = "default_acq")]
    pub acquisition: AcqConfig,
    #[serde(default = "default_schedule")]
    pub schedule: ScheduleMode,
    #[serde(default = "default_floor")]
    pub alpha_floor: f64,
    /// Known observation noise variance in objective units.
    #[serde(default)]
    pub noise_variance: Option<f64>,
    /// Let the surrogate fit its noise term. Defaults to fitting only when the
    /// noise variance is unknown.
    #[serde(default)]
    pub fit_noise: Option<bool>,
    #[serde(default = "default_initial_noise")]
    pub initial_noise: f64,
    /// Optimization iterations after the initial design; defaults to
    /// `min(30, 10 d)`. Zero evaluates the initial design only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<usize>,
    /// Defaults to `min(5, 2d)`.
    #[serde(default)]
    pub init_size: Option<usize>,
    #[serde(default = "default_budget")]
    pub acq_budget: usize,
    #[serde(default)]
    pub hyperfit: Hyperfit,
    /// Fit hyperparameters under the tempered marginal likelihood.
    #[serde(default = "default_true")]
    pub hyperfit_tempered: bool,
    #[serde(default = "default_restarts")]
    pub fit_restarts: usize,
    #[serde(default = "default_max_iter")]
    pub fit_max_iter: usize,
    #[serde(default = "default_bounds")]
    pub bounds: HyperBounds,
    #[serde(default)]
    pub output_transform: OutputTransform,
    #[serde(default)]
    pub seed: u64,
}

impl Default for BoConfig {
    fn default() -> Self {
        BoConfig {
            surrogate: Surrogate::Gp,
            kernel: default_family(),
            lengthscale: default_rel_lengthscale(),
            signal_variance: 1.0,
            acquisition: default_acq(),
            schedule: default_schedule(),
            alpha_floor: DEFAULT_ALPHA_FLOOR,
            noise_variance: None,
            fit_noise: None,
            initial_noise: default_initial_noise(),
            horizon: None,
            init_size: None,
            acq_budget: default_budget(),
            hyperfit: Hyperfit::Auto,
            hyperfit_tempered: true,
            fit_restarts: default_restarts(),
            fit_max_iter: default_max_iter(),
            bounds: default_bounds(),
            output_transform: OutputTransform::Standardize,
            seed: 0,
        }
    }
}

impl BoConfig {
    pub fn effective_horizon(&self, dim: usize) -> usize {
        self.horizon.unwrap_or_else(|| (10 * dim).min(30))
    }

    pub fn effective_init_size(&self, dim: usize) -> usize {
        self.init_size.unwrap_or_else(|| (2 * dim).min(5))
    }

    pub fn validate(&self) -> Result<()> {
        self.acquisition.validate()?;
        if self.init_size == Some(0) {
            return Err(BoError::config("init_size", "must be at least 1"));
        }
        if self.acq_budget == 0 {
            return Err(BoError::config("acq_budget", "must be at least 1"));
        }
        if self.fit_restarts == 0 {
            return Err(BoError::config("fit_restarts", "must be at least 1"));
        }
        if !(self.lengthscale > 0.0 && self.lengthscale.is_finite()) {
            return Err(BoError::config("lengthscale", "must be positive"));
        }
        if !(self.signal_variance > 0.0 && self.signal_variance.is_finite()) {
            return Err(BoError::config("signal_variance", "must be positive"));
        }
        if !(self.initial_noise > 0.0 && self.initial_noise.is_finite()) {
            return Err(BoError::config("initial_noise", "must be positive"));
        }
        if let Some(v) = self.noise_variance {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(BoError::config("noise_variance", "must be nonnegative"));
            }
        }
        if let Hyperfit::Every(0) = self.hyperfit {
            return Err(BoError::config("hyperfit", "refit interval must be at least 1"));
        }
        if let Surrogate::Linear { lengthscale, lambda, .. } = self.surrogate {
            if !(lengthscale > 0.0 && lambda > 0.0) {
                return Err(BoError::config("surrogate", "length-scale and lambda must be positive"));
            }
        }
        self.bounds.validate().map_err(|e| BoError::config("bounds", e.to_string()))?;
        // schedule parameters
        ScheduleState::new(self.schedule, NoiseMode::PrequentialMin, 1.0, self.alpha_floor)?;
        Ok(())
    }

    fn fits_noise(&self) -> bool {
        self.fit_noise.unwrap_or(self.noise_variance.is_none())
    }
}

/// Independent random streams of one run. Each is a ChaCha8 generator keyed
/// by the run seed with a distinct stream id, so the initial design and the
/// noise draws do not depend on any other setting.
pub struct RunStreams {
    pub design: ChaCha8Rng,
    pub noise: ChaCha8Rng,
    pub acquisition: ChaCha8Rng,
    pub hyperfit: ChaCha8Rng,
}

impl RunStreams {
    pub fn new(seed: u64) -> Self {
        let make = |stream: u64| {
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            r.set_stream(stream);
            r
        };
        RunStreams {
            design: make(1),
            noise: make(2),
            acquisition: make(3),
            hyperfit: make(4),
        }
    }
}

/// Surrogate diagnostics for one optimization step.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepInfo {
    pub alpha: f64,
    /// Posterior-mean maximum (objective units) and its location.
    pub mu_plus: f64,
    pub x_plus: Vec<f64>,
    /// Tempered posterior variance at `x_plus` in surrogate units.
    pub var_at_xplus: f64,
    pub acq_value: f64,
    /// Untempered predictive at the query point, fed to the schedule.
    pub mean_untempered: f64,
    pub var_untempered: f64,
    pub mean_tempered: f64,
    pub var_tempered: f64,
    pub lengthscales: Vec<f64>,
    pub signal_variance: f64,
    /// Surrogate noise variance in surrogate units.
    pub noise_variance: f64,
    pub y_shift: f64,
    pub y_scale: f64,
    pub jitter: f64,
    pub sigma2_hat: f64,
    /// Observations available when the step was planned.
    pub n_train: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Row {
    /// 1-based evaluation index.
    pub index: usize,
    /// 0 for initial-design rows.
    pub iteration: usize,
    pub x: Vec<f64>,
    pub y: f64,
    /// Noiseless objective value.
    pub f: f64,
    pub best_observed: f64,
    pub step: Option<StepInfo>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRecord {
    pub objective: String,
    pub dim: usize,
    pub seed: u64,
    pub config_hash: String,
    pub init_size: usize,
    pub horizon: usize,
    pub hyperfit: String,
    pub kernel: KernelFamily,
    pub alpha_floor: f64,
    pub output_transform: OutputTransform,
    pub rows: Vec<Row>,
    /// Visited point with the largest final posterior mean.
    pub recommended_by_mean: Option<Vec<f64>>,
    /// Visited point with the largest observation.
    pub recommended_by_observation: Option<Vec<f64>>,
    pub true_best: Option<TrueBest>,
    pub evaluations: usize,
    pub failed: Option<String>,
    pub wall_ms: u128,
}

impl RunRecord {
    pub fn best_observed_trace(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.best_observed).collect()
    }

    /// Best observation after `k` optimization iterations (0 = initial design).
    pub fn best_observed_at(&self, k: usize) -> Option<f64> {
        self.rows.get(self.init_size + k - 1).map(|r| r.best_observed)
    }

    pub fn iterations(&self) -> usize {
        self.rows.len().saturating_sub(self.init_size)
    }

    /// Best noiseless value among all evaluations.
    pub fn best_f(&self) -> f64 {
        self.rows.iter().map(|r| r.f).fold(f64::NEG_INFINITY, f64::max)
    }

    /// GP surrogate that planned `iteration`, rebuilt from the recorded rows
    /// at tempering level `alpha`, in surrogate units. Returns it with the
    /// step's diagnostics.
    pub fn planning_state(&self, iteration: usize, alpha: f64) -> Result<(GpState, &StepInfo)> {
        let idx = self.init_size + iteration - 1;
        let step = self
            .rows
            .get(idx)
            .and_then(|r| r.step.as_ref())
            .ok_or_else(|| BoError::usage(format!("iteration {iteration} was not recorded")))?;
        let xs: Vec<Vec<f64>> = self.rows[..idx].iter().map(|r| r.x.clone()).collect();
        let yt: Vec<f64> = self.rows[..idx].iter().map(|r| (r.y - step.y_shift) / step.y_scale).collect();
        let spec = KernelSpec::new(self.kernel, step.lengthscales.clone(), step.signal_variance)?;
        let state = GpState::new(&xs, &yt, &spec, step.noise_variance, alpha, 0.0, &JitterPolicy::default())?;
        Ok((state, step))
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Hash of everything that defines a run except its seed.
pub fn config_hash(objective: &Objective, config: &BoConfig) -> String {
    let mut c = config.clone();
    c.seed = 0;
    let doc = serde_json::json!({
        "objective": objective.name(),
        "domain": objective.domain(),
        "noise_sd": objective.noise_sd(),
        "config": c,
    });
    let digest = Sha256::digest(doc.to_string().as_bytes());
    hex(&digest[..8])
}

/// Seed for one sweep member, derived from the base seed and grid coordinates.
pub fn derive_seed(base_seed: u64, objective: &str, dim: usize, seed_index: usize) -> u64 {
    let mut h = Sha256::new();
    h.update(base_seed.to_le_bytes());
    h.update(objective.as_bytes());
    h.update((dim as u64).to_le_bytes());
    h.update((seed_index as u64).to_le_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("digest has 32 bytes"))
}

struct Hypers {
    spec: KernelSpec,
    noise: f64,
}

struct Runner<'a> {
    cfg: &'a BoConfig,
    domain: Domain,
    jitter: JitterPolicy,
    ls_bounds: Vec<(f64, f64)>,
    hyperfit: Hyperfit,
}

impl Runner<'_> {
    fn transformed(&self, ys: &[f64]) -> (Vec<f64>, f64, f64) {
        let (m, s) = self.cfg.output_transform.fit(ys);
        (ys.iter().map(|v| (v - m) / s).collect(), m, s)
    }

    fn known_noise(&self, scale: f64) -> Option<f64> {
        self.cfg.noise_variance.map(|v| (v / (scale * scale)).max(1e-10))
    }

    fn refit(&self, xs: &[Vec<f64>], yt: &[f64], alpha: f64, scale: f64, prev: &Hypers, rng: &mut ChaCha8Rng) -> Result<Hypers> {
        let mut bounds = self.cfg.bounds.clone();
        if !self.cfg.fits_noise() {
            let n = self.known_noise(scale).unwrap_or(prev.noise);
            bounds.noise_variance = (n, n);
        }
        let initial_noise = prev.noise.clamp(bounds.noise_variance.0, bounds.noise_variance.1);
        let mut initial = prev.spec.clone();
        for (l, b) in initial.lengthscales.iter_mut().zip(&self.ls_bounds) {
            *l = l.clamp(b.0, b.1);
        }
        initial.signal_variance = initial.signal_variance.clamp(bounds.signal_variance.0, bounds.signal_variance.1);
        let opts = FitOptions {
            restarts: self.cfg.fit_restarts,
            max_iter: self.cfg.fit_max_iter,
            initial: Some((initial, initial_noise)),
            lengthscale_bounds: Some(self.ls_bounds.clone()),
        };
        let fit_alpha = if self.cfg.hyperfit_tempered { alpha } else { 1.0 };
        let fit = fit_hyperparams(xs, yt, self.cfg.kernel, &bounds, fit_alpha, &opts, rng)?;
        Ok(Hypers {
            spec: fit.spec,
            noise: fit.noise_variance,
        })
    }
}

/// Run the optimization loop on `objective`.
pub fn run_bo(objective: &Objective, config: &BoConfig) -> Result<RunRecord> {
    config.validate()?;
    let start = Instant::now();
    let dim = objective.dim();
    let domain = objective.domain().clone();
    let init_size = config.effective_init_size(dim);
    let horizon = config.effective_horizon(dim);
    let hyperfit = config.hyperfit.resolve(dim);
    let widths: Vec<f64> = (0..dim).map(|j| domain.width(j).max(1e-12)).collect();
    let runner = Runner {
        cfg: config,
        jitter: JitterPolicy::default(),
        ls_bounds: widths
            .iter()
            .map(|w| (config.bounds.lengthscale.0 * w, config.bounds.lengthscale.1 * w))
            .collect(),
        hyperfit,
        domain,
    };
    let mut streams = RunStreams::new(config.seed);
    let mut record = RunRecord {
        objective: objective.name().to_string(),
        dim,
        seed: config.seed,
        config_hash: config_hash(objective, config),
        init_size,
        horizon,
        hyperfit: hyperfit.label(),
        kernel: config.kernel,
        alpha_floor: config.alpha_floor,
        output_transform: config.output_transform,
        rows: Vec::with_capacity(init_size + horizon),
        recommended_by_mean: None,
        recommended_by_observation: None,
        true_best: objective.true_best().cloned(),
        evaluations: 0,
        failed: None,
        wall_ms: 0,
    };

    let mut xs: Vec<Vec<f64>> = Vec::new();
    let mut ys: Vec<f64> = Vec::new();
    let mut best = f64::NEG_INFINITY;
    for x in initialize_design(&runner.domain, init_size, &mut streams.design)? {
        let y = evaluate_noisy(objective, &x, &mut streams.noise)?;
        best = best.max(y);
        record.evaluations += 1;
        record.rows.push(Row {
            index: record.rows.len() + 1,
            iteration: 0,
            f: objective.eval(&x)?,
            x: x.clone(),
            y,
            best_observed: best,
            step: None,
        });
        xs.push(x);
        ys.push(y);
    }

    let (noise_mode, prior_noise) = match config.noise_variance {
        Some(v) => {
            let v = v.max(1e-12);
            (NoiseMode::Known { variance: v }, v)
        }
        None => (NoiseMode::PrequentialMin, config.initial_noise),
    };
    let mut schedule = ScheduleState::new(config.schedule, noise_mode, prior_noise, config.alpha_floor)?;
    let mut hypers = Hypers {
        spec: KernelSpec::new(
            config.kernel,
            widths.iter().map(|w| config.lengthscale * w).collect(),
            config.signal_variance,
        )?,
        noise: config.initial_noise,
    };

    let mut last_state: Option<(GpState, f64, f64)> = None;
    for iteration in 1..=horizon {
        let outcome = match config.surrogate {
            Surrogate::Gp => gp_step(&runner, &xs, &ys, iteration, &schedule, &mut hypers, &mut streams),
            Surrogate::Linear { features, lengthscale, lambda } => {
                linear_step(&runner, &xs, &ys, &schedule, features, lengthscale, lambda, &mut streams)
            }
        };
        let (x, info, state) = match outcome {
            Ok(v) => v,
            Err(e) if e.is_numerical() => {
                record.failed = Some(e.to_string());
                break;
            }
            Err(e) => return Err(e),
        };
        let y = evaluate_noisy(objective, &x, &mut streams.noise)?;
        record.evaluations += 1;
        schedule.update(info.mean_untempered, info.var_untempered, y);
        best = best.max(y);
        record.rows.push(Row {
            index: record.rows.len() + 1,
            iteration,
            f: objective.eval(&x)?,
            x: x.clone(),
            y,
            best_observed: best,
            step: Some(info),
        });
        xs.push(x);
        ys.push(y);
        if let Some(s) = state {
            last_state = Some(s);
        }
    }

    let by_obs = ys
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, v)| if *v > acc.1 { (i, *v) } else { acc });
    record.recommended_by_observation = Some(xs[by_obs.0].clone());
    record.recommended_by_mean = match config.surrogate {
        Surrogate::Gp => {
            let alpha = last_state.as_ref().map_or(1.0, |s| s.0.alpha());
            let (yt, _, _) = runner.transformed(&ys);
            match GpState::new(&xs, &yt, &hypers.spec, hypers.noise, alpha, 0.0, &runner.jitter) {
                Ok(s) => {
                    let mut best_i = (0, f64::NEG_INFINITY);
                    for (i, x) in xs.iter().enumerate() {
                        let m = s.predict_mean(x)?;
                        if m > best_i.1 {
                            best_i = (i, m);
                        }
                    }
                    Some(xs[best_i.0].clone())
                }
                Err(_) => None,
            }
        }
        Surrogate::Linear { .. } => record.recommended_by_observation.clone(),
    };
    record.wall_ms = start.elapsed().as_millis();
    Ok(record)
}

type StepOutcome = (Vec<f64>, StepInfo, Option<(GpState, f64, f64)>);

fn gp_step(
    r: &Runner<'_>,
    xs: &[Vec<f64>],
    ys: &[f64],
    iteration: usize,
    schedule: &ScheduleState,
    hypers: &mut Hypers,
    streams: &mut RunStreams,
) -> Result<StepOutcome> {
    let alpha = schedule.current_alpha();
    let (yt, shift, scale) = r.transformed(ys);
    if !r.cfg.fits_noise() {
        if let Some(n) = r.known_noise(scale) {
            hypers.noise = n;
        }
    }
    if r.hyperfit.due(iteration) {
        *hypers = r.refit(xs, &yt, alpha, scale, hypers, &mut streams.hyperfit)?;
    }
    let tempered = GpState::new(xs, &yt, &hypers.spec, hypers.noise, alpha, 0.0, &r.jitter)?;
    let untempered = if alpha == 1.0 {
        tempered.clone()
    } else {
        tempered.with_alpha(1.0, &r.jitter)?
    };
    let (x_plus, mu_plus) = posterior_mean_max(&tempered, &r.domain, r.cfg.acq_budget, &mut streams.acquisition)?;
    let var_at_xplus = tempered.predict(&x_plus)?.variance;
    let mut acq = r.cfg.acquisition;
    acq.xi /= scale;
    let best = maximize_acquisition(&tempered, mu_plus, &acq, &r.domain, r.cfg.acq_budget, &mut streams.acquisition)?;
    let p1 = untempered.predict(&best.x)?;
    let pa = tempered.predict(&best.x)?;
    let info = StepInfo {
        alpha,
        mu_plus: shift + scale * mu_plus,
        x_plus,
        var_at_xplus,
        acq_value: best.value * scale.powf(acq.g),
        mean_untempered: shift + scale * p1.mean,
        var_untempered: scale * scale * p1.variance,
        mean_tempered: shift + scale * pa.mean,
        var_tempered: scale * scale * pa.variance,
        lengthscales: hypers.spec.lengthscales.clone(),
        signal_variance: hypers.spec.signal_variance,
        noise_variance: hypers.noise,
        y_shift: shift,
        y_scale: scale,
        jitter: tempered.jitter(),
        sigma2_hat: schedule.sigma2_hat,
        n_train: xs.len(),
    };
    Ok((best.x, info, Some((tempered, shift, scale))))
}

#[allow(clippy::too_many_arguments)]
fn linear_step(
    r: &Runner<'_>,
    xs: &[Vec<f64>],
    ys: &[f64],
    schedule: &ScheduleState,
    features: usize,
    rel_lengthscale: f64,
    lambda: f64,
    streams: &mut RunStreams,
) -> Result<StepOutcome> {
    let alpha = schedule.current_alpha();
    let (yt, shift, scale) = r.transformed(ys);
    let dim = r.domain.dim();
    // features act on unit-cube coordinates
    let to_unit = |x: &[f64]| -> Vec<f64> {
        x.iter()
            .enumerate()
            .map(|(j, v)| (v - r.domain.lower[j]) / r.domain.width(j).max(1e-12))
            .collect()
    };
    let fmap = if features == 0 {
        FeatureMap::Identity { dim }
    } else {
        let mut frng = ChaCha8Rng::seed_from_u64(r.cfg.seed);
        frng.set_stream(5);
        FeatureMap::random_fourier(dim, features, rel_lengthscale, &mut frng)?
    };
    let noise = r.known_noise(scale).unwrap_or(r.cfg.initial_noise);
    let mut tempered = LinearState::new(fmap.feature_dim(), lambda, noise, alpha)?;
    let mut untempered = LinearState::new(fmap.feature_dim(), lambda, noise, 1.0)?;
    for (x, y) in xs.iter().zip(&yt) {
        let psi = fmap.eval(&to_unit(x))?;
        tempered.update(&psi, *y)?;
        untempered.update(&psi, *y)?;
    }
    let cands = halton_screen(&r.domain, r.cfg.acq_budget, &mut streams.acquisition)?;
    let feats = cands.iter().map(|c| fmap.eval(&to_unit(c))).collect::<Result<Vec<_>>>()?;
    let idx = ei_linear_select(&tempered, &feats)?;
    let preds = feats.iter().map(|f| tempered.predict(f)).collect::<Result<Vec<_>>>()?;
    let (plus_i, mu_plus) = preds
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, p)| if p.0 > acc.1 { (i, p.0) } else { acc });
    let (m1, v1) = untempered.predict(&feats[idx])?;
    let (ma, va) = preds[idx];
    let info = StepInfo {
        alpha,
        mu_plus: shift + scale * mu_plus,
        x_plus: cands[plus_i].clone(),
        var_at_xplus: preds[plus_i].1,
        acq_value: scale * ei_closed_form(ma, va.sqrt(), mu_plus),
        mean_untempered: shift + scale * m1,
        var_untempered: scale * scale * v1,
        mean_tempered: shift + scale * ma,
        var_tempered: scale * scale * va,
        lengthscales: vec![rel_lengthscale; dim],
        signal_variance: 1.0 / lambda,
        noise_variance: noise,
        y_shift: shift,
        y_scale: scale,
        jitter: 0.0,
        sigma2_hat: schedule.sigma2_hat,
        n_train: xs.len(),
    };
    Ok((cands[idx].clone(), info, None))
}

/// One member of a sweep.
#[derive(Debug, Clone)]
pub struct SweepJob {
    pub objective: Objective,
    pub config: BoConfig,
}

/// Run every job, optionally in parallel. Output order matches input order.
pub fn sweep(jobs: &[SweepJob], parallel: bool) -> Vec<Result<RunRecord>> {
    let run = |j: &SweepJob| run_bo(&j.objective, &j.config);
    if parallel {
        jobs.par_iter().map(run).collect()
    } else {
        jobs.iter().map(run).collect()
    }
}

/// Acquisition value helper used by diagnostics and tests: g-EI at `x` under `state`.
pub fn acquisition_at(state: &GpState, x: &[f64], incumbent: f64, acq: &AcqConfig) -> Result<f64> {
    let p = state.predict(x)?;
    Ok(gei_value(p.mean, p.sd(), incumbent, acq))
}
