//! Tempering level selection.
//!
//! The adaptive estimator compares the untempered model's average predictive
//! variance plus noise against its prequential squared error:
//! `alpha = min(sqrt((PV/t + s2) / (PV/t + MSE/t)), 1)`, clamped below by a floor.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{BoError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScheduleMode {
    Fixed { alpha: f64 },
    Adaptive,
}

impl ScheduleMode {
    pub fn label(&self) -> String {
        match self {
            ScheduleMode::Fixed { alpha } => format!("fixed_{alpha}"),
            ScheduleMode::Adaptive => "adaptive".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NoiseMode {
    Known { variance: f64 },
    PrequentialMin,
}

pub const DEFAULT_ALPHA_FLOOR: f64 = 0.05;
const NOISE_FLOOR: f64 = 1e-8;
const NOISE_WINDOWS: usize = 4;

/// Noise variance estimate. `PrequentialMin` splits the residual history into
/// four consecutive windows (at least two residuals each) and returns the
/// smallest window mean square.
pub fn estimate_noise(residuals: &[f64], mode: NoiseMode, fallback: f64) -> f64 {
    match mode {
        NoiseMode::Known { variance } => variance,
        NoiseMode::PrequentialMin => {
            if residuals.len() < 2 {
                return fallback;
            }
            let width = (residuals.len() / NOISE_WINDOWS).max(2);
            residuals
                .chunks(width)
                .filter(|c| c.len() >= 2)
                .map(|c| c.iter().map(|r| r * r).sum::<f64>() / c.len() as f64)
                .fold(f64::INFINITY, f64::min)
                .max(NOISE_FLOOR)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleState {
    pub mode: ScheduleMode,
    pub noise_mode: NoiseMode,
    pub t: usize,
    pub sum_pv: f64,
    pub sum_mse: f64,
    pub sigma2_hat: f64,
    pub alpha_floor: f64,
    residuals: Vec<f64>,
    prior_noise: f64,
}

impl ScheduleState {
    /// `prior_noise` is used as the noise estimate until enough residuals exist.
    pub fn new(mode: ScheduleMode, noise_mode: NoiseMode, prior_noise: f64, alpha_floor: f64) -> Result<Self> {
        if let ScheduleMode::Fixed { alpha } = mode {
            if !(alpha > 0.0 && alpha <= 1.0) {
                return Err(BoError::config("schedule.alpha", format!("must lie in (0, 1], got {alpha}")));
            }
        }
        if !(alpha_floor > 0.0 && alpha_floor < 1.0) {
            return Err(BoError::config("schedule.alpha_floor", format!("must lie in (0, 1), got {alpha_floor}")));
        }
        if let NoiseMode::Known { variance } = noise_mode {
            if !(variance > 0.0 && variance.is_finite()) {
                return Err(BoError::config("noise.variance", format!("must be positive, got {variance}")));
            }
        }
        if !(prior_noise > 0.0 && prior_noise.is_finite()) {
            return Err(BoError::config("noise.prior", format!("must be positive, got {prior_noise}")));
        }
        Ok(ScheduleState {
            mode,
            noise_mode,
            t: 0,
            sum_pv: 0.0,
            sum_mse: 0.0,
            sigma2_hat: estimate_noise(&[], noise_mode, prior_noise),
            alpha_floor,
            residuals: Vec::new(),
            prior_noise,
        })
    }

    pub fn fixed(alpha: f64) -> Result<Self> {
        Self::new(ScheduleMode::Fixed { alpha }, NoiseMode::PrequentialMin, 1.0, DEFAULT_ALPHA_FLOOR)
    }

    pub fn adaptive(noise_mode: NoiseMode, prior_noise: f64) -> Result<Self> {
        Self::new(ScheduleMode::Adaptive, noise_mode, prior_noise, DEFAULT_ALPHA_FLOOR)
    }

    /// Record one prequential step. `mean` and `var` must be the untempered
    /// predictive at the query point, computed before `y` was observed.
    pub fn update(&mut self, mean: f64, var: f64, y: f64) {
        let r = y - mean;
        self.sum_pv += var.max(0.0);
        self.sum_mse += r * r;
        self.t += 1;
        self.residuals.push(r);
        self.sigma2_hat = estimate_noise(&self.residuals, self.noise_mode, self.prior_noise);
    }

    pub fn current_alpha(&self) -> f64 {
        match self.mode {
            ScheduleMode::Fixed { alpha } => alpha,
            ScheduleMode::Adaptive => {
                if self.t == 0 {
                    return 1.0;
                }
                let t = self.t as f64;
                let pv = self.sum_pv / t;
                let num = pv + self.sigma2_hat;
                let den = pv + self.sum_mse / t;
                let raw = if den > 0.0 { (num / den).sqrt().min(1.0) } else { 1.0 };
                raw.clamp(self.alpha_floor, 1.0)
            }
        }
    }

    pub fn residuals(&self) -> &[f64] {
        &self.residuals
    }
}

/// Functional form of [`ScheduleState::update`].
pub fn schedule_update(state: &ScheduleState, mean: f64, var: f64, y: f64) -> ScheduleState {
    let mut s = state.clone();
    s.update(mean, var, y);
    s
}

/// Bias sequence for the synthetic prequential stream.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BiasMode {
    /// `e_s = 1/s`
    Vanishing,
    Constant { b: f64 },
}

/// Limit of the adaptive estimator: 1 for vanishing bias, otherwise
/// `sqrt((pv + s2) / (pv + s2 + b^2))`.
pub fn schedule_limit(bias: BiasMode, noise_variance: f64, pv: f64) -> f64 {
    match bias {
        BiasMode::Vanishing => 1.0,
        BiasMode::Constant { b } => ((pv + noise_variance) / (pv + noise_variance + b * b)).sqrt().min(1.0),
    }
}

/// Feed the adaptive schedule a stream whose residual is `e_s + eps_s`,
/// `eps_s ~ N(0, noise_variance)`, with constant predictive variance `pv`.
/// Returns `alpha_t` after each step. The noise variance is treated as known.
pub fn simulate_stream<R: Rng + ?Sized>(
    bias: BiasMode,
    noise_variance: f64,
    pv: f64,
    t_max: usize,
    alpha_floor: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let mut state = ScheduleState::new(
        ScheduleMode::Adaptive,
        NoiseMode::Known { variance: noise_variance },
        noise_variance,
        alpha_floor,
    )?;
    let noise = Normal::new(0.0, noise_variance.sqrt()).map_err(|e| BoError::usage(e.to_string()))?;
    let mut out = Vec::with_capacity(t_max);
    for s in 1..=t_max {
        let e = match bias {
            BiasMode::Vanishing => 1.0 / s as f64,
            BiasMode::Constant { b } => b,
        };
        let y = e + noise.sample(rng);
        state.update(0.0, pv, y);
        out.push(state.current_alpha());
    }
    Ok(out)
}
