//! Theory quantities and experiment metrics.
//!
//! Bound constants whose values are not known in closed form default to 1;
//! the resulting numbers are only meaningful for comparing shapes across
//! `alpha`, `g` and `T`.

use nalgebra::{Cholesky, DMatrix, DVector};
use serde::Serialize;

use crate::acquisition::{tau_at_zero, tau_g_inverse, DEFAULT_QUADRATURE_NODES};
use crate::bo::RunRecord;
use crate::error::{BoError, Result};
use crate::gp::GpState;
use crate::kernel::{eval_kernel, KernelSpec};

fn check_tempering(noise_variance: f64, alpha: f64) -> Result<()> {
    if !(noise_variance > 0.0 && noise_variance.is_finite()) {
        return Err(BoError::usage(format!("noise variance must be positive, got {noise_variance}")));
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(BoError::usage(format!("alpha must lie in [0, 1], got {alpha}")));
    }
    Ok(())
}

/// `0.5 log det(I + (alpha / sigma^2) K)` for a given kernel matrix.
pub fn info_gain(k: &DMatrix<f64>, noise_variance: f64, alpha: f64) -> Result<f64> {
    check_tempering(noise_variance, alpha)?;
    if k.nrows() != k.ncols() {
        return Err(BoError::usage("kernel matrix must be square"));
    }
    let n = k.nrows();
    let a = DMatrix::identity(n, n) + k * (alpha / noise_variance);
    let chol = Cholesky::new(a).ok_or_else(|| BoError::Numerical {
        message: "information gain matrix is not positive definite".into(),
        max_jitter: 0.0,
        diag_ratio: f64::NAN,
    })?;
    let ld: f64 = chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum();
    Ok(ld.max(0.0))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GreedyInfoGain {
    pub value: f64,
    /// Pool indices in selection order.
    pub selected: Vec<usize>,
    pub pool_size: usize,
}

/// Greedy selection of `t` pool points maximizing the tempered information
/// gain. Each step takes the point of largest tempered posterior variance
/// (first index on ties), which is the largest marginal gain.
pub fn greedy_info_gain(
    pool: &[Vec<f64>],
    spec: &KernelSpec,
    noise_variance: f64,
    alpha: f64,
    t: usize,
) -> Result<GreedyInfoGain> {
    check_tempering(noise_variance, alpha)?;
    if t > pool.len() {
        return Err(BoError::usage(format!("cannot select {t} points from a pool of {}", pool.len())));
    }
    let n = pool.len();
    let mut var = pool
        .iter()
        .map(|x| eval_kernel(x, x, spec))
        .collect::<Result<Vec<_>>>()?;
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(t);
    let mut selected = Vec::with_capacity(t);
    let mut value = 0.0;
    if alpha == 0.0 {
        return Ok(GreedyInfoGain {
            value,
            selected: (0..t).collect(),
            pool_size: n,
        });
    }
    let tempered_noise = noise_variance / alpha;
    for _ in 0..t {
        let mut best = usize::MAX;
        for i in 0..n {
            if selected.contains(&i) {
                continue;
            }
            if best == usize::MAX || var[i] > var[best] {
                best = i;
            }
        }
        let vb = var[best].max(0.0);
        value += 0.5 * (1.0 + vb / tempered_noise).ln();
        let denom = (vb + tempered_noise).sqrt();
        let mut col = vec![0.0; n];
        for i in 0..n {
            let prior = eval_kernel(&pool[i], &pool[best], spec)?;
            let explained: f64 = cols.iter().map(|c| c[i] * c[best]).sum();
            col[i] = (prior - explained) / denom;
            var[i] -= col[i] * col[i];
        }
        cols.push(col);
        selected.push(best);
    }
    Ok(GreedyInfoGain {
        value,
        selected,
        pool_size: n,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegretTrace {
    pub instantaneous: Vec<f64>,
    pub cumulative: Vec<f64>,
    pub average: Vec<f64>,
    /// `average[t] / average[0]`; `None` when the first regret is zero.
    pub normalized: Option<Vec<f64>>,
    /// The optimum value was estimated numerically.
    pub estimated_optimum: bool,
    /// Largest negative regret that was clipped to zero.
    pub clipped: f64,
}

const REGRET_SLACK: f64 = 1e-6;

/// Regret of the optimization queries (initial design excluded), using the
/// noiseless objective values stored in the record.
pub fn regret_trace(record: &RunRecord, f_star: f64, estimated_optimum: bool) -> Result<RegretTrace> {
    let fs: Vec<f64> = record.rows.iter().filter(|r| r.step.is_some()).map(|r| r.f).collect();
    regret_from_values(&fs, f_star, estimated_optimum)
}

pub fn regret_from_values(values: &[f64], f_star: f64, estimated_optimum: bool) -> Result<RegretTrace> {
    let mut clipped: f64 = 0.0;
    let mut instantaneous = Vec::with_capacity(values.len());
    for (i, f) in values.iter().enumerate() {
        let r = f_star - f;
        if r < -REGRET_SLACK {
            return Err(BoError::Domain(format!(
                "query {} has value {f} above the stated optimum {f_star}",
                i + 1
            )));
        }
        if r < 0.0 {
            clipped = clipped.max(-r);
        }
        instantaneous.push(r.max(0.0));
    }
    let mut cumulative = Vec::with_capacity(values.len());
    let mut acc = 0.0;
    for r in &instantaneous {
        acc += r;
        cumulative.push(acc);
    }
    let average: Vec<f64> = cumulative.iter().enumerate().map(|(i, c)| c / (i + 1) as f64).collect();
    let normalized = match average.first() {
        Some(&a0) if a0 != 0.0 => Some(average.iter().map(|a| a / a0).collect()),
        _ => None,
    };
    Ok(RegretTrace {
        instantaneous,
        cumulative,
        average,
        normalized,
        estimated_optimum,
        clipped,
    })
}

/// Largest gap over `test_points` between the posterior mean after a full
/// tempered conditioning on `(x_new, y_new)` and a single preconditioned
/// gradient step with rate `alpha / (sigma^2 + alpha v(x_new))`.
pub fn sgd_equivalence_residual(
    prior: &GpState,
    x_new: &[f64],
    y_new: f64,
    alpha_step: f64,
    test_points: &[Vec<f64>],
) -> Result<f64> {
    if !(alpha_step > 0.0 && alpha_step <= 1.0) {
        return Err(BoError::usage(format!("alpha must lie in (0, 1], got {alpha_step}")));
    }
    let spec = prior.spec();
    let s2 = prior.noise_variance();
    let pts = prior.points();
    let n = pts.len();
    let m = prior.mean_offset();

    // full conditioning with per-point noise
    let mut all: Vec<Vec<f64>> = pts.to_vec();
    all.push(x_new.to_vec());
    let mut a = DMatrix::zeros(n + 1, n + 1);
    for i in 0..=n {
        for j in 0..=i {
            let k = eval_kernel(&all[i], &all[j], spec)?;
            a[(i, j)] = k;
            a[(j, i)] = k;
        }
    }
    for i in 0..n {
        a[(i, i)] += s2 / prior.alpha() + prior.jitter();
    }
    a[(n, n)] += s2 / alpha_step;
    let chol = Cholesky::new(a).ok_or_else(|| BoError::Numerical {
        message: "joint system is not positive definite".into(),
        max_jitter: prior.jitter(),
        diag_ratio: f64::NAN,
    })?;
    let mut resid = DVector::from_iterator(n, prior.observations().iter().map(|v| v - m));
    resid = resid.push(y_new - m);
    let w = chol.solve(&resid);

    let p = prior.predict(x_new)?;
    let eta = alpha_step / (s2 + alpha_step * p.variance);
    let innovation = y_new - p.mean;
    let mut worst: f64 = 0.0;
    for x in test_points {
        let kx = DVector::from_iterator(n + 1, all.iter().map(|a| eval_kernel(x, a, spec)).collect::<Result<Vec<_>>>()?);
        let full = m + kx.dot(&w);
        let step = prior.predict_mean(x)? + eta * innovation * prior.covariance(x, x_new)?;
        worst = worst.max((full - step).abs());
    }
    Ok(worst)
}

/// Inputs of the general-`g` regret bound. Constants default to 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundInputs {
    pub horizon: usize,
    pub alpha: f64,
    pub g: f64,
    /// Information gain value used for both `m` and the final product.
    pub gamma: f64,
    pub f_norm_bound: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c_g_prime: f64,
    pub noise_variance: f64,
    pub delta: f64,
}

impl BoundInputs {
    pub fn new(horizon: usize, alpha: f64, g: f64, gamma: f64) -> Self {
        BoundInputs {
            horizon,
            alpha,
            g,
            gamma,
            f_norm_bound: 1.0,
            c1: 1.0,
            c2: 1.0,
            c3: 1.0,
            c_g_prime: 1.0,
            noise_variance: 1.0,
            delta: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundConstants {
    pub m: f64,
    /// `tau_g^{-1}(C_g r^{g/2})` with `r = sigma^2 / (alpha (T-1) + sigma^2)`.
    pub tau_inverse_term: f64,
    /// Extra term for `g < 1`.
    pub eta: Option<f64>,
    pub beta: f64,
    /// `beta sqrt(gamma T / alpha)`
    pub bound: f64,
}

/// `C_g = 2^{g/2} Gamma((g+1)/2) / (2 sqrt(pi))`.
pub fn c_g(g: f64) -> f64 {
    tau_at_zero(g)
}

/// `sqrt(alpha) (sqrt(gamma) + sqrt(log(2 t^2 pi^2 / (3 delta))))`.
pub fn m_alpha(t: usize, alpha: f64, gamma: f64, delta: f64) -> f64 {
    let t = t as f64;
    let log_term = (2.0 * t * t * std::f64::consts::PI.powi(2) / (3.0 * delta)).ln();
    alpha.sqrt() * (gamma.max(0.0).sqrt() + log_term.max(0.0).sqrt())
}

pub fn bound_constants(b: &BoundInputs) -> Result<BoundConstants> {
    if b.horizon < 2 {
        return Err(BoError::usage("horizon must be at least 2"));
    }
    if !(b.delta > 0.0 && b.delta < 1.0) {
        return Err(BoError::usage(format!("delta must lie in (0, 1), got {}", b.delta)));
    }
    if !(b.alpha > 0.0 && b.alpha <= 1.0) {
        return Err(BoError::usage(format!("alpha must lie in (0, 1], got {}", b.alpha)));
    }
    if !(b.g >= 0.0 && b.noise_variance > 0.0 && b.gamma >= 0.0) {
        return Err(BoError::usage("g and gamma must be nonnegative and the noise variance positive"));
    }
    let m = m_alpha(b.horizon, b.alpha, b.gamma, b.delta);
    let r = b.noise_variance / (b.alpha * (b.horizon - 1) as f64 + b.noise_variance);
    let cg = c_g(b.g);
    let tau_inverse_term = if b.g == 0.0 {
        // tau_0^{-1}(tau_0(0))
        0.0
    } else {
        tau_g_inverse(cg * r.powf(b.g / 2.0), b.g, DEFAULT_QUADRATURE_NODES)?
    };
    let prior_part = (2.0 * b.c2).sqrt() * b.f_norm_bound;
    let (beta, eta) = if b.g >= 1.0 {
        let bracket = b.c1 * b.c3 * cg.powf(1.0 / b.g) + 2.0 * 2f64.sqrt() + b.c1 * tau_inverse_term;
        (prior_part + bracket * m, None)
    } else {
        let eta = b.c_g_prime * m.powf(b.g) * r.powf((b.g - 1.0) / 2.0);
        let bracket = 2.0 * 2f64.sqrt() + b.c1 * tau_inverse_term;
        (prior_part + bracket * m + eta, Some(eta))
    };
    let bound = beta * (b.gamma * b.horizon as f64 / b.alpha).sqrt();
    Ok(BoundConstants {
        m,
        tau_inverse_term,
        eta,
        beta,
        bound,
    })
}

/// Explicit regret bound of the tempered linear surrogate:
/// `2 beta_T sqrt(c d T log(1 + alpha L^2 T / (lambda sigma^2 d)))` with
/// `c = 2 sigma^2 / alpha + (L^2 / lambda) / log 2`.
#[allow(clippy::too_many_arguments)]
pub fn linear_bound_value(
    horizon: usize,
    alpha: f64,
    d: usize,
    feature_bound: f64,
    lambda: f64,
    noise_variance: f64,
    s_theta: f64,
    delta: f64,
) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(BoError::usage(format!("delta must lie in (0, 1), got {delta}")));
    }
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(BoError::usage(format!("alpha must lie in (0, 1], got {alpha}")));
    }
    if horizon == 0 || d == 0 || !(feature_bound > 0.0 && lambda > 0.0 && noise_variance > 0.0 && s_theta >= 0.0) {
        return Err(BoError::usage("horizon, dimension, L, lambda and the noise variance must be positive"));
    }
    let (t, df) = (horizon as f64, d as f64);
    let log_growth = (1.0 + alpha * feature_bound * feature_bound * t / (lambda * noise_variance * df)).ln();
    let beta = lambda.sqrt() * s_theta + alpha.sqrt() * (df * log_growth + 2.0 * (1.0 / delta).ln()).sqrt();
    let c = 2.0 * noise_variance / alpha + (feature_bound * feature_bound / lambda) / std::f64::consts::LN_2;
    Ok(2.0 * beta * (c * df * t * log_growth).sqrt())
}
