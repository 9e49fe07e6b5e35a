//! Stationary covariance functions with per-dimension length-scales.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::fmt;

use crate::error::{check_dim, BoError, Result};

/// Covariance family. Matérn orders are restricted to the half-integer
/// cases that have elementary closed forms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum KernelFamily {
    #[serde(rename = "se")]
    SquaredExponential,
    #[serde(rename = "matern12")]
    Matern12,
    #[serde(rename = "matern32")]
    Matern32,
    #[serde(rename = "matern52")]
    Matern52,
}

impl KernelFamily {
    pub const ALL: [KernelFamily; 4] = [
        KernelFamily::SquaredExponential,
        KernelFamily::Matern12,
        KernelFamily::Matern32,
        KernelFamily::Matern52,
    ];

    pub fn name(self) -> &'static str {
        match self {
            KernelFamily::SquaredExponential => "se",
            KernelFamily::Matern12 => "matern12",
            KernelFamily::Matern32 => "matern32",
            KernelFamily::Matern52 => "matern52",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|f| f.name() == name)
    }

    /// Correlation as a function of the scaled distance `r`.
    #[inline]
    fn correlation(self, r2: f64) -> f64 {
        match self {
            KernelFamily::SquaredExponential => (-0.5 * r2).exp(),
            KernelFamily::Matern12 => (-r2.sqrt()).exp(),
            KernelFamily::Matern32 => {
                let s = (3.0 * r2).sqrt();
                (1.0 + s) * (-s).exp()
            }
            KernelFamily::Matern52 => {
                let s = (5.0 * r2).sqrt();
                (1.0 + s + 5.0 * r2 / 3.0) * (-s).exp()
            }
        }
    }

    /// `-dk/d(r^2) * 2`, i.e. the factor `w` with
    /// `dk/d(log l_j) = signal_variance * w * (delta_j / l_j)^2`.
    #[inline]
    fn lengthscale_weight(self, r2: f64) -> f64 {
        match self {
            KernelFamily::SquaredExponential => (-0.5 * r2).exp(),
            KernelFamily::Matern12 => {
                let r = r2.sqrt();
                if r == 0.0 {
                    0.0
                } else {
                    (-r).exp() / r
                }
            }
            KernelFamily::Matern32 => 3.0 * (-(3.0 * r2).sqrt()).exp(),
            KernelFamily::Matern52 => {
                let s = (5.0 * r2).sqrt();
                5.0 / 3.0 * (1.0 + s) * (-s).exp()
            }
        }
    }
}

impl fmt::Display for KernelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

fn default_signal_variance() -> f64 {
    1.0
}

/// Covariance family plus ARD length-scales and signal variance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSpec {
    pub family: KernelFamily,
    pub lengthscales: Vec<f64>,
    #[serde(default = "default_signal_variance")]
    pub signal_variance: f64,
}

impl KernelSpec {
    pub fn new(family: KernelFamily, lengthscales: Vec<f64>, signal_variance: f64) -> Result<Self> {
        let spec = KernelSpec {
            family,
            lengthscales,
            signal_variance,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Isotropic kernel with unit signal variance.
    pub fn isotropic(family: KernelFamily, dim: usize, lengthscale: f64) -> Result<Self> {
        Self::new(family, vec![lengthscale; dim], 1.0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.lengthscales.is_empty() {
            return Err(BoError::usage("kernel needs at least one length-scale"));
        }
        if let Some(l) = self
            .lengthscales
            .iter()
            .find(|l| !(l.is_finite() && **l > 0.0))
        {
            return Err(BoError::usage(format!("length-scale must be positive, got {l}")));
        }
        if !(self.signal_variance.is_finite() && self.signal_variance > 0.0) {
            return Err(BoError::usage(format!(
                "signal variance must be positive, got {}",
                self.signal_variance
            )));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.lengthscales.len()
    }

    #[inline]
    fn scaled_sq_dist(&self, x: &[f64], x2: &[f64]) -> f64 {
        x.iter()
            .zip(x2)
            .zip(&self.lengthscales)
            .map(|((a, b), l)| {
                let d = (a - b) / l;
                d * d
            })
            .sum()
    }

    /// Kernel value without dimension checks. Callers guarantee lengths match.
    #[inline]
    pub(crate) fn eval_unchecked(&self, x: &[f64], x2: &[f64]) -> f64 {
        self.signal_variance * self.family.correlation(self.scaled_sq_dist(x, x2))
    }

    /// Kernel value and its gradient with respect to each log length-scale.
    pub(crate) fn eval_with_lengthscale_grad(&self, x: &[f64], x2: &[f64], grad: &mut [f64]) -> f64 {
        let r2 = self.scaled_sq_dist(x, x2);
        let w = self.signal_variance * self.family.lengthscale_weight(r2);
        for (((g, a), b), l) in grad.iter_mut().zip(x).zip(x2).zip(&self.lengthscales) {
            let d = (a - b) / l;
            *g = w * d * d;
        }
        self.signal_variance * self.family.correlation(r2)
    }
}

/// Evaluate `k(x, x2)`.
pub fn eval_kernel(x: &[f64], x2: &[f64], spec: &KernelSpec) -> Result<f64> {
    check_dim(spec.dim(), x.len(), "kernel input")?;
    check_dim(spec.dim(), x2.len(), "kernel input")?;
    Ok(spec.eval_unchecked(x, x2))
}

/// Gram matrix over a list of points.
pub fn kernel_matrix(points: &[Vec<f64>], spec: &KernelSpec) -> Result<DMatrix<f64>> {
    if points.is_empty() {
        return Err(BoError::usage("kernel matrix needs at least one point"));
    }
    for p in points {
        check_dim(spec.dim(), p.len(), "design point")?;
    }
    let n = points.len();
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        k[(i, i)] = spec.signal_variance;
        for j in 0..i {
            let v = spec.eval_unchecked(&points[i], &points[j]);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    Ok(k)
}

/// Vector `[k(x_1, x), ..., k(x_t, x)]`.
pub fn cross_vector(points: &[Vec<f64>], x: &[f64], spec: &KernelSpec) -> Result<DVector<f64>> {
    check_dim(spec.dim(), x.len(), "query point")?;
    for p in points {
        check_dim(spec.dim(), p.len(), "design point")?;
    }
    Ok(DVector::from_iterator(
        points.len(),
        points.iter().map(|p| spec.eval_unchecked(p, x)),
    ))
}
