//! Tempered Bayesian linear regression on a fixed feature map.
//!
//! Prior `theta ~ N(0, lambda^{-1} I)`, likelihood tempered by `alpha`:
//! `V = lambda I + (alpha / sigma^2) sum psi psi^T` and
//! `mu = V^{-1} (alpha / sigma^2) sum y psi`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::acquisition::ei_closed_form;
use crate::error::{check_dim, BoError, Result};

#[derive(Debug, Clone)]
pub struct LinearState {
    precision: DMatrix<f64>,
    weighted_sum: DVector<f64>,
    lambda: f64,
    noise_variance: f64,
    alpha: f64,
    t: usize,
    chol: Cholesky<f64, Dyn>,
}

pub fn linear_init(d: usize, lambda: f64, noise_variance: f64, alpha: f64) -> Result<LinearState> {
    LinearState::new(d, lambda, noise_variance, alpha)
}

pub fn linear_update(state: &LinearState, phi: &[f64], y: f64) -> Result<LinearState> {
    let mut s = state.clone();
    s.update(phi, y)?;
    Ok(s)
}

pub fn linear_predict(state: &LinearState, phi: &[f64]) -> Result<(f64, f64)> {
    state.predict(phi)
}

impl LinearState {
    pub fn new(d: usize, lambda: f64, noise_variance: f64, alpha: f64) -> Result<Self> {
        if d == 0 {
            return Err(BoError::usage("feature dimension must be positive"));
        }
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(BoError::usage(format!("prior precision must be positive, got {lambda}")));
        }
        if !(noise_variance > 0.0 && noise_variance.is_finite()) {
            return Err(BoError::usage(format!("noise variance must be positive, got {noise_variance}")));
        }
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(BoError::usage(format!("alpha must lie in (0, 1], got {alpha}")));
        }
        let precision = DMatrix::identity(d, d) * lambda;
        let chol = Cholesky::new(precision.clone()).expect("scaled identity is positive definite");
        Ok(LinearState {
            precision,
            weighted_sum: DVector::zeros(d),
            lambda,
            noise_variance,
            alpha,
            t: 0,
            chol,
        })
    }

    pub fn feature_dim(&self) -> usize {
        self.weighted_sum.len()
    }

    pub fn precision(&self) -> &DMatrix<f64> {
        &self.precision
    }

    pub fn weighted_sum(&self) -> &DVector<f64> {
        &self.weighted_sum
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn noise_variance(&self) -> f64 {
        self.noise_variance
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn update(&mut self, phi: &[f64], y: f64) -> Result<()> {
        check_dim(self.feature_dim(), phi.len(), "feature vector")?;
        if !(phi.iter().all(|v| v.is_finite()) && y.is_finite()) {
            return Err(BoError::usage("features and observation must be finite"));
        }
        let c = self.alpha / self.noise_variance;
        let d = self.feature_dim();
        for i in 0..d {
            for j in 0..d {
                self.precision[(i, j)] += c * phi[i] * phi[j];
            }
            self.weighted_sum[i] += c * y * phi[i];
        }
        self.t += 1;
        self.chol = Cholesky::new(self.precision.clone()).ok_or_else(|| BoError::Numerical {
            message: "precision matrix lost positive definiteness".into(),
            max_jitter: 0.0,
            diag_ratio: f64::NAN,
        })?;
        Ok(())
    }

    /// Posterior mean of the coefficients.
    pub fn coefficient_mean(&self) -> DVector<f64> {
        self.chol.solve(&self.weighted_sum)
    }

    /// `(psi^T mu, psi^T V^{-1} psi)`.
    pub fn predict(&self, phi: &[f64]) -> Result<(f64, f64)> {
        check_dim(self.feature_dim(), phi.len(), "feature vector")?;
        let p = DVector::from_column_slice(phi);
        let mean = p.dot(&self.coefficient_mean());
        let w = self
            .chol
            .l_dirty()
            .solve_lower_triangular(&p)
            .expect("Cholesky factor has a nonzero diagonal");
        Ok((mean, w.norm_squared()))
    }

    /// `log det V - log det(lambda I)`.
    pub fn log_det_ratio(&self) -> f64 {
        let ld: f64 = self.chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>() * 2.0;
        ld - self.feature_dim() as f64 * self.lambda.ln()
    }

    /// Confidence radius
    /// `sqrt(lambda) S + sqrt(alpha) sqrt(log det V / det(lambda I) + 2 log(1/delta))`.
    pub fn beta_radius(&self, s_theta: f64, delta: f64) -> Result<f64> {
        if !(delta > 0.0 && delta < 1.0) {
            return Err(BoError::usage(format!("delta must lie in (0, 1), got {delta}")));
        }
        let inner = self.log_det_ratio().max(0.0) + 2.0 * (1.0 / delta).ln();
        Ok(self.lambda.sqrt() * s_theta + self.alpha.sqrt() * inner.sqrt())
    }

    /// Determinant growth: returns `(log det ratio, d log(1 + alpha L^2 t / (lambda sigma^2 d)))`.
    pub fn det_growth_check(&self, feature_bound: f64) -> (f64, f64) {
        let d = self.feature_dim() as f64;
        let rhs = d * (1.0 + self.alpha * feature_bound * feature_bound * self.t as f64
            / (self.lambda * self.noise_variance * d))
            .ln();
        (self.log_det_ratio(), rhs)
    }
}

/// Index of the candidate with the largest expected improvement over the best
/// candidate mean. Ties go to the lowest index.
pub fn ei_linear_select(state: &LinearState, candidates: &[Vec<f64>]) -> Result<usize> {
    if candidates.is_empty() {
        return Err(BoError::usage("candidate set is empty"));
    }
    let preds = candidates
        .iter()
        .map(|c| state.predict(c))
        .collect::<Result<Vec<_>>>()?;
    let incumbent = preds.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    let mut best = (0, f64::NEG_INFINITY);
    for (i, (m, v)) in preds.iter().enumerate() {
        let ei = ei_closed_form(*m, v.sqrt(), incumbent);
        if ei > best.1 {
            best = (i, ei);
        }
    }
    Ok(best.0)
}

/// Feature maps for the linear surrogate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FeatureMap {
    Identity { dim: usize },
    /// `psi_i(x) = sqrt(2/D) cos(w_i . x + b_i)`; `||psi|| <= sqrt(2)`.
    RandomFourier { weights: Vec<Vec<f64>>, phases: Vec<f64> },
}

impl FeatureMap {
    /// Random Fourier features approximating an SE kernel with the given length-scale.
    pub fn random_fourier<R: Rng + ?Sized>(input_dim: usize, features: usize, lengthscale: f64, rng: &mut R) -> Result<Self> {
        if input_dim == 0 || features == 0 || !(lengthscale > 0.0) {
            return Err(BoError::usage("random Fourier features need positive sizes and length-scale"));
        }
        let weights = (0..features)
            .map(|_| {
                (0..input_dim)
                    .map(|_| {
                        let z: f64 = StandardNormal.sample(rng);
                        z / lengthscale
                    })
                    .collect()
            })
            .collect();
        let phases = (0..features)
            .map(|_| rng.random::<f64>() * std::f64::consts::TAU)
            .collect();
        Ok(FeatureMap::RandomFourier { weights, phases })
    }

    pub fn input_dim(&self) -> usize {
        match self {
            FeatureMap::Identity { dim } => *dim,
            FeatureMap::RandomFourier { weights, .. } => weights.first().map_or(0, Vec::len),
        }
    }

    pub fn feature_dim(&self) -> usize {
        match self {
            FeatureMap::Identity { dim } => *dim,
            FeatureMap::RandomFourier { weights, .. } => weights.len(),
        }
    }

    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.input_dim(), x.len(), "feature map input")?;
        Ok(match self {
            FeatureMap::Identity { .. } => x.to_vec(),
            FeatureMap::RandomFourier { weights, phases } => {
                let scale = (2.0 / weights.len() as f64).sqrt();
                weights
                    .iter()
                    .zip(phases)
                    .map(|(w, b)| scale * (w.iter().zip(x).map(|(a, c)| a * c).sum::<f64>() + b).cos())
                    .collect()
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn init_is_prior() {
        let s = linear_init(2, 1.0, 1.0, 1.0).unwrap();
        assert_eq!(s.precision(), &DMatrix::identity(2, 2));
        assert_eq!(s.predict(&[1.0, 0.0]).unwrap(), (0.0, 1.0));
        let s = linear_init(2, 4.0, 1.0, 1.0).unwrap();
        assert_eq!(s.predict(&[1.0, 0.0]).unwrap().1, 0.25);
    }

    #[test]
    fn scalar_update() {
        let s = linear_update(&linear_init(1, 1.0, 1.0, 1.0).unwrap(), &[1.0], 1.0).unwrap();
        let (m, v) = s.predict(&[1.0]).unwrap();
        assert!((m - 0.5).abs() < 1e-15 && (v - 0.5).abs() < 1e-15);
        assert_eq!(s.predict(&[0.0]).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn vanishing_alpha_keeps_prior_mean() {
        let s = linear_update(&linear_init(1, 1.0, 1.0, 1e-8).unwrap(), &[1.0], 3.0).unwrap();
        assert!(s.predict(&[1.0]).unwrap().0.abs() < 1e-6);
    }

    #[test]
    fn zero_update_only_counts() {
        let s0 = linear_init(3, 2.0, 0.5, 0.7).unwrap();
        let s1 = linear_update(&s0, &[0.0; 3], 0.0).unwrap();
        assert_eq!(s1.precision(), s0.precision());
        assert_eq!(s1.weighted_sum(), s0.weighted_sum());
        assert_eq!(s1.t(), 1);
    }

    #[test]
    fn beta_at_start() {
        let s = linear_init(3, 1.0, 1.0, 1.0).unwrap();
        assert!((s.beta_radius(1.0, (-0.5f64).exp()).unwrap() - 2.0).abs() < 1e-15);
        assert!((s.beta_radius(1.7, 1.0 - 1e-15).unwrap() - 1.7).abs() < 1e-7);
        assert!(s.beta_radius(1.0, 1.0).is_err());
    }

    #[test]
    fn det_growth_equality_case() {
        let l = 1.7;
        let s = linear_update(&linear_init(1, 1.0, 1.0, 1.0).unwrap(), &[l], 0.3).unwrap();
        let (lhs, rhs) = s.det_growth_check(l);
        assert!((lhs - (1.0 + l * l).ln()).abs() < 1e-12);
        assert!((lhs - rhs).abs() < 1e-12);
        assert_eq!(linear_init(4, 1.0, 1.0, 1.0).unwrap().det_growth_check(1.0), (0.0, 0.0));
    }

    #[test]
    fn selection_rules() {
        let mut s = linear_init(2, 1.0, 1.0, 1.0).unwrap();
        assert_eq!(ei_linear_select(&s, &[vec![0.3, 0.1]]).unwrap(), 0);
        assert!(ei_linear_select(&s, &[]).is_err());
        s.update(&[1.0, 0.0], 2.0).unwrap();
        s.update(&[0.0, 1.0], 2.0).unwrap();
        // equal variance, different means
        assert_eq!(ei_linear_select(&s, &[vec![0.5, 0.0], vec![1.0, 0.0]]).unwrap(), 1);
        // equal means, different variance
        let s = linear_init(2, 1.0, 1.0, 1.0).unwrap();
        assert_eq!(ei_linear_select(&s, &[vec![0.1, 0.0], vec![0.0, 0.9]]).unwrap(), 1);
    }

    #[test]
    fn fourier_features_are_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let fm = FeatureMap::random_fourier(3, 20, 0.5, &mut rng).unwrap();
        for _ in 0..50 {
            let x: Vec<f64> = (0..3).map(|_| rng.random()).collect();
            let psi = fm.eval(&x).unwrap();
            assert!(psi.iter().map(|v| v * v).sum::<f64>() <= 2.0 + 1e-12);
        }
    }
}
