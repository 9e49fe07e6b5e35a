//! Generalized expected improvement.
//!
//! For a Gaussian predictive `N(mean, sd^2)` and incumbent `m`, the g-th
//! improvement moment `E[max(0, f - m)^g]` equals `sd^g tau_g(v)` with
//! `v = (m - mean) / sd`. `g = 0` is probability of improvement and `g = 1`
//! is classical expected improvement.

mod quadrature;
pub mod tau;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::design::{halton_screen, Domain};
use crate::error::{check_dim, BoError, Result};
use crate::gp::{refine_top, GpState};
use crate::normal::{pdf, upper_tail};

pub use tau::{t_moment, tau_at_zero, tau_g, tau_g_inverse, tau_quadrature, tau_series, DEFAULT_QUADRATURE_NODES, V_MAX};

fn default_nu() -> f64 {
    1.0
}

fn default_nodes() -> usize {
    DEFAULT_QUADRATURE_NODES
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AcqConfig {
    pub g: f64,
    /// Scale applied to the predictive standard deviation.
    #[serde(default = "default_nu")]
    pub nu: f64,
    /// Offset added to the incumbent.
    #[serde(default)]
    pub xi: f64,
    #[serde(default = "default_nodes")]
    pub quadrature_nodes: usize,
}

impl AcqConfig {
    pub fn new(g: f64) -> Result<Self> {
        let c = AcqConfig {
            g,
            nu: 1.0,
            xi: 0.0,
            quadrature_nodes: DEFAULT_QUADRATURE_NODES,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.g >= 0.0 && self.g.is_finite()) {
            return Err(BoError::config("g", format!("must be a finite nonnegative number, got {}", self.g)));
        }
        if !(self.nu > 0.0 && self.nu.is_finite()) {
            return Err(BoError::config("nu", format!("must be positive, got {}", self.nu)));
        }
        if !(self.xi >= 0.0 && self.xi.is_finite()) {
            return Err(BoError::config("xi", format!("must be nonnegative, got {}", self.xi)));
        }
        if self.quadrature_nodes < 3 {
            return Err(BoError::config("quadrature_nodes", "must be at least 3"));
        }
        Ok(())
    }
}

/// `(nu sd)^g tau_g(v / nu)` with `v = (incumbent + xi - mean) / sd`.
pub fn gei_value(mean: f64, sd: f64, incumbent: f64, config: &AcqConfig) -> f64 {
    if sd <= 0.0 {
        return 0.0;
    }
    let v = (incumbent + config.xi - mean) / sd / config.nu;
    if v >= V_MAX + 1.0 {
        return 0.0;
    }
    let t = tau_g(v, config.g, config.quadrature_nodes);
    if config.g == 0.0 {
        t
    } else {
        (config.nu * sd).powf(config.g) * t
    }
}

/// Classical expected improvement `(mean - m) Phi(z) + sd phi(z)`, `z = (mean - m) / sd`.
pub fn ei_closed_form(mean: f64, sd: f64, incumbent: f64) -> f64 {
    if sd <= 0.0 {
        return (mean - incumbent).max(0.0);
    }
    let z = (mean - incumbent) / sd;
    (mean - incumbent) * upper_tail(-z) + sd * pdf(z)
}

/// Maximizer of the acquisition and its value.
#[derive(Debug, Clone, PartialEq)]
pub struct AcqMax {
    pub x: Vec<f64>,
    pub value: f64,
}

/// Maximize g-EI over `domain` with a quasi-random screen of `budget` points
/// followed by compass refinement of the five best. Ties go to the earliest
/// screened point.
pub fn maximize_acquisition<R: Rng + ?Sized>(
    state: &GpState,
    incumbent: f64,
    config: &AcqConfig,
    domain: &Domain,
    budget: usize,
    rng: &mut R,
) -> Result<AcqMax> {
    config.validate().map_err(|e| BoError::usage(e.to_string()))?;
    domain.validate()?;
    check_dim(state.dim(), domain.dim(), "domain")?;
    if budget == 0 {
        return Err(BoError::usage("acquisition budget must be at least 1"));
    }
    let value_at = |x: &[f64]| -> f64 {
        match state.predict(x) {
            Ok(p) => gei_value(p.mean, p.sd(), incumbent, config),
            Err(_) => f64::NEG_INFINITY,
        }
    };
    let cands = halton_screen(domain, budget, rng)?;
    let scored: Vec<(usize, f64)> = cands.iter().enumerate().map(|(i, c)| (i, value_at(c))).collect();
    let (x, value) = refine_top(domain, &cands, scored, budget, value_at)?;
    Ok(AcqMax { x, value })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gp::{tempered_posterior, JitterPolicy};
    use crate::kernel::{KernelFamily, KernelSpec};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cfg(g: f64) -> AcqConfig {
        AcqConfig::new(g).unwrap()
    }

    #[test]
    fn reference_values() {
        assert!((gei_value(0.0, 1.0, 0.0, &cfg(1.0)) - 0.398_942_280_401_432_7).abs() < 1e-15);
        assert_eq!(gei_value(0.0, 1.0, 0.0, &cfg(0.0)), 0.5);
        assert!((gei_value(0.0, 1.0, 0.0, &cfg(2.0)) - 0.5).abs() < 1e-15);
        assert_eq!(gei_value(3.0, 0.0, 0.0, &cfg(1.0)), 0.0);
    }

    #[test]
    fn ei_matches_closed_form() {
        for &(m, s, inc) in &[(0.3, 0.7, 0.1), (-1.0, 0.2, 0.5), (2.0, 1.5, 2.0)] {
            assert!((gei_value(m, s, inc, &cfg(1.0)) - ei_closed_form(m, s, inc)).abs() < 1e-14);
        }
    }

    #[test]
    fn scale_and_jitter() {
        let c = AcqConfig { g: 2.0, nu: 2.0, xi: 0.3, quadrature_nodes: 200 };
        let want = 4.0 * 0.25 * tau_g((0.5 + 0.3 - 0.1) / 0.5 / 2.0, 2.0, 200);
        assert!((gei_value(0.1, 0.5, 0.5, &c) - want).abs() < 1e-15);
    }

    #[test]
    fn invalid_config_names_field() {
        let c = AcqConfig { g: -1.0, ..cfg(1.0) };
        assert!(c.validate().unwrap_err().to_string().contains("`g`"));
    }

    #[test]
    fn avoids_observed_point_below_incumbent() {
        let spec = KernelSpec::isotropic(KernelFamily::Matern52, 1, 0.2).unwrap();
        let s = tempered_posterior(&[vec![0.5]], &[-0.5], &spec, 1e-4, 1.0, &JitterPolicy::default()).unwrap();
        let dom = Domain::cube(1, 0.0, 1.0).unwrap();
        let best = maximize_acquisition(&s, 0.0, &cfg(1.0), &dom, 200, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert!((best.x[0] - 0.5).abs() > 0.05);
    }

    #[test]
    fn flat_prior_value() {
        let spec = KernelSpec::isotropic(KernelFamily::SquaredExponential, 1, 0.01).unwrap();
        let s = tempered_posterior(&[vec![100.0]], &[0.0], &spec, 1.0, 1.0, &JitterPolicy::default()).unwrap();
        let dom = Domain::cube(1, 0.0, 1.0).unwrap();
        let c = AcqConfig { xi: 0.2, ..cfg(1.5) };
        let best = maximize_acquisition(&s, 0.0, &c, &dom, 50, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert!((best.value - tau_g(0.2, 1.5, 200)).abs() < 1e-12);
    }
}
