//! Search domains, space-filling designs and derivative-free refinement.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{BoError, Result};

/// Axis-aligned box `[lower_j, upper_j]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Domain {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Domain {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        let d = Domain { lower, upper };
        d.validate()?;
        Ok(d)
    }

    /// `[lo, hi]^dim`
    pub fn cube(dim: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![lo; dim], vec![hi; dim])
    }

    pub fn validate(&self) -> Result<()> {
        if self.lower.is_empty() || self.lower.len() != self.upper.len() {
            return Err(BoError::usage("domain must have matching, nonzero bound lengths"));
        }
        for (j, (lo, hi)) in self.lower.iter().zip(&self.upper).enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(BoError::usage(format!(
                    "domain is empty along axis {j}: [{lo}, {hi}]"
                )));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn width(&self, j: usize) -> f64 {
        self.upper[j] - self.lower[j]
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (lo, hi))| *v >= *lo && *v <= *hi)
    }

    /// Map a point of the unit cube into the box.
    pub fn from_unit(&self, u: &[f64]) -> Vec<f64> {
        u.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(u, (lo, hi))| (lo + u * (hi - lo)).clamp(*lo, *hi))
            .collect()
    }

    pub fn center(&self) -> Vec<f64> {
        self.from_unit(&vec![0.5; self.dim()])
    }
}

const PRIMES: [u32; 40] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89,
    97, 101, 103, 107, 109, 113, 127, 131, 137, 139, 149, 151, 157, 163, 167, 173,
];

fn radical_inverse(mut i: u64, base: u32) -> f64 {
    let b = base as u64;
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while i > 0 {
        r += (i % b) as f64 * f;
        i /= b;
        f *= inv;
    }
    r
}

/// `n` points of a Halton sequence with a random Cranley-Patterson shift,
/// mapped into `domain`.
pub fn halton_screen<R: Rng + ?Sized>(domain: &Domain, n: usize, rng: &mut R) -> Result<Vec<Vec<f64>>> {
    domain.validate()?;
    let d = domain.dim();
    if d > PRIMES.len() {
        return Err(BoError::usage(format!(
            "quasi-random screen supports up to {} dimensions",
            PRIMES.len()
        )));
    }
    let shift: Vec<f64> = (0..d).map(|_| rng.random::<f64>()).collect();
    Ok((1..=n as u64)
        .map(|i| {
            let u: Vec<f64> = (0..d)
                .map(|j| (radical_inverse(i, PRIMES[j]) + shift[j]).fract())
                .collect();
            domain.from_unit(&u)
        })
        .collect())
}

/// Latin hypercube design: along every axis the `n` points occupy `n`
/// distinct equal-width bins.
pub fn initialize_design<R: Rng + ?Sized>(domain: &Domain, n: usize, rng: &mut R) -> Result<Vec<Vec<f64>>> {
    domain.validate()?;
    if n == 0 {
        return Err(BoError::usage("initial design needs at least one point"));
    }
    let d = domain.dim();
    let mut unit = vec![vec![0.0; d]; n];
    let mut perm: Vec<usize> = (0..n).collect();
    for j in 0..d {
        perm.shuffle(rng);
        for (i, p) in perm.iter().enumerate() {
            unit[i][j] = (*p as f64 + rng.random::<f64>()) / n as f64;
        }
    }
    Ok(unit.iter().map(|u| domain.from_unit(u)).collect())
}

/// Settings for [`coordinate_search`].
#[derive(Debug, Clone, Copy)]
pub struct LocalSearch {
    /// Initial step as a fraction of each axis width.
    pub initial_step: f64,
    /// Stop once every step is below this fraction of the axis width.
    pub min_step: f64,
    pub max_evals: usize,
}

impl LocalSearch {
    /// Step sizes matched to a screen of `budget` points in `dim` dimensions.
    pub fn for_screen(budget: usize, dim: usize) -> Self {
        let spacing = (budget.max(1) as f64).powf(-1.0 / dim.max(1) as f64);
        LocalSearch {
            initial_step: (0.5 * spacing).clamp(1e-3, 0.25),
            min_step: 1e-7,
            max_evals: 150 + 60 * dim,
        }
    }
}

/// Compass search maximizing `f` inside `domain`, starting from `(x0, f0)`.
/// Only strict improvements are accepted, so the result never falls below `f0`.
pub fn coordinate_search(
    domain: &Domain,
    x0: &[f64],
    f0: f64,
    settings: LocalSearch,
    mut f: impl FnMut(&[f64]) -> f64,
) -> (Vec<f64>, f64) {
    let d = domain.dim();
    let mut x = x0.to_vec();
    let mut fx = f0;
    let mut step: Vec<f64> = (0..d).map(|j| settings.initial_step * domain.width(j)).collect();
    let floor: Vec<f64> = (0..d).map(|j| settings.min_step * domain.width(j)).collect();
    let mut evals = 0;
    while evals < settings.max_evals {
        let mut improved = false;
        for j in 0..d {
            if step[j] <= floor[j] {
                continue;
            }
            for sign in [1.0, -1.0] {
                let cand_j = (x[j] + sign * step[j]).clamp(domain.lower[j], domain.upper[j]);
                if cand_j == x[j] {
                    continue;
                }
                let old = x[j];
                x[j] = cand_j;
                let fc = f(&x);
                evals += 1;
                if fc > fx {
                    fx = fc;
                    improved = true;
                    break;
                }
                x[j] = old;
            }
        }
        if !improved {
            let mut active = false;
            for (s, fl) in step.iter_mut().zip(&floor) {
                *s *= 0.5;
                active |= *s > *fl;
            }
            if !active {
                break;
            }
        }
    }
    (x, fx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn empty_domain_rejected() {
        assert!(Domain::new(vec![1.0], vec![0.0]).is_err());
        assert!(Domain::new(vec![], vec![]).is_err());
        assert!(Domain::new(vec![0.0, 0.0], vec![1.0]).is_err());
    }

    #[test]
    fn latin_hypercube_is_stratified() {
        let dom = Domain::new(vec![-2.0, 0.0, 10.0], vec![2.0, 1.0, 20.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in [1, 2, 7, 50] {
            let pts = initialize_design(&dom, n, &mut rng).unwrap();
            assert_eq!(pts.len(), n);
            for j in 0..3 {
                let mut bins: Vec<usize> = pts
                    .iter()
                    .map(|p| (((p[j] - dom.lower[j]) / dom.width(j)) * n as f64).floor().min(n as f64 - 1.0) as usize)
                    .collect();
                bins.sort_unstable();
                bins.dedup();
                assert_eq!(bins.len(), n);
            }
            assert!(pts.iter().all(|p| dom.contains(p)));
        }
    }

    #[test]
    fn designs_are_seeded() {
        let dom = Domain::cube(4, 0.0, 1.0).unwrap();
        let a = initialize_design(&dom, 9, &mut ChaCha8Rng::seed_from_u64(11)).unwrap();
        let b = initialize_design(&dom, 9, &mut ChaCha8Rng::seed_from_u64(11)).unwrap();
        assert_eq!(a, b);
        let s1 = halton_screen(&dom, 20, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let s2 = halton_screen(&dom, 20, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(s1, s2);
        assert!(s1.iter().all(|p| dom.contains(p)));
    }

    #[test]
    fn compass_search_finds_quadratic_peak() {
        let dom = Domain::cube(2, -1.0, 1.0).unwrap();
        let f = |x: &[f64]| -((x[0] - 0.3).powi(2) + (x[1] + 0.6).powi(2));
        let x0 = [0.0, 0.0];
        let (x, fx) = coordinate_search(&dom, &x0, f(&x0), LocalSearch { initial_step: 0.1, min_step: 1e-9, max_evals: 5000 }, f);
        assert!((x[0] - 0.3).abs() < 1e-7 && (x[1] + 0.6).abs() < 1e-7);
        assert!(fx <= 0.0 && fx > -1e-13);
    }
}
