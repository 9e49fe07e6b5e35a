//! Tempered Gaussian-process posterior.
//!
//! Tempering the Gaussian likelihood by `alpha` is the same as inflating the
//! noise variance to `sigma^2 / alpha`, so every quantity here is built from
//! the system matrix `Lambda = K + (sigma^2 / alpha) I`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::design::{coordinate_search, halton_screen, Domain, LocalSearch};
use crate::error::{check_dim, BoError, Result};
use crate::kernel::{cross_vector, kernel_matrix, KernelFamily, KernelSpec};
use crate::normal::ln_2pi;

/// Diagonal jitter schedule for the Cholesky factorization. Values are
/// relative to the kernel's signal variance. Factorization is first tried
/// without jitter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JitterPolicy {
    pub initial: f64,
    pub growth: f64,
    pub max: f64,
}

impl Default for JitterPolicy {
    fn default() -> Self {
        JitterPolicy {
            initial: 1e-10,
            growth: 10.0,
            max: 1e-4,
        }
    }
}

type Chol = Cholesky<f64, Dyn>;

/// Factor `a + jitter I`, escalating the jitter until it succeeds.
fn factor_with_jitter(a: &DMatrix<f64>, scale: f64, policy: &JitterPolicy) -> Result<(Chol, f64)> {
    if let Some(c) = Cholesky::new(a.clone()) {
        return Ok((c, 0.0));
    }
    let mut rel = policy.initial;
    let mut last = 0.0;
    while rel <= policy.max * (1.0 + 1e-12) {
        let jitter = rel * scale;
        let mut shifted = a.clone();
        for i in 0..a.nrows() {
            shifted[(i, i)] += jitter;
        }
        if let Some(c) = Cholesky::new(shifted) {
            return Ok((c, jitter));
        }
        last = jitter;
        rel *= policy.growth.max(1.0 + 1e-3);
    }
    let diag = a.diagonal();
    let (lo, hi) = diag
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(*v), hi.max(*v)));
    Err(BoError::Numerical {
        message: format!("Cholesky factorization failed for a {n}x{n} system", n = a.nrows()),
        max_jitter: last,
        diag_ratio: hi / lo,
    })
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(BoError::usage(format!("alpha must lie in (0, 1], got {alpha}")));
    }
    Ok(())
}

fn check_inputs(points: &[Vec<f64>], y: &[f64], spec: &KernelSpec, noise: f64, alpha: f64) -> Result<()> {
    spec.validate()?;
    if points.is_empty() {
        return Err(BoError::usage("posterior needs at least one observation"));
    }
    check_dim(points.len(), y.len(), "observation vector")?;
    if let Some(v) = y.iter().find(|v| !v.is_finite()) {
        return Err(BoError::usage(format!("observations must be finite, got {v}")));
    }
    if !(noise > 0.0 && noise.is_finite()) {
        return Err(BoError::usage(format!("noise variance must be positive, got {noise}")));
    }
    check_alpha(alpha)
}

fn system_matrix(points: &[Vec<f64>], spec: &KernelSpec, noise: f64, alpha: f64) -> Result<DMatrix<f64>> {
    let mut k = kernel_matrix(points, spec)?;
    let tau = noise / alpha;
    for i in 0..k.nrows() {
        k[(i, i)] += tau;
    }
    Ok(k)
}

/// Posterior predictive at a single point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub mean: f64,
    pub variance: f64,
    /// Magnitude of a negative raw variance that was clipped to zero.
    pub clipped: f64,
}

impl Prediction {
    pub fn sd(&self) -> f64 {
        self.variance.sqrt()
    }
}

/// Tempered GP posterior given fixed hyperparameters.
#[derive(Debug, Clone)]
pub struct GpState {
    points: Vec<Vec<f64>>,
    y: Vec<f64>,
    spec: KernelSpec,
    noise_variance: f64,
    alpha: f64,
    mean_offset: f64,
    jitter: f64,
    chol: Chol,
    /// `Lambda^{-1} (y - m)`
    weights: DVector<f64>,
}

/// Build the tempered posterior with a zero prior mean.
pub fn tempered_posterior(
    points: &[Vec<f64>],
    y: &[f64],
    spec: &KernelSpec,
    noise_variance: f64,
    alpha: f64,
    jitter: &JitterPolicy,
) -> Result<GpState> {
    GpState::new(points, y, spec, noise_variance, alpha, 0.0, jitter)
}

impl GpState {
    pub fn new(
        points: &[Vec<f64>],
        y: &[f64],
        spec: &KernelSpec,
        noise_variance: f64,
        alpha: f64,
        mean_offset: f64,
        jitter: &JitterPolicy,
    ) -> Result<Self> {
        check_inputs(points, y, spec, noise_variance, alpha)?;
        let a = system_matrix(points, spec, noise_variance, alpha)?;
        let (chol, jitter) = factor_with_jitter(&a, spec.signal_variance, jitter)?;
        let resid = DVector::from_iterator(y.len(), y.iter().map(|v| v - mean_offset));
        let weights = chol.solve(&resid);
        Ok(GpState {
            points: points.to_vec(),
            y: y.to_vec(),
            spec: spec.clone(),
            noise_variance,
            alpha,
            mean_offset,
            jitter,
            chol,
            weights,
        })
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn observations(&self) -> &[f64] {
        &self.y
    }

    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    pub fn noise_variance(&self) -> f64 {
        self.noise_variance
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn mean_offset(&self) -> f64 {
        self.mean_offset
    }

    /// Jitter actually added to the diagonal.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.spec.dim()
    }

    /// Lower Cholesky factor of `K + (sigma^2/alpha) I + jitter I`.
    pub fn factor(&self) -> DMatrix<f64> {
        self.chol.l()
    }

    /// Same state with a different tempering level.
    pub fn with_alpha(&self, alpha: f64, jitter: &JitterPolicy) -> Result<Self> {
        GpState::new(&self.points, &self.y, &self.spec, self.noise_variance, alpha, self.mean_offset, jitter)
    }

    /// Condition on one more observation.
    pub fn with_observation(&self, x: &[f64], y: f64, jitter: &JitterPolicy) -> Result<Self> {
        let mut pts = self.points.clone();
        pts.push(x.to_vec());
        let mut ys = self.y.clone();
        ys.push(y);
        GpState::new(&pts, &ys, &self.spec, self.noise_variance, self.alpha, self.mean_offset, jitter)
    }

    fn cross(&self, x: &[f64]) -> Result<DVector<f64>> {
        cross_vector(&self.points, x, &self.spec)
    }

    /// Posterior mean only.
    pub fn predict_mean(&self, x: &[f64]) -> Result<f64> {
        let k = self.cross(x)?;
        Ok(self.mean_offset + k.dot(&self.weights))
    }

    pub fn predict(&self, x: &[f64]) -> Result<Prediction> {
        let k = self.cross(x)?;
        let mean = self.mean_offset + k.dot(&self.weights);
        let v = self
            .chol
            .l_dirty()
            .solve_lower_triangular(&k)
            .expect("Cholesky factor has a nonzero diagonal");
        let raw = self.spec.eval_unchecked(x, x) - v.norm_squared();
        let (variance, clipped) = if raw < 0.0 { (0.0, -raw) } else { (raw, 0.0) };
        Ok(Prediction {
            mean,
            variance,
            clipped,
        })
    }

    /// Posterior cross-covariance `k(x, x2) - k(x)^T Lambda^{-1} k(x2)`.
    pub fn covariance(&self, x: &[f64], x2: &[f64]) -> Result<f64> {
        let k1 = self.cross(x)?;
        let k2 = self.cross(x2)?;
        let l = self.chol.l_dirty();
        let v1 = l.solve_lower_triangular(&k1).expect("nonsingular factor");
        let v2 = l.solve_lower_triangular(&k2).expect("nonsingular factor");
        Ok(self.spec.eval_unchecked(x, x2) - v1.dot(&v2))
    }

    /// Tempered log marginal likelihood of the stored data.
    pub fn log_marginal(&self) -> f64 {
        let resid = DVector::from_iterator(self.y.len(), self.y.iter().map(|v| v - self.mean_offset));
        let n = self.y.len() as f64;
        let log_det: f64 = self.chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>() * 2.0;
        -0.5 * resid.dot(&self.weights) - 0.5 * log_det - 0.5 * n * ln_2pi()
    }
}

/// Log density of `y` under `N(0, K + (sigma^2/alpha) I)`.
pub fn log_marginal_tempered(
    points: &[Vec<f64>],
    y: &[f64],
    spec: &KernelSpec,
    noise_variance: f64,
    alpha: f64,
) -> Result<f64> {
    Ok(tempered_posterior(points, y, spec, noise_variance, alpha, &JitterPolicy::default())?.log_marginal())
}

/// Search box for hyperparameter fitting. A collapsed interval fixes that
/// hyperparameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HyperBounds {
    pub lengthscale: (f64, f64),
    pub signal_variance: (f64, f64),
    pub noise_variance: (f64, f64),
}

impl Default for HyperBounds {
    fn default() -> Self {
        HyperBounds {
            lengthscale: (1e-2, 1e1),
            signal_variance: (1e-2, 1e2),
            noise_variance: (1e-6, 1.0),
        }
    }
}

impl HyperBounds {
    pub fn validate(&self) -> Result<()> {
        for (name, (lo, hi)) in [
            ("lengthscale", self.lengthscale),
            ("signal_variance", self.signal_variance),
            ("noise_variance", self.noise_variance),
        ] {
            if !(lo > 0.0 && hi.is_finite() && lo <= hi) {
                return Err(BoError::usage(format!(
                    "hyperparameter bounds for {name} must satisfy 0 < lo <= hi < inf, got [{lo}, {hi}]"
                )));
            }
        }
        Ok(())
    }

    /// Bounds scaled to data: length-scales relative to the domain widths.
    pub fn for_domain(domain: &Domain) -> Vec<(f64, f64)> {
        (0..domain.dim())
            .map(|j| {
                let w = domain.width(j).max(1e-12);
                (1e-2 * w, 2.0 * w)
            })
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct FitOptions {
    pub restarts: usize,
    pub max_iter: usize,
    /// Optional starting point tried first.
    pub initial: Option<(KernelSpec, f64)>,
    /// Per-dimension length-scale bounds overriding `HyperBounds::lengthscale`.
    pub lengthscale_bounds: Option<Vec<(f64, f64)>>,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            restarts: 3,
            max_iter: 60,
            initial: None,
            lengthscale_bounds: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub spec: KernelSpec,
    pub noise_variance: f64,
    pub log_marginal: f64,
}

/// Negative log marginal likelihood and its gradient in log-parameter space.
/// Layout: `[log l_1..log l_d, log signal_variance, log noise_variance]`.
struct LmlObjective<'a> {
    points: &'a [Vec<f64>],
    y: DVector<f64>,
    family: KernelFamily,
    alpha: f64,
    jitter: JitterPolicy,
}

impl LmlObjective<'_> {
    fn unpack(&self, theta: &[f64]) -> (KernelSpec, f64) {
        let d = theta.len() - 2;
        let spec = KernelSpec {
            family: self.family,
            lengthscales: theta[..d].iter().map(|v| v.exp()).collect(),
            signal_variance: theta[d].exp(),
        };
        (spec, theta[d + 1].exp())
    }

    fn eval(&self, theta: &[f64]) -> Option<(f64, Vec<f64>)> {
        let (spec, noise) = self.unpack(theta);
        let d = spec.dim();
        let n = self.points.len();
        let tau = noise / self.alpha;
        let mut a = DMatrix::zeros(n, n);
        let mut dk: Vec<DMatrix<f64>> = vec![DMatrix::zeros(n, n); d];
        let mut grad_buf = vec![0.0; d];
        for i in 0..n {
            a[(i, i)] = spec.signal_variance;
            for j in 0..i {
                let v = spec.eval_with_lengthscale_grad(&self.points[i], &self.points[j], &mut grad_buf);
                a[(i, j)] = v;
                a[(j, i)] = v;
                for (m, g) in dk.iter_mut().zip(&grad_buf) {
                    m[(i, j)] = *g;
                    m[(j, i)] = *g;
                }
            }
        }
        let kmat = a.clone();
        for i in 0..n {
            a[(i, i)] += tau;
        }
        let (chol, _) = factor_with_jitter(&a, spec.signal_variance, &self.jitter).ok()?;
        let w = chol.solve(&self.y);
        let log_det: f64 = chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>() * 2.0;
        let lml = -0.5 * self.y.dot(&w) - 0.5 * log_det - 0.5 * n as f64 * ln_2pi();
        if !lml.is_finite() {
            return None;
        }
        // W = w w^T - Lambda^{-1}; dLML/dp = 1/2 tr(W dLambda/dp)
        let inv = chol.inverse();
        let mut wm = &w * w.transpose();
        wm -= &inv;
        let half_trace = |m: &DMatrix<f64>| 0.5 * wm.component_mul(m).sum();
        let mut grad: Vec<f64> = dk.iter().map(half_trace).collect();
        grad.push(half_trace(&kmat));
        grad.push(0.5 * wm.trace() * tau);
        Some((-lml, grad.into_iter().map(|g| -g).collect()))
    }
}

fn project(theta: &mut [f64], lo: &[f64], hi: &[f64]) {
    for ((t, l), h) in theta.iter_mut().zip(lo).zip(hi) {
        *t = t.clamp(*l, *h);
    }
}

/// Projected quasi-Newton descent from `start`. Returns the best point seen.
fn local_minimize(
    obj: &LmlObjective<'_>,
    start: &[f64],
    lo: &[f64],
    hi: &[f64],
    max_iter: usize,
) -> Option<(Vec<f64>, f64)> {
    let n = start.len();
    let free: Vec<bool> = lo.iter().zip(hi).map(|(l, h)| h > l).collect();
    let mask = |g: &mut [f64]| {
        for (gi, f) in g.iter_mut().zip(&free) {
            if !f {
                *gi = 0.0;
            }
        }
    };
    let mut x = start.to_vec();
    project(&mut x, lo, hi);
    let (mut fx, mut gx) = obj.eval(&x)?;
    mask(&mut gx);
    let mut h = DMatrix::<f64>::identity(n, n);
    for _ in 0..max_iter {
        // projected gradient norm for convergence
        let pg: f64 = x
            .iter()
            .zip(&gx)
            .zip(lo.iter().zip(hi))
            .map(|((xi, gi), (l, u))| ((xi - gi).clamp(*l, *u) - xi).powi(2))
            .sum::<f64>()
            .sqrt();
        if pg < 1e-6 {
            break;
        }
        let g = DVector::from_column_slice(&gx);
        let mut p: Vec<f64> = (-(&h * &g)).iter().copied().collect();
        mask(&mut p);
        let mut descent: f64 = p.iter().zip(&gx).map(|(a, b)| a * b).sum();
        if descent >= 0.0 {
            h = DMatrix::identity(n, n);
            p = gx.iter().map(|v| -v).collect();
            descent = -gx.iter().map(|v| v * v).sum::<f64>();
        }
        // cap the step at 2 log-units per coordinate
        let pmax = p.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut step = if pmax > 2.0 { 2.0 / pmax } else { 1.0 };
        let mut accepted = None;
        for _ in 0..30 {
            let mut xn: Vec<f64> = x.iter().zip(&p).map(|(a, b)| a + step * b).collect();
            project(&mut xn, lo, hi);
            let dir: f64 = xn.iter().zip(&x).zip(&gx).map(|((a, b), g)| (a - b) * g).sum();
            if dir < 0.0 || descent < 0.0 {
                if let Some((fn_, gn)) = obj.eval(&xn) {
                    if fn_ <= fx + 1e-4 * dir.min(0.0) {
                        accepted = Some((xn, fn_, gn));
                        break;
                    }
                }
            }
            step *= 0.5;
        }
        let Some((xn, fn_, mut gn)) = accepted else { break };
        mask(&mut gn);
        let s = DVector::from_iterator(n, xn.iter().zip(&x).map(|(a, b)| a - b));
        let yv = DVector::from_iterator(n, gn.iter().zip(&gx).map(|(a, b)| a - b));
        let sy = s.dot(&yv);
        let improvement = fx - fn_;
        x = xn;
        fx = fn_;
        gx = gn;
        if sy > 1e-12 {
            let rho = 1.0 / sy;
            let i = DMatrix::<f64>::identity(n, n);
            let left = &i - rho * &s * yv.transpose();
            let right = &i - rho * &yv * s.transpose();
            h = &left * &h * &right + rho * &s * s.transpose();
        }
        if improvement.abs() < 1e-10 * (1.0 + fx.abs()) {
            break;
        }
    }
    Some((x, fx))
}

/// Maximize the tempered log marginal likelihood over log-hyperparameters by
/// multistart projected quasi-Newton search.
pub fn fit_hyperparams<R: Rng + ?Sized>(
    points: &[Vec<f64>],
    y: &[f64],
    family: KernelFamily,
    bounds: &HyperBounds,
    alpha: f64,
    options: &FitOptions,
    rng: &mut R,
) -> Result<FitResult> {
    bounds.validate()?;
    check_alpha(alpha)?;
    if points.is_empty() {
        return Err(BoError::usage("hyperparameter fit needs data"));
    }
    check_dim(points.len(), y.len(), "observation vector")?;
    if options.restarts == 0 {
        return Err(BoError::usage("restarts must be at least 1"));
    }
    let d = points[0].len();
    for p in points {
        check_dim(d, p.len(), "design point")?;
    }
    let ls_bounds = match &options.lengthscale_bounds {
        Some(b) => {
            check_dim(d, b.len(), "length-scale bounds")?;
            for (lo, hi) in b {
                if !(*lo > 0.0 && hi.is_finite() && lo <= hi) {
                    return Err(BoError::usage("length-scale bounds must satisfy 0 < lo <= hi"));
                }
            }
            b.clone()
        }
        None => vec![bounds.lengthscale; d],
    };
    let mut lo: Vec<f64> = ls_bounds.iter().map(|b| b.0.ln()).collect();
    let mut hi: Vec<f64> = ls_bounds.iter().map(|b| b.1.ln()).collect();
    lo.push(bounds.signal_variance.0.ln());
    hi.push(bounds.signal_variance.1.ln());
    lo.push(bounds.noise_variance.0.ln());
    hi.push(bounds.noise_variance.1.ln());

    let obj = LmlObjective {
        points,
        y: DVector::from_column_slice(y),
        family,
        alpha,
        jitter: JitterPolicy::default(),
    };

    let mut starts: Vec<Vec<f64>> = Vec::with_capacity(options.restarts);
    if let Some((spec, noise)) = &options.initial {
        check_dim(d, spec.dim(), "initial kernel")?;
        let mut s: Vec<f64> = spec.lengthscales.iter().map(|v| v.ln()).collect();
        s.push(spec.signal_variance.ln());
        s.push(noise.ln());
        starts.push(s);
    }
    if starts.len() < options.restarts {
        let unit = Domain::new(vec![0.0; d + 2], vec![1.0; d + 2])?;
        for u in halton_screen(&unit, options.restarts - starts.len(), rng)? {
            starts.push(u.iter().enumerate().map(|(j, v)| lo[j] + v * (hi[j] - lo[j])).collect());
        }
    }

    let mut best: Option<(Vec<f64>, f64)> = None;
    for s in &starts {
        if let Some((x, f)) = local_minimize(&obj, s, &lo, &hi, options.max_iter) {
            if best.as_ref().is_none_or(|(_, bf)| f < *bf) {
                best = Some((x, f));
            }
        }
    }
    let (theta, f) = best.ok_or_else(|| BoError::Numerical {
        message: "every hyperparameter restart failed to evaluate".into(),
        max_jitter: JitterPolicy::default().max,
        diag_ratio: f64::NAN,
    })?;
    let (spec, noise_variance) = obj.unpack(&theta);
    Ok(FitResult {
        spec,
        noise_variance,
        log_marginal: -f,
    })
}

/// Maximize the posterior mean over `domain`: a quasi-random screen of
/// `budget` points plus the training inputs, then compass refinement from the
/// five best candidates.
pub fn posterior_mean_max<R: Rng + ?Sized>(
    state: &GpState,
    domain: &Domain,
    budget: usize,
    rng: &mut R,
) -> Result<(Vec<f64>, f64)> {
    domain.validate()?;
    check_dim(state.dim(), domain.dim(), "domain")?;
    if budget == 0 {
        return Err(BoError::usage("search budget must be at least 1"));
    }
    let mut cands = halton_screen(domain, budget, rng)?;
    cands.extend(state.points().iter().filter(|p| domain.contains(p)).cloned());
    let mut scored: Vec<(usize, f64)> = Vec::with_capacity(cands.len());
    for (i, c) in cands.iter().enumerate() {
        scored.push((i, state.predict_mean(c)?));
    }
    refine_top(domain, &cands, scored, budget, |x| state.predict_mean(x).unwrap_or(f64::NEG_INFINITY))
}

/// Sort candidates by score (stable, so earlier entries win ties) and refine
/// the five best with compass search.
pub(crate) fn refine_top(
    domain: &Domain,
    cands: &[Vec<f64>],
    mut scored: Vec<(usize, f64)>,
    budget: usize,
    mut f: impl FnMut(&[f64]) -> f64,
) -> Result<(Vec<f64>, f64)> {
    scored.sort_by(|a, b| b.1.total_cmp(&a.1));
    let settings = LocalSearch::for_screen(budget, domain.dim());
    let mut best: Option<(Vec<f64>, f64)> = None;
    for (i, v) in scored.iter().take(5) {
        let (x, fx) = coordinate_search(domain, &cands[*i], *v, settings, &mut f);
        if best.as_ref().is_none_or(|(_, bf)| fx > *bf) {
            best = Some((x, fx));
        }
    }
    best.ok_or_else(|| BoError::usage("no candidates to search"))
}
