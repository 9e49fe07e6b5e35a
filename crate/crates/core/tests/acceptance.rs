//! Acceptance gates.
//!
//! Each gate prints a single `[NN] name: PASS|FAIL ...` line to stderr
//! (bypassing the test harness capture) and then asserts. Tolerances are
//! pinned below. Oracle values that are not computed in-process were frozen
//! from 30-digit mpmath quadrature.

use std::io::Write;
use std::sync::OnceLock;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tempered_bo::acquisition::tau::{tau_g, tau_g_inverse, tau_quadrature, tau_series, DEFAULT_QUADRATURE_NODES};
use tempered_bo::acquisition::{ei_closed_form, gei_value, AcqConfig};
use tempered_bo::bo::{run_bo, BoConfig, RunRecord};
use tempered_bo::cli::{paired_comparisons, run_bench, run_toy, toy_best_at, median, BenchRun, ToyArgs, ToyRun, WinCount};
use tempered_bo::config::BenchConfigFile;
use tempered_bo::diagnostics::{bound_constants, info_gain, sgd_equivalence_residual, BoundInputs};
use tempered_bo::gp::{tempered_posterior, GpState, JitterPolicy};
use tempered_bo::kernel::{eval_kernel, kernel_matrix, KernelFamily, KernelSpec};
use tempered_bo::linear::LinearState;
use tempered_bo::normal::{cdf, pdf};
use tempered_bo::objectives::builtin;
use tempered_bo::schedule::{schedule_limit, simulate_stream, BiasMode, ScheduleMode, DEFAULT_ALPHA_FLOOR};

const NODES: usize = DEFAULT_QUADRATURE_NODES;

const TOL_POSTERIOR_REL: f64 = 1e-8;
const TOL_TEMPER_EQUIV_REL: f64 = 1e-10;
const TOL_SERIES_QUAD_REL: f64 = 1e-8;
const TOL_TAU_ZERO: f64 = 1e-10;
const TOL_TAU_DERIV: f64 = 1e-5;
const FD_STEP_TAU: f64 = 1e-5;
const TOL_TAU_ROUNDTRIP: f64 = 1e-9;
const TOL_EI_DERIV: f64 = 1e-5;
const FD_STEP_EI: f64 = 1e-6;
const TOL_SGD: f64 = 1e-10;
const TOL_INFO_GAIN_REL: f64 = 1e-10;
const TOL_CONCAVITY: f64 = 1e-12;
const TOL_DET_GROWTH: f64 = 1e-9;
const TOL_DET_EQUALITY: f64 = 1e-12;
const TOL_VARIANCE_FLOOR: f64 = 1e-9;
const TOL_RIDGE_REL: f64 = 1e-10;
const COVERAGE_DELTA: f64 = 0.1;
const COVERAGE_RUNS: usize = 200;
const VANISHING_MEDIAN_MIN: f64 = 0.95;
const CONSTANT_BIAS_BAND: f64 = 0.05;
const CONSTANT_BIAS_LIMIT: f64 = 0.5;
const SIGN_TEST_LEVEL: f64 = 0.1;
const BENCH_WIN_SHARE: f64 = 0.5;
const TAU_INV_BAND: (f64, f64) = (0.5, 2.0);

/// `tau_g(0) = E[max(Z, 0)^g]` by direct mpmath quadrature.
const TAU_AT_ZERO: [(f64, f64); 6] = [
    (0.0, 0.5),
    (0.5, 0.411_089_479_331_229_3),
    (1.0, 0.398_942_280_401_432_7),
    (1.5, 0.430_019_993_662_259_8),
    (2.0, 0.5),
    (3.0, 0.797_884_560_802_865_4),
];

fn report(id: u32, name: &str, pass: bool, detail: impl AsRef<str>) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let _ = writeln!(std::io::stderr(), "[{id:02}] {name}: {verdict} ({})", detail.as_ref());
}

fn gate(id: u32, name: &str, pass: bool, detail: impl AsRef<str>) {
    report(id, name, pass, &detail);
    assert!(pass, "[{id:02}] {name}: {}", detail.as_ref());
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

const FAMILIES: [KernelFamily; 4] = [
    KernelFamily::SquaredExponential,
    KernelFamily::Matern12,
    KernelFamily::Matern32,
    KernelFamily::Matern52,
];

fn random_spec(rng: &mut ChaCha8Rng, d: usize) -> KernelSpec {
    let family = FAMILIES[rng.random_range(0..FAMILIES.len())];
    let ls = (0..d).map(|_| rng.random_range(0.2..1.5)).collect();
    KernelSpec::new(family, ls, rng.random_range(0.5..2.0)).unwrap()
}

fn random_points(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Vec<Vec<f64>> {
    (0..n).map(|_| (0..d).map(|_| rng.random::<f64>()).collect()).collect()
}

/// Dense-inverse posterior `k^T A^{-1} y`, `k(x,x) - k^T A^{-1} k`, `A = K + (s2/alpha) I`.
fn dense_posterior(pts: &[Vec<f64>], y: &[f64], spec: &KernelSpec, s2: f64, alpha: f64, x: &[f64]) -> (f64, f64) {
    let n = pts.len();
    let mut a = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            a[(i, j)] = eval_kernel(&pts[i], &pts[j], spec).unwrap();
        }
        a[(i, i)] += s2 / alpha;
    }
    let inv = a.try_inverse().unwrap();
    let k = nalgebra::DVector::from_iterator(n, pts.iter().map(|p| eval_kernel(x, p, spec).unwrap()));
    let yv = nalgebra::DVector::from_column_slice(y);
    let mean = k.dot(&(&inv * yv));
    let var = eval_kernel(x, x, spec).unwrap() - k.dot(&(&inv * &k));
    (mean, var)
}

#[test]
fn tempered_posterior_matches_dense_inverse() {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let jitter = JitterPolicy::default();
    let mut worst: f64 = 0.0;
    let mut worst_equiv: f64 = 0.0;
    for inst in 0..50 {
        let d = rng.random_range(1..=5);
        let t = rng.random_range(1..=30);
        let alpha = [0.1, 0.5, 1.0][inst % 3];
        let spec = random_spec(&mut rng, d);
        let s2 = rng.random_range(0.01..0.5);
        let pts = random_points(&mut rng, t, d);
        let y: Vec<f64> = (0..t).map(|_| rng.random_range(-2.0..2.0)).collect();
        let state = tempered_posterior(&pts, &y, &spec, s2, alpha, &jitter).unwrap();
        assert_eq!(state.jitter(), 0.0);
        let standard = tempered_posterior(&pts, &y, &spec, s2 / alpha, 1.0, &jitter).unwrap();
        for x in random_points(&mut rng, 10, d) {
            let p = state.predict(&x).unwrap();
            let (m, v) = dense_posterior(&pts, &y, &spec, s2, alpha, &x);
            worst = worst.max(rel_err(p.mean, m)).max(rel_err(p.variance, v));
            let q = standard.predict(&x).unwrap();
            worst_equiv = worst_equiv.max(rel_err(p.mean, q.mean)).max(rel_err(p.variance, q.variance));
        }
    }
    gate(
        1,
        "tempered posterior vs dense inverse",
        worst <= TOL_POSTERIOR_REL && worst_equiv <= TOL_TEMPER_EQUIV_REL,
        format!("max rel err {worst:.2e} (tol {TOL_POSTERIOR_REL:e}); alpha=1 with noise s2/alpha {worst_equiv:.2e}"),
    );
}

fn lower_bound_d2(g: f64, z: f64) -> f64 {
    let u0 = (-z / 2.0).min(1.0);
    u0.powf(g + 1.0) / (g + 1.0) * pdf(z + u0)
}

#[test]
fn tau_consistency() {
    let mut series_err: f64 = 0.0;
    for g in 0..=5u32 {
        for v in [-5.0, -2.0, -0.5, 0.0, 0.5, 2.0, 5.0] {
            series_err = series_err.max(rel_err(tau_series(v, g), tau_quadrature(v, g as f64, NODES)));
        }
    }
    let mut zero_err: f64 = 0.0;
    for (g, want) in TAU_AT_ZERO {
        zero_err = zero_err.max((tau_g(0.0, g, NODES) - want).abs());
    }
    let mut deriv_err: f64 = 0.0;
    for g in [1.0, 1.5, 2.0, 2.5, 3.0] {
        for v in [-3.0, -1.0, -0.2, 0.0, 0.7, 1.5, 3.0] {
            let fd = (tau_g(v + FD_STEP_TAU, g, NODES) - tau_g(v - FD_STEP_TAU, g, NODES)) / (2.0 * FD_STEP_TAU);
            deriv_err = deriv_err.max((fd + g * tau_g(v, g - 1.0, NODES)).abs());
        }
    }
    let mut decreasing = true;
    for g in [0.0, 0.5, 1.0, 1.5, 2.0, 3.0] {
        let grid: Vec<f64> = (0..=200).map(|i| -10.0 + 0.1 * i as f64).collect();
        decreasing &= grid.windows(2).all(|w| {
            let (a, b) = (tau_g(w[0], g, NODES), tau_g(w[1], g, NODES));
            // tau_0 saturates at 1.0 below v = -8.3; there test its complement.
            b < a || (g == 0.0 && b == a && cdf(w[1]) > cdf(w[0]))
        });
    }
    let mut lower_ok = true;
    for g in [0.0, 0.5, 1.0, 2.0, 3.0] {
        for z in [-0.1, -0.5, -1.0, -2.0, -3.0, -5.0, -8.0] {
            lower_ok &= tau_g(z, g, NODES) >= lower_bound_d2(g, z);
        }
    }
    let mut roundtrip: f64 = 0.0;
    for g in [0.0, 0.5, 1.0, 2.0, 3.0] {
        for v in [-3.0, -1.0, -0.3, 0.0, 0.4, 1.2, 3.0] {
            let back = tau_g_inverse(tau_g(v, g, NODES), g, NODES).unwrap();
            roundtrip = roundtrip.max((back - v).abs());
        }
    }
    let pass = series_err <= TOL_SERIES_QUAD_REL
        && zero_err <= TOL_TAU_ZERO
        && deriv_err <= TOL_TAU_DERIV
        && decreasing
        && lower_ok
        && roundtrip <= TOL_TAU_ROUNDTRIP;
    gate(
        2,
        "tau consistency",
        pass,
        format!(
            "series/quad {series_err:.1e}, tau(0) {zero_err:.1e}, derivative {deriv_err:.1e}, decreasing {decreasing}, lower bound {lower_ok}, inverse {roundtrip:.1e}"
        ),
    );
}

#[test]
fn ei_partial_derivatives() {
    let acq = AcqConfig::new(1.0).unwrap();
    let gei = |a: f64, b: f64, c: f64| gei_value(a, b, c, &acq);
    let mut worst: f64 = 0.0;
    for mu in [-2.0, -0.5, 0.0, 0.3, 1.5] {
        for sd in [0.1, 0.5, 1.0, 2.5] {
            for m in [-1.0, 0.0, 0.8] {
                let z = (mu - m) / sd;
                let forms: [&dyn Fn(f64, f64, f64) -> f64; 2] = [&ei_closed_form, &gei];
                for ei in forms {
                    let dmu = (ei(mu + FD_STEP_EI, sd, m) - ei(mu - FD_STEP_EI, sd, m)) / (2.0 * FD_STEP_EI);
                    let dsd = (ei(mu, sd + FD_STEP_EI, m) - ei(mu, sd - FD_STEP_EI, m)) / (2.0 * FD_STEP_EI);
                    worst = worst.max((dmu - cdf(z)).abs()).max((dsd - pdf(z)).abs());
                }
            }
        }
    }
    gate(
        3,
        "EI partial derivatives",
        worst <= TOL_EI_DERIV,
        format!("max finite-difference gap {worst:.2e} (tol {TOL_EI_DERIV:e})"),
    );
}

#[test]
fn sgd_equivalence() {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let jitter = JitterPolicy::default();
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let d = rng.random_range(1..=4);
        let t = rng.random_range(1..=20);
        let spec = random_spec(&mut rng, d);
        let s2 = rng.random_range(0.05..0.5);
        let alpha = [0.1, 0.5, 1.0][rng.random_range(0..3)];
        let pts = random_points(&mut rng, t, d);
        let y: Vec<f64> = (0..t).map(|_| rng.random_range(-2.0..2.0)).collect();
        let prior = GpState::new(&pts, &y, &spec, s2, alpha, 0.0, &jitter).unwrap();
        let x_new: Vec<f64> = (0..d).map(|_| rng.random()).collect();
        let y_new = rng.random_range(-2.0..2.0);
        let step = rng.random_range(0.05..=1.0);
        let tests = random_points(&mut rng, 10, d);
        worst = worst.max(sgd_equivalence_residual(&prior, &x_new, y_new, step, &tests).unwrap());
    }
    gate(4, "one-step SGD equivalence", worst <= TOL_SGD, format!("max residual {worst:.2e} (tol {TOL_SGD:e})"));
}

#[test]
fn information_gain_shape() {
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let alphas: Vec<f64> = (1..=8).map(|i| i as f64 / 8.0).collect();
    let mut eig_err: f64 = 0.0;
    let mut monotone = true;
    let mut concave = true;
    for _ in 0..20 {
        let d = rng.random_range(1..=4);
        let n = rng.random_range(5..=30);
        let spec = random_spec(&mut rng, d);
        let s2 = rng.random_range(0.05..1.0);
        let k = kernel_matrix(&random_points(&mut rng, n, d), &spec).unwrap();
        let eig = k.clone().symmetric_eigen().eigenvalues;
        let vals: Vec<f64> = alphas
            .iter()
            .map(|&a| {
                let v = info_gain(&k, s2, a).unwrap();
                let want: f64 = 0.5 * eig.iter().map(|l| (1.0 + a * l.max(0.0) / s2).ln()).sum::<f64>();
                eig_err = eig_err.max((v - want).abs() / want.abs().max(1.0));
                v
            })
            .collect();
        monotone &= vals.windows(2).all(|w| w[1] > w[0]);
        concave &= vals.windows(3).all(|w| w[2] - 2.0 * w[1] + w[0] <= TOL_CONCAVITY);
    }
    gate(
        5,
        "information gain",
        eig_err <= TOL_INFO_GAIN_REL && monotone && concave,
        format!("eigen-form rel err {eig_err:.2e}, monotone {monotone}, concave {concave}"),
    );
}

#[test]
fn determinant_growth() {
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..100 {
        let d = rng.random_range(1..=5);
        let t = rng.random_range(1..=100);
        let l = rng.random_range(0.5..3.0);
        let lambda = rng.random_range(0.1..2.0);
        let s2 = rng.random_range(0.1..2.0);
        let alpha = rng.random_range(0.05..=1.0);
        let mut state = LinearState::new(d, lambda, s2, alpha).unwrap();
        for _ in 0..t {
            let dir: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
            let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
            let r = l * rng.random::<f64>();
            let phi: Vec<f64> = dir.iter().map(|v| v / norm * r).collect();
            state.update(&phi, rng.random_range(-1.0..1.0)).unwrap();
            let (lhs, rhs) = state.det_growth_check(l);
            worst = worst.max(lhs - rhs);
        }
    }
    let l: f64 = 1.7;
    let mut one = LinearState::new(1, 1.0, 1.0, 1.0).unwrap();
    one.update(&[l], 0.3).unwrap();
    let (lhs, rhs) = one.det_growth_check(l);
    let eq_gap = (lhs - rhs).abs().max((lhs - (1.0 + l * l).ln()).abs());
    gate(
        6,
        "determinant growth",
        worst <= TOL_DET_GROWTH && eq_gap <= TOL_DET_EQUALITY,
        format!("max lhs-rhs {worst:.2e}, equality case gap {eq_gap:.1e}"),
    );
}

#[test]
fn variance_floor_on_recorded_runs() {
    let objectives = [
        ("branin", None),
        ("camel6", None),
        ("hartmann3", None),
        ("ackley", Some(2)),
        ("levy", Some(2)),
    ];
    let modes = [ScheduleMode::Fixed { alpha: 1.0 }, ScheduleMode::Fixed { alpha: 0.3 }, ScheduleMode::Adaptive];
    let mut worst = f64::NEG_INFINITY;
    let mut steps = 0;
    for (name, dim) in objectives {
        let obj = builtin(name, dim).unwrap().with_noise(0.01).unwrap();
        for (k, mode) in modes.iter().enumerate() {
            let mut cfg = BoConfig {
                schedule: *mode,
                horizon: Some(12),
                acq_budget: 256,
                noise_variance: Some(1e-4),
                seed: 700 + k as u64,
                ..BoConfig::default()
            };
            cfg.signal_variance = 1.0;
            cfg.bounds.signal_variance = (1.0, 1.0);
            let rec = run_bo(&obj, &cfg).unwrap();
            assert!(rec.failed.is_none());
            for s in rec.rows.iter().filter_map(|r| r.step.as_ref()) {
                assert_eq!(s.signal_variance, 1.0);
                let floor = s.noise_variance / (s.alpha * s.n_train as f64 + s.noise_variance);
                worst = worst.max(floor - s.var_at_xplus);
                steps += 1;
            }
        }
    }
    gate(
        7,
        "variance floor at the incumbent",
        worst <= TOL_VARIANCE_FLOOR,
        format!("{steps} steps, max floor excess {worst:.2e} (tol {TOL_VARIANCE_FLOOR:e})"),
    );
}

fn unit_ball(rng: &mut ChaCha8Rng, d: usize, radius: f64) -> Vec<f64> {
    let dir: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
    let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
    let r = radius * rng.random::<f64>().powf(1.0 / d as f64);
    dir.iter().map(|v| v / norm * r).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Fraction of runs in which `|f - mu| <= beta sigma` holds at every step and test point.
fn linear_coverage(alpha: f64, seed: u64) -> f64 {
    let (d, t_max, lambda, s, sd) = (4, 40, 1.0, 1.0, 0.3);
    let mut covered = 0;
    for run in 0..COVERAGE_RUNS {
        let mut rng = ChaCha8Rng::seed_from_u64(seed + run as u64);
        let theta = unit_ball(&mut rng, d, s);
        let tests: Vec<Vec<f64>> = (0..20).map(|_| unit_ball(&mut rng, d, 1.0)).collect();
        let mut state = LinearState::new(d, lambda, sd * sd, alpha).unwrap();
        let mut ok = true;
        for t in 0..=t_max {
            let beta = state.beta_radius(s, COVERAGE_DELTA).unwrap();
            for x in &tests {
                let (m, v) = state.predict(x).unwrap();
                ok &= (dot(x, &theta) - m).abs() <= beta * v.sqrt();
            }
            if t < t_max {
                let phi = unit_ball(&mut rng, d, 1.0);
                let y = dot(&phi, &theta) + sd * rng.sample::<f64, _>(rand_distr::StandardNormal);
                state.update(&phi, y).unwrap();
            }
        }
        covered += ok as usize;
    }
    covered as f64 / COVERAGE_RUNS as f64
}

#[test]
fn linear_surrogate_ridge_and_coverage() {
    let mut rng = ChaCha8Rng::seed_from_u64(808);
    let mut ridge_err: f64 = 0.0;
    for _ in 0..50 {
        let d = rng.random_range(1..=5);
        let t = rng.random_range(1..=30);
        let lambda = rng.random_range(0.1..2.0);
        let s2 = rng.random_range(0.05..1.0);
        let mut state = LinearState::new(d, lambda, s2, 1.0).unwrap();
        let mut x = DMatrix::zeros(t, d);
        let mut y = nalgebra::DVector::zeros(t);
        for i in 0..t {
            let phi: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
            y[i] = rng.random_range(-2.0..2.0);
            for j in 0..d {
                x[(i, j)] = phi[j];
            }
            state.update(&phi, y[i]).unwrap();
        }
        let gram = x.transpose() * &x + DMatrix::identity(d, d) * (lambda * s2);
        let coef = gram.try_inverse().unwrap() * x.transpose() * y;
        for _ in 0..5 {
            let q: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
            let want = dot(&q, coef.as_slice());
            let got = state.predict(&q).unwrap().0;
            ridge_err = ridge_err.max((got - want).abs() / want.abs().max(1.0));
        }
    }
    let cov_full = linear_coverage(1.0, 8_000);
    let cov_tempered = linear_coverage(0.5, 9_000);
    let need = 1.0 - COVERAGE_DELTA;
    gate(
        8,
        "linear surrogate",
        ridge_err <= TOL_RIDGE_REL && cov_full >= need && cov_tempered >= need,
        format!("ridge rel err {ridge_err:.2e}; coverage {cov_full:.3} (alpha=1), {cov_tempered:.3} (alpha=0.5), need {need}"),
    );
}

fn schedule_medians(bias: BiasMode, t_max: usize, base: u64) -> f64 {
    let mut finals: Vec<f64> = (0..20)
        .map(|s| {
            let mut rng = ChaCha8Rng::seed_from_u64(base + s);
            *simulate_stream(bias, 1.0, 0.0, t_max, DEFAULT_ALPHA_FLOOR, &mut rng).unwrap().last().unwrap()
        })
        .collect();
    median(&mut finals)
}

#[test]
fn schedule_vanishing_bias() {
    let med = schedule_medians(BiasMode::Vanishing, 500, 9_100);
    gate(
        9,
        "adaptive schedule, vanishing bias",
        med >= VANISHING_MEDIAN_MIN,
        format!("median alpha at t=500 {med:.4} (need >= {VANISHING_MEDIAN_MIN})"),
    );
}

#[test]
fn schedule_constant_bias() {
    let bias = BiasMode::Constant { b: 3f64.sqrt() };
    let limit = schedule_limit(bias, 1.0, 0.0);
    let med = schedule_medians(bias, 1000, 10_100);
    gate(
        10,
        "adaptive schedule, constant bias",
        (limit - CONSTANT_BIAS_LIMIT).abs() < 1e-12 && (med - CONSTANT_BIAS_LIMIT).abs() <= CONSTANT_BIAS_BAND,
        format!("median alpha at t=1000 {med:.4}, limit {limit} (band +-{CONSTANT_BIAS_BAND})"),
    );
}

fn toy_runs() -> &'static Vec<ToyRun> {
    static RUNS: OnceLock<Vec<ToyRun>> = OnceLock::new();
    RUNS.get_or_init(|| {
        let args = ToyArgs {
            alphas: vec![0.1, 1.0],
            ..ToyArgs::default()
        };
        run_toy(&args).unwrap()
    })
}

const BENCH: &str = r#"
[bench]
objectives = [
  { name = "branin" }, { name = "beale" }, { name = "booth" }, { name = "camel6" },
  { name = "hartmann3" }, { name = "ackley", dim = 2 }, { name = "levy", dim = 2 },
  { name = "rosenbrock", dim = 2 }, { name = "drop_wave" }, { name = "michalewicz", dim = 2 },
  { name = "styblinski_tang", dim = 2 }, { name = "griewank", dim = 2 },
]
g = [0.0, 2.0]
seeds = 5
write_traces = false

[bo]
"#;

fn bench_runs() -> &'static Vec<BenchRun> {
    static RUNS: OnceLock<Vec<BenchRun>> = OnceLock::new();
    RUNS.get_or_init(|| {
        let cfg = BenchConfigFile::parse(BENCH).unwrap();
        run_bench(&cfg, None, true).unwrap()
    })
}

/// `P(Bin(n, 1/2) >= k)`.
fn sign_test_p(k: usize, n: usize) -> f64 {
    let mut p = 0.0;
    let mut c = 1.0f64;
    for i in 0..=n {
        if i > 0 {
            c *= (n - i + 1) as f64 / i as f64;
        }
        if i >= k {
            p += c;
        }
    }
    p / 2f64.powi(n as i32)
}

#[test]
fn toy_tempering_direction() {
    let runs = toy_runs();
    let at = |alpha: f64| -> Vec<(usize, f64)> {
        runs.iter().filter(|r| r.alpha == alpha).map(|r| (r.seed_index, toy_best_at(r, 10))).collect()
    };
    let (low, full) = (at(0.1), at(1.0));
    let med_low = median(&mut low.iter().map(|v| v.1).collect::<Vec<_>>());
    let med_full = median(&mut full.iter().map(|v| v.1).collect::<Vec<_>>());
    let mut w = WinCount::default();
    for (s, a) in &low {
        let b = full.iter().find(|f| f.0 == *s).unwrap().1;
        if a > &b {
            w.wins += 1;
        } else if a < &b {
            w.losses += 1;
        } else {
            w.ties += 1;
        }
    }
    let p = sign_test_p(w.wins, w.decided());
    gate(
        11,
        "toy: tempered PI vs untempered",
        med_low >= med_full && p <= SIGN_TEST_LEVEL,
        format!(
            "median best@10 {med_low:.4} (alpha=0.1) vs {med_full:.4} (alpha=1); wins/losses/ties {}/{}/{}, sign-test p {p:.3} (level {SIGN_TEST_LEVEL})",
            w.wins, w.losses, w.ties
        ),
    );
}

fn pair_counts(runs: &[BenchRun], g: f64) -> WinCount {
    let mut w = WinCount::default();
    for c in paired_comparisons(runs, ScheduleMode::Adaptive, ScheduleMode::Fixed { alpha: 1.0 })
        .iter()
        .filter(|c| c.g == g)
    {
        w.wins += c.pairs.wins;
        w.losses += c.pairs.losses;
        w.ties += c.pairs.ties;
    }
    w
}

#[test]
fn bench_adaptive_vs_untempered() {
    let runs = bench_runs();
    let functions: std::collections::BTreeSet<_> = runs.iter().map(|r| (&r.function, r.dim)).collect();
    let g0 = pair_counts(runs, 0.0);
    let g2 = pair_counts(runs, 2.0);
    let share = g0.wins as f64 / g0.decided().max(1) as f64;
    gate(
        12,
        "bench: adaptive vs alpha=1 at g=0",
        functions.len() >= 10 && share > BENCH_WIN_SHARE,
        format!(
            "{} functions; g=0 wins/losses/ties {}/{}/{} (share {share:.3}, need > {BENCH_WIN_SHARE}); g=2 {}/{}/{}",
            functions.len(),
            g0.wins,
            g0.losses,
            g0.ties,
            g2.wins,
            g2.losses,
            g2.ties
        ),
    );
}

fn accounting_issue(r: &RunRecord) -> Option<String> {
    if r.failed.is_none() && r.rows.len() != r.init_size + r.horizon {
        return Some(format!("{} rows for budget {}", r.rows.len(), r.init_size + r.horizon));
    }
    if r.evaluations != r.rows.len() {
        return Some(format!("{} evaluations vs {} rows", r.evaluations, r.rows.len()));
    }
    let mut best = f64::NEG_INFINITY;
    for (i, row) in r.rows.iter().enumerate() {
        let iteration = if i < r.init_size { 0 } else { i + 1 - r.init_size };
        if row.index != i + 1 || row.iteration != iteration || row.step.is_some() != (row.iteration > 0) {
            return Some(format!("row {i} numbering"));
        }
        let next = best.max(row.y);
        if row.best_observed != next || row.best_observed < best {
            return Some(format!("row {i} incumbent {} vs running max {next}", row.best_observed));
        }
        best = next;
    }
    None
}

#[test]
fn incumbent_and_budget_accounting() {
    let records: Vec<&RunRecord> = toy_runs()
        .iter()
        .map(|r| &r.record)
        .chain(bench_runs().iter().filter_map(|r| r.result.as_ref().ok()))
        .collect();
    let errors = bench_runs().iter().filter(|r| r.result.is_err()).count();
    let issues: Vec<String> = records.iter().filter_map(|r| accounting_issue(r)).collect();
    gate(
        13,
        "incumbent monotonicity and budget",
        issues.is_empty() && errors == 0,
        format!("{} runs checked, {} issues, {errors} errored{}", records.len(), issues.len(), issues.first().map(|s| format!(": {s}")).unwrap_or_default()),
    );
}

#[test]
fn bound_shape() {
    let alphas: Vec<f64> = (1..=10).map(|i| i as f64 / 10.0).collect();
    let ratios: Vec<f64> = alphas
        .iter()
        .map(|&a| {
            let c = bound_constants(&BoundInputs::new(1000, a, 1.0, 150.0)).unwrap();
            c.beta / a.sqrt()
        })
        .collect();
    let nondecreasing = ratios.windows(2).all(|w| w[1] >= w[0]);
    let t = 1_000_000usize;
    let mut band = Vec::new();
    for g in [1.0, 2.0] {
        let c = bound_constants(&BoundInputs::new(t, 1.0, g, 150.0)).unwrap();
        band.push(c.tau_inverse_term / (g * (t as f64).ln()).sqrt());
    }
    let in_band = band.iter().all(|r| (TAU_INV_BAND.0..=TAU_INV_BAND.1).contains(r));
    gate(
        14,
        "bound shape",
        nondecreasing && in_band,
        format!(
            "beta/sqrt(alpha) from {:.3} to {:.3}, nondecreasing {nondecreasing}; tau-inverse / sqrt(g log T) at T=1e6: {:.3} (g=1), {:.3} (g=2), band {:?}",
            ratios[0], ratios[9], band[0], band[1], TAU_INV_BAND
        ),
    );
}
