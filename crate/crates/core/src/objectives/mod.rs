//! Objective functions, all in maximization form.
//!
//! Built-in benchmarks that are usually minimized are negated at
//! registration, so a best value of `-0.3979` for `branin` corresponds to the
//! familiar minimum `0.3979`.

pub mod functions;
pub mod tabular;

use std::collections::HashMap;
use std::fmt;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::design::{coordinate_search, halton_screen, Domain, LocalSearch};
use crate::error::{BoError, Result};

pub use tabular::{load_table, tabular_objective, Table};

/// Location of the noiseless maximum.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrueBest {
    pub value: f64,
    pub location: Option<Vec<f64>>,
    /// Set when the value comes from a numerical search or a rounded
    /// literature figure rather than an analytic argmax.
    pub estimated: bool,
}

type EvalFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

#[derive(Clone)]
pub struct Objective {
    name: String,
    domain: Domain,
    noise_sd: f64,
    true_best: Option<TrueBest>,
    eval: EvalFn,
}

impl fmt::Debug for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Objective")
            .field("name", &self.name)
            .field("domain", &self.domain)
            .field("noise_sd", &self.noise_sd)
            .field("true_best", &self.true_best)
            .finish()
    }
}

impl Objective {
    pub fn new(
        name: impl Into<String>,
        domain: Domain,
        noise_sd: f64,
        true_best: Option<TrueBest>,
        eval: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        domain.validate()?;
        if !(noise_sd >= 0.0 && noise_sd.is_finite()) {
            return Err(BoError::usage(format!("noise sd must be nonnegative, got {noise_sd}")));
        }
        Ok(Objective {
            name: name.into(),
            domain,
            noise_sd,
            true_best,
            eval: Arc::new(eval),
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn noise_sd(&self) -> f64 {
        self.noise_sd
    }

    pub fn true_best(&self) -> Option<&TrueBest> {
        self.true_best.as_ref()
    }

    pub fn with_noise(mut self, noise_sd: f64) -> Result<Self> {
        if !(noise_sd >= 0.0 && noise_sd.is_finite()) {
            return Err(BoError::usage(format!("noise sd must be nonnegative, got {noise_sd}")));
        }
        self.noise_sd = noise_sd;
        Ok(self)
    }

    /// Noiseless value.
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        if !self.domain.contains(x) {
            return Err(BoError::usage(format!("point {x:?} lies outside the domain of {}", self.name)));
        }
        Ok((self.eval)(x))
    }

    /// Largest value over `samples` seeded uniform draws, used to check a
    /// stored optimum.
    fn sampled_max(&self, samples: usize, seed: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = self.dim();
        (0..samples)
            .map(|_| {
                let u: Vec<f64> = (0..d).map(|_| rng.random()).collect();
                (self.eval)(&self.domain.from_unit(&u))
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// `f(x) + noise_sd * N(0, 1)`, drawing from `rng`.
pub fn evaluate_noisy<R: Rng + ?Sized>(obj: &Objective, x: &[f64], rng: &mut R) -> Result<f64> {
    let f = obj.eval(x)?;
    if obj.noise_sd == 0.0 {
        return Ok(f);
    }
    let z: f64 = StandardNormal.sample(rng);
    Ok(f + obj.noise_sd * z)
}

/// Value and location of the toy maximum, from a 1e6-point grid refined by
/// golden-section search. The twin maximizer sits at `1 - x`.
pub const TOY_MAX: (f64, f64) = (0.929_365_921_542_639_8, 0.403_230_920_519_793_1);

#[derive(Clone, Copy)]
enum Dims {
    Fixed(usize),
    AtLeast(usize),
    MultipleOf(usize),
}

#[derive(Clone, Copy)]
enum Optimum {
    /// Analytic minimizer of the raw formula.
    At(fn(usize) -> Vec<f64>),
    /// Literature minimizer known to a few digits; polished by compass search.
    Near(fn(usize) -> Vec<f64>),
    /// Rounded literature value of the raw minimum, by dimension.
    Literature(fn(usize) -> Option<f64>),
    /// No closed form; searched numerically on first use.
    Search,
}

#[derive(Clone, Copy)]
struct Entry {
    name: &'static str,
    dims: Dims,
    default_dim: usize,
    /// Bounds of each axis.
    bounds: fn(usize) -> (f64, f64),
    /// Per-axis bounds for non-cubic domains.
    box_bounds: Option<fn() -> (Vec<f64>, Vec<f64>)>,
    f: fn(&[f64]) -> f64,
    optimum: Optimum,
    /// `false` only for the toy, which is already a maximization problem.
    negate: bool,
}

fn zeros(d: usize) -> Vec<f64> {
    vec![0.0; d]
}

fn ones(d: usize) -> Vec<f64> {
    vec![1.0; d]
}

macro_rules! entry {
    ($name:expr, $dims:expr, $dd:expr, ($lo:expr, $hi:expr), $f:expr, $opt:expr) => {
        Entry {
            name: $name,
            dims: $dims,
            default_dim: $dd,
            bounds: |_| ($lo, $hi),
            box_bounds: None,
            f: $f,
            optimum: $opt,
            negate: true,
        }
    };
}

fn registry() -> &'static [Entry] {
    use functions as f;
    static REG: OnceLock<Vec<Entry>> = OnceLock::new();
    REG.get_or_init(|| {
        vec![
            entry!("ackley", Dims::AtLeast(1), 5, (-32.768, 32.768), f::ackley, Optimum::At(zeros)),
            entry!("alpine1", Dims::AtLeast(1), 5, (-10.0, 10.0), f::alpine1, Optimum::At(zeros)),
            Entry {
                name: "branin",
                dims: Dims::Fixed(2),
                default_dim: 2,
                bounds: |_| (0.0, 0.0),
                box_bounds: Some(|| (vec![-5.0, 0.0], vec![10.0, 15.0])),
                f: f::branin,
                optimum: Optimum::At(|_| vec![PI, 2.275]),
                negate: true,
            },
            entry!("beale", Dims::Fixed(2), 2, (-4.5, 4.5), f::beale, Optimum::At(|_| vec![3.0, 0.5])),
            entry!("booth", Dims::Fixed(2), 2, (-10.0, 10.0), f::booth, Optimum::At(|_| vec![1.0, 3.0])),
            Entry {
                name: "camel6",
                dims: Dims::Fixed(2),
                default_dim: 2,
                bounds: |_| (0.0, 0.0),
                box_bounds: Some(|| (vec![-3.0, -2.0], vec![3.0, 2.0])),
                f: f::camel6,
                optimum: Optimum::Near(|_| vec![0.089_842_013_1, -0.712_656_403_0]),
                negate: true,
            },
            entry!("dixon_price", Dims::AtLeast(1), 5, (-10.0, 10.0), f::dixon_price, Optimum::At(f::dixon_price_argmin)),
            entry!("drop_wave", Dims::Fixed(2), 2, (-5.12, 5.12), f::drop_wave, Optimum::At(zeros)),
            entry!("easom", Dims::Fixed(2), 2, (-100.0, 100.0), f::easom, Optimum::At(|_| vec![PI, PI])),
            entry!("goldstein_price", Dims::Fixed(2), 2, (-2.0, 2.0), f::goldstein_price, Optimum::At(|_| vec![0.0, -1.0])),
            entry!("griewank", Dims::AtLeast(1), 5, (-600.0, 600.0), f::griewank, Optimum::At(zeros)),
            entry!(
                "hartmann3",
                Dims::Fixed(3),
                3,
                (0.0, 1.0),
                f::hartmann3,
                Optimum::Near(|_| vec![0.114_614, 0.555_649, 0.852_547])
            ),
            entry!("hartmann4", Dims::Fixed(4), 4, (0.0, 1.0), f::hartmann4, Optimum::Search),
            entry!(
                "hartmann6",
                Dims::Fixed(6),
                6,
                (0.0, 1.0),
                f::hartmann6,
                Optimum::Near(|_| vec![0.20169, 0.150011, 0.476874, 0.275332, 0.311652, 0.6573])
            ),
            entry!("levy", Dims::AtLeast(1), 5, (-10.0, 10.0), f::levy, Optimum::At(ones)),
            entry!("matyas", Dims::Fixed(2), 2, (-10.0, 10.0), f::matyas, Optimum::At(zeros)),
            entry!(
                "michalewicz",
                Dims::AtLeast(1),
                5,
                (0.0, PI),
                f::michalewicz,
                Optimum::Literature(|d| match d {
                    2 => Some(-1.801_303_410_098_553_7),
                    5 => Some(-4.687_658),
                    10 => Some(-9.660_15),
                    _ => None,
                })
            ),
            entry!("powell", Dims::MultipleOf(4), 4, (-4.0, 5.0), f::powell, Optimum::At(zeros)),
            entry!("rastrigin", Dims::AtLeast(1), 5, (-5.12, 5.12), f::rastrigin, Optimum::At(zeros)),
            entry!("rosenbrock", Dims::AtLeast(2), 5, (-5.0, 10.0), f::rosenbrock, Optimum::At(ones)),
            entry!("schwefel", Dims::AtLeast(1), 5, (-500.0, 500.0), f::schwefel, Optimum::Near(|d| vec![420.968_746; d])),
            entry!("sphere", Dims::AtLeast(1), 5, (-5.12, 5.12), f::sphere, Optimum::At(zeros)),
            entry!(
                "styblinski_tang",
                Dims::AtLeast(1),
                5,
                (-5.0, 5.0),
                f::styblinski_tang,
                Optimum::At(|d| vec![-2.903_534_027_771_178; d])
            ),
            entry!("sum_squares", Dims::AtLeast(1), 5, (-10.0, 10.0), f::sum_squares, Optimum::At(zeros)),
            entry!("three_hump_camel", Dims::Fixed(2), 2, (-5.0, 5.0), f::three_hump_camel, Optimum::At(zeros)),
            Entry {
                name: "trid",
                dims: Dims::AtLeast(2),
                default_dim: 5,
                bounds: |d| {
                    let s = (d * d) as f64;
                    (-s, s)
                },
                box_bounds: None,
                f: f::trid,
                optimum: Optimum::At(f::trid_argmin),
                negate: true,
            },
            entry!("zakharov", Dims::AtLeast(1), 5, (-5.0, 10.0), f::zakharov, Optimum::At(zeros)),
            Entry {
                name: "toy",
                dims: Dims::Fixed(1),
                default_dim: 1,
                bounds: |_| (0.0, 1.0),
                box_bounds: None,
                f: f::toy,
                optimum: Optimum::At(|_| vec![TOY_MAX.1]),
                negate: false,
            },
        ]
    })
}

/// Registry listing row.
#[derive(Debug, Clone, Serialize)]
pub struct BenchmarkInfo {
    pub name: &'static str,
    pub default_dim: usize,
    /// `None` for families that scale with dimension.
    pub fixed_dim: Option<usize>,
}

pub fn list_builtins() -> Vec<BenchmarkInfo> {
    registry()
        .iter()
        .map(|e| BenchmarkInfo {
            name: e.name,
            default_dim: e.default_dim,
            fixed_dim: match e.dims {
                Dims::Fixed(d) => Some(d),
                _ => None,
            },
        })
        .collect()
}

pub fn default_dim(name: &str) -> Option<usize> {
    registry().iter().find(|e| e.name == name).map(|e| e.default_dim)
}

fn oracle_cache() -> &'static Mutex<HashMap<(String, usize), TrueBest>> {
    static CACHE: OnceLock<Mutex<HashMap<(String, usize), TrueBest>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Multistart maximization of a noiseless objective: 4096-point Halton screen
/// and compass refinement from the 20 best points. Deterministic.
pub fn search_maximum(domain: &Domain, f: &(dyn Fn(&[f64]) -> f64 + Sync)) -> Result<TrueBest> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let cands = halton_screen(domain, 4096, &mut rng)?;
    let mut scored: Vec<(usize, f64)> = cands.iter().enumerate().map(|(i, c)| (i, f(c))).collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1));
    let settings = LocalSearch {
        initial_step: 0.02,
        min_step: 1e-12,
        max_evals: 20_000,
    };
    let mut best: Option<(Vec<f64>, f64)> = None;
    for (i, v) in scored.iter().take(20) {
        let (x, fx) = coordinate_search(domain, &cands[*i], *v, settings, f);
        if best.as_ref().is_none_or(|(_, b)| fx > *b) {
            best = Some((x, fx));
        }
    }
    let (x, value) = best.expect("screen is nonempty");
    Ok(TrueBest {
        value,
        location: Some(x),
        estimated: true,
    })
}

/// Look up a built-in benchmark. `dim = None` selects the family default.
pub fn builtin(name: &str, dim: Option<usize>) -> Result<Objective> {
    let e = *registry()
        .iter()
        .find(|e| e.name == name)
        .ok_or_else(|| BoError::usage(format!("unknown objective `{name}`")))?;
    let d = dim.unwrap_or(e.default_dim);
    let ok = match e.dims {
        Dims::Fixed(k) => d == k,
        Dims::AtLeast(k) => d >= k,
        Dims::MultipleOf(k) => d >= k && d.is_multiple_of(k),
    };
    if !ok {
        return Err(BoError::usage(format!("objective `{name}` does not support dimension {d}")));
    }
    let domain = match e.box_bounds {
        Some(b) => {
            let (lo, hi) = b();
            Domain::new(lo, hi)?
        }
        None => {
            let (lo, hi) = (e.bounds)(d);
            Domain::cube(d, lo, hi)?
        }
    };
    let raw = e.f;
    let sign = if e.negate { -1.0 } else { 1.0 };
    let f = move |x: &[f64]| sign * raw(x);
    let true_best = match e.optimum {
        Optimum::At(loc) => {
            let x = loc(d);
            Some(TrueBest {
                value: f(&x),
                location: Some(x),
                estimated: false,
            })
        }
        Optimum::Near(loc) => {
            let x0 = loc(d);
            let settings = LocalSearch {
                initial_step: 1e-5,
                min_step: 1e-13,
                max_evals: 20_000,
            };
            let (x, value) = coordinate_search(&domain, &x0, f(&x0), settings, f);
            Some(TrueBest {
                value,
                location: Some(x),
                estimated: true,
            })
        }
        Optimum::Literature(v) => match v(d) {
            Some(v) => Some(TrueBest {
                value: sign * v,
                location: None,
                estimated: true,
            }),
            None => Some(cached_search(name, d, &domain, &f)?),
        },
        Optimum::Search => Some(cached_search(name, d, &domain, &f)?),
    };
    let obj = Objective::new(name, domain, 0.0, true_best, f)?;
    check_registration(&obj)?;
    Ok(obj)
}

fn cached_search(name: &str, d: usize, domain: &Domain, f: &(dyn Fn(&[f64]) -> f64 + Sync)) -> Result<TrueBest> {
    let key = (name.to_string(), d);
    if let Some(tb) = oracle_cache().lock().expect("oracle cache poisoned").get(&key) {
        return Ok(tb.clone());
    }
    let tb = search_maximum(domain, f)?;
    oracle_cache().lock().expect("oracle cache poisoned").insert(key, tb.clone());
    Ok(tb)
}

/// No sampled point may beat the stored optimum by more than 1e-6.
fn check_registration(obj: &Objective) -> Result<()> {
    if let Some(tb) = &obj.true_best {
        let m = obj.sampled_max(2000, 17);
        if m > tb.value + 1e-6 {
            return Err(BoError::Numerical {
                message: format!(
                    "stored optimum {} of `{}` is beaten by a sampled value {m}",
                    tb.value, obj.name
                ),
                max_jitter: 0.0,
                diag_ratio: f64::NAN,
            });
        }
    }
    Ok(())
}

/// The one-dimensional toy objective on `[0, 1]` with the given noise level.
pub fn toy_objective(noise_sd: f64) -> Result<Objective> {
    builtin("toy", Some(1))?.with_noise(noise_sd)
}
