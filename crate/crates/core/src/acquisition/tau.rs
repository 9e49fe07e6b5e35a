//! Standardized improvement integrals.
//!
//! `T_m(v) = int_v^inf u^m phi(u) du` are the upper partial moments of the
//! standard normal and `tau_g(v) = int_v^inf (u - v)^g phi(u) du` is the
//! standardized g-th improvement moment. For integer `g` the binomial
//! expansion `sum_k (-1)^k C(g,k) v^k T_{g-k}(v)` is exact; for real `g` the
//! integral is evaluated by quadrature.

use super::quadrature;
use crate::error::{BoError, Result};
use crate::normal::{pdf, upper_tail};

/// Range searched by [`tau_g_inverse`] and the upper clamp used by g-EI.
pub const V_MAX: f64 = 40.0;

/// Default node count for the real-order quadrature.
pub const DEFAULT_QUADRATURE_NODES: usize = 200;

/// Above this gap the integer series loses too many digits to cancellation
/// (for `g >= 2`) and the quadrature path is used instead.
const SERIES_MAX_V: f64 = 5.0;

/// Upper partial moment `T_m(v)` via the two-step recursion
/// `T_m = v^{m-1} phi(v) + (m-1) T_{m-2}`.
pub fn t_moment(m: u32, v: f64) -> f64 {
    let p = pdf(v);
    let mut prev2 = upper_tail(v); // T_0
    if m == 0 {
        return prev2;
    }
    let mut prev1 = p; // T_1
    let mut vpow = 1.0; // v^{k-1} for k = 2 below
    for k in 2..=m {
        vpow *= v;
        let next = vpow * p + (k - 1) as f64 * prev2;
        prev2 = prev1;
        prev1 = next;
    }
    prev1
}

/// All moments `T_0..=T_m` at once.
fn t_moments(m: u32, v: f64) -> Vec<f64> {
    let p = pdf(v);
    let mut out = Vec::with_capacity(m as usize + 1);
    out.push(upper_tail(v));
    if m >= 1 {
        out.push(p);
    }
    let mut vpow = 1.0;
    for k in 2..=m as usize {
        vpow *= v;
        let next = vpow * p + (k - 1) as f64 * out[k - 2];
        out.push(next);
    }
    out
}

/// Integer-order series `sum_{k=0}^g (-1)^k C(g,k) v^k T_{g-k}(v)`.
pub fn tau_series(v: f64, g: u32) -> f64 {
    let t = t_moments(g, v);
    let mut acc = 0.0;
    let mut binom = 1.0;
    let mut vpow = 1.0;
    for k in 0..=g {
        let term = binom * vpow * t[(g - k) as usize];
        if k % 2 == 0 {
            acc += term;
        } else {
            acc -= term;
        }
        binom = binom * (g - k) as f64 / (k + 1) as f64;
        vpow *= v;
    }
    acc.max(0.0)
}

/// `int_0^inf u^g phi(v + u) du` by tanh-sinh quadrature.
///
/// The range is split at `c = max(0, -v)`, where the Gaussian factor peaks,
/// and truncated where `phi` has decayed below double precision.
pub fn tau_quadrature(v: f64, g: f64, nodes: usize) -> f64 {
    let rule = quadrature::rule(nodes);
    let integrand = |u: f64| {
        let z = v + u;
        let base = if g == 0.0 { 1.0 } else { u.powf(g) };
        base * pdf(z)
    };
    let c = (-v).max(0.0);
    let mut tail = 12.0 + 2.0 * g.sqrt();
    if v > 1.0 {
        tail = tail.min((40.0 + 4.0 * g) / v);
    }
    let mut acc = 0.0;
    if c > 0.0 {
        acc += rule.integrate((c - 12.0).max(0.0), c, integrand);
    }
    acc += rule.integrate(c, c + tail, integrand);
    acc.max(0.0)
}

fn as_integer_order(g: f64) -> Option<u32> {
    if g.fract() == 0.0 && (0.0..=64.0).contains(&g) {
        Some(g as u32)
    } else {
        None
    }
}

/// `tau_g(v)` for any real `g >= 0`.
pub fn tau_g(v: f64, g: f64, nodes: usize) -> f64 {
    debug_assert!(g >= 0.0, "tau_g needs g >= 0");
    if v >= V_MAX + 1.0 {
        // phi(41) underflows; every order is zero in double precision.
        return 0.0;
    }
    match as_integer_order(g) {
        Some(0) => upper_tail(v),
        Some(1) => (pdf(v) - v * upper_tail(v)).max(0.0),
        Some(m) if v <= SERIES_MAX_V => tau_series(v, m),
        _ => tau_quadrature(v, g, nodes),
    }
}

/// `tau_g(0) = 2^{g/2 - 1} Gamma((g+1)/2) / sqrt(pi)`.
pub fn tau_at_zero(g: f64) -> f64 {
    2f64.powf(g / 2.0 - 1.0) * libm::tgamma((g + 1.0) / 2.0) / std::f64::consts::PI.sqrt()
}

/// Inverse of the strictly decreasing map `v -> tau_g(v)` on `[-V_MAX, V_MAX]`.
pub fn tau_g_inverse(y: f64, g: f64, nodes: usize) -> Result<f64> {
    if !(g >= 0.0 && g.is_finite()) {
        return Err(BoError::Domain(format!("order g must be nonnegative, got {g}")));
    }
    let hi_val = tau_g(-V_MAX, g, nodes);
    let lo_val = tau_g(V_MAX, g, nodes);
    if !(y > lo_val && y < hi_val) {
        return Err(BoError::Domain(format!(
            "{y} outside the attainable range ({lo_val}, {hi_val}) of tau_{g}"
        )));
    }
    let (mut lo, mut hi) = (-V_MAX, V_MAX);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let val = tau_g(mid, g, nodes);
        if val == y {
            return Ok(mid);
        }
        // decreasing: a value above y means the root is to the right
        if val > y {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (flo, fhi) = (tau_g(lo, g, nodes), tau_g(hi, g, nodes));
    Ok(if (flo - y).abs() <= (fhi - y).abs() { lo } else { hi })
}
