//! Tanh-sinh (double exponential) quadrature on finite intervals.
//!
//! The rule tolerates integrable endpoint singularities such as `u^g` with
//! non-integer `g` at `u = 0`, which is the case that matters for `tau_g`.

use std::cell::RefCell;
use std::f64::consts::FRAC_PI_2;
use std::rc::Rc;

const T_MAX: f64 = 4.0;

#[derive(Debug)]
pub(crate) struct TanhSinh {
    /// Distance of each node from the left end of [-1, 1], in (0, 2).
    left: Vec<f64>,
    /// Distance of each node from the right end of [-1, 1], in (0, 2).
    right: Vec<f64>,
    weights: Vec<f64>,
}

impl TanhSinh {
    pub(crate) fn new(nodes: usize) -> Self {
        let n = nodes.max(3);
        let h = 2.0 * T_MAX / (n - 1) as f64;
        let mut left = Vec::with_capacity(n);
        let mut right = Vec::with_capacity(n);
        let mut weights = Vec::with_capacity(n);
        for k in 0..n {
            let t = -T_MAX + k as f64 * h;
            let s = FRAC_PI_2 * t.sinh();
            // 1 + tanh(s) and 1 - tanh(s) without cancellation
            left.push(2.0 / (1.0 + (-2.0 * s).exp()));
            right.push(2.0 / (1.0 + (2.0 * s).exp()));
            let ch = s.cosh();
            weights.push(h * FRAC_PI_2 * t.cosh() / (ch * ch));
        }
        TanhSinh {
            left,
            right,
            weights,
        }
    }

    /// Approximate `int_a^b f(u) du`. `f` is never evaluated at the endpoints.
    pub(crate) fn integrate(&self, a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        let half = 0.5 * (b - a);
        let mut acc = 0.0;
        for ((l, r), w) in self.left.iter().zip(&self.right).zip(&self.weights) {
            let u = if l <= r { a + half * l } else { b - half * r };
            acc += w * f(u);
        }
        acc * half
    }
}

thread_local! {
    static CACHE: RefCell<Option<(usize, Rc<TanhSinh>)>> = const { RefCell::new(None) };
}

/// Rule with `nodes` points, cached per thread.
pub(crate) fn rule(nodes: usize) -> Rc<TanhSinh> {
    CACHE.with(|c| {
        let mut slot = c.borrow_mut();
        match slot.as_ref() {
            Some((n, r)) if *n == nodes => r.clone(),
            _ => {
                let r = Rc::new(TanhSinh::new(nodes));
                *slot = Some((nodes, r.clone()));
                r
            }
        }
    })
}
