//! Benchmark formulas in their usual minimization form.

use std::f64::consts::{E, PI, TAU};

pub fn toy(x: &[f64]) -> f64 {
    let a = (4.0 * x[0] - 2.0).abs();
    -2.0 * (8.0 * a).cos() / (a * a + 2.0)
}

pub fn ackley(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let sq: f64 = x.iter().map(|v| v * v).sum();
    let cs: f64 = x.iter().map(|v| (TAU * v).cos()).sum();
    -20.0 * (-0.2 * (sq / n).sqrt()).exp() - (cs / n).exp() + 20.0 + E
}

pub fn alpine1(x: &[f64]) -> f64 {
    x.iter().map(|v| (v * v.sin() + 0.1 * v).abs()).sum()
}

pub fn branin(x: &[f64]) -> f64 {
    let (x1, x2) = (x[0], x[1]);
    let b = 5.1 / (4.0 * PI * PI);
    let c = 5.0 / PI;
    let t = 1.0 / (8.0 * PI);
    (x2 - b * x1 * x1 + c * x1 - 6.0).powi(2) + 10.0 * (1.0 - t) * x1.cos() + 10.0
}

pub fn beale(x: &[f64]) -> f64 {
    let (a, b) = (x[0], x[1]);
    (1.5 - a + a * b).powi(2) + (2.25 - a + a * b * b).powi(2) + (2.625 - a + a * b.powi(3)).powi(2)
}

pub fn booth(x: &[f64]) -> f64 {
    (x[0] + 2.0 * x[1] - 7.0).powi(2) + (2.0 * x[0] + x[1] - 5.0).powi(2)
}

pub fn camel6(x: &[f64]) -> f64 {
    let (a, b) = (x[0], x[1]);
    (4.0 - 2.1 * a * a + a.powi(4) / 3.0) * a * a + a * b + (-4.0 + 4.0 * b * b) * b * b
}

pub fn dixon_price(x: &[f64]) -> f64 {
    let head = (x[0] - 1.0).powi(2);
    head + x
        .windows(2)
        .enumerate()
        .map(|(i, w)| (i + 2) as f64 * (2.0 * w[1] * w[1] - w[0]).powi(2))
        .sum::<f64>()
}

pub fn dixon_price_argmin(d: usize) -> Vec<f64> {
    (1..=d)
        .map(|i| {
            let p = 2f64.powi(i as i32);
            2f64.powf(-(p - 2.0) / p)
        })
        .collect()
}

pub fn drop_wave(x: &[f64]) -> f64 {
    let r2 = x[0] * x[0] + x[1] * x[1];
    -(1.0 + (12.0 * r2.sqrt()).cos()) / (0.5 * r2 + 2.0)
}

pub fn griewank(x: &[f64]) -> f64 {
    let s: f64 = x.iter().map(|v| v * v).sum::<f64>() / 4000.0;
    let p: f64 = x
        .iter()
        .enumerate()
        .map(|(i, v)| (v / ((i + 1) as f64).sqrt()).cos())
        .product();
    s - p + 1.0
}

const HART_ALPHA: [f64; 4] = [1.0, 1.2, 3.0, 3.2];
const HART3_A: [[f64; 3]; 4] = [[3.0, 10.0, 30.0], [0.1, 10.0, 35.0], [3.0, 10.0, 30.0], [0.1, 10.0, 35.0]];
const HART3_P: [[f64; 3]; 4] = [
    [0.3689, 0.1170, 0.2673],
    [0.4699, 0.4387, 0.7470],
    [0.1091, 0.8732, 0.5547],
    [0.0381, 0.5743, 0.8828],
];
const HART6_A: [[f64; 6]; 4] = [
    [10.0, 3.0, 17.0, 3.5, 1.7, 8.0],
    [0.05, 10.0, 17.0, 0.1, 8.0, 14.0],
    [3.0, 3.5, 1.7, 10.0, 17.0, 8.0],
    [17.0, 8.0, 0.05, 10.0, 0.1, 14.0],
];
const HART6_P: [[f64; 6]; 4] = [
    [0.1312, 0.1696, 0.5569, 0.0124, 0.8283, 0.5886],
    [0.2329, 0.4135, 0.8307, 0.3736, 0.1004, 0.9991],
    [0.2348, 0.1451, 0.3522, 0.2883, 0.3047, 0.6650],
    [0.4047, 0.8828, 0.8732, 0.5743, 0.1091, 0.0381],
];

fn hartmann_sum<const N: usize>(x: &[f64], a: &[[f64; N]; 4], p: &[[f64; N]; 4], dims: usize) -> f64 {
    (0..4)
        .map(|i| {
            let inner: f64 = (0..dims).map(|j| a[i][j] * (x[j] - p[i][j]).powi(2)).sum();
            HART_ALPHA[i] * (-inner).exp()
        })
        .sum()
}

pub fn hartmann3(x: &[f64]) -> f64 {
    -hartmann_sum(x, &HART3_A, &HART3_P, 3)
}

pub fn hartmann4(x: &[f64]) -> f64 {
    (1.1 - hartmann_sum(x, &HART6_A, &HART6_P, 4)) / 0.839
}

pub fn hartmann6(x: &[f64]) -> f64 {
    -hartmann_sum(x, &HART6_A, &HART6_P, 6)
}

pub fn levy(x: &[f64]) -> f64 {
    let w: Vec<f64> = x.iter().map(|v| 1.0 + (v - 1.0) / 4.0).collect();
    let d = w.len();
    let head = (PI * w[0]).sin().powi(2);
    let mid: f64 = w[..d - 1]
        .iter()
        .map(|wi| (wi - 1.0).powi(2) * (1.0 + 10.0 * (PI * wi + 1.0).sin().powi(2)))
        .sum();
    let last = (w[d - 1] - 1.0).powi(2) * (1.0 + (TAU * w[d - 1]).sin().powi(2));
    head + mid + last
}

pub fn michalewicz(x: &[f64]) -> f64 {
    -x.iter()
        .enumerate()
        .map(|(i, v)| v.sin() * ((i + 1) as f64 * v * v / PI).sin().powi(20))
        .sum::<f64>()
}

pub fn rastrigin(x: &[f64]) -> f64 {
    10.0 * x.len() as f64 + x.iter().map(|v| v * v - 10.0 * (TAU * v).cos()).sum::<f64>()
}

pub fn rosenbrock(x: &[f64]) -> f64 {
    x.windows(2)
        .map(|w| 100.0 * (w[1] - w[0] * w[0]).powi(2) + (w[0] - 1.0).powi(2))
        .sum()
}

pub fn schwefel(x: &[f64]) -> f64 {
    418.9829 * x.len() as f64 - x.iter().map(|v| v * v.abs().sqrt().sin()).sum::<f64>()
}

pub fn sphere(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

pub fn styblinski_tang(x: &[f64]) -> f64 {
    0.5 * x.iter().map(|v| v.powi(4) - 16.0 * v * v + 5.0 * v).sum::<f64>()
}

pub fn sum_squares(x: &[f64]) -> f64 {
    x.iter().enumerate().map(|(i, v)| (i + 1) as f64 * v * v).sum()
}

pub fn zakharov(x: &[f64]) -> f64 {
    let s1: f64 = x.iter().map(|v| v * v).sum();
    let s2: f64 = x.iter().enumerate().map(|(i, v)| 0.5 * (i + 1) as f64 * v).sum();
    s1 + s2 * s2 + s2.powi(4)
}

pub fn goldstein_price(x: &[f64]) -> f64 {
    let (a, b) = (x[0], x[1]);
    let t1 = 1.0 + (a + b + 1.0).powi(2) * (19.0 - 14.0 * a + 3.0 * a * a - 14.0 * b + 6.0 * a * b + 3.0 * b * b);
    let t2 = 30.0
        + (2.0 * a - 3.0 * b).powi(2) * (18.0 - 32.0 * a + 12.0 * a * a + 48.0 * b - 36.0 * a * b + 27.0 * b * b);
    t1 * t2
}

pub fn matyas(x: &[f64]) -> f64 {
    0.26 * (x[0] * x[0] + x[1] * x[1]) - 0.48 * x[0] * x[1]
}

pub fn three_hump_camel(x: &[f64]) -> f64 {
    let (a, b) = (x[0], x[1]);
    2.0 * a * a - 1.05 * a.powi(4) + a.powi(6) / 6.0 + a * b + b * b
}

pub fn easom(x: &[f64]) -> f64 {
    -x[0].cos() * x[1].cos() * (-(x[0] - PI).powi(2) - (x[1] - PI).powi(2)).exp()
}

pub fn powell(x: &[f64]) -> f64 {
    x.chunks(4)
        .map(|c| {
            (c[0] + 10.0 * c[1]).powi(2)
                + 5.0 * (c[2] - c[3]).powi(2)
                + (c[1] - 2.0 * c[2]).powi(4)
                + 10.0 * (c[0] - c[3]).powi(4)
        })
        .sum()
}

pub fn trid(x: &[f64]) -> f64 {
    let a: f64 = x.iter().map(|v| (v - 1.0).powi(2)).sum();
    let b: f64 = x.windows(2).map(|w| w[0] * w[1]).sum();
    a - b
}

pub fn trid_argmin(d: usize) -> Vec<f64> {
    (1..=d).map(|i| (i * (d + 1 - i)) as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_minima() {
        assert!(sphere(&[0.0; 5]).abs() < 1e-15);
        assert!(ackley(&[0.0; 10]).abs() < 1e-14);
        assert!((branin(&[PI, 2.275]) - 0.397_887_357_729_738_16).abs() < 1e-14);
        assert!(beale(&[3.0, 0.5]).abs() < 1e-15);
        assert!(booth(&[1.0, 3.0]).abs() < 1e-15);
        assert!(dixon_price(&dixon_price_argmin(6)).abs() < 1e-12);
        assert!((drop_wave(&[0.0, 0.0]) + 1.0).abs() < 1e-15);
        assert!(levy(&[1.0; 4]).abs() < 1e-15);
        assert!(rosenbrock(&[1.0; 5]).abs() < 1e-15);
        assert!((goldstein_price(&[0.0, -1.0]) - 3.0).abs() < 1e-12);
        assert!((easom(&[PI, PI]) + 1.0).abs() < 1e-15);
        assert!((trid(&trid_argmin(5)) + 30.0).abs() < 1e-12);
        assert!((camel6(&[0.089_842_013_1, -0.712_656_403_0]) + 1.031_628_453_489_877).abs() < 1e-9);
        assert!((hartmann3(&[0.114_614, 0.555_649, 0.852_547]) + 3.862_78).abs() < 1e-5);
        assert!((hartmann6(&[0.20169, 0.150011, 0.476874, 0.275332, 0.311652, 0.6573]) + 3.322_37).abs() < 1e-5);
        assert!((styblinski_tang(&[-2.903_534_027_771_178; 2]) + 2.0 * 39.166_165_703_771_42).abs() < 1e-9);
        assert!((michalewicz(&[2.202_905_5, std::f64::consts::FRAC_PI_2]) + 1.801_303_4).abs() < 1e-6);
    }

    #[test]
    fn toy_values() {
        assert_eq!(toy(&[0.5]), -1.0);
        assert!((toy(&[0.0]) - toy(&[1.0])).abs() < 1e-15);
        assert!((toy(&[0.0]) - 0.319_219_8).abs() < 1e-7);
        assert!((toy(&[0.403_230_920_519_793_1]) - 0.929_365_921_542_639_8).abs() < 1e-15);
    }
}
