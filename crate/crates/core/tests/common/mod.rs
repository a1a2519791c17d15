//! Shared test oracles, independent of the production quadrature path.

#![allow(dead_code)]

use std::f64::consts::PI;

/// Tanh-sinh (double-exponential) quadrature over [a, b].
///
/// A different rule family from the Gauss-Legendre/Jacobi rules used by the
/// implementation; converges for integrable endpoint singularities. Node
/// distances from the endpoints are computed cancellation-free.
pub fn tanh_sinh<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, eps: f64) -> f64 {
    let c = 0.5 * (b - a);
    let eval = |t: f64| -> f64 {
        let w = 0.5 * PI * t.sinh();
        let dist_left = (b - a) / (1.0 + (-2.0 * w).exp());
        let x = a + dist_left;
        if !(x > a && x < b) {
            return 0.0;
        }
        let cw = w.cosh();
        let dxdt = c * 0.5 * PI * t.cosh() / (cw * cw);
        let y = f(x);
        if y.is_finite() {
            y * dxdt
        } else {
            0.0
        }
    };

    // wide clip: strong endpoint singularities (exponents near -1) keep
    // ε^{small} mass in the last decades of the node ladder
    let tmax = 6.0;
    let mut prev = f64::NAN;
    for level in 3..14 {
        let n = 1usize << level;
        let h = tmax / n as f64;
        let mut sum = eval(0.0);
        for k in 1..=n {
            let t = k as f64 * h;
            sum += eval(t) + eval(-t);
        }
        let cur = sum * h;
        if level > 5 && (cur - prev).abs() <= eps * cur.abs().max(1e-300) {
            return cur;
        }
        prev = cur;
    }
    prev
}

/// Two-sample Kolmogorov-Smirnov statistic.
pub fn ks_statistic(mut a: Vec<f64>, mut b: Vec<f64>) -> f64 {
    a.sort_by(|x, y| x.partial_cmp(y).unwrap());
    b.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let (n, m) = (a.len(), b.len());
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < n && j < m {
        if a[i] <= b[j] {
            i += 1;
        } else {
            j += 1;
        }
        let fa = i as f64 / n as f64;
        let fb = j as f64 / m as f64;
        d = d.max((fa - fb).abs());
    }
    d
}

/// Mean and standard error of a sample.
pub fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}
