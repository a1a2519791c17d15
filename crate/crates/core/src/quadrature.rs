//! Gaussian quadrature rules and adaptive panel integration.
//!
//! Three families are used by the prediction and gains kernels:
//! - Gauss-Legendre panels with adaptive bisection for smooth integrands
//!   (and for weakly singular ones after a flattening substitution),
//! - Gauss-Jacobi rules for integrands with algebraic endpoint weights
//!   (1-x)^alpha (1+x)^beta,
//! - Gauss-Hermite rules for expectations against the standard normal law.
//!
//! All rules report an error estimate alongside the value so callers can
//! surface the achieved accuracy in reports.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// How integrable endpoint singularities are treated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SingularRule {
    /// Open composite-midpoint refinement; never evaluates at the endpoints.
    MidpointAvoiding,
    /// Jacobi-type treatment: the algebraic endpoint weight is absorbed
    /// exactly (by a weighted rule or a flattening substitution).
    JacobiWeighted,
}

/// Quadrature settings shared by the prediction and gains kernels.
#[derive(Debug, Clone, Copy)]
pub struct QuadratureConfig {
    /// Base node count for fixed rules and panel subdivisions.
    pub nodes_per_unit: usize,
    pub singular_rule: SingularRule,
    /// Relative tolerance requested from adaptive integrals.
    pub tolerance: f64,
}

impl QuadratureConfig {
    pub fn new(nodes_per_unit: usize, singular_rule: SingularRule, tolerance: f64) -> Result<Self> {
        if nodes_per_unit < 8 {
            return Err(Error::InvalidParameter {
                name: "nodes_per_unit",
                value: nodes_per_unit as f64,
                constraint: "nodes_per_unit >= 8",
            });
        }
        if !(tolerance > 0.0) {
            return Err(Error::InvalidParameter {
                name: "tolerance",
                value: tolerance,
                constraint: "tolerance > 0",
            });
        }
        Ok(Self {
            nodes_per_unit,
            singular_rule,
            tolerance,
        })
    }
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            nodes_per_unit: 64,
            singular_rule: SingularRule::JacobiWeighted,
            tolerance: 1e-9,
        }
    }
}

/// An integral value together with its achieved error estimate.
#[derive(Debug, Clone, Copy)]
pub struct QuadValue {
    pub value: f64,
    pub error_estimate: f64,
}

// ---------------------------------------------------------------------------
// Gauss-Legendre
// ---------------------------------------------------------------------------

fn legendre_value_and_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

fn compute_gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 2);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Tricomi initial guess, then Newton
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_value_and_derivative(n, z);
            let dz = p / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre_value_and_derivative(n, z);
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

type RuleCache = Mutex<HashMap<u64, Arc<(Vec<f64>, Vec<f64>)>>>;

fn gl_cache() -> &'static RuleCache {
    static CACHE: OnceLock<RuleCache> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Gauss-Legendre nodes and weights on [-1, 1], cached per order.
pub fn gauss_legendre(n: usize) -> Arc<(Vec<f64>, Vec<f64>)> {
    let mut cache = gl_cache().lock().unwrap();
    cache
        .entry(n as u64)
        .or_insert_with(|| Arc::new(compute_gauss_legendre(n)))
        .clone()
}

/// Integrate `f` over [a, b] with a fixed-order Gauss-Legendre rule.
pub fn gl_fixed<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, n: usize) -> f64 {
    let rule = gauss_legendre(n);
    let c = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let mut acc = 0.0;
    for (x, w) in rule.0.iter().zip(rule.1.iter()) {
        acc += w * f(mid + c * x);
    }
    acc * c
}

// ---------------------------------------------------------------------------
// Golub-Welsch rules (Jacobi, Hermite)
// ---------------------------------------------------------------------------

fn golub_welsch(diag: &[f64], offdiag: &[f64], mu0: f64) -> (Vec<f64>, Vec<f64>) {
    let n = diag.len();
    let mut m = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        m[(i, i)] = diag[i];
        if i + 1 < n {
            m[(i, i + 1)] = offdiag[i];
            m[(i + 1, i)] = offdiag[i];
        }
    }
    let eig = SymmetricEigen::new(m);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|j| {
            let v0 = eig.eigenvectors[(0, j)];
            (eig.eigenvalues[j], mu0 * v0 * v0)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    pairs.into_iter().unzip()
}

fn compute_gauss_jacobi(n: usize, alpha: f64, beta: f64) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 2 && alpha > -1.0 && beta > -1.0);
    let ab = alpha + beta;
    let mut diag = vec![0.0; n];
    let mut off = vec![0.0; n - 1];
    diag[0] = (beta - alpha) / (ab + 2.0);
    for k in 1..n {
        let kf = k as f64;
        let denom = 2.0 * kf + ab;
        diag[k] = (beta * beta - alpha * alpha) / (denom * (denom + 2.0));
        let b2 = if k == 1 {
            4.0 * (1.0 + alpha) * (1.0 + beta) / ((ab + 2.0) * (ab + 2.0) * (ab + 3.0))
        } else {
            4.0 * kf * (kf + alpha) * (kf + beta) * (kf + ab)
                / (denom * denom * (denom + 1.0) * (denom - 1.0))
        };
        off[k - 1] = b2.sqrt();
    }
    // mu0 = int_{-1}^{1} (1-x)^a (1+x)^b dx = 2^{a+b+1} B(a+1, b+1)
    let ln_mu0 = (ab + 1.0) * std::f64::consts::LN_2
        + statrs::function::gamma::ln_gamma(alpha + 1.0)
        + statrs::function::gamma::ln_gamma(beta + 1.0)
        - statrs::function::gamma::ln_gamma(ab + 2.0);
    golub_welsch(&diag, &off, ln_mu0.exp())
}

fn gj_cache() -> &'static RuleCache {
    static CACHE: OnceLock<RuleCache> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Gauss-Jacobi nodes and weights on [-1, 1] for weight (1-x)^alpha (1+x)^beta.
pub fn gauss_jacobi(n: usize, alpha: f64, beta: f64) -> Arc<(Vec<f64>, Vec<f64>)> {
    let key = (n as u64)
        .wrapping_mul(0x9e3779b97f4a7c15)
        .wrapping_add(alpha.to_bits())
        .rotate_left(17)
        .wrapping_add(beta.to_bits());
    let mut cache = gj_cache().lock().unwrap();
    cache
        .entry(key)
        .or_insert_with(|| Arc::new(compute_gauss_jacobi(n, alpha, beta)))
        .clone()
}

fn compute_gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 2);
    let diag = vec![0.0; n];
    let off: Vec<f64> = (1..n).map(|k| (k as f64 / 2.0).sqrt()).collect();
    let mu0 = std::f64::consts::PI.sqrt();
    golub_welsch(&diag, &off, mu0)
}

fn gh_cache() -> &'static RuleCache {
    static CACHE: OnceLock<RuleCache> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Gauss-Hermite rule transformed for expectations against the standard
/// normal density: E[g(Z)] ~= sum_i w_i g(z_i) with sum_i w_i = 1.
pub fn gauss_hermite_normal(n: usize) -> Arc<(Vec<f64>, Vec<f64>)> {
    let mut cache = gh_cache().lock().unwrap();
    cache
        .entry(n as u64)
        .or_insert_with(|| {
            let (x, w) = compute_gauss_hermite(n);
            let inv_sqrt_pi = 1.0 / std::f64::consts::PI.sqrt();
            let z: Vec<f64> = x.iter().map(|&xi| std::f64::consts::SQRT_2 * xi).collect();
            let wn: Vec<f64> = w.iter().map(|&wi| wi * inv_sqrt_pi).collect();
            Arc::new((z, wn))
        })
        .clone()
}

// ---------------------------------------------------------------------------
// Adaptive Gauss-Legendre panels
// ---------------------------------------------------------------------------

/// Adaptive panel integration of `f` over [a, b].
///
/// Panels are bisected until the local estimate (difference of two
/// Gauss-Legendre orders) meets the tolerance share; nodes are strictly
/// interior so integrable endpoint behavior is never evaluated at the
/// endpoints themselves. The achieved error estimate is returned and checked
/// against `tol` scaled by the integral magnitude.
pub fn adaptive_gl<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> Result<QuadValue> {
    adaptive_gl_with_floor(f, a, b, tol, 0.0)
}

/// [`adaptive_gl`] with an absolute magnitude floor on the convergence scale,
/// for integrals whose natural scale is known to the caller (e.g. payoff
/// expectations whose value may be many orders below the asset level).
pub fn adaptive_gl_with_floor<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    tol: f64,
    scale_floor: f64,
) -> Result<QuadValue> {
    const LO: usize = 8;
    const HI: usize = 16;
    const MAX_PANELS: usize = 20_000;

    if a == b {
        return Ok(QuadValue {
            value: 0.0,
            error_estimate: 0.0,
        });
    }

    let mut stack = vec![(a, b, 0u32)];
    let mut value = 0.0f64;
    let mut err = 0.0f64;
    let mut panels = 0usize;
    let scale = {
        let coarse = gl_fixed(f, a, b, HI).abs();
        coarse.max(scale_floor).max(1e-300)
    };

    while let Some((lo, hi, depth)) = stack.pop() {
        panels += 1;
        if panels > MAX_PANELS {
            return Err(Error::QuadratureNonConvergent {
                achieved: err.max((hi - lo).abs()),
                requested: tol,
            });
        }
        let coarse = gl_fixed(f, lo, hi, LO);
        let fine = gl_fixed(f, lo, hi, HI);
        let local_err = (fine - coarse).abs();
        let width_share = ((hi - lo) / (b - a)).abs();
        if local_err <= tol * scale * width_share.max(1e-6) || depth >= 52 {
            value += fine;
            err += local_err;
        } else {
            let mid = 0.5 * (lo + hi);
            stack.push((lo, mid, depth + 1));
            stack.push((mid, hi, depth + 1));
        }
    }

    let rel_scale = value.abs().max(scale);
    if err > tol * rel_scale * 10.0 {
        return Err(Error::QuadratureNonConvergent {
            achieved: err / rel_scale,
            requested: tol,
        });
    }
    Ok(QuadValue {
        value,
        error_estimate: err,
    })
}

/// Integrate (z - a)^beta * smooth(z) over [a, b] with Gauss-Jacobi rules of
/// doubling order until two consecutive orders agree to `q.tolerance`.
pub fn gj_escalating<F: Fn(f64) -> f64>(
    smooth: &F,
    a: f64,
    b: f64,
    beta: f64,
    q: &QuadratureConfig,
) -> Result<QuadValue> {
    if a == b {
        return Ok(QuadValue {
            value: 0.0,
            error_estimate: 0.0,
        });
    }
    let half = 0.5 * (b - a);
    let scale = half.powf(beta + 1.0);
    let eval = |n: usize| -> f64 {
        let rule = gauss_jacobi(n, 0.0, beta);
        let mut acc = 0.0;
        for (x, w) in rule.0.iter().zip(rule.1.iter()) {
            acc += w * smooth(a + half * (x + 1.0));
        }
        acc * scale
    };
    let mut n = q.nodes_per_unit.clamp(8, 64);
    let mut prev = eval(n);
    let mut last_diff = f64::INFINITY;
    for _ in 0..5 {
        n *= 2;
        let cur = eval(n);
        last_diff = (cur - prev).abs();
        if last_diff <= q.tolerance * cur.abs().max(1e-300) {
            return Ok(QuadValue {
                value: cur,
                error_estimate: last_diff,
            });
        }
        prev = cur;
    }
    Err(Error::QuadratureNonConvergent {
        achieved: last_diff / prev.abs().max(1e-300),
        requested: q.tolerance,
    })
}

/// Open composite-midpoint rule with doubling refinement.
///
/// Slow but entirely endpoint-free; used as the `MidpointAvoiding` option for
/// integrands with integrable endpoint singularities.
pub fn composite_midpoint<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> Result<QuadValue> {
    if a == b {
        return Ok(QuadValue {
            value: 0.0,
            error_estimate: 0.0,
        });
    }
    let mut n = 64usize;
    let mut prev = midpoint_sum(f, a, b, n);
    loop {
        n *= 2;
        let cur = midpoint_sum(f, a, b, n);
        let diff = (cur - prev).abs();
        if diff <= tol * cur.abs().max(1e-300) {
            return Ok(QuadValue {
                value: cur,
                error_estimate: diff,
            });
        }
        if n >= 1 << 22 {
            return Err(Error::QuadratureNonConvergent {
                achieved: diff / cur.abs().max(1e-300),
                requested: tol,
            });
        }
        prev = cur;
    }
}

fn midpoint_sum<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut acc = 0.0;
    for j in 0..n {
        acc += f(a + (j as f64 + 0.5) * h);
    }
    acc * h
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gl_integrates_polynomials_exactly() {
        // order n is exact through degree 2n-1
        let v = gl_fixed(&|x: f64| x.powi(7) + 3.0 * x * x, -1.0, 1.0, 8);
        assert_relative_eq!(v, 2.0, epsilon = 1e-14);
        let v = gl_fixed(&|x: f64| x.exp(), 0.0, 1.0, 16);
        assert_relative_eq!(v, std::f64::consts::E - 1.0, epsilon = 1e-14);
    }

    #[test]
    fn jacobi_rule_handles_endpoint_weight() {
        // int_{-1}^{1} (1+x)^{-1/2} dx = 2 sqrt(2)
        let rule = gauss_jacobi(16, 0.0, -0.5);
        let v: f64 = rule.1.iter().sum();
        assert_relative_eq!(v, 2.0 * std::f64::consts::SQRT_2, epsilon = 1e-12);

        // int_{-1}^{1} (1+x)^{-1/2} cos(x) dx, reference from adaptive rule on
        // the substituted integrand 2 cos(u^2 - 1) on [0, sqrt 2]
        let with_cos: f64 = rule
            .0
            .iter()
            .zip(rule.1.iter())
            .map(|(x, w)| w * x.cos())
            .sum();
        let reference = adaptive_gl(&|u: f64| 2.0 * (u * u - 1.0).cos(), 0.0, 2f64.sqrt(), 1e-12)
            .unwrap()
            .value;
        assert_relative_eq!(with_cos, reference, epsilon = 1e-10);
    }

    #[test]
    fn hermite_rule_matches_normal_moments() {
        let rule = gauss_hermite_normal(32);
        let m0: f64 = rule.1.iter().sum();
        let m2: f64 = rule
            .0
            .iter()
            .zip(rule.1.iter())
            .map(|(z, w)| w * z * z)
            .sum();
        let m4: f64 = rule
            .0
            .iter()
            .zip(rule.1.iter())
            .map(|(z, w)| w * z.powi(4))
            .sum();
        assert_relative_eq!(m0, 1.0, epsilon = 1e-13);
        assert_relative_eq!(m2, 1.0, epsilon = 1e-12);
        assert_relative_eq!(m4, 3.0, epsilon = 1e-11);
    }

    #[test]
    fn adaptive_handles_weak_singularity() {
        // int_0^1 x^{-1/4} dx = 4/3; x^{-1/4} is integrable, nodes interior
        let v = adaptive_gl(&|x: f64| x.powf(-0.25), 0.0, 1.0, 1e-10).unwrap();
        assert_relative_eq!(v.value, 4.0 / 3.0, epsilon = 1e-8);
    }

    #[test]
    fn midpoint_rule_converges() {
        let v = composite_midpoint(&|x: f64| x.sqrt(), 0.0, 1.0, 1e-9).unwrap();
        assert_relative_eq!(v.value, 2.0 / 3.0, epsilon = 1e-7);
    }

    #[test]
    fn config_validation() {
        assert!(QuadratureConfig::new(4, SingularRule::JacobiWeighted, 1e-9).is_err());
        assert!(QuadratureConfig::new(16, SingularRule::JacobiWeighted, 0.0).is_err());
        assert!(QuadratureConfig::new(16, SingularRule::MidpointAvoiding, 1e-9).is_ok());
    }
}
