//! Scalar special functions used by the kernels and the confidence bands.

use std::f64::consts::{PI, SQRT_2};

use crate::error::{Error, Result};

pub fn gamma(x: f64) -> f64 {
    libm::tgamma(x)
}

pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

/// Euler beta function `B(a, b)` for positive arguments.
pub fn beta(a: f64, b: f64) -> f64 {
    (ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)).exp()
}

pub fn erfc(x: f64) -> f64 {
    libm::erfc(x)
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / SQRT_2)
}

/// Standard normal density.
pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

// Acklam's rational approximation, relative error ~1.2e-9 before refinement.
const A: [f64; 6] = [
    -3.969_683_028_665_376e1,
    2.209_460_984_245_205e2,
    -2.759_285_104_469_687e2,
    1.383_577_518_672_690e2,
    -3.066_479_806_614_716e1,
    2.506_628_277_459_239,
];
const B: [f64; 5] = [
    -5.447_609_879_822_406e1,
    1.615_858_368_580_409e2,
    -1.556_989_798_598_866e2,
    6.680_131_188_771_972e1,
    -1.328_068_155_288_572e1,
];
const C: [f64; 6] = [
    -7.784_894_002_430_293e-3,
    -3.223_964_580_411_365e-1,
    -2.400_758_277_161_838,
    -2.549_732_539_343_734,
    4.374_664_141_464_968,
    2.938_163_982_698_783,
];
const D: [f64; 4] = [
    7.784_695_709_041_462e-3,
    3.224_671_290_700_398e-1,
    2.445_134_137_142_996,
    3.754_408_661_907_416,
];
const P_LOW: f64 = 0.02425;

fn acklam(p: f64) -> f64 {
    if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        -acklam(1.0 - p)
    }
}

/// Inverse of the standard normal CDF, `Φ^{-1}(prob)`.
///
/// Rational first guess followed by one Halley step against `erfc`, which
/// brings `|Φ(z) - prob|` to a few ulps.
pub fn normal_quantile(prob: f64) -> Result<f64> {
    if !(prob > 0.0 && prob < 1.0) {
        return Err(Error::Domain(format!(
            "normal quantile needs 0 < prob < 1, got {prob}"
        )));
    }
    if prob == 0.5 {
        return Ok(0.0);
    }
    let x = acklam(prob);
    let e = normal_cdf(x) - prob;
    let u = e / normal_pdf(x);
    Ok(x - u / (1.0 + 0.5 * x * u))
}

/// `q_{1-β/2}`, the two-sided critical value for level `(1-β)`.
pub fn two_sided_quantile(beta: f64) -> Result<f64> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::Domain(format!("beta must lie in (0,1), got {beta}")));
    }
    normal_quantile(1.0 - 0.5 * beta)
}

/// Gauss–Legendre nodes and weights on [-1, 1] via Newton iteration on P_n.
pub(crate) fn gauss_legendre_rule(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, 0.0);
            for j in 0..n {
                let p2 = p1;
                p1 = p0;
                p0 = ((2 * j + 1) as f64 * z * p1 - j as f64 * p2) / (j + 1) as f64;
            }
            dp = n as f64 * (z * p0 - p1) / (z * z - 1.0);
            let dz = p0 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

struct GlPair {
    coarse: (Vec<f64>, Vec<f64>),
    fine: (Vec<f64>, Vec<f64>),
}

fn gl_pair() -> &'static GlPair {
    static RULES: std::sync::OnceLock<GlPair> = std::sync::OnceLock::new();
    RULES.get_or_init(|| GlPair {
        coarse: gauss_legendre_rule(10),
        fine: gauss_legendre_rule(20),
    })
}

fn apply_rule(rule: &(Vec<f64>, Vec<f64>), f: &impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    rule.0
        .iter()
        .zip(&rule.1)
        .map(|(x, w)| w * f(mid + half * x))
        .sum::<f64>()
        * half
}

/// Adaptive Gauss–Legendre quadrature of `f` over `[a, b]`.
///
/// Each panel is integrated with the 10- and 20-point rules; panels whose
/// disagreement exceeds their share of `abs_tol` are bisected.
pub fn integrate_adaptive(f: impl Fn(f64) -> f64, a: f64, b: f64, abs_tol: f64) -> f64 {
    const MAX_DEPTH: u32 = 40;
    let rules = gl_pair();
    let total_len = (b - a).abs().max(f64::MIN_POSITIVE);
    let mut stack = vec![(a, b, 0u32)];
    let mut sum = 0.0;
    while let Some((lo, hi, depth)) = stack.pop() {
        let coarse = apply_rule(&rules.coarse, &f, lo, hi);
        let fine = apply_rule(&rules.fine, &f, lo, hi);
        let share = abs_tol * (hi - lo).abs() / total_len;
        if (fine - coarse).abs() <= share || depth >= MAX_DEPTH {
            sum += fine;
        } else {
            let mid = 0.5 * (lo + hi);
            stack.push((mid, hi, depth + 1));
            stack.push((lo, mid, depth + 1));
        }
    }
    sum
}
