//! Jitter-free power function in double-double precision.
//!
//! On dense grids the squared power function falls to `1e-18` and below,
//! which is under the f64 rounding floor of `1 − r'R^{-1}r`. This module
//! redoes the kernel, the Cholesky factor and the triangular solves in
//! double-double arithmetic so that the decay rate can be measured.
//! Only Matérn kernels with integer or half-integer `ν̃ = ν − d/2` are
//! supported; those have series or closed forms that are cheap to carry
//! to 32 digits.

mod dd;

pub use dd::DoubleDouble;

use rayon::prelude::*;

use crate::designs::Design;
use crate::error::{Error, Result};
use crate::gp::default_probes;
use crate::kernels::KernelSpec;
use dd::{sub_dot, EULER_GAMMA, ONE, ZERO};

/// Orders of `ν̃` with a double-double evaluation route.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaternOrder {
    /// `ν̃ = n`
    Integer(u32),
    /// `ν̃ = m + 1/2`
    HalfInteger(u32),
}

const MAX_ORDER: f64 = 20.0;

impl MaternOrder {
    pub fn from_kernel(kernel: &KernelSpec) -> Result<Self> {
        kernel.validate()?;
        let (nu, dim) = match *kernel {
            KernelSpec::Matern { nu, dim } => (nu, dim),
            _ => return Err(Error::param("extended precision supports Matérn kernels only")),
        };
        let order = nu - dim as f64 / 2.0;
        let twice = 2.0 * order;
        if twice.fract() != 0.0 || order > MAX_ORDER {
            return Err(Error::param(format!(
                "extended precision needs an integer or half-integer nu - d/2 up to {MAX_ORDER}, got {order}"
            )));
        }
        if order.fract() == 0.0 {
            Ok(MaternOrder::Integer(order as u32))
        } else {
            Ok(MaternOrder::HalfInteger((order - 0.5) as u32))
        }
    }
}

/// `Ψ(r)` in double-double. Intended for `r ≤ 10`; the integer-order
/// series cancels badly beyond that.
pub fn matern_dd(r: DoubleDouble, order: MaternOrder) -> DoubleDouble {
    MaternDd::new(order).eval(r)
}

/// Double-double Matérn evaluator with its series coefficients
/// precomputed for one order.
#[derive(Debug, Clone)]
pub struct MaternDd {
    order: MaternOrder,
    /// half-integer: coefficients of `r^j`; integer: of `t^{2k}`, `k < n`
    poly: Vec<DoubleDouble>,
    /// `1/((n−1)! k! (n+k)!)`
    log_coef: Vec<DoubleDouble>,
    /// `log_coef_k · (ψ(k+1) + ψ(n+k+1))`
    psi_coef: Vec<DoubleDouble>,
}

const SERIES_TERMS: u32 = 80;

impl MaternDd {
    pub fn new(order: MaternOrder) -> Self {
        let inv = |x: f64| DoubleDouble::from_f64(x).recip();
        match order {
            MaternOrder::HalfInteger(m) => {
                // ascending powers: coefficient of r^{m-k} for k = m, m-1, …, 0
                let mut poly = vec![ONE];
                let mut coef = ONE;
                for k in (0..m).rev() {
                    let num = 2.0 * (k as f64 + 1.0);
                    let den = (m as f64 + k as f64 + 1.0) * (m as f64 - k as f64);
                    coef = coef.mul_f64(num) * inv(den);
                    poly.push(coef);
                }
                MaternDd { order, poly, log_coef: Vec::new(), psi_coef: Vec::new() }
            }
            MaternOrder::Integer(n) => {
                let mut poly = vec![ONE];
                let mut coef = ONE;
                for k in 1..n {
                    coef = -coef * inv((k * (n - k)) as f64);
                    poly.push(coef);
                }
                // ψ(k+1) = −γ + H_k and ψ(n+k+1) = −γ + H_{n+k}
                let mut h_k = ZERO;
                let mut h_nk = ZERO;
                let mut b = ONE;
                for j in 1..=n {
                    h_nk = h_nk + inv(j as f64);
                    b = b * inv(j as f64);
                }
                for j in 1..n {
                    b = b * inv(j as f64);
                }
                let two_gamma = EULER_GAMMA.mul_f64(2.0);
                let mut log_coef = vec![b];
                let mut psi_coef = vec![b * (h_k + h_nk - two_gamma)];
                for k in 1..SERIES_TERMS {
                    b = b * inv((k * (n + k)) as f64);
                    h_k = h_k + inv(k as f64);
                    h_nk = h_nk + inv((n + k) as f64);
                    log_coef.push(b);
                    psi_coef.push(b * (h_k + h_nk - two_gamma));
                }
                MaternDd { order, poly, log_coef, psi_coef }
            }
        }
    }

    pub fn order(&self) -> MaternOrder {
        self.order
    }

    pub fn eval(&self, r: DoubleDouble) -> DoubleDouble {
        if !r.is_positive() {
            return ONE;
        }
        match self.order {
            MaternOrder::HalfInteger(_) => {
                let sum = self.poly.iter().rev().fold(ZERO, |acc, c| acc * r + *c);
                (-r).exp() * sum
            }
            MaternOrder::Integer(n) => self.eval_integer(n, r),
        }
    }

    /// With `t = r/2`:
    /// `Ψ = Σ_{k<n} (−1)^k (n−k−1)!/(k!(n−1)!) t^{2k}
    ///      + (−1)^n t^{2n}/(n−1)! Σ_k t^{2k}/(k!(n+k)!) [ψ(k+1) + ψ(n+k+1) − 2 ln t]`.
    fn eval_integer(&self, n: u32, r: DoubleDouble) -> DoubleDouble {
        let t = r.mul_f64(0.5);
        let t2 = t * t;
        let finite = self.poly.iter().rev().fold(ZERO, |acc, c| acc * t2 + *c);

        let mut log_sum = ZERO;
        let mut psi_sum = ZERO;
        let mut pow = ONE;
        for (a, b) in self.log_coef.iter().zip(&self.psi_coef) {
            let la = *a * pow;
            log_sum = log_sum + la;
            psi_sum = psi_sum + *b * pow;
            if la.hi < 1e-36 * log_sum.hi {
                break;
            }
            pow = pow * t2;
        }
        let tail = psi_sum - t.ln().mul_f64(2.0) * log_sum;
        let correction = t2.powi(n) * tail;
        if n % 2 == 0 {
            finite + correction
        } else {
            finite - correction
        }
    }
}

fn distance_dd(a: &[f64], b: &[f64]) -> DoubleDouble {
    if a.len() == 1 {
        return DoubleDouble::diff(a[0], b[0]).abs();
    }
    a.iter()
        .zip(b)
        .fold(ZERO, |acc, (x, y)| {
            let d = DoubleDouble::diff(*x, *y);
            acc + d * d
        })
        .sqrt()
}

/// Jitter-free kriging power function `P²(x) = 1 − r(x)'R^{-1}r(x)`
/// carried in double-double precision.
#[derive(Debug, Clone)]
pub struct ExactPowerModel {
    design: Design,
    kernel: MaternDd,
    /// row-major lower factor, `n × n`
    factor: Vec<DoubleDouble>,
    inv_diag: Vec<DoubleDouble>,
}

impl ExactPowerModel {
    pub fn new(design: &Design, kernel: &KernelSpec) -> Result<Self> {
        let psi = MaternDd::new(MaternOrder::from_kernel(kernel)?);
        if kernel.dim() != design.dim() {
            return Err(Error::Shape(format!(
                "kernel dimension {} does not match design dimension {}",
                kernel.dim(),
                design.dim()
            )));
        }
        let pts = design.points();
        let n = pts.len();
        let mut factor = vec![ZERO; n * n];
        let mut inv_diag = vec![ZERO; n];
        for i in 0..n {
            for j in 0..=i {
                let s = if i == j { ONE } else { psi.eval(distance_dd(&pts[i], &pts[j])) };
                let s = sub_dot(s, &factor[i * n..i * n + j], &factor[j * n..j * n + j]);
                if i == j {
                    if !s.is_positive() {
                        return Err(Error::Conditioning { size: n, jitter: 0.0 });
                    }
                    let d = s.sqrt();
                    factor[i * n + i] = d;
                    inv_diag[i] = d.recip();
                } else {
                    factor[i * n + j] = s * inv_diag[j];
                }
            }
        }
        Ok(ExactPowerModel { design: design.clone(), kernel: psi, factor, inv_diag })
    }

    pub fn design(&self) -> &Design {
        &self.design
    }

    pub fn order(&self) -> MaternOrder {
        self.kernel.order()
    }

    /// `P²(x)` in double-double; not clamped, so tiny negative values
    /// would expose a loss of accuracy.
    pub fn power_function_dd(&self, x: &[f64]) -> Result<DoubleDouble> {
        if x.len() != self.design.dim() {
            return Err(Error::Shape(format!("point has {} coordinates, expected {}", x.len(), self.design.dim())));
        }
        let pts = self.design.points();
        let n = pts.len();
        let mut v = Vec::with_capacity(n);
        let mut norm_sq = ZERO;
        for i in 0..n {
            let s = sub_dot(self.kernel.eval(distance_dd(x, &pts[i])), &self.factor[i * n..i * n + i], &v);
            let vi = s * self.inv_diag[i];
            norm_sq = norm_sq + vi * vi;
            v.push(vi);
        }
        Ok(ONE - norm_sq)
    }

    pub fn power_function(&self, x: &[f64]) -> Result<f64> {
        Ok(self.power_function_dd(x)?.to_f64())
    }

    /// `max_x P(x)` over `probes`; evaluated in parallel.
    pub fn sup_power(&self, probes: &[Vec<f64>]) -> Result<f64> {
        if probes.is_empty() {
            return Err(Error::input("sup_power needs at least one probe"));
        }
        let values: Vec<f64> = probes.par_iter().map(|p| self.power_function(p)).collect::<Result<_>>()?;
        Ok(values.into_iter().fold(0.0f64, |m, p| m.max(p.max(0.0).sqrt())))
    }

    pub fn default_probes(&self) -> Result<Vec<Vec<f64>>> {
        default_probes(&self.design)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::designs::grid_design;
    use crate::gp::{fit, FitConfig};

    fn dd(x: f64) -> DoubleDouble {
        DoubleDouble::from_f64(x)
    }

    // 1 − Ψ(r) as (hi, lo) pairs at the f64 value of r, tabulated with
    // 60-digit arithmetic
    const ONE_MINUS_PSI: [(MaternOrder, [(f64, f64, f64); 3]); 4] = [
        (
            MaternOrder::Integer(3),
            [
                (0.01, 1.2499843764681791e-05, -4.0134142461353183e-22),
                (0.001, 1.2499998437502068e-07, 6.473126268763864e-24),
                (1.0, 0.11234214690775694, -6.144917934917664e-18),
            ],
        ),
        (
            MaternOrder::Integer(2),
            [
                (0.01, 2.4996580529468822e-05, 1.5403199587377958e-22),
                (0.001, 2.499995141445314e-07, 1.0155785802238757e-23),
                (0.3, 0.021441687238309123, -5.065297017099348e-19),
            ],
        ),
        (
            MaternOrder::Integer(1),
            [
                (0.01, 0.00026105881703752357, 1.1546676316151789e-20),
                (0.001, 3.761843914425722e-06, 6.708538510421411e-23),
                (1.0, 0.3980927698027654, 2.58045953609113e-18),
            ],
        ),
        (
            MaternOrder::HalfInteger(2),
            [
                (0.01, 1.6666252215293622e-05, 3.4022401558072475e-22),
                (0.3, 0.014711766493315237, 5.858364999297013e-20),
                (1.0, 0.1416146372666346, -8.007008917665704e-18),
            ],
        ),
    ];

    #[test]
    fn one_minus_psi_matches_tabulated_values_past_f64() {
        for (order, rows) in ONE_MINUS_PSI {
            for (r, hi, lo) in rows {
                let got = ONE - matern_dd(dd(r), order);
                // absolute: Ψ is O(1), so this is a few double-double units of
                // roundoff, against ~1e-17 for any f64 evaluation
                let err = (got - DoubleDouble::new(hi, lo)).to_f64().abs();
                assert!(err <= 5e-31, "{order:?} r={r}: abs err {err}");
            }
        }
    }

    #[test]
    fn agrees_with_f64_kernel() {
        for (nu, dim) in [(1.5, 1), (2.5, 1), (3.5, 1), (3.0, 2), (4.0, 1), (2.0, 2)] {
            let k = KernelSpec::matern(nu, dim).unwrap();
            let order = MaternOrder::from_kernel(&k).unwrap();
            for i in 0..60 {
                let r = 0.05 + 0.1 * i as f64;
                let a = matern_dd(dd(r), order).to_f64();
                let b = k.correlation(r).unwrap();
                assert!((a - b).abs() < 1e-14, "nu={nu} d={dim} r={r}: {a} vs {b}");
            }
            assert_eq!(matern_dd(ZERO, order), ONE);
        }
    }

    #[test]
    fn order_classification() {
        let ok = |nu, d| MaternOrder::from_kernel(&KernelSpec::matern(nu, d).unwrap());
        assert_eq!(ok(3.5, 1).unwrap(), MaternOrder::Integer(3));
        assert_eq!(ok(2.5, 2).unwrap(), MaternOrder::HalfInteger(1));
        assert!(ok(3.3, 1).is_err());
        let gw = KernelSpec::generalized_wendland(1.0, 3.0, 1).unwrap();
        assert!(MaternOrder::from_kernel(&gw).is_err());
    }

    #[test]
    fn exact_power_agrees_with_f64_model_when_well_conditioned() {
        let k = KernelSpec::matern(2.5, 1).unwrap();
        let d = grid_design(8, 1).unwrap();
        let exact = ExactPowerModel::new(&d, &k).unwrap();
        let cfg = FitConfig { jitter: 0.0, ..FitConfig::default() };
        let model = fit(&d, &vec![0.0; 8], &k, &cfg).unwrap();
        for i in 0..50 {
            let x = [i as f64 / 49.0];
            let a = exact.power_function(&x).unwrap();
            let b = model.power_function(&x).unwrap();
            assert!((a - b).abs() < 1e-10, "x={}: {a} vs {b}", x[0]);
        }
        assert!(exact.power_function(&[3.0 / 7.0]).unwrap().abs() < 1e-28);
    }

    #[test]
    fn exact_power_resolves_tiny_values() {
        let k = KernelSpec::matern(3.5, 1).unwrap();
        let small = ExactPowerModel::new(&grid_design(40, 1).unwrap(), &k).unwrap();
        let large = ExactPowerModel::new(&grid_design(80, 1).unwrap(), &k).unwrap();
        // P² at fixed points, from a 60-digit Cholesky of the same grid
        for (x, p2) in [(0.5 / 39.0, 1.562_292_319_749_795_6e-12), (0.4 / 39.0, 1.731_398_460_876_921_2e-12), (0.5, 2.998_649_205_279_772_6e-13)] {
            let got = small.power_function(&[x]).unwrap();
            assert!((got / p2 - 1.0).abs() < 1e-9, "x={x}: {got} vs {p2}");
        }
        let ps = small.sup_power(&small.default_probes().unwrap()).unwrap();
        let pl = large.sup_power(&large.default_probes().unwrap()).unwrap();
        // true sup is 1.3158e-6 near x = 0.41/39; the probes land just below it
        assert!(ps >= 1.562_292_319_749_795_6e-12f64.sqrt() && ps <= 1.316e-6, "{ps}");
        assert!(pl < ps / 6.0, "{ps} {pl}");
        for x in [0.0, 0.123, 0.5, 1.0] {
            let p = large.power_function_dd(&[x]).unwrap();
            assert!(p.to_f64() > -1e-26, "{}", p.to_f64());
        }
    }
}
