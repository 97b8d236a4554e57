//! Double-double arithmetic: an unevaluated sum `hi + lo` with
//! `|lo| ≤ ulp(hi)/2`, giving about 32 significant digits.

use std::ops::{Add, Div, Mul, Neg, Sub};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DoubleDouble {
    pub hi: f64,
    pub lo: f64,
}

pub const LN2: DoubleDouble = DoubleDouble { hi: 0.693_147_180_559_945_3, lo: 2.319_046_813_846_299_6e-17 };
pub const EULER_GAMMA: DoubleDouble = DoubleDouble { hi: 0.577_215_664_901_532_9, lo: -4.942_915_152_430_645e-18 };
pub const ONE: DoubleDouble = DoubleDouble { hi: 1.0, lo: 0.0 };
pub const ZERO: DoubleDouble = DoubleDouble { hi: 0.0, lo: 0.0 };

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

impl DoubleDouble {
    pub const fn new(hi: f64, lo: f64) -> Self {
        DoubleDouble { hi, lo }
    }

    pub const fn from_f64(x: f64) -> Self {
        DoubleDouble { hi: x, lo: 0.0 }
    }

    /// Exact difference of two doubles.
    pub fn diff(a: f64, b: f64) -> Self {
        let (s, e) = two_sum(a, -b);
        DoubleDouble { hi: s, lo: e }
    }

    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    pub fn abs(self) -> Self {
        if self.hi < 0.0 {
            -self
        } else {
            self
        }
    }

    pub fn is_positive(self) -> bool {
        self.hi > 0.0 || (self.hi == 0.0 && self.lo > 0.0)
    }

    pub fn mul_f64(self, b: f64) -> Self {
        let (p, e) = two_prod(self.hi, b);
        let (hi, lo) = quick_two_sum(p, e + self.lo * b);
        DoubleDouble { hi, lo }
    }

    /// Multiplication by `2^k`, exact barring under/overflow.
    pub fn ldexp(self, k: i32) -> Self {
        let s = 2f64.powi(k);
        DoubleDouble { hi: self.hi * s, lo: self.lo * s }
    }

    pub fn square(self) -> Self {
        self * self
    }

    pub fn powi(self, n: u32) -> Self {
        let mut out = ONE;
        let mut base = self;
        let mut e = n;
        while e > 0 {
            if e & 1 == 1 {
                out = out * base;
            }
            base = base * base;
            e >>= 1;
        }
        out
    }

    pub fn sqrt(self) -> Self {
        if self.hi <= 0.0 {
            return if self.hi == 0.0 { ZERO } else { DoubleDouble::from_f64(f64::NAN) };
        }
        let q = self.hi.sqrt();
        let (p, e) = two_prod(q, q);
        let residual = (self - DoubleDouble { hi: p, lo: e }).to_f64();
        let (hi, lo) = quick_two_sum(q, residual / (2.0 * q));
        DoubleDouble { hi, lo }
    }

    pub fn exp(self) -> Self {
        if self.hi < -745.0 {
            return ZERO;
        }
        if self.hi > 709.0 {
            return DoubleDouble::from_f64(f64::INFINITY);
        }
        const HALVINGS: i32 = 5;
        let k = (self.hi / LN2.hi).round();
        let reduced = (self - LN2.mul_f64(k)).ldexp(-HALVINGS);
        // carry e^r − 1 through the squarings, (1+s)² − 1 = s(s + 2),
        // so the small part keeps its relative accuracy
        let mut term = reduced;
        let mut s = reduced;
        for i in 2..40 {
            term = term * reduced / DoubleDouble::from_f64(i as f64);
            s = s + term;
            if term.hi.abs() < 1e-36 {
                break;
            }
        }
        for _ in 0..HALVINGS {
            s = s * (s + DoubleDouble::from_f64(2.0));
        }
        (ONE + s).ldexp(k as i32)
    }

    pub fn ln(self) -> Self {
        if self.hi <= 0.0 {
            return DoubleDouble::from_f64(f64::NAN);
        }
        let y = DoubleDouble::from_f64(self.hi.ln());
        // one Newton step doubles the 53 correct bits of the f64 start
        y + self * (-y).exp() - ONE
    }

    pub fn recip(self) -> Self {
        ONE / self
    }
}

/// `s − Σ a_k b_k`, accumulating the error terms of each product and
/// sum separately and renormalizing once at the end.
pub fn sub_dot(s: DoubleDouble, a: &[DoubleDouble], b: &[DoubleDouble]) -> DoubleDouble {
    let mut hi = s.hi;
    let mut lo = s.lo;
    for (x, y) in a.iter().zip(b) {
        let (p, e) = two_prod(x.hi, y.hi);
        let e = e + (x.hi * y.lo + x.lo * y.hi);
        let (t, f) = two_sum(hi, -p);
        hi = t;
        lo += f - e;
    }
    let (hi, lo) = quick_two_sum(hi, lo);
    DoubleDouble { hi, lo }
}

impl From<f64> for DoubleDouble {
    fn from(x: f64) -> Self {
        DoubleDouble::from_f64(x)
    }
}

impl Neg for DoubleDouble {
    type Output = Self;
    fn neg(self) -> Self {
        DoubleDouble { hi: -self.hi, lo: -self.lo }
    }
}

impl Add for DoubleDouble {
    type Output = Self;
    fn add(self, b: Self) -> Self {
        let (s, e) = two_sum(self.hi, b.hi);
        let (t, f) = two_sum(self.lo, b.lo);
        let (s, e) = quick_two_sum(s, e + t);
        let (hi, lo) = quick_two_sum(s, e + f);
        DoubleDouble { hi, lo }
    }
}

impl Sub for DoubleDouble {
    type Output = Self;
    fn sub(self, b: Self) -> Self {
        self + (-b)
    }
}

impl Mul for DoubleDouble {
    type Output = Self;
    fn mul(self, b: Self) -> Self {
        let (p, e) = two_prod(self.hi, b.hi);
        let e = e + (self.hi * b.lo + self.lo * b.hi);
        let (hi, lo) = quick_two_sum(p, e);
        DoubleDouble { hi, lo }
    }
}

impl Div for DoubleDouble {
    type Output = Self;
    fn div(self, b: Self) -> Self {
        let q1 = self.hi / b.hi;
        let r = self - b.mul_f64(q1);
        let q2 = r.hi / b.hi;
        let r = r - b.mul_f64(q2);
        let q3 = r.hi / b.hi;
        let (hi, lo) = quick_two_sum(q1, q2);
        DoubleDouble { hi, lo } + DoubleDouble::from_f64(q3)
    }
}
