//! Reliability diagnostics for confidence bands: the `L_p` ratio of error
//! to band width, coverage, and log-log rate fits.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gp::PredictionBand;

/// Exponent of the `L_p` ratio metric.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Exponent {
    Finite(f64),
    #[serde(with = "infinity_tag")]
    Infinity,
}

mod infinity_tag {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str("inf")
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<(), D::Error> {
        let s = String::deserialize(d)?;
        match s.as_str() {
            "inf" | "infinity" | "Infinity" => Ok(()),
            other => Err(serde::de::Error::custom(format!("expected \"inf\", got {other:?}"))),
        }
    }
}

impl Exponent {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Exponent::Finite(p) if !(p.is_finite() && p >= 2.0) => {
                Err(Error::param(format!("exponent p must be finite and >= 2, got {p}")))
            }
            _ => Ok(()),
        }
    }
}

impl std::fmt::Display for Exponent {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Exponent::Finite(p) => write!(f, "{p}"),
            Exponent::Infinity => f.write_str("inf"),
        }
    }
}

impl std::str::FromStr for Exponent {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "inf" | "infinity" | "Infinity" => Ok(Exponent::Infinity),
            other => {
                let p: f64 = other.parse().map_err(|_| Error::param(format!("invalid exponent `{other}`")))?;
                let e = Exponent::Finite(p);
                e.validate()?;
                Ok(e)
            }
        }
    }
}

/// Value of the ratio metric plus the number of points where a nonzero
/// error met a zero width.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatioMetric {
    pub value: f64,
    pub infinite_count: usize,
}

/// `|err| / width` with `0/0 = 0` and `x/0 = ∞` for `x ≠ 0`.
pub fn pointwise_ratio(err: f64, width: f64) -> f64 {
    let err = err.abs();
    if err == 0.0 {
        0.0
    } else if width == 0.0 {
        f64::INFINITY
    } else {
        err / width
    }
}

/// Mean of `(|err|/width)^p` (or the max ratio for `p = ∞`) with
/// `width = 2·half_width`.
pub fn ratio_metric_raw(errors: &[f64], widths: &[f64], p: Exponent) -> Result<RatioMetric> {
    if errors.len() != widths.len() {
        return Err(Error::input(format!(
            "{} errors but {} widths",
            errors.len(),
            widths.len()
        )));
    }
    if errors.is_empty() {
        return Err(Error::input("ratio metric needs at least one point"));
    }
    p.validate()?;
    let ratios: Vec<f64> = errors.iter().zip(widths).map(|(e, w)| pointwise_ratio(*e, *w)).collect();
    let infinite_count = ratios.iter().filter(|r| r.is_infinite()).count();
    let value = match p {
        Exponent::Infinity => ratios.iter().fold(0.0, |m: f64, r| m.max(*r)),
        Exponent::Finite(p) => ratios.iter().map(|r| r.powf(p)).sum::<f64>() / ratios.len() as f64,
    };
    Ok(RatioMetric { value, infinite_count })
}

/// The ratio metric against a [`PredictionBand`].
pub fn ratio_metric(truth: &[f64], band: &PredictionBand, p: Exponent) -> Result<RatioMetric> {
    check_lengths(truth, band)?;
    let errors: Vec<f64> = truth.iter().zip(&band.means).map(|(f, m)| f - m).collect();
    let widths: Vec<f64> = band.half_widths.iter().map(|h| 2.0 * h).collect();
    ratio_metric_raw(&errors, &widths, p)
}

fn check_lengths(truth: &[f64], band: &PredictionBand) -> Result<()> {
    if truth.len() != band.len() {
        return Err(Error::input(format!(
            "{} true values for a band of {} points",
            truth.len(),
            band.len()
        )));
    }
    Ok(())
}

/// Fraction of points with `lo ≤ f(x) ≤ hi`.
pub fn coverage_rate(truth: &[f64], band: &PredictionBand) -> Result<f64> {
    check_lengths(truth, band)?;
    if truth.is_empty() {
        return Err(Error::input("coverage needs at least one point"));
    }
    let covered = truth
        .iter()
        .enumerate()
        .filter(|(i, f)| band.lo(*i) <= **f && **f <= band.hi(*i))
        .count();
    Ok(covered as f64 / truth.len() as f64)
}

/// Coverage restricted to the design points: the empirical counterpart of
/// the average coverage probability.
pub fn acp(truth_at_design: &[f64], band_at_design: &PredictionBand) -> Result<f64> {
    coverage_rate(truth_at_design, band_at_design)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogLogFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

/// Ordinary least squares of `log E` on `log n`.
pub fn loglog_slope(ns: &[f64], es: &[f64]) -> Result<LogLogFit> {
    if ns.len() != es.len() {
        return Err(Error::input("ns and Es differ in length"));
    }
    if ns.len() < 3 {
        return Err(Error::input(format!("slope needs at least 3 points, got {}", ns.len())));
    }
    if let Some(v) = ns.iter().chain(es).find(|v| !(v.is_finite() && **v > 0.0)) {
        return Err(Error::input(format!("log-log fit needs finite positive values, got {v}")));
    }
    let x: Vec<f64> = ns.iter().map(|v| v.ln()).collect();
    let y: Vec<f64> = es.iter().map(|v| v.ln()).collect();
    let k = x.len() as f64;
    let mx = x.iter().sum::<f64>() / k;
    let my = y.iter().sum::<f64>() / k;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|b| (b - my) * (b - my)).sum();
    if sxx == 0.0 {
        return Err(Error::input("all n values coincide"));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = x.iter().zip(&y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let r2 = if syy == 0.0 { 1.0 } else { 1.0 - sse / syy };
    Ok(LogLogFit { slope, intercept, r2 })
}

/// Per-n ratio metric values and their log-log trend.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReliabilityReport {
    pub p: Exponent,
    pub rows: Vec<(usize, f64)>,
    pub fit: Option<LogLogFit>,
    pub infinite_ratio_count: usize,
    /// Pointwise ratios `|err|/width` at the largest n.
    pub last_ratios: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportSummary {
    pub slope: Option<f64>,
    pub intercept: Option<f64>,
    pub r2: Option<f64>,
    pub infinite_ratio_count: usize,
}

impl ReliabilityReport {
    /// Rows are sorted by n; rows with infinite or zero E are kept in the
    /// table but left out of the slope fit.
    pub fn new(p: Exponent, mut rows: Vec<(usize, f64)>, infinite_ratio_count: usize, last_ratios: Vec<f64>) -> Self {
        rows.sort_by_key(|r| r.0);
        let usable: Vec<&(usize, f64)> = rows.iter().filter(|r| r.1.is_finite() && r.1 > 0.0).collect();
        let ns: Vec<f64> = usable.iter().map(|r| r.0 as f64).collect();
        let es: Vec<f64> = usable.iter().map(|r| r.1).collect();
        let fit = loglog_slope(&ns, &es).ok();
        ReliabilityReport { p, rows, fit, infinite_ratio_count, last_ratios }
    }

    pub fn summary(&self) -> ReportSummary {
        ReportSummary {
            slope: self.fit.map(|f| f.slope),
            intercept: self.fit.map(|f| f.intercept),
            r2: self.fit.map(|f| f.r2),
            infinite_ratio_count: self.infinite_ratio_count,
        }
    }

    /// CSV `n,E,log_n,log_E`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["n", "E", "log_n", "log_E"])?;
        for (n, e) in &self.rows {
            w.write_record([
                n.to_string(),
                e.to_string(),
                (*n as f64).ln().to_string(),
                e.ln().to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// One-line JSON `{slope, intercept, r2, infinite_ratio_count}`.
    pub fn summary_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&self.summary())?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn band(means: Vec<f64>, half: Vec<f64>) -> PredictionBand {
        let n = means.len();
        PredictionBand {
            points: (0..n).map(|i| vec![i as f64 / n.max(1) as f64]).collect(),
            means,
            half_widths: half,
            powers: vec![0.5; n],
            sigma2: 1.0,
            quantile: 1.96,
        }
    }

    #[test]
    fn ratio_examples() {
        let p4 = Exponent::Finite(4.0);
        let b = band(vec![1.0, 2.0, 3.0], vec![0.5, 0.5, 0.5]);
        assert_eq!(ratio_metric(&[1.0, 2.0, 3.0], &b, p4).unwrap().value, 0.0);
        // err = width = 1 everywhere
        assert_eq!(ratio_metric(&[2.0, 1.0, 4.0], &b, p4).unwrap().value, 1.0);
        let r = ratio_metric_raw(&[0.0], &[0.0], p4).unwrap();
        assert_eq!((r.value, r.infinite_count), (0.0, 0));
        let r = ratio_metric_raw(&[0.1, 0.0], &[0.0, 1.0], p4).unwrap();
        assert!(r.value.is_infinite() && r.infinite_count == 1);
        assert!(matches!(ratio_metric_raw(&[1.0], &[1.0, 2.0], p4), Err(Error::Input(_))));
        let r = ratio_metric_raw(&[1.0, 3.0], &[2.0, 2.0], Exponent::Infinity).unwrap();
        assert_eq!(r.value, 1.5);
    }

    #[test]
    fn coverage_examples() {
        let b = band(vec![0.0, 0.0], vec![1.0, 1.0]);
        assert_eq!(coverage_rate(&[0.5, -1.0], &b).unwrap(), 1.0);
        assert_eq!(coverage_rate(&[2.0, -3.0], &b).unwrap(), 0.0);
        assert_eq!(acp(&[1.0, 0.0], &band(vec![1.0, 0.0], vec![0.0, 0.0])).unwrap(), 1.0);
    }

    #[test]
    fn slope_examples() {
        let ns = [10.0, 20.0, 40.0, 80.0];
        let f = loglog_slope(&ns, &ns).unwrap();
        assert!((f.slope - 1.0).abs() < 1e-12 && (f.r2 - 1.0).abs() < 1e-12);
        let f = loglog_slope(&ns, &[2.0; 4]).unwrap();
        assert!(f.slope.abs() < 1e-12);
        let es: Vec<f64> = ns.iter().map(|n| 3.0 * n * n).collect();
        let f = loglog_slope(&ns, &es).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-12 && (f.intercept - 3f64.ln()).abs() < 1e-12);
        assert!(loglog_slope(&ns, &[1.0, 0.0, 1.0, 1.0]).is_err());
        assert!(loglog_slope(&ns[..2], &ns[..2]).is_err());
    }

    #[test]
    fn exponent_parsing() {
        assert_eq!("inf".parse::<Exponent>().unwrap(), Exponent::Infinity);
        assert_eq!("4".parse::<Exponent>().unwrap(), Exponent::Finite(4.0));
        assert!("0.5".parse::<Exponent>().is_err());
        let e: Exponent = serde_json::from_str("\"inf\"").unwrap();
        assert_eq!(e, Exponent::Infinity);
        let e: Exponent = serde_json::from_str("2.0").unwrap();
        assert_eq!(e, Exponent::Finite(2.0));
        assert_eq!(serde_json::to_string(&Exponent::Infinity).unwrap(), "\"inf\"");
    }

    #[test]
    fn report_filters_non_finite_rows() {
        let rows = vec![(40, 1.0), (20, 0.5), (80, f64::INFINITY), (160, 4.0)];
        let rep = ReliabilityReport::new(Exponent::Finite(4.0), rows, 1, vec![]);
        assert_eq!(rep.rows[0].0, 20);
        let fit = rep.fit.unwrap();
        assert!(fit.slope > 0.0);
        let mut buf = Vec::new();
        rep.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("n,E,log_n,log_E\n20,0.5,"));
        let json = rep.summary_json().unwrap();
        assert!(json.contains("\"infinite_ratio_count\":1") && json.contains("\"slope\""));
    }

    /// Nested grid search over (level at the mean of x, slope), shrinking
    /// the window around the best node each round.
    fn brute_force_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
        let mx = x.iter().sum::<f64>() / x.len() as f64;
        let sse = |c: f64, b: f64| x.iter().zip(y).map(|(u, v)| (v - c - b * (u - mx)).powi(2)).sum::<f64>();
        let (mut c, mut b, mut half) = (0.0, 0.0, 20.0);
        while half > 1e-10 {
            let spacing = half / 20.0;
            let mut best = (sse(c, b), c, b);
            for i in -20..=20 {
                for j in -20..=20 {
                    let (ci, bj) = (c + i as f64 * spacing, b + j as f64 * spacing);
                    let v = sse(ci, bj);
                    if v < best.0 {
                        best = (v, ci, bj);
                    }
                }
            }
            c = best.1;
            b = best.2;
            half = 2.0 * spacing;
        }
        (c - b * mx, b)
    }

    proptest! {
        #[test]
        fn scale_equivariance(errs in prop::collection::vec(-5.0f64..5.0, 1..30),
                              k in 0.1f64..10.0, p in 2.0f64..8.0) {
            let widths: Vec<f64> = errs.iter().enumerate().map(|(i, _)| 0.1 + i as f64 * 0.05).collect();
            let scaled: Vec<f64> = widths.iter().map(|w| w * k).collect();
            let a = ratio_metric_raw(&errs, &widths, Exponent::Finite(p)).unwrap().value;
            let b = ratio_metric_raw(&errs, &scaled, Exponent::Finite(p)).unwrap().value;
            prop_assert!((b - a * k.powf(-p)).abs() <= 1e-10 * a.max(1e-300) * k.powf(-p).max(1.0));
        }

        #[test]
        fn power_mean_inequality(errs in prop::collection::vec(-5.0f64..5.0, 1..30),
                                 widths_seed in prop::collection::vec(0.01f64..3.0, 30),
                                 p in 2.0f64..10.0) {
            let widths = &widths_seed[..errs.len()];
            let sup = ratio_metric_raw(&errs, widths, Exponent::Infinity).unwrap().value;
            let lp = ratio_metric_raw(&errs, widths, Exponent::Finite(p)).unwrap().value.powf(1.0 / p);
            prop_assert!(sup >= lp * (1.0 - 1e-12));
            prop_assert!(lp >= 0.0);
        }

        #[test]
        fn coverage_monotone_in_width(truth in prop::collection::vec(-3.0f64..3.0, 1..40),
                                      half in prop::collection::vec(0.0f64..2.0, 40),
                                      grow in prop::collection::vec(0.0f64..1.0, 40)) {
            let n = truth.len();
            let narrow = band(vec![0.0; n], half[..n].to_vec());
            let wide = band(vec![0.0; n], half[..n].iter().zip(&grow).map(|(h, g)| h + g).collect());
            prop_assert!(coverage_rate(&truth, &wide).unwrap() >= coverage_rate(&truth, &narrow).unwrap());
        }
    }

    #[test]
    fn slope_matches_brute_force_minimizer() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        for _ in 0..5 {
            let ns: Vec<f64> = (1..=8).map(|k| 20.0 * k as f64).collect();
            let es: Vec<f64> = ns.iter().map(|n| n.powf(1.3) * (0.5 + rng.random::<f64>())).collect();
            let fit = loglog_slope(&ns, &es).unwrap();
            let x: Vec<f64> = ns.iter().map(|v| v.ln()).collect();
            let y: Vec<f64> = es.iter().map(|v| v.ln()).collect();
            let (a, b) = brute_force_fit(&x, &y);
            assert!((fit.slope - b).abs() < 1e-6, "{} vs {b}", fit.slope);
            assert!((fit.intercept - a).abs() < 1e-6);
        }
    }
}
