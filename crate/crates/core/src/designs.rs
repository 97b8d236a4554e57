//! Measurement designs on `Ω = [0,1]^d` and their geometric summaries.

use std::cmp::Ordering;
use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::euclidean;

const PRIMES: [u32; 10] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29];

/// Default lattice density per axis for the fill distance when `d ≥ 2`.
pub const DEFAULT_FILL_LATTICE: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DesignKind {
    Grid,
    /// Cell midpoints `(k + 1/2)/m`, no endpoints.
    MidpointGrid,
    Halton,
    UniformRandom { seed: u64 },
    Custom,
}

/// `n` pairwise distinct points in `[0,1]^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    points: Vec<Vec<f64>>,
    dim: usize,
    kind: DesignKind,
}

impl Design {
    /// Validates coordinates, dimensions and distinctness.
    pub fn new(points: Vec<Vec<f64>>, kind: DesignKind) -> Result<Self> {
        let dim = points
            .first()
            .map(Vec::len)
            .ok_or_else(|| Error::input("a design needs at least one point"))?;
        if dim == 0 {
            return Err(Error::input("points must have at least one coordinate"));
        }
        for (i, p) in points.iter().enumerate() {
            if p.len() != dim {
                return Err(Error::Shape(format!(
                    "point {i} has {} coordinates, expected {dim}",
                    p.len()
                )));
            }
            if let Some(c) = p.iter().find(|c| !(0.0..=1.0).contains(*c)) {
                return Err(Error::input(format!("point {i} has coordinate {c} outside [0,1]")));
            }
        }
        if let Some((i, j)) = first_duplicate(&points) {
            return Err(Error::input(format!("points {i} and {j} coincide")));
        }
        Ok(Design { points, dim, kind })
    }

    /// One-dimensional design from scalar locations.
    pub fn from_scalars(xs: &[f64]) -> Result<Self> {
        Design::new(xs.iter().map(|&x| vec![x]).collect(), DesignKind::Custom)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> &DesignKind {
        &self.kind
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i]
    }

    /// Union with extra points, re-validated.
    pub fn extended(&self, extra: &[Vec<f64>]) -> Result<Design> {
        let mut points = self.points.clone();
        points.extend_from_slice(extra);
        Design::new(points, DesignKind::Custom)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        write_points_csv(&self.points, self.dim, writer)
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Design> {
        Design::new(read_points_csv(reader)?, DesignKind::Custom)
    }
}

fn lexicographic(a: &[f64], b: &[f64]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

fn first_duplicate(points: &[Vec<f64>]) -> Option<(usize, usize)> {
    let mut idx: Vec<usize> = (0..points.len()).collect();
    idx.sort_by(|&a, &b| lexicographic(&points[a], &points[b]));
    idx.windows(2)
        .find(|w| points[w[0]] == points[w[1]])
        .map(|w| (w[0].min(w[1]), w[0].max(w[1])))
}

/// Header `x1,x2,...`, one point per row.
pub fn write_points_csv<W: Write>(points: &[Vec<f64>], dim: usize, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record((1..=dim).map(|k| format!("x{k}")))?;
    for p in points {
        w.write_record(p.iter().map(|c| c.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_points_csv<R: Read>(reader: R) -> Result<Vec<Vec<f64>>> {
    let mut r = csv::Reader::from_reader(reader);
    let dim = r.headers()?.len();
    let mut points = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        if rec.len() != dim {
            return Err(Error::Shape(format!("row with {} fields, header has {dim}", rec.len())));
        }
        let p = rec
            .iter()
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::input(format!("cannot parse coordinate `{s}`")))
            })
            .collect::<Result<Vec<f64>>>()?;
        points.push(p);
    }
    Ok(points)
}

fn integer_root(n: usize, d: usize) -> Option<usize> {
    let guess = (n as f64).powf(1.0 / d as f64).round() as usize;
    (guess.saturating_sub(1)..=guess + 1).find(|m| m.checked_pow(d as u32) == Some(n))
}

/// Equispaced lattice including the endpoints: `k/(m-1)` per axis, `n = m^d`.
pub fn grid_design(n: usize, d: usize) -> Result<Design> {
    lattice(n, d, |k, m| k as f64 / (m - 1) as f64, DesignKind::Grid)
}

/// Lattice of cell midpoints `(k + 1/2)/m` per axis, `n = m^d`.
pub fn midpoint_grid_design(n: usize, d: usize) -> Result<Design> {
    lattice(n, d, |k, m| (k as f64 + 0.5) / m as f64, DesignKind::MidpointGrid)
}

fn lattice(n: usize, d: usize, coord: fn(usize, usize) -> f64, kind: DesignKind) -> Result<Design> {
    if d == 0 {
        return Err(Error::param("dimension must be positive"));
    }
    if n < 2 {
        return Err(Error::param(format!("a grid needs n >= 2, got {n}")));
    }
    let m = integer_root(n, d)
        .ok_or_else(|| Error::Shape(format!("{n} is not a perfect {d}-th power")))?;
    if m < 2 {
        return Err(Error::Shape(format!("{n} points give fewer than 2 per axis in d={d}")));
    }
    let axis: Vec<f64> = (0..m).map(|k| coord(k, m)).collect();
    let mut points = Vec::with_capacity(n);
    for flat in 0..n {
        let mut rest = flat;
        let mut p = vec![0.0; d];
        for c in p.iter_mut().rev() {
            *c = axis[rest % m];
            rest /= m;
        }
        points.push(p);
    }
    Design::new(points, kind)
}

fn radical_inverse(mut index: u64, base: u32) -> f64 {
    let b = base as f64;
    let mut inv = 1.0 / b;
    let mut out = 0.0;
    while index > 0 {
        out += (index % base as u64) as f64 * inv;
        index /= base as u64;
        inv /= b;
    }
    out
}

/// First `n` Halton points (indices `1..=n`) in the first `d` prime bases.
pub fn halton_points(n: usize, d: usize) -> Result<Vec<Vec<f64>>> {
    if d == 0 || d > PRIMES.len() {
        return Err(Error::param(format!(
            "Halton dimension must be in 1..={}, got {d}",
            PRIMES.len()
        )));
    }
    Ok((1..=n as u64)
        .map(|i| PRIMES[..d].iter().map(|&b| radical_inverse(i, b)).collect())
        .collect())
}

pub fn halton_design(n: usize, d: usize) -> Result<Design> {
    Design::new(halton_points(n, d)?, DesignKind::Halton)
}

/// Draws `n` distinct points coordinate by coordinate from `next`,
/// redrawing any point that exactly repeats an earlier one.
pub(crate) fn sample_distinct(n: usize, d: usize, mut next: impl FnMut() -> f64) -> Vec<Vec<f64>> {
    let mut seen: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut sorted: Vec<Vec<f64>> = Vec::with_capacity(n);
    while seen.len() < n {
        let p: Vec<f64> = (0..d).map(|_| next()).collect();
        match sorted.binary_search_by(|q| lexicographic(q, &p)) {
            Ok(_) => continue,
            Err(pos) => sorted.insert(pos, p.clone()),
        }
        seen.push(p);
    }
    seen
}

/// I.i.d. uniform design, deterministic in `seed`.
pub fn uniform_random_design(n: usize, d: usize, seed: u64) -> Result<Design> {
    if n == 0 || d == 0 {
        return Err(Error::param("uniform design needs n >= 1 and d >= 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points = sample_distinct(n, d, || rng.random::<f64>());
    Design::new(points, DesignKind::UniformRandom { seed })
}

/// `h = sup_{x∈Ω} min_j ‖x − x_j‖`. Exact for `d = 1`; for `d ≥ 2` a lower
/// bound from a lattice of `200^d` (d = 2) or `30^d` (d > 2) candidates.
pub fn fill_distance(design: &Design) -> f64 {
    if design.dim() == 1 {
        let mut xs: Vec<f64> = design.points().iter().map(|p| p[0]).collect();
        xs.sort_by(f64::total_cmp);
        let interior = xs.windows(2).map(|w| 0.5 * (w[1] - w[0])).fold(0.0, f64::max);
        interior.max(xs[0]).max(1.0 - xs[xs.len() - 1])
    } else {
        let m = if design.dim() == 2 { DEFAULT_FILL_LATTICE } else { 30 };
        fill_distance_on_lattice(design, m)
    }
}

/// Lower bound for the fill distance from the `m^d` lattice `k/(m-1)`.
pub fn fill_distance_on_lattice(design: &Design, m: usize) -> f64 {
    let d = design.dim();
    let m = m.max(2);
    let total = m.pow(d as u32);
    let mut candidate = vec![0.0; d];
    let mut worst: f64 = 0.0;
    for flat in 0..total {
        let mut rest = flat;
        for c in candidate.iter_mut() {
            *c = (rest % m) as f64 / (m - 1) as f64;
            rest /= m;
        }
        let nearest = design
            .points()
            .iter()
            .map(|p| euclidean(&candidate, p))
            .fold(f64::INFINITY, f64::min);
        worst = worst.max(nearest);
    }
    worst
}

/// `q = min_{j≠k} ‖x_j − x_k‖ / 2`.
pub fn separation_radius(design: &Design) -> Result<f64> {
    let n = design.len();
    if n < 2 {
        return Err(Error::Domain("separation radius needs at least 2 points".into()));
    }
    if design.dim() == 1 {
        let mut xs: Vec<f64> = design.points().iter().map(|p| p[0]).collect();
        xs.sort_by(f64::total_cmp);
        return Ok(0.5 * xs.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min));
    }
    let pts = design.points();
    let mut best = f64::INFINITY;
    for i in 0..n {
        for j in (i + 1)..n {
            best = best.min(euclidean(&pts[i], &pts[j]));
        }
    }
    Ok(0.5 * best)
}

/// `h / q`, bounded along quasi-uniform sequences.
pub fn quasi_uniformity_ratio(design: &Design) -> Result<f64> {
    Ok(fill_distance(design) / separation_radius(design)?)
}
