//! CSV readers and writers for the command-line file formats.

use std::path::Path;

use krigrel::{Design, DesignKind, Error, PredictionBand, Result};

fn reader(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    let file = std::fs::File::open(path)
        .map_err(|e| Error::Input(format!("cannot open {}: {e}", path.display())))?;
    Ok(csv::Reader::from_reader(file))
}

fn parse(s: &str, what: &str) -> Result<f64> {
    s.trim().parse::<f64>().map_err(|_| Error::Input(format!("cannot parse {what} `{s}`")))
}

fn column(headers: &csv::StringRecord, name: &str, path: &Path) -> Result<usize> {
    headers
        .iter()
        .position(|h| h.trim() == name)
        .ok_or_else(|| Error::Input(format!("{} has no `{name}` column", path.display())))
}

/// Coordinates in every column except `y`, observations in `y`.
pub fn read_data(path: &Path) -> Result<(Design, Vec<f64>)> {
    let mut r = reader(path)?;
    let headers = r.headers()?.clone();
    let yi = column(&headers, "y", path)?;
    if headers.len() < 2 {
        return Err(Error::Input(format!("{} needs coordinate columns besides `y`", path.display())));
    }
    let mut points = Vec::new();
    let mut y = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let mut p = Vec::with_capacity(headers.len() - 1);
        for (i, field) in rec.iter().enumerate() {
            if i == yi {
                y.push(parse(field, "observation")?);
            } else {
                p.push(parse(field, "coordinate")?);
            }
        }
        points.push(p);
    }
    if points.is_empty() {
        return Err(Error::Input(format!("{} has no data rows", path.display())));
    }
    Ok((Design::new(points, DesignKind::Custom)?, y))
}

pub fn read_points(path: &Path) -> Result<Vec<Vec<f64>>> {
    let file = std::fs::File::open(path)
        .map_err(|e| Error::Input(format!("cannot open {}: {e}", path.display())))?;
    let points = krigrel::designs::read_points_csv(file)?;
    if points.is_empty() {
        return Err(Error::Input(format!("{} has no points", path.display())));
    }
    Ok(points)
}

pub fn read_design(path: &Path) -> Result<Design> {
    Design::new(read_points(path)?, DesignKind::Custom)
}

/// The `f` column, or the only column.
pub fn read_truth(path: &Path) -> Result<Vec<f64>> {
    let mut r = reader(path)?;
    let headers = r.headers()?.clone();
    let fi = if headers.len() == 1 { 0 } else { column(&headers, "f", path)? };
    r.records().map(|rec| parse(&rec?[fi], "true value")).collect()
}

/// Columns `n,E`.
pub fn read_table(path: &Path) -> Result<Vec<(usize, f64)>> {
    let mut r = reader(path)?;
    let headers = r.headers()?.clone();
    let (ni, ei) = (column(&headers, "n", path)?, column(&headers, "E", path)?);
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let n = rec[ni].trim().parse::<usize>().map_err(|_| Error::Input(format!("cannot parse n `{}`", &rec[ni])))?;
        rows.push((n, parse(&rec[ei], "E")?));
    }
    if rows.is_empty() {
        return Err(Error::Input(format!("{} has no rows", path.display())));
    }
    Ok(rows)
}

/// Band CSV `x…,mean,lo,hi,power`; the half-width is recovered as `(hi − lo)/2`.
pub fn read_band(path: &Path) -> Result<PredictionBand> {
    let mut r = reader(path)?;
    let headers = r.headers()?.clone();
    let [mi, li, hi, pi] = ["mean", "lo", "hi", "power"].map(|c| column(&headers, c, path));
    let (mi, li, hi, pi) = (mi?, li?, hi?, pi?);
    let coords: Vec<usize> = (0..headers.len()).filter(|i| ![mi, li, hi, pi].contains(i)).collect();
    let mut band = PredictionBand {
        points: Vec::new(),
        means: Vec::new(),
        half_widths: Vec::new(),
        powers: Vec::new(),
        sigma2: f64::NAN,
        quantile: f64::NAN,
    };
    for rec in r.records() {
        let rec = rec?;
        band.points.push(coords.iter().map(|&i| parse(&rec[i], "coordinate")).collect::<Result<_>>()?);
        let (lo, up) = (parse(&rec[li], "lo")?, parse(&rec[hi], "hi")?);
        if up < lo {
            return Err(Error::Input(format!("band row with hi {up} below lo {lo}")));
        }
        band.means.push(parse(&rec[mi], "mean")?);
        band.half_widths.push(0.5 * (up - lo));
        band.powers.push(parse(&rec[pi], "power")?);
    }
    if band.is_empty() {
        return Err(Error::Input(format!("{} has no band rows", path.display())));
    }
    Ok(band)
}

/// CSV of points followed by one named value column.
pub fn points_with_values(points: &[Vec<f64>], name: &str, values: &[f64]) -> Result<Vec<u8>> {
    let dim = points.first().map_or(1, Vec::len);
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> = if dim == 1 { vec!["x".into()] } else { (1..=dim).map(|k| format!("x{k}")).collect() };
    header.push(name.into());
    w.write_record(&header)?;
    for (p, v) in points.iter().zip(values) {
        w.write_record(p.iter().chain(std::iter::once(v)).map(|c| c.to_string()))?;
    }
    w.into_inner().map_err(|e| Error::Input(format!("csv buffer: {e}")))
}
