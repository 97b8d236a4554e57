//! Python bindings. The extension module is `krigrel_py`.
//!
//! Point sets are accepted either as a flat sequence of floats (one-dimensional
//! points) or as a sequence of coordinate sequences.

use pyo3::create_exception;
use pyo3::exceptions::{PyArithmeticError, PyOSError, PyValueError};
use pyo3::prelude::*;

use krigrel::designs::{
    fill_distance, grid_design, halton_design, midpoint_grid_design, separation_radius, uniform_random_design,
};
use krigrel::experiments::{
    run_deterministic_experiment, run_gp_baseline, run_stochastic_experiment, test_function_gramacy,
    ExperimentConfig,
};
use krigrel::extended::ExactPowerModel;
use krigrel::reliability::{coverage_rate, loglog_slope, ratio_metric, ratio_metric_raw};
use krigrel::{DesignKind, Error, Exponent, FitConfig, FittedModel, KernelSpec, MuMode, PredictionBand, Sigma2Mode};

create_exception!(krigrel_py, NumericalError, PyArithmeticError, "Factorization or power evaluation failed.");

fn to_py(e: Error) -> PyErr {
    match e {
        e if e.is_numerical() => NumericalError::new_err(e.to_string()),
        Error::Io(io) => PyOSError::new_err(io.to_string()),
        e => PyValueError::new_err(e.to_string()),
    }
}

fn points_arg(obj: &Bound<'_, PyAny>) -> PyResult<Vec<Vec<f64>>> {
    if let Ok(p) = obj.extract::<Vec<Vec<f64>>>() {
        return Ok(p);
    }
    obj.extract::<Vec<f64>>()
        .map(|xs| xs.into_iter().map(|x| vec![x]).collect())
        .map_err(|_| PyValueError::new_err("points must be a sequence of floats or of coordinate sequences"))
}

fn exponent_arg(obj: &Bound<'_, PyAny>) -> PyResult<Exponent> {
    let p = match obj.extract::<f64>() {
        Ok(v) if v.is_infinite() && v > 0.0 => Exponent::Infinity,
        Ok(v) => Exponent::Finite(v),
        Err(_) => obj.extract::<String>()?.parse::<Exponent>().map_err(to_py)?,
    };
    p.validate().map_err(to_py)?;
    Ok(p)
}

fn sigma2_arg(mode: &str, value: Option<f64>) -> PyResult<Sigma2Mode> {
    match (mode, value) {
        ("mle", None) => Ok(Sigma2Mode::MleScaled),
        ("unscaled", None) => Ok(Sigma2Mode::Unscaled),
        ("constant", Some(value)) => Ok(Sigma2Mode::Constant { value }),
        ("constant", None) => Err(PyValueError::new_err("sigma2_mode='constant' needs sigma2_value")),
        ("mle" | "unscaled", Some(_)) => Err(PyValueError::new_err("sigma2_value needs sigma2_mode='constant'")),
        (other, _) => Err(PyValueError::new_err(format!(
            "sigma2_mode must be 'mle', 'constant' or 'unscaled', got {other:?}"
        ))),
    }
}

fn json_to_py<'py>(py: Python<'py>, text: &str) -> PyResult<Bound<'py, PyAny>> {
    py.import("json")?.call_method1("loads", (text,))
}

/// Matérn or generalized Wendland correlation function.
#[pyclass(module = "krigrel_py", frozen, eq, skip_from_py_object)]
#[derive(Clone, PartialEq)]
pub struct Kernel {
    pub spec: KernelSpec,
}

#[pymethods]
impl Kernel {
    #[staticmethod]
    #[pyo3(signature = (nu, dim = 1))]
    fn matern(nu: f64, dim: usize) -> PyResult<Self> {
        Ok(Kernel { spec: KernelSpec::matern(nu, dim).map_err(to_py)? })
    }

    #[staticmethod]
    #[pyo3(signature = (kappa, mu_gw, dim = 1))]
    fn wendland(kappa: f64, mu_gw: f64, dim: usize) -> PyResult<Self> {
        Ok(Kernel { spec: KernelSpec::generalized_wendland(kappa, mu_gw, dim).map_err(to_py)? })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let spec: KernelSpec = serde_json::from_str(text).map_err(|e| PyValueError::new_err(e.to_string()))?;
        spec.validate().map_err(to_py)?;
        Ok(Kernel { spec })
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.spec).map_err(|e| PyValueError::new_err(e.to_string()))
    }

    #[getter]
    fn dim(&self) -> usize {
        self.spec.dim()
    }

    #[getter]
    fn sobolev_order(&self) -> f64 {
        self.spec.sobolev_order()
    }

    /// Correlation at lag `r`, or at each lag of a sequence.
    fn correlation<'py>(&self, py: Python<'py>, r: &Bound<'py, PyAny>) -> PyResult<Bound<'py, PyAny>> {
        if let Ok(x) = r.extract::<f64>() {
            return Ok(self.spec.correlation(x).map_err(to_py)?.into_pyobject(py)?.into_any());
        }
        let rs: Vec<f64> = r.extract()?;
        let out = rs.iter().map(|&x| self.spec.correlation(x)).collect::<krigrel::Result<Vec<f64>>>().map_err(to_py)?;
        Ok(out.into_pyobject(py)?.into_any())
    }

    fn between(&self, a: Vec<f64>, b: Vec<f64>) -> PyResult<f64> {
        if a.len() != self.spec.dim() || b.len() != self.spec.dim() {
            return Err(PyValueError::new_err(format!("points must have {} coordinates", self.spec.dim())));
        }
        Ok(self.spec.between(&a, &b))
    }

    fn __repr__(&self) -> String {
        match self.spec {
            KernelSpec::Matern { nu, dim } => format!("Kernel.matern(nu={nu}, dim={dim})"),
            KernelSpec::GeneralizedWendland { kappa, mu_gw, dim } => {
                format!("Kernel.wendland(kappa={kappa}, mu_gw={mu_gw}, dim={dim})")
            }
        }
    }
}

/// Finite set of distinct design points.
#[pyclass(module = "krigrel_py", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct Design {
    pub inner: krigrel::Design,
}

#[pymethods]
impl Design {
    #[new]
    fn new(points: &Bound<'_, PyAny>) -> PyResult<Self> {
        Ok(Design { inner: krigrel::Design::new(points_arg(points)?, DesignKind::Custom).map_err(to_py)? })
    }

    /// Grid with endpoints, or cell midpoints when `endpoints=False`.
    #[staticmethod]
    #[pyo3(signature = (n, dim = 1, endpoints = true))]
    fn grid(n: usize, dim: usize, endpoints: bool) -> PyResult<Self> {
        let inner = if endpoints { grid_design(n, dim) } else { midpoint_grid_design(n, dim) };
        Ok(Design { inner: inner.map_err(to_py)? })
    }

    #[staticmethod]
    #[pyo3(signature = (n, dim = 1))]
    fn halton(n: usize, dim: usize) -> PyResult<Self> {
        Ok(Design { inner: halton_design(n, dim).map_err(to_py)? })
    }

    #[staticmethod]
    #[pyo3(signature = (n, dim = 1, seed = 0))]
    fn uniform(n: usize, dim: usize, seed: u64) -> PyResult<Self> {
        Ok(Design { inner: uniform_random_design(n, dim, seed).map_err(to_py)? })
    }

    #[getter]
    fn points(&self) -> Vec<Vec<f64>> {
        self.inner.points().to_vec()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn fill_distance(&self) -> f64 {
        fill_distance(&self.inner)
    }

    fn separation_radius(&self) -> PyResult<f64> {
        separation_radius(&self.inner).map_err(to_py)
    }

    fn __repr__(&self) -> String {
        format!("Design(n={}, dim={})", self.inner.len(), self.inner.dim())
    }
}

/// Pointwise band: mean, half-width and squared power at each point.
#[pyclass(module = "krigrel_py", frozen)]
pub struct Band {
    pub inner: PredictionBand,
}

#[pymethods]
impl Band {
    #[getter]
    fn points(&self) -> Vec<Vec<f64>> {
        self.inner.points.clone()
    }

    #[getter]
    fn means(&self) -> Vec<f64> {
        self.inner.means.clone()
    }

    #[getter]
    fn half_widths(&self) -> Vec<f64> {
        self.inner.half_widths.clone()
    }

    #[getter]
    fn powers(&self) -> Vec<f64> {
        self.inner.powers.clone()
    }

    #[getter]
    fn lo(&self) -> Vec<f64> {
        (0..self.inner.len()).map(|i| self.inner.lo(i)).collect()
    }

    #[getter]
    fn hi(&self) -> Vec<f64> {
        (0..self.inner.len()).map(|i| self.inner.hi(i)).collect()
    }

    #[getter]
    fn sigma2(&self) -> f64 {
        self.inner.sigma2
    }

    #[getter]
    fn quantile(&self) -> f64 {
        self.inner.quantile
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn to_csv(&self) -> PyResult<String> {
        let mut buf = Vec::new();
        self.inner.write_csv(&mut buf).map_err(to_py)?;
        String::from_utf8(buf).map_err(|e| PyValueError::new_err(e.to_string()))
    }
}

/// Kriging model fitted to observations on a design.
#[pyclass(module = "krigrel_py", frozen)]
pub struct Model {
    pub inner: FittedModel,
}

#[pymethods]
impl Model {
    #[getter]
    fn mu_hat(&self) -> f64 {
        self.inner.mu_hat()
    }

    #[getter]
    fn jitter_used(&self) -> f64 {
        self.inner.jitter_used()
    }

    #[getter]
    fn sigma2_hat(&self) -> f64 {
        self.inner.sigma2_hat()
    }

    #[getter]
    fn quantile(&self) -> f64 {
        self.inner.quantile()
    }

    #[getter]
    fn dual_weights(&self) -> Vec<f64> {
        self.inner.dual_weights().to_vec()
    }

    #[getter]
    fn kernel(&self) -> Kernel {
        Kernel { spec: *self.inner.kernel() }
    }

    #[getter]
    fn design(&self) -> Design {
        Design { inner: self.inner.design().clone() }
    }

    fn predict(&self, points: &Bound<'_, PyAny>) -> PyResult<Vec<f64>> {
        self.inner.predict_means(&points_arg(points)?).map_err(to_py)
    }

    /// Squared power function at each point.
    fn power(&self, points: &Bound<'_, PyAny>) -> PyResult<Vec<f64>> {
        Ok(self.inner.evaluate(&points_arg(points)?).map_err(to_py)?.powers)
    }

    /// Supremum of the power function over `probes` (default probe set if omitted).
    #[pyo3(signature = (probes = None))]
    fn sup_power(&self, probes: Option<&Bound<'_, PyAny>>) -> PyResult<f64> {
        let probes = match probes {
            Some(p) => points_arg(p)?,
            None => self.inner.default_probes().map_err(to_py)?,
        };
        self.inner.sup_power(&probes).map_err(to_py)
    }

    #[pyo3(signature = (points, sigma2_mode = None, sigma2_value = None))]
    fn confidence_band(
        &self,
        points: &Bound<'_, PyAny>,
        sigma2_mode: Option<&str>,
        sigma2_value: Option<f64>,
    ) -> PyResult<Band> {
        let points = points_arg(points)?;
        let band = match sigma2_mode {
            None if sigma2_value.is_some() => return Err(PyValueError::new_err("sigma2_value needs sigma2_mode")),
            None => self.inner.confidence_band(&points),
            Some(m) => self.inner.confidence_band_with(&points, sigma2_arg(m, sigma2_value)?),
        };
        Ok(Band { inner: band.map_err(to_py)? })
    }

    fn __repr__(&self) -> String {
        format!(
            "Model(n={}, mu_hat={}, sigma2_hat={}, jitter_used={})",
            self.inner.design().len(),
            self.inner.mu_hat(),
            self.inner.sigma2_hat(),
            self.inner.jitter_used()
        )
    }
}

/// Fit a kriging model. `mu_mode` is `"zero"` or `"power_law"` (then `c` and
/// `alpha` give the regularization `c * n**alpha`).
#[pyfunction]
#[pyo3(signature = (design, y, kernel, mu_mode = "zero", c = None, alpha = None, sigma2_mode = "mle", sigma2_value = None, beta = 0.05, jitter = 1e-8))]
#[allow(clippy::too_many_arguments)]
fn fit(
    design: &Design,
    y: Vec<f64>,
    kernel: &Kernel,
    mu_mode: &str,
    c: Option<f64>,
    alpha: Option<f64>,
    sigma2_mode: &str,
    sigma2_value: Option<f64>,
    beta: f64,
    jitter: f64,
) -> PyResult<Model> {
    let mu_mode = match (mu_mode, c, alpha) {
        ("zero", None, None) => MuMode::Zero,
        ("power_law", Some(c), Some(alpha)) => MuMode::PowerLaw { c, alpha },
        ("zero", _, _) => return Err(PyValueError::new_err("c and alpha need mu_mode='power_law'")),
        ("power_law", _, _) => return Err(PyValueError::new_err("mu_mode='power_law' needs c and alpha")),
        (other, _, _) => {
            return Err(PyValueError::new_err(format!("mu_mode must be 'zero' or 'power_law', got {other:?}")))
        }
    };
    let config = FitConfig { mu_mode, sigma2_mode: sigma2_arg(sigma2_mode, sigma2_value)?, beta, jitter };
    config.validate().map_err(to_py)?;
    let inner = krigrel::gp::fit(&design.inner, &y, &kernel.spec, &config).map_err(to_py)?;
    Ok(Model { inner })
}

/// Supremum of the power function computed in double-double arithmetic
/// without jitter (Matérn kernels with integer or half-integer `nu - dim/2`).
#[pyfunction]
#[pyo3(signature = (design, kernel, probes = None))]
fn exact_sup_power(design: &Design, kernel: &Kernel, probes: Option<&Bound<'_, PyAny>>) -> PyResult<f64> {
    let model = ExactPowerModel::new(&design.inner, &kernel.spec).map_err(to_py)?;
    let probes = match probes {
        Some(p) => points_arg(p)?,
        None => krigrel::gp::default_probes(&design.inner).map_err(to_py)?,
    };
    model.sup_power(&probes).map_err(to_py)
}

/// Ratio metric of `truth` against a band; returns `(value, infinite_count)`.
/// `p` is a number `>= 2`, `float("inf")` or `"inf"`.
#[pyfunction]
#[pyo3(signature = (truth, band, p = None))]
fn ratio_metric_band(truth: Vec<f64>, band: &Band, p: Option<&Bound<'_, PyAny>>) -> PyResult<(f64, usize)> {
    let p = p.map(exponent_arg).transpose()?.unwrap_or(Exponent::Finite(4.0));
    let m = ratio_metric(&truth, &band.inner, p).map_err(to_py)?;
    Ok((m.value, m.infinite_count))
}

/// Ratio metric from raw errors and half-widths.
#[pyfunction]
#[pyo3(name = "ratio_metric", signature = (errors, widths, p = None))]
fn ratio_metric_py(errors: Vec<f64>, widths: Vec<f64>, p: Option<&Bound<'_, PyAny>>) -> PyResult<(f64, usize)> {
    let p = p.map(exponent_arg).transpose()?.unwrap_or(Exponent::Finite(4.0));
    let m = ratio_metric_raw(&errors, &widths, p).map_err(to_py)?;
    Ok((m.value, m.infinite_count))
}

#[pyfunction]
fn coverage(truth: Vec<f64>, band: &Band) -> PyResult<f64> {
    coverage_rate(&truth, &band.inner).map_err(to_py)
}

/// Least-squares fit of `log E` on `log n`: `(slope, intercept, r2)`.
#[pyfunction]
fn loglog_fit(ns: Vec<f64>, es: Vec<f64>) -> PyResult<(f64, f64, f64)> {
    let f = loglog_slope(&ns, &es).map_err(to_py)?;
    Ok((f.slope, f.intercept, f.r2))
}

#[pyfunction]
fn gramacy(x: f64) -> f64 {
    test_function_gramacy(x)
}

/// Run `"deterministic"`, `"stochastic"` or `"gp_baseline"`. `config` is a
/// dict or JSON string overlaid on the study's preset. Returns the summary
/// dict; with `out`, the full output bundle is written there as well.
#[pyfunction]
#[pyo3(signature = (kind, config = None, seed = None, out = None, overwrite = false))]
fn run_experiment<'py>(
    py: Python<'py>,
    kind: &str,
    config: Option<&Bound<'py, PyAny>>,
    seed: Option<u64>,
    out: Option<std::path::PathBuf>,
    overwrite: bool,
) -> PyResult<Bound<'py, PyAny>> {
    let preset = match kind {
        "deterministic" => ExperimentConfig::default(),
        "stochastic" => ExperimentConfig::stochastic_preset(),
        "gp_baseline" | "gp-baseline" => ExperimentConfig::gp_baseline_preset(),
        other => {
            return Err(PyValueError::new_err(format!(
                "kind must be 'deterministic', 'stochastic' or 'gp_baseline', got {other:?}"
            )))
        }
    };
    let mut cfg = match config {
        None => preset,
        Some(c) => {
            let text = match c.extract::<String>() {
                Ok(s) => s,
                Err(_) => py.import("json")?.call_method1("dumps", (c,))?.extract()?,
            };
            let value = serde_json::from_str(&text).map_err(|e| PyValueError::new_err(e.to_string()))?;
            ExperimentConfig::from_json_value(value, preset).map_err(to_py)?
        }
    };
    if let Some(s) = seed {
        cfg.master_seed = s;
    }
    cfg.validate().map_err(to_py)?;
    let bundle = py
        .detach(|| match kind {
            "deterministic" => run_deterministic_experiment(&cfg)?.to_bundle(),
            "stochastic" => run_stochastic_experiment(&cfg)?.to_bundle(),
            _ => run_gp_baseline(&cfg)?.to_bundle(),
        })
        .map_err(to_py)?;
    if let Some(dir) = out {
        bundle.write_to(&dir, overwrite).map_err(to_py)?;
    }
    let summary = bundle.get("summary.json").ok_or_else(|| PyValueError::new_err("bundle without summary"))?;
    json_to_py(py, std::str::from_utf8(summary).map_err(|e| PyValueError::new_err(e.to_string()))?)
}

/// Registers every class and function on `m`.
pub fn register(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Kernel>()?;
    m.add_class::<Design>()?;
    m.add_class::<Model>()?;
    m.add_class::<Band>()?;
    m.add("NumericalError", m.py().get_type::<NumericalError>())?;
    m.add_function(wrap_pyfunction!(fit, m)?)?;
    m.add_function(wrap_pyfunction!(exact_sup_power, m)?)?;
    m.add_function(wrap_pyfunction!(ratio_metric_band, m)?)?;
    m.add_function(wrap_pyfunction!(ratio_metric_py, m)?)?;
    m.add_function(wrap_pyfunction!(coverage, m)?)?;
    m.add_function(wrap_pyfunction!(loglog_fit, m)?)?;
    m.add_function(wrap_pyfunction!(gramacy, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}

#[pymodule]
fn krigrel_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    register(m)
}
