use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use krigrel::designs::grid_design;
use krigrel::experiments::{
    run_deterministic_experiment, run_gp_baseline, run_stochastic_experiment, test_function_gramacy,
    check_output_dir, ExperimentConfig, OutputBundle,
};
use krigrel::extended::ExactPowerModel;
use krigrel::gp::{default_probes, fit};
use krigrel::reliability::{coverage_rate, ratio_metric};
use krigrel::{Design, Error, FitConfig, KernelSpec, MuMode, ReliabilityReport, Result, Sigma2Mode};

use crate::args::*;
use crate::io;
use crate::svg;

/// An error together with the parameters that produced it.
pub struct Failure {
    pub error: Error,
    pub context: String,
}

impl From<Error> for Failure {
    fn from(error: Error) -> Self {
        Failure { error, context: String::new() }
    }
}

trait Context<T> {
    fn context(self, ctx: impl FnOnce() -> String) -> std::result::Result<T, Failure>;
}

impl<T> Context<T> for Result<T> {
    fn context(self, ctx: impl FnOnce() -> String) -> std::result::Result<T, Failure> {
        self.map_err(|error| Failure { error, context: ctx() })
    }
}

type Outcome = std::result::Result<(), Failure>;

/// Kernel and fit settings shared by `kernel-eval`, `fit` and `power`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub kernel: Option<KernelSpec>,
    pub fit: Option<FitConfig>,
}

impl ModelConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let value: Value =
            serde_json::from_str(&text).map_err(|e| config_error("<file>", format!("malformed JSON: {e}")))?;
        let Value::Object(map) = value else {
            return Err(config_error("<file>", "top level must be a JSON object"));
        };
        let mut out = ModelConfig::default();
        for (key, v) in map {
            match key.as_str() {
                "kernel" => {
                    let k: KernelSpec = serde_json::from_value(v).map_err(|e| config_error("kernel", e.to_string()))?;
                    k.validate().map_err(|e| config_error("kernel", e.to_string()))?;
                    out.kernel = Some(k);
                }
                "fit" => {
                    let f: FitConfig = serde_json::from_value(v).map_err(|e| config_error("fit", e.to_string()))?;
                    f.validate().map_err(|e| config_error("fit", e.to_string()))?;
                    out.fit = Some(f);
                }
                _ => return Err(config_error(&key, "unknown key")),
            }
        }
        Ok(out)
    }
}

fn config_error(key: &str, message: impl Into<String>) -> Error {
    Error::Config { key: key.into(), message: message.into() }
}

/// Everything `predict` needs to rebuild a fitted model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub kernel: KernelSpec,
    pub fit: FitConfig,
    pub design: Vec<Vec<f64>>,
    pub y: Vec<f64>,
    pub mu_hat: f64,
    pub jitter_used: f64,
    pub sigma2_hat: f64,
    pub quantile: f64,
    pub dual_weights: Vec<f64>,
}

/// Experiment configuration from a JSON file; absent keys take the
/// [`ExperimentConfig`] defaults.
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    ExperimentConfig::load(path)
}

fn load_model_config(common: &Common) -> Result<ModelConfig> {
    common.config.as_deref().map(ModelConfig::load).transpose().map(Option::unwrap_or_default)
}

fn usage(msg: impl Into<String>) -> Error {
    Error::Parameter(msg.into())
}

/// File kernel (or the default Matérn 3.5), then the family switch, then
/// the individual parameter flags.
pub fn resolve_kernel(base: Option<KernelSpec>, flags: &KernelArgs, data_dim: Option<usize>) -> Result<KernelSpec> {
    let mut k = base.unwrap_or(KernelSpec::Matern { nu: 3.5, dim: data_dim.unwrap_or(1) });
    let dim = flags.dim.unwrap_or(k.dim());
    match (flags.family, k) {
        (Some(Family::Matern), KernelSpec::GeneralizedWendland { .. }) => k = KernelSpec::Matern { nu: 3.5, dim },
        (Some(Family::Wendland), KernelSpec::Matern { .. }) => {
            k = KernelSpec::GeneralizedWendland { kappa: 1.0, mu_gw: 3.0, dim }
        }
        _ => {}
    }
    match &mut k {
        KernelSpec::Matern { nu, dim: d } => {
            if flags.kappa.is_some() || flags.mu_gw.is_some() {
                return Err(usage("--kappa and --mu-gw apply to the wendland family only"));
            }
            *nu = flags.nu.unwrap_or(*nu);
            *d = dim;
        }
        KernelSpec::GeneralizedWendland { kappa, mu_gw, dim: d } => {
            if flags.nu.is_some() {
                return Err(usage("--nu applies to the matern family only"));
            }
            *kappa = flags.kappa.unwrap_or(*kappa);
            *mu_gw = flags.mu_gw.unwrap_or(*mu_gw);
            *d = dim;
        }
    }
    k.validate()?;
    Ok(k)
}

fn sigma2_mode(mode: Sigma2ModeArg, value: Option<f64>, base: Sigma2Mode) -> Result<Sigma2Mode> {
    Ok(match mode {
        Sigma2ModeArg::Mle => Sigma2Mode::MleScaled,
        Sigma2ModeArg::Unscaled => Sigma2Mode::Unscaled,
        Sigma2ModeArg::Constant => {
            let value = match (value, base) {
                (Some(v), _) | (None, Sigma2Mode::Constant { value: v }) => v,
                _ => return Err(usage("--sigma2-mode constant needs --sigma2-value")),
            };
            Sigma2Mode::Constant { value }
        }
    })
}

pub fn resolve_fit(base: FitConfig, flags: &FitFlags) -> Result<FitConfig> {
    let mut cfg = base;
    let power_law = match flags.mu_mode {
        Some(MuModeArg::Zero) => false,
        Some(MuModeArg::PowerLaw) => true,
        None => matches!(cfg.mu_mode, MuMode::PowerLaw { .. }),
    };
    if power_law {
        let (c0, a0) = match cfg.mu_mode {
            MuMode::PowerLaw { c, alpha } => (Some(c), Some(alpha)),
            MuMode::Zero => (None, None),
        };
        let c = flags.c.or(c0).ok_or_else(|| usage("--mu-mode power-law needs --c"))?;
        let alpha = flags.alpha.or(a0).ok_or_else(|| usage("--mu-mode power-law needs --alpha"))?;
        cfg.mu_mode = MuMode::PowerLaw { c, alpha };
    } else {
        if flags.c.is_some() || flags.alpha.is_some() {
            return Err(usage("--c and --alpha need --mu-mode power-law"));
        }
        cfg.mu_mode = MuMode::Zero;
    }
    match flags.sigma2_mode {
        Some(mode) => cfg.sigma2_mode = sigma2_mode(mode, flags.sigma2_value, cfg.sigma2_mode)?,
        None => match (flags.sigma2_value, &mut cfg.sigma2_mode) {
            (Some(v), Sigma2Mode::Constant { value }) => *value = v,
            (Some(_), _) => return Err(usage("--sigma2-value needs --sigma2-mode constant")),
            (None, _) => {}
        },
    }
    if let Some(b) = flags.beta {
        cfg.beta = b;
    }
    if let Some(j) = flags.jitter {
        cfg.jitter = j;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn describe_kernel(k: &KernelSpec) -> String {
    match *k {
        KernelSpec::Matern { nu, dim } => format!("matern(nu={nu}, dim={dim})"),
        KernelSpec::GeneralizedWendland { kappa, mu_gw, dim } => {
            format!("wendland(kappa={kappa}, mu_gw={mu_gw}, dim={dim})")
        }
    }
}

fn describe_fit(c: &FitConfig) -> String {
    let mu = match c.mu_mode {
        MuMode::Zero => "mu=0".to_string(),
        MuMode::PowerLaw { c, alpha } => format!("mu={c}*n^{alpha}"),
    };
    format!("{mu}, beta={}, jitter={}", c.beta, c.jitter)
}

/// Writes `bundle` to `--out` when given; otherwise hands it to `fallback`.
fn emit(common: &Common, bundle: &OutputBundle, fallback: impl FnOnce(&OutputBundle) -> Result<()>) -> Result<()> {
    match &common.out {
        Some(dir) => bundle.write_to(dir, common.overwrite),
        None => fallback(bundle),
    }
}

fn stdout_bytes(bytes: &[u8]) -> Result<()> {
    let mut out = std::io::stdout().lock();
    out.write_all(bytes)?;
    out.flush()?;
    Ok(())
}

fn precheck_out(common: &Common) -> Result<()> {
    match &common.out {
        Some(dir) => check_output_dir(dir, common.overwrite),
        None => Ok(()),
    }
}

pub fn kernel_eval(args: &KernelEvalArgs) -> Outcome {
    let cfg = load_model_config(&args.common)?;
    let kernel = resolve_kernel(cfg.kernel, &args.kernel, None)?;
    precheck_out(&args.common)?;
    let values = args
        .r
        .iter()
        .map(|&r| kernel.correlation(r))
        .collect::<Result<Vec<f64>>>()
        .context(|| format!("kernel={}, r={:?}", describe_kernel(&kernel), args.r))?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["r", "value"]).map_err(Error::from)?;
    for (r, v) in args.r.iter().zip(&values) {
        w.write_record([r.to_string(), v.to_string()]).map_err(Error::from)?;
    }
    let table = w.into_inner().map_err(|e| Error::Input(e.to_string()))?;
    let mut bundle = OutputBundle::default();
    bundle.push("kernel.csv", table);
    let text: String = values.iter().map(|v| format!("{v}\n")).collect();
    emit(&args.common, &bundle, |_| Ok(()))?;
    stdout_bytes(text.as_bytes())?;
    Ok(())
}

pub fn fit_cmd(args: &FitArgs) -> Outcome {
    let cfg = load_model_config(&args.common)?;
    let fit_cfg = resolve_fit(cfg.fit.unwrap_or_default(), &args.fit)?;
    let (design, y) = io::read_data(&args.data)?;
    let kernel = resolve_kernel(cfg.kernel, &args.kernel, Some(design.dim()))?;
    precheck_out(&args.common)?;
    let model = fit(&design, &y, &kernel, &fit_cfg).context(|| {
        format!("kernel={}, n={}, {}", describe_kernel(&kernel), design.len(), describe_fit(&fit_cfg))
    })?;
    let file = ModelFile {
        kernel,
        fit: fit_cfg,
        design: design.points().to_vec(),
        y: y.clone(),
        mu_hat: model.mu_hat(),
        jitter_used: model.jitter_used(),
        sigma2_hat: model.sigma2_hat(),
        quantile: model.quantile(),
        dual_weights: model.dual_weights().to_vec(),
    };
    let text = serde_json::to_string_pretty(&file).map_err(Error::from)? + "\n";
    let summary = json!({
        "n": design.len(),
        "mu_hat": model.mu_hat(),
        "jitter_used": model.jitter_used(),
        "sigma2_hat": model.sigma2_hat(),
        "quantile": model.quantile(),
    });
    let mut bundle = OutputBundle::default();
    bundle.push("model.json", text.clone());
    match &args.common.out {
        Some(dir) => {
            bundle.write_to(dir, args.common.overwrite)?;
            println!("{summary}");
        }
        None => stdout_bytes(text.as_bytes())?,
    }
    Ok(())
}

pub fn load_model(path: &Path) -> Result<ModelFile> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| config_error("<model>", e.to_string()))
}

pub fn predict(args: &PredictArgs) -> Outcome {
    let file = load_model(&args.model)?;
    let design = Design::new(file.design.clone(), krigrel::DesignKind::Custom)?;
    let points = io::read_points(&args.points)?;
    let mode = match args.sigma2_mode {
        Some(m) => sigma2_mode(m, args.sigma2_value, file.fit.sigma2_mode)?,
        None if args.sigma2_value.is_some() => return Err(usage("--sigma2-value needs --sigma2-mode constant").into()),
        None => file.fit.sigma2_mode,
    };
    precheck_out(&args.common)?;
    let ctx = || format!("kernel={}, n={}, {}", describe_kernel(&file.kernel), design.len(), describe_fit(&file.fit));
    let model = fit(&design, &file.y, &file.kernel, &file.fit).context(ctx)?;
    let band = model.confidence_band_with(&points, mode).context(ctx)?;
    let mut csv = Vec::new();
    band.write_csv(&mut csv)?;
    let mut bundle = OutputBundle::default();
    bundle.push("band.csv", csv);
    if design.dim() == 1 {
        bundle.push("band.svg", svg::band_panel(&band, None, "Prediction band")?);
    }
    emit(&args.common, &bundle, |b| stdout_bytes(b.get("band.csv").unwrap_or_default()))?;
    Ok(())
}

pub fn power(args: &PowerArgs) -> Outcome {
    let cfg = load_model_config(&args.common)?;
    let explicit_dim = args.kernel.dim.or(cfg.kernel.map(|k| k.dim()));
    let design = match (&args.design, args.grid) {
        (Some(path), _) => io::read_design(path)?,
        (None, Some(n)) => grid_design(n, explicit_dim.unwrap_or(1))?,
        (None, None) => return Err(usage("power needs --design or --grid").into()),
    };
    let kernel = resolve_kernel(cfg.kernel, &args.kernel, Some(design.dim()))?;
    let points = match &args.points {
        Some(p) => io::read_points(p)?,
        None => default_probes(&design)?,
    };
    precheck_out(&args.common)?;
    let mut fit_cfg = cfg.fit.unwrap_or_default();
    if let Some(j) = args.jitter {
        fit_cfg.jitter = j;
        fit_cfg.validate()?;
    }
    let ctx = || {
        let route = if args.exact { "exact".to_string() } else { describe_fit(&fit_cfg) };
        format!("kernel={}, n={}, {route}", describe_kernel(&kernel), design.len())
    };
    let (powers, sup, jitter) = if args.exact {
        let model = ExactPowerModel::new(&design, &kernel).context(ctx)?;
        let powers = points.iter().map(|x| model.power_function(x)).collect::<Result<Vec<f64>>>().context(ctx)?;
        (powers, model.sup_power(&points).context(ctx)?, 0.0)
    } else {
        let zeros = vec![0.0; design.len()];
        let model = fit(&design, &zeros, &kernel, &fit_cfg).context(ctx)?;
        let eval = model.evaluate(&points).context(ctx)?;
        let sup = eval.powers.iter().fold(0.0f64, |m, p| m.max(p.sqrt()));
        (eval.powers, sup, model.jitter_used())
    };
    let summary = json!({
        "n": design.len(),
        "probes": points.len(),
        "sup_power": sup,
        "exact": args.exact,
        "jitter_used": jitter,
    });
    let mut bundle = OutputBundle::default();
    bundle.push("power.csv", io::points_with_values(&points, "power", &powers)?);
    bundle.push("summary.json", format!("{summary}\n"));
    match &args.common.out {
        Some(dir) => {
            bundle.write_to(dir, args.common.overwrite)?;
            println!("{summary}");
        }
        None => {
            stdout_bytes(bundle.get("power.csv").unwrap_or_default())?;
            eprintln!("{summary}");
        }
    }
    Ok(())
}

pub fn reliability(args: &ReliabilityArgs) -> Outcome {
    if let Some(table) = &args.table {
        if args.truth.is_some() || args.function.is_some() {
            return Err(usage("--table cannot be combined with --truth or --function").into());
        }
        let rows = io::read_table(table)?;
        precheck_out(&args.common)?;
        let report = ReliabilityReport::new(args.p, rows, 0, Vec::new());
        let mut csv = Vec::new();
        report.write_csv(&mut csv)?;
        let summary = report.summary_json()?;
        let mut bundle = OutputBundle::default();
        bundle.push("report.csv", csv);
        bundle.push("summary.json", format!("{summary}\n"));
        bundle.push("report.svg", svg::report_panel(&report, "E against n", "E")?);
        if report.fit.is_some() {
            bundle.push("loglog.svg", svg::loglog_panel(&report, "log E against log n")?);
        }
        match &args.common.out {
            Some(dir) => {
                bundle.write_to(dir, args.common.overwrite)?;
                println!("{summary}");
            }
            None => {
                stdout_bytes(bundle.get("report.csv").unwrap_or_default())?;
                eprintln!("{summary}");
            }
        }
        return Ok(());
    }
    let Some(band_path) = &args.band else {
        return Err(usage("reliability needs --band (with --truth or --function) or --table").into());
    };
    let band = io::read_band(band_path)?;
    let truth = match (&args.truth, args.function) {
        (Some(path), _) => io::read_truth(path)?,
        (None, Some(TruthFunction::Gramacy)) => {
            if band.points.iter().any(|p| p.len() != 1) {
                return Err(usage("--function gramacy needs one-dimensional band points").into());
            }
            band.points.iter().map(|p| test_function_gramacy(p[0])).collect()
        }
        (None, None) => return Err(usage("--band needs --truth or --function").into()),
    };
    precheck_out(&args.common)?;
    let metric = ratio_metric(&truth, &band, args.p)?;
    let coverage = coverage_rate(&truth, &band)?;
    let summary = json!({
        "p": args.p.to_string(),
        "E": metric.value,
        "infinite_ratio_count": metric.infinite_count,
        "coverage": coverage,
        "points": band.len(),
    });
    let mut bundle = OutputBundle::default();
    bundle.push("reliability.json", format!("{summary}\n"));
    if band.points.iter().all(|p| p.len() == 1) {
        bundle.push("band.svg", svg::band_panel(&band, Some(&truth), "Band and true function")?);
    }
    emit(&args.common, &bundle, |_| Ok(()))?;
    println!("{summary}");
    Ok(())
}

fn experiment_config(common: &Common, preset: ExperimentConfig) -> Result<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            let value: Value = serde_json::from_str(&text)
                .map_err(|e| config_error("<file>", format!("malformed JSON: {e}")))?;
            ExperimentConfig::from_json_value(value, preset)?
        }
        None => preset,
    };
    if let Some(seed) = common.seed {
        cfg.master_seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn describe_experiment(cfg: &ExperimentConfig) -> String {
    format!(
        "kernel={}, n_list={:?}, jitter={}, noise_sd={}, master_seed={}",
        describe_kernel(&cfg.kernel),
        cfg.n_list,
        cfg.jitter,
        cfg.noise_sd,
        cfg.master_seed
    )
}

fn summary_of(bundle: &OutputBundle) -> String {
    bundle
        .get("summary.json")
        .and_then(|b| serde_json::from_slice::<Value>(b).ok())
        .map(|v| v.to_string())
        .unwrap_or_else(|| Value::Object(Map::new()).to_string())
}

pub fn experiment(cmd: &ExperimentCommand) -> Outcome {
    let (common, bundle) = match cmd {
        ExperimentCommand::Deterministic(common) => {
            let cfg = experiment_config(common, ExperimentConfig::default())?;
            precheck_out(common)?;
            let res = run_deterministic_experiment(&cfg).context(|| describe_experiment(&cfg))?;
            let mut bundle = res.to_bundle()?;
            bundle.push("panel1.svg", svg::report_panel(&res.panel1, "Panel 1: E with MLE variance", "E")?);
            bundle.push("panel2.svg", svg::loglog_panel(&res.panel1, "Panel 2: log E against log n")?);
            bundle.push(
                "panel3.svg",
                svg::report_panel(&res.panel3, "Panel 3: sup ratio with constant variance", "sup ratio")?,
            );
            bundle.push(
                "panel4.svg",
                svg::report_panel(&res.panel4, "Panel 4: sup ratio with unscaled variance", "sup ratio")?,
            );
            let eval = cfg.eval.points(1)?;
            let truth: Vec<f64> = eval.iter().map(|x| test_function_gramacy(x[0])).collect();
            let title = format!("Band at n = {}", cfg.n_list[cfg.n_list.len() - 1]);
            bundle.push("band_last.svg", svg::band_panel(&res.last_band, Some(&truth), &title)?);
            (common, bundle)
        }
        ExperimentCommand::Stochastic(common) => {
            let cfg = experiment_config(common, ExperimentConfig::stochastic_preset())?;
            precheck_out(common)?;
            let res = run_stochastic_experiment(&cfg).context(|| describe_experiment(&cfg))?;
            (common, res.to_bundle()?)
        }
        ExperimentCommand::GpBaseline(common) => {
            let cfg = experiment_config(common, ExperimentConfig::gp_baseline_preset())?;
            precheck_out(common)?;
            let res = run_gp_baseline(&cfg).context(|| describe_experiment(&cfg))?;
            (common, res.to_bundle()?)
        }
    };
    emit(common, &bundle, |_| Ok(()))?;
    println!("{}", summary_of(&bundle));
    Ok(())
}
