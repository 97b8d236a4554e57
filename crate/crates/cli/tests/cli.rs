use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use clap::CommandFactory;
use krigrel::experiments::ExperimentConfig;
use krigrel::{KernelSpec, MuMode};
use krigrel_cli::args::Cli;
use krigrel_cli::svg::{emit_svg_panel, PanelSpec};
use krigrel_cli::{load_config, load_model, ModelConfig};
use tempfile::TempDir;

fn krigrel(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_krigrel")).args(args).current_dir(cwd).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn sine_data(dir: &Path, n: usize) {
    let mut s = String::from("x,y\n");
    for i in 0..n {
        let x = i as f64 / (n - 1) as f64;
        s += &format!("{x},{}\n", (4.0 * x).sin());
    }
    write(dir, "data.csv", &s);
    let mut p = String::from("x\n");
    for i in 0..9 {
        p += &format!("{}\n", (i as f64 + 0.5) / 9.0);
    }
    write(dir, "points.csv", &p);
}

const HELP_PAGES: [&[&str]; 10] = [
    &[],
    &["kernel-eval"],
    &["fit"],
    &["predict"],
    &["power"],
    &["reliability"],
    &["experiment"],
    &["experiment", "deterministic"],
    &["experiment", "stochastic"],
    &["experiment", "gp-baseline"],
];

fn golden_path(page: &[&str]) -> PathBuf {
    let name = if page.is_empty() { "krigrel".to_string() } else { format!("krigrel-{}", page.join("-")) };
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(format!("{name}.help.txt"))
}

#[test]
fn help_pages_match_golden_files() {
    let tmp = TempDir::new().unwrap();
    let bless = std::env::var_os("KRIGREL_BLESS").is_some();
    for page in HELP_PAGES {
        let mut args = page.to_vec();
        args.push("--help");
        let out = krigrel(&args, tmp.path());
        assert_eq!(out.status.code(), Some(0), "{page:?}");
        let path = golden_path(page);
        if bless {
            std::fs::write(&path, &out.stdout).unwrap();
        }
        let expected = std::fs::read_to_string(&path).unwrap_or_else(|_| panic!("missing {}", path.display()));
        assert_eq!(stdout(&out), expected, "help for {page:?} changed; rerun with KRIGREL_BLESS=1");
    }
}

#[test]
fn every_flag_is_documented() {
    fn walk(cmd: &clap::Command, path: Vec<String>, tmp: &Path) {
        let mut args: Vec<&str> = path.iter().map(String::as_str).collect();
        args.push("--help");
        let help = stdout(&krigrel(&args, tmp));
        for arg in cmd.get_arguments() {
            if let Some(long) = arg.get_long() {
                assert!(help.contains(&format!("--{long}")), "--{long} missing from help of {path:?}");
                if long != "help" && long != "version" {
                    assert!(arg.get_help().is_some(), "--{long} of {path:?} has no help text");
                }
            }
        }
        for sub in cmd.get_subcommands() {
            let mut p = path.clone();
            p.push(sub.get_name().to_string());
            walk(sub, p, tmp);
        }
    }
    let tmp = TempDir::new().unwrap();
    walk(&Cli::command(), Vec::new(), tmp.path());
}

#[test]
fn clap_definition_is_consistent() {
    Cli::command().debug_assert();
}

#[test]
fn kernel_eval_prints_values() {
    let tmp = TempDir::new().unwrap();
    let out = krigrel(&["kernel-eval", "--family", "matern", "--nu", "1", "--dim", "1", "--r", "1", "0"], tmp.path());
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let lines: Vec<f64> = stdout(&out).lines().map(|l| l.parse().unwrap()).collect();
    assert_eq!(lines.len(), 2);
    assert!((lines[0] - (-1.0f64).exp()).abs() < 1e-15);
    assert_eq!(lines[1], 1.0);

    let out = krigrel(&["kernel-eval", "--family", "wendland", "--r", "0.5", "--out", "k"], tmp.path());
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let csv = std::fs::read_to_string(tmp.path().join("k/kernel.csv")).unwrap();
    assert!(csv.starts_with("r,value\n0.5,"));
}

#[test]
fn usage_and_parameter_errors_exit_one() {
    let tmp = TempDir::new().unwrap();
    sine_data(tmp.path(), 8);
    for args in [
        &["fit", "--nu", "0.4", "--dim", "1", "--data", "data.csv"][..],
        &["kernel-eval", "--nu", "0.4", "--r", "1"],
        &["kernel-eval", "--nu", "2.5", "--kappa", "1", "--r", "1"],
        &["kernel-eval"],
        &["fit", "--data", "data.csv", "--beta", "1.5"],
        &["fit", "--data", "data.csv", "--mu-mode", "power-law", "--c", "1"],
        &["fit", "--data", "missing.csv"],
        &["reliability", "--p", "1.5", "--table", "data.csv"],
        &["power"],
        &["no-such-command"],
    ] {
        let out = krigrel(args, tmp.path());
        assert_eq!(out.status.code(), Some(1), "{args:?}: {}", stderr(&out));
        assert!(!stderr(&out).is_empty());
    }
}

#[test]
fn numerical_failure_exits_two_and_echoes_parameters() {
    let tmp = TempDir::new().unwrap();
    let out = krigrel(&["power", "--grid", "160", "--exact", "--nu", "6.5"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    let err = stderr(&out);
    assert!(err.contains("not positive definite"), "{err}");
    assert!(err.contains("nu=6.5") && err.contains("n=160"), "{err}");
}

#[test]
fn fit_predict_reliability_pipeline() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    sine_data(dir, 12);
    let out = krigrel(&["fit", "--data", "data.csv", "--nu", "2.5", "--out", "m"], dir);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let model = load_model(&dir.join("m/model.json")).unwrap();
    assert_eq!(model.kernel, KernelSpec::Matern { nu: 2.5, dim: 1 });
    assert_eq!(model.design.len(), 12);
    assert!(model.sigma2_hat > 0.0);

    let out = krigrel(&["predict", "--model", "m/model.json", "--points", "points.csv", "--out", "p"], dir);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let band = std::fs::read_to_string(dir.join("p/band.csv")).unwrap();
    assert!(band.starts_with("x,mean,lo,hi,power\n"));
    assert_eq!(band.lines().count(), 10);
    assert!(dir.join("p/band.svg").exists());

    // stdout mode gives the same CSV
    let out = krigrel(&["predict", "--model", "m/model.json", "--points", "points.csv"], dir);
    assert_eq!(stdout(&out), band);

    let mut truth = String::from("f\n");
    for line in band.lines().skip(1) {
        let x: f64 = line.split(',').next().unwrap().parse().unwrap();
        truth += &format!("{}\n", (4.0 * x).sin());
    }
    write(dir, "truth.csv", &truth);
    let out = krigrel(&["reliability", "--band", "p/band.csv", "--truth", "truth.csv", "--p", "inf"], dir);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["points"], 9);
    assert_eq!(v["coverage"], 1.0);
    let e = v["E"].as_f64().unwrap();
    assert!(e > 0.0 && e < 1.0, "{e}");

    let out = krigrel(&["reliability", "--band", "p/band.csv", "--function", "gramacy"], dir);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
}

#[test]
fn fit_flags_override_config_file() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    sine_data(dir, 10);
    write(
        dir,
        "model.json",
        r#"{"kernel": {"family": "matern", "nu": 1.5, "dim": 1}, "fit": {"mu_mode": {"mode": "power_law", "c": 0.01, "alpha": 0.5}, "sigma2_mode": {"mode": "mle_scaled"}, "beta": 0.1, "jitter": 1e-8}}"#,
    );
    let out = krigrel(&["fit", "--config", "model.json", "--data", "data.csv", "--beta", "0.2"], dir);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let model: krigrel_cli::ModelFile = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(model.kernel, KernelSpec::Matern { nu: 1.5, dim: 1 });
    assert_eq!(model.fit.beta, 0.2);
    assert_eq!(model.fit.mu_mode, MuMode::PowerLaw { c: 0.01, alpha: 0.5 });
    assert!((model.mu_hat - 0.01 * 10f64.sqrt()).abs() < 1e-15);

    write(dir, "bad.json", r#"{"kernel": {"family": "matern", "nu": 1.5, "dim": 1}, "colour": 1}"#);
    let out = krigrel(&["fit", "--config", "bad.json", "--data", "data.csv"], dir);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("colour"));
}

#[test]
fn power_routes_agree() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    let run = |extra: &[&str], out: &str| {
        let mut args = vec!["power", "--grid", "12", "--nu", "2.5", "--out", out];
        args.extend_from_slice(extra);
        let o = krigrel(&args, dir);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        let s: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.join(out).join("summary.json")).unwrap()).unwrap();
        s["sup_power"].as_f64().unwrap()
    };
    let exact = run(&["--exact"], "e");
    let float = run(&["--jitter", "0"], "f");
    assert!(exact > 0.0);
    assert!((float - exact).abs() < 1e-3 * exact, "{float} vs {exact}");
    let csv = std::fs::read_to_string(dir.join("e/power.csv")).unwrap();
    assert!(csv.starts_with("x,power\n"));
}

#[test]
fn deterministic_experiment_writes_panels() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    write(dir, "cfg.json", r#"{"n_list": [10, 20, 40], "eval": {"kind": "halton", "count": 100}, "reference_points": 200}"#);
    let out = krigrel(&["experiment", "deterministic", "--config", "cfg.json", "--out", "d"], dir);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    for f in ["panel1.csv", "panel2.csv", "panel3.csv", "panel4.csv", "summary.json", "config.json"] {
        assert!(dir.join("d").join(f).is_file(), "{f}");
    }
    for f in ["panel1.svg", "panel2.svg", "panel3.svg", "panel4.svg", "band_last.svg"] {
        let svg = std::fs::read_to_string(dir.join("d").join(f)).unwrap();
        assert!(svg.starts_with("<svg") && svg.ends_with("</svg>\n"), "{f}");
    }
    let summary: serde_json::Value = serde_json::from_str(stdout(&out).trim()).unwrap();
    assert!(summary["panel2_slope"].is_number());

    // refuses to clobber, then replaces with --overwrite
    let again = krigrel(&["experiment", "deterministic", "--config", "cfg.json", "--out", "d"], dir);
    assert_eq!(again.status.code(), Some(1));
    assert!(stderr(&again).contains("--overwrite"));
    let forced = krigrel(&["experiment", "deterministic", "--config", "cfg.json", "--out", "d", "--overwrite"], dir);
    assert_eq!(forced.status.code(), Some(0));
    assert_eq!(stdout(&forced), stdout(&out));

    let out = krigrel(&["reliability", "--table", "d/panel1.csv", "--out", "t"], dir);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let report = std::fs::read_to_string(dir.join("t/report.csv")).unwrap();
    assert!(report.starts_with("n,E,log_n,log_E\n"));
    assert!(dir.join("t/loglog.svg").is_file());
}

#[test]
fn stochastic_and_baseline_experiments_run() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    write(
        dir,
        "cfg.json",
        r#"{"n_list": [20, 40], "eval": {"kind": "halton", "count": 50}, "reference_points": 100, "replicates": 2}"#,
    );
    let a = krigrel(&["experiment", "stochastic", "--config", "cfg.json", "--out", "s1", "--seed", "3"], dir);
    let b = krigrel(&["experiment", "stochastic", "--config", "cfg.json", "--out", "s2", "--seed", "3"], dir);
    assert_eq!(a.status.code(), Some(0), "{}", stderr(&a));
    assert_eq!(b.status.code(), Some(0), "{}", stderr(&b));
    let read = |d: &str| std::fs::read(dir.join(d).join("stochastic.csv")).unwrap();
    assert_eq!(read("s1"), read("s2"));
    let cfg = load_config(&dir.join("s1/config.json")).unwrap();
    assert_eq!(cfg.master_seed, 3);
    assert_eq!(cfg.noise_sd, ExperimentConfig::stochastic_preset().noise_sd);

    let g = krigrel(&["experiment", "gp-baseline", "--config", "cfg.json", "--out", "g"], dir);
    assert_eq!(g.status.code(), Some(0), "{}", stderr(&g));
    assert!(dir.join("g/gp_baseline.csv").is_file());
}

#[test]
fn svg_panels() {
    let spec = PanelSpec { title: "t".into(), x_label: "n".into(), y_label: "E".into(), line: Some((0.0, -1.0)) };
    assert!(emit_svg_panel(&[], &spec).is_err());
    assert!(emit_svg_panel(&[(f64::NAN, 1.0)], &spec).is_err());
    let svg = emit_svg_panel(&[(1.0, 2.0), (2.0, 1.0)], &spec).unwrap();
    assert_eq!(svg.matches("<circle").count(), 2);
    assert_eq!(svg.matches(r#"<line class="fit""#).count(), 1);
    assert_eq!(svg, emit_svg_panel(&[(1.0, 2.0), (2.0, 1.0)], &spec).unwrap());
    let single = emit_svg_panel(&[(3.0, 3.0)], &PanelSpec::default()).unwrap();
    assert!(!single.contains("NaN") && !single.contains("inf"));
}

#[test]
fn config_loading() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    let empty = write(dir, "empty.json", "{}");
    assert_eq!(load_config(&empty).unwrap(), ExperimentConfig::default());
    let bad = write(dir, "bad.json", r#"{"beta": 1.5}"#);
    assert!(load_config(&bad).unwrap_err().to_string().contains("beta"));

    let cfg = ExperimentConfig { n_list: vec![5, 7], master_seed: 11, ..ExperimentConfig::default() };
    let path = dir.join("saved.json");
    cfg.save(&path).unwrap();
    assert_eq!(load_config(&path).unwrap(), cfg);

    let model = write(dir, "model.json", r#"{"fit": {"mu_mode": {"mode": "zero"}, "sigma2_mode": {"mode": "unscaled"}, "beta": 0.05, "jitter": 0.0}}"#);
    let m = ModelConfig::load(&model).unwrap();
    assert_eq!(m.kernel, None);
    assert_eq!(m.fit.unwrap().jitter, 0.0);
    let bad_fit = write(dir, "bad_fit.json", r#"{"fit": {"mu_mode": {"mode": "zero"}, "sigma2_mode": {"mode": "unscaled"}, "beta": 2.0, "jitter": 0.0}}"#);
    assert!(ModelConfig::load(&bad_fit).unwrap_err().to_string().contains("fit"));
}

#[test]
fn default_deterministic_run_creates_nested_directory() {
    let tmp = TempDir::new().unwrap();
    let out = krigrel(&["experiment", "deterministic", "--out", "runs/d1"], tmp.path());
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let dir = tmp.path().join("runs/d1");
    for f in ["panel1.csv", "panel2.csv", "panel3.csv", "panel4.csv", "summary.json"] {
        assert!(dir.join(f).is_file(), "{f}");
    }
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["checks"]["panel2_slope_in_range"], true);
    assert_eq!(load_config(&dir.join("config.json")).unwrap(), ExperimentConfig::default());
}
