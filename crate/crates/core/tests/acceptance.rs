//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails. Runs without the libtest harness so the lines always
//! reach stdout.

use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use krigrel::designs::{grid_design, halton_points, uniform_random_design};
use krigrel::experiments::{
    adjacent_inversions, run_deterministic_experiment, run_gp_baseline, run_stochastic_experiment, ExperimentConfig,
};
use krigrel::extended::ExactPowerModel;
use krigrel::gp::{
    fit, interpolation_residual_norm_sq, predictor_norm_sq, rkhs_function_from_coefficients, FitConfig, MuMode,
};
use krigrel::reliability::loglog_slope;
use krigrel::{Design, DesignKind, KernelSpec};

struct Outcome {
    id: &'static str,
    pass: bool,
    detail: String,
}

fn line(id: &'static str, pass: bool, detail: String) -> Outcome {
    Outcome { id, pass, detail }
}

fn secs(d: Duration) -> String {
    format!("{:.1}s", d.as_secs_f64())
}

/// Criteria 1, 2, 3, 4 and 6 share the default deterministic run.
fn deterministic() -> Vec<Outcome> {
    let start = Instant::now();
    let run = run_deterministic_experiment(&ExperimentConfig::default());
    let elapsed = start.elapsed();
    let res = match run {
        Ok(r) => r,
        Err(e) => {
            return ["1", "2", "3", "4", "6"].into_iter().map(|id| line(id, false, format!("run failed: {e}"))).collect()
        }
    };
    let mut out = Vec::new();

    let slope = res.panel2_fit().map(|f| f.slope).unwrap_or(f64::NAN);
    let ok1 = (1.3..=1.8).contains(&slope) && slope >= 1.0 && elapsed < Duration::from_secs(60);
    out.push(line(
        "1",
        ok1,
        format!("Panel-2 slope {slope:.4} (window [1.3, 1.8], floor 1.0, reference 1.548), runtime {}", secs(elapsed)),
    ));

    let es: Vec<f64> = res.rows.iter().map(|r| r.e_mle).collect();
    let inv = adjacent_inversions(&es);
    out.push(line(
        "2",
        inv <= 1,
        format!("Panel-1 E from {:.3e} to {:.3e}, {inv} adjacent inversion(s) (at most 1)", es[0], es[es.len() - 1]),
    ));

    let bound = res.panel3_bound() + 1e-6;
    let worst3 = res.rows.iter().map(|r| r.linf_constant).fold(0.0, f64::max);
    let all3 = res.rows.iter().all(|r| r.linf_constant <= bound);
    out.push(line(
        "3",
        all3,
        format!("Panel-3 max L-inf ratio {worst3:.4e} <= 1/(2q) + 1e-6 = {bound:.6} at every n"),
    ));

    let worst4 = res.rows.iter().filter(|r| r.n >= 100).map(|r| r.linf_unscaled).fold(0.0, f64::max);
    let slope4 = res.panel4.fit.map(|f| f.slope).unwrap_or(f64::NAN);
    out.push(line(
        "4",
        worst4 <= 1.0 && slope4 <= 0.1,
        format!("Panel-4 max L-inf ratio for n >= 100 is {worst4:.4e} (<= 1), log-log slope {slope4:.4} (<= 0.1)"),
    ));

    let half_c = res.reference_constant / 2.0;
    let worst6 = res.rows.iter().map(|r| r.sigma2_mle * r.n as f64 / half_c).fold(0.0, f64::max);
    out.push(line(
        "6",
        worst6 <= 1.0 + 1e-6,
        format!("max over n of sigma2_hat*n / (C/2) = {worst6:.6} (<= 1 + 1e-6), C = {:.4}", res.reference_constant),
    ));
    out
}

fn power_rate() -> Outcome {
    let start = Instant::now();
    let kernel = KernelSpec::matern(3.5, 1).unwrap();
    let ns: Vec<usize> = (2..=20).map(|k| 20 * k).collect();
    let mut sups = Vec::with_capacity(ns.len());
    for &n in &ns {
        let model = match ExactPowerModel::new(&grid_design(n, 1).unwrap(), &kernel) {
            Ok(m) => m,
            Err(e) => return line("5", false, format!("n={n}: {e}")),
        };
        sups.push(model.sup_power(&model.default_probes().unwrap()).unwrap());
    }
    let elapsed = start.elapsed();
    let nf: Vec<f64> = ns.iter().map(|&n| n as f64).collect();
    let slope = loglog_slope(&nf, &sups).map(|f| f.slope).unwrap_or(f64::NAN);
    line(
        "5",
        (-3.4..=-2.6).contains(&slope) && elapsed < Duration::from_secs(30),
        format!(
            "sup power slope {slope:.4} in [-3.4, -2.6] (sup P {:.3e} at n=40, {:.3e} at n=400), runtime {}",
            sups[0],
            sups[sups.len() - 1],
            secs(elapsed)
        ),
    )
}

fn rkhs_identity() -> Outcome {
    let kernel = KernelSpec::matern(3.5, 1).unwrap();
    let design = grid_design(20, 1).unwrap();
    let probes = halton_points(500, 1).unwrap();
    let cfg = FitConfig { jitter: 0.0, ..FitConfig::default() };
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst_identity = 0.0f64;
    let mut violations = 0usize;
    let mut max_jitter = 0.0f64;
    for _ in 0..20 {
        let m = rng.random_range(1..=10);
        let centers: Vec<Vec<f64>> = (0..m).map(|_| vec![rng.random::<f64>()]).collect();
        let coeffs: Vec<f64> = (0..m).map(|_| rng.sample(StandardNormal)).collect();
        let f = rkhs_function_from_coefficients(&centers, &coeffs, &kernel).unwrap();
        let y = f.eval_many(design.points());
        let model = fit(&design, &y, &kernel, &cfg).unwrap();
        max_jitter = max_jitter.max(model.jitter_used());
        let total = interpolation_residual_norm_sq(&f, &model) + predictor_norm_sq(&model);
        worst_identity = worst_identity.max((total - f.norm_sq()).abs() / f.norm_sq());
        let norm = f.norm_sq().sqrt();
        let eval = model.evaluate(&probes).unwrap();
        for (x, (mean, p2)) in probes.iter().zip(eval.means.iter().zip(&eval.powers)) {
            // slack is f64 rounding in f and the mean, not a tolerance on P
            if (f.eval(x) - mean).abs() > p2.sqrt() * norm + 1e-12 * norm {
                violations += 1;
            }
        }
    }
    line(
        "7",
        worst_identity <= 1e-6 && violations == 0,
        format!(
            "20 kernel-translate targets: worst identity residual {worst_identity:.3e} (<= 1e-6), \
             {violations} error-bound violations at 500 probes, jitter used <= {max_jitter:e}"
        ),
    )
}

fn gp_baseline() -> Outcome {
    let start = Instant::now();
    let res = run_gp_baseline(&ExperimentConfig::gp_baseline_preset());
    let elapsed = start.elapsed();
    match res {
        Ok(r) => {
            let spread = r.spread();
            let values: Vec<String> = r.rows.iter().map(|row| format!("n={}: {:.4}", row.n, row.e_root)).collect();
            line(
                "8",
                spread < 1.5 && elapsed < Duration::from_secs(120),
                format!(
                    "E^(1/p) {} spread x{spread:.4} (< 1.5), Gaussian reference {:.4}, runtime {}",
                    values.join(", "),
                    r.gaussian_reference().unwrap_or(f64::NAN),
                    secs(elapsed)
                ),
            )
        }
        Err(e) => line("8", false, format!("run failed: {e}")),
    }
}

fn stochastic() -> Vec<Outcome> {
    let start = Instant::now();
    let cfg = ExperimentConfig::stochastic_preset();
    let res = match run_stochastic_experiment(&cfg) {
        Ok(r) => r,
        Err(e) => return vec![line("9", false, format!("run failed: {e}"))],
    };
    let elapsed = start.elapsed();
    let alphas = res.alphas.clone();
    let star = alphas.iter().position(|a| (a - cfg.optimal_alpha()).abs() < 1e-12).unwrap();
    let high = alphas.iter().position(|a| *a == 0.8).unwrap();
    let zero = alphas.iter().position(|a| *a == 0.0).unwrap();
    let last = cfg.n_list.len() - 1;
    let err_last: Vec<f64> = (0..alphas.len()).map(|a| res.cells_for(a)[last].mean_err2).collect();
    let best = (0..alphas.len()).min_by(|a, b| err_last[*a].total_cmp(&err_last[*b])).unwrap();
    let ratios = |a: usize| res.cells_for(a).iter().map(|c| c.mean_ratio2).collect::<Vec<f64>>();
    let r_high = ratios(high);
    let r_zero = ratios(zero);
    let increasing = r_high.windows(2).all(|w| w[1] > w[0]);
    let zero_spread = r_zero.iter().cloned().fold(0.0, f64::max) / r_zero.iter().cloned().fold(f64::INFINITY, f64::min);
    let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>().join(" ");
    let ok = best == star && increasing && zero_spread <= 2.0 && elapsed < Duration::from_secs(600);
    let mut out = vec![line(
        "9",
        ok,
        format!(
            "(a) n=800 mean err2 by alpha {:?}: {} -> smallest at alpha={:.4} (alpha*={:.4}); \
             (b) alpha=0.8 ratio2 [{}] increasing={increasing}, alpha=0 ratio2 [{}] spread x{zero_spread:.3} (<= 2); runtime {}",
            alphas.iter().map(|a| format!("{a:.3}")).collect::<Vec<_>>(),
            err_last.iter().map(|x| format!("{x:.3e}")).collect::<Vec<_>>().join(" "),
            alphas[best],
            alphas[star],
            fmt(&r_high),
            fmt(&r_zero),
            secs(elapsed)
        ),
    )];
    // rate statements of the same sweep, reported on their own line
    let summary = res.summary();
    let slope = |a: usize| summary.trends[a].err2_fit.map(|f| f.slope).unwrap_or(f64::NAN);
    let rates_ok = summary.checks.optimal_alpha_rate == Some(true) && summary.checks.high_alpha_slower == Some(true);
    out.push(line(
        "9-rates",
        rates_ok,
        format!(
            "err2 slope alpha*={:.4} (optimal {:.4} +/- 0.25), alpha=0.8 {:.4} (>= alpha* slope + 0.1)",
            slope(star),
            res.optimal_rate(),
            slope(high)
        ),
    ));
    out
}

/// Dense Gaussian elimination with partial pivoting on `A x = b`.
/// `b - A x` with each row accumulated by the compensated dot product
/// (error-free transformations), so the residual is accurate even when
/// it is far below the entries' rounding level.
fn residual(a: &[Vec<f64>], x: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter()
        .zip(b)
        .map(|(row, &bi)| {
            let (mut s, mut c) = (bi, 0.0);
            for (&aij, &xj) in row.iter().zip(x) {
                let p = -aij * xj;
                let pe = (-aij).mul_add(xj, -p);
                let t = s + p;
                let z = t - s;
                c += (s - (t - z)) + (p - z) + pe;
                s = t;
            }
            s + c
        })
        .collect()
}

/// Gaussian elimination with partial pivoting, followed by iterative
/// refinement against the original matrix.
fn dense_solve(a: Vec<Vec<f64>>, b: Vec<f64>) -> Vec<f64> {
    let mut x = eliminate(a.clone(), b.clone());
    for _ in 0..4 {
        let r = residual(&a, &x, &b);
        let dx = eliminate(a.clone(), r);
        for (xi, di) in x.iter_mut().zip(dx) {
            *xi += di;
        }
    }
    x
}

fn eliminate(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|i, j| a[*i][col].abs().total_cmp(&a[*j][col].abs())).unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let factor = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= factor * a[col][k];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    x
}

fn oracle_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let kernels = [
        KernelSpec::matern(1.5, 1).unwrap(),
        KernelSpec::matern(2.5, 1).unwrap(),
        KernelSpec::matern(3.5, 1).unwrap(),
        KernelSpec::matern(1.3, 1).unwrap(),
        KernelSpec::matern(2.0, 2).unwrap(),
        KernelSpec::generalized_wendland(1.0, 3.0, 1).unwrap(),
    ];
    let mut worst = 0.0f64;
    for i in 0..25 {
        let kernel = kernels[i % kernels.len()];
        let d = kernel.dim();
        let n = rng.random_range(2..=12);
        let design = uniform_random_design(n, d, rng.random()).unwrap();
        let design = Design::new(design.points().to_vec(), DesignKind::Custom).unwrap();
        let y: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let mu_mode = if i % 2 == 0 { MuMode::Zero } else { MuMode::PowerLaw { c: 0.01, alpha: 0.3 } };
        let model = fit(&design, &y, &kernel, &FitConfig { mu_mode, ..FitConfig::default() }).unwrap();
        let shift = model.mu_hat() + model.jitter_used();
        let pts = design.points();
        let a: Vec<Vec<f64>> = (0..n)
            .map(|r| (0..n).map(|c| kernel.between(&pts[r], &pts[c]) + if r == c { shift } else { 0.0 }).collect())
            .collect();
        let w = dense_solve(a, y.clone());
        let probes = halton_points(50, d).unwrap();
        let got = model.predict_means(&probes).unwrap();
        let cross = DMatrix::from_fn(probes.len(), n, |p, j| kernel.between(&probes[p], &pts[j]));
        let expected = cross * DVector::from_vec(w);
        let scale = expected.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
        let mut inst = 0.0f64;
        for (g, e) in got.iter().zip(expected.iter()) {
            inst = inst.max((g - e).abs() / scale);
        }
        worst = worst.max(inst);
    }
    line(
        "10",
        worst <= 1e-9,
        format!("25 instances with n <= 12: worst relative mean difference vs dense solve {worst:.3e} (<= 1e-9)"),
    )
}

fn main() {
    let mut outcomes = deterministic();
    outcomes.push(power_rate());
    outcomes.push(rkhs_identity());
    outcomes.push(gp_baseline());
    outcomes.extend(stochastic());
    outcomes.push(oracle_equivalence());
    outcomes.sort_by_key(|o| o.id.split('-').next().unwrap().parse::<u32>().unwrap_or(99));

    for o in &outcomes {
        println!("{} criterion {}: {}", if o.pass { "PASS" } else { "FAIL" }, o.id, o.detail);
    }
    let failed: Vec<&Outcome> = outcomes.iter().filter(|o| !o.pass).collect();
    println!("acceptance: {} passed, {} failed", outcomes.len() - failed.len(), failed.len());
    if !failed.is_empty() {
        for o in failed {
            eprintln!("failed criterion {}: {}", o.id, o.detail);
        }
        std::process::exit(1);
    }
}
