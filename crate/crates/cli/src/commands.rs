//! Subcommand implementations. Each function validates its inputs
//! (configuration errors), runs the requested experiment (runtime errors),
//! prints its result table to stdout, and optionally writes the same rows
//! as a CSV artifact.

use std::path::{Path, PathBuf};

use cellzoom::harness::{
    approx_error, charging_rate, energy_efficiency, run_simulation, truncation_error,
    write_metrics_csv, write_scenario_csv, write_trace_csv, Method, Scenario,
};
use cellzoom::local_solver::LocalSolverKind;
use cellzoom::model::SimParams;
use cellzoom::privacy::{empirical_tail, max_ratio_bernstein, max_ratio_proposed};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::{
    config_err, load_params, resolve_scenario, runtime_err, CliError, CmdResult, MethodArg,
};

/// Prints `header` and `rows` to stdout and, when `out` names a directory,
/// also writes them to `<out>/<file_name>`.
fn emit_table(
    header: &str,
    rows: &[String],
    out: Option<&Path>,
    file_name: &str,
) -> CmdResult<()> {
    println!("{header}");
    for row in rows {
        println!("{row}");
    }
    if let Some(dir) = out {
        let path = prepare_out_dir(dir)?.join(file_name);
        let mut text = String::with_capacity(rows.len() * 32);
        text.push_str(header);
        text.push('\n');
        for row in rows {
            text.push_str(row);
            text.push('\n');
        }
        std::fs::write(&path, text)
            .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))?;
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}

/// Creates the output directory if needed; an unusable target is a
/// configuration error.
fn prepare_out_dir(dir: &Path) -> CmdResult<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| {
        CliError::Config(format!("output directory {} is unusable: {e}", dir.display()))
    })?;
    Ok(dir.to_path_buf())
}

fn check_rho(rho: f64) -> CmdResult<()> {
    if rho.is_finite() && rho >= 0.0 {
        Ok(())
    } else {
        Err(CliError::Config(format!("rho must be finite and >= 0, got {rho}")))
    }
}

/// `simulate`: one full run, written as a trace CSV plus a metrics CSV.
#[allow(clippy::too_many_arguments)]
pub fn simulate(
    config: Option<&Path>,
    scenario: &str,
    method: MethodArg,
    rho: f64,
    seed: u64,
    t_iters: Option<u32>,
    out: &Path,
) -> CmdResult<()> {
    let mut params = load_params(config)?;
    if let Some(t) = t_iters {
        params.t_iters = t;
        params = params.validated().map_err(config_err)?;
    }
    check_rho(rho)?;
    let scenario = resolve_scenario(scenario, &params, seed)?;
    let dir = prepare_out_dir(out)?;

    let method = method.to_method();
    let trace = run_simulation(&scenario, method, rho, &params, seed).map_err(runtime_err)?;
    let ee = energy_efficiency(&trace, &params);
    let cr = charging_rate(&trace, &params);
    let served: f64 = trace
        .records
        .iter()
        .flat_map(|row| row.iter().map(|rec| rec.users_served))
        .sum();

    let stem = format!("{}_rho{}_seed{}", method.label(), rho, seed);
    let trace_path = dir.join(format!("trace_{stem}.csv"));
    let metrics_path = dir.join(format!("metrics_{stem}.csv"));
    write_trace_csv(&trace, &trace_path).map_err(runtime_err)?;
    let metrics = [
        ("energy_efficiency_users_per_kj".to_string(), ee),
        ("charging_rate".to_string(), cr),
        ("users_served_total".to_string(), served),
    ];
    write_metrics_csv(&metrics, &metrics_path).map_err(runtime_err)?;

    println!(
        "{} on `{}`: energy efficiency {ee:.4} users/kJ, charging rate {cr:.4}, \
         {served:.1} users served",
        method.label(),
        scenario.label,
    );
    eprintln!("wrote {}", trace_path.display());
    eprintln!("wrote {}", metrics_path.display());
    Ok(())
}

/// `compare`: noise-robustness table — mean energy efficiency and charging
/// rate per (method, rho), with degradation relative to each method's
/// noiseless run. Sample runs fan out across worker threads; sample `s`
/// always uses seed `seed + s`, so methods and noise scales see paired
/// noise draws.
pub fn compare(
    config: Option<&Path>,
    scenario: &str,
    rhos: &[f64],
    samples: usize,
    seed: u64,
    out: Option<&Path>,
) -> CmdResult<()> {
    let params = load_params(config)?;
    if rhos.is_empty() {
        return Err(CliError::Config("at least one rho value is required".into()));
    }
    for &rho in rhos {
        check_rho(rho)?;
    }
    if samples == 0 {
        return Err(CliError::Config("samples must be >= 1".into()));
    }
    let scenario = resolve_scenario(scenario, &params, seed)?;
    let methods = [
        Method::Centralized,
        Method::Distributed(LocalSolverKind::ClosedForm),
    ];

    // Noiseless runs are deterministic, so one sample suffices at rho = 0.
    let jobs: Vec<(usize, usize, u64)> = methods
        .iter()
        .enumerate()
        .flat_map(|(m, _)| {
            rhos.iter().enumerate().flat_map(move |(r, &rho)| {
                let count = if rho == 0.0 { 1 } else { samples };
                (0..count).map(move |s| (m, r, seed + s as u64))
            })
        })
        .collect();
    let evals: Vec<(usize, usize, f64, f64)> = jobs
        .par_iter()
        .map(|&(m, r, s)| {
            let trace =
                run_simulation(&scenario, methods[m], rhos[r], &params, s).map_err(runtime_err)?;
            Ok((m, r, energy_efficiency(&trace, &params), charging_rate(&trace, &params)))
        })
        .collect::<CmdResult<_>>()?;

    let mut sums = vec![vec![(0.0f64, 0.0f64, 0usize); rhos.len()]; methods.len()];
    for (m, r, ee, cr) in evals {
        sums[m][r].0 += ee;
        sums[m][r].1 += cr;
        sums[m][r].2 += 1;
    }
    let mut rows = Vec::new();
    for (m, method) in methods.iter().enumerate() {
        let base = run_simulation(&scenario, *method, 0.0, &params, seed).map_err(runtime_err)?;
        let base_ee = energy_efficiency(&base, &params);
        for (r, &rho) in rhos.iter().enumerate() {
            let (ee_sum, cr_sum, count) = sums[m][r];
            let ee = ee_sum / count as f64;
            let cr = cr_sum / count as f64;
            let deg = if base_ee > 0.0 { 100.0 * (base_ee - ee) / base_ee } else { 0.0 };
            rows.push(format!("{},{rho},{ee:.6},{cr:.6},{deg:.4}", method.label()));
        }
    }
    emit_table(
        "method,rho,mean_energy_efficiency_users_per_kj,mean_charging_rate,ee_degradation_pct",
        &rows,
        out,
        "compare.csv",
    )
}

/// `privacy-budget`: the largest noise-to-privacy ratio each admission
/// condition certifies, plus an optional Monte Carlo check of the proposed
/// condition's tail probability.
pub fn privacy_budget(
    n: u32,
    lambda_thresh: f64,
    zeta: f64,
    mc_samples: usize,
    seed: u64,
) -> CmdResult<()> {
    let proposed = max_ratio_proposed(n, lambda_thresh, zeta).map_err(config_err)?;
    let bernstein = max_ratio_bernstein(n, lambda_thresh, zeta).map_err(config_err)?;
    let mut rows = vec![
        format!("proposed_max_ratio,{proposed:.6}"),
        format!("bernstein_max_ratio,{bernstein:.6}"),
    ];
    if mc_samples > 0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tail = empirical_tail(n, proposed, lambda_thresh, mc_samples, &mut rng);
        rows.push(format!("empirical_tail,{tail:.6}"));
    }
    emit_table("quantity,value", &rows, None, "")
}

/// `approx-error`: sweeps the active-mode system power and reports both
/// surrogate methods' power-trajectory error against the exact baseline.
pub fn approx_error_sweep(
    config: Option<&Path>,
    scenario: &str,
    s_min: f64,
    s_max: f64,
    points: usize,
    out: Option<&Path>,
) -> CmdResult<()> {
    let params = load_params(config)?;
    if points == 0 {
        return Err(CliError::Config("points must be >= 1".into()));
    }
    if !(s_min.is_finite() && s_max.is_finite() && s_min <= s_max) {
        return Err(CliError::Config(format!(
            "need s_active_min <= s_active_max, got {s_min} and {s_max}"
        )));
    }
    if s_min < params.s_sleep {
        return Err(CliError::Config(format!(
            "s_active_min ({s_min}) must not drop below the sleep power ({})",
            params.s_sleep
        )));
    }
    let scenario = resolve_scenario(scenario, &params, 0)?;

    let mut rows = Vec::with_capacity(points);
    for j in 0..points {
        let s = if points == 1 {
            s_min
        } else {
            s_min + (s_max - s_min) * j as f64 / (points - 1) as f64
        };
        // The sweep bypasses the strict active-above-sleep validation rule
        // on purpose: its lower endpoint sits exactly at the sleep power.
        let swept = SimParams { s_active: s, ..params };
        let run = |method| run_simulation(&scenario, method, 0.0, &swept, 0).map_err(runtime_err);
        let exact = run(Method::Centralized)?;
        let app1 = run(Method::Distributed(LocalSolverKind::ClosedForm))?;
        let app2 = run(Method::Distributed(LocalSolverKind::Exact))?;
        let e1 = approx_error(&app1, &exact).map_err(runtime_err)?;
        let e2 = approx_error(&app2, &exact).map_err(runtime_err)?;
        rows.push(format!("{s},{e1:.6},{e2:.6}"));
    }
    emit_table("s_active_w,e1_pct,e2_pct", &rows, out, "approx_error.csv")
}

/// `truncation-error`: sweeps the coordination-loop iteration budget and
/// reports the power-trajectory error against the converged reference
/// budget of 30 iterations.
pub fn truncation_error_sweep(
    config: Option<&Path>,
    scenario: &str,
    t_values: &[u32],
    out: Option<&Path>,
) -> CmdResult<()> {
    let params = load_params(config)?;
    if t_values.is_empty() {
        return Err(CliError::Config("at least one t value is required".into()));
    }
    if t_values.contains(&0) {
        return Err(CliError::Config("t values must be >= 1".into()));
    }
    let scenario = resolve_scenario(scenario, &params, 0)?;

    let run = |t: u32| {
        let swept = SimParams { t_iters: t, ..params };
        run_simulation(
            &scenario,
            Method::Distributed(LocalSolverKind::ClosedForm),
            0.0,
            &swept,
            0,
        )
        .map_err(runtime_err)
    };
    let reference = run(30)?;
    let mut rows = Vec::with_capacity(t_values.len());
    for &t in t_values {
        let error = truncation_error(&run(t)?, &reference).map_err(runtime_err)?;
        rows.push(format!("{t},{error:.6}"));
    }
    emit_table("t_iters,error_pct", &rows, out, "truncation_error.csv")
}

/// `scenario-gen`: writes a scenario CSV — random peaks by default, or the
/// built-in reference scenario.
pub fn scenario_gen(n: usize, seed: u64, builtin: bool, out: &Path) -> CmdResult<()> {
    if n == 0 {
        return Err(CliError::Config("n must be >= 1".into()));
    }
    let scenario = if builtin {
        Scenario::reference()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        cellzoom::harness::random_scenario(n, &mut rng)
    };
    write_scenario_csv(&scenario, out).map_err(runtime_err)?;
    println!(
        "wrote {} ({} cells x {} steps, label `{}`)",
        out.display(),
        scenario.n,
        scenario.horizon,
        scenario.label
    );
    Ok(())
}
