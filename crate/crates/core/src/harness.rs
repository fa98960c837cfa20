//! Synthetic scenarios, the two-day simulation loop, experiment metrics,
//! and CSV import/export.
//!
//! A scenario is a per-cell time series of user counts and harvested power
//! over a fixed horizon (the reference experiments use 577 samples of 300 s
//! each — two days). [`run_simulation`] replays a scenario against either
//! control method, chaining the battery dynamics exactly and recording one
//! [`StepRecord`] per cell and step. The metric functions implement the
//! figures of merit used by the experiment suite: energy efficiency
//! (served users per consumed kJ), mean battery charging rate, and the
//! relative power-series errors that quantify truncation of the
//! coordination loop and the convex approximation.

use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::centralized::solve_centralized;
use crate::distributed::{mask_counts, run_timestep, TimestepOptions};
use crate::local_solver::LocalSolverKind;
use crate::model::{battery_step, coverage_coefficient, users_served, SbsState, SimParams};
use crate::{Error, Result};

/// Number of 300 s samples in the reference two-day horizon.
pub const HORIZON: usize = 577;

/// Day-profile parameters of one cell's user-count series: peak heights for
/// each of the two days and the common peak position within a day.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DailyPeaks {
    /// First-day peak user count.
    pub day1: f64,
    /// Second-day peak user count.
    pub day2: f64,
    /// Peak sample index within a 288-sample day.
    pub center: f64,
}

/// The four-cell reference profile used throughout the experiments.
pub fn reference_peaks() -> Vec<DailyPeaks> {
    vec![
        DailyPeaks { day1: 60.0, day2: 70.0, center: 144.0 },
        DailyPeaks { day1: 90.0, day2: 80.0, center: 174.0 },
        DailyPeaks { day1: 70.0, day2: 90.0, center: 114.0 },
        DailyPeaks { day1: 80.0, day2: 60.0, center: 144.0 },
    ]
}

/// User count of one cell at sample `k`: a Gaussian bump per day, centred
/// at `peaks.center` (first day) and `peaks.center + 288` (second day).
pub fn synthetic_counts(k: usize, peaks: &DailyPeaks) -> f64 {
    debug_assert!(k < HORIZON);
    let kf = k as f64;
    if k < 288 {
        peaks.day1 * (-(kf - peaks.center).powi(2) / 1e5).exp()
    } else {
        peaks.day2 * (-(kf - peaks.center - 288.0).powi(2) / 1e5).exp()
    }
}

/// Harvested power (W) at sample `k`: a 10 W midday bump on each day,
/// identical for every cell.
pub fn synthetic_harvest(k: usize) -> f64 {
    debug_assert!(k < HORIZON);
    let kf = k as f64;
    if k < 288 {
        10.0 * (-(kf - 144.0).powi(2) / 5e4).exp()
    } else {
        10.0 * (-(kf - 432.0).powi(2) / 5e4).exp()
    }
}

/// A complete simulation input: user counts and harvested power for every
/// cell and sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    /// Number of cells.
    pub n: usize,
    /// Number of samples.
    pub horizon: usize,
    /// User counts, indexed `[cell][sample]`.
    pub users: Vec<Vec<f64>>,
    /// Harvested power (W), indexed `[cell][sample]`.
    pub harvest: Vec<Vec<f64>>,
    /// Free-form name recorded in artifacts.
    pub label: String,
}

impl Scenario {
    /// Validates dimensions and entry ranges (finite, nonnegative).
    pub fn validated(self) -> Result<Self> {
        if self.n == 0 || self.horizon == 0 {
            return Err(Error::InvalidParams(
                "scenario needs at least one cell and one sample".into(),
            ));
        }
        if self.users.len() != self.n || self.harvest.len() != self.n {
            return Err(Error::DimensionMismatch(format!(
                "scenario declares {} cells but has {} user rows and {} harvest rows",
                self.n,
                self.users.len(),
                self.harvest.len()
            )));
        }
        for i in 0..self.n {
            if self.users[i].len() != self.horizon || self.harvest[i].len() != self.horizon {
                return Err(Error::DimensionMismatch(format!(
                    "cell {i} has {} user and {} harvest samples, expected {}",
                    self.users[i].len(),
                    self.harvest[i].len(),
                    self.horizon
                )));
            }
            for k in 0..self.horizon {
                let (u, w) = (self.users[i][k], self.harvest[i][k]);
                if !(u.is_finite() && u >= 0.0 && w.is_finite() && w >= 0.0) {
                    return Err(Error::InvalidParams(format!(
                        "scenario entry (k = {k}, cell {i}) out of range: users = {u}, harvest = {w}"
                    )));
                }
            }
        }
        Ok(self)
    }

    /// The built-in four-cell reference scenario over the two-day horizon.
    pub fn reference() -> Scenario {
        Scenario::from_peaks(&reference_peaks(), "reference")
            .validated()
            .expect("reference scenario is valid by construction")
    }

    /// Builds a scenario from per-cell day profiles, with the shared
    /// harvest series.
    pub fn from_peaks(peaks: &[DailyPeaks], label: &str) -> Scenario {
        let users = peaks
            .iter()
            .map(|p| (0..HORIZON).map(|k| synthetic_counts(k, p)).collect())
            .collect();
        let harvest = vec![(0..HORIZON).map(synthetic_harvest).collect(); peaks.len()];
        Scenario {
            n: peaks.len(),
            horizon: HORIZON,
            users,
            harvest,
            label: label.to_string(),
        }
    }
}

/// Draws a random scenario: per-cell peak heights uniform on the integers
/// 40..=70 users and peak position uniform on 114..=174, with the standard
/// harvest series.
pub fn random_scenario(n: usize, rng: &mut impl Rng) -> Scenario {
    let peaks: Vec<DailyPeaks> = (0..n)
        .map(|_| DailyPeaks {
            day1: rng.gen_range(40u32..=70) as f64,
            day2: rng.gen_range(40u32..=70) as f64,
            center: rng.gen_range(114u32..=174) as f64,
        })
        .collect();
    Scenario::from_peaks(&peaks, &format!("random-n{n}"))
}

/// Which per-step solver drives a simulation run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// Exhaustive schedule enumeration on the exact objective.
    Centralized,
    /// Dual-decomposition coordination on the convex surrogate.
    Distributed(LocalSolverKind),
}

impl Method {
    /// Stable identifier used in artifact metadata.
    pub fn label(&self) -> &'static str {
        match self {
            Method::Centralized => "centralized",
            Method::Distributed(LocalSolverKind::ClosedForm) => "distributed-closed-form",
            Method::Distributed(LocalSolverKind::Exact) => "distributed-exact",
        }
    }
}

/// Everything recorded about one cell at one sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    /// True user count.
    pub users: f64,
    /// Masked count the controller saw (equals `users` when `rho = 0`).
    pub masked: f64,
    /// Users actually served, `F(u, users)` on the true count.
    pub users_served: f64,
    /// Transmission power (W).
    pub u: f64,
    /// System power (W), active or sleep.
    pub s: f64,
    /// Battery energy (J) *before* the decision was applied.
    pub x: f64,
    /// Coupling multiplier after this step's coordination.
    pub mu: f64,
}

/// A full simulation run: `records[k][i]` is cell `i` at sample `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimTrace {
    pub n: usize,
    pub horizon: usize,
    pub records: Vec<Vec<StepRecord>>,
    pub method: Method,
    pub rho: f64,
    pub seed: u64,
    pub t_iters: u32,
}

impl SimTrace {
    /// The power series of one cell across the whole run.
    pub fn power_series(&self, i: usize) -> Vec<f64> {
        self.records.iter().map(|row| row[i].u).collect()
    }
}

/// Replays `scenario` under the given method and masking scale, chaining
/// the battery dynamics exactly.
///
/// All randomness (masking noise) derives from `seed`, so identical calls
/// produce bit-identical traces. The multiplier warm-starts each step from
/// the previous step's final value.
pub fn run_simulation(
    scenario: &Scenario,
    method: Method,
    rho: f64,
    params: &SimParams,
    seed: u64,
) -> Result<SimTrace> {
    if scenario.n != params.n {
        return Err(Error::DimensionMismatch(format!(
            "scenario has {} cells, parameters expect {}",
            scenario.n, params.n
        )));
    }
    if !(rho.is_finite() && rho >= 0.0) {
        return Err(Error::NonFinite(format!("noise scale rho = {rho}")));
    }
    let n = params.n;
    let r = coverage_coefficient(params)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut states: Vec<SbsState> = (0..n)
        .map(|_| SbsState { x: params.x0, s_prev: params.s_sleep })
        .collect();
    let mut mu = 0.0;
    let options = TimestepOptions::default();
    let mut records = Vec::with_capacity(scenario.horizon);

    for k in 0..scenario.horizon {
        let counts: Vec<f64> = (0..n).map(|i| scenario.users[i][k]).collect();
        let harvest: Vec<f64> = (0..n).map(|i| scenario.harvest[i][k]).collect();
        let decision = match method {
            Method::Distributed(solver) => run_timestep(
                &states,
                &counts,
                &harvest,
                mu,
                rho,
                params,
                &mut rng,
                &TimestepOptions { solver, ..options },
            )?,
            Method::Centralized => {
                // The central controller only ever sees masked counts; they
                // enter both its objective and its budget constraint.
                let masked = mask_counts(&counts, rho, &mut rng);
                solve_centralized(&states, &masked, &harvest, params, r)?
            }
        };
        mu = decision.mu_out;
        let mut row = Vec::with_capacity(n);
        for i in 0..n {
            row.push(StepRecord {
                users: counts[i],
                masked: decision.masked_counts[i],
                users_served: users_served(decision.u[i], counts[i], r),
                u: decision.u[i],
                s: decision.s[i],
                x: states[i].x,
                mu: decision.mu_out,
            });
            let next = battery_step(&states[i], harvest[i], decision.u[i], decision.s[i], params)?;
            states[i] = SbsState { x: next, s_prev: decision.s[i] };
        }
        records.push(row);
    }
    Ok(SimTrace {
        n,
        horizon: scenario.horizon,
        records,
        method,
        rho,
        seed,
        t_iters: params.t_iters,
    })
}

// ---------------------------------------------------------------------------
// metrics
// ---------------------------------------------------------------------------

/// Served users per kJ of total consumed energy (transmission plus system
/// power, active or sleeping) over the whole run.
pub fn energy_efficiency(trace: &SimTrace, params: &SimParams) -> f64 {
    let mut served = 0.0;
    let mut energy_j = 0.0;
    for row in &trace.records {
        for rec in row {
            served += rec.users_served;
            energy_j += params.h * (rec.u / params.gamma + rec.s);
        }
    }
    served / (energy_j / 1000.0)
}

/// Mean battery fill fraction over all cells and samples.
pub fn charging_rate(trace: &SimTrace, params: &SimParams) -> f64 {
    let total: f64 = trace
        .records
        .iter()
        .flat_map(|row| row.iter().map(|rec| rec.x / params.x_max))
        .sum();
    total / (trace.horizon as f64 * trace.n as f64)
}

/// Mean per-cell relative l2 distance between the power series of two
/// runs, in percent. Cells whose reference series is identically zero
/// contribute 0 when the compared series is also zero, else 100.
fn relative_power_error(test: &SimTrace, reference: &SimTrace) -> Result<f64> {
    if test.n != reference.n || test.horizon != reference.horizon {
        return Err(Error::DimensionMismatch(format!(
            "trace shapes differ: {}x{} vs {}x{}",
            test.n, test.horizon, reference.n, reference.horizon
        )));
    }
    let mut total = 0.0;
    for i in 0..test.n {
        let mut diff_sq = 0.0;
        let mut ref_sq = 0.0;
        for k in 0..test.horizon {
            let (a, b) = (test.records[k][i].u, reference.records[k][i].u);
            diff_sq += (a - b) * (a - b);
            ref_sq += b * b;
        }
        total += if ref_sq == 0.0 {
            if diff_sq == 0.0 {
                0.0
            } else {
                100.0
            }
        } else {
            100.0 * (diff_sq / ref_sq).sqrt()
        };
    }
    Ok(total / test.n as f64)
}

/// Percent error of a run truncated to `T` coordination iterations against
/// a reference run (the experiments use `T = 30` as reference).
pub fn truncation_error(truncated: &SimTrace, reference: &SimTrace) -> Result<f64> {
    relative_power_error(truncated, reference)
}

/// Percent error of a surrogate-based run against the exact enumeration
/// baseline.
pub fn approx_error(approximate: &SimTrace, exact: &SimTrace) -> Result<f64> {
    relative_power_error(approximate, exact)
}

// ---------------------------------------------------------------------------
// CSV plumbing
// ---------------------------------------------------------------------------

const SCENARIO_HEADER: &str = "k,i,users,harvest_w";
const TRACE_HEADER: &str = "k,i,users,masked,users_served,u_w,s_w,x_j,mu";
const METRICS_HEADER: &str = "metric,value";

/// Writes a scenario as CSV (`k,i,users,harvest_w`), sample-major.
pub fn write_scenario_csv(scenario: &Scenario, path: &Path) -> Result<()> {
    let mut out = String::with_capacity(scenario.n * scenario.horizon * 32);
    out.push_str(SCENARIO_HEADER);
    out.push('\n');
    for k in 0..scenario.horizon {
        for i in 0..scenario.n {
            writeln!(out, "{k},{i},{},{}", scenario.users[i][k], scenario.harvest[i][k])
                .expect("writing to a String cannot fail");
        }
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Reads a scenario written by [`write_scenario_csv`]. The float text
/// representation round-trips exactly, so read-back reproduces the written
/// scenario bit for bit. The label is taken from the file stem.
pub fn read_scenario_csv(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim_end() == SCENARIO_HEADER => {}
        other => {
            return Err(Error::Parse(format!(
                "expected scenario header `{SCENARIO_HEADER}`, found {other:?}"
            )))
        }
    }
    let mut rows: Vec<(usize, usize, f64, f64)> = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(Error::Parse(format!(
                "line {}: expected 4 fields, found {}",
                lineno + 2,
                fields.len()
            )));
        }
        let parse_err = |what: &str| Error::Parse(format!("line {}: bad {what}", lineno + 2));
        rows.push((
            fields[0].parse().map_err(|_| parse_err("sample index"))?,
            fields[1].parse().map_err(|_| parse_err("cell index"))?,
            fields[2].parse().map_err(|_| parse_err("user count"))?,
            fields[3].parse().map_err(|_| parse_err("harvest power"))?,
        ));
    }
    if rows.is_empty() {
        return Err(Error::Parse("scenario file has no data rows".into()));
    }
    let n = rows.iter().map(|r| r.1).max().unwrap() + 1;
    let horizon = rows.iter().map(|r| r.0).max().unwrap() + 1;
    let mut users = vec![vec![f64::NAN; horizon]; n];
    let mut harvest = vec![vec![f64::NAN; horizon]; n];
    let mut seen = vec![vec![false; horizon]; n];
    for (k, i, u, w) in rows {
        if seen[i][k] {
            return Err(Error::Parse(format!("duplicate entry for k = {k}, cell {i}")));
        }
        seen[i][k] = true;
        users[i][k] = u;
        harvest[i][k] = w;
    }
    if let Some((i, k)) = (0..n)
        .flat_map(|i| (0..horizon).map(move |k| (i, k)))
        .find(|&(i, k)| !seen[i][k])
    {
        return Err(Error::Parse(format!("missing entry for k = {k}, cell {i}")));
    }
    let label = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "scenario".into());
    Scenario { n, horizon, users, harvest, label }.validated()
}

/// Writes a trace as CSV (`k,i,users,masked,users_served,u_w,s_w,x_j,mu`),
/// sample-major.
pub fn write_trace_csv(trace: &SimTrace, path: &Path) -> Result<()> {
    let mut out = String::with_capacity(trace.n * trace.horizon * 64);
    out.push_str(TRACE_HEADER);
    out.push('\n');
    for (k, row) in trace.records.iter().enumerate() {
        for (i, rec) in row.iter().enumerate() {
            writeln!(
                out,
                "{k},{i},{},{},{},{},{},{},{}",
                rec.users, rec.masked, rec.users_served, rec.u, rec.s, rec.x, rec.mu
            )
            .expect("writing to a String cannot fail");
        }
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Writes metric rows as CSV (`metric,value`).
pub fn write_metrics_csv(rows: &[(String, f64)], path: &Path) -> Result<()> {
    let mut out = String::new();
    out.push_str(METRICS_HEADER);
    out.push('\n');
    for (name, value) in rows {
        writeln!(out, "{name},{value}").expect("writing to a String cannot fail");
    }
    std::fs::write(path, out)?;
    Ok(())
}
