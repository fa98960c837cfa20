//! Exact baseline: exhaustive sleep/active scheduling.
//!
//! The original problem is a mixed-integer program — each SBS is either
//! asleep (`u = 0`, low system power) or active (`u > 0`, high system
//! power) — so the reference solver enumerates all `2^N` schedules. Under a
//! fixed schedule the remaining problem is continuous: each active cell
//! carries a strictly convex one-dimensional objective, coupled only by the
//! macro cell's user budget.
//!
//! Per fixed schedule the solver follows the classic primal-dual recipe:
//! solve each cell's box-constrained problem alone; if the joint budget is
//! violated, price it with a scalar `mu` and bisect — each cell's priced
//! grid profile is convex, so the argmin moves monotonically and a ternary
//! search plus golden refinement recovers it cheaply. The per-cell grids
//! are computed once per timestep and shared across every schedule and
//! every trial `mu`, which is what keeps full enumeration tractable at
//! `N = 16`.
//!
//! Counts may be privacy-masked (the robustness experiments feed masked
//! values into both objective and constraint); a negative masked count
//! flips the no-overservice constraint into a *lower* power bound, and the
//! cell's optimum pins to that bound regardless of the price.

use crate::distributed::ZoomDecision;
use crate::local_solver::golden_min;
use crate::model::{sat, users_served, SbsState, SimParams};
use crate::{Error, Result};

/// Tolerance for complementary slackness and budget satisfaction (users).
const CS_TOL: f64 = 1e-6;

/// Grid resolution of each cell's one-dimensional profile.
const GRID_POINTS: usize = 2_000;

/// Largest network the exhaustive solver accepts (`2^16` schedules).
pub const MAX_ENUMERATED_CELLS: usize = 16;

/// A sleep/active assignment for the whole network.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schedule {
    /// `true` marks an active cell.
    pub active: Vec<bool>,
}

impl Schedule {
    /// Builds the schedule encoded by the low `n` bits of `mask`.
    pub fn from_mask(mask: usize, n: usize) -> Self {
        Schedule { active: (0..n).map(|i| mask >> i & 1 == 1).collect() }
    }
}

/// Outcome of minimizing the network objective under one fixed schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct FixedScheduleSolution {
    /// Transmission powers (W); zero for sleeping cells.
    pub u: Vec<f64>,
    /// Exact network objective at `u`.
    pub objective: f64,
    /// Whether every constraint is satisfied (within the 1e-6 budget
    /// tolerance).
    pub feasible: bool,
    /// Budget price at the solution; zero when the budget is slack.
    pub mu: f64,
    /// Constraint violation when infeasible: the irreducible budget excess
    /// (users) plus any battery deficit a sleeping cell cannot avoid
    /// (joules per sampling period); zero when feasible.
    pub violation: f64,
}

// ---------------------------------------------------------------------------
// per-cell planning
// ---------------------------------------------------------------------------

/// Active-mode data for one cell, valid for one timestep.
struct ActivePlan {
    /// Feasible power range and whether the optimum is `mu`-independent.
    u_lo: f64,
    u_hi: f64,
    /// `Some(u)` when the optimum is pinned (nonpositive counts); the
    /// priced term can never move it.
    pinned: Option<f64>,
    /// Objective samples on the closed grid over `[u_lo, u_hi]`.
    grid_obj: Vec<f64>,
    /// Budget contribution `count - F(u, count)` at the same samples.
    grid_load: Vec<f64>,
    /// Smallest achievable budget contribution (at maximum service).
    load_min: f64,
    /// Power achieving `load_min`.
    u_at_load_min: f64,
}

/// Everything the schedule loop needs to know about one cell.
struct CellPlan {
    count: f64,
    sleep_obj: f64,
    /// Sleeping cells hand their whole count to the macro cell.
    sleep_load: f64,
    /// Battery shortfall of a sleeping cell (J); > 0 means even sleep
    /// overdraws the battery, making the whole instance infeasible.
    sleep_deficit: f64,
    active: Option<ActivePlan>,
}

/// Exact per-cell objective term for an explicit mode.
fn cell_objective(
    u: f64,
    s: f64,
    count: f64,
    state: &SbsState,
    w: f64,
    params: &SimParams,
    r: f64,
) -> f64 {
    let unserved = count - users_served(u, count, r);
    let next = sat(
        state.x + params.h * (w - u / params.gamma - s),
        params.x_max,
    );
    let gap = params.x_max - next;
    unserved * unserved + params.lambda * gap * gap
}

fn build_plan(
    state: &SbsState,
    count: f64,
    w: f64,
    params: &SimParams,
    r: f64,
) -> CellPlan {
    let sleep_raw = state.x + params.h * (w - params.s_sleep);
    let sleep_obj = cell_objective(0.0, params.s_sleep, count, state, w, params, r);
    let depletion = params.gamma * (state.x / params.h + w - params.s_active);
    let cap = r.powf(-1.9);

    // Feasible active range under the battery and no-overservice rules.
    let range = if count >= 0.0 {
        (depletion >= 0.0).then(|| (0.0, depletion.min(cap)))
    } else {
        (depletion >= cap).then(|| (cap, depletion))
    };
    let active = range.map(|(u_lo, u_hi)| {
        let load_at = |u: f64| count - users_served(u, count, r);
        if count <= 0.0 || u_hi == u_lo {
            // Zero counts gain nothing from power; negative counts pin to
            // the exact-service point: every objective and load piece is
            // nondecreasing beyond it.
            let u = u_lo;
            return ActivePlan {
                u_lo,
                u_hi,
                pinned: Some(u),
                grid_obj: Vec::new(),
                grid_load: Vec::new(),
                load_min: load_at(u),
                u_at_load_min: u,
            };
        }
        let step = (u_hi - u_lo) / GRID_POINTS as f64;
        let mut grid_obj = Vec::with_capacity(GRID_POINTS + 1);
        let mut grid_load = Vec::with_capacity(GRID_POINTS + 1);
        for j in 0..=GRID_POINTS {
            let u = u_lo + step * j as f64;
            grid_obj.push(cell_objective(u, params.s_active, count, state, w, params, r));
            grid_load.push(load_at(u));
        }
        // Positive counts: service grows with power, so the budget
        // contribution bottoms out at u_hi.
        ActivePlan {
            u_lo,
            u_hi,
            pinned: None,
            grid_obj,
            grid_load,
            load_min: load_at(u_hi),
            u_at_load_min: u_hi,
        }
    });

    CellPlan {
        count,
        sleep_obj,
        sleep_load: count,
        sleep_deficit: (-sleep_raw).max(0.0),
        active,
    }
}

impl ActivePlan {
    fn grid_u(&self, j: usize) -> f64 {
        self.u_lo + (self.u_hi - self.u_lo) * j as f64 / GRID_POINTS as f64
    }

    /// Minimizes `objective + mu * load` over the grid (ternary search:
    /// both pieces are convex in the grid index) then refines the winning
    /// cell by golden section on the continuous function.
    fn priced_argmin(
        &self,
        mu: f64,
        count: f64,
        state: &SbsState,
        w: f64,
        params: &SimParams,
        r: f64,
    ) -> (f64, f64, f64) {
        if let Some(u) = self.pinned {
            let obj = cell_objective(u, params.s_active, count, state, w, params, r);
            return (u, obj, count - users_served(u, count, r));
        }
        let d = |j: usize| self.grid_obj[j] + mu * self.grid_load[j];
        let (mut lo, mut hi) = (0usize, GRID_POINTS);
        while hi - lo > 2 {
            let m1 = lo + (hi - lo) / 3;
            let m2 = hi - (hi - lo) / 3;
            if d(m1) <= d(m2) {
                hi = m2;
            } else {
                lo = m1;
            }
        }
        let mut best = (d(lo), lo);
        for j in lo + 1..=hi {
            if d(j) < best.0 {
                best = (d(j), j);
            }
        }
        let j = best.1;
        let priced = |u: f64| {
            cell_objective(u, params.s_active, count, state, w, params, r)
                + mu * (count - users_served(u, count, r))
        };
        let a = self.grid_u(j.saturating_sub(1));
        let b = self.grid_u((j + 1).min(GRID_POINTS));
        let refined = golden_min(priced, a, b, 1e-9);
        // The refinement bracket is open; keep whichever candidate truly
        // wins, including the exact endpoints.
        let mut u_best = self.grid_u(j);
        let mut v_best = priced(u_best);
        for cand in [refined, a, b] {
            let v = priced(cand);
            if v < v_best {
                v_best = v;
                u_best = cand;
            }
        }
        let obj = cell_objective(u_best, params.s_active, count, state, w, params, r);
        (u_best, obj, count - users_served(u_best, count, r))
    }
}

// ---------------------------------------------------------------------------
// fixed-schedule solve
// ---------------------------------------------------------------------------

struct ScheduleEvaluation {
    solution: FixedScheduleSolution,
    /// Lower bound used for pruning: per-cell unconstrained minima.
    hard_infeasible: bool,
}

fn solve_with_plans(
    schedule: &Schedule,
    plans: &[CellPlan],
    states: &[SbsState],
    harvest: &[f64],
    params: &SimParams,
    r: f64,
) -> ScheduleEvaluation {
    let n = plans.len();
    let mut u = vec![0.0f64; n];
    // Fixed contributions: sleepers, pinned actives; collect the cells whose
    // power actually responds to the price.
    let mut fixed_obj = 0.0;
    let mut fixed_load = 0.0;
    let mut load_floor = 0.0;
    let mut sleep_deficit = 0.0;
    let mut free: Vec<usize> = Vec::new();
    for i in 0..n {
        let plan = &plans[i];
        if schedule.active[i] {
            match &plan.active {
                None => {
                    // This cell cannot run active mode at all this step.
                    return ScheduleEvaluation {
                        solution: FixedScheduleSolution {
                            u,
                            objective: f64::INFINITY,
                            feasible: false,
                            mu: 0.0,
                            violation: f64::INFINITY,
                        },
                        hard_infeasible: true,
                    };
                }
                Some(active) => {
                    load_floor += active.load_min;
                    if active.pinned.is_some() {
                        let (u_i, obj, load) =
                            active.priced_argmin(0.0, plan.count, &states[i], harvest[i], params, r);
                        u[i] = u_i;
                        fixed_obj += obj;
                        fixed_load += load;
                    } else {
                        free.push(i);
                    }
                }
            }
        } else {
            fixed_obj += plan.sleep_obj;
            fixed_load += plan.sleep_load;
            load_floor += plan.sleep_load;
            sleep_deficit += plan.sleep_deficit;
        }
    }

    // Evaluate the free cells at a given price, returning (objective sum,
    // load sum) and writing the powers.
    let solve_free = |mu: f64, u: &mut [f64]| -> (f64, f64) {
        let mut obj = 0.0;
        let mut load = 0.0;
        for &i in &free {
            let plan = plans[i].active.as_ref().unwrap();
            let (u_i, o, l) =
                plan.priced_argmin(mu, plans[i].count, &states[i], harvest[i], params, r);
            u[i] = u_i;
            obj += o;
            load += l;
        }
        (obj, load)
    };

    let budget = params.u_macro;
    let (mut obj_free, mut load_free) = solve_free(0.0, &mut u);
    let mut mu = 0.0;
    if fixed_load + load_free > budget + CS_TOL {
        if load_floor > budget + CS_TOL || sleep_deficit > 0.0 {
            // Even maximum service cannot fit the budget (or a sleeping
            // battery is overdrawn): report the least-violating powers.
            for &i in &free {
                let plan = plans[i].active.as_ref().unwrap();
                u[i] = plan.u_at_load_min;
            }
            let mut obj = fixed_obj;
            for &i in &free {
                obj += cell_objective(u[i], params.s_active, plans[i].count, &states[i], harvest[i], params, r);
            }
            return ScheduleEvaluation {
                solution: FixedScheduleSolution {
                    u,
                    objective: obj,
                    feasible: false,
                    mu: 0.0,
                    violation: (load_floor - budget).max(0.0) + sleep_deficit,
                },
                hard_infeasible: false,
            };
        }
        // Price the budget: the joint load decreases monotonically in mu.
        let mut lo = 0.0f64;
        let mut hi = 1.0f64;
        let mut scratch = u.clone();
        for _ in 0..200 {
            let (_, load) = solve_free(hi, &mut scratch);
            if fixed_load + load <= budget {
                break;
            }
            hi *= 2.0;
        }
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            let (_, load) = solve_free(mid, &mut scratch);
            if (fixed_load + load - budget).abs() <= CS_TOL {
                hi = mid;
                break;
            }
            if fixed_load + load > budget {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        // Land on the feasible side of the bracket.
        mu = hi;
        let (o, l) = solve_free(mu, &mut u);
        obj_free = o;
        load_free = l;
    }

    let feasible = fixed_load + load_free <= budget + CS_TOL && sleep_deficit == 0.0;
    debug_assert!(
        !feasible || mu * (budget - fixed_load - load_free).max(0.0) <= 1e-3 * (1.0 + mu),
        "complementary slackness violated: mu = {mu}, slack = {}",
        budget - fixed_load - load_free
    );
    ScheduleEvaluation {
        solution: FixedScheduleSolution {
            u,
            objective: fixed_obj + obj_free,
            feasible,
            mu,
            violation: if feasible { 0.0 } else { sleep_deficit },
        },
        hard_infeasible: false,
    }
}

/// Minimizes the exact network objective under one fixed sleep/active
/// schedule, subject to the power box, battery, no-overservice, and shared
/// budget constraints.
pub fn solve_fixed_schedule(
    schedule: &Schedule,
    states: &[SbsState],
    counts: &[f64],
    harvest: &[f64],
    params: &SimParams,
    r: f64,
) -> Result<FixedScheduleSolution> {
    check_dimensions(schedule.active.len(), states, counts, harvest, params)?;
    let plans: Vec<CellPlan> = (0..params.n)
        .map(|i| build_plan(&states[i], counts[i], harvest[i], params, r))
        .collect();
    Ok(solve_with_plans(schedule, &plans, states, harvest, params, r).solution)
}

// ---------------------------------------------------------------------------
// full enumeration
// ---------------------------------------------------------------------------

/// Solves the exact scheduling problem by enumerating all `2^N` schedules,
/// pruning by per-cell lower bounds.
///
/// `counts` may be true or masked values — the solver treats them as the
/// counts in both objective and budget. If no schedule is feasible, the
/// returned decision carries the least-violating schedule (budget excess
/// first, then objective).
pub fn solve_centralized(
    states: &[SbsState],
    counts: &[f64],
    harvest: &[f64],
    params: &SimParams,
    r: f64,
) -> Result<ZoomDecision> {
    if params.n > MAX_ENUMERATED_CELLS {
        return Err(Error::EnumerationGuard(format!(
            "{} cells would need {} schedules (cap {})",
            params.n,
            1u128 << params.n,
            MAX_ENUMERATED_CELLS
        )));
    }
    check_dimensions(params.n, states, counts, harvest, params)?;
    for (i, (&c, &w)) in counts.iter().zip(harvest).enumerate() {
        if !c.is_finite() || !w.is_finite() {
            return Err(Error::NonFinite(format!(
                "count or harvest of cell {i} (count = {c}, w = {w})"
            )));
        }
    }
    let n = params.n;
    let plans: Vec<CellPlan> = (0..n)
        .map(|i| build_plan(&states[i], counts[i], harvest[i], params, r))
        .collect();

    // Per-cell unconstrained lower bounds for pruning: the best an active
    // or sleeping cell can contribute, ignoring the shared budget.
    let bounds: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let sleep = plans[i].sleep_obj;
            let active = plans[i].active.as_ref().map_or(f64::INFINITY, |plan| {
                plan.priced_argmin(0.0, plans[i].count, &states[i], harvest[i], params, r).1
            });
            (sleep, active)
        })
        .collect();

    let mut order: Vec<(f64, usize)> = (0..1usize << n)
        .map(|mask| {
            let bound: f64 = (0..n)
                .map(|i| if mask >> i & 1 == 1 { bounds[i].1 } else { bounds[i].0 })
                .sum();
            (bound, mask)
        })
        .collect();
    order.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());

    let mut best_feasible: Option<(f64, Schedule, FixedScheduleSolution)> = None;
    let mut best_violating: Option<(f64, f64, Schedule, FixedScheduleSolution)> = None;
    for &(bound, mask) in &order {
        if let Some((best_obj, _, _)) = &best_feasible {
            if bound > *best_obj + CS_TOL {
                break; // every remaining schedule is provably worse
            }
        }
        let schedule = Schedule::from_mask(mask, n);
        let eval = solve_with_plans(&schedule, &plans, states, harvest, params, r);
        if eval.hard_infeasible {
            continue;
        }
        let sol = eval.solution;
        if sol.feasible {
            if best_feasible.as_ref().is_none_or(|(o, _, _)| sol.objective < *o) {
                best_feasible = Some((sol.objective, schedule, sol));
            }
        } else if best_violating
            .as_ref()
            .is_none_or(|(v, o, _, _)| {
                sol.violation < *v || (sol.violation == *v && sol.objective < *o)
            })
        {
            best_violating = Some((sol.violation, sol.objective, schedule, sol));
        }
    }

    let (schedule, solution) = match (best_feasible, best_violating) {
        (Some((_, sched, sol)), _) => (sched, sol),
        (None, Some((_, _, sched, sol))) => (sched, sol),
        (None, None) => {
            return Err(Error::EnumerationGuard(
                "no schedule evaluated: every cell is hard-infeasible".into(),
            ))
        }
    };

    let u = solution.u;
    let mut s: Vec<f64> = schedule
        .active
        .iter()
        .map(|&a| if a { params.s_active } else { params.s_sleep })
        .collect();
    // Canonicalize: an active cell that ended at exactly zero power (zero
    // or degenerate counts) is a sleeping cell.
    for i in 0..n {
        if schedule.active[i] && u[i] == 0.0 {
            s[i] = params.s_sleep;
        }
        debug_assert!(u[i] >= 0.0);
    }
    // Mode consistency is only visible in `s` when the two powers differ.
    debug_assert!(
        params.s_active == params.s_sleep
            || (0..n).all(|i| (u[i] == 0.0) == (s[i] == params.s_sleep))
    );
    Ok(ZoomDecision {
        u,
        s,
        mu_out: solution.mu,
        masked_counts: counts.to_vec(),
        iterates: None,
    })
}

fn check_dimensions(
    schedule_len: usize,
    states: &[SbsState],
    counts: &[f64],
    harvest: &[f64],
    params: &SimParams,
) -> Result<()> {
    let n = params.n;
    if schedule_len != n || states.len() != n || counts.len() != n || harvest.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "expected {n} cells, got schedule: {schedule_len}, states: {}, counts: {}, harvest: {}",
            states.len(),
            counts.len(),
            harvest.len()
        )));
    }
    Ok(())
}
