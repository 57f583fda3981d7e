//! The multi-area heuristic: relaxed commitment by consensus ADMM, threshold
//! projection with repair, distributed dispatch of every candidate, and
//! retention of the cheapest candidate whose dispatch converged.

mod repair;

pub use repair::{capacity_covers_demand, project_commitment, repair_commitment, Servable};

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::admm::{
    consensus_update, dual_update, residual, run_consensus_ed, run_consensus_prices, AreaDuals, AreaSet, ConsensusState, EdOutcome,
    EdWarmStart, LocalValues, Phase, TraceRecord,
};
use crate::error::{Error, Result};
use crate::model::NetworkCase;
use crate::qp::{solve_qp, solve_qp_with_bounds, QpOptions, QpSolution, DEFAULT_TOL};
use crate::uc::{
    build_ed, build_relaxed_subproblem, build_uc, commitment_cost, AlgoParams, CommitmentSchedule, CostBreakdown,
    Layout, Scope,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Single,
    Uncoordinated,
    Coordinated,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Single => "single",
            Method::Uncoordinated => "uncoordinated",
            Method::Coordinated => "coordinated",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone)]
pub struct ClearingResult {
    pub method: Method,
    pub schedule: CommitmentSchedule,
    /// Total output per generator and interval (MW).
    pub dispatch: Vec<Vec<f64>>,
    /// Flow per branch and interval (MW, from → to).
    pub flows: Vec<Vec<f64>>,
    /// Price per bus and interval ($/MWh).
    pub lmps: Vec<Vec<f64>>,
    pub cost: CostBreakdown,
    /// A dispatch satisfying every constraint was found.
    pub feasible: bool,
    /// The solution method finished within its own limits (proven optimal
    /// branch and bound, converged dispatch).
    pub converged: bool,
    pub cause: Option<String>,
    /// Restart and iteration that produced the retained schedule.
    pub best_restart: Option<usize>,
    pub best_iteration: Option<usize>,
    pub trace: Vec<TraceRecord>,
}

impl ClearingResult {
    pub fn infeasible(case: &NetworkCase, method: Method, cause: String, trace: Vec<TraceRecord>) -> Self {
        let h = case.horizon;
        let zeros = |n: usize| vec![vec![0.0; h]; n];
        let ng = case.generators.len();
        Self {
            method,
            schedule: CommitmentSchedule {
                u: vec![vec![0; h]; ng],
                v: vec![vec![0; h]; ng],
                vh: vec![vec![0; h]; ng],
                w: vec![vec![0; h]; ng],
                violations: Vec::new(),
            },
            dispatch: zeros(ng),
            flows: zeros(case.branches.len()),
            lmps: zeros(case.buses.len()),
            cost: CostBreakdown {
                total: f64::INFINITY,
                ..Default::default()
            },
            feasible: false,
            converged: false,
            cause: Some(cause),
            best_restart: None,
            best_iteration: None,
            trace,
        }
    }

    /// Largest hourly mismatch between total generation and total demand (MW).
    pub fn conservation_residual(&self, case: &NetworkCase) -> f64 {
        (0..case.horizon)
            .map(|t| {
                let gen: f64 = self.dispatch.iter().map(|r| r[t]).sum();
                (gen - case.total_demand(t)).abs()
            })
            .fold(0.0, f64::max)
    }

    /// Largest nodal mismatch: generation minus demand minus net outflow on
    /// the reported branch flows, over all buses and intervals (MW).
    pub fn nodal_residual(&self, case: &NetworkCase) -> f64 {
        let gen_bus = case.generator_buses();
        let ends = case.branch_ends();
        let mut worst: f64 = 0.0;
        for t in 0..case.horizon {
            let mut net: Vec<f64> = case.buses.iter().map(|b| -b.demand[t]).collect();
            for (g, &b) in gen_bus.iter().enumerate() {
                net[b] += self.dispatch[g][t];
            }
            for (k, &(i, j)) in ends.iter().enumerate() {
                net[i] -= self.flows[k][t];
                net[j] += self.flows[k][t];
            }
            worst = net.iter().fold(worst, |m, v| m.max(v.abs()));
        }
        worst
    }

    /// Largest excess of any branch flow over its limit (MW); zero or
    /// negative when all limits hold.
    pub fn flow_excess(&self, case: &NetworkCase) -> f64 {
        let mut worst = f64::NEG_INFINITY;
        for (br, row) in case.branches.iter().zip(&self.flows) {
            for f in row {
                worst = worst.max(f.abs() - br.flow_limit);
            }
        }
        worst
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LmpMode {
    Centralized,
    Distributed,
}

/// Centralized dispatch of `schedule` over the whole network.
pub(crate) fn central_dispatch(case: &NetworkCase, schedule: &CommitmentSchedule) -> Result<(QpSolution, Layout)> {
    let (qp, layout) = build_ed(case, &Scope::system(case), schedule)?;
    let sol = solve_qp(&qp, DEFAULT_TOL)?;
    if !sol.is_optimal() {
        return Err(Error::Infeasible(format!("centralized dispatch is {:?}", sol.status)));
    }
    Ok((sol, layout))
}

pub(crate) fn balance_duals(layout: &Layout, sol: &QpSolution, n_buses: usize) -> Vec<Vec<f64>> {
    let mut lmps = vec![vec![0.0; layout.horizon]; n_buses];
    for i in 0..layout.n_internal {
        for t in 0..layout.horizon {
            lmps[layout.buses[i]][t] = sol.duals_eq[layout.balance_rows[t * layout.n_internal + i]];
        }
    }
    lmps
}

/// Prices per bus and interval: balance-row duals of the final dispatch.
/// In distributed mode each bus is priced by the area that owns it.
pub fn compute_lmps(
    case: &NetworkCase,
    schedule: &CommitmentSchedule,
    mode: LmpMode,
    params: &AlgoParams,
) -> Result<Vec<Vec<f64>>> {
    match mode {
        LmpMode::Centralized => {
            let (sol, layout) = central_dispatch(case, schedule)?;
            Ok(balance_duals(&layout, &sol, case.buses.len()))
        }
        LmpMode::Distributed => {
            let areas = AreaSet::new(case)?;
            let ed = run_consensus_ed(case, &areas, schedule, params, None, 0)?;
            if !ed.converged {
                return Err(Error::Infeasible(ed.cause.unwrap_or_default()));
            }
            let out = run_consensus_prices(case, &areas, schedule, params, Some(&ed.warm), 0)?;
            if !out.converged {
                return Err(Error::Infeasible(out.cause.unwrap_or_default()));
            }
            Ok(out.lmps)
        }
    }
}

/// Seed of restart `r`, mixed so neighbouring restarts draw unrelated streams.
fn restart_seed(seed: u64, r: usize) -> u64 {
    let mut z = seed ^ (r as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Starting consensus and duals of restart `r`: all zero for the first
/// restart, uniform draws otherwise. Tie flows start at the values implied
/// by the drawn angles.
fn initial_point(areas: &AreaSet, case: &NetworkCase, params: &AlgoParams, r: usize) -> (ConsensusState, Vec<AreaDuals>) {
    let map = &areas.map;
    let mut z = map.zero_state();
    let mut duals = map.zero_duals();
    if r == 0 {
        return (z, duals);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(restart_seed(params.seed, r));
    let a = params.init_angle_range;
    let d = params.init_dual_range;
    for v in z.theta_bar.iter_mut() {
        *v = if a > 0.0 { rng.gen_range(-a..=a) } else { 0.0 };
    }
    let h = case.horizon;
    let ends = case.branch_ends();
    for (e, &br) in areas.partition.tie_lines.iter().enumerate() {
        let (i, j) = ends[br];
        let (si, sj) = (
            areas.partition.shared_position(i).unwrap(),
            areas.partition.shared_position(j).unwrap(),
        );
        for t in 0..h {
            z.f_bar[e * h + t] = (z.theta_bar[si * h + t] - z.theta_bar[sj * h + t]) / case.branches[br].reactance;
        }
    }
    for ad in duals.iter_mut() {
        for v in ad.lambda.iter_mut().chain(ad.mu.iter_mut()) {
            *v = if d > 0.0 { rng.gen_range(-d..=d) } else { 0.0 };
        }
    }
    (z, duals)
}

struct Candidate {
    cost: CostBreakdown,
    schedule: CommitmentSchedule,
    ed: EdOutcome,
    restart: usize,
    iteration: usize,
}

/// The distributed commitment heuristic.
///
/// For each restart, every relaxed-commitment iteration solves all area
/// subproblems, averages their boundary copies and updates the duals from
/// the relaxed solutions. The relaxed commitments are then thresholded,
/// repaired and dispatched by consensus ADMM; a candidate whose dispatch
/// converged is priced at its fixed commitment costs plus the dispatch
/// energy cost, and the cheapest one over all restarts and iterations is
/// kept (earliest wins ties).
pub fn run_multi_area_uc(case: &NetworkCase, params: &AlgoParams) -> Result<ClearingResult> {
    params.validate()?;
    case.validate()?;
    let areas = AreaSet::new(case)?;
    let map = &areas.map;
    let ucs: Vec<_> = areas
        .scopes
        .iter()
        .map(|s| build_uc(case, s))
        .collect::<Result<Vec<_>>>()?;
    let opts = QpOptions {
        trust_convex: true,
        ..Default::default()
    };
    let servable = capacity_covers_demand(case);

    let mut trace = Vec::new();
    let mut best: Option<Candidate> = None;
    // dispatch outcomes are a function of the commitment alone
    let mut dispatched: HashMap<Vec<Vec<u8>>, (CostBreakdown, EdOutcome)> = HashMap::new();

    for r in 0..params.n_ic {
        let (mut z, mut duals) = initial_point(&areas, case, params, r);
        let mut ed_warm: Option<EdWarmStart> = None;
        for k in 1..=params.n_uc {
            let sols: Vec<QpSolution> = ucs
                .par_iter()
                .enumerate()
                .map(|(a, (p, layout))| {
                    let bar = z.local(map, a);
                    let qp = build_relaxed_subproblem(p, layout, &duals[a].lambda, &duals[a].mu, &bar.theta, &bar.flows, params.rho_uc)?;
                    solve_qp_with_bounds(&qp, &qp.lower, &qp.upper, opts)
                })
                .collect::<Result<_>>()?;
            if let Some(a) = sols.iter().position(|s| !s.is_optimal()) {
                log::warn!(
                    "restart {r}: relaxed commitment of area \"{}\" is {:?}",
                    map.area_ids[a],
                    sols[a].status
                );
                trace.push(TraceRecord {
                    phase: Phase::Uc,
                    restart: r,
                    iter: k,
                    cost: f64::INFINITY,
                    feasible: false,
                    r_inf: f64::NAN,
                    s_inf: f64::NAN,
                });
                break;
            }
            let locals: Vec<LocalValues> = ucs
                .iter()
                .zip(&sols)
                .map(|((_, l), s)| LocalValues {
                    theta: l.shared_angles(&s.x),
                    flows: l.tie_flows(&s.x),
                })
                .collect();
            let new_z = consensus_update(map, &locals.iter().cloned().map(Some).collect::<Vec<_>>())?;
            let res = residual(map, &locals, &new_z, Some(&z), params.rho_uc);
            dual_update(map, &mut duals, &locals, &new_z, params.rho_uc);
            z = new_z;
            let relaxed_cost: f64 = ucs.iter().zip(&sols).map(|((p, _), s)| p.qp.objective_at(&s.x)).sum();
            trace.push(TraceRecord {
                phase: Phase::Uc,
                restart: r,
                iter: k,
                cost: relaxed_cost,
                feasible: true,
                r_inf: res.r_inf,
                s_inf: res.s_inf,
            });

            let mut u_relaxed = vec![Vec::new(); case.generators.len()];
            for ((_, layout), s) in ucs.iter().zip(&sols) {
                for (kk, row) in layout.commitments(&s.x).into_iter().enumerate() {
                    u_relaxed[layout.generators[kk]] = row;
                }
            }
            let schedule = repair_commitment(case, &project_commitment(&u_relaxed, params.xi), &servable);
            if !schedule.is_valid() {
                trace.push(TraceRecord {
                    phase: Phase::Candidate,
                    restart: r,
                    iter: k,
                    cost: f64::INFINITY,
                    feasible: false,
                    r_inf: f64::NAN,
                    s_inf: f64::NAN,
                });
                continue;
            }

            let (cost, ed) = match dispatched.get(&schedule.u) {
                Some(hit) => hit.clone(),
                None => {
                    let ed = run_consensus_ed(case, &areas, &schedule, params, ed_warm.as_ref(), r)?;
                    trace.extend(ed.trace.iter().cloned());
                    let cost = commitment_cost(case, &schedule).with_energy(ed.energy_cost);
                    dispatched.insert(schedule.u.clone(), (cost, ed.clone()));
                    (cost, ed)
                }
            };
            ed_warm = Some(ed.warm.clone());
            trace.push(TraceRecord {
                phase: Phase::Candidate,
                restart: r,
                iter: k,
                cost: if ed.converged { cost.total } else { f64::INFINITY },
                feasible: ed.converged,
                r_inf: ed.r_inf,
                s_inf: ed.s_inf,
            });
            if ed.converged && best.as_ref().map_or(true, |b| cost.total < b.cost.total) {
                best = Some(Candidate {
                    cost,
                    schedule,
                    ed,
                    restart: r,
                    iteration: k,
                });
            }
        }
    }

    Ok(match best {
        Some(b) => {
            let prices = run_consensus_prices(case, &areas, &b.schedule, params, Some(&b.ed.warm), b.restart)?;
            trace.extend(prices.trace.iter().cloned());
            let (lmps, cause) = if prices.converged {
                (prices.lmps, None)
            } else {
                (b.ed.lmps, prices.cause.map(|c| format!("dispatch prices kept: {c}")))
            };
            ClearingResult {
                method: Method::Coordinated,
                schedule: b.schedule,
                dispatch: b.ed.output,
                flows: b.ed.flows,
                lmps,
                cost: b.cost,
                feasible: true,
                converged: cause.is_none(),
                cause,
            best_restart: Some(b.restart),
                best_iteration: Some(b.iteration),
                trace,
            }
        }
        None => ClearingResult::infeasible(
            case,
            Method::Coordinated,
            "no candidate commitment reached a converged multi-area dispatch".into(),
            trace,
        ),
    })
}
