use rayon::prelude::*;

use super::{
    consensus_update, dual_update, residual, AreaDuals, ConsensusMap, ConsensusState, LocalValues, Phase,
    TraceRecord,
};
use crate::error::Result;
use crate::model::{partition_areas, NetworkCase, Partition};
use crate::qp::{solve_qp_with_bounds, QpOptions, QpSolution, QuadraticProgram, SparseMatrix};
use crate::uc::{build_ed, build_ed_subproblem, dispatch_cost, AlgoParams, CommitmentSchedule, Layout, Scope};

/// Area views of a case with the consensus bookkeeping between them.
#[derive(Debug, Clone)]
pub struct AreaSet {
    pub partition: Partition,
    pub scopes: Vec<Scope>,
    pub map: ConsensusMap,
}

impl AreaSet {
    pub fn new(case: &NetworkCase) -> Result<Self> {
        let partition = partition_areas(case)?;
        let scopes: Vec<Scope> = (0..case.areas.len())
            .map(|a| Scope::area(case, &partition, a))
            .collect();
        let boundaries: Vec<_> = scopes.iter().map(|s| &s.boundary).collect();
        let map = ConsensusMap::new(
            case.areas.iter().map(|a| a.id.clone()).collect(),
            &boundaries,
            partition.shared_buses.len(),
            partition.tie_lines.len(),
            case.horizon,
        );
        Ok(Self { partition, scopes, map })
    }
}

/// Consensus values and duals carried from one dispatch run into the next.
#[derive(Debug, Clone, PartialEq)]
pub struct EdWarmStart {
    pub consensus: ConsensusState,
    pub duals: Vec<AreaDuals>,
}

#[derive(Debug, Clone)]
pub struct EdOutcome {
    pub converged: bool,
    /// Why the run was not accepted, if it was not.
    pub cause: Option<String>,
    pub iterations: usize,
    pub r_inf: f64,
    pub s_inf: f64,
    /// Total output per generator and interval (MW).
    pub output: Vec<Vec<f64>>,
    /// Output above `p_min` per generator and interval (MW).
    pub above_min: Vec<Vec<f64>>,
    pub energy_cost: f64,
    /// Flow per branch and interval (MW, from → to).
    pub flows: Vec<Vec<f64>>,
    /// Balance-row duals of the owning area per bus and interval ($/MWh).
    pub lmps: Vec<Vec<f64>>,
    pub warm: EdWarmStart,
    pub trace: Vec<TraceRecord>,
}

fn qp_options() -> QpOptions {
    QpOptions {
        trust_convex: true,
        ..Default::default()
    }
}

fn solve(qp: &QuadraticProgram) -> Result<QpSolution> {
    solve_qp_with_bounds(qp, &qp.lower, &qp.upper, qp_options())
}

fn locals_of(layouts: &[&Layout], sols: &[QpSolution]) -> Vec<LocalValues> {
    layouts
        .iter()
        .zip(sols)
        .map(|(l, s)| LocalValues {
            theta: l.shared_angles(&s.x),
            flows: l.tie_flows(&s.x),
        })
        .collect()
}

/// Dispatch at a fixed commitment by consensus ADMM between areas.
///
/// Each iteration solves every area's dispatch with the augmented
/// Lagrangian terms, averages boundary copies, and updates the duals. Once
/// the largest boundary mismatch is at most `eps_ed` the assembled area
/// dispatch still disagrees on tie flows by up to that tolerance; it is
/// moved to the nearest dispatch that is feasible for the whole network
/// (see `restore`). Dispatch, flows and cost come from the restored point,
/// prices from the last consensus iteration.
pub fn run_consensus_ed(
    case: &NetworkCase,
    areas: &AreaSet,
    schedule: &CommitmentSchedule,
    params: &AlgoParams,
    warm: Option<&EdWarmStart>,
    restart: usize,
) -> Result<EdOutcome> {
    let stop = Stop {
        max_iter: params.n_ed,
        price_tol: None,
        phase: Phase::Ed,
    };
    consensus_ed(case, areas, schedule, params, warm, restart, stop)
}

/// Prices at a fixed commitment: the dispatch iteration continued, usually
/// from the warm start of a converged dispatch, until the area balance duals
/// are also settled.
///
/// Stopping on the boundary mismatch alone leaves every area's duals off by
/// the last consensus step: at each shared angle or tie flow the area
/// multipliers miss summing to zero by `n ρ |z̄ᵏ⁺¹ − z̄ᵏ|`, which moves the
/// balance duals by that amount over `base_mva`. This run also requires that
/// quantity to be at most `eps_lmp` ($/MWh), within `n_lmp` iterations.
pub fn run_consensus_prices(
    case: &NetworkCase,
    areas: &AreaSet,
    schedule: &CommitmentSchedule,
    params: &AlgoParams,
    warm: Option<&EdWarmStart>,
    restart: usize,
) -> Result<EdOutcome> {
    let stop = Stop {
        max_iter: params.n_lmp,
        price_tol: Some(params.eps_lmp),
        phase: Phase::Price,
    };
    consensus_ed(case, areas, schedule, params, warm, restart, stop)
}

struct Stop {
    max_iter: usize,
    price_tol: Option<f64>,
    phase: Phase,
}

/// Largest implied error in the area balance duals ($/MWh) from the step
/// between two consensus values.
fn price_residual(map: &ConsensusMap, old: &ConsensusState, new: &ConsensusState, rho: f64, base_mva: f64) -> f64 {
    let h = map.horizon;
    let mut worst = 0.0f64;
    for (members, o, n) in [
        (&map.shared, &old.theta_bar, &new.theta_bar),
        (&map.ties, &old.f_bar, &new.f_bar),
    ] {
        for (e, holders) in members.iter().enumerate() {
            for t in 0..h {
                let step = (n[e * h + t] - o[e * h + t]).abs();
                worst = worst.max(holders.len() as f64 * rho * step / base_mva);
            }
        }
    }
    worst
}

fn consensus_ed(
    case: &NetworkCase,
    areas: &AreaSet,
    schedule: &CommitmentSchedule,
    params: &AlgoParams,
    warm: Option<&EdWarmStart>,
    restart: usize,
    stop: Stop,
) -> Result<EdOutcome> {
    let map = &areas.map;
    let horizon = case.horizon;
    let bases: Vec<(QuadraticProgram, Layout)> = areas
        .scopes
        .iter()
        .map(|s| build_ed(case, s, schedule))
        .collect::<Result<_>>()?;
    let layouts: Vec<&Layout> = bases.iter().map(|b| &b.1).collect();

    let (mut z, mut duals) = match warm {
        Some(w) => (w.consensus.clone(), w.duals.clone()),
        None => (map.zero_state(), map.zero_duals()),
    };
    let mut out = EdOutcome {
        converged: false,
        cause: None,
        iterations: 0,
        r_inf: f64::INFINITY,
        s_inf: f64::INFINITY,
        output: vec![vec![0.0; horizon]; case.generators.len()],
        above_min: vec![vec![0.0; horizon]; case.generators.len()],
        energy_cost: f64::INFINITY,
        flows: vec![vec![0.0; horizon]; case.branches.len()],
        lmps: vec![vec![0.0; horizon]; case.buses.len()],
        warm: EdWarmStart {
            consensus: z.clone(),
            duals: duals.clone(),
        },
        trace: Vec::new(),
    };

    let mut last: Option<Vec<QpSolution>> = None;
    for m in 1..=stop.max_iter {
        let sols: Vec<QpSolution> = bases
            .par_iter()
            .enumerate()
            .map(|(a, (qp, layout))| {
                let bar = z.local(map, a);
                let sub = build_ed_subproblem(qp, layout, &duals[a].lambda, &duals[a].mu, &bar.theta, &bar.flows, params.rho_ed)?;
                solve(&sub)
            })
            .collect::<Result<_>>()?;
        out.iterations = m;
        if let Some(a) = sols.iter().position(|s| !s.is_optimal()) {
            out.cause = Some(format!(
                "dispatch of area \"{}\" is {:?} at iteration {m}",
                map.area_ids[a], sols[a].status
            ));
            out.trace.push(TraceRecord {
                phase: stop.phase,
                restart,
                iter: m,
                cost: f64::INFINITY,
                feasible: false,
                r_inf: f64::NAN,
                s_inf: f64::NAN,
            });
            return Ok(out);
        }
        let locals = locals_of(&layouts, &sols);
        let new_z = consensus_update(map, &locals.iter().cloned().map(Some).collect::<Vec<_>>())?;
        let res = residual(map, &locals, &new_z, Some(&z), params.rho_ed);
        let settled = res.r_inf <= params.eps_ed
            && stop
                .price_tol
                .map_or(true, |tol| price_residual(map, &z, &new_z, params.rho_ed, case.base_mva) <= tol);
        dual_update(map, &mut duals, &locals, &new_z, params.rho_ed);
        let cost: f64 = bases.iter().zip(&sols).map(|((qp, _), s)| qp.objective_at(&s.x)).sum();
        out.trace.push(TraceRecord {
            phase: stop.phase,
            restart,
            iter: m,
            cost,
            feasible: settled,
            r_inf: res.r_inf,
            s_inf: res.s_inf,
        });
        out.r_inf = res.r_inf;
        out.s_inf = res.s_inf;
        z = new_z;
        last = Some(sols);
        if settled {
            out.converged = true;
            break;
        }
    }
    out.warm = EdWarmStart {
        consensus: z.clone(),
        duals,
    };
    let sols = last.expect("at least one iteration");
    for (layout, sol) in layouts.iter().zip(&sols) {
        for i in 0..layout.n_internal {
            for t in 0..horizon {
                out.lmps[layout.buses[i]][t] = sol.duals_eq[layout.balance_rows[t * layout.n_internal + i]];
            }
        }
    }
    if !out.converged {
        out.cause = Some(format!(
            "{} not settled after {} iterations (boundary mismatch {:.3e})",
            if stop.price_tol.is_some() { "prices" } else { "dispatch" },
            stop.max_iter,
            out.r_inf
        ));
        return Ok(out);
    }

    let mut target = vec![vec![0.0; horizon]; case.generators.len()];
    for (layout, sol) in layouts.iter().zip(&sols) {
        for (k, &g) in layout.generators.iter().enumerate() {
            for t in 0..horizon {
                target[g][t] = sol.x[layout.p(k, t)];
            }
        }
    }
    let Some((sol, layout)) = restore(case, schedule, &target)? else {
        out.converged = false;
        out.cause = Some("no network-feasible dispatch near the consensus point".into());
        return Ok(out);
    };
    for (k, &g) in layout.generators.iter().enumerate() {
        for t in 0..horizon {
            out.output[g][t] = layout.output(case, &sol.x, k, t);
            out.above_min[g][t] = sol.x[layout.p(k, t)];
        }
    }
    for (br, &(i, j)) in case.branch_ends().iter().enumerate() {
        for t in 0..horizon {
            out.flows[br][t] =
                case.base_mva * (sol.x[layout.theta(i, t)] - sol.x[layout.theta(j, t)]) / case.branches[br].reactance;
        }
    }
    out.energy_cost = dispatch_cost(case, &out.output);
    Ok(out)
}

/// Largest constraint violation (MW, radians) accepted after restoration.
const RESTORE_TOL: f64 = 1e-7;

/// Nearest network-feasible dispatch, in least squares on output above
/// minimum, to the assembled area dispatch `target`. The commitment and every
/// system constraint are those of the centralized dispatch, so the result
/// conserves power and satisfies every flow limit exactly rather than to the
/// consensus tolerance. Returns the solution and the layout, or `None` if the
/// restored problem has no feasible point.
fn restore(
    case: &NetworkCase,
    schedule: &CommitmentSchedule,
    target: &[Vec<f64>],
) -> Result<Option<(QpSolution, Layout)>> {
    let scope = Scope::system(case);
    let (mut qp, layout) = build_ed(case, &scope, schedule)?;
    let n = qp.num_vars();
    qp.q = SparseMatrix::new(n, n);
    qp.c = vec![0.0; n];
    qp.constant = 0.0;
    for (k, &g) in layout.generators.iter().enumerate() {
        for t in 0..case.horizon {
            qp.add_square_penalty(&[(layout.p(k, t), 1.0)], target[g][t], 2.0);
        }
    }
    let sol = solve(&qp)?;
    // the solver's tolerance is relative; conservation is judged in MW
    if !sol.is_optimal() || qp.max_violation(&sol.x) > RESTORE_TOL {
        return Ok(None);
    }
    Ok(Some((sol, layout)))
}
