//! Reference regimes: the whole system cleared as one area, and every area
//! cleared on its own under a fixed interchange schedule.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::admm::{Phase, TraceRecord};
use crate::coordination::{balance_duals, capacity_covers_demand, central_dispatch, project_commitment, repair_commitment, ClearingResult, Method};
use crate::error::{Error, Result};
use crate::miqp::{solve_miqp_with, MiqpOptions, MiqpStatus, RoundingHeuristic};
use crate::model::{partition_areas, NetworkCase, Partition};
use crate::qp::{solve_qp, DEFAULT_TOL};
use crate::uc::{build_ed, build_uc, commitment_cost, dispatch_cost, reconstruct_flags, Layout, Scope};

/// Threshold-and-repair rounding of a relaxed commitment, offered to branch
/// and bound as an incumbent candidate.
struct CommitmentRounding<'a> {
    case: &'a NetworkCase,
    layout: &'a Layout,
}

impl RoundingHeuristic for CommitmentRounding<'_> {
    fn round(&self, relaxed: &[f64]) -> Option<Vec<f64>> {
        let horizon = self.case.horizon;
        let mut u = vec![vec![0.0; horizon]; self.case.generators.len()];
        for (row, &g) in self.layout.commitments(relaxed).into_iter().zip(&self.layout.generators) {
            u[g] = row;
        }
        let servable = capacity_covers_demand(self.case);
        let s = repair_commitment(self.case, &project_commitment(&u, 0.5), &servable);
        if !s.is_valid() {
            return None;
        }
        Some(
            self.layout
                .generators
                .iter()
                .flat_map(|&g| s.u[g].iter().map(|&b| b as f64))
                .collect(),
        )
    }
}

/// Commitment of every scope generator from a solved program, as binaries
/// indexed by case generator (zero rows elsewhere).
fn extract_commitment(case: &NetworkCase, layout: &Layout, x: &[f64]) -> Vec<Vec<u8>> {
    let mut u = vec![vec![0u8; case.horizon]; case.generators.len()];
    for (row, &g) in layout.commitments(x).into_iter().zip(&layout.generators) {
        u[g] = row.iter().map(|&v| u8::from(v > 0.5)).collect();
    }
    u
}

/// The whole system cleared as a single area by branch and bound, then
/// priced by a centralized dispatch at the optimal commitment.
pub fn run_single_area(case: &NetworkCase, opts: &MiqpOptions) -> Result<ClearingResult> {
    case.validate()?;
    let (p, layout) = build_uc(case, &Scope::system(case))?;
    let heuristic = CommitmentRounding { case, layout: &layout };
    let sol = solve_miqp_with(&p, *opts, Some(&heuristic))?;
    let mut trace = vec![TraceRecord {
        phase: Phase::Single,
        restart: 0,
        iter: sol.nodes_explored,
        cost: sol.objective,
        feasible: sol.status != MiqpStatus::Infeasible,
        r_inf: 0.0,
        s_inf: 0.0,
    }];
    if sol.status == MiqpStatus::Infeasible {
        return Ok(ClearingResult::infeasible(case, Method::Single, "commitment problem is infeasible".into(), trace));
    }
    let schedule = reconstruct_flags(case, &extract_commitment(case, &layout, &sol.x));
    let (ed, ed_layout) = central_dispatch(case, &schedule)?;
    let dispatch: Vec<Vec<f64>> = (0..case.generators.len())
        .map(|k| (0..case.horizon).map(|t| ed_layout.output(case, &ed.x, k, t)).collect())
        .collect();
    let flows = branch_flows(case, &ed_layout, &ed.x, &Scope::system(case).branches);
    let cost = commitment_cost(case, &schedule).with_energy(dispatch_cost(case, &dispatch));
    trace[0].cost = cost.total;
    let converged = sol.status == MiqpStatus::Optimal;
    Ok(ClearingResult {
        method: Method::Single,
        schedule,
        lmps: balance_duals(&ed_layout, &ed, case.buses.len()),
        dispatch,
        flows,
        cost,
        feasible: true,
        converged,
        cause: (!converged).then(|| format!("node limit reached with gap {:.2e}", sol.proven_gap)),
        best_restart: None,
        best_iteration: None,
        trace,
    })
}

/// MW flows of `branches` from a solved program's angles.
fn branch_flows(case: &NetworkCase, layout: &Layout, x: &[f64], branches: &[usize]) -> Vec<Vec<f64>> {
    let ends = case.branch_ends();
    let mut flows = vec![vec![0.0; case.horizon]; case.branches.len()];
    let pos = |b: usize| layout.buses.iter().position(|&v| v == b).unwrap();
    for &k in branches {
        let (i, j) = (pos(ends[k].0), pos(ends[k].1));
        for t in 0..case.horizon {
            flows[k][t] =
                case.base_mva * (x[layout.theta(i, t)] - x[layout.theta(j, t)]) / case.branches[k].reactance;
        }
    }
    flows
}

/// One tie-line of an interface; positive weight counts flow in the
/// branch's from → to direction as export.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InterfaceMember {
    /// Branch id, or `br<k>` for the k-th (one-based) unnamed branch.
    pub branch: String,
    pub weight: f64,
}

/// Weighted aggregate of tie-line flows, read as export from `from_area`
/// to `to_area`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InterfaceDef {
    pub name: String,
    pub from_area: String,
    pub to_area: String,
    pub members: Vec<InterfaceMember>,
}

impl InterfaceDef {
    /// `(branch index, weight)` of every member.
    fn resolve(&self, case: &NetworkCase, partition: &Partition) -> Result<Vec<(usize, f64)>> {
        let bad = |message: String| Error::Validation {
            path: format!("interfaces.{}", self.name),
            message,
        };
        if self.members.is_empty() {
            return Err(bad("has no members".into()));
        }
        self.members
            .iter()
            .map(|m| {
                let k = (0..case.branches.len())
                    .find(|&k| case.branch_label(k) == m.branch)
                    .ok_or_else(|| bad(format!("unknown branch \"{}\"", m.branch)))?;
                if partition.tie_position(k).is_none() {
                    return Err(bad(format!("branch \"{}\" is not a tie-line", m.branch)));
                }
                if m.weight == 0.0 || !m.weight.is_finite() {
                    return Err(bad(format!("weight of \"{}\" must be nonzero", m.branch)));
                }
                Ok((k, m.weight))
            })
            .collect()
    }
}

/// One interface per pair of adjacent areas, over all tie-lines between
/// them with unit weights signed so that flow from the lower-indexed area
/// counts as export.
pub fn default_interfaces(case: &NetworkCase) -> Result<Vec<InterfaceDef>> {
    let partition = partition_areas(case)?;
    let bus_area = case.bus_areas();
    let ends = case.branch_ends();
    let mut out: Vec<InterfaceDef> = Vec::new();
    for &k in &partition.tie_lines {
        let (ai, aj) = (bus_area[ends[k].0], bus_area[ends[k].1]);
        let (lo, hi) = (ai.min(aj), ai.max(aj));
        let name = format!("{}-{}", case.areas[lo].id, case.areas[hi].id);
        let member = InterfaceMember {
            branch: case.branch_label(k),
            weight: if ai == lo { 1.0 } else { -1.0 },
        };
        match out.iter_mut().find(|d| d.name == name) {
            Some(d) => d.members.push(member),
            None => out.push(InterfaceDef {
                name,
                from_area: case.areas[lo].id.clone(),
                to_area: case.areas[hi].id.clone(),
                members: vec![member],
            }),
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum InterchangeValue {
    Constant { mw: f64 },
    /// `peak_hours` are one-based intervals.
    PeakOffpeak {
        peak_mw: f64,
        offpeak_mw: f64,
        peak_hours: Vec<usize>,
    },
}

impl InterchangeValue {
    /// Scheduled MW at zero-based interval `t`.
    pub fn at(&self, t: usize) -> f64 {
        match self {
            InterchangeValue::Constant { mw } => *mw,
            InterchangeValue::PeakOffpeak {
                peak_mw,
                offpeak_mw,
                peak_hours,
            } => {
                if peak_hours.contains(&(t + 1)) {
                    *peak_mw
                } else {
                    *offpeak_mw
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterchangeEntry {
    pub interface: String,
    #[serde(flatten)]
    pub value: InterchangeValue,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InterchangeSchedule {
    pub entries: Vec<InterchangeEntry>,
}

impl InterchangeSchedule {
    pub fn validate(&self, horizon: usize) -> Result<()> {
        for e in &self.entries {
            if let InterchangeValue::PeakOffpeak { peak_hours, .. } = &e.value {
                if let Some(h) = peak_hours.iter().find(|&&h| h == 0 || h > horizon) {
                    return Err(Error::Validation {
                        path: format!("interchange.{}.peak_hours", e.interface),
                        message: format!("hour {h} outside 1..={horizon}"),
                    });
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InterchangeMode {
    Constant,
    PeakOffpeak,
}

/// Default peak window: hours 8 through 23 of a day.
pub fn default_peak_hours(horizon: usize) -> Vec<usize> {
    (8..=23).filter(|&h| h <= horizon).collect()
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (mut sum, mut n) = (0.0, 0usize);
    for v in values {
        sum += v;
        n += 1;
    }
    (n > 0).then(|| sum / n as f64)
}

/// Interchange schedule matching the average weighted interface flows of a
/// cleared result, over the whole horizon or separately over peak and
/// off-peak hours.
pub fn derive_interchange(
    case: &NetworkCase,
    result: &ClearingResult,
    interfaces: &[InterfaceDef],
    mode: InterchangeMode,
    peak_hours: &[usize],
) -> Result<InterchangeSchedule> {
    let partition = partition_areas(case)?;
    let mut entries = Vec::with_capacity(interfaces.len());
    for def in interfaces {
        let members = def.resolve(case, &partition)?;
        let hourly: Vec<f64> = (0..case.horizon)
            .map(|t| members.iter().map(|&(k, w)| w * result.flows[k][t]).sum())
            .collect();
        let value = match mode {
            InterchangeMode::Constant => InterchangeValue::Constant {
                mw: mean(hourly.iter().copied()).unwrap_or(0.0),
            },
            InterchangeMode::PeakOffpeak => {
                let all = mean(hourly.iter().copied()).unwrap_or(0.0);
                let is_peak = |t: usize| peak_hours.contains(&(t + 1));
                InterchangeValue::PeakOffpeak {
                    peak_mw: mean((0..case.horizon).filter(|&t| is_peak(t)).map(|t| hourly[t])).unwrap_or(all),
                    offpeak_mw: mean((0..case.horizon).filter(|&t| !is_peak(t)).map(|t| hourly[t])).unwrap_or(all),
                    peak_hours: peak_hours.to_vec(),
                }
            }
        };
        entries.push(InterchangeEntry {
            interface: def.name.clone(),
            value,
        });
    }
    Ok(InterchangeSchedule { entries })
}

/// Scheduled MW on every tie-line per interval: each interface value spread
/// over its members as `F_l = I w_l / Σ w_k²`, so the weighted sum of the
/// member flows equals the interface value.
pub fn tie_schedule(
    case: &NetworkCase,
    interfaces: &[InterfaceDef],
    schedule: &InterchangeSchedule,
) -> Result<Vec<Vec<f64>>> {
    let partition = partition_areas(case)?;
    schedule.validate(case.horizon)?;
    let mut flows = vec![vec![0.0; case.horizon]; case.branches.len()];
    for entry in &schedule.entries {
        let def = interfaces
            .iter()
            .find(|d| d.name == entry.interface)
            .ok_or_else(|| Error::Validation {
                path: "interchange".into(),
                message: format!("unknown interface \"{}\"", entry.interface),
            })?;
        let members = def.resolve(case, &partition)?;
        let norm: f64 = members.iter().map(|&(_, w)| w * w).sum();
        for t in 0..case.horizon {
            let value = entry.value.at(t);
            for &(k, w) in &members {
                flows[k][t] += value * w / norm;
            }
        }
    }
    Ok(flows)
}

/// Every area cleared independently with its tie-lines replaced by the
/// scheduled flows, realized as fixed withdrawals (exports) and injections
/// (imports) at the area's own endpoint buses.
pub fn run_uncoordinated(
    case: &NetworkCase,
    interfaces: &[InterfaceDef],
    schedule: &InterchangeSchedule,
    opts: &MiqpOptions,
) -> Result<ClearingResult> {
    case.validate()?;
    let partition = partition_areas(case)?;
    let ties = tie_schedule(case, interfaces, schedule)?;
    let ends = case.branch_ends();
    let horizon = case.horizon;

    let mut trace = Vec::new();
    for &k in &partition.tie_lines {
        let lim = case.branches[k].flow_limit;
        if let Some(t) = (0..horizon).find(|&t| ties[k][t].abs() > lim + 1e-9) {
            return Ok(ClearingResult::infeasible(
                case,
                Method::Uncoordinated,
                format!(
                    "scheduled flow {:.3} MW on tie-line \"{}\" exceeds its limit at hour {}",
                    ties[k][t],
                    case.branch_label(k),
                    t + 1
                ),
                trace,
            ));
        }
    }

    let scopes: Vec<Scope> = partition
        .views
        .iter()
        .map(|view| {
            let mut inj = vec![vec![0.0; horizon]; view.internal_buses.len()];
            for &k in &view.tie_lines {
                let (i, j) = ends[k];
                for t in 0..horizon {
                    if let Ok(p) = view.internal_buses.binary_search(&i) {
                        inj[p][t] -= ties[k][t];
                    }
                    if let Ok(p) = view.internal_buses.binary_search(&j) {
                        inj[p][t] += ties[k][t];
                    }
                }
            }
            Scope::isolated(case, &partition, view.area_index, inj)
        })
        .collect();

    let solved: Vec<_> = scopes
        .par_iter()
        .map(|scope| -> Result<_> {
            let (p, layout) = build_uc(case, scope)?;
            let heuristic = CommitmentRounding { case, layout: &layout };
            let sol = solve_miqp_with(&p, *opts, Some(&heuristic))?;
            Ok((layout, sol))
        })
        .collect::<Result<_>>()?;

    let mut u = vec![vec![0u8; horizon]; case.generators.len()];
    let mut converged = true;
    for (a, (layout, sol)) in solved.iter().enumerate() {
        trace.push(TraceRecord {
            phase: Phase::Area,
            restart: 0,
            iter: a,
            cost: sol.objective,
            feasible: sol.status != MiqpStatus::Infeasible,
            r_inf: 0.0,
            s_inf: 0.0,
        });
        if sol.status == MiqpStatus::Infeasible {
            return Ok(ClearingResult::infeasible(
                case,
                Method::Uncoordinated,
                format!("area \"{}\" cannot clear under the scheduled interchange", case.areas[a].id),
                trace,
            ));
        }
        converged &= sol.status == MiqpStatus::Optimal;
        for (row, &g) in layout.commitments(&sol.x).into_iter().zip(&layout.generators) {
            u[g] = row.iter().map(|&v| u8::from(v > 0.5)).collect();
        }
    }
    let schedule = reconstruct_flags(case, &u);

    let mut dispatch = vec![vec![0.0; horizon]; case.generators.len()];
    let mut flows = ties;
    let mut lmps = vec![vec![0.0; horizon]; case.buses.len()];
    for (a, scope) in scopes.iter().enumerate() {
        let (qp, layout) = build_ed(case, scope, &schedule)?;
        let sol = solve_qp(&qp, DEFAULT_TOL)?;
        if !sol.is_optimal() {
            return Ok(ClearingResult::infeasible(
                case,
                Method::Uncoordinated,
                format!("dispatch of area \"{}\" is {:?}", case.areas[a].id, sol.status),
                trace,
            ));
        }
        for (k, &g) in layout.generators.iter().enumerate() {
            for t in 0..horizon {
                dispatch[g][t] = layout.output(case, &sol.x, k, t);
            }
        }
        let internal = branch_flows(case, &layout, &sol.x, &scope.branches);
        for &k in &scope.branches {
            flows[k] = internal[k].clone();
        }
        let prices = balance_duals(&layout, &sol, case.buses.len());
        for &b in &layout.buses {
            lmps[b] = prices[b].clone();
        }
    }
    let cost = commitment_cost(case, &schedule).with_energy(dispatch_cost(case, &dispatch));
    Ok(ClearingResult {
        method: Method::Uncoordinated,
        schedule,
        dispatch,
        flows,
        lmps,
        cost,
        feasible: true,
        converged,
        cause: (!converged).then(|| "node limit reached in at least one area".to_string()),
        best_restart: None,
        best_iteration: None,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::tests::{bus, gen, line};
    use crate::model::Area;

    fn two_area() -> NetworkCase {
        let mut a = gen("b1", 0.0, 100.0);
        a.cost_l = 10.0;
        let mut b = gen("b2", 0.0, 100.0);
        b.cost_l = 30.0;
        NetworkCase {
            horizon: 2,
            base_mva: 100.0,
            buses: vec![bus("b1", "A", vec![20.0, 30.0]), bus("b2", "B", vec![60.0, 50.0])],
            branches: vec![line("b1", "b2", 0.1, 100.0), line("b1", "b2", 0.1, 100.0)],
            generators: vec![a, b],
            areas: vec![Area { id: "A".into() }, Area { id: "B".into() }],
        }
    }

    #[test]
    fn one_gen_closed_form() {
        let mut g = gen("b1", 10.0, 50.0);
        g.cost_q = 0.01;
        g.cost_l = 20.0;
        g.cost_noload = 5.0;
        g.cost_startup = 100.0;
        g.initial_status_on = false;
        let case = NetworkCase {
            horizon: 2,
            base_mva: 100.0,
            buses: vec![bus("b1", "A", vec![30.0, 30.0])],
            branches: vec![],
            generators: vec![g],
            areas: vec![Area { id: "A".into() }],
        };
        let r = run_single_area(&case, &MiqpOptions::default()).unwrap();
        let expect = 2.0 * (0.01 * 900.0 + 20.0 * 30.0 + 5.0) + 100.0;
        assert!((r.cost.total - expect).abs() < 1e-6, "{}", r.cost.total);
        assert!((r.lmps[0][0] - (20.0 + 0.02 * 30.0)).abs() < 1e-5);
    }

    #[test]
    fn default_interface_per_pair() {
        let d = default_interfaces(&two_area()).unwrap();
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].name, "A-B");
        assert_eq!(d[0].members.len(), 2);
        assert!(d[0].members.iter().all(|m| m.weight == 1.0));
    }

    #[test]
    fn interchange_means() {
        let case = two_area();
        let mut r = ClearingResult::infeasible(&case, Method::Single, String::new(), vec![]);
        r.flows = vec![vec![60.0, 30.0], vec![60.0, 30.0]];
        let defs = default_interfaces(&case).unwrap();
        let c = derive_interchange(&case, &r, &defs, InterchangeMode::Constant, &[]).unwrap();
        assert_eq!(c.entries[0].value, InterchangeValue::Constant { mw: 90.0 });
        let p = derive_interchange(&case, &r, &defs, InterchangeMode::PeakOffpeak, &[2]).unwrap();
        match &p.entries[0].value {
            InterchangeValue::PeakOffpeak { peak_mw, offpeak_mw, .. } => {
                assert_eq!((*peak_mw, *offpeak_mw), (60.0, 120.0));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn weights_split_interface_flow() {
        let case = two_area();
        let mut defs = default_interfaces(&case).unwrap();
        defs[0].members[1].weight = 3.0;
        let s = InterchangeSchedule {
            entries: vec![InterchangeEntry {
                interface: "A-B".into(),
                value: InterchangeValue::Constant { mw: 100.0 },
            }],
        };
        let f = tie_schedule(&case, &defs, &s).unwrap();
        assert!((f[0][0] - 10.0).abs() < 1e-12);
        assert!((f[1][0] - 30.0).abs() < 1e-12);
        assert!((f[0][0] + 3.0 * f[1][0] - 100.0).abs() < 1e-12);
    }

    #[test]
    fn uncoordinated_with_zero_interchange_is_isolated() {
        let case = two_area();
        let defs = default_interfaces(&case).unwrap();
        let r = run_uncoordinated(&case, &defs, &InterchangeSchedule::default(), &MiqpOptions::default()).unwrap();
        assert!(r.feasible);
        let expect = 10.0 * 50.0 + 30.0 * 110.0;
        assert!((r.cost.total - expect).abs() < 1e-5, "{}", r.cost.total);
        assert_eq!(r.lmps[0][0], r.lmps[0][0]);
        assert!((r.lmps[1][0] - 30.0).abs() < 1e-5);
    }

    #[test]
    fn oversized_schedule_flagged() {
        let case = two_area();
        let defs = default_interfaces(&case).unwrap();
        let s = InterchangeSchedule {
            entries: vec![InterchangeEntry {
                interface: "A-B".into(),
                value: InterchangeValue::Constant { mw: 150.0 },
            }],
        };
        // A would need 170-180 MW from a 100 MW unit
        let r = run_uncoordinated(&case, &defs, &s, &MiqpOptions::default()).unwrap();
        assert!(!r.feasible);
        assert!(r.cause.unwrap().contains("\"A\""));
    }
}
