//! Unit-commitment and economic-dispatch program assembly.
//!
//! Programs are built over a [`Scope`]: the whole system, one area's view
//! (internal buses plus adjacent external buses, for the consensus
//! decomposition) or one area in isolation with fixed boundary injections.

mod build;
mod cost;
mod flags;

pub use build::{build_ed, build_ed_subproblem, build_relaxed_subproblem, build_uc, RowTally};
pub use cost::{commitment_cost, cost_eval, dispatch_cost, CostBreakdown};
pub use flags::{
    check_min_times, forced_off_until, forced_on_until, hot_start_allowed, reconstruct_flags,
    CommitmentSchedule, TimeRule, Violation,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{NetworkCase, Partition};

/// A shared bus angle appearing in a scope.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SharedAngle {
    /// Position in [`Partition::shared_buses`].
    pub index: usize,
    /// Position in [`Scope::buses`].
    pub pos: usize,
}

/// A tie-line whose flow appears in a scope.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TieFlow {
    /// Position in [`Partition::tie_lines`].
    pub index: usize,
    pub branch: usize,
    /// Positions of the endpoints in [`Scope::buses`].
    pub from: usize,
    pub to: usize,
    /// `1 / reactance`: per-unit flow per radian of angle difference.
    pub susceptance: f64,
}

/// Consensus quantities of a scope. Boundary vectors are laid out
/// entry-major: element `e * horizon + t`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Boundary {
    pub shared: Vec<SharedAngle>,
    pub ties: Vec<TieFlow>,
}

impl Boundary {
    pub fn is_empty(&self) -> bool {
        self.shared.is_empty() && self.ties.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scope {
    /// Case bus indices carrying angle variables; the first `n_internal`
    /// have balance rows.
    pub buses: Vec<usize>,
    pub n_internal: usize,
    /// Branches whose flows enter balance rows and flow limits.
    pub branches: Vec<usize>,
    pub generators: Vec<usize>,
    /// Positions in `buses` whose angle is fixed at zero.
    pub references: Vec<usize>,
    /// Fixed injections (MW) per internal bus position and interval.
    pub injections: Option<Vec<Vec<f64>>>,
    pub boundary: Boundary,
}

impl Scope {
    /// The whole case as one area.
    pub fn system(case: &NetworkCase) -> Self {
        let buses: Vec<usize> = (0..case.buses.len()).collect();
        let branches: Vec<usize> = (0..case.branches.len()).collect();
        let mut s = Scope {
            n_internal: buses.len(),
            buses,
            branches,
            generators: (0..case.generators.len()).collect(),
            references: Vec::new(),
            injections: None,
            boundary: Boundary::default(),
        };
        s.references = component_references(case, &s, |_| true);
        s
    }

    /// One area's view for the consensus decomposition. Only the component
    /// holding the case reference bus, and components without any shared
    /// bus, get a local reference; the rest are anchored through consensus.
    pub fn area(case: &NetworkCase, partition: &Partition, a: usize) -> Self {
        let view = &partition.views[a];
        let buses = view.view_buses();
        let mut branches = view.internal_branches.clone();
        branches.extend_from_slice(&view.tie_lines);
        branches.sort_unstable();
        let pos_of = |bus: usize| buses.iter().position(|&b| b == bus).expect("bus in view");

        let mut shared: Vec<SharedAngle> = buses
            .iter()
            .enumerate()
            .filter_map(|(pos, &b)| partition.shared_position(b).map(|index| SharedAngle { index, pos }))
            .collect();
        shared.sort_by_key(|s| s.index);
        let ends = case.branch_ends();
        let ties = view
            .tie_lines
            .iter()
            .map(|&k| TieFlow {
                index: partition.tie_position(k).expect("tie-line"),
                branch: k,
                from: pos_of(ends[k].0),
                to: pos_of(ends[k].1),
                susceptance: 1.0 / case.branches[k].reactance,
            })
            .collect();

        let mut s = Scope {
            n_internal: view.internal_buses.len(),
            buses,
            branches,
            generators: view.generators.clone(),
            references: Vec::new(),
            injections: None,
            boundary: Boundary { shared, ties },
        };
        let global_ref = reference_bus(case, 0..case.buses.len());
        let is_shared: Vec<bool> = s.buses.iter().map(|&b| partition.shared_position(b).is_some()).collect();
        s.references = component_references(case, &s, |members| {
            members.iter().any(|&p| s.buses[p] == global_ref) || !members.iter().any(|&p| is_shared[p])
        });
        s
    }

    /// One area alone: internal buses and branches only, with `injections`
    /// (MW, per internal bus in ascending case order, per interval) standing
    /// in for the tie-lines.
    pub fn isolated(case: &NetworkCase, partition: &Partition, a: usize, injections: Vec<Vec<f64>>) -> Self {
        let view = &partition.views[a];
        let mut s = Scope {
            buses: view.internal_buses.clone(),
            n_internal: view.internal_buses.len(),
            branches: view.internal_branches.clone(),
            generators: view.generators.clone(),
            references: Vec::new(),
            injections: Some(injections),
            boundary: Boundary::default(),
        };
        s.references = component_references(case, &s, |_| true);
        s
    }

    pub fn check(&self, case: &NetworkCase) -> Result<()> {
        if let Some(inj) = &self.injections {
            if inj.len() != self.n_internal || inj.iter().any(|r| r.len() != case.horizon) {
                return Err(Error::Dimension(format!(
                    "injections must be {} x {}",
                    self.n_internal, case.horizon
                )));
            }
        }
        Ok(())
    }
}

/// Lowest-id bus among `buses`.
pub fn reference_bus(case: &NetworkCase, buses: impl IntoIterator<Item = usize>) -> usize {
    buses
        .into_iter()
        .min_by(|&a, &b| case.buses[a].id.cmp(&case.buses[b].id))
        .expect("nonempty bus set")
}

/// Connected components of the scope's branch graph, as ascending bus
/// positions, ordered by their first member.
pub fn components(case: &NetworkCase, scope: &Scope) -> Vec<Vec<usize>> {
    let n = scope.buses.len();
    let pos: std::collections::HashMap<usize, usize> =
        scope.buses.iter().enumerate().map(|(p, &b)| (b, p)).collect();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    let ends = case.branch_ends();
    for &k in &scope.branches {
        let (i, j) = ends[k];
        let (Some(&pi), Some(&pj)) = (pos.get(&i), pos.get(&j)) else {
            continue;
        };
        let (a, b) = (find(&mut parent, pi), find(&mut parent, pj));
        if a != b {
            parent[a] = b;
        }
    }
    let mut comps: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for p in 0..n {
        let r = find(&mut parent, p);
        comps.entry(r).or_default().push(p);
    }
    let mut out: Vec<Vec<usize>> = comps.into_values().collect();
    out.sort_by_key(|m| m[0]);
    out
}

/// The lowest-id bus position of every connected component for which
/// `wants` holds, ascending.
fn component_references(case: &NetworkCase, scope: &Scope, wants: impl Fn(&[usize]) -> bool) -> Vec<usize> {
    let mut refs: Vec<usize> = components(case, scope)
        .iter()
        .filter(|m| wants(m))
        .map(|m| {
            let bus = reference_bus(case, m.iter().map(|&p| scope.buses[p]));
            scope.buses.iter().position(|&b| b == bus).unwrap()
        })
        .collect();
    refs.sort_unstable();
    refs
}

/// Variable placement of a built program. Unit-commitment programs use
/// hour blocks `[u, p, v, vH, w, θ]`; dispatch programs use `[p, θ]`, where
/// `p` is output above `p_min`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    pub horizon: usize,
    /// Case generator indices, in local order.
    pub generators: Vec<usize>,
    /// Case bus indices, in local order; the first `n_internal` have
    /// balance rows.
    pub buses: Vec<usize>,
    pub n_internal: usize,
    pub boundary: Boundary,
    /// Equality row of the balance at internal bus `i`, interval `t`:
    /// element `t * n_internal + i`.
    pub balance_rows: Vec<usize>,
    /// Present for dispatch programs: `p_min * u` per local generator and
    /// interval (element `k * horizon + t`).
    pub fixed_min_output: Option<Vec<f64>>,
    pub tally: RowTally,
}

impl Layout {
    pub fn is_commitment(&self) -> bool {
        self.fixed_min_output.is_none()
    }

    fn ng(&self) -> usize {
        self.generators.len()
    }

    pub fn block(&self) -> usize {
        if self.is_commitment() {
            5 * self.ng() + self.buses.len()
        } else {
            self.ng() + self.buses.len()
        }
    }

    pub fn num_vars(&self) -> usize {
        self.block() * self.horizon
    }

    pub fn u(&self, k: usize, t: usize) -> usize {
        debug_assert!(self.is_commitment());
        t * self.block() + k
    }

    pub fn p(&self, k: usize, t: usize) -> usize {
        if self.is_commitment() {
            t * self.block() + self.ng() + k
        } else {
            t * self.block() + k
        }
    }

    pub fn v(&self, k: usize, t: usize) -> usize {
        debug_assert!(self.is_commitment());
        t * self.block() + 2 * self.ng() + k
    }

    pub fn vh(&self, k: usize, t: usize) -> usize {
        debug_assert!(self.is_commitment());
        t * self.block() + 3 * self.ng() + k
    }

    pub fn w(&self, k: usize, t: usize) -> usize {
        debug_assert!(self.is_commitment());
        t * self.block() + 4 * self.ng() + k
    }

    pub fn theta(&self, b: usize, t: usize) -> usize {
        let gens = if self.is_commitment() { 5 * self.ng() } else { self.ng() };
        t * self.block() + gens + b
    }

    pub fn n_shared(&self) -> usize {
        self.boundary.shared.len() * self.horizon
    }

    pub fn n_ties(&self) -> usize {
        self.boundary.ties.len() * self.horizon
    }

    /// Shared-bus angles at `x`, entry-major.
    pub fn shared_angles(&self, x: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_shared());
        for s in &self.boundary.shared {
            for t in 0..self.horizon {
                out.push(x[self.theta(s.pos, t)]);
            }
        }
        out
    }

    /// Per-unit tie-line flows `(θ_from − θ_to) / x` at `x`, entry-major.
    pub fn tie_flows(&self, x: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_ties());
        for l in &self.boundary.ties {
            for t in 0..self.horizon {
                out.push((x[self.theta(l.from, t)] - x[self.theta(l.to, t)]) * l.susceptance);
            }
        }
        out
    }

    /// Total output `p_min u + p` of local generator `k` in MW.
    pub fn output(&self, case: &NetworkCase, x: &[f64], k: usize, t: usize) -> f64 {
        let base = match &self.fixed_min_output {
            Some(m) => m[k * self.horizon + t],
            None => case.generators[self.generators[k]].p_min * x[self.u(k, t)],
        };
        base + x[self.p(k, t)]
    }

    /// Relaxed commitment values `u` per local generator and interval.
    pub fn commitments(&self, x: &[f64]) -> Vec<Vec<f64>> {
        (0..self.ng())
            .map(|k| (0..self.horizon).map(|t| x[self.u(k, t)]).collect())
            .collect()
    }
}

fn default_rho_uc() -> f64 {
    1000.0
}
fn default_rho_ed() -> f64 {
    1500.0
}
fn default_xi() -> f64 {
    0.5
}
fn default_eps_ed() -> f64 {
    1e-3
}
fn default_n_ic() -> usize {
    4
}
fn default_n_uc() -> usize {
    10
}
fn default_n_ed() -> usize {
    200
}
fn default_eps_lmp() -> f64 {
    1e-5
}
fn default_n_lmp() -> usize {
    2000
}
fn default_angle_range() -> f64 {
    0.1
}
fn default_dual_range() -> f64 {
    10.0
}

/// Tuning of the multi-area heuristic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgoParams {
    #[serde(default = "default_rho_uc")]
    pub rho_uc: f64,
    #[serde(default = "default_rho_ed")]
    pub rho_ed: f64,
    #[serde(default = "default_xi")]
    pub xi: f64,
    /// Stopping tolerance on the boundary mismatch, per unit.
    #[serde(default = "default_eps_ed")]
    pub eps_ed: f64,
    #[serde(default = "default_n_ic")]
    pub n_ic: usize,
    #[serde(default = "default_n_uc")]
    pub n_uc: usize,
    #[serde(default = "default_n_ed")]
    pub n_ed: usize,
    /// Tolerance on the implied price error of distributed LMPs ($/MWh).
    #[serde(default = "default_eps_lmp")]
    pub eps_lmp: f64,
    #[serde(default = "default_n_lmp")]
    pub n_lmp: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_angle_range")]
    pub init_angle_range: f64,
    #[serde(default = "default_dual_range")]
    pub init_dual_range: f64,
}

impl Default for AlgoParams {
    fn default() -> Self {
        Self {
            rho_uc: default_rho_uc(),
            rho_ed: default_rho_ed(),
            xi: default_xi(),
            eps_ed: default_eps_ed(),
            n_ic: default_n_ic(),
            n_uc: default_n_uc(),
            n_ed: default_n_ed(),
            eps_lmp: default_eps_lmp(),
            n_lmp: default_n_lmp(),
            seed: 0,
            init_angle_range: default_angle_range(),
            init_dual_range: default_dual_range(),
        }
    }
}

impl AlgoParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, message: &str| {
            Err(Error::Validation {
                path: format!("params.{field}"),
                message: message.into(),
            })
        };
        if !(self.xi > 0.0 && self.xi < 1.0) {
            return bad("xi", "must lie strictly between 0 and 1");
        }
        if !(self.rho_uc > 0.0) {
            return bad("rho_uc", "must be positive");
        }
        if !(self.rho_ed > 0.0) {
            return bad("rho_ed", "must be positive");
        }
        if !(self.eps_ed > 0.0) {
            return bad("eps_ed", "must be positive");
        }
        if !(self.eps_lmp > 0.0) {
            return bad("eps_lmp", "must be positive");
        }
        for (name, v) in [("n_ic", self.n_ic), ("n_uc", self.n_uc), ("n_ed", self.n_ed), ("n_lmp", self.n_lmp)] {
            if v == 0 {
                return bad(name, "must be at least 1");
            }
        }
        if !(self.init_angle_range >= 0.0) {
            return bad("init_angle_range", "must be non-negative");
        }
        if !(self.init_dual_range >= 0.0) {
            return bad("init_dual_range", "must be non-negative");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::partition_areas;
    use crate::model::tests::{bus, gen, line};
    use crate::model::Area;

    pub(crate) fn three_bus_two_area() -> NetworkCase {
        NetworkCase {
            horizon: 2,
            base_mva: 100.0,
            buses: vec![
                bus("b1", "A", vec![10.0, 10.0]),
                bus("b2", "A", vec![0.0, 0.0]),
                bus("b3", "B", vec![40.0, 50.0]),
            ],
            branches: vec![line("b1", "b2", 0.1, 100.0), line("b2", "b3", 0.2, 100.0)],
            generators: vec![gen("b1", 0.0, 100.0), gen("b3", 0.0, 100.0)],
            areas: vec![Area { id: "A".into() }, Area { id: "B".into() }],
        }
    }

    #[test]
    fn area_scopes() {
        let case = three_bus_two_area();
        let part = partition_areas(&case).unwrap();
        let a = Scope::area(&case, &part, 0);
        assert_eq!(a.buses, vec![0, 1, 2]);
        assert_eq!(a.n_internal, 2);
        assert_eq!(a.references, vec![0]);
        assert_eq!(a.boundary.shared.len(), 2);
        assert_eq!(a.boundary.ties[0].from, 1);
        let b = Scope::area(&case, &part, 1);
        assert_eq!(b.buses, vec![2, 1]);
        // anchored through consensus only
        assert!(b.references.is_empty());
        assert_eq!(b.boundary.ties[0].from, 1);
        assert_eq!(b.boundary.ties[0].to, 0);
    }

    #[test]
    fn isolated_scope_has_own_reference() {
        let case = three_bus_two_area();
        let part = partition_areas(&case).unwrap();
        let b = Scope::isolated(&case, &part, 1, vec![vec![0.0; 2]]);
        assert_eq!(b.buses, vec![2]);
        assert_eq!(b.references, vec![0]);
        assert!(b.branches.is_empty());
    }

    #[test]
    fn params_defaults_and_validation() {
        let p: AlgoParams = serde_json::from_str("{}").unwrap();
        assert_eq!(p, AlgoParams::default());
        p.validate().unwrap();
        let bad = AlgoParams { xi: 1.0, ..p };
        assert!(bad.validate().is_err());
    }
}
