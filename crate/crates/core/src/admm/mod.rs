//! Consensus ADMM over area subproblems: averaging of shared angles and
//! tie-line flows, dual updates and residuals, plus the distributed
//! economic dispatch loop built on them.

mod ed;

pub use ed::{run_consensus_ed, run_consensus_prices, AreaSet, EdOutcome, EdWarmStart};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::uc::Boundary;

/// Which owner-area copies feed each consensus entry.
#[derive(Debug, Clone, PartialEq)]
pub struct ConsensusMap {
    pub horizon: usize,
    pub area_ids: Vec<String>,
    /// Per global shared bus: `(area, local entry)` pairs, ascending by area.
    pub shared: Vec<Vec<(usize, usize)>>,
    /// Per global tie-line: `(area, local entry)` pairs, ascending by area.
    pub ties: Vec<Vec<(usize, usize)>>,
    /// Per area: global index of each local shared entry.
    pub local_shared: Vec<Vec<usize>>,
    pub local_ties: Vec<Vec<usize>>,
}

impl ConsensusMap {
    pub fn new(
        area_ids: Vec<String>,
        boundaries: &[&Boundary],
        n_shared: usize,
        n_ties: usize,
        horizon: usize,
    ) -> Self {
        let mut shared = vec![Vec::new(); n_shared];
        let mut ties = vec![Vec::new(); n_ties];
        let mut local_shared = Vec::with_capacity(boundaries.len());
        let mut local_ties = Vec::with_capacity(boundaries.len());
        for (a, b) in boundaries.iter().enumerate() {
            for (e, s) in b.shared.iter().enumerate() {
                shared[s.index].push((a, e));
            }
            for (e, l) in b.ties.iter().enumerate() {
                ties[l.index].push((a, e));
            }
            local_shared.push(b.shared.iter().map(|s| s.index).collect());
            local_ties.push(b.ties.iter().map(|l| l.index).collect());
        }
        Self {
            horizon,
            area_ids,
            shared,
            ties,
            local_shared,
            local_ties,
        }
    }

    pub fn n_areas(&self) -> usize {
        self.area_ids.len()
    }

    /// Zero consensus of the right size.
    pub fn zero_state(&self) -> ConsensusState {
        ConsensusState {
            theta_bar: vec![0.0; self.shared.len() * self.horizon],
            f_bar: vec![0.0; self.ties.len() * self.horizon],
        }
    }

    /// Zero duals for every area.
    pub fn zero_duals(&self) -> Vec<AreaDuals> {
        (0..self.n_areas())
            .map(|a| AreaDuals {
                lambda: vec![0.0; self.local_shared[a].len() * self.horizon],
                mu: vec![0.0; self.local_ties[a].len() * self.horizon],
            })
            .collect()
    }
}

/// Consensus values, entry-major over global shared buses and tie-lines.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConsensusState {
    pub theta_bar: Vec<f64>,
    pub f_bar: Vec<f64>,
}

impl ConsensusState {
    /// The consensus entries seen by area `a`, in its local order.
    pub fn local(&self, map: &ConsensusMap, a: usize) -> LocalValues {
        let h = map.horizon;
        let gather = |globals: &[usize], src: &[f64]| {
            let mut out = Vec::with_capacity(globals.len() * h);
            for &g in globals {
                out.extend_from_slice(&src[g * h..(g + 1) * h]);
            }
            out
        };
        LocalValues {
            theta: gather(&map.local_shared[a], &self.theta_bar),
            flows: gather(&map.local_ties[a], &self.f_bar),
        }
    }
}

/// One area's copies of its shared angles and tie-line flows.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalValues {
    pub theta: Vec<f64>,
    pub flows: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AreaDuals {
    pub lambda: Vec<f64>,
    pub mu: Vec<f64>,
}

/// Element-wise averages over the areas holding each shared angle and tie
/// flow. Sums run in ascending area order so the result does not depend on
/// how the local values were produced.
pub fn consensus_update(map: &ConsensusMap, locals: &[Option<LocalValues>]) -> Result<ConsensusState> {
    if let Some(a) = (0..map.n_areas()).find(|&a| locals.get(a).map_or(true, Option::is_none)) {
        return Err(Error::MissingArea(map.area_ids[a].clone()));
    }
    let h = map.horizon;
    let average = |members: &[Vec<(usize, usize)>], pick: &dyn Fn(&LocalValues) -> &Vec<f64>| {
        let mut out = Vec::with_capacity(members.len() * h);
        for holders in members {
            for t in 0..h {
                let mut sum = 0.0;
                for &(a, e) in holders {
                    sum += pick(locals[a].as_ref().unwrap())[e * h + t];
                }
                out.push(if holders.is_empty() { 0.0 } else { sum / holders.len() as f64 });
            }
        }
        out
    };
    Ok(ConsensusState {
        theta_bar: average(&map.shared, &|l| &l.theta),
        f_bar: average(&map.ties, &|l| &l.flows),
    })
}

/// `λ ← λ + ρ (θ − θ̄)` and `μ ← μ + ρ (F − F̄)` for every area.
pub fn dual_update(
    map: &ConsensusMap,
    duals: &mut [AreaDuals],
    locals: &[LocalValues],
    consensus: &ConsensusState,
    rho: f64,
) {
    for (a, (d, local)) in duals.iter_mut().zip(locals).enumerate() {
        let bar = consensus.local(map, a);
        for ((l, x), z) in d.lambda.iter_mut().zip(&local.theta).zip(&bar.theta) {
            *l += rho * (x - z);
        }
        for ((m, x), z) in d.mu.iter_mut().zip(&local.flows).zip(&bar.flows) {
            *m += rho * (x - z);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Residuals {
    /// Per area: local minus consensus, angles then flows.
    pub r: Vec<Vec<f64>>,
    pub r_inf: f64,
    pub r_2: f64,
    pub s_inf: f64,
    pub s_2: f64,
}

/// Primal residual of every area against `consensus`, and the dual residual
/// `ρ (z^k − z^{k−1})` over each area's copies when `previous` is given.
pub fn residual(
    map: &ConsensusMap,
    locals: &[LocalValues],
    consensus: &ConsensusState,
    previous: Option<&ConsensusState>,
    rho: f64,
) -> Residuals {
    let mut r = Vec::with_capacity(locals.len());
    let (mut r_inf, mut r_sq, mut s_inf, mut s_sq) = (0.0f64, 0.0, 0.0f64, 0.0);
    for (a, local) in locals.iter().enumerate() {
        let bar = consensus.local(map, a);
        let diff: Vec<f64> = local
            .theta
            .iter()
            .zip(&bar.theta)
            .chain(local.flows.iter().zip(&bar.flows))
            .map(|(x, z)| x - z)
            .collect();
        for d in &diff {
            r_inf = r_inf.max(d.abs());
            r_sq += d * d;
        }
        r.push(diff);
        if let Some(prev) = previous {
            let old = prev.local(map, a);
            for (z, z0) in bar.theta.iter().zip(&old.theta).chain(bar.flows.iter().zip(&old.flows)) {
                let s = rho * (z - z0);
                s_inf = s_inf.max(s.abs());
                s_sq += s * s;
            }
        }
    }
    Residuals {
        r,
        r_inf,
        r_2: r_sq.sqrt(),
        s_inf,
        s_2: s_sq.sqrt(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    /// Relaxed commitment iteration.
    Uc,
    /// Distributed dispatch iteration.
    Ed,
    /// Dispatch iteration continued until prices settle.
    Price,
    /// Projected, repaired and dispatched commitment candidate.
    Candidate,
    /// Centralized solve.
    Single,
    /// Per-area solve under fixed interchange.
    Area,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Uc => "uc",
            Phase::Ed => "ed",
            Phase::Price => "price",
            Phase::Candidate => "candidate",
            Phase::Single => "single",
            Phase::Area => "area",
        }
    }
}

/// One row of an iteration trace.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRecord {
    pub phase: Phase,
    pub restart: usize,
    pub iter: usize,
    pub cost: f64,
    pub feasible: bool,
    pub r_inf: f64,
    pub s_inf: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::uc::{SharedAngle, TieFlow};

    /// Three areas in a ring: shared buses 0 (areas 0, 1), 1 (areas 0, 1, 2),
    /// 2 (areas 1, 2); tie-lines 0 (areas 0, 1), 1 (areas 1, 2). One hour.
    fn toy() -> ConsensusMap {
        let sh = |index| SharedAngle { index, pos: 0 };
        let tie = |index| TieFlow {
            index,
            branch: index,
            from: 0,
            to: 0,
            susceptance: 1.0,
        };
        let b0 = Boundary {
            shared: vec![sh(0), sh(1)],
            ties: vec![tie(0)],
        };
        let b1 = Boundary {
            shared: vec![sh(0), sh(1), sh(2)],
            ties: vec![tie(0), tie(1)],
        };
        let b2 = Boundary {
            shared: vec![sh(1), sh(2)],
            ties: vec![tie(1)],
        };
        ConsensusMap::new(vec!["A".into(), "B".into(), "C".into()], &[&b0, &b1, &b2], 3, 2, 1)
    }

    fn locals() -> Vec<LocalValues> {
        vec![
            LocalValues {
                theta: vec![0.1, 0.4],
                flows: vec![1.0],
            },
            LocalValues {
                theta: vec![0.3, 0.1, -0.2],
                flows: vec![0.6, 0.25],
            },
            LocalValues {
                theta: vec![0.7, 0.0],
                flows: vec![0.35],
            },
        ]
    }

    #[test]
    fn averages() {
        let map = toy();
        let z = consensus_update(&map, &locals().into_iter().map(Some).collect::<Vec<_>>()).unwrap();
        assert_eq!(z.theta_bar[0], (0.1 + 0.3) / 2.0);
        assert_eq!(z.theta_bar[1], (0.4 + 0.1 + 0.7) / 3.0);
        assert_eq!(z.theta_bar[2], (-0.2 + 0.0) / 2.0);
        assert_eq!(z.f_bar, vec![(1.0 + 0.6) / 2.0, (0.25 + 0.35) / 2.0]);
    }

    #[test]
    fn missing_area_named() {
        let map = toy();
        let mut l: Vec<Option<LocalValues>> = locals().into_iter().map(Some).collect();
        l[1] = None;
        match consensus_update(&map, &l) {
            Err(Error::MissingArea(a)) => assert_eq!(a, "B"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn dual_step() {
        let map = toy();
        let l = locals();
        let z = consensus_update(&map, &l.iter().cloned().map(Some).collect::<Vec<_>>()).unwrap();
        let mut d = map.zero_duals();
        dual_update(&map, &mut d, &l, &z, 2.0);
        assert_eq!(d[0].lambda[0], 2.0 * (0.1 - z.theta_bar[0]));
        assert_eq!(d[2].mu[0], 2.0 * (0.35 - z.f_bar[1]));
    }

    #[test]
    fn agreement_is_a_fixed_point() {
        let map = toy();
        let l = locals();
        let z = consensus_update(&map, &l.iter().cloned().map(Some).collect::<Vec<_>>()).unwrap();
        let agreed: Vec<LocalValues> = (0..3).map(|a| z.local(&map, a)).collect();
        let z2 = consensus_update(&map, &agreed.iter().cloned().map(Some).collect::<Vec<_>>()).unwrap();
        assert_eq!(z, z2);
        let res = residual(&map, &agreed, &z2, Some(&z), 5.0);
        assert_eq!(res.r_inf, 0.0);
        assert_eq!(res.s_inf, 0.0);
        let mut d = map.zero_duals();
        dual_update(&map, &mut d, &agreed, &z2, 5.0);
        assert_eq!(d, map.zero_duals());
    }

    #[test]
    fn single_deviation_residual() {
        let map = toy();
        let z = map.zero_state();
        let mut l: Vec<LocalValues> = (0..3).map(|a| z.local(&map, a)).collect();
        l[1].flows[1] = 0.05;
        let res = residual(&map, &l, &z, None, 1.0);
        assert_eq!(res.r_inf, 0.05);
        assert_eq!(res.r[1][4], 0.05);
    }
}
