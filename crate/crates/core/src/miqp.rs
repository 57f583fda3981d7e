//! Exact branch-and-bound for convex QPs with binary variables.
//!
//! Nodes are explored best-first by parent bound (FIFO among equal bounds),
//! branching on the most fractional binary with ties broken by lowest index
//! and the down branch queued first. Nodes are taken from the queue in
//! batches of fixed size so results never depend on the number of worker
//! threads that solve a batch.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::qp::{solve_qp_with_bounds, QpOptions, QpSolution, QpStatus, QuadraticProgram};

#[derive(Debug, Clone)]
pub struct MixedIntegerQp {
    pub qp: QuadraticProgram,
    pub binary_indices: Vec<usize>,
}

impl MixedIntegerQp {
    pub fn validate(&self) -> Result<()> {
        self.qp.check_dimensions()?;
        let n = self.qp.num_vars();
        for &j in &self.binary_indices {
            if j >= n {
                return Err(Error::Dimension(format!("binary index {j} out of range {n}")));
            }
            if self.qp.lower[j] < 0.0 || self.qp.upper[j] > 1.0 {
                return Err(Error::Dimension(format!("binary {j} has bounds outside [0, 1]")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MiqpStatus {
    Optimal,
    Infeasible,
    GapLimit,
}

#[derive(Debug, Clone)]
pub struct MiqpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    pub status: MiqpStatus,
    pub proven_gap: f64,
    pub nodes_explored: usize,
    /// Incumbent objective each time it improved.
    pub incumbent_history: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
pub struct MiqpOptions {
    pub rel_gap: f64,
    pub node_limit: usize,
    pub int_tol: f64,
    /// Nodes popped per round; relaxations within a round may be solved in
    /// parallel.
    pub batch: usize,
    pub qp_tol: f64,
    /// Run the rounding heuristic every this many nodes (and at the root).
    pub heuristic_every: usize,
}

impl Default for MiqpOptions {
    fn default() -> Self {
        Self {
            rel_gap: 0.0,
            node_limit: 100_000,
            int_tol: 1e-6,
            batch: 1,
            qp_tol: 1e-9,
            heuristic_every: 25,
        }
    }
}

/// Proposes integral values for the binaries from a relaxed solution.
pub trait RoundingHeuristic: Sync {
    /// Returns one value per entry of `binary_indices`, or `None`.
    fn round(&self, relaxed: &[f64]) -> Option<Vec<f64>>;
}

struct Node {
    bound: f64,
    seq: u64,
    /// -1 free, 0 or 1 fixed; one entry per binary.
    fix: Vec<i8>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    // max-heap: smaller bound, then smaller seq, is "greater"
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .bound
            .total_cmp(&self.bound)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

pub fn solve_miqp(p: &MixedIntegerQp, rel_gap: f64, node_limit: usize) -> Result<MiqpSolution> {
    solve_miqp_with(
        p,
        MiqpOptions {
            rel_gap,
            node_limit,
            ..Default::default()
        },
        None,
    )
}

struct Search<'a> {
    p: &'a MixedIntegerQp,
    opts: MiqpOptions,
    qp_opts: QpOptions,
}

impl Search<'_> {
    fn bounds_for(&self, fix: &[i8]) -> (Vec<f64>, Vec<f64>) {
        let mut lo = self.p.qp.lower.clone();
        let mut up = self.p.qp.upper.clone();
        for (k, &j) in self.p.binary_indices.iter().enumerate() {
            if fix[k] >= 0 {
                lo[j] = fix[k] as f64;
                up[j] = fix[k] as f64;
            }
        }
        (lo, up)
    }

    fn relax(&self, fix: &[i8]) -> Result<QpSolution> {
        let (lo, up) = self.bounds_for(fix);
        let sol = solve_qp_with_bounds(&self.p.qp, &lo, &up, self.qp_opts)?;
        if sol.status == QpStatus::IterationLimit {
            let loose = QpOptions {
                tol: 1e-7,
                max_iter: 1000,
                ..self.qp_opts
            };
            return solve_qp_with_bounds(&self.p.qp, &lo, &up, loose);
        }
        Ok(sol)
    }

    fn prune_tol(&self, incumbent: f64) -> f64 {
        if incumbent.is_finite() {
            self.opts.rel_gap.max(1e-7) * incumbent.abs().max(1.0)
        } else {
            0.0
        }
    }

    /// Most fractional binary, ties to the lowest index.
    fn branch_var(&self, x: &[f64]) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (k, &j) in self.p.binary_indices.iter().enumerate() {
            let v = x[j];
            if (v - v.round()).abs() <= self.opts.int_tol {
                continue;
            }
            let score = (v - 0.5).abs();
            if best.map_or(true, |(_, s)| score < s) {
                best = Some((k, score));
            }
        }
        best.map(|(k, _)| k)
    }

    fn evaluate_assignment(&self, values: &[f64]) -> Result<Option<QpSolution>> {
        let fix: Vec<i8> = values.iter().map(|v| if *v >= 0.5 { 1 } else { 0 }).collect();
        let sol = self.relax(&fix)?;
        Ok(sol.is_optimal().then_some(sol))
    }
}

pub fn solve_miqp_with(
    p: &MixedIntegerQp,
    opts: MiqpOptions,
    heuristic: Option<&dyn RoundingHeuristic>,
) -> Result<MiqpSolution> {
    p.validate()?;
    p.qp.check_convex()?;
    let search = Search {
        p,
        opts,
        qp_opts: QpOptions {
            tol: opts.qp_tol,
            trust_convex: true,
            ..Default::default()
        },
    };
    let nb = p.binary_indices.len();

    let mut heap = BinaryHeap::new();
    let mut seq = 0u64;
    heap.push(Node {
        bound: f64::NEG_INFINITY,
        seq,
        fix: vec![-1; nb],
    });

    let mut inc_x: Option<Vec<f64>> = None;
    let mut inc_obj = f64::INFINITY;
    let mut history = Vec::new();
    let mut nodes = 0usize;
    let mut hit_limit = false;

    let mut offer = |sol: QpSolution, inc_obj: &mut f64, inc_x: &mut Option<Vec<f64>>, tol: f64| {
        if sol.objective < *inc_obj - tol {
            *inc_obj = sol.objective;
            let mut x = sol.x;
            for &j in &p.binary_indices {
                x[j] = x[j].round();
            }
            *inc_x = Some(x);
            history.push(*inc_obj);
        }
    };

    while let Some(top) = heap.peek() {
        if top.bound >= inc_obj - search.prune_tol(inc_obj) {
            break;
        }
        if nodes >= opts.node_limit {
            hit_limit = true;
            break;
        }
        let mut batch = Vec::with_capacity(opts.batch);
        while batch.len() < opts.batch.max(1) {
            match heap.pop() {
                Some(n) if n.bound < inc_obj - search.prune_tol(inc_obj) => batch.push(n),
                Some(_) => {}
                None => break,
            }
        }
        let results: Vec<Result<QpSolution>> = batch.par_iter().map(|n| search.relax(&n.fix)).collect();

        for (node, res) in batch.into_iter().zip(results) {
            let sol = res?;
            nodes += 1;
            match sol.status {
                QpStatus::Infeasible => continue,
                QpStatus::Unbounded => {
                    return Err(Error::Infeasible("relaxation is unbounded".into()));
                }
                QpStatus::IterationLimit => {
                    // no bound available: split on the first free binary
                    if let Some(k) = node.fix.iter().position(|&f| f < 0) {
                        for v in [0i8, 1] {
                            let mut fix = node.fix.clone();
                            fix[k] = v;
                            seq += 1;
                            heap.push(Node { bound: node.bound, seq, fix });
                        }
                    }
                    continue;
                }
                QpStatus::Optimal => {}
            }
            let tol = search.prune_tol(inc_obj);
            if sol.objective >= inc_obj - tol {
                continue;
            }

            if let Some(h) = heuristic {
                if nodes == 1 || (opts.heuristic_every > 0 && nodes % opts.heuristic_every == 0) {
                    if let Some(values) = h.round(&sol.x) {
                        if values.len() == nb {
                            if let Some(cand) = search.evaluate_assignment(&values)? {
                                let tol = search.prune_tol(inc_obj);
                                offer(cand, &mut inc_obj, &mut inc_x, tol);
                            }
                        }
                    }
                }
            }

            match search.branch_var(&sol.x) {
                None => {
                    // integral: snap, fix and re-solve for an exact leaf value
                    let values: Vec<f64> = p.binary_indices.iter().map(|&j| sol.x[j]).collect();
                    if let Some(leaf) = search.evaluate_assignment(&values)? {
                        let tol = search.prune_tol(inc_obj);
                        offer(leaf, &mut inc_obj, &mut inc_x, tol);
                    }
                }
                Some(k) => {
                    for v in [0i8, 1] {
                        let mut fix = node.fix.clone();
                        fix[k] = v;
                        seq += 1;
                        heap.push(Node {
                            bound: sol.objective,
                            seq,
                            fix,
                        });
                    }
                }
            }
        }
    }

    let best_bound = heap
        .iter()
        .map(|n| n.bound)
        .fold(inc_obj, f64::min);
    let proven_gap = if inc_obj.is_finite() {
        ((inc_obj - best_bound) / inc_obj.abs().max(1.0)).max(0.0)
    } else {
        f64::INFINITY
    };
    let status = match (&inc_x, hit_limit) {
        (None, false) => MiqpStatus::Infeasible,
        (_, true) if proven_gap > opts.rel_gap.max(1e-7) => MiqpStatus::GapLimit,
        (None, true) => MiqpStatus::GapLimit,
        _ => MiqpStatus::Optimal,
    };
    Ok(MiqpSolution {
        x: inc_x.unwrap_or_default(),
        objective: inc_obj,
        status,
        proven_gap,
        nodes_explored: nodes,
        incumbent_history: history,
    })
}
