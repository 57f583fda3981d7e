use serde::Serialize;

use super::CommitmentSchedule;
use crate::model::NetworkCase;

/// Total cost split by term. `hot_startup_credit` is `(C^HS − C^SU) vH`,
/// which is never positive.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct CostBreakdown {
    pub energy: f64,
    pub no_load: f64,
    pub startup: f64,
    pub hot_startup_credit: f64,
    pub shutdown: f64,
    pub total: f64,
}

impl CostBreakdown {
    fn finish(mut self) -> Self {
        self.total = self.energy + self.no_load + self.startup + self.hot_startup_credit + self.shutdown;
        self
    }

    /// `self` with the energy term replaced.
    pub fn with_energy(self, energy: f64) -> Self {
        CostBreakdown { energy, ..self }.finish()
    }
}

/// Energy cost `Σ C^Q P² + C^L P` of total outputs `total[g][t]` (MW).
pub fn dispatch_cost(case: &NetworkCase, total: &[Vec<f64>]) -> f64 {
    let mut sum = 0.0;
    for (gen, row) in case.generators.iter().zip(total) {
        for &p in row {
            sum += gen.cost_q * p * p + gen.cost_l * p;
        }
    }
    sum
}

/// Fixed commitment terms (no-load, startup, hot-start credit, shutdown)
/// with zero energy.
pub fn commitment_cost(case: &NetworkCase, schedule: &CommitmentSchedule) -> CostBreakdown {
    let mut c = CostBreakdown::default();
    for (g, gen) in case.generators.iter().enumerate() {
        for t in 0..schedule.horizon() {
            c.no_load += gen.cost_noload * schedule.u[g][t] as f64;
            c.startup += gen.cost_startup * schedule.v[g][t] as f64;
            c.hot_startup_credit += (gen.cost_hot_startup - gen.cost_startup) * schedule.vh[g][t] as f64;
            c.shutdown += gen.cost_shutdown * schedule.w[g][t] as f64;
        }
    }
    c.finish()
}

/// Full cost of a schedule and above-minimum outputs `p[g][t]`; total output
/// is `p_min u + p`.
pub fn cost_eval(case: &NetworkCase, schedule: &CommitmentSchedule, p: &[Vec<f64>]) -> CostBreakdown {
    let total: Vec<Vec<f64>> = case
        .generators
        .iter()
        .zip(p)
        .zip(&schedule.u)
        .map(|((gen, row), u)| row.iter().zip(u).map(|(p, &u)| gen.p_min * u as f64 + p).collect())
        .collect();
    commitment_cost(case, schedule).with_energy(dispatch_cost(case, &total))
}
