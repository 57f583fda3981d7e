use crate::model::{GeneratorParams, NetworkCase};
use crate::uc::{forced_off_until, forced_on_until, reconstruct_flags, CommitmentSchedule};

/// Threshold relaxed commitments: `u ≥ xi` maps to 1, anything below to 0.
pub fn project_commitment(u_relaxed: &[Vec<f64>], xi: f64) -> Vec<Vec<u8>> {
    u_relaxed
        .iter()
        .map(|row| row.iter().map(|&u| u8::from(u >= xi)).collect())
        .collect()
}

/// Whether the units committed in `u` can cover demand at interval `t`.
pub type Servable<'a> = dyn Fn(&[Vec<u8>], usize) -> bool + 'a;

/// Online capacity at least total demand at `t`, ignoring the network.
pub fn capacity_covers_demand(case: &NetworkCase) -> impl Fn(&[Vec<u8>], usize) -> bool + '_ {
    move |u: &[Vec<u8>], t: usize| {
        let cap: f64 = case
            .generators
            .iter()
            .zip(u)
            .map(|(g, row)| g.p_max * row[t] as f64)
            .sum();
        cap >= case.total_demand(t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Defect {
    /// On-spell `[start, end)` opened by a startup and closed before the
    /// horizon end, shorter than the minimum up time.
    ShortOn(usize, usize),
    /// Off-spell `[start, end)` opened by a shutdown and followed by a
    /// restart, shorter than the minimum down time.
    ShortOff(usize, usize),
}

fn first_defect(gen: &GeneratorParams, u: &[u8]) -> Option<Defect> {
    let horizon = u.len();
    let u0 = u8::from(gen.initial_status_on);
    let mut start = 0;
    while start < horizon {
        let val = u[start];
        let mut end = start;
        while end < horizon && u[end] == val {
            end += 1;
        }
        let opened = start > 0 || u0 != val;
        if opened && end < horizon {
            if val == 1 && end - start < gen.min_up {
                return Some(Defect::ShortOn(start, end));
            }
            if val == 0 && end - start < gen.min_down {
                return Some(Defect::ShortOff(start, end));
            }
        }
        start = end;
    }
    None
}

/// Make a thresholded commitment satisfy the initial-condition windows and
/// the minimum up/down times.
///
/// Units are processed in index order. Initial obligations are imposed
/// first. Then, until no defect remains: a too-short off-spell between two
/// on-spells is cancelled by holding the unit on; a too-short on-spell is
/// cancelled when `servable` still holds at every hour of the spell without
/// it, and otherwise extended forward to the minimum up time (clipped at the
/// horizon end, where a short final spell is allowed). A unit that does not
/// settle within a bounded number of passes leaves its violations recorded
/// in the returned schedule.
pub fn repair_commitment(case: &NetworkCase, u: &[Vec<u8>], servable: &Servable<'_>) -> CommitmentSchedule {
    let horizon = case.horizon;
    let mut u: Vec<Vec<u8>> = u.to_vec();
    for (g, gen) in case.generators.iter().enumerate() {
        for t in 0..forced_on_until(gen, horizon) {
            u[g][t] = 1;
        }
        for t in 0..forced_off_until(gen, horizon) {
            u[g][t] = 0;
        }
    }
    for (g, gen) in case.generators.iter().enumerate() {
        for _ in 0..4 * horizon + 4 {
            let Some(defect) = first_defect(gen, &u[g]) else {
                break;
            };
            match defect {
                Defect::ShortOff(s, e) => u[g][s..e].fill(1),
                Defect::ShortOn(s, e) => {
                    let mut trial = u.clone();
                    trial[g][s..e].fill(0);
                    if (s..e).all(|t| servable(&trial, t)) {
                        u = trial;
                    } else {
                        let end = (s + gen.min_up).min(horizon);
                        u[g][e..end].fill(1);
                    }
                }
            }
        }
    }
    reconstruct_flags(case, &u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::tests::{bus, gen};
    use crate::model::Area;

    fn case(g: GeneratorParams, demand: Vec<f64>) -> NetworkCase {
        NetworkCase {
            horizon: demand.len(),
            base_mva: 100.0,
            buses: vec![bus("b1", "A", demand)],
            branches: vec![],
            generators: vec![g],
            areas: vec![Area { id: "A".into() }],
        }
    }

    #[test]
    fn threshold_boundary_maps_to_on() {
        assert_eq!(project_commitment(&[vec![0.49, 0.5]], 0.5), vec![vec![0, 1]]);
        assert_eq!(project_commitment(&[vec![0.85]], 0.9), vec![vec![0]]);
        assert_eq!(project_commitment(&[vec![0.0, 1.0]], 0.3), vec![vec![0, 1]]);
    }

    #[test]
    fn short_on_spell_extended_forward() {
        let mut g = gen("b1", 0.0, 10.0);
        g.min_up = 3;
        g.initial_status_on = false;
        g.initial_status_duration = 5;
        let c = case(g, vec![5.0; 6]);
        // never servable without the unit
        let s = repair_commitment(&c, &[vec![0, 1, 1, 0, 0, 0]], &|_, _| false);
        assert_eq!(s.u[0], vec![0, 1, 1, 1, 0, 0]);
        assert!(s.is_valid());
    }

    #[test]
    fn short_on_spell_cancelled_when_not_needed() {
        let mut g = gen("b1", 0.0, 10.0);
        g.min_up = 3;
        g.initial_status_on = false;
        g.initial_status_duration = 5;
        let c = case(g, vec![0.0; 6]);
        let s = repair_commitment(&c, &[vec![0, 1, 1, 0, 0, 0]], &capacity_covers_demand(&c));
        assert_eq!(s.u[0], vec![0; 6]);
    }

    #[test]
    fn short_off_spell_held_on() {
        let mut g = gen("b1", 0.0, 10.0);
        g.min_down = 2;
        let c = case(g, vec![5.0; 5]);
        let s = repair_commitment(&c, &[vec![1, 1, 0, 1, 1]], &|_, _| false);
        assert_eq!(s.u[0], vec![1; 5]);
        assert!(s.v[0].iter().chain(&s.w[0]).all(|&x| x == 0));
    }

    #[test]
    fn valid_schedule_unchanged() {
        let mut g = gen("b1", 0.0, 10.0);
        g.min_up = 2;
        g.min_down = 2;
        let c = case(g, vec![5.0; 6]);
        let u = vec![vec![1, 1, 0, 0, 1, 1]];
        let s = repair_commitment(&c, &u, &|_, _| false);
        assert_eq!(s.u, u);
    }

    #[test]
    fn initial_obligations_imposed() {
        let mut g = gen("b1", 0.0, 10.0);
        g.min_up = 4;
        g.initial_status_duration = 1;
        let c = case(g, vec![5.0; 5]);
        let s = repair_commitment(&c, &[vec![0, 0, 0, 0, 0]], &|_, _| true);
        assert_eq!(&s.u[0][..3], &[1, 1, 1]);
        assert!(s.is_valid(), "{:?}", s.violations);
    }
}
