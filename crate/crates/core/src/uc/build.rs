use std::collections::HashMap;

use super::{CommitmentSchedule, Layout, Scope};
use crate::error::{Error, Result};
use crate::miqp::MixedIntegerQp;
use crate::model::{GeneratorParams, NetworkCase};
use crate::qp::QuadraticProgram;

/// Number of rows emitted per constraint family.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RowTally {
    /// `u_t − u_{t−1} = v_t − w_t`
    pub transitions: usize,
    /// hot-start window on `vH`
    pub hot_window: usize,
    /// `vH ≤ v`
    pub hot_le_start: usize,
    /// variables fixed by initial minimum up/down obligations
    pub initial_fixings: usize,
    pub min_up: usize,
    pub min_down: usize,
    pub output_limits: usize,
    pub ramps: usize,
    pub balance: usize,
    pub flow_limits: usize,
}

fn bus_positions(scope: &Scope) -> HashMap<usize, usize> {
    scope.buses.iter().enumerate().map(|(p, &b)| (b, p)).collect()
}

fn new_layout(case: &NetworkCase, scope: &Scope, fixed_min_output: Option<Vec<f64>>) -> Layout {
    Layout {
        horizon: case.horizon,
        generators: scope.generators.clone(),
        buses: scope.buses.clone(),
        n_internal: scope.n_internal,
        boundary: scope.boundary.clone(),
        balance_rows: Vec::new(),
        fixed_min_output,
        tally: RowTally::default(),
    }
}

/// Coefficients of the output cap on `p_t`: pairs of (coefficient on u,
/// v, w_{t+1}) rows as `p ≤ a u − b v − c w_{t+1}`. Units with a one-interval
/// minimum up time get separate startup and shutdown rows.
fn output_caps(gen: &GeneratorParams, last: bool) -> Vec<(f64, f64, f64)> {
    let span = gen.p_max - gen.p_min;
    let su = gen.p_max - gen.p_su_max;
    let sd = if last { 0.0 } else { gen.p_max - gen.p_sd_max };
    if gen.min_up == 1 && !last {
        vec![(span, su, 0.0), (span, 0.0, sd)]
    } else {
        vec![(span, su, sd)]
    }
}

/// Balance rows for internal buses and both-direction flow limits on every
/// scope branch. With `fixed` set, generator minimum output is a constant
/// moved to the right-hand side instead of `p_min u`.
fn add_network(case: &NetworkCase, scope: &Scope, layout: &mut Layout, qp: &mut QuadraticProgram) {
    let pos = bus_positions(scope);
    let ends = case.branch_ends();
    let gen_bus = case.generator_buses();
    let base = case.base_mva;

    // incident branch terms per internal bus position
    let mut incident: Vec<Vec<(usize, f64)>> = vec![Vec::new(); scope.n_internal];
    for &k in &scope.branches {
        let (i, j) = ends[k];
        let (pi, pj) = (pos[&i], pos[&j]);
        let y = base / case.branches[k].reactance;
        if pi < scope.n_internal {
            incident[pi].push((pi, -y));
            incident[pi].push((pj, y));
        }
        if pj < scope.n_internal {
            incident[pj].push((pj, -y));
            incident[pj].push((pi, y));
        }
    }
    let mut gens_at: Vec<Vec<usize>> = vec![Vec::new(); scope.n_internal];
    for (k, &g) in scope.generators.iter().enumerate() {
        gens_at[pos[&gen_bus[g]]].push(k);
    }

    for t in 0..case.horizon {
        for i in 0..scope.n_internal {
            let mut rhs = case.buses[scope.buses[i]].demand[t];
            if let Some(inj) = &scope.injections {
                rhs -= inj[i][t];
            }
            let mut row: Vec<(usize, f64)> = Vec::new();
            for &k in &gens_at[i] {
                row.push((layout.p(k, t), 1.0));
                match &layout.fixed_min_output {
                    Some(m) => rhs -= m[k * case.horizon + t],
                    None => row.push((layout.u(k, t), case.generators[scope.generators[k]].p_min)),
                }
            }
            let mut theta: std::collections::BTreeMap<usize, f64> = Default::default();
            for &(p, c) in &incident[i] {
                *theta.entry(p).or_default() += c;
            }
            row.extend(theta.into_iter().map(|(p, c)| (layout.theta(p, t), c)));
            layout.balance_rows.push(qp.add_eq(&row, rhs));
        }
        for &k in &scope.branches {
            let (i, j) = ends[k];
            let y = base / case.branches[k].reactance;
            let lim = case.branches[k].flow_limit;
            let (ti, tj) = (layout.theta(pos[&i], t), layout.theta(pos[&j], t));
            qp.add_le(&[(ti, y), (tj, -y)], lim);
            qp.add_le(&[(ti, -y), (tj, y)], lim);
        }
    }
    layout.tally.balance = case.horizon * scope.n_internal;
    layout.tally.flow_limits = 2 * case.horizon * scope.branches.len();

    for &r in &scope.references {
        for t in 0..case.horizon {
            qp.set_bounds(layout.theta(r, t), 0.0, 0.0);
        }
    }
}

fn add_ramps(gen: &GeneratorParams, k: usize, layout: &mut Layout, qp: &mut QuadraticProgram) {
    let p0 = gen.initial_above_min();
    for t in 0..layout.horizon {
        let p = layout.p(k, t);
        if t == 0 {
            qp.add_le(&[(p, 1.0)], gen.ramp_up + p0);
            qp.add_le(&[(p, -1.0)], gen.ramp_down - p0);
        } else {
            let prev = layout.p(k, t - 1);
            qp.add_le(&[(p, 1.0), (prev, -1.0)], gen.ramp_up);
            qp.add_le(&[(prev, 1.0), (p, -1.0)], gen.ramp_down);
        }
        layout.tally.ramps += 2;
    }
}

/// Commitment program over `scope`: only `u` is binary; `v`, `vH` and `w`
/// are continuous in [0, 1] and settle at binary values once `u` is integral.
pub fn build_uc(case: &NetworkCase, scope: &Scope) -> Result<(MixedIntegerQp, Layout)> {
    scope.check(case)?;
    let horizon = case.horizon;
    let mut layout = new_layout(case, scope, None);
    let mut qp = QuadraticProgram::new(layout.num_vars());
    let mut binary_indices = Vec::with_capacity(scope.generators.len() * horizon);

    for (k, &g) in scope.generators.iter().enumerate() {
        let gen = &case.generators[g];
        let forced_on = super::forced_on_until(gen, horizon);
        let forced_off = super::forced_off_until(gen, horizon);
        let u0 = gen.initial_u();

        for t in 0..horizon {
            let (u, p, v, vh, w) = (
                layout.u(k, t),
                layout.p(k, t),
                layout.v(k, t),
                layout.vh(k, t),
                layout.w(k, t),
            );
            binary_indices.push(u);
            if t < forced_on {
                qp.set_bounds(u, 1.0, 1.0);
                layout.tally.initial_fixings += 1;
            } else if t < forced_off {
                qp.set_bounds(u, 0.0, 0.0);
                layout.tally.initial_fixings += 1;
            } else {
                qp.set_bounds(u, 0.0, 1.0);
            }
            qp.set_bounds(p, 0.0, gen.p_max - gen.p_min);
            for j in [v, vh, w] {
                qp.set_bounds(j, 0.0, 1.0);
            }

            qp.add_hessian(p, p, 2.0 * gen.cost_q);
            qp.c[p] += 2.0 * gen.cost_q * gen.p_min + gen.cost_l;
            qp.c[u] += gen.cost_q * gen.p_min * gen.p_min + gen.cost_l * gen.p_min + gen.cost_noload;
            qp.c[v] += gen.cost_startup;
            qp.c[vh] += gen.cost_hot_startup - gen.cost_startup;
            qp.c[w] += gen.cost_shutdown;

            if t == 0 {
                qp.add_eq(&[(u, 1.0), (v, -1.0), (w, 1.0)], u0);
            } else {
                qp.add_eq(&[(u, 1.0), (layout.u(k, t - 1), -1.0), (v, -1.0), (w, 1.0)], 0.0);
            }
            layout.tally.transitions += 1;

            let mut row = vec![(vh, 1.0)];
            let start = (t + 1).saturating_sub(gen.cold_start_time);
            row.extend((start..t).map(|tau| (layout.w(k, tau), -1.0)));
            let history = !gen.initial_status_on && gen.initial_status_duration + t < gen.cold_start_time;
            qp.add_le(&row, if history { 1.0 } else { 0.0 });
            layout.tally.hot_window += 1;

            qp.add_le(&[(vh, 1.0), (v, -1.0)], 0.0);
            layout.tally.hot_le_start += 1;

            let mut row: Vec<(usize, f64)> = ((t + 1).saturating_sub(gen.min_up)..=t)
                .map(|tau| (layout.v(k, tau), 1.0))
                .collect();
            row.push((u, -1.0));
            qp.add_le(&row, 0.0);
            layout.tally.min_up += 1;

            let mut row: Vec<(usize, f64)> = ((t + 1).saturating_sub(gen.min_down)..=t)
                .map(|tau| (layout.w(k, tau), 1.0))
                .collect();
            row.push((u, 1.0));
            qp.add_le(&row, 1.0);
            layout.tally.min_down += 1;

            let last = t + 1 == horizon;
            for (a, b, c) in output_caps(gen, last) {
                let mut row = vec![(p, 1.0), (u, -a), (v, b)];
                if c != 0.0 {
                    row.push((layout.w(k, t + 1), c));
                }
                qp.add_le(&row, 0.0);
                layout.tally.output_limits += 1;
            }
        }
        add_ramps(gen, k, &mut layout, &mut qp);
    }

    add_network(case, scope, &mut layout, &mut qp);
    Ok((MixedIntegerQp { qp, binary_indices }, layout))
}

/// Dispatch program over `scope` at a fixed commitment: offline units are
/// pinned at zero, online units get the output caps and ramp limits with
/// `u`, `v`, `w` as constants. The objective is the energy cost of total
/// output only.
pub fn build_ed(case: &NetworkCase, scope: &Scope, schedule: &CommitmentSchedule) -> Result<(QuadraticProgram, Layout)> {
    scope.check(case)?;
    let horizon = case.horizon;
    if schedule.u.len() != case.generators.len() || schedule.horizon() != horizon {
        return Err(Error::Dimension(format!(
            "schedule must be {} x {}",
            case.generators.len(),
            horizon
        )));
    }
    let mut fixed = Vec::with_capacity(scope.generators.len() * horizon);
    for &g in &scope.generators {
        let pmin = case.generators[g].p_min;
        fixed.extend(schedule.u[g].iter().map(|&u| pmin * u as f64));
    }
    let mut layout = new_layout(case, scope, Some(fixed));
    let mut qp = QuadraticProgram::new(layout.num_vars());

    for (k, &g) in scope.generators.iter().enumerate() {
        let gen = &case.generators[g];
        for t in 0..horizon {
            let p = layout.p(k, t);
            let u = schedule.u[g][t] as f64;
            let v = schedule.v[g][t] as f64;
            let w_next = schedule.w_next(g, t) as f64;
            let cap = output_caps(gen, t + 1 == horizon)
                .into_iter()
                .map(|(a, b, c)| a * u - b * v - c * w_next)
                .fold(f64::INFINITY, f64::min);
            layout.tally.output_limits += output_caps(gen, t + 1 == horizon).len();
            qp.set_bounds(p, 0.0, if u == 0.0 { 0.0 } else { cap });

            let m = gen.p_min * u;
            qp.add_hessian(p, p, 2.0 * gen.cost_q);
            qp.c[p] += 2.0 * gen.cost_q * m + gen.cost_l;
            qp.constant += gen.cost_q * m * m + gen.cost_l * m;
        }
        add_ramps(gen, k, &mut layout, &mut qp);
    }

    add_network(case, scope, &mut layout, &mut qp);
    Ok((qp, layout))
}

fn add_consensus_terms(
    qp: &mut QuadraticProgram,
    layout: &Layout,
    lambda: &[f64],
    mu: &[f64],
    theta_bar: &[f64],
    f_bar: &[f64],
    rho: f64,
) -> Result<()> {
    let (ns, nt) = (layout.n_shared(), layout.n_ties());
    if lambda.len() != ns || theta_bar.len() != ns || mu.len() != nt || f_bar.len() != nt {
        return Err(Error::Dimension(format!(
            "consensus vectors: expected {ns} angle and {nt} flow entries, got λ {} θ̄ {} μ {} F̄ {}",
            lambda.len(),
            theta_bar.len(),
            mu.len(),
            f_bar.len()
        )));
    }
    let horizon = layout.horizon;
    for (e, s) in layout.boundary.shared.iter().enumerate() {
        for t in 0..horizon {
            let i = e * horizon + t;
            let a = [(layout.theta(s.pos, t), 1.0)];
            qp.add_linear_penalty(&a, theta_bar[i], lambda[i]);
            qp.add_square_penalty(&a, theta_bar[i], rho);
        }
    }
    for (e, l) in layout.boundary.ties.iter().enumerate() {
        for t in 0..horizon {
            let i = e * horizon + t;
            let y = l.susceptance;
            let a = [(layout.theta(l.from, t), y), (layout.theta(l.to, t), -y)];
            qp.add_linear_penalty(&a, f_bar[i], mu[i]);
            qp.add_square_penalty(&a, f_bar[i], rho);
        }
    }
    Ok(())
}

/// Relaxed area commitment program with the augmented-Lagrangian terms
/// `λᵀ(θˢ − θ̄) + ρ/2 ‖θˢ − θ̄‖² + μᵀ(Fᵀᴸ − F̄) + ρ/2 ‖Fᵀᴸ − F̄‖²`, where tie
/// flows are expressed through the endpoint angles.
pub fn build_relaxed_subproblem(
    ucp: &MixedIntegerQp,
    layout: &Layout,
    lambda: &[f64],
    mu: &[f64],
    theta_bar: &[f64],
    f_bar: &[f64],
    rho: f64,
) -> Result<QuadraticProgram> {
    let mut qp = ucp.qp.clone();
    add_consensus_terms(&mut qp, layout, lambda, mu, theta_bar, f_bar, rho)?;
    Ok(qp)
}

/// Area dispatch program with the same augmented-Lagrangian terms.
pub fn build_ed_subproblem(
    ed: &QuadraticProgram,
    layout: &Layout,
    lambda: &[f64],
    mu: &[f64],
    theta_bar: &[f64],
    f_bar: &[f64],
    rho: f64,
) -> Result<QuadraticProgram> {
    let mut qp = ed.clone();
    add_consensus_terms(&mut qp, layout, lambda, mu, theta_bar, f_bar, rho)?;
    Ok(qp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::miqp::solve_miqp;
    use crate::model::tests::{bus, gen, line};
    use crate::model::{partition_areas, Area};
    use crate::qp::{check_kkt, solve_qp, QpStatus};
    use crate::uc::reconstruct_flags;

    fn one_bus(g: Vec<GeneratorParams>, demand: Vec<f64>) -> NetworkCase {
        NetworkCase {
            horizon: demand.len(),
            base_mva: 100.0,
            buses: vec![bus("b1", "A", demand)],
            branches: vec![],
            generators: g,
            areas: vec![Area { id: "A".into() }],
        }
    }

    fn schedule(case: &NetworkCase, u: Vec<Vec<u8>>) -> CommitmentSchedule {
        reconstruct_flags(case, &u)
    }

    #[test]
    fn single_feasible_commitment() {
        let mut g = gen("b1", 10.0, 50.0);
        g.initial_status_on = false;
        let case = one_bus(vec![g], vec![30.0]);
        let (p, layout) = build_uc(&case, &Scope::system(&case)).unwrap();
        let sol = solve_miqp(&p, 0.0, 100).unwrap();
        assert_eq!(sol.x[layout.u(0, 0)].round(), 1.0);
        assert!((layout.output(&case, &sol.x, 0, 0) - 30.0).abs() < 1e-6);
    }

    #[test]
    fn initial_min_up_window_fixes_u() {
        let mut g = gen("b1", 0.0, 50.0);
        g.min_up = 3;
        g.initial_status_duration = 1;
        let case = one_bus(vec![g], vec![10.0; 4]);
        let (p, layout) = build_uc(&case, &Scope::system(&case)).unwrap();
        for t in 0..2 {
            let u = layout.u(0, t);
            assert_eq!((p.qp.lower[u], p.qp.upper[u]), (1.0, 1.0));
        }
        let u = layout.u(0, 2);
        assert_eq!((p.qp.lower[u], p.qp.upper[u]), (0.0, 1.0));
        assert_eq!(layout.tally.initial_fixings, 2);
    }

    #[test]
    fn zero_penalty_is_identity() {
        let case = crate::uc::tests::three_bus_two_area();
        let part = partition_areas(&case).unwrap();
        let scope = Scope::area(&case, &part, 0);
        let (p, layout) = build_uc(&case, &scope).unwrap();
        let (ns, nt) = (layout.n_shared(), layout.n_ties());
        let qp = build_relaxed_subproblem(&p, &layout, &vec![0.0; ns], &vec![0.0; nt], &vec![0.3; ns], &vec![0.1; nt], 0.0)
            .unwrap();
        let x: Vec<f64> = (0..layout.num_vars()).map(|i| (i as f64 * 0.37).sin()).collect();
        assert_eq!(qp.objective_at(&x), p.qp.objective_at(&x));
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let case = crate::uc::tests::three_bus_two_area();
        let part = partition_areas(&case).unwrap();
        let (p, layout) = build_uc(&case, &Scope::area(&case, &part, 0)).unwrap();
        let err = build_relaxed_subproblem(&p, &layout, &[0.0], &[], &[0.0], &[], 1.0);
        assert!(matches!(err, Err(Error::Dimension(_))));
    }

    #[test]
    fn single_shared_angle_penalty() {
        // λ(θ − θ̄) + (ρ/2)(θ − θ̄)² with θ̄ = 0.2, λ = 0.4, ρ = 2
        let mut qp = QuadraticProgram::new(1);
        let layout = Layout {
            horizon: 1,
            generators: vec![],
            buses: vec![0],
            n_internal: 0,
            boundary: super::super::Boundary {
                shared: vec![super::super::SharedAngle { index: 0, pos: 0 }],
                ties: vec![],
            },
            balance_rows: vec![],
            fixed_min_output: Some(vec![]),
            tally: RowTally::default(),
        };
        add_consensus_terms(&mut qp, &layout, &[0.4], &[], &[0.2], &[], 2.0).unwrap();
        for th in [-1.0, 0.0, 0.2, 0.7] {
            let expect = 0.4 * (th - 0.2) + (th - 0.2f64).powi(2);
            assert!((qp.objective_at(&[th]) - expect).abs() < 1e-14);
        }
    }

    #[test]
    fn penalty_hessian_matches_selection_operators() {
        let case = crate::uc::tests::three_bus_two_area();
        let part = partition_areas(&case).unwrap();
        let (p, layout) = build_uc(&case, &Scope::area(&case, &part, 1)).unwrap();
        let (ns, nt) = (layout.n_shared(), layout.n_ties());
        let rho = 3.0;
        let qp = build_relaxed_subproblem(&p, &layout, &vec![0.5; ns], &vec![-0.2; nt], &vec![0.1; ns], &vec![0.3; nt], rho)
            .unwrap();
        let n = layout.num_vars();
        let diff = |x: &[f64]| qp.objective_at(x) - p.qp.objective_at(x);
        // second differences of the added terms recover the Hessian
        let h = 1e-2;
        let mut expect = vec![vec![0.0; n]; n];
        for s in &layout.boundary.shared {
            for t in 0..layout.horizon {
                let i = layout.theta(s.pos, t);
                expect[i][i] += rho;
            }
        }
        for l in &layout.boundary.ties {
            for t in 0..layout.horizon {
                let y = l.susceptance;
                let (a, b) = (layout.theta(l.from, t), layout.theta(l.to, t));
                for (i, ci) in [(a, y), (b, -y)] {
                    for (j, cj) in [(a, y), (b, -y)] {
                        expect[i][j] += rho * ci * cj;
                    }
                }
            }
        }
        let zero = vec![0.0; n];
        for i in 0..n {
            for j in 0..n {
                let mut pp = zero.clone();
                pp[i] += h;
                pp[j] += h;
                let mut pm = zero.clone();
                pm[i] += h;
                pm[j] -= h;
                let mut mp = zero.clone();
                mp[i] -= h;
                mp[j] += h;
                let mut mm = zero.clone();
                mm[i] -= h;
                mm[j] -= h;
                let fd = (diff(&pp) - diff(&pm) - diff(&mp) + diff(&mm)) / (4.0 * h * h);
                assert!((fd - expect[i][j]).abs() < 1e-6, "({i},{j}) {fd} vs {}", expect[i][j]);
            }
        }
    }

    #[test]
    fn ed_all_offline_is_infeasible() {
        let mut g = gen("b1", 0.0, 50.0);
        g.initial_status_on = false;
        let case = one_bus(vec![g], vec![20.0]);
        let (qp, _) = build_ed(&case, &Scope::system(&case), &schedule(&case, vec![vec![0]])).unwrap();
        assert_eq!(solve_qp(&qp, 1e-8).unwrap().status, QpStatus::Infeasible);
    }

    #[test]
    fn ed_linear_marginal_cost() {
        let mut g = gen("b1", 0.0, 100.0);
        g.cost_l = 25.0;
        let case = one_bus(vec![g], vec![40.0]);
        let (qp, layout) = build_ed(&case, &Scope::system(&case), &schedule(&case, vec![vec![1]])).unwrap();
        let sol = solve_qp(&qp, 1e-9).unwrap();
        assert!((sol.objective - 1000.0).abs() < 1e-5, "{}", sol.objective);
        assert!((sol.duals_eq[layout.balance_rows[0]] - 25.0).abs() < 1e-6);
    }

    #[test]
    fn ed_merit_order() {
        let mut a = gen("b1", 0.0, 50.0);
        a.cost_l = 20.0;
        let mut b = gen("b1", 0.0, 50.0);
        b.cost_l = 40.0;
        let case = one_bus(vec![a, b], vec![70.0]);
        let (qp, layout) = build_ed(&case, &Scope::system(&case), &schedule(&case, vec![vec![1], vec![1]])).unwrap();
        let sol = solve_qp(&qp, 1e-9).unwrap();
        // enumerate which unit is at a bound: cheap at cap, expensive fills
        let candidates = [(50.0, 20.0), (20.0, 50.0)];
        let best = candidates
            .iter()
            .map(|(x, y)| 20.0 * x + 40.0 * y)
            .fold(f64::INFINITY, f64::min);
        assert!((sol.objective - best).abs() < 1e-5);
        assert!((best - 1800.0).abs() < 1e-12);
        assert!((layout.output(&case, &sol.x, 0, 0) - 50.0).abs() < 1e-5);
        assert!(check_kkt(&qp, &sol, 1e-6).max() < 1e-5);
    }

    #[test]
    fn ed_conserves_power_with_network() {
        let case = NetworkCase {
            horizon: 1,
            base_mva: 100.0,
            buses: vec![bus("b1", "A", vec![0.0]), bus("b2", "A", vec![30.0]), bus("b3", "A", vec![20.0])],
            branches: vec![
                line("b1", "b2", 0.1, 100.0),
                line("b2", "b3", 0.1, 100.0),
                line("b1", "b3", 0.2, 100.0),
            ],
            generators: vec![gen("b1", 0.0, 100.0)],
            areas: vec![Area { id: "A".into() }],
        };
        let (qp, layout) = build_ed(&case, &Scope::system(&case), &schedule(&case, vec![vec![1]])).unwrap();
        let sol = solve_qp(&qp, 1e-9).unwrap();
        assert!((layout.output(&case, &sol.x, 0, 0) - 50.0).abs() < 1e-6);
        assert_eq!(sol.x[layout.theta(0, 0)], 0.0);
    }
}
