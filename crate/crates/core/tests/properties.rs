//! Invariants checked over generated inputs.

mod common;

use interclear::admm::{consensus_update, dual_update, residual, AreaDuals, ConsensusMap, LocalValues};
use interclear::admm::Phase;
use interclear::baselines::{
    default_interfaces, run_single_area, run_uncoordinated, InterchangeEntry, InterchangeSchedule, InterchangeValue,
};
use interclear::coordination::run_multi_area_uc;
use interclear::miqp::{solve_miqp, MiqpOptions, MixedIntegerQp};
use interclear::model::{build_admittance, bundled_case, partition_areas, NetworkCase};
use interclear::qp::{check_kkt, solve_qp, QuadraticProgram, DEFAULT_TOL};
use interclear::uc::{commitment_cost, dispatch_cost, reconstruct_flags, AlgoParams};
use proptest::prelude::*;

use common::{areas, bus, gen, line, rel_diff};

/// Three areas; areas 0 and 2 share nothing directly but meet at a bus
/// that all three hold.
fn three_area_map(horizon: usize) -> ConsensusMap {
    ConsensusMap {
        horizon,
        area_ids: vec!["A".into(), "B".into(), "C".into()],
        shared: vec![vec![(0, 0), (1, 0)], vec![(1, 1), (2, 0)], vec![(0, 1), (1, 2), (2, 1)]],
        ties: vec![vec![(0, 0), (1, 0)], vec![(1, 1), (2, 0)]],
        local_shared: vec![vec![0, 2], vec![0, 1, 2], vec![1, 2]],
        local_ties: vec![vec![0], vec![0, 1], vec![1]],
    }
}

fn locals_for(map: &ConsensusMap, values: &[f64]) -> Vec<LocalValues> {
    let h = map.horizon;
    let mut it = values.iter().copied().cycle();
    (0..map.n_areas())
        .map(|a| LocalValues {
            theta: (0..map.local_shared[a].len() * h).map(|_| it.next().unwrap()).collect(),
            flows: (0..map.local_ties[a].len() * h).map(|_| it.next().unwrap()).collect(),
        })
        .collect()
}

fn some(locals: &[LocalValues]) -> Vec<Option<LocalValues>> {
    locals.iter().cloned().map(Some).collect()
}

/// Sum of every holder's multiplier at each consensus entry.
fn dual_sums(map: &ConsensusMap, duals: &[AreaDuals]) -> Vec<f64> {
    let h = map.horizon;
    let mut sums = Vec::new();
    for (members, pick) in [
        (&map.shared, (|d: &AreaDuals| &d.lambda) as fn(&AreaDuals) -> &Vec<f64>),
        (&map.ties, |d: &AreaDuals| &d.mu),
    ] {
        for holders in members {
            for t in 0..h {
                sums.push(holders.iter().map(|&(a, e)| pick(&duals[a])[e * h + t]).sum());
            }
        }
    }
    sums
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn consensus_of_agreeing_copies_is_unchanged(values in prop::collection::vec(-3.0f64..3.0, 20), h in 1usize..4) {
        let map = three_area_map(h);
        let z = consensus_update(&map, &some(&locals_for(&map, &values))).unwrap();
        let agreeing: Vec<LocalValues> = (0..3).map(|a| z.local(&map, a)).collect();
        let again = consensus_update(&map, &some(&agreeing)).unwrap();
        for (x, y) in again.theta_bar.iter().zip(&z.theta_bar).chain(again.f_bar.iter().zip(&z.f_bar)) {
            prop_assert!((x - y).abs() <= 1e-12);
        }
        let res = residual(&map, &agreeing, &z, Some(&z), 7.0);
        prop_assert!(res.r_inf <= 1e-12 && res.s_inf <= 1e-12);
    }

    #[test]
    fn multipliers_sum_to_zero_at_every_entry(
        rounds in prop::collection::vec(prop::collection::vec(-2.0f64..2.0, 24), 1..8),
        rho in 0.1f64..500.0,
    ) {
        let map = three_area_map(2);
        let mut duals = map.zero_duals();
        for values in &rounds {
            let locals = locals_for(&map, values);
            let z = consensus_update(&map, &some(&locals)).unwrap();
            dual_update(&map, &mut duals, &locals, &z, rho);
        }
        let scale = rho * 4.0 * rounds.len() as f64;
        for s in dual_sums(&map, &duals) {
            prop_assert!(s.abs() <= 1e-12 * scale, "dual sum {s}");
        }
    }

    #[test]
    fn flags_follow_commitment(bits in prop::collection::vec(0u8..2, 1..12), on in any::<bool>(), dur in 1usize..6, cold in 1usize..5) {
        let mut g = gen("b1", 0.0, 10.0, 1.0, 0.0);
        g.initial_status_on = on;
        g.initial_status_duration = dur;
        g.cold_start_time = cold;
        let case = common::one_bus(vec![0.0; bits.len()], vec![g]);
        let s = reconstruct_flags(&case, &[bits.clone()]);
        let mut prev = on as i32;
        for t in 0..bits.len() {
            let (u, v, vh, w) = (s.u[0][t] as i32, s.v[0][t] as i32, s.vh[0][t] as i32, s.w[0][t] as i32);
            prop_assert_eq!(u - prev, v - w);
            prop_assert!(v * w == 0 && vh <= v);
            prev = u;
        }
    }
}

/// Random convex QP with a known interior feasible point `x0`.
#[derive(Debug, Clone)]
struct Instance {
    qp: QuadraticProgram,
    x0: Vec<f64>,
}

fn qp_instance() -> impl Strategy<Value = Instance> {
    (2usize..6).prop_flat_map(|n| {
        (
            prop::collection::vec(-1.0f64..1.0, n * n),
            prop::collection::vec(-5.0f64..5.0, n),
            prop::collection::vec(-0.9f64..0.9, n),
            prop::collection::vec(-1.0f64..1.0, 3 * n),
            0.0f64..0.5,
        )
            .prop_map(move |(m, c, x0, rows, slack)| {
                let mut qp = QuadraticProgram::new(n);
                // Q = MᵀM + 0.01 I
                for i in 0..n {
                    for j in i..n {
                        let q: f64 = (0..n).map(|k| m[k * n + i] * m[k * n + j]).sum();
                        qp.add_hessian(i, j, q + if i == j { 0.01 } else { 0.0 });
                    }
                }
                qp.c = c;
                for j in 0..n {
                    qp.set_bounds(j, -1.0, 1.0);
                }
                let dot = |r: &[f64]| r.iter().zip(&x0).map(|(a, b)| a * b).sum::<f64>();
                let row = |k: usize| -> Vec<(usize, f64)> { (0..n).map(|j| (j, rows[k * n + j])).collect() };
                qp.add_eq(&row(0), dot(&rows[0..n]));
                qp.add_le(&row(1), dot(&rows[n..2 * n]) + slack);
                qp.add_le(&row(2), dot(&rows[2 * n..3 * n]) + slack);
                Instance { qp, x0 }
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(150))]

    #[test]
    fn qp_solution_satisfies_kkt(inst in qp_instance()) {
        let sol = solve_qp(&inst.qp, DEFAULT_TOL).unwrap();
        prop_assert!(sol.is_optimal(), "{:?}", sol.status);
        let report = check_kkt(&inst.qp, &sol, 1e-6);
        prop_assert!(report.passes(1e-6), "{report:?}");
        prop_assert!((inst.qp.objective_at(&sol.x) - sol.objective).abs() <= 1e-8 * sol.objective.abs().max(1.0));
    }

    #[test]
    fn qp_objective_beats_feasible_points(inst in qp_instance(), mix in prop::collection::vec(0.0f64..1.0, 4)) {
        let sol = solve_qp(&inst.qp, DEFAULT_TOL).unwrap();
        prop_assert!(sol.is_optimal());
        // the feasible set is convex, so points between x* and x0 stay feasible
        for a in mix.iter().copied().chain([1.0]) {
            let y: Vec<f64> = sol.x.iter().zip(&inst.x0).map(|(s, z)| (1.0 - a) * s + a * z).collect();
            prop_assert!(inst.qp.max_violation(&y) <= 1e-7);
            prop_assert!(sol.objective <= inst.qp.objective_at(&y) + 1e-7);
        }
    }

    #[test]
    fn miqp_matches_enumeration(inst in qp_instance(), nb in 1usize..4) {
        let n = inst.qp.num_vars();
        let binaries: Vec<usize> = (0..nb.min(n)).collect();
        let mut qp = inst.qp.clone();
        for &j in &binaries {
            qp.set_bounds(j, 0.0, 1.0);
        }
        let p = MixedIntegerQp { qp: qp.clone(), binary_indices: binaries.clone() };
        let sol = solve_miqp(&p, 0.0, MiqpOptions::default().node_limit).unwrap();

        let mut best = f64::INFINITY;
        for mask in 0..(1u32 << binaries.len()) {
            let mut fixed = qp.clone();
            for (i, &j) in binaries.iter().enumerate() {
                let v = ((mask >> i) & 1) as f64;
                fixed.set_bounds(j, v, v);
            }
            let s = solve_qp(&fixed, DEFAULT_TOL).unwrap();
            if s.is_optimal() {
                best = best.min(s.objective);
            }
        }
        if best.is_finite() {
            prop_assert!((sol.objective - best).abs() <= 1e-6 * best.abs().max(1.0), "{} vs {}", sol.objective, best);
            prop_assert!(sol.incumbent_history.windows(2).all(|w| w[1] <= w[0]));
        } else {
            prop_assert!(!sol.objective.is_finite());
        }
    }
}

fn ring_case(reactances: &[f64]) -> NetworkCase {
    let n = reactances.len();
    let ids: Vec<String> = (1..=n).map(|i| format!("b{i}")).collect();
    NetworkCase {
        horizon: 1,
        base_mva: 100.0,
        buses: (0..n).map(|i| bus(&ids[i], if i < n / 2 { "A" } else { "B" }, vec![1.0])).collect(),
        branches: (0..n)
            .map(|i| line(&format!("l{i}"), &ids[i], &ids[(i + 1) % n], reactances[i], 100.0))
            .collect(),
        generators: vec![gen("b1", 0.0, 100.0, 10.0, 0.1)],
        areas: areas(&["A", "B"]),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn admittance_is_a_laplacian(x in prop::collection::vec(0.01f64..1.0, 3..9)) {
        let case = ring_case(&x);
        let b = build_admittance(&case);
        let n = b.len();
        for i in 0..n {
            prop_assert!(b[i].iter().sum::<f64>().abs() <= 1e-9 * b[i][i]);
            for j in 0..n {
                prop_assert_eq!(b[i][j], b[j][i]);
            }
        }
    }

    #[test]
    fn partition_covers_every_branch(x in prop::collection::vec(0.01f64..1.0, 4..9)) {
        let case = ring_case(&x);
        let p = partition_areas(&case).unwrap();
        let ends = case.branch_ends();
        let bus_area = case.bus_areas();
        for (k, &(i, j)) in ends.iter().enumerate() {
            let internal = p.views.iter().filter(|v| v.internal_branches.contains(&k)).count();
            let tie = p.tie_position(k).is_some();
            prop_assert_eq!(tie, bus_area[i] != bus_area[j]);
            prop_assert_eq!(internal, if tie { 0 } else { 1 });
            if tie {
                prop_assert!(p.shared_position(i).is_some() && p.shared_position(j).is_some());
            }
        }
        // a ring split in two halves crosses exactly twice
        prop_assert_eq!(p.tie_lines.len(), 2);
    }

    #[test]
    fn case_json_round_trips(x in prop::collection::vec(0.01f64..1.0, 3..9)) {
        let case = ring_case(&x);
        let back = NetworkCase::from_json_str(&case.to_json_string()).unwrap();
        prop_assert_eq!(back, case);
    }
}

fn constant_schedule(case: &NetworkCase, mw: f64) -> InterchangeSchedule {
    InterchangeSchedule {
        entries: default_interfaces(case)
            .unwrap()
            .into_iter()
            .map(|d| InterchangeEntry {
                interface: d.name,
                value: InterchangeValue::Constant { mw },
            })
            .collect(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    // On a radial tie the fixed schedule is a restriction of the
    // centralized problem, so it can never be cheaper.
    #[test]
    fn fixed_interchange_never_beats_centralized(mw in -95.0f64..95.0) {
        let case = bundled_case("micro2").unwrap();
        let opts = MiqpOptions::default();
        let single = run_single_area(&case, &opts).unwrap();
        let ifs = default_interfaces(&case).unwrap();
        let unc = run_uncoordinated(&case, &ifs, &constant_schedule(&case, mw), &opts).unwrap();
        if unc.feasible {
            prop_assert!(single.cost.total <= unc.cost.total + 1e-6 * single.cost.total);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn best_candidate_is_retained(seed in 0u64..1000, restarts in 1usize..3) {
        let case = bundled_case("micro2").unwrap();
        let params = AlgoParams { seed, n_ic: restarts, ..Default::default() };
        let res = run_multi_area_uc(&case, &params).unwrap();
        let best = res
            .trace
            .iter()
            .filter(|r| r.phase == Phase::Candidate && r.feasible)
            .map(|r| r.cost)
            .fold(f64::INFINITY, f64::min);
        prop_assert!(res.feasible);
        prop_assert!(rel_diff(res.cost.total, best) <= 1e-9, "{} vs {}", res.cost.total, best);
        let again = commitment_cost(&case, &res.schedule).with_energy(dispatch_cost(&case, &res.dispatch));
        prop_assert!(rel_diff(again.total, res.cost.total) <= 1e-9);
        let single = run_single_area(&case, &MiqpOptions::default()).unwrap();
        prop_assert!(single.cost.total <= res.cost.total + 1e-6 * single.cost.total);
    }
}
