//! Case builders and independent oracles shared by the integration tests.
#![allow(dead_code)]

use interclear::model::{Area, Branch, Bus, GeneratorParams, NetworkCase};

pub fn gen(bus: &str, p_min: f64, p_max: f64, cost_l: f64, cost_q: f64) -> GeneratorParams {
    GeneratorParams {
        id: None,
        bus_id: bus.into(),
        p_min,
        p_max,
        p_su_max: p_max,
        p_sd_max: p_max,
        ramp_up: p_max,
        ramp_down: p_max,
        min_up: 1,
        min_down: 1,
        cold_start_time: 1,
        cost_q,
        cost_l,
        cost_noload: 0.0,
        cost_startup: 0.0,
        cost_hot_startup: 0.0,
        cost_shutdown: 0.0,
        initial_status_on: true,
        initial_status_duration: 10,
        initial_output: None,
    }
}

pub fn bus(id: &str, area: &str, demand: Vec<f64>) -> Bus {
    Bus {
        id: id.into(),
        area_id: area.into(),
        demand,
    }
}

pub fn line(id: &str, from: &str, to: &str, x: f64, limit: f64) -> Branch {
    Branch {
        id: Some(id.into()),
        from_bus: from.into(),
        to_bus: to.into(),
        reactance: x,
        flow_limit: limit,
    }
}

pub fn areas(ids: &[&str]) -> Vec<Area> {
    ids.iter().map(|a| Area { id: (*a).into() }).collect()
}

/// Everything on one bus in one area.
pub fn one_bus(demand: Vec<f64>, generators: Vec<GeneratorParams>) -> NetworkCase {
    NetworkCase {
        horizon: demand.len(),
        base_mva: 100.0,
        buses: vec![bus("b1", "A", demand)],
        branches: vec![],
        generators,
        areas: areas(&["A"]),
    }
}

/// Output of one unit at system price `lambda`.
fn response(g: &GeneratorParams, lambda: f64) -> f64 {
    if g.cost_q > 0.0 {
        ((lambda - g.cost_l) / (2.0 * g.cost_q)).clamp(g.p_min, g.p_max)
    } else if lambda > g.cost_l {
        g.p_max
    } else {
        g.p_min
    }
}

/// Copper-plate economic dispatch of `units` against `demand` by bisection on
/// the system price. Returns outputs and the price, or `None` if demand lies
/// outside the committed range. Costs must be strictly convex for the price
/// to be unique.
pub fn copper_plate_dispatch(units: &[&GeneratorParams], demand: f64) -> Option<(Vec<f64>, f64)> {
    let lo_cap: f64 = units.iter().map(|g| g.p_min).sum();
    let hi_cap: f64 = units.iter().map(|g| g.p_max).sum();
    if demand < lo_cap - 1e-9 || demand > hi_cap + 1e-9 {
        return None;
    }
    let (mut lo, mut hi) = (-1e4, 1e4);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let total: f64 = units.iter().map(|g| response(g, mid)).sum();
        if total < demand {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let lambda = 0.5 * (lo + hi);
    Some((units.iter().map(|g| response(g, lambda)).collect(), lambda))
}

/// Minimum up/down and initial-condition rules checked spell by spell: every
/// spell opened inside the horizon must last its minimum time unless the
/// horizon ends first, and the initial spell must finish its own minimum.
pub fn satisfies_min_times(g: &GeneratorParams, u: &[u8]) -> bool {
    let h = u.len();
    let mut t = 0;
    while t < h {
        let val = u[t];
        let mut end = t;
        while end < h && u[end] == val {
            end += 1;
        }
        let len = end - t;
        let min = if val == 1 { g.min_up } else { g.min_down };
        let continues_initial = t == 0 && (val == 1) == g.initial_status_on;
        let need = if continues_initial {
            min.saturating_sub(g.initial_status_duration)
        } else {
            min
        };
        if len < need && end < h {
            return false;
        }
        t = end;
    }
    // a change at t = 0 ends the initial spell, which must have served its minimum
    if h > 0 && (u[0] == 1) != g.initial_status_on {
        let min = if g.initial_status_on { g.min_up } else { g.min_down };
        if g.initial_status_duration < min {
            return false;
        }
    }
    true
}

/// Fixed commitment cost of one unit's trajectory with the hot rate applied
/// whenever the unit restarts after being off for fewer than
/// `cold_start_time` intervals (history before the horizon included).
pub fn trajectory_commitment_cost(g: &GeneratorParams, u: &[u8]) -> f64 {
    let mut cost = 0.0;
    let mut prev = g.initial_status_on;
    let mut off = if g.initial_status_on { 0 } else { g.initial_status_duration };
    for &x in u {
        let on = x == 1;
        if on {
            cost += g.cost_noload;
            if !prev {
                cost += if off < g.cold_start_time {
                    g.cost_hot_startup
                } else {
                    g.cost_startup
                };
            }
            off = 0;
        } else {
            if prev {
                cost += g.cost_shutdown;
            }
            off += 1;
        }
        prev = on;
    }
    cost
}

pub fn rel_diff(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}
