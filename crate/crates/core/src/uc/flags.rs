//! Commitment flags derived from on/off trajectories and the minimum
//! up/down-time logic they must satisfy.

use serde::Serialize;

use crate::model::{GeneratorParams, NetworkCase};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TimeRule {
    /// Unit initially on must stay on until its minimum up time is served.
    InitialOn,
    /// Unit initially off must stay off until its minimum down time is served.
    InitialOff,
    MinUp,
    MinDown,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub generator: usize,
    /// Zero-based interval.
    pub t: usize,
    pub rule: TimeRule,
}

/// Binary u/v/vH/w flags for every generator and interval.
#[derive(Debug, Clone, PartialEq)]
pub struct CommitmentSchedule {
    pub u: Vec<Vec<u8>>,
    pub v: Vec<Vec<u8>>,
    pub vh: Vec<Vec<u8>>,
    pub w: Vec<Vec<u8>>,
    pub violations: Vec<Violation>,
}

impl CommitmentSchedule {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn horizon(&self) -> usize {
        self.u.first().map_or(0, Vec::len)
    }

    /// `w` one interval ahead, zero past the horizon.
    pub fn w_next(&self, g: usize, t: usize) -> u8 {
        self.w[g].get(t + 1).copied().unwrap_or(0)
    }
}

/// Intervals (zero-based, exclusive end) a unit initially on must remain on.
pub fn forced_on_until(gen: &GeneratorParams, horizon: usize) -> usize {
    if gen.initial_status_on {
        gen.min_up.saturating_sub(gen.initial_status_duration).min(horizon)
    } else {
        0
    }
}

/// Intervals (zero-based, exclusive end) a unit initially off must remain off.
pub fn forced_off_until(gen: &GeneratorParams, horizon: usize) -> usize {
    if gen.initial_status_on {
        0
    } else {
        gen.min_down.saturating_sub(gen.initial_status_duration).min(horizon)
    }
}

/// Whether a startup at zero-based `t` may be priced as a hot start given the
/// shutdown flags `w`: some shutdown happened fewer than `cold_start_time`
/// intervals earlier, or the unit has been off since before the horizon for
/// fewer than that many intervals.
pub fn hot_start_allowed(gen: &GeneratorParams, w: &[u8], t: usize) -> bool {
    let tc = gen.cold_start_time;
    let start = (t + 1).saturating_sub(tc);
    if (start..t).any(|tau| w[tau] == 1) {
        return true;
    }
    !gen.initial_status_on && gen.initial_status_duration + t < tc
}

pub fn check_min_times(gen: &GeneratorParams, g: usize, u: &[u8]) -> Vec<Violation> {
    let horizon = u.len();
    let u0 = u8::from(gen.initial_status_on);
    let mut out = Vec::new();
    for t in 0..forced_on_until(gen, horizon) {
        if u[t] != 1 {
            out.push(Violation { generator: g, t, rule: TimeRule::InitialOn });
        }
    }
    for t in 0..forced_off_until(gen, horizon) {
        if u[t] != 0 {
            out.push(Violation { generator: g, t, rule: TimeRule::InitialOff });
        }
    }
    let prev = |t: usize| if t == 0 { u0 } else { u[t - 1] };
    let start = |t: usize| u8::from(u[t] == 1 && prev(t) == 0);
    let stop = |t: usize| u8::from(u[t] == 0 && prev(t) == 1);
    for t in 0..horizon {
        let lo_up = (t + 1).saturating_sub(gen.min_up);
        let starts: u32 = (lo_up..=t).map(|s| start(s) as u32).sum();
        if starts > u[t] as u32 {
            out.push(Violation { generator: g, t, rule: TimeRule::MinUp });
        }
        let lo_dn = (t + 1).saturating_sub(gen.min_down);
        let stops: u32 = (lo_dn..=t).map(|s| stop(s) as u32).sum();
        if stops > 1 - u[t] as u32 {
            out.push(Violation { generator: g, t, rule: TimeRule::MinDown });
        }
    }
    out
}

/// Startup/shutdown flags from first differences of `u`, hot-start flags at
/// every startup that follows a short enough offline spell, and a record of
/// any minimum-time violations.
pub fn reconstruct_flags(case: &NetworkCase, u: &[Vec<u8>]) -> CommitmentSchedule {
    let mut s = CommitmentSchedule {
        u: u.to_vec(),
        v: Vec::with_capacity(u.len()),
        vh: Vec::with_capacity(u.len()),
        w: Vec::with_capacity(u.len()),
        violations: Vec::new(),
    };
    for (g, (gen, row)) in case.generators.iter().zip(u).enumerate() {
        let horizon = row.len();
        let mut v = vec![0u8; horizon];
        let mut w = vec![0u8; horizon];
        let mut prev = u8::from(gen.initial_status_on);
        for t in 0..horizon {
            if row[t] > prev {
                v[t] = 1;
            } else if row[t] < prev {
                w[t] = 1;
            }
            prev = row[t];
        }

        // length of the offline spell ending just before each startup
        let mut vh = vec![0u8; horizon];
        let mut off_len = if gen.initial_status_on {
            0
        } else {
            gen.initial_status_duration
        };
        for t in 0..horizon {
            if v[t] == 1 && off_len < gen.cold_start_time {
                vh[t] = 1;
            }
            off_len = if row[t] == 0 { off_len + 1 } else { 0 };
        }

        s.violations.extend(check_min_times(gen, g, row));
        s.v.push(v);
        s.vh.push(vh);
        s.w.push(w);
    }
    s
}
