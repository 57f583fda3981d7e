//! Case data: buses, branches, generators and areas, plus the derived
//! multi-area topology (tie-lines, shared buses, per-area views).

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bus {
    pub id: String,
    pub area_id: String,
    /// MW per interval, one entry per interval of the horizon.
    pub demand: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Branch {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    pub from_bus: String,
    pub to_bus: String,
    /// Per-unit on `base_mva`.
    pub reactance: f64,
    /// MW, enforced in both directions.
    pub flow_limit: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorParams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    pub bus_id: String,
    pub p_min: f64,
    pub p_max: f64,
    pub p_su_max: f64,
    pub p_sd_max: f64,
    pub ramp_up: f64,
    pub ramp_down: f64,
    pub min_up: usize,
    pub min_down: usize,
    pub cold_start_time: usize,
    pub cost_q: f64,
    pub cost_l: f64,
    pub cost_noload: f64,
    pub cost_startup: f64,
    pub cost_hot_startup: f64,
    pub cost_shutdown: f64,
    pub initial_status_on: bool,
    pub initial_status_duration: usize,
    /// Total output (MW) in the interval before the horizon. Defaults to
    /// `p_min` when initially on and 0 otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_output: Option<f64>,
}

impl GeneratorParams {
    /// Output above minimum in the interval before the horizon, used by the
    /// first ramp row.
    pub fn initial_above_min(&self) -> f64 {
        if !self.initial_status_on {
            return 0.0;
        }
        match self.initial_output {
            Some(p) => (p - self.p_min).max(0.0),
            None => 0.0,
        }
    }

    pub fn initial_u(&self) -> f64 {
        if self.initial_status_on {
            1.0
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Area {
    pub id: String,
}

/// A full multi-area system over a horizon of `horizon` intervals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkCase {
    pub horizon: usize,
    pub base_mva: f64,
    pub buses: Vec<Bus>,
    pub branches: Vec<Branch>,
    pub generators: Vec<GeneratorParams>,
    pub areas: Vec<Area>,
}

/// Per-area slice of the network.
///
/// All indices are positions in the owning [`NetworkCase`]'s vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct AreaView {
    pub area_index: usize,
    pub area_id: String,
    pub internal_buses: Vec<usize>,
    pub adjacent_external_buses: Vec<usize>,
    pub tie_lines: Vec<usize>,
    pub internal_branches: Vec<usize>,
    pub generators: Vec<usize>,
}

impl AreaView {
    /// Internal buses followed by adjacent external buses.
    pub fn view_buses(&self) -> Vec<usize> {
        let mut v = self.internal_buses.clone();
        v.extend_from_slice(&self.adjacent_external_buses);
        v
    }

    pub fn is_internal(&self, bus: usize) -> bool {
        self.internal_buses.binary_search(&bus).is_ok()
    }
}

/// Multi-area topology: per-area views, tie-lines and shared buses.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    pub views: Vec<AreaView>,
    /// Branch indices whose endpoints lie in different areas, ascending.
    pub tie_lines: Vec<usize>,
    /// Endpoints of tie-lines, ascending by bus index.
    pub shared_buses: Vec<usize>,
    /// For each shared bus (same order as `shared_buses`), the areas whose
    /// view contains it, ascending.
    pub areas_of_shared: Vec<Vec<usize>>,
}

impl Partition {
    pub fn shared_position(&self, bus: usize) -> Option<usize> {
        self.shared_buses.binary_search(&bus).ok()
    }

    pub fn tie_position(&self, branch: usize) -> Option<usize> {
        self.tie_lines.binary_search(&branch).ok()
    }
}

fn invalid(path: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Validation {
        path: path.into(),
        message: message.into(),
    }
}

impl NetworkCase {
    pub fn from_json_str(text: &str) -> Result<Self> {
        let case: NetworkCase = serde_json::from_str(text).map_err(Error::Parse)?;
        case.validate()?;
        Ok(case)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("case serializes")
    }

    pub fn bus_index(&self) -> HashMap<&str, usize> {
        self.buses
            .iter()
            .enumerate()
            .map(|(i, b)| (b.id.as_str(), i))
            .collect()
    }

    pub fn area_index(&self) -> HashMap<&str, usize> {
        self.areas
            .iter()
            .enumerate()
            .map(|(i, a)| (a.id.as_str(), i))
            .collect()
    }

    /// Area index of every bus.
    pub fn bus_areas(&self) -> Vec<usize> {
        let areas = self.area_index();
        self.buses.iter().map(|b| areas[b.area_id.as_str()]).collect()
    }

    /// Bus index of every generator.
    pub fn generator_buses(&self) -> Vec<usize> {
        let buses = self.bus_index();
        self.generators
            .iter()
            .map(|g| buses[g.bus_id.as_str()])
            .collect()
    }

    /// (from, to) bus indices of every branch.
    pub fn branch_ends(&self) -> Vec<(usize, usize)> {
        let buses = self.bus_index();
        self.branches
            .iter()
            .map(|br| (buses[br.from_bus.as_str()], buses[br.to_bus.as_str()]))
            .collect()
    }

    pub fn generator_label(&self, g: usize) -> String {
        self.generators[g]
            .id
            .clone()
            .unwrap_or_else(|| format!("g{}", g + 1))
    }

    pub fn branch_label(&self, k: usize) -> String {
        self.branches[k]
            .id
            .clone()
            .unwrap_or_else(|| format!("br{}", k + 1))
    }

    pub fn total_demand(&self, t: usize) -> f64 {
        self.buses.iter().map(|b| b.demand[t]).sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(invalid("horizon", "must be at least 1"));
        }
        if !(self.base_mva > 0.0) {
            return Err(invalid("base_mva", "must be positive"));
        }
        if self.buses.is_empty() {
            return Err(invalid("buses", "case has no buses"));
        }

        let mut area_ids = BTreeSet::new();
        for (k, a) in self.areas.iter().enumerate() {
            if !area_ids.insert(a.id.as_str()) {
                return Err(invalid(format!("areas[{k}].id"), format!("duplicate area id \"{}\"", a.id)));
            }
        }

        let mut bus_ids = BTreeSet::new();
        let mut area_bus_count: BTreeMap<&str, usize> = BTreeMap::new();
        for (k, b) in self.buses.iter().enumerate() {
            if !bus_ids.insert(b.id.as_str()) {
                return Err(invalid(format!("buses[{k}].id"), format!("duplicate bus id \"{}\"", b.id)));
            }
            if !area_ids.contains(b.area_id.as_str()) {
                return Err(invalid(
                    format!("buses[{k}].area_id"),
                    format!("bus \"{}\" references unknown area \"{}\"", b.id, b.area_id),
                ));
            }
            *area_bus_count.entry(b.area_id.as_str()).or_default() += 1;
            if b.demand.len() != self.horizon {
                return Err(invalid(
                    format!("buses[{k}].demand"),
                    format!("expected {} values, found {}", self.horizon, b.demand.len()),
                ));
            }
            if let Some(t) = b.demand.iter().position(|d| !(d.is_finite() && *d >= 0.0)) {
                return Err(invalid(
                    format!("buses[{k}].demand[{t}]"),
                    "demand must be finite and non-negative",
                ));
            }
        }
        for a in &self.areas {
            if !area_bus_count.contains_key(a.id.as_str()) {
                return Err(invalid("areas", format!("area \"{}\" contains no buses", a.id)));
            }
        }

        for (k, br) in self.branches.iter().enumerate() {
            for (field, id) in [("from_bus", &br.from_bus), ("to_bus", &br.to_bus)] {
                if !bus_ids.contains(id.as_str()) {
                    return Err(invalid(
                        format!("branches[{k}].{field}"),
                        format!("unknown bus \"{id}\""),
                    ));
                }
            }
            if br.from_bus == br.to_bus {
                return Err(invalid(format!("branches[{k}]"), "from_bus equals to_bus"));
            }
            if !(br.reactance > 0.0 && br.reactance.is_finite()) {
                return Err(invalid(format!("branches[{k}].reactance"), "must be positive"));
            }
            if !(br.flow_limit > 0.0) {
                return Err(invalid(format!("branches[{k}].flow_limit"), "must be positive"));
            }
        }

        for (k, g) in self.generators.iter().enumerate() {
            let path = |f: &str| format!("generators[{k}].{f}");
            if !bus_ids.contains(g.bus_id.as_str()) {
                return Err(invalid(path("bus_id"), format!("unknown bus \"{}\"", g.bus_id)));
            }
            if !(0.0 <= g.p_min && g.p_min <= g.p_max) {
                return Err(invalid(path("p_min"), "require 0 <= p_min <= p_max"));
            }
            if !(g.p_min <= g.p_su_max && g.p_su_max <= g.p_max) {
                return Err(invalid(path("p_su_max"), "require p_min <= p_su_max <= p_max"));
            }
            if !(g.p_min <= g.p_sd_max && g.p_sd_max <= g.p_max) {
                return Err(invalid(path("p_sd_max"), "require p_min <= p_sd_max <= p_max"));
            }
            if g.min_up < 1 {
                return Err(invalid(path("min_up"), "must be at least 1"));
            }
            if g.min_down < 1 {
                return Err(invalid(path("min_down"), "must be at least 1"));
            }
            if g.ramp_up < 0.0 || g.ramp_down < 0.0 {
                return Err(invalid(path("ramp_up"), "ramp rates must be non-negative"));
            }
            if g.cost_q < 0.0 {
                return Err(invalid(path("cost_q"), "must be non-negative"));
            }
            if g.cost_hot_startup > g.cost_startup {
                return Err(invalid(path("cost_hot_startup"), "must not exceed cost_startup"));
            }
            if let Some(p0) = g.initial_output {
                if p0 < 0.0 {
                    return Err(invalid(path("initial_output"), "must be non-negative"));
                }
            }
        }

        // connectivity of the branch graph
        let index = self.bus_index();
        let mut adj = vec![Vec::new(); self.buses.len()];
        for br in &self.branches {
            let (a, b) = (index[br.from_bus.as_str()], index[br.to_bus.as_str()]);
            adj[a].push(b);
            adj[b].push(a);
        }
        let reached = reachable(&adj, 0);
        if let Some(i) = reached.iter().position(|r| !r) {
            return Err(invalid(
                "branches",
                format!("network is disconnected: bus \"{}\" unreachable from \"{}\"", self.buses[i].id, self.buses[0].id),
            ));
        }
        Ok(())
    }
}

fn reachable(adj: &[Vec<usize>], start: usize) -> Vec<bool> {
    let mut seen = vec![false; adj.len()];
    let mut queue = VecDeque::from([start]);
    seen[start] = true;
    while let Some(i) = queue.pop_front() {
        for &j in &adj[i] {
            if !seen[j] {
                seen[j] = true;
                queue.push_back(j);
            }
        }
    }
    seen
}

/// Parse and validate a case from raw bytes.
pub fn load_case(source: &[u8]) -> Result<NetworkCase> {
    let text = std::str::from_utf8(source).map_err(|e| Error::Validation {
        path: String::new(),
        message: format!("case is not UTF-8: {e}"),
    })?;
    NetworkCase::from_json_str(text)
}

pub fn load_case_file(path: &std::path::Path) -> Result<NetworkCase> {
    let bytes = std::fs::read(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    load_case(&bytes)
}

/// Cases shipped with the crate, by name.
pub const BUNDLED_CASES: [(&str, &str); 4] = [
    ("micro2", include_str!("../cases/micro2.json")),
    ("demo4", include_str!("../cases/demo4.json")),
    ("demo14", include_str!("../cases/demo14.json")),
    ("demo3area", include_str!("../cases/demo3area.json")),
];

/// A bundled case by name (`"micro2"` or `"micro2.json"`).
pub fn bundled_case(name: &str) -> Option<NetworkCase> {
    let stem = name.strip_suffix(".json").unwrap_or(name);
    BUNDLED_CASES
        .iter()
        .find(|(n, _)| *n == stem)
        .map(|(_, text)| NetworkCase::from_json_str(text).expect("bundled case is valid"))
}

/// Dense DC susceptance matrix over a subset of branches, as a Laplacian:
/// `B[i][j] = -sum 1/x` over branches between i and j, `B[i][i] = sum 1/x`
/// over incident branches.
pub fn admittance_from_branches(case: &NetworkCase, branches: &[usize]) -> Vec<Vec<f64>> {
    let n = case.buses.len();
    let ends = case.branch_ends();
    let mut b = vec![vec![0.0; n]; n];
    for &k in branches {
        let (i, j) = ends[k];
        let y = 1.0 / case.branches[k].reactance;
        b[i][j] -= y;
        b[j][i] -= y;
        b[i][i] += y;
        b[j][j] += y;
    }
    b
}

pub fn build_admittance(case: &NetworkCase) -> Vec<Vec<f64>> {
    let all: Vec<usize> = (0..case.branches.len()).collect();
    admittance_from_branches(case, &all)
}

pub fn partition_areas(case: &NetworkCase) -> Result<Partition> {
    let bus_area = case.bus_areas();
    let ends = case.branch_ends();
    let gen_bus = case.generator_buses();
    let n_areas = case.areas.len();

    let mut views: Vec<AreaView> = case
        .areas
        .iter()
        .enumerate()
        .map(|(a, area)| AreaView {
            area_index: a,
            area_id: area.id.clone(),
            internal_buses: (0..case.buses.len()).filter(|&i| bus_area[i] == a).collect(),
            adjacent_external_buses: Vec::new(),
            tie_lines: Vec::new(),
            internal_branches: Vec::new(),
            generators: (0..case.generators.len())
                .filter(|&g| bus_area[gen_bus[g]] == a)
                .collect(),
        })
        .collect();

    if let Some(v) = views.iter().find(|v| v.internal_buses.is_empty()) {
        return Err(Error::Validation {
            path: "areas".into(),
            message: format!("area \"{}\" has no internal buses", v.area_id),
        });
    }

    let mut tie_lines = Vec::new();
    let mut shared = BTreeSet::new();
    let mut external: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n_areas];
    for (k, &(i, j)) in ends.iter().enumerate() {
        let (ai, aj) = (bus_area[i], bus_area[j]);
        if ai == aj {
            views[ai].internal_branches.push(k);
        } else {
            tie_lines.push(k);
            views[ai].tie_lines.push(k);
            views[aj].tie_lines.push(k);
            external[ai].insert(j);
            external[aj].insert(i);
            shared.insert(i);
            shared.insert(j);
        }
    }
    for (v, ext) in views.iter_mut().zip(external) {
        v.adjacent_external_buses = ext.into_iter().collect();
    }
    let shared_buses: Vec<usize> = shared.into_iter().collect();
    let areas_of_shared = shared_buses
        .iter()
        .map(|&i| {
            views
                .iter()
                .filter(|v| v.is_internal(i) || v.adjacent_external_buses.contains(&i))
                .map(|v| v.area_index)
                .collect()
        })
        .collect();
    Ok(Partition {
        views,
        tie_lines,
        shared_buses,
        areas_of_shared,
    })
}

/// Summary used by the `validate` command.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CaseStats {
    pub buses: usize,
    pub branches: usize,
    pub generators: usize,
    pub areas: usize,
    pub tie_lines: usize,
    pub shared_buses: usize,
    pub horizon: usize,
}

impl std::fmt::Display for CaseStats {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let count = |n: usize, one: &str, many: &str| format!("{n} {}", if n == 1 { one } else { many });
        write!(
            f,
            "{}, {}, {}, {}, {}, {}, horizon {}",
            count(self.buses, "bus", "buses"),
            count(self.areas, "area", "areas"),
            count(self.tie_lines, "tie-line", "tie-lines"),
            count(self.shared_buses, "shared bus", "shared buses"),
            count(self.generators, "generator", "generators"),
            count(self.branches, "branch", "branches"),
            self.horizon
        )
    }
}

pub fn case_stats(case: &NetworkCase) -> Result<CaseStats> {
    let p = partition_areas(case)?;
    Ok(CaseStats {
        buses: case.buses.len(),
        branches: case.branches.len(),
        generators: case.generators.len(),
        areas: case.areas.len(),
        tie_lines: p.tie_lines.len(),
        shared_buses: p.shared_buses.len(),
        horizon: case.horizon,
    })
}
