//! Batch front end: run configuration, the `clear`, `validate` and
//! `derive-interchange` commands, and the files they write.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::admm::TraceRecord;
use crate::baselines::{
    default_interfaces, default_peak_hours, derive_interchange, run_single_area, run_uncoordinated, InterchangeMode,
    InterchangeSchedule, InterfaceDef,
};
use crate::coordination::{run_multi_area_uc, ClearingResult, Method};
use crate::error::{Error, Result};
use crate::miqp::MiqpOptions;
use crate::model::{bundled_case, case_stats, load_case_file, partition_areas, NetworkCase};
use crate::uc::AlgoParams;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodSel {
    Single,
    Uncoordinated,
    Coordinated,
    #[default]
    All,
}

impl std::str::FromStr for MethodSel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "single" => Ok(MethodSel::Single),
            "uncoordinated" => Ok(MethodSel::Uncoordinated),
            "coordinated" => Ok(MethodSel::Coordinated),
            "all" => Ok(MethodSel::All),
            _ => Err(Error::Validation {
                path: "method".into(),
                message: format!("unknown method \"{s}\" (single, uncoordinated, coordinated, all)"),
            }),
        }
    }
}

/// Interfaces and interchange for the uncoordinated regime. A missing
/// `schedule` is derived from a single-area run; missing `interfaces` default
/// to one interface per area pair.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InterchangeConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interfaces: Option<Vec<InterfaceDef>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule: Option<InterchangeSchedule>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<InterchangeMode>,
    /// One-based; defaults to hours 8 through 23.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub peak_hours: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MiqpConfig {
    #[serde(default)]
    pub rel_gap: f64,
    #[serde(default = "default_node_limit")]
    pub node_limit: usize,
}

fn default_node_limit() -> usize {
    MiqpOptions::default().node_limit
}

impl Default for MiqpConfig {
    fn default() -> Self {
        Self {
            rel_gap: 0.0,
            node_limit: default_node_limit(),
        }
    }
}

impl MiqpConfig {
    pub fn options(&self) -> MiqpOptions {
        MiqpOptions {
            rel_gap: self.rel_gap,
            node_limit: self.node_limit,
            ..Default::default()
        }
    }
}

/// A run file. Relative case paths are taken from the file's directory;
/// a bare bundled case name (`micro2`) is also accepted.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub case: Option<PathBuf>,
    #[serde(default)]
    pub method: MethodSel,
    #[serde(default)]
    pub params: AlgoParams,
    #[serde(default)]
    pub interchange: InterchangeConfig,
    #[serde(default)]
    pub miqp: MiqpConfig,
    #[serde(default)]
    pub out: Option<PathBuf>,
    /// Overrides `params.seed` when set.
    #[serde(default)]
    pub seed: Option<u64>,
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        let mut cfg: RunConfig = serde_json::from_str(&text).map_err(Error::Parse)?;
        if let (Some(case), Some(dir)) = (&cfg.case, path.parent()) {
            if case.is_relative() && dir.join(case).exists() {
                cfg.case = Some(dir.join(case));
            }
        }
        Ok(cfg)
    }

    pub fn effective_params(&self) -> AlgoParams {
        let mut p = self.params.clone();
        if let Some(seed) = self.seed {
            p.seed = seed;
        }
        p
    }

    pub fn validate(&self) -> Result<()> {
        if self.case.is_none() {
            return Err(Error::Validation {
                path: "case".into(),
                message: "no case given".into(),
            });
        }
        self.effective_params().validate()
    }
}

/// Load a case from a file, or failing that from the bundled set.
pub fn resolve_case(path: &Path) -> Result<NetworkCase> {
    if path.exists() {
        return load_case_file(path);
    }
    let bundled = path
        .to_str()
        .filter(|s| !s.contains(['/', '\\']))
        .and_then(bundled_case);
    bundled.ok_or_else(|| Error::Io {
        path: path.display().to_string(),
        source: std::io::Error::new(std::io::ErrorKind::NotFound, "no such case file or bundled case"),
    })
}

#[derive(Debug, Clone)]
pub struct MethodRun {
    pub result: ClearingResult,
    pub seconds: f64,
}

#[derive(Debug, Clone, Default)]
pub struct ClearOutcome {
    pub single: Option<MethodRun>,
    pub uncoordinated: Option<MethodRun>,
    pub coordinated: Option<MethodRun>,
    /// Interfaces and schedule used by the uncoordinated run.
    pub interchange: Option<InterchangeConfig>,
}

impl ClearOutcome {
    pub fn runs(&self) -> impl Iterator<Item = &MethodRun> {
        [&self.single, &self.uncoordinated, &self.coordinated]
            .into_iter()
            .flatten()
    }

    /// `(C_unc − C_coord) / (C_unc − C_single)` when all three ran, every
    /// cost is finite and the denominator is positive.
    pub fn savings_fraction(&self) -> Option<f64> {
        let cost = |r: &Option<MethodRun>| r.as_ref().map(|m| m.result.cost.total).filter(|c| c.is_finite());
        let (s, u, c) = (cost(&self.single)?, cost(&self.uncoordinated)?, cost(&self.coordinated)?);
        (u - s > 0.0).then(|| (u - c) / (u - s))
    }

    pub fn all_feasible(&self) -> bool {
        self.runs().all(|r| r.result.feasible)
    }
}

fn timed(f: impl FnOnce() -> Result<ClearingResult>) -> Result<MethodRun> {
    let start = Instant::now();
    let result = f()?;
    Ok(MethodRun {
        result,
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// Interfaces and the schedule for the uncoordinated regime, deriving
/// whatever the configuration leaves out from `single`.
pub fn interchange_for(
    case: &NetworkCase,
    cfg: &InterchangeConfig,
    single: Option<&ClearingResult>,
) -> Result<InterchangeConfig> {
    let interfaces = match &cfg.interfaces {
        Some(i) => i.clone(),
        None => default_interfaces(case)?,
    };
    let mode = cfg.mode.unwrap_or(InterchangeMode::PeakOffpeak);
    let peak_hours = cfg.peak_hours.clone().unwrap_or_else(|| default_peak_hours(case.horizon));
    let schedule = match (&cfg.schedule, single) {
        (Some(s), _) => s.clone(),
        (None, Some(single)) => {
            if !single.feasible {
                return Err(Error::Infeasible(
                    "cannot derive an interchange schedule from an infeasible single-area run".into(),
                ));
            }
            derive_interchange(case, single, &interfaces, mode, &peak_hours)?
        }
        (None, None) => unreachable!("caller supplies a single-area run when no schedule is configured"),
    };
    schedule.validate(case.horizon)?;
    Ok(InterchangeConfig {
        interfaces: Some(interfaces),
        schedule: Some(schedule),
        mode: Some(mode),
        peak_hours: Some(peak_hours),
    })
}

/// Run the configured methods. `all` runs single, derives the interchange,
/// then runs uncoordinated and coordinated.
pub fn run_clear(case: &NetworkCase, cfg: &RunConfig) -> Result<ClearOutcome> {
    let params = cfg.effective_params();
    params.validate()?;
    let opts = cfg.miqp.options();
    let mut out = ClearOutcome::default();
    let want = |m: MethodSel| cfg.method == m || cfg.method == MethodSel::All;

    let needs_single = want(MethodSel::Single)
        || (want(MethodSel::Uncoordinated) && cfg.interchange.schedule.is_none());
    let single = if needs_single {
        Some(timed(|| run_single_area(case, &opts))?)
    } else {
        None
    };
    if want(MethodSel::Uncoordinated) {
        let ic = interchange_for(case, &cfg.interchange, single.as_ref().map(|r| &r.result))?;
        let (interfaces, schedule) = (ic.interfaces.as_deref().unwrap(), ic.schedule.as_ref().unwrap());
        out.uncoordinated = Some(timed(|| run_uncoordinated(case, interfaces, schedule, &opts))?);
        out.interchange = Some(ic);
    }
    if want(MethodSel::Single) {
        out.single = single;
    }
    if want(MethodSel::Coordinated) {
        out.coordinated = Some(timed(|| run_multi_area_uc(case, &params))?);
    }
    Ok(out)
}

#[derive(Serialize)]
struct CostsFile<'a> {
    method: Method,
    total: f64,
    breakdown: &'a crate::uc::CostBreakdown,
    feasible: bool,
    converged: bool,
    cause: Option<&'a str>,
    best_restart: Option<usize>,
    best_iteration: Option<usize>,
}

#[derive(Serialize)]
struct ComparisonFile {
    single: Option<f64>,
    uncoordinated: Option<f64>,
    coordinated: Option<f64>,
    savings_fraction: Option<f64>,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |e| Error::Io {
        path: path.display().to_string(),
        source: e,
    }
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    let file = fs::File::create(path).map_err(io_err(path))?;
    Ok(csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(file))
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> Error + '_ {
    move |e| Error::Io {
        path: path.display().to_string(),
        source: e.into(),
    }
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("plain data serializes");
    text.push('\n');
    fs::write(path, text).map_err(io_err(path))
}

fn write_rows(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(header).map_err(csv_err(path))?;
    for row in rows {
        w.write_record(&row).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

fn trace_rows(trace: &[TraceRecord]) -> impl Iterator<Item = Vec<String>> + '_ {
    trace.iter().map(|r| {
        vec![
            r.phase.as_str().to_string(),
            r.restart.to_string(),
            r.iter.to_string(),
            r.cost.to_string(),
            r.feasible.to_string(),
            r.r_inf.to_string(),
            r.s_inf.to_string(),
        ]
    })
}

/// The five per-method files under `dir`.
pub fn write_method(case: &NetworkCase, result: &ClearingResult, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    write_json(
        &dir.join("costs.json"),
        &CostsFile {
            method: result.method,
            total: result.cost.total,
            breakdown: &result.cost,
            feasible: result.feasible,
            converged: result.converged,
            cause: result.cause.as_deref(),
            best_restart: result.best_restart,
            best_iteration: result.best_iteration,
        },
    )?;

    let h = case.horizon;
    let gens: Vec<String> = (0..case.generators.len()).map(|g| case.generator_label(g)).collect();
    let s = &result.schedule;
    write_rows(
        &dir.join("commitment.csv"),
        &["g", "t", "u", "v", "vH", "w"],
        (0..gens.len()).flat_map(|g| {
            let gens = &gens;
            (0..h).map(move |t| {
                vec![
                    gens[g].clone(),
                    (t + 1).to_string(),
                    s.u[g][t].to_string(),
                    s.v[g][t].to_string(),
                    s.vh[g][t].to_string(),
                    s.w[g][t].to_string(),
                ]
            })
        }),
    )?;
    write_rows(
        &dir.join("dispatch.csv"),
        &["g", "t", "MW"],
        (0..gens.len()).flat_map(|g| {
            let gens = &gens;
            (0..h).map(move |t| vec![gens[g].clone(), (t + 1).to_string(), result.dispatch[g][t].to_string()])
        }),
    )?;

    // A bus is priced by the balance row of the area that owns it; shared
    // buses also get a `mean` row across the areas that price them.
    let partition = partition_areas(case)?;
    let mut rows = Vec::new();
    for (b, bus) in case.buses.iter().enumerate() {
        let shared = partition.shared_position(b).is_some();
        for t in 0..h {
            let price = result.lmps[b][t].to_string();
            rows.push(vec![bus.id.clone(), bus.area_id.clone(), (t + 1).to_string(), price.clone()]);
            if shared {
                rows.push(vec![bus.id.clone(), "mean".into(), (t + 1).to_string(), price]);
            }
        }
    }
    write_rows(&dir.join("lmps.csv"), &["bus", "area", "t", "lmp"], rows)?;
    write_rows(
        &dir.join("trace.csv"),
        &["phase", "restart", "iter", "cost", "feasible", "r_inf", "s_inf"],
        trace_rows(&result.trace),
    )
}

/// Write every result of `outcome` under `out`. Wall-times go to
/// `timing.json` alone so the other files are reproducible byte for byte.
pub fn write_outcome(case: &NetworkCase, outcome: &ClearOutcome, out: &Path) -> Result<()> {
    fs::create_dir_all(out).map_err(io_err(out))?;
    let mut timing = serde_json::Map::new();
    for run in outcome.runs() {
        let m = run.result.method;
        write_method(case, &run.result, &out.join(m.as_str()))?;
        timing.insert(m.as_str().into(), run.seconds.into());
    }
    if let Some(ic) = &outcome.interchange {
        write_json(&out.join("interchange.json"), ic)?;
    }
    if outcome.single.is_some() && outcome.uncoordinated.is_some() && outcome.coordinated.is_some() {
        let cost = |r: &Option<MethodRun>| r.as_ref().map(|m| m.result.cost.total).filter(|c| c.is_finite());
        write_json(
            &out.join("comparison.json"),
            &ComparisonFile {
                single: cost(&outcome.single),
                uncoordinated: cost(&outcome.uncoordinated),
                coordinated: cost(&outcome.coordinated),
                savings_fraction: outcome.savings_fraction(),
            },
        )?;
    }
    write_json(&out.join("timing.json"), &timing)
}

/// One-paragraph case summary, e.g. `2 buses, 2 areas, 1 tie-line, ...`.
pub fn cmd_validate(path: &Path) -> Result<String> {
    let case = resolve_case(path)?;
    Ok(format!("{}\nvalid", case_stats(&case)?))
}
