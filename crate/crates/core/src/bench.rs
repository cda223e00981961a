//! Experiment harness: runs a matrix of generated instances under several
//! formulations and separation settings, and writes summary, relative
//! improvement and trace CSV files.
//!
//! The summary and relative-improvement files carry no wall-clock values, so
//! two runs of the same matrix that finish within their limits produce equal
//! bytes. Trace files keep `time_s` and are not reproducible byte for byte.

use std::fmt;
use std::fs;
use std::path::Path as FsPath;
use std::str::FromStr;
use std::time::Duration;

use thiserror::Error;

use crate::bnc::{solve, trace_to_csv, CutCounts, SolveError, SolveReport, SolveStatus, SolverConfig, TraceRow};
use crate::generate::{gen_cluster, gen_grid, ClusterParams, GenerateError, GridParams};
use crate::instance::Instance;
use crate::mcf::solve_mcf;
use crate::separation::SeparationConfig;

/// `(D_A - D_B) / (P_best - D_B)`: how much of B's remaining gap A closes.
/// `None` when `P_best <= D_B`, where B has already proven optimality (or the
/// inputs are inconsistent) and the ratio is undefined.
pub fn relative_improvement(d_a: f64, d_b: f64, p_best: f64) -> Option<f64> {
    (p_best > d_b).then(|| (d_a - d_b) / (p_best - d_b))
}

/// Dual bound of a trace at time `t`: the last row at or before `t`.
fn dual_at(trace: &[TraceRow], t: f64) -> Option<f64> {
    trace.iter().take_while(|r| r.time_s <= t).last().map(|r| r.dual)
}

/// Relative improvement of run A over run B at every time either trace
/// changes, starting once both have a row.
pub fn relative_improvement_series(a: &[TraceRow], b: &[TraceRow], p_best: f64) -> Vec<(f64, Option<f64>)> {
    let mut times: Vec<f64> = a.iter().chain(b).map(|r| r.time_s).collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    times
        .into_iter()
        .filter_map(|t| Some((t, relative_improvement(dual_at(a, t)?, dual_at(b, t)?, p_best))))
        .collect()
}

/// Median of the values; the mean of the middle pair for even lengths.
pub fn median(values: &[f64]) -> Option<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    match n {
        0 => None,
        _ if n % 2 == 1 => Some(v[n / 2]),
        _ => Some((v[n / 2 - 1] + v[n / 2]) / 2.0),
    }
}

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("bad matrix {0:?}: expected SETTINGS:SEEDS such as ts,none:0..25")]
    Matrix(String),
    #[error("unknown separation setting {0:?}")]
    Setting(String),
    #[error("unknown instance family {0:?}: expected gridN or cluster:PRESET")]
    Family(String),
    #[error("unknown formulation {0:?}: expected scf or mcf")]
    Formulation(String),
    #[error(transparent)]
    Generate(#[from] GenerateError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error("cannot write {path}: {source}")]
    Write { path: String, source: std::io::Error },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum FormulationKind {
    Scf,
    Mcf,
}

impl FormulationKind {
    pub fn name(self) -> &'static str {
        match self {
            FormulationKind::Scf => "scf",
            FormulationKind::Mcf => "mcf",
        }
    }

    /// Solves `inst`, reversing it first when it is a multicast instance. The
    /// incumbent is reported in aggregation orientation.
    pub fn solve(self, inst: &Instance, cfg: &SolverConfig) -> Result<SolveReport, SolveError> {
        let inst = inst.to_aggregation();
        match self {
            FormulationKind::Scf => solve(&inst, cfg),
            FormulationKind::Mcf => Ok(solve_mcf(&inst, cfg)?),
        }
    }
}

impl fmt::Display for FormulationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FormulationKind {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self, BenchError> {
        match s {
            "scf" => Ok(FormulationKind::Scf),
            "mcf" => Ok(FormulationKind::Mcf),
            _ => Err(BenchError::Formulation(s.to_string())),
        }
    }
}

/// Instance generator used by a bench matrix.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Family {
    Grid(usize),
    Cluster(String),
}

impl Family {
    pub fn generate(&self, seed: u64) -> Result<Instance, BenchError> {
        match self {
            Family::Grid(n) => Ok(gen_grid(&GridParams::new(*n, seed))?),
            Family::Cluster(name) => {
                let p = ClusterParams::preset(name, seed).ok_or_else(|| BenchError::Family(self.to_string()))?;
                Ok(gen_cluster(&p)?)
            }
        }
    }

    pub fn instance_id(&self, seed: u64) -> String {
        format!("{}-s{}", self, seed)
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Family::Grid(n) => write!(f, "grid{}", n),
            Family::Cluster(p) => write!(f, "cluster:{}", p),
        }
    }
}

impl FromStr for Family {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self, BenchError> {
        if let Some(n) = s.strip_prefix("grid").and_then(|n| n.parse().ok()) {
            return Ok(Family::Grid(n));
        }
        match s.strip_prefix("cluster:") {
            Some(p) if ClusterParams::preset(p, 0).is_some() => Ok(Family::Cluster(p.to_string())),
            _ => Err(BenchError::Family(s.to_string())),
        }
    }
}

/// Parses `SETTINGS:SEEDS`, e.g. `ts,none:0..25` or `ts:1,5,9`. Seed ranges are
/// half-open.
pub fn parse_matrix(text: &str) -> Result<(Vec<String>, Vec<u64>), BenchError> {
    let bad = || BenchError::Matrix(text.to_string());
    let (settings, seeds) = text.split_once(':').ok_or_else(bad)?;
    let settings: Vec<String> = settings.split(',').map(|s| s.trim().to_string()).collect();
    for s in &settings {
        SeparationConfig::setting(s).ok_or_else(|| BenchError::Setting(s.clone()))?;
    }
    let seeds: Vec<u64> = match seeds.split_once("..") {
        Some((a, b)) => (a.trim().parse().map_err(|_| bad())?..b.trim().parse().map_err(|_| bad())?).collect(),
        None => seeds.split(',').map(|s| s.trim().parse().map_err(|_| bad())).collect::<Result<_, _>>()?,
    };
    if settings.is_empty() || seeds.is_empty() {
        return Err(bad());
    }
    Ok((settings, seeds))
}

#[derive(Clone, Debug)]
pub struct BenchMatrix {
    pub family: Family,
    pub formulations: Vec<FormulationKind>,
    pub settings: Vec<String>,
    pub seeds: Vec<u64>,
    pub time_limit: Option<Duration>,
    pub heuristic_frequency: u64,
}

impl BenchMatrix {
    pub fn new(family: Family, settings: Vec<String>, seeds: Vec<u64>) -> Self {
        BenchMatrix {
            family,
            formulations: vec![FormulationKind::Scf],
            settings,
            seeds,
            time_limit: None,
            heuristic_frequency: SolverConfig::default().heuristic_frequency,
        }
    }
}

#[derive(Clone, Debug)]
pub struct BenchRecord {
    pub instance: String,
    pub formulation: FormulationKind,
    pub setting: String,
    pub seed: u64,
    pub status: SolveStatus,
    pub primal: Option<f64>,
    pub dual: f64,
    pub gap: f64,
    pub root_initial: Option<f64>,
    pub root_bound: Option<f64>,
    pub cuts: CutCounts,
    pub nodes: u64,
    pub trace: Vec<TraceRow>,
    pub elapsed: Duration,
}

impl BenchRecord {
    pub fn from_report(instance: String, formulation: FormulationKind, setting: &str, seed: u64, r: SolveReport) -> Self {
        BenchRecord {
            instance,
            formulation,
            setting: setting.to_string(),
            seed,
            status: r.status,
            primal: r.primal,
            dual: r.dual,
            gap: r.gap,
            root_initial: r.root_initial_bound,
            root_bound: r.root_bound,
            cuts: r.cuts,
            nodes: r.nodes,
            trace: r.trace,
            elapsed: r.elapsed,
        }
    }

    fn key(&self) -> String {
        format!("{}-{}-{}", self.instance, self.formulation, self.setting)
    }
}

/// Runs every (seed, formulation, setting) cell in that order. The solver seed
/// equals the instance seed.
pub fn run_matrix(m: &BenchMatrix) -> Result<Vec<BenchRecord>, BenchError> {
    let mut out = Vec::new();
    for &seed in &m.seeds {
        let inst = m.family.generate(seed)?;
        let id = m.family.instance_id(seed);
        for &form in &m.formulations {
            for setting in &m.settings {
                let cfg = SolverConfig {
                    time_limit: m.time_limit,
                    heuristic_frequency: m.heuristic_frequency,
                    seed,
                    ..SolverConfig::with_setting(setting).ok_or_else(|| BenchError::Setting(setting.clone()))?
                };
                let r = form.solve(&inst, &cfg)?;
                out.push(BenchRecord::from_report(id.clone(), form, setting, seed, r));
            }
        }
    }
    Ok(out)
}

pub const SUMMARY_HEADER: &str =
    "instance,formulation,setting,seed,status,primal,dual,gap,root_initial,root_bound,cuts_steiner,cuts_terminal,nodes";

fn opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

pub fn summary_csv(records: &[BenchRecord]) -> String {
    let mut s = format!("{}\n", SUMMARY_HEADER);
    for r in records {
        s.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            r.instance,
            r.formulation,
            r.setting,
            r.seed,
            r.status,
            opt(r.primal),
            r.dual,
            r.gap,
            opt(r.root_initial),
            opt(r.root_bound),
            r.cuts.site,
            r.cuts.terminal,
            r.nodes
        ));
    }
    s
}

pub const IREL_HEADER: &str = "instance,setting,seed,p_best,dual_scf,dual_mcf,i_rel";

/// Final-bound relative improvement of the single-commodity run over the
/// multi-commodity run for each instance and setting with both. `i_rel` is
/// empty when undefined.
pub fn irel_csv(records: &[BenchRecord]) -> String {
    let mut s = format!("{}\n", IREL_HEADER);
    for a in records.iter().filter(|r| r.formulation == FormulationKind::Scf) {
        let Some(b) = records
            .iter()
            .find(|b| b.formulation == FormulationKind::Mcf && b.instance == a.instance && b.setting == a.setting)
        else {
            continue;
        };
        let p_best = match (a.primal, b.primal) {
            (Some(x), Some(y)) => x.min(y),
            (x, y) => match x.or(y) {
                Some(p) => p,
                None => continue,
            },
        };
        s.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            a.instance,
            a.setting,
            a.seed,
            p_best,
            a.dual,
            b.dual,
            opt(relative_improvement(a.dual, b.dual, p_best))
        ));
    }
    s
}

fn write(path: &FsPath, text: &str) -> Result<(), BenchError> {
    fs::write(path, text).map_err(|source| BenchError::Write {
        path: path.display().to_string(),
        source,
    })
}

/// Writes `summary.csv`, `irel.csv` and one `traces/<instance>-<formulation>-<setting>.csv` per run.
pub fn write_outputs(records: &[BenchRecord], dir: impl AsRef<FsPath>) -> Result<(), BenchError> {
    let dir = dir.as_ref();
    let traces = dir.join("traces");
    fs::create_dir_all(&traces).map_err(|source| BenchError::Write {
        path: traces.display().to_string(),
        source,
    })?;
    write(&dir.join("summary.csv"), &summary_csv(records))?;
    write(&dir.join("irel.csv"), &irel_csv(records))?;
    for r in records {
        write(&traces.join(format!("{}.csv", r.key().replace(':', "_"))), &trace_to_csv(&r.trace))?;
    }
    Ok(())
}
