//! Command-line front end. Results go to stdout as JSON; failures print a JSON
//! error object to stderr and exit with status 2. `validate` exits with 1 when
//! the solution is infeasible.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::{Parser, Subcommand};
use serde_json::{json, Value};

use cvsap::bench::{parse_matrix, run_matrix, write_outputs, BenchMatrix, Family, FormulationKind};
use cvsap::bnc::{trace_to_csv, SolverConfig};
use cvsap::decompose::decompose;
use cvsap::extended::ExtendedGraph;
use cvsap::generate::{gen_cluster, gen_grid, ClusterParams, GridParams};
use cvsap::io::{instance_to_json, read_instance, read_point, read_solution, solution_to_json};
use cvsap::oracle::{brute_force, OracleLimits};
use cvsap::scf::cost_ip;
use cvsap::{check_va, cost_cvsap, Instance, Orientation, VirtualArborescence};

#[derive(Parser)]
#[command(name = "cvsap", version, about = "Constrained virtual Steiner arborescence solvers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate an instance and print it as JSON.
    Generate {
        #[command(subcommand)]
        family: GenerateFamily,
        /// Write to this file instead of stdout.
        #[arg(long, global = true)]
        out: Option<PathBuf>,
    },
    /// Solve an instance exactly with branch-and-cut.
    Solve {
        #[arg(long)]
        instance: PathBuf,
        /// Seconds of wall-clock time.
        #[arg(long)]
        time_limit: Option<f64>,
        #[arg(long)]
        node_limit: Option<u64>,
        #[arg(long, default_value = "scf", value_parser = ["scf", "mcf"])]
        formulation: String,
        #[arg(long, default_value = "ts", value_parser = ["ts", "t", "s", "none"])]
        setting: String,
        /// Run the rounding heuristic every K nodes; 0 disables it.
        #[arg(long, default_value_t = 1)]
        heuristic_freq: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the trace CSV here.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Write the solution JSON here.
        #[arg(long)]
        solution: Option<PathBuf>,
    },
    /// Turn an integral model point into a virtual arborescence.
    Decompose {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        point: PathBuf,
    },
    /// Check a solution against an instance.
    Validate {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        solution: PathBuf,
    },
    /// Brute-force a tiny instance.
    Oracle {
        #[arg(long)]
        instance: PathBuf,
        /// Largest search space to enumerate.
        #[arg(long, default_value_t = 1e7)]
        limit: f64,
    },
    /// Run a matrix of generated instances and write CSV files.
    Bench {
        /// SETTINGS:SEEDS, e.g. ts,none:0..25
        #[arg(long)]
        matrix: String,
        /// gridN or cluster:PRESET
        #[arg(long, default_value = "grid8")]
        family: String,
        /// Comma-separated formulations.
        #[arg(long, default_value = "scf")]
        formulations: String,
        #[arg(long)]
        time_limit: Option<f64>,
        #[arg(long, default_value_t = 1)]
        heuristic_freq: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum GenerateFamily {
    /// n×n grid.
    Grid {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Clustered ISP-like topology.
    Cluster {
        #[arg(long, value_parser = ["igen1600", "igen3200"])]
        preset: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

struct Failure {
    kind: &'static str,
    message: String,
}

fn fail(kind: &'static str, e: impl ToString) -> Failure {
    Failure {
        kind,
        message: e.to_string(),
    }
}

fn load(path: &PathBuf) -> Result<Instance, Failure> {
    let inst = read_instance(path).map_err(|e| fail("io", e))?;
    let rep = inst.validate();
    if !rep.is_ok() {
        let list: Vec<String> = rep.violations.iter().map(|v| v.to_string()).collect();
        return Err(fail("invalid_instance", list.join("; ")));
    }
    Ok(inst)
}

fn seconds(s: Option<f64>) -> Result<Option<Duration>, Failure> {
    s.map(|s| Duration::try_from_secs_f64(s).map_err(|e| fail("usage", format!("bad time limit: {}", e))))
        .transpose()
}

fn solution_value(inst: &Instance, va: &VirtualArborescence) -> Value {
    serde_json::from_str(&solution_to_json(inst, va)).expect("solution JSON parses")
}

/// Maps an aggregation-orientation result back onto `inst`.
fn in_orientation(inst: &Instance, va: VirtualArborescence) -> VirtualArborescence {
    match inst.request.orientation {
        Orientation::Aggregation => va,
        Orientation::Multicast => va.reversed(),
    }
}

fn write_file(path: &PathBuf, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| fail("io", format!("cannot write {}: {}", path.display(), e)))
}

fn finite(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        Value::Null
    }
}

fn run(cmd: Command) -> Result<(Value, ExitCode), Failure> {
    match cmd {
        Command::Generate { family, out } => {
            let inst = match family {
                GenerateFamily::Grid { n, seed } => gen_grid(&GridParams::new(n, seed)),
                GenerateFamily::Cluster { preset, seed } => {
                    gen_cluster(&ClusterParams::preset(&preset, seed).expect("clap restricts presets"))
                }
            }
            .map_err(|e| fail("generate", e))?;
            let text = instance_to_json(&inst);
            match out {
                Some(p) => {
                    write_file(&p, &text)?;
                    Ok((json!({ "written": p.display().to_string() }), ExitCode::SUCCESS))
                }
                None => Ok((serde_json::from_str(&text).expect("instance JSON parses"), ExitCode::SUCCESS)),
            }
        }
        Command::Solve {
            instance,
            time_limit,
            node_limit,
            formulation,
            setting,
            heuristic_freq,
            seed,
            trace,
            solution,
        } => {
            let inst = load(&instance)?;
            let cfg = SolverConfig {
                time_limit: seconds(time_limit)?,
                node_limit,
                heuristic_frequency: heuristic_freq,
                seed,
                ..SolverConfig::with_setting(&setting).expect("clap restricts settings")
            };
            let kind: FormulationKind = formulation.parse().expect("clap restricts formulations");
            let r = kind.solve(&inst, &cfg).map_err(|e| fail("solve", e))?;
            if let Some(p) = &trace {
                write_file(p, &trace_to_csv(&r.trace))?;
            }
            let va = r.incumbent.map(|va| in_orientation(&inst, va));
            if let (Some(p), Some(va)) = (&solution, &va) {
                write_file(p, &solution_to_json(&inst, va))?;
            }
            let result = json!({
                "status": r.status.to_string(),
                "formulation": kind.name(),
                "setting": setting,
                "primal": r.primal,
                "dual": finite(r.dual),
                "gap": finite(r.gap),
                "root_initial_bound": r.root_initial_bound,
                "root_bound": r.root_bound,
                "incumbent_origin": r.origin.map(|o| o.label()),
                "nodes": r.nodes,
                "cuts_steiner": r.cuts.site,
                "cuts_terminal": r.cuts.terminal,
                "lp_iterations": r.lp_iterations,
                "elapsed_s": r.elapsed.as_secs_f64(),
                "solution": va.map(|va| solution_value(&inst, &va)),
            });
            Ok((result, ExitCode::SUCCESS))
        }
        Command::Decompose { instance, point } => {
            let inst = load(&instance)?;
            let agg = inst.to_aggregation();
            let ext = ExtendedGraph::build(&agg).map_err(|e| fail("invalid_instance", e))?;
            let sol = read_point(&ext, &point).map_err(|e| fail("io", e))?;
            let va = decompose(&ext, &sol).map_err(|e| fail("infeasible_point", e))?;
            let cost_ip = cost_ip(&ext, &sol);
            let va = in_orientation(&inst, va);
            Ok((
                json!({ "cost_ip": cost_ip, "solution": solution_value(&inst, &va) }),
                ExitCode::SUCCESS,
            ))
        }
        Command::Validate { instance, solution } => {
            let inst = load(&instance)?;
            let va = read_solution(&inst, &solution).map_err(|e| fail("io", e))?;
            let rep = check_va(&inst, &va);
            let violations: Vec<Value> = rep
                .violations
                .iter()
                .map(|v| json!({ "condition": v.condition.to_string(), "detail": v.detail }))
                .collect();
            let code = if rep.is_feasible() { ExitCode::SUCCESS } else { ExitCode::from(1) };
            let cost = rep.is_feasible().then(|| cost_cvsap(&inst, &va));
            Ok((json!({ "feasible": rep.is_feasible(), "cost": cost, "violations": violations }), code))
        }
        Command::Oracle { instance, limit } => {
            let orig = load(&instance)?;
            let ext = ExtendedGraph::build(&orig.to_aggregation()).map_err(|e| fail("invalid_instance", e))?;
            let r = brute_force(&ext, OracleLimits { max_space: limit }).map_err(|e| fail("oracle_limit", e))?;
            let solution = match &r.best {
                Some(p) => Some(decompose(&ext, p).map_err(|e| fail("internal", e))?),
                None => None,
            };
            Ok((
                json!({
                    "status": format!("{:?}", r.status).to_lowercase(),
                    "cost": r.best_cost,
                    "feasible_points": r.feasible_points,
                    "solution": solution.map(|va| solution_value(&orig, &in_orientation(&orig, va))),
                }),
                ExitCode::SUCCESS,
            ))
        }
        Command::Bench {
            matrix,
            family,
            formulations,
            time_limit,
            heuristic_freq,
            out,
        } => {
            let (settings, seeds) = parse_matrix(&matrix).map_err(|e| fail("usage", e))?;
            let mut m = BenchMatrix::new(family.parse::<Family>().map_err(|e| fail("usage", e))?, settings, seeds);
            m.formulations = formulations
                .split(',')
                .map(|f| f.trim().parse())
                .collect::<Result<_, _>>()
                .map_err(|e| fail("usage", e))?;
            m.time_limit = seconds(time_limit)?;
            m.heuristic_frequency = heuristic_freq;
            let records = run_matrix(&m).map_err(|e| fail("bench", e))?;
            write_outputs(&records, &out).map_err(|e| fail("io", e))?;
            Ok((
                json!({ "runs": records.len(), "out": out.display().to_string() }),
                ExitCode::SUCCESS,
            ))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok((value, code)) => {
            println!("{}", serde_json::to_string_pretty(&value).expect("JSON serializes"));
            code
        }
        Err(f) => {
            eprintln!("{}", json!({ "error": { "kind": f.kind, "message": f.message } }));
            ExitCode::from(2)
        }
    }
}
