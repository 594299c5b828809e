//! Command-line front end: scenario generation, solving, simulation,
//! protocol execution and the experiment sweeps.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::Serialize;

use netqos::execsim::{run_protocol, Fault};
use netqos::network::{control_permutation, generate_network, NetworkParams};
use netqos::optimize::{Algorithm, GaConfig, SolveReport};
use netqos::scenario::{
    experiment_latency_vs_controls, experiment_latency_vs_size, generate_offers, generate_workflow, write_csv,
    ExperimentConfig, OfferGenConfig, WorkflowGenConfig,
};
use netqos::utility::UtilitySpec;
use netqos::{
    Assignment, ControlPlan, Error, LocationId, NetworkModel, OfferCatalog, Problem, QosVector, WorkflowExpr,
};

#[derive(Parser)]
#[command(name = "netqos", version, about = "Network- and QoS-aware service composition")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Random network with uniformly placed locations.
    GenNet {
        #[arg(long)]
        size: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Network parameters (JSON).
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Random workflow over `size` tasks.
    GenWf {
        #[arg(long)]
        size: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Workflow generator settings (JSON).
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Random offers for every task of a workflow.
    GenOffers {
        #[arg(long)]
        network: PathBuf,
        #[arg(long)]
        workflow: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Offer generator settings (JSON).
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Select services and control nodes.
    Solve {
        #[command(flatten)]
        problem: ProblemArgs,
        #[arg(long, value_enum)]
        algo: Algo,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        generations: Option<usize>,
        /// GA settings (JSON).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Allow a control node at every location.
        #[arg(long)]
        unlimited_controls: bool,
        /// Include the wall-clock time (makes output non-reproducible).
        #[arg(long)]
        timing: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compute the QoS of an assignment and per-node timings.
    Simulate {
        #[command(flatten)]
        problem: ProblemArgs,
        #[arg(long)]
        assignment: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the master/slave protocol for an assignment, optionally with faults.
    Execute {
        #[command(flatten)]
        problem: ProblemArgs,
        #[arg(long)]
        assignment: PathBuf,
        /// JSON list of `{node, afterMs, service?}`.
        #[arg(long)]
        faults: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Latency sweeps over control-node counts and workflow sizes.
    Experiment {
        /// Experiment settings (JSON); defaults apply to missing fields.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum, default_value_t = Which::Both)]
        which: Which,
        /// Output directory for `controls.csv` and `size.csv`.
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Algo {
    Brute,
    Dijkstra,
    Ga,
    Netga,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum Which {
    Controls,
    Size,
    Both,
}

#[derive(Args)]
struct ProblemArgs {
    #[arg(long)]
    network: PathBuf,
    #[arg(long)]
    workflow: PathBuf,
    #[arg(long)]
    offers: PathBuf,
    /// Location of the master control node.
    #[arg(long)]
    master: u32,
    /// Slave locations, comma separated.
    #[arg(long, value_delimiter = ',', conflicts_with = "controls")]
    slaves: Vec<u32>,
    /// Deploy this many slaves at seeded random locations.
    #[arg(long)]
    controls: Option<usize>,
    /// Seed for `--controls`.
    #[arg(long, default_value_t = 0)]
    control_seed: u64,
    #[arg(long = "input-mb", default_value_t = 1.0)]
    input_mb: f64,
    /// Utility weights, directions and constraints (JSON); runtime only by default.
    #[arg(long)]
    utility: Option<PathBuf>,
}

fn read_json<T: DeserializeOwned>(path: &Path) -> netqos::Result<T> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn read_config<T: DeserializeOwned + Default>(path: Option<&PathBuf>) -> netqos::Result<T> {
    path.map_or_else(|| Ok(T::default()), |p| read_json(p))
}

fn write_json<T: Serialize>(out: Option<&PathBuf>, value: &T) -> netqos::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    match out {
        Some(p) => fs::write(p, text)?,
        None => io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

impl ProblemArgs {
    fn load(&self) -> netqos::Result<Problem> {
        let net: NetworkModel = read_json(&self.network)?;
        let wf: WorkflowExpr = read_json(&self.workflow)?;
        let offers: OfferCatalog = read_json(&self.offers)?;
        let utility: UtilitySpec = match &self.utility {
            Some(p) => read_json(p)?,
            None => UtilitySpec::runtime_only(),
        };
        let master = LocationId(self.master);
        if !net.contains(master) {
            return Err(Error::Config(format!("master {master} is not a network location")));
        }
        let slaves = match self.controls {
            Some(k) => {
                let perm: Vec<LocationId> =
                    control_permutation(&net, self.control_seed).into_iter().filter(|&l| l != master).collect();
                if k > perm.len() {
                    return Err(Error::Config(format!("cannot deploy {k} slaves on {} other locations", perm.len())));
                }
                perm[..k].to_vec()
            }
            None => self.slaves.iter().map(|&s| LocationId(s)).collect(),
        };
        Problem::new(&wf, Arc::new(net), offers, ControlPlan { master, slaves }, self.input_mb, utility)
    }
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct NodeTiming {
    node: String,
    control: LocationId,
    location: LocationId,
    start_ms: f64,
    end_ms: f64,
    #[serde(rename = "inputMB")]
    input_mb: f64,
    #[serde(rename = "resultMB")]
    result_mb: f64,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct SimulationReport {
    qos: QosVector,
    utility: f64,
    nodes: Vec<NodeTiming>,
}

fn run(cli: Cli) -> netqos::Result<()> {
    match cli.command {
        Command::GenNet { size, seed, config, out } => {
            let params: NetworkParams = read_config(config.as_ref())?;
            write_json(out.as_ref(), &generate_network(size, seed, &params)?)
        }
        Command::GenWf { size, seed, config, out } => {
            let cfg: WorkflowGenConfig = read_config(config.as_ref())?;
            write_json(out.as_ref(), &generate_workflow(size, seed, &cfg)?)
        }
        Command::GenOffers { network, workflow, seed, config, out } => {
            let cfg: OfferGenConfig = read_config(config.as_ref())?;
            let net: NetworkModel = read_json(&network)?;
            let wf: WorkflowExpr = read_json(&workflow)?;
            write_json(out.as_ref(), &generate_offers(&wf, &net, &cfg, seed)?)
        }
        Command::Solve { problem, algo, seed, generations, config, unlimited_controls, timing, out } => {
            let mut p = problem.load()?;
            if unlimited_controls {
                p = p.unlimited_control_variant();
            }
            let mut ga: GaConfig = read_config(config.as_ref())?;
            ga.seed = seed;
            if let Some(g) = generations {
                ga.generations = g;
            }
            let algo = match algo {
                Algo::Brute => Algorithm::BruteForce,
                Algo::Dijkstra => Algorithm::Dijkstra,
                Algo::Ga => Algorithm::Ga,
                Algo::Netga => Algorithm::NetGa,
            };
            let t0 = Instant::now();
            let sol = algo.run(&p, &ga)?;
            let wall_ms = timing.then(|| t0.elapsed().as_secs_f64() * 1e3);
            let name = if unlimited_controls { format!("{}[o]", algo.name()) } else { algo.name().to_owned() };
            write_json(
                out.as_ref(),
                &SolveReport {
                    algorithm: name,
                    assignment: sol.assignment.clone(),
                    qos: sol.evaluation.qos,
                    utility: sol.evaluation.utility,
                    evaluations: sol.evaluations,
                    wall_ms,
                },
            )
        }
        Command::Simulate { problem, assignment, out } => {
            let p = problem.load()?;
            let a: Assignment = read_json(&assignment)?;
            let binding = netqos::problem::resolve_binding(&p.graph, &p.plan, &p.catalog, &a)?;
            let (qos, sim) = p.evaluate_assignment(&a)?;
            let nodes = p
                .graph
                .nodes()
                .iter()
                .enumerate()
                .map(|(i, n)| NodeTiming {
                    node: n.id.to_string(),
                    control: binding.node(i).control,
                    location: binding.node(i).location,
                    start_ms: sim.exec_start[i],
                    end_ms: sim.exec_end[i],
                    input_mb: sim.input_mb[i],
                    result_mb: sim.result_mb[i],
                })
                .collect();
            write_json(out.as_ref(), &SimulationReport { qos, utility: p.score(&qos), nodes })
        }
        Command::Execute { problem, assignment, faults, out } => {
            let p = problem.load()?;
            let a: Assignment = read_json(&assignment)?;
            let faults: Vec<Fault> = match &faults {
                Some(f) => read_json(f)?,
                None => Vec::new(),
            };
            write_json(out.as_ref(), &run_protocol(&p, &a, &faults)?)
        }
        Command::Experiment { config, seed, which, out } => {
            let mut cfg: ExperimentConfig = read_config(config.as_ref())?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            fs::create_dir_all(&out)?;
            if which != Which::Size {
                let rows = experiment_latency_vs_controls(&cfg)?;
                write_csv(fs::File::create(out.join("controls.csv"))?, "k", &rows)?;
            }
            if which != Which::Controls {
                let rows = experiment_latency_vs_size(&cfg)?;
                write_csv(fs::File::create(out.join("size.csv"))?, "size", &rows)?;
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_configuration() {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
