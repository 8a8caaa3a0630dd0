//! Command-line driver: single runs and sweeps, CSV out.

use std::fs::{self, File};
use std::io::{self, BufWriter};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use maiora::experiment::{
    parse_sweep, run_scenario, run_sweep, write_aggregate_csv, write_per_gw_csv, write_runs_csv,
    write_sf_histogram_csv, SweepSpec,
};
use maiora::scenario::load_scenario;
use maiora::{Allocator, Scenario, ScenarioConfig, Topology};

#[derive(Clone, Copy, Debug, ValueEnum)]
enum AllocatorArg {
    Adr,
    ProbAdr,
    Admaiora,
}

impl From<AllocatorArg> for Allocator {
    fn from(a: AllocatorArg) -> Self {
        match a {
            AllocatorArg::Adr => Allocator::AdrMgw,
            AllocatorArg::ProbAdr => Allocator::ProbAdr,
            AllocatorArg::Admaiora => Allocator::AdMaiora,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum TopologyArg {
    Balanced,
    Unbalanced,
    Single,
}

impl From<TopologyArg> for Topology {
    fn from(t: TopologyArg) -> Self {
        match t {
            TopologyArg::Balanced => Topology::Balanced,
            TopologyArg::Unbalanced => Topology::Unbalanced,
            TopologyArg::Single => Topology::Single,
        }
    }
}

/// Multi-gateway LoRa SF allocation experiments.
///
/// Without --sweep, runs every requested allocator on the base scenario for
/// each seed. Results go to stdout as CSV, or to files under --out.
#[derive(Debug, Parser)]
#[command(name = "maiora", version)]
struct Cli {
    /// Scenario TOML file; flags override its values
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    nodes: Option<usize>,
    #[arg(long)]
    gateways: Option<usize>,
    /// One or more allocators, comma separated
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = [AllocatorArg::Admaiora])]
    allocator: Vec<AllocatorArg>,
    #[arg(long, value_enum)]
    topology: Option<TopologyArg>,
    /// Index of the overloaded gateway for the unbalanced topology
    #[arg(long)]
    hot_gateway: Option<usize>,
    /// Mean message period, seconds
    #[arg(long)]
    mp: Option<f64>,
    /// Duty-cycle limit as a fraction, e.g. 0.1
    #[arg(long)]
    duty_cycle: Option<f64>,
    /// Payload size, bytes
    #[arg(long)]
    payload: Option<u16>,
    /// Simulated time, seconds
    #[arg(long)]
    sim_time: Option<f64>,
    /// First seed [default: the scenario file's seed, else 1]
    #[arg(long)]
    seed: Option<u64>,
    /// Number of consecutive seeds per point
    #[arg(long, default_value_t = 1)]
    seeds: u64,
    /// Swept axis and values, e.g. mp=10,100,900 or gateways=1,2,4,8
    #[arg(long)]
    sweep: Option<String>,
    /// Output directory for runs.csv, aggregate.csv, per_gw.csv and sf_histogram.csv
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for sweep points
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Write the per-transmission event log of a single run to this file
    #[arg(long)]
    event_log: Option<PathBuf>,
}

enum Failure {
    Usage(String),
    Runtime(String),
}

fn base_config(cli: &Cli) -> Result<ScenarioConfig, Failure> {
    let mut c = match &cli.config {
        Some(path) => load_scenario(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?.config,
        None => ScenarioConfig::new(500, 4),
    };
    if let Some(t) = cli.topology {
        c.topology = t.into();
        if c.topology == Topology::Single && cli.gateways.is_none() {
            c.n_gateways = 1;
        }
    }
    if let Some(n) = cli.nodes {
        c.n_nodes = n;
    }
    if let Some(g) = cli.gateways {
        c.n_gateways = g;
    }
    if let Some(h) = cli.hot_gateway {
        c.hot_gateway = h;
    }
    if let Some(mp) = cli.mp {
        c.traffic.message_period_s = mp;
    }
    if let Some(dc) = cli.duty_cycle {
        c.traffic.duty_cycle = dc;
    }
    if let Some(p) = cli.payload {
        c.radio.payload_bytes = p;
    }
    if let Some(t) = cli.sim_time {
        c.traffic.sim_duration_s = t;
    }
    if let Some(seed) = cli.seed {
        c.seed = seed;
    }
    c.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    Ok(c)
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>, Failure> {
    let path = dir.join(name);
    File::create(&path)
        .map(BufWriter::new)
        .map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))
}

fn run(cli: Cli) -> Result<(), Failure> {
    let base = base_config(&cli)?;
    if cli.seeds == 0 {
        return Err(Failure::Usage("--seeds must be at least 1".into()));
    }
    if cli.jobs == 0 {
        return Err(Failure::Usage("--jobs must be at least 1".into()));
    }
    let axis = cli
        .sweep
        .as_deref()
        .map(parse_sweep)
        .transpose()
        .map_err(|e| Failure::Usage(e.to_string()))?;

    if let Some(path) = &cli.event_log {
        if axis.is_some() || cli.seeds != 1 || cli.allocator.len() != 1 {
            return Err(Failure::Usage("--event-log needs a single run: one allocator, one seed, no sweep".into()));
        }
        let scenario = Scenario::build(base.clone()).map_err(|e| Failure::Runtime(e.to_string()))?;
        let outcome = run_scenario(&scenario, cli.allocator[0].into(), true).map_err(|e| Failure::Runtime(e.to_string()))?;
        let file = File::create(path).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))?;
        if let Some(log) = &outcome.log {
            log.write_csv(BufWriter::new(file)).map_err(|e| Failure::Runtime(e.to_string()))?;
        }
    }

    let spec = SweepSpec {
        base: base.clone(),
        axis,
        allocators: cli.allocator.iter().map(|&a| a.into()).collect(),
        seeds: (base.seed..base.seed + cli.seeds).collect(),
    };
    let result = run_sweep(&spec, cli.jobs).map_err(|e| Failure::Runtime(e.to_string()))?;
    let outcomes = result.outcomes.iter().map(|(_, o)| o);
    let to_runtime = |e: maiora::Error| Failure::Runtime(e.to_string());

    match &cli.out {
        Some(dir) => {
            fs::create_dir_all(dir).map_err(|e| Failure::Runtime(format!("{}: {e}", dir.display())))?;
            write_runs_csv(create(dir, "runs.csv")?, outcomes.clone()).map_err(to_runtime)?;
            write_aggregate_csv(create(dir, "aggregate.csv")?, &result.aggregates).map_err(to_runtime)?;
            write_per_gw_csv(create(dir, "per_gw.csv")?, outcomes.clone()).map_err(to_runtime)?;
            write_sf_histogram_csv(create(dir, "sf_histogram.csv")?, outcomes).map_err(to_runtime)?;
            base.save(dir.join("scenario.toml")).map_err(to_runtime)?;
            if spec.axis.is_none() {
                let scenario = Scenario::build(base).map_err(to_runtime)?;
                scenario.write_positions_csv(create(dir, "positions.csv")?).map_err(to_runtime)?;
            }
        }
        None => write_runs_csv(io::stdout().lock(), outcomes).map_err(to_runtime)?,
    }

    for f in &result.failures {
        let value = f.point.value.map(|v| format!("{v}")).unwrap_or_else(|| "-".into());
        eprintln!("point {value} {} seed {}: {}", f.point.allocator, f.point.seed, f.error);
    }
    if result.failures.is_empty() {
        Ok(())
    } else {
        Err(Failure::Runtime(format!("{} sweep point(s) failed", result.failures.len())))
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
