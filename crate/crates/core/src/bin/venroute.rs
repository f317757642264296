use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use venroute::accessibility::{prune_unreachable, AccessibilityGraph};
use venroute::harness::{
    generate_grid, generate_large, generate_random, load_scenario, run_compare, run_growth,
    save_scenario, write_paths_csv, write_plan_csv, CellStatus, CompareConfig, FlowSpec, GridSpec,
    GrowthConfig, LargeSpec, Method, RandomSpec, Scenario,
};
use venroute::heuristic::heuristic_min_loss;
use venroute::lp::{build_lp, solve_min_loss, LossMinProblem};
use venroute::network::JunctionId;
use venroute::paths::{enumerate_bounded, full_path_set, BoundedConfig, PathSet, DEFAULT_PATH_CAP};
use venroute::{Error, Result};

/// Exit status when the run worked but the target could not be met.
const EXIT_INFEASIBLE: u8 = 2;

#[derive(Parser)]
#[command(
    name = "venroute",
    version,
    about = "Energy routing over electric-vehicle traffic"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a grid scenario.
    GenGrid(GenGrid),
    /// Write a random-graph scenario.
    GenRandom(GenRandom),
    /// Write a large synthetic road-network scenario.
    GenLarge(GenLarge),
    /// List the energy paths of a scenario.
    Enumerate(Enumerate),
    /// Plan one energy target with one method.
    Solve(Solve),
    /// Run methods over a list of targets.
    Compare(Compare),
    /// Count paths of random instances by size and density.
    Growth(Growth),
}

#[derive(Args)]
struct Output {
    /// Output file; standard output when omitted.
    #[arg(long, short)]
    out: Option<PathBuf>,
}

impl Output {
    fn open(&self) -> Result<Box<dyn Write>> {
        Ok(match &self.out {
            Some(path) => Box::new(BufWriter::new(File::create(path).map_err(|source| {
                Error::Io {
                    path: path.clone(),
                    source,
                }
            })?)),
            None => Box::new(BufWriter::new(io::stdout().lock())),
        })
    }

    fn scenario(&self, scenario: &Scenario) -> Result<()> {
        match &self.out {
            Some(path) => save_scenario(scenario, path),
            None => {
                let mut w = self.open()?;
                w.write_all(scenario.to_toml().as_bytes())
                    .and_then(|_| w.flush())
                    .map_err(|source| Error::Io {
                        path: "<stdout>".into(),
                        source,
                    })
            }
        }
    }
}

#[derive(Args)]
struct GenGrid {
    #[arg(long, default_value_t = 4)]
    rows: u32,
    #[arg(long, default_value_t = 4)]
    cols: u32,
    #[arg(long, default_value_t = 10.0)]
    length_km: f64,
    #[arg(long, default_value_t = 60.0)]
    speed_kmh: f64,
    #[arg(long, default_value_t = 20)]
    routes: usize,
    /// Route flow in EV/s: a constant like `0.1` or a range like `0.1:0.3`.
    #[arg(long, default_value = "0.1", value_parser = parse_flow)]
    flow: FlowSpec,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    source: Option<u32>,
    #[arg(long)]
    target: Option<u32>,
    #[arg(long)]
    target_kwh: Option<f64>,
    #[command(flatten)]
    out: Output,
}

#[derive(Args)]
struct GenRandom {
    #[arg(long)]
    junctions: u32,
    /// Probability of a road between each ordered junction pair.
    #[arg(long)]
    density: f64,
    /// Longest route in arcs; defaults to junctions - 1.
    #[arg(long)]
    route_cap: Option<usize>,
    /// Number of routes; defaults to the junction count.
    #[arg(long)]
    routes: Option<usize>,
    #[arg(long, default_value = "0.1:0.3", value_parser = parse_flow)]
    flow: FlowSpec,
    /// Also add a one-arc route on every road.
    #[arg(long)]
    cover_all_arcs: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    out: Output,
}

#[derive(Args)]
struct GenLarge {
    #[arg(long, default_value_t = 1000)]
    junctions: u32,
    /// Two-way roads.
    #[arg(long, default_value_t = 1250)]
    roads: usize,
    #[arg(long, default_value_t = 4800)]
    routes: usize,
    #[arg(long, default_value_t = 200.0)]
    max_route_km: f64,
    /// Road distance wanted between source and destination.
    #[arg(long, default_value_t = 250.0)]
    gap_km: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    out: Output,
}

#[derive(Args)]
struct Sampling {
    /// Stop full enumeration beyond this many paths.
    #[arg(long, default_value_t = DEFAULT_PATH_CAP)]
    cap: usize,
    /// Paths per random subset for method II.
    #[arg(long, default_value_t = 100)]
    subset_limit: usize,
    /// Skip subset branches that cannot arrive within the window.
    #[arg(long)]
    horizon: bool,
    /// Skip subset branches that cannot finish within this many segments.
    #[arg(long)]
    max_hops: Option<usize>,
    /// Stop each subset search after this many steps.
    #[arg(long)]
    max_steps: Option<u64>,
}

#[derive(Args)]
struct Enumerate {
    scenario: PathBuf,
    /// Draw a random subset of this many paths instead of all.
    #[arg(long)]
    limit: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    sampling: Sampling,
    #[command(flatten)]
    out: Output,
}

#[derive(Args)]
struct Solve {
    scenario: PathBuf,
    /// I (all paths), II (random subset) or III (heuristic).
    #[arg(long, value_parser = parse_method)]
    method: Method,
    /// Energy target in kWh; defaults to the scenario's.
    #[arg(long)]
    target_kwh: Option<f64>,
    /// Subset seed for method II.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    sampling: Sampling,
    /// Also write the linear program in CPLEX LP format (methods I and II).
    #[arg(long)]
    export_lp: Option<PathBuf>,
    #[command(flatten)]
    out: Output,
}

#[derive(Args)]
struct Compare {
    scenario: PathBuf,
    /// Comma-separated kWh values or `start:end:step` ranges.
    #[arg(long, value_parser = parse_targets)]
    targets: Targets,
    #[arg(long, value_delimiter = ',', default_value = "I,II,III", value_parser = parse_method)]
    methods: Vec<Method>,
    /// Method II subsets use seeds `seed .. seed + subset_runs`.
    #[arg(long, default_value_t = 20)]
    subset_runs: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    sampling: Sampling,
    /// Add a wall_ms column. Times differ between runs.
    #[arg(long)]
    timing: bool,
    /// Run one cell at a time.
    #[arg(long)]
    sequential: bool,
    #[command(flatten)]
    out: Output,
}

#[derive(Args)]
struct Growth {
    #[arg(long, value_delimiter = ',', default_value = "4,6,8,10")]
    n: Vec<u32>,
    #[arg(long, value_delimiter = ',', default_value = "0.2,0.4,0.6,0.8,1")]
    densities: Vec<f64>,
    #[arg(long, default_value_t = 200)]
    instances: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_PATH_CAP)]
    cap: usize,
    #[command(flatten)]
    out: Output,
}

#[derive(Clone)]
struct Targets(Vec<f64>);

fn parse_flow(s: &str) -> std::result::Result<FlowSpec, String> {
    let num = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("{t:?}: {e}"));
    match s.split_once(':') {
        Some((lo, hi)) => Ok(FlowSpec::Uniform {
            lo: num(lo)?,
            hi: num(hi)?,
        }),
        None => Ok(FlowSpec::Constant(num(s)?)),
    }
}

fn parse_method(s: &str) -> std::result::Result<Method, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_targets(s: &str) -> std::result::Result<Targets, String> {
    let num = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("{t:?}: {e}"));
    let mut out = Vec::new();
    for part in s.split(',').filter(|p| !p.trim().is_empty()) {
        let fields: Vec<&str> = part.split(':').collect();
        match fields.as_slice() {
            [x] => out.push(num(x)?),
            [a, b, step] => {
                let (a, b, step) = (num(a)?, num(b)?, num(step)?);
                if step.is_nan() || step <= 0.0 {
                    return Err(format!("range step must be positive in {part:?}"));
                }
                // Integer steps keep the values free of accumulated error.
                let count = ((b - a) / step + 1e-9).floor();
                if count < 0.0 {
                    return Err(format!("empty range {part:?}"));
                }
                out.extend((0..=count as u64).map(|k| a + k as f64 * step));
            }
            _ => return Err(format!("bad target {part:?}")),
        }
    }
    if out.is_empty() {
        return Err("no targets given".into());
    }
    Ok(Targets(out))
}

fn bounded(s: &Sampling, scenario: &Scenario, limit: usize, seed: u64) -> BoundedConfig {
    BoundedConfig {
        limit,
        seed,
        horizon_s: s.horizon.then_some(scenario.params.window_s),
        max_hops: s.max_hops,
        max_steps: s.max_steps,
    }
}

fn sample(scenario: &Scenario, config: &BoundedConfig) -> Result<PathSet> {
    let (net, fleet) = (scenario.network(), scenario.fleet());
    let acc = AccessibilityGraph::build(net, fleet);
    let graph = prune_unreachable(net, &acc, scenario.target)?.graph;
    enumerate_bounded(&graph, scenario.source, scenario.target, net, fleet, config)
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::GenGrid(a) => {
            let mut spec = GridSpec::new(a.seed);
            spec.rows = a.rows;
            spec.cols = a.cols;
            spec.arc_length_km = a.length_km;
            spec.speed_kmh = a.speed_kmh;
            spec.route_count = a.routes;
            spec.flow = a.flow;
            spec.source = a.source.map(JunctionId);
            spec.target = a.target.map(JunctionId);
            spec.target_kwh = a.target_kwh;
            a.out.scenario(&generate_grid(&spec)?)?;
        }
        Command::GenRandom(a) => {
            let mut spec = RandomSpec::new(a.junctions, a.density, a.seed);
            if let Some(cap) = a.route_cap {
                spec.route_length_cap = cap;
            }
            if let Some(count) = a.routes {
                spec.route_count = count;
            }
            spec.flow = a.flow;
            spec.cover_all_arcs = a.cover_all_arcs;
            a.out.scenario(&generate_random(&spec)?)?;
        }
        Command::GenLarge(a) => {
            let mut spec = LargeSpec::new(a.seed);
            spec.junctions = a.junctions;
            spec.roads = a.roads;
            spec.route_count = a.routes;
            spec.max_route_km = a.max_route_km;
            spec.endpoint_gap_km = a.gap_km;
            a.out.scenario(&generate_large(&spec)?)?;
        }
        Command::Enumerate(a) => {
            let scenario = load_scenario(&a.scenario)?;
            let set = match a.limit {
                Some(limit) => sample(&scenario, &bounded(&a.sampling, &scenario, limit, a.seed))?,
                None => full_path_set(
                    scenario.network(),
                    scenario.fleet(),
                    scenario.source,
                    scenario.target,
                    a.sampling.cap,
                )?,
            };
            write_paths_csv(&set.paths, scenario.fleet(), a.out.open()?)?;
            eprintln!(
                "{} energy paths from {} to {}{}",
                set.len(),
                scenario.source,
                scenario.target,
                if set.complete { "" } else { " (subset)" }
            );
        }
        Command::Solve(a) => {
            let scenario = load_scenario(&a.scenario)?;
            let x = a.target_kwh.or(scenario.target_kwh).ok_or_else(|| {
                Error::InvalidParameter("no energy target: pass --target-kwh".into())
            })?;
            let (net, fleet) = (scenario.network(), scenario.fleet());
            let (plan, feasible, loss, delivered) = match a.method {
                Method::Greedy => {
                    let out = heuristic_min_loss(
                        net,
                        fleet,
                        scenario.params,
                        scenario.source,
                        scenario.target,
                        x,
                    )?;
                    let ok = out.is_success();
                    (out.plan, ok, out.loss, out.delivered)
                }
                Method::Exact | Method::Sampled => {
                    let set = if a.method == Method::Exact {
                        full_path_set(net, fleet, scenario.source, scenario.target, a.sampling.cap)?
                    } else {
                        let config =
                            bounded(&a.sampling, &scenario, a.sampling.subset_limit, a.seed);
                        sample(&scenario, &config)?
                    };
                    let problem = LossMinProblem::new(&set.paths, fleet, scenario.params, x)?;
                    if let Some(path) = &a.export_lp {
                        write_file(path, &build_lp(&problem)?.to_lp_format())?;
                    }
                    let sol = solve_min_loss(&problem)?;
                    let ok = sol.is_optimal();
                    (sol.plan, ok, sol.loss, sol.delivered)
                }
            };
            write_plan_csv(&plan, fleet, &scenario.params, a.out.open()?)?;
            if feasible {
                eprintln!(
                    "method {}: delivered {delivered} kWh, loss {loss} kWh",
                    a.method
                );
            } else {
                eprintln!("method {}: target of {x} kWh is infeasible", a.method);
            }
            return Ok(feasible);
        }
        Command::Compare(a) => {
            let scenario = load_scenario(&a.scenario)?;
            let mut config = CompareConfig::new(a.targets.0);
            config.methods = a.methods;
            config.subset_limit = a.sampling.subset_limit;
            config.subset_seeds = (a.seed..a.seed + a.subset_runs).collect();
            config.path_cap = a.sampling.cap;
            config.sample_horizon = a.sampling.horizon;
            config.sample_max_hops = a.sampling.max_hops;
            config.sample_max_steps = a.sampling.max_steps;
            config.parallel = !a.sequential;
            let table = run_compare(&scenario, &config)?;
            table.write_csv(a.out.open()?, a.timing)?;
            if let Some(r) = table
                .rows
                .iter()
                .find(|r| matches!(r.status, CellStatus::Error(_)))
            {
                return Err(Error::Inconsistent(format!(
                    "method {} at {} kWh failed: {}",
                    r.method, r.target_kwh, r.status
                )));
            }
            return Ok(table.rows.iter().any(|r| r.is_ok()));
        }
        Command::Growth(a) => {
            let mut config = GrowthConfig::new(a.n, a.densities, a.instances, a.seed);
            config.path_cap = a.cap;
            let table = run_growth(&config)?;
            table.write_csv(a.out.open()?)?;
            eprintln!(
                "{} instances, {} over the path cap; mean paths rise with density: {}, with size: {}",
                table.records.len(),
                table.cap_trips(),
                table.rises_with_density,
                table.rises_with_n
            );
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_INFEASIBLE),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
