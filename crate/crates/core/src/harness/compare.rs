//! Method comparison over a sweep of energy targets.

use std::fmt;
use std::io;
use std::str::FromStr;
use std::time::{Duration, Instant};

use rayon::prelude::*;

use super::scenario::Scenario;
use crate::accessibility::{prune_unreachable, AccessibilityGraph};
use crate::energy::{plan_totals, TransmissionPlan};
use crate::error::{Error, Result};
use crate::heuristic::heuristic_min_loss;
use crate::lp::{replay_plan, solve_min_loss, LossMinProblem, LpSolution, FEASIBILITY_TOL};
use crate::paths::{enumerate_bounded, full_path_set, BoundedConfig, PathSet};

/// Reported totals must match a recomputation from the plan to this many kWh
/// per kWh of loss.
const RECHECK_TOL: f64 = 1e-6;

/// I: LP over every energy path. II: LP over a random path subset.
/// III: greedy fewest-cycle heuristic.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Method {
    Exact,
    Sampled,
    Greedy,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Exact, Method::Sampled, Method::Greedy];
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Exact => "I",
            Self::Sampled => "II",
            Self::Greedy => "III",
        })
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "I" | "1" => Ok(Self::Exact),
            "II" | "2" => Ok(Self::Sampled),
            "III" | "3" => Ok(Self::Greedy),
            other => Err(Error::InvalidParameter(format!(
                "unknown method {other:?}; expected I, II or III"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum CellStatus {
    Ok,
    Infeasible,
    /// Only some of the sampled subsets were feasible.
    Partial {
        feasible: usize,
        runs: usize,
    },
    /// Full enumeration hit the path cap.
    Refused,
    Error(String),
}

impl fmt::Display for CellStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Ok => f.write_str("ok"),
            Self::Infeasible => f.write_str("infeasible"),
            Self::Partial { feasible, runs } => write!(f, "partial {feasible}/{runs}"),
            Self::Refused => f.write_str("refused"),
            Self::Error(msg) => write!(f, "error: {msg}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResultRow {
    pub target_kwh: f64,
    pub method: Method,
    pub status: CellStatus,
    /// Only set when the status is ok.
    pub loss_kwh: Option<f64>,
    pub delivered_kwh: Option<f64>,
    /// Paths carrying energy; a mean over subsets for the sampled method.
    pub paths_used: Option<f64>,
    /// Paths the method chose from.
    pub candidate_paths: Option<f64>,
    /// Compute time, without file I/O.
    pub wall: Duration,
}

impl ResultRow {
    fn failed(target_kwh: f64, method: Method, status: CellStatus, wall: Duration) -> Self {
        Self {
            target_kwh,
            method,
            status,
            loss_kwh: None,
            delivered_kwh: None,
            paths_used: None,
            candidate_paths: None,
            wall,
        }
    }

    pub fn is_ok(&self) -> bool {
        self.status == CellStatus::Ok
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ResultTable {
    /// Sorted by target, then method.
    pub rows: Vec<ResultRow>,
}

impl ResultTable {
    pub fn get(&self, target_kwh: f64, method: Method) -> Option<&ResultRow> {
        self.rows
            .iter()
            .find(|r| r.target_kwh == target_kwh && r.method == method)
    }

    /// CSV with one row per cell. Times are left out unless `timing` is set,
    /// so that equal inputs give equal bytes.
    pub fn write_csv<W: io::Write>(&self, out: W, timing: bool) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec![
            "target_kwh",
            "method",
            "status",
            "loss_kwh",
            "delivered_kwh",
            "paths_used",
            "candidate_paths",
        ];
        if timing {
            header.push("wall_ms");
        }
        w.write_record(&header)?;
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for r in &self.rows {
            let mut rec = vec![
                r.target_kwh.to_string(),
                r.method.to_string(),
                r.status.to_string(),
                opt(r.loss_kwh),
                opt(r.delivered_kwh),
                opt(r.paths_used),
                opt(r.candidate_paths),
            ];
            if timing {
                rec.push(format!("{:.3}", r.wall.as_secs_f64() * 1e3));
            }
            w.write_record(&rec)?;
        }
        w.flush().map_err(|source| Error::Io {
            path: "<csv>".into(),
            source,
        })
    }
}

#[derive(Clone, Debug)]
pub struct CompareConfig {
    pub targets: Vec<f64>,
    pub methods: Vec<Method>,
    /// Paths per random subset.
    pub subset_limit: usize,
    /// One subset per seed; results are averaged.
    pub subset_seeds: Vec<u64>,
    /// Full enumeration gives up beyond this many paths.
    pub path_cap: usize,
    /// Skip subset branches that cannot arrive within the window.
    pub sample_horizon: bool,
    pub sample_max_hops: Option<usize>,
    pub sample_max_steps: Option<u64>,
    /// Run cells on the rayon pool. Turn off for cleaner timings.
    pub parallel: bool,
}

impl CompareConfig {
    pub fn new(targets: Vec<f64>) -> Self {
        Self {
            targets,
            methods: Method::ALL.to_vec(),
            subset_limit: 100,
            subset_seeds: (0..20).collect(),
            path_cap: crate::paths::DEFAULT_PATH_CAP,
            sample_horizon: false,
            sample_max_hops: None,
            sample_max_steps: None,
            parallel: true,
        }
    }
}

struct Timed<T> {
    value: T,
    wall: Duration,
}

fn timed<T>(f: impl FnOnce() -> T) -> Timed<T> {
    let start = Instant::now();
    let value = f();
    Timed {
        value,
        wall: start.elapsed(),
    }
}

fn map_maybe_par<T: Sync, U: Send>(
    items: &[T],
    parallel: bool,
    f: impl Fn(&T) -> U + Sync + Send,
) -> Vec<U> {
    if parallel {
        items.par_iter().map(f).collect()
    } else {
        items.iter().map(f).collect()
    }
}

/// Runs every requested method at every target. Failures land in the row
/// they belong to; only invalid configuration is an error.
pub fn run_compare(scenario: &Scenario, config: &CompareConfig) -> Result<ResultTable> {
    if let Some(x) = config
        .targets
        .iter()
        .find(|x| !(x.is_finite() && **x >= 0.0))
    {
        return Err(Error::InvalidParameter(format!(
            "energy targets must be finite and >= 0, got {x}"
        )));
    }
    let wants = |m| config.methods.contains(&m);
    if wants(Method::Sampled) && (config.subset_limit == 0 || config.subset_seeds.is_empty()) {
        return Err(Error::InvalidParameter(
            "the sampled method needs a positive subset limit and at least one seed".into(),
        ));
    }
    let net = scenario.network();
    let fleet = scenario.fleet();
    let (s, t) = (scenario.source, scenario.target);

    let exact =
        wants(Method::Exact).then(|| timed(|| full_path_set(net, fleet, s, t, config.path_cap)));
    // Each subset run is charged the shared graph build.
    let subsets: Option<Timed<Result<Vec<Timed<PathSet>>>>> = wants(Method::Sampled).then(|| {
        timed(|| {
            let built = timed(|| -> Result<_> {
                let acc = AccessibilityGraph::build(net, fleet);
                Ok(prune_unreachable(net, &acc, t)?.graph)
            });
            let graph = built.value?;
            map_maybe_par(&config.subset_seeds, config.parallel, |&seed| {
                let bounded = BoundedConfig {
                    limit: config.subset_limit,
                    seed,
                    horizon_s: config.sample_horizon.then_some(scenario.params.window_s),
                    max_hops: config.sample_max_hops,
                    max_steps: config.sample_max_steps,
                };
                let r = timed(|| enumerate_bounded(&graph, s, t, net, fleet, &bounded));
                r.value.map(|value| Timed {
                    value,
                    wall: built.wall + r.wall,
                })
            })
            .into_iter()
            .collect()
        })
    });

    let mut targets = config.targets.clone();
    targets.sort_by(f64::total_cmp);
    targets.dedup();
    let mut methods = config.methods.clone();
    methods.sort();
    methods.dedup();
    let cells: Vec<(f64, Method)> = targets
        .iter()
        .flat_map(|&x| methods.iter().map(move |&m| (x, m)))
        .collect();

    let rows = map_maybe_par(&cells, config.parallel, |&(x, method)| match method {
        Method::Exact => {
            let enumerated = exact.as_ref().expect("prepared");
            match &enumerated.value {
                Ok(set) => {
                    let solved = timed(|| solve(scenario, set, x));
                    lp_row(
                        x,
                        method,
                        solved.value,
                        set.len(),
                        enumerated.wall + solved.wall,
                    )
                }
                Err(Error::EnumerationCap { .. }) => {
                    ResultRow::failed(x, method, CellStatus::Refused, enumerated.wall)
                }
                Err(e) => {
                    ResultRow::failed(x, method, CellStatus::Error(e.to_string()), enumerated.wall)
                }
            }
        }
        Method::Sampled => {
            let sampled = subsets.as_ref().expect("prepared");
            match &sampled.value {
                Ok(sets) => sampled_row(scenario, x, sets),
                Err(e) => {
                    ResultRow::failed(x, method, CellStatus::Error(e.to_string()), sampled.wall)
                }
            }
        }
        Method::Greedy => {
            let run = timed(|| {
                heuristic_min_loss(net, fleet, scenario.params, s, t, x).and_then(|out| {
                    let target = if out.is_success() { x } else { out.delivered };
                    recheck(scenario, &out.plan, out.loss, out.delivered, target)?;
                    Ok(out)
                })
            });
            match run.value {
                Ok(out) if out.is_success() => ResultRow {
                    target_kwh: x,
                    method,
                    status: CellStatus::Ok,
                    loss_kwh: Some(out.loss),
                    delivered_kwh: Some(out.delivered),
                    paths_used: Some(used(&out.plan) as f64),
                    candidate_paths: Some(out.steps.len() as f64),
                    wall: run.wall,
                },
                Ok(out) => ResultRow {
                    delivered_kwh: Some(out.delivered),
                    paths_used: Some(used(&out.plan) as f64),
                    candidate_paths: Some(out.steps.len() as f64),
                    ..ResultRow::failed(x, method, CellStatus::Infeasible, run.wall)
                },
                Err(e) => ResultRow::failed(x, method, CellStatus::Error(e.to_string()), run.wall),
            }
        }
    });
    Ok(ResultTable { rows })
}

fn used(plan: &TransmissionPlan) -> usize {
    plan.entries.iter().filter(|e| e.energy > 0.0).count()
}

fn solve(scenario: &Scenario, set: &PathSet, x: f64) -> Result<LpSolution> {
    let problem = LossMinProblem::new(&set.paths, scenario.fleet(), scenario.params, x)?;
    let sol = solve_min_loss(&problem)?;
    if sol.is_optimal() {
        recheck(scenario, &sol.plan, sol.loss, sol.delivered, x)?;
    }
    Ok(sol)
}

/// Recomputes totals from the plan and replays it against the full program.
fn recheck(
    scenario: &Scenario,
    plan: &TransmissionPlan,
    loss: f64,
    delivered: f64,
    target: f64,
) -> Result<()> {
    let totals = plan_totals(plan, &scenario.params)?;
    let off = |a: f64, b: f64| (a - b).abs() > RECHECK_TOL * a.abs().max(1.0);
    if off(totals.loss, loss) || off(totals.delivered, delivered) {
        return Err(Error::Inconsistent(format!(
            "reported loss {loss} / delivered {delivered} but the plan gives {} / {}",
            totals.loss, totals.delivered
        )));
    }
    let residual = replay_plan(plan, scenario.fleet(), scenario.params, target)?;
    if residual > FEASIBILITY_TOL {
        return Err(Error::Inconsistent(format!(
            "plan violates the rate program by {residual:e}"
        )));
    }
    Ok(())
}

fn lp_row(
    x: f64,
    method: Method,
    solved: Result<LpSolution>,
    candidates: usize,
    wall: Duration,
) -> ResultRow {
    match solved {
        Ok(sol) if sol.is_optimal() => ResultRow {
            target_kwh: x,
            method,
            status: CellStatus::Ok,
            loss_kwh: Some(sol.loss),
            delivered_kwh: Some(sol.delivered),
            paths_used: Some(used(&sol.plan) as f64),
            candidate_paths: Some(candidates as f64),
            wall,
        },
        Ok(_) => ResultRow {
            candidate_paths: Some(candidates as f64),
            ..ResultRow::failed(x, method, CellStatus::Infeasible, wall)
        },
        Err(e) => ResultRow::failed(x, method, CellStatus::Error(e.to_string()), wall),
    }
}

/// Averages the LP over every subset. Loss is only reported when every
/// subset is feasible.
fn sampled_row(scenario: &Scenario, x: f64, sets: &[Timed<PathSet>]) -> ResultRow {
    let method = Method::Sampled;
    let runs = sets.len();
    let mut wall = Duration::ZERO;
    let mut loss = 0.0;
    let mut delivered = 0.0;
    let mut paths_used = 0.0;
    let mut feasible = 0;
    for set in sets {
        let solved = timed(|| solve(scenario, &set.value, x));
        wall += set.wall + solved.wall;
        match solved.value {
            Ok(sol) if sol.is_optimal() => {
                feasible += 1;
                loss += sol.loss;
                delivered += sol.delivered;
                paths_used += used(&sol.plan) as f64;
            }
            Ok(_) => {}
            Err(e) => return ResultRow::failed(x, method, CellStatus::Error(e.to_string()), wall),
        }
    }
    let candidates = sets.iter().map(|s| s.value.len() as f64).sum::<f64>() / runs as f64;
    let wall = wall / runs as u32;
    match feasible {
        0 => ResultRow {
            candidate_paths: Some(candidates),
            ..ResultRow::failed(x, method, CellStatus::Infeasible, wall)
        },
        f if f == runs => {
            let n = runs as f64;
            ResultRow {
                target_kwh: x,
                method,
                status: CellStatus::Ok,
                loss_kwh: Some(loss / n),
                delivered_kwh: Some(delivered / n),
                paths_used: Some(paths_used / n),
                candidate_paths: Some(candidates),
                wall,
            }
        }
        f => ResultRow {
            candidate_paths: Some(candidates),
            ..ResultRow::failed(x, method, CellStatus::Partial { feasible: f, runs }, wall)
        },
    }
}
