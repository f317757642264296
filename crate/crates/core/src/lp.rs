//! Loss-minimizing rate allocation over a set of energy paths.
//!
//! [`build_lp`] writes the full program with an energy variable `x_j` and a
//! rate variable `g_j` per path. [`solve_min_loss`] solves an equivalent
//! reduced form: lowering `g_j` to `x_j / ((T - d) z^|p|)` never breaks a
//! constraint, so only the rates are decided and energies follow from them.
//! The returned solution is checked against the full program.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use microlp::{ComparisonOp, LinearExpr, OptimizationDirection, Problem};

use crate::energy::{loss_coefficient, EnergyParams, EnergyPath, PlanEntry, TransmissionPlan};
use crate::error::{Error, Result};
use crate::network::{arc_flows, ArcId, Fleet};

/// Largest scaled constraint violation accepted in a returned solution.
pub const FEASIBILITY_TOL: f64 = 1e-9;

/// Relative slack on the optimal loss while breaking ties.
const TIE_BREAK_SLACK: f64 = 1e-10;

/// One loss-minimization instance: paths, fleet flows, parameters and the
/// energy target `X`.
#[derive(Clone, Debug)]
pub struct LossMinProblem<'a> {
    paths: &'a [EnergyPath],
    fleet: &'a Fleet,
    params: EnergyParams,
    target_kwh: f64,
    arc_flow: BTreeMap<ArcId, f64>,
}

impl<'a> LossMinProblem<'a> {
    pub fn new(
        paths: &'a [EnergyPath],
        fleet: &'a Fleet,
        params: EnergyParams,
        target_kwh: f64,
    ) -> Result<Self> {
        params.validate()?;
        if !(target_kwh.is_finite() && target_kwh >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "energy target must be finite and >= 0, got {target_kwh}"
            )));
        }
        for p in paths {
            if let Some(r) = p.routes().find(|r| fleet.get(*r).is_none()) {
                return Err(Error::Inconsistent(format!("path uses unknown route {r}")));
            }
        }
        Ok(Self {
            paths,
            fleet,
            params,
            target_kwh,
            arc_flow: arc_flows(fleet),
        })
    }

    pub fn paths(&self) -> &[EnergyPath] {
        self.paths
    }

    pub fn params(&self) -> &EnergyParams {
        &self.params
    }

    pub fn target_kwh(&self) -> f64 {
        self.target_kwh
    }

    /// `h_a` for every arc some route drives.
    pub fn arc_flow(&self) -> &BTreeMap<ArcId, f64> {
        &self.arc_flow
    }

    /// Paths using each arc, for arcs used by at least one path.
    fn arc_users(&self) -> BTreeMap<ArcId, Vec<usize>> {
        let mut users: BTreeMap<ArcId, Vec<usize>> = BTreeMap::new();
        for (j, p) in self.paths.iter().enumerate() {
            for a in p.arcs(self.fleet) {
                users.entry(a).or_default().push(j);
            }
        }
        users
    }

    fn delivery_factor(&self, path: &EnergyPath) -> f64 {
        self.params.delivery_factor(path.delay(), path.cycles())
    }

    fn rate_bound(&self, path: &EnergyPath) -> f64 {
        self.params.packet_kwh
            * path
                .segment_flows(self.fleet)
                .into_iter()
                .fold(f64::INFINITY, f64::min)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LpVariable {
    pub name: String,
    pub objective: f64,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LpRow {
    pub name: String,
    /// `(variable index, coefficient)`.
    pub terms: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

impl LpRow {
    fn activity(&self, values: &[f64]) -> f64 {
        self.terms.iter().map(|&(v, a)| a * values[v]).sum()
    }

    /// Violation divided by the row's magnitude at `values`.
    fn scaled_violation(&self, values: &[f64]) -> f64 {
        let lhs = self.activity(values);
        let excess = match self.sense {
            Sense::Le => lhs - self.rhs,
            Sense::Ge => self.rhs - lhs,
            Sense::Eq => (lhs - self.rhs).abs(),
        };
        let scale = self
            .terms
            .iter()
            .map(|&(v, a)| (a * values[v]).abs())
            .fold(self.rhs.abs().max(1.0), f64::max);
        excess.max(0.0) / scale
    }
}

/// A linear program in minimization form.
#[derive(Clone, Debug, PartialEq)]
pub struct LpInstance {
    pub variables: Vec<LpVariable>,
    pub rows: Vec<LpRow>,
}

impl LpInstance {
    pub fn objective_value(&self, values: &[f64]) -> f64 {
        self.variables
            .iter()
            .zip(values)
            .map(|(v, x)| v.objective * x)
            .sum()
    }

    /// Largest scaled violation over rows and variable bounds.
    pub fn max_scaled_residual(&self, values: &[f64]) -> f64 {
        let rows = self.rows.iter().map(|r| r.scaled_violation(values));
        let bounds = self.variables.iter().zip(values).map(|(v, &x)| {
            let scale = x.abs().max(1.0);
            ((v.lower - x).max(x - v.upper)).max(0.0) / scale
        });
        rows.chain(bounds).fold(0.0, f64::max)
    }

    /// CPLEX LP text format.
    pub fn to_lp_format(&self) -> String {
        let mut out = String::from("\\ energy path loss minimization\nMinimize\n obj:");
        let mut any = false;
        for v in &self.variables {
            if v.objective != 0.0 {
                push_term(&mut out, v.objective, &v.name, !any);
                any = true;
            }
        }
        if !any {
            // an objective needs at least one term
            if let Some(v) = self.variables.first() {
                push_term(&mut out, 0.0, &v.name, true);
            }
        }
        out.push_str("\nSubject To\n");
        for row in &self.rows {
            let _ = write!(out, " {}:", row.name);
            for (i, &(v, a)) in row.terms.iter().enumerate() {
                push_term(&mut out, a, &self.variables[v].name, i == 0);
            }
            let op = match row.sense {
                Sense::Le => "<=",
                Sense::Ge => ">=",
                Sense::Eq => "=",
            };
            let _ = writeln!(out, " {op} {}", row.rhs);
        }
        let bounded: Vec<&LpVariable> = self
            .variables
            .iter()
            .filter(|v| v.lower != 0.0 || v.upper.is_finite())
            .collect();
        if !bounded.is_empty() {
            out.push_str("Bounds\n");
            for v in bounded {
                if v.upper.is_finite() {
                    let _ = writeln!(out, " {} <= {} <= {}", v.lower, v.name, v.upper);
                } else {
                    let _ = writeln!(out, " {} >= {}", v.name, v.lower);
                }
            }
        }
        out.push_str("End\n");
        out
    }
}

fn push_term(out: &mut String, coef: f64, name: &str, first: bool) {
    if first {
        let _ = write!(out, " {coef} {name}");
    } else if coef < 0.0 {
        let _ = write!(out, " - {} {name}", -coef);
    } else {
        let _ = write!(out, " + {coef} {name}");
    }
}

/// Index of `x_j` in [`LpInstance::variables`]; `g_j` follows it.
pub fn x_index(path: usize) -> usize {
    2 * path
}

pub fn g_index(path: usize) -> usize {
    2 * path + 1
}

/// The full program: per path `x_j <= (T - d) z^|p| g_j` and `g_j <= w f`
/// for each segment, per arc `sum g_j / w <= h_a`, and `sum x_j >= X`.
/// A path that cannot arrive within the window keeps `x_j` fixed at zero.
pub fn build_lp(problem: &LossMinProblem<'_>) -> Result<LpInstance> {
    let z = problem.params.efficiency();
    let w = problem.params.packet_kwh;
    let mut variables = Vec::with_capacity(2 * problem.paths.len());
    let mut rows = Vec::new();
    for (j, p) in problem.paths.iter().enumerate() {
        let factor = problem.delivery_factor(p);
        variables.push(LpVariable {
            name: format!("x{j}"),
            objective: loss_coefficient(p.cycles(), z)?,
            lower: 0.0,
            upper: if factor > 0.0 { f64::INFINITY } else { 0.0 },
        });
        variables.push(LpVariable {
            name: format!("g{j}"),
            objective: 0.0,
            lower: 0.0,
            upper: f64::INFINITY,
        });
        let mut terms = vec![(x_index(j), 1.0)];
        if factor > 0.0 {
            terms.push((g_index(j), -factor));
        }
        rows.push(LpRow {
            name: format!("cap{j}"),
            terms,
            sense: Sense::Le,
            rhs: 0.0,
        });
        for (k, f) in p.segment_flows(problem.fleet).into_iter().enumerate() {
            rows.push(LpRow {
                name: format!("flow{j}_{k}"),
                terms: vec![(g_index(j), 1.0)],
                sense: Sense::Le,
                rhs: w * f,
            });
        }
    }
    for (arc, users) in problem.arc_users() {
        let h = problem.arc_flow.get(&arc).copied().unwrap_or(0.0);
        rows.push(LpRow {
            name: format!("arc{}", arc.0),
            terms: users.iter().map(|&j| (g_index(j), 1.0 / w)).collect(),
            sense: Sense::Le,
            rhs: h,
        });
    }
    rows.push(LpRow {
        name: "target".into(),
        terms: (0..problem.paths.len())
            .map(|j| (x_index(j), 1.0))
            .collect(),
        sense: Sense::Ge,
        rhs: problem.target_kwh,
    });
    Ok(LpInstance { variables, rows })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct LpDiagnostics {
    /// Simplex pivots over both passes.
    pub iterations: u64,
    /// Largest scaled violation of the full program at the returned point.
    pub max_residual: f64,
    /// Whether the tie-breaking pass succeeded and was used.
    pub tie_broken: bool,
    /// Arc rows left after dropping single-path and redundant ones.
    pub arc_rows: usize,
}

#[derive(Clone, Debug)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Paths carrying energy, in path-set order. Empty when infeasible.
    pub plan: TransmissionPlan,
    /// Total loss in kWh.
    pub loss: f64,
    /// Total delivered energy in kWh.
    pub delivered: f64,
    /// `x_j` for every path.
    pub energies: Vec<f64>,
    /// `g_j` for every path.
    pub rates: Vec<f64>,
    pub diagnostics: LpDiagnostics,
}

impl LpSolution {
    fn infeasible(n: usize, diagnostics: LpDiagnostics) -> Self {
        Self {
            status: LpStatus::Infeasible,
            plan: TransmissionPlan::default(),
            loss: 0.0,
            delivered: 0.0,
            energies: vec![0.0; n],
            rates: vec![0.0; n],
            diagnostics,
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}

#[derive(Clone, Debug)]
pub struct LpOptions {
    /// Among optimal allocations prefer more energy on earlier paths. This
    /// runs a second solve; the plain optimum is kept if it fails.
    pub tie_break: bool,
}

impl Default for LpOptions {
    fn default() -> Self {
        Self { tie_break: true }
    }
}

pub fn solve_min_loss(problem: &LossMinProblem<'_>) -> Result<LpSolution> {
    solve_min_loss_with(problem, &LpOptions::default())
}

pub fn solve_min_loss_with(
    problem: &LossMinProblem<'_>,
    options: &LpOptions,
) -> Result<LpSolution> {
    let n = problem.paths.len();
    let full = build_lp(problem)?;
    if problem.target_kwh == 0.0 {
        return finish(problem, &full, vec![0.0; n], LpDiagnostics::default());
    }
    let reduced = Reduced::new(problem)?;
    let mut diagnostics = LpDiagnostics {
        arc_rows: reduced.arc_rows.len(),
        ..LpDiagnostics::default()
    };
    if reduced.live.is_empty() {
        return Ok(LpSolution::infeasible(n, diagnostics));
    }

    let (primary, iters) = match reduced.solve(None) {
        Ok(r) => r,
        Err(microlp::Error::Infeasible) => return Ok(LpSolution::infeasible(n, diagnostics)),
        Err(e) => return Err(Error::Solver(e.to_string())),
    };
    diagnostics.iterations = iters;
    let mut rates = reduced.settle(primary);
    if options.tie_break {
        let best = reduced.loss(&rates);
        let limit = best * (1.0 + TIE_BREAK_SLACK);
        if let Ok((tied, more)) = reduced.solve(Some(limit)) {
            diagnostics.iterations += more;
            let tied = reduced.settle(tied);
            let met = reduced.delivered(&tied) >= problem.target_kwh * (1.0 - 1e-12);
            if met && reduced.loss(&tied) <= limit * (1.0 + 1e-12) {
                rates = tied;
                diagnostics.tie_broken = true;
            }
        }
    }

    let mut all = vec![0.0; n];
    for (k, &j) in reduced.live.iter().enumerate() {
        all[j] = rates[k];
    }
    finish(problem, &full, all, diagnostics)
}

fn finish(
    problem: &LossMinProblem<'_>,
    full: &LpInstance,
    rates: Vec<f64>,
    mut diagnostics: LpDiagnostics,
) -> Result<LpSolution> {
    let n = problem.paths.len();
    let mut rates: Vec<f64> = problem
        .paths
        .iter()
        .zip(rates)
        .map(|(p, g)| g.clamp(0.0, problem.rate_bound(p)))
        .collect();
    // scaling down never breaks an upper bound and removes solver surplus
    let surplus: f64 = problem
        .paths
        .iter()
        .zip(&rates)
        .map(|(p, g)| problem.delivery_factor(p) * g)
        .sum();
    if surplus > problem.target_kwh && problem.target_kwh > 0.0 {
        let shrink = problem.target_kwh / surplus;
        rates.iter_mut().for_each(|g| *g *= shrink);
    }
    let mut values = vec![0.0; 2 * n];
    let mut energies = vec![0.0; n];
    let mut entries = Vec::new();
    for (j, p) in problem.paths.iter().enumerate() {
        let g = rates[j];
        let x = problem.delivery_factor(p) * g;
        values[x_index(j)] = x;
        values[g_index(j)] = g;
        energies[j] = x;
        if x > 0.0 {
            entries.push(PlanEntry {
                path: p.clone(),
                rate: g,
                energy: x,
            });
        }
    }
    diagnostics.max_residual = full.max_scaled_residual(&values);
    if diagnostics.max_residual > FEASIBILITY_TOL {
        return Err(Error::Solver(format!(
            "solution violates constraints by {:.3e} (scaled)",
            diagnostics.max_residual
        )));
    }
    let loss = full.objective_value(&values);
    let rates = (0..n).map(|j| values[g_index(j)]).collect();
    Ok(LpSolution {
        status: LpStatus::Optimal,
        plan: TransmissionPlan { entries },
        loss,
        delivered: energies.iter().sum(),
        energies,
        rates,
        diagnostics,
    })
}

/// The program over rates of paths that can deliver anything.
struct Reduced {
    /// Indices into the path set.
    live: Vec<usize>,
    factor: Vec<f64>,
    cost: Vec<f64>,
    upper: Vec<f64>,
    /// Rows `sum g <= cap` over positions in `live`.
    arc_rows: Vec<(Vec<usize>, f64)>,
    target: f64,
}

impl Reduced {
    fn new(problem: &LossMinProblem<'_>) -> Result<Self> {
        let z = problem.params.efficiency();
        let w = problem.params.packet_kwh;
        let mut live = Vec::new();
        let mut factor = Vec::new();
        let mut cost = Vec::new();
        let mut upper = Vec::new();
        let mut slot = vec![usize::MAX; problem.paths.len()];
        for (j, p) in problem.paths.iter().enumerate() {
            let d = problem.delivery_factor(p);
            let ub = problem.rate_bound(p);
            if d > 0.0 && ub > 0.0 {
                slot[j] = live.len();
                live.push(j);
                factor.push(d);
                cost.push(loss_coefficient(p.cycles(), z)? * d);
                upper.push(ub);
            }
        }
        let mut arc_rows = Vec::new();
        for (arc, users) in problem.arc_users() {
            let cap = w * problem.arc_flow.get(&arc).copied().unwrap_or(0.0);
            let members: Vec<usize> = users
                .into_iter()
                .map(|j| slot[j])
                .filter(|&k| k != usize::MAX)
                .collect();
            match members.as_slice() {
                [] => {}
                [k] => upper[*k] = upper[*k].min(cap),
                _ => {
                    let most: f64 = members.iter().map(|&k| upper[k]).sum();
                    if most > cap {
                        arc_rows.push((members, cap));
                    }
                }
            }
        }
        Ok(Self {
            live,
            factor,
            cost,
            upper,
            arc_rows,
            target: problem.target_kwh,
        })
    }

    fn loss(&self, rates: &[f64]) -> f64 {
        self.cost.iter().zip(rates).map(|(c, g)| c * g).sum()
    }

    fn delivered(&self, rates: &[f64]) -> f64 {
        self.factor.iter().zip(rates).map(|(d, g)| d * g).sum()
    }

    fn fits(&self, rates: &[f64]) -> bool {
        rates.iter().zip(&self.upper).all(|(g, u)| g <= u)
            && self.arc_rows.iter().all(|(members, cap)| {
                members.iter().map(|&k| rates[k]).sum::<f64>() <= cap * (1.0 + 1e-12)
            })
    }

    /// Rescales a solver point onto the target when that keeps every row.
    fn settle(&self, rates: Vec<f64>) -> Vec<f64> {
        let got = self.delivered(&rates);
        if got <= 0.0 || got == self.target {
            return rates;
        }
        let scaled: Vec<f64> = rates.iter().map(|g| g * self.target / got).collect();
        if got > self.target || self.fits(&scaled) {
            scaled
        } else {
            rates
        }
    }

    /// Minimizes loss, or with `loss_cap` maximizes rank-weighted delivery
    /// while holding the loss.
    ///
    /// The solver sees `y = g / unit` where `unit` is the largest useful rate
    /// of the path, so values and row coefficients stay near one.
    fn solve(&self, loss_cap: Option<f64>) -> Result<(Vec<f64>, u64), microlp::Error> {
        let n = self.live.len();
        let direction = match loss_cap {
            None => OptimizationDirection::Minimize,
            Some(_) => OptimizationDirection::Maximize,
        };
        let unit: Vec<f64> = (0..n)
            .map(|k| self.upper[k].min(self.target / self.factor[k]))
            .collect();
        let delivery: Vec<f64> = (0..n).map(|k| self.factor[k] * unit[k]).collect();
        let top = delivery.iter().copied().fold(0.0, f64::max);
        let mut lp = Problem::new(direction);
        let vars: Vec<_> = (0..n)
            .map(|k| {
                let obj = match loss_cap {
                    None => self.cost[k] * unit[k],
                    Some(_) => (n - k) as f64 / n as f64 * delivery[k] / top,
                };
                // a lossless optimum leaves no room for costly paths
                let shut = loss_cap == Some(0.0) && self.cost[k] > 0.0;
                let max = if shut { 0.0 } else { self.upper[k] / unit[k] };
                lp.add_var(obj, (0.0, max))
            })
            .collect();
        for (members, cap) in &self.arc_rows {
            let mut e = LinearExpr::empty();
            for &k in members {
                e.add(vars[k], unit[k] / cap);
            }
            lp.add_constraint(e, ComparisonOp::Le, 1.0);
        }
        let mut target = LinearExpr::empty();
        for k in 0..n {
            target.add(vars[k], delivery[k] / self.target);
        }
        let op = match loss_cap {
            None => ComparisonOp::Ge,
            Some(_) => ComparisonOp::Eq,
        };
        lp.add_constraint(target, op, 1.0);
        if let Some(cap) = loss_cap.filter(|&c| c > 0.0) {
            let mut e = LinearExpr::empty();
            for k in 0..n {
                e.add(vars[k], self.cost[k] * unit[k] / cap);
            }
            lp.add_constraint(e, ComparisonOp::Le, 1.0);
        }
        let outcome = lp.solve()?;
        let iterations = outcome.stats().lp_iterations;
        let solution = outcome
            .into_solution()
            .map_err(|_| microlp::Error::InternalError("solve interrupted".into()))?;
        let rates = vars
            .iter()
            .enumerate()
            .map(|(k, &v)| (solution.var_value(v) * unit[k]).clamp(0.0, self.upper[k]))
            .collect();
        Ok((rates, iterations))
    }
}

/// Largest scaled violation of the full program by `plan`, taking the plan's
/// own paths as the path set.
pub fn replay_plan(
    plan: &TransmissionPlan,
    fleet: &Fleet,
    params: EnergyParams,
    target_kwh: f64,
) -> Result<f64> {
    let paths: Vec<EnergyPath> = plan.entries.iter().map(|e| e.path.clone()).collect();
    let problem = LossMinProblem::new(&paths, fleet, params, target_kwh)?;
    let lp = build_lp(&problem)?;
    let mut values = vec![0.0; 2 * paths.len()];
    for (j, e) in plan.entries.iter().enumerate() {
        values[x_index(j)] = e.energy;
        values[g_index(j)] = e.rate;
    }
    Ok(lp.max_scaled_residual(&values))
}
