use std::collections::BTreeMap;

use venroute::energy::loss_coefficient;
use venroute::network::arc_flows;
use venroute::prelude::*;

use super::{random_instance, Instance};

/// Independent check of every row of the full program.
pub fn assert_feasible(problem: &LossMinProblem<'_>, fleet: &Fleet, sol: &LpSolution) {
    let p = problem.params();
    let tol = 1e-9;
    let mut arc_use: BTreeMap<ArcId, f64> = BTreeMap::new();
    for (k, path) in problem.paths().iter().enumerate() {
        let (x, g) = (sol.energies[k], sol.rates[k]);
        assert!(x >= 0.0 && g >= 0.0);
        let d = p.delivery_factor(path.delay(), path.cycles());
        assert!(x <= d * g * (1.0 + tol) + tol, "cap row {k}");
        for f in path.segment_flows(fleet) {
            assert!(g <= p.packet_kwh * f * (1.0 + tol), "flow row {k}");
        }
        for a in path.arcs(fleet) {
            *arc_use.entry(a).or_default() += g / p.packet_kwh;
        }
    }
    let h = arc_flows(fleet);
    for (a, used) in arc_use {
        assert!(used <= h[&a] * (1.0 + tol) + tol, "arc row {a}");
    }
    assert!(
        sol.delivered >= problem.target_kwh() * (1.0 - tol),
        "target row"
    );
}

/// Brute-force optimum for up to three paths. The target can always be met
/// with equality, so `x_1` is searched on a zooming grid; for each grid value
/// the remaining coordinates lie on a segment whose best end is exact. The
/// resulting value function is convex in `x_1`, so zooming cannot lose the
/// minimum.
pub fn grid_oracle(problem: &LossMinProblem<'_>, fleet: &Fleet) -> Option<f64> {
    let p = problem.params();
    let z = p.efficiency();
    let paths = problem.paths();
    let n = paths.len();
    let target = problem.target_kwh();
    if target == 0.0 {
        return Some(0.0);
    }
    if n == 0 {
        return None;
    }
    let d: Vec<f64> = paths
        .iter()
        .map(|q| p.delivery_factor(q.delay(), q.cycles()))
        .collect();
    let c: Vec<f64> = paths
        .iter()
        .map(|q| loss_coefficient(q.cycles(), z).unwrap())
        .collect();
    // rows sum(alpha x) <= beta over energies
    let mut rows: Vec<(Vec<f64>, f64)> = Vec::new();
    for k in 0..n {
        let ub = p.packet_kwh
            * paths[k]
                .segment_flows(fleet)
                .into_iter()
                .fold(f64::INFINITY, f64::min);
        let mut up = vec![0.0; n];
        up[k] = 1.0;
        rows.push((up.clone(), d[k] * ub));
        up[k] = -1.0;
        rows.push((up, 0.0));
    }
    let h = arc_flows(fleet);
    let mut users: BTreeMap<ArcId, Vec<f64>> = BTreeMap::new();
    for k in 0..n {
        if d[k] > 0.0 {
            for a in paths[k].arcs(fleet) {
                users.entry(a).or_insert_with(|| vec![0.0; n])[k] += 1.0 / (d[k] * p.packet_kwh);
            }
        }
    }
    for (a, alpha) in users {
        rows.push((alpha, h[&a]));
    }
    let slack = |beta: f64| 1e-9 * beta.abs().max(1.0);

    // best loss with x_1 fixed, or infinity
    let phi = |x1: f64| -> f64 {
        let rest = target - x1;
        match n {
            1 => {
                let ok = rows.iter().all(|(a, b)| a[0] * target <= b + slack(*b));
                if ok {
                    c[0] * target
                } else {
                    f64::INFINITY
                }
            }
            2 => {
                let x = [x1, rest];
                let ok = rows
                    .iter()
                    .all(|(a, b)| a[0] * x[0] + a[1] * x[1] <= b + slack(*b));
                if ok {
                    c[0] * x[0] + c[1] * x[1]
                } else {
                    f64::INFINITY
                }
            }
            _ => {
                // x_2 = t, x_3 = rest - t
                let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
                for (a, b) in &rows {
                    let coef = a[1] - a[2];
                    let rhs = b + slack(*b) - a[0] * x1 - a[2] * rest;
                    if coef.abs() < 1e-15 {
                        if rhs < 0.0 {
                            return f64::INFINITY;
                        }
                    } else if coef > 0.0 {
                        hi = hi.min(rhs / coef);
                    } else {
                        lo = lo.max(rhs / coef);
                    }
                }
                if lo > hi {
                    return f64::INFINITY;
                }
                let at = |t: f64| c[0] * x1 + c[1] * t + c[2] * (rest - t);
                at(lo).min(at(hi))
            }
        }
    };
    if n == 1 {
        let v = phi(target);
        return v.is_finite().then_some(v);
    }
    let steps = 400;
    let (mut lo, mut hi) = (0.0, target);
    let mut best = f64::INFINITY;
    for _ in 0..40 {
        let step = (hi - lo) / steps as f64;
        let mut arg = None;
        for i in 0..=steps {
            let x1 = lo + step * i as f64;
            let v = phi(x1);
            if v < best {
                best = v;
                arg = Some(x1);
            }
        }
        match arg {
            Some(x1) => {
                lo = (x1 - 2.0 * step).max(0.0);
                hi = (x1 + 2.0 * step).min(target);
            }
            None if best.is_finite() => {
                // no better point at this resolution; tighten around the range
                let mid = 0.5 * (lo + hi);
                lo = (mid - step * steps as f64 / 4.0).max(0.0);
                hi = (mid + step * steps as f64 / 4.0).min(target);
            }
            None => return None,
        }
    }
    best.is_finite().then_some(best)
}

/// Most energy the paths can deliver together, by the same oracle.
pub fn max_delivery(problem: &LossMinProblem<'_>, fleet: &Fleet) -> f64 {
    let (mut lo, mut hi) = (0.0, 1e7);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        let probe = LossMinProblem::new(problem.paths(), fleet, *problem.params(), mid).unwrap();
        if grid_oracle(&probe, fleet).is_some() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

pub fn small_problem_paths(seed: u64) -> Option<(Instance, Vec<EnergyPath>)> {
    let inst = random_instance(seed, 6);
    let set = full_path_set(&inst.net, &inst.fleet, inst.source, inst.target, 1000).ok()?;
    if set.is_empty() {
        return None;
    }
    // spread the pick over the set so shared arcs show up
    let step = (set.len() / 3).max(1);
    let paths: Vec<EnergyPath> = set.paths.iter().step_by(step).take(3).cloned().collect();
    Some((inst, paths))
}
