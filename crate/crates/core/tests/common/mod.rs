#![allow(dead_code)]

pub mod lp_oracle;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use venroute::accessibility::AccessibilityGraph;
use venroute::prelude::*;

pub fn network(n: u32, arcs: &[(u32, u32)], delay: f64) -> VehicularNetwork {
    VehicularNetwork::new(
        (0..n).map(JunctionId),
        arcs.iter().enumerate().map(|(i, &(t, h))| RoadArc {
            id: ArcId(i as u32),
            tail: JunctionId(t),
            head: JunctionId(h),
            delay,
        }),
    )
    .unwrap()
}

/// Routes given as arc index lists with a flow each.
pub fn fleet(net: &VehicularNetwork, routes: &[(&[u32], f64)]) -> Fleet {
    let raw: Vec<RawRoute> = routes
        .iter()
        .enumerate()
        .map(|(i, (arcs, flow))| RawRoute {
            id: RouteId(i as u32),
            arcs: arcs.iter().map(|&a| ArcId(a)).collect(),
            flow: *flow,
        })
        .collect();
    normalize_routes(net, &raw).unwrap()
}

pub struct Instance {
    pub net: VehicularNetwork,
    pub fleet: Fleet,
    pub source: JunctionId,
    pub target: JunctionId,
}

/// Small random network with random-walk routes (loops allowed before
/// normalization).
pub fn random_instance(seed: u64, max_n: u32) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(3..=max_n);
    let p = rng.random_range(0.3..0.9);
    let mut arcs = Vec::new();
    for t in 0..n {
        for h in 0..n {
            if t != h && rng.random_bool(p) {
                arcs.push((t, h));
            }
        }
    }
    let net = network(n, &arcs, 600.0);
    let mut raw = Vec::new();
    if !arcs.is_empty() {
        for id in 0..rng.random_range(2..=14u32) {
            let mut at = arcs[rng.random_range(0..arcs.len())];
            let mut route = vec![ArcId(arcs.iter().position(|&a| a == at).unwrap() as u32)];
            for _ in 1..rng.random_range(1..=6) {
                let next: Vec<usize> = (0..arcs.len()).filter(|&i| arcs[i].0 == at.1).collect();
                if next.is_empty() {
                    break;
                }
                let i = next[rng.random_range(0..next.len())];
                at = arcs[i];
                route.push(ArcId(i as u32));
            }
            raw.push(RawRoute {
                id: RouteId(id),
                arcs: route,
                flow: rng.random_range(0.1..0.3),
            });
        }
    }
    let fleet = normalize_routes(&net, &raw).unwrap();
    let source = JunctionId(rng.random_range(0..n));
    let target = loop {
        let t = JunctionId(rng.random_range(0..n));
        if t != source {
            break t;
        }
    };
    Instance {
        net,
        fleet,
        source,
        target,
    }
}

/// Every simple path from `s` to `t` in `graph`, found by plain recursion.
pub fn oracle_sequences(
    graph: &AccessibilityGraph,
    s: JunctionId,
    t: JunctionId,
) -> Vec<Vec<JunctionId>> {
    fn go(
        g: &AccessibilityGraph,
        t: JunctionId,
        path: &mut Vec<JunctionId>,
        out: &mut Vec<Vec<JunctionId>>,
    ) {
        let last = *path.last().unwrap();
        if last == t {
            out.push(path.clone());
            return;
        }
        for (i, j) in g.arcs() {
            if i == last && !path.contains(&j) {
                path.push(j);
                go(g, t, path, out);
                path.pop();
            }
        }
    }
    let mut out = Vec::new();
    go(graph, t, &mut vec![s], &mut out);
    out.sort();
    out
}

/// Every energy path, as (junction sequence, route ids), by brute force: all
/// index-set combinations of all simple sequences, kept when they form a
/// valid path.
pub fn oracle_paths(
    inst: &Instance,
    graph: &AccessibilityGraph,
) -> Vec<(Vec<JunctionId>, Vec<RouteId>)> {
    let mut out = Vec::new();
    for seq in oracle_sequences(graph, inst.source, inst.target) {
        let sets: Vec<&[SubRoute]> = seq
            .windows(2)
            .map(|w| graph.index_set(w[0], w[1]).unwrap())
            .collect();
        let mut combos: Vec<Vec<SubRoute>> = vec![vec![]];
        for set in sets {
            combos = combos
                .into_iter()
                .flat_map(|c| {
                    set.iter().map(move |&s| {
                        let mut c = c.clone();
                        c.push(s);
                        c
                    })
                })
                .collect();
        }
        for combo in combos {
            let routes: Vec<RouteId> = combo.iter().map(|s| s.route).collect();
            if EnergyPath::new(inst.source, inst.target, combo, &inst.net, &inst.fleet).is_ok() {
                out.push((seq.clone(), routes));
            }
        }
    }
    out.sort();
    out
}

pub fn keys(set: &PathSet, fleet: &Fleet) -> Vec<(Vec<JunctionId>, Vec<RouteId>)> {
    set.paths
        .iter()
        .map(|p| (p.junction_sequence(fleet), p.routes().collect()))
        .collect()
}
