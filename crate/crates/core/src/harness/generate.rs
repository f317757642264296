//! Seeded scenario generators.

use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap};

use ordered_float::OrderedFloat;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::scenario::{ArcSpec, ArcTiming, Scenario};
use crate::energy::EnergyParams;
use crate::error::{Error, Result};
use crate::network::{ArcId, JunctionId, RawRoute, RouteId};

/// Route flows in EVs per second.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FlowSpec {
    Constant(f64),
    Uniform { lo: f64, hi: f64 },
}

impl FlowSpec {
    fn validate(self) -> Result<()> {
        let ok = match self {
            Self::Constant(c) => c.is_finite() && c >= 0.0,
            Self::Uniform { lo, hi } => lo.is_finite() && hi.is_finite() && 0.0 <= lo && lo <= hi,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("bad flow spec {self:?}")))
        }
    }

    fn sample(self, rng: &mut impl Rng) -> f64 {
        match self {
            Self::Constant(c) => c,
            Self::Uniform { lo, hi } if lo == hi => lo,
            Self::Uniform { lo, hi } => rng.random_range(lo..=hi),
        }
    }
}

/// 1 kWh packets, 90% charge and 100% discharge efficiency, five hours.
pub fn default_params() -> EnergyParams {
    EnergyParams::new(1.0, 0.9, 1.0, 5.0 * 3600.0).expect("valid constants")
}

#[derive(Clone, Debug)]
pub struct GridSpec {
    pub rows: u32,
    pub cols: u32,
    pub arc_length_km: f64,
    pub speed_kmh: f64,
    pub route_count: usize,
    pub flow: FlowSpec,
    pub seed: u64,
    pub params: EnergyParams,
    /// Defaults to the first junction.
    pub source: Option<JunctionId>,
    /// Defaults to the last junction.
    pub target: Option<JunctionId>,
    pub target_kwh: Option<f64>,
}

impl GridSpec {
    /// 4x4 grid, 10 km roads at 60 km/h, 20 routes of 0.1 EV/s.
    pub fn new(seed: u64) -> Self {
        Self {
            rows: 4,
            cols: 4,
            arc_length_km: 10.0,
            speed_kmh: 60.0,
            route_count: 20,
            flow: FlowSpec::Constant(0.1),
            seed,
            params: default_params(),
            source: None,
            target: None,
            target_kwh: None,
        }
    }
}

fn check_road(length_km: f64, speed_kmh: f64) -> Result<()> {
    if length_km.is_finite() && length_km > 0.0 && speed_kmh.is_finite() && speed_kmh > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "arc length {length_km} km and speed {speed_kmh} km/h must be positive"
        )))
    }
}

/// Bidirectional 4-neighbor grid. Junction `r * cols + c` sits at row `r`,
/// column `c`. Each route is a random shortest lattice walk between two
/// random distinct junctions.
pub fn generate_grid(spec: &GridSpec) -> Result<Scenario> {
    if spec.rows < 2 || spec.cols < 2 {
        return Err(Error::InvalidParameter(format!(
            "grid needs at least 2x2 junctions, got {}x{}",
            spec.rows, spec.cols
        )));
    }
    check_road(spec.arc_length_km, spec.speed_kmh)?;
    spec.flow.validate()?;
    let (rows, cols) = (spec.rows, spec.cols);
    let n = rows * cols;
    let timing = ArcTiming::Geometry {
        length_km: spec.arc_length_km,
        speed_kmh: spec.speed_kmh,
    };
    let mut arcs = Vec::new();
    let mut arc_id = std::collections::HashMap::new();
    for r in 0..rows {
        for c in 0..cols {
            let here = r * cols + c;
            let mut near = Vec::with_capacity(4);
            if r > 0 {
                near.push(here - cols);
            }
            if c > 0 {
                near.push(here - 1);
            }
            if c + 1 < cols {
                near.push(here + 1);
            }
            if r + 1 < rows {
                near.push(here + cols);
            }
            for there in near {
                let id = ArcId(arcs.len() as u32);
                arc_id.insert((here, there), id);
                arcs.push(ArcSpec {
                    id,
                    tail: JunctionId(here),
                    head: JunctionId(there),
                    timing,
                });
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut routes = Vec::with_capacity(spec.route_count);
    for i in 0..spec.route_count {
        let from = rng.random_range(0..n);
        let to = loop {
            let to = rng.random_range(0..n);
            if to != from {
                break to;
            }
        };
        let (r0, c0) = (from / cols, from % cols);
        let (r1, c1) = (to / cols, to % cols);
        let mut moves: Vec<i64> = Vec::new();
        let v = if r1 > r0 { cols as i64 } else { -(cols as i64) };
        let h = if c1 > c0 { 1 } else { -1 };
        moves.extend(std::iter::repeat_n(v, r0.abs_diff(r1) as usize));
        moves.extend(std::iter::repeat_n(h, c0.abs_diff(c1) as usize));
        moves.shuffle(&mut rng);
        let mut at = from as i64;
        let route_arcs = moves
            .into_iter()
            .map(|m| {
                let next = at + m;
                let id = arc_id[&(at as u32, next as u32)];
                at = next;
                id
            })
            .collect();
        routes.push(RawRoute {
            id: RouteId(i as u32),
            arcs: route_arcs,
            flow: spec.flow.sample(&mut rng),
        });
    }

    Scenario::new(
        format!("grid-{rows}x{cols}"),
        Some(spec.seed),
        spec.params,
        spec.source.unwrap_or(JunctionId(0)),
        spec.target.unwrap_or(JunctionId(n - 1)),
        spec.target_kwh,
        (0..n).map(JunctionId).collect(),
        arcs,
        routes,
    )
}

#[derive(Clone, Debug)]
pub struct RandomSpec {
    pub junctions: u32,
    /// Probability of each ordered junction pair being a road.
    pub road_density: f64,
    /// Longest route in arcs.
    pub route_length_cap: usize,
    pub route_count: usize,
    pub flow: FlowSpec,
    /// Adds a one-arc route on every road after the random ones.
    pub cover_all_arcs: bool,
    pub seed: u64,
    pub params: EnergyParams,
}

impl RandomSpec {
    pub fn new(junctions: u32, road_density: f64, seed: u64) -> Self {
        Self {
            junctions,
            road_density,
            route_length_cap: junctions.saturating_sub(1).max(1) as usize,
            route_count: junctions as usize,
            flow: FlowSpec::Uniform { lo: 0.1, hi: 0.3 },
            cover_all_arcs: false,
            seed,
            params: default_params(),
        }
    }
}

/// Random directed road graph with 10 km roads at 60 km/h. Routes are random
/// self-avoiding walks of up to `route_length_cap` arcs; the source and
/// destination are two random distinct junctions.
pub fn generate_random(spec: &RandomSpec) -> Result<Scenario> {
    let n = spec.junctions;
    if n < 2 {
        return Err(Error::InvalidParameter(format!(
            "need at least 2 junctions, got {n}"
        )));
    }
    if !(spec.road_density > 0.0 && spec.road_density <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "road density must be in (0, 1], got {}",
            spec.road_density
        )));
    }
    spec.flow.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let source = rng.random_range(0..n);
    let target = (source + rng.random_range(1..n)) % n;

    let timing = ArcTiming::Geometry {
        length_km: 10.0,
        speed_kmh: 60.0,
    };
    let mut arcs = Vec::new();
    let mut out: Vec<Vec<(u32, ArcId)>> = vec![Vec::new(); n as usize];
    for tail in 0..n {
        for head in 0..n {
            if tail != head && rng.random_bool(spec.road_density) {
                let id = ArcId(arcs.len() as u32);
                out[tail as usize].push((head, id));
                arcs.push(ArcSpec {
                    id,
                    tail: JunctionId(tail),
                    head: JunctionId(head),
                    timing,
                });
            }
        }
    }

    let starts: Vec<u32> = (0..n).filter(|&j| !out[j as usize].is_empty()).collect();
    let mut routes = Vec::new();
    if !starts.is_empty() && spec.route_length_cap > 0 {
        for _ in 0..spec.route_count {
            let length = rng.random_range(1..=spec.route_length_cap);
            let mut at = *starts.choose(&mut rng).expect("non-empty");
            let mut seen = vec![false; n as usize];
            seen[at as usize] = true;
            let mut route_arcs = Vec::with_capacity(length);
            while route_arcs.len() < length {
                let open: Vec<_> = out[at as usize]
                    .iter()
                    .filter(|(h, _)| !seen[*h as usize])
                    .collect();
                let Some(&&(head, id)) = open.choose(&mut rng) else {
                    break;
                };
                seen[head as usize] = true;
                route_arcs.push(id);
                at = head;
            }
            routes.push(RawRoute {
                id: RouteId(routes.len() as u32),
                arcs: route_arcs,
                flow: spec.flow.sample(&mut rng),
            });
        }
    }
    if spec.cover_all_arcs {
        for a in &arcs {
            routes.push(RawRoute {
                id: RouteId(routes.len() as u32),
                arcs: vec![a.id],
                flow: spec.flow.sample(&mut rng),
            });
        }
    }

    Scenario::new(
        format!("random-{n}"),
        Some(spec.seed),
        spec.params,
        JunctionId(source),
        JunctionId(target),
        None,
        (0..n).map(JunctionId).collect(),
        arcs,
        routes,
    )
}

/// A country-sized synthetic road network.
#[derive(Clone, Debug)]
pub struct LargeSpec {
    pub junctions: u32,
    /// Two-way roads; each gives two arcs.
    pub roads: usize,
    pub route_count: usize,
    pub max_route_km: f64,
    /// Side of the square the junctions are scattered over.
    pub side_km: f64,
    pub speed_kmh: (f64, f64),
    pub flow: FlowSpec,
    /// Wanted road distance between source and destination.
    pub endpoint_gap_km: f64,
    pub seed: u64,
    pub params: EnergyParams,
}

impl LargeSpec {
    /// About 1000 junctions, 2500 arcs and 4800 routes of at most 200 km.
    pub fn new(seed: u64) -> Self {
        Self {
            junctions: 1000,
            roads: 1250,
            route_count: 4800,
            max_route_km: 200.0,
            side_km: 400.0,
            speed_kmh: (60.0, 110.0),
            flow: FlowSpec::Uniform { lo: 0.1, hi: 0.3 },
            endpoint_gap_km: 250.0,
            seed,
            params: default_params(),
        }
    }
}

/// Junctions scattered uniformly over a square, joined by a minimum spanning
/// tree plus the shortest remaining nearby roads. Routes are shortest-time
/// trips between random junction pairs no more than `max_route_km` apart by
/// road. Source and destination are busy junctions about `endpoint_gap_km`
/// apart.
pub fn generate_large(spec: &LargeSpec) -> Result<Scenario> {
    let n = spec.junctions as usize;
    if n < 2 {
        return Err(Error::InvalidParameter(format!(
            "need at least 2 junctions, got {n}"
        )));
    }
    if spec.roads + 1 < n || spec.roads > n * (n - 1) / 2 {
        return Err(Error::InvalidParameter(format!(
            "{} roads cannot connect {n} junctions",
            spec.roads
        )));
    }
    let (slow, fast) = spec.speed_kmh;
    check_road(spec.side_km, slow)?;
    check_road(spec.max_route_km, fast)?;
    if slow > fast {
        return Err(Error::InvalidParameter("speed range is reversed".into()));
    }
    spec.flow.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let points: Vec<(f64, f64)> = (0..n)
        .map(|_| {
            (
                rng.random_range(0.0..spec.side_km),
                rng.random_range(0.0..spec.side_km),
            )
        })
        .collect();
    let dist = |a: usize, b: usize| {
        let (dx, dy) = (points[a].0 - points[b].0, points[a].1 - points[b].1);
        (dx * dx + dy * dy).sqrt()
    };

    // Prim's tree, then the shortest extra roads among near neighbors.
    let mut roads: BTreeSet<(usize, usize)> = BTreeSet::new();
    let mut in_tree = vec![false; n];
    let mut best = vec![(f64::INFINITY, 0usize); n];
    best[0] = (0.0, 0);
    for _ in 0..n {
        let u = (0..n)
            .filter(|&v| !in_tree[v])
            .min_by(|&a, &b| best[a].0.total_cmp(&best[b].0))
            .expect("vertices left");
        in_tree[u] = true;
        if u != 0 {
            let p = best[u].1;
            roads.insert((p.min(u), p.max(u)));
        }
        for v in 0..n {
            if !in_tree[v] {
                let d = dist(u, v);
                if d < best[v].0 {
                    best[v] = (d, u);
                }
            }
        }
    }
    let mut extra: Vec<(f64, usize, usize)> = Vec::new();
    for a in 0..n {
        let mut near: Vec<usize> = (0..n).filter(|&b| b != a).collect();
        near.sort_by(|&x, &y| dist(a, x).total_cmp(&dist(a, y)));
        for &b in near.iter().take(6) {
            let key = (a.min(b), a.max(b));
            if !roads.contains(&key) {
                extra.push((dist(a, b), key.0, key.1));
            }
        }
    }
    extra.sort_by(|x, y| x.0.total_cmp(&y.0).then((x.1, x.2).cmp(&(y.1, y.2))));
    extra.dedup_by(|x, y| (x.1, x.2) == (y.1, y.2));
    for (_, a, b) in extra {
        if roads.len() >= spec.roads {
            break;
        }
        roads.insert((a, b));
    }

    let mut arcs = Vec::with_capacity(2 * roads.len());
    let mut out: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    for &(a, b) in &roads {
        let length_km = round3(dist(a, b).max(0.1));
        let speed_kmh = round3(rng.random_range(slow..=fast));
        for (tail, head) in [(a, b), (b, a)] {
            out[tail].push((head, arcs.len()));
            arcs.push(ArcSpec {
                id: ArcId(arcs.len() as u32),
                tail: JunctionId(tail as u32),
                head: JunctionId(head as u32),
                timing: ArcTiming::Geometry {
                    length_km,
                    speed_kmh,
                },
            });
        }
    }
    let km = |a: usize| match arcs[a].timing {
        ArcTiming::Geometry { length_km, .. } => length_km,
        ArcTiming::Delay { .. } => unreachable!("generated arcs have geometry"),
    };
    let secs = |a: usize| arcs[a].timing.delay_s();

    let mut routes = Vec::with_capacity(spec.route_count);
    while routes.len() < spec.route_count {
        let origin = rng.random_range(0..n);
        let tree = fastest_tree(origin, &out, secs);
        let road = road_km(&tree, km);
        let reach: Vec<usize> = (0..n)
            .filter(|&v| v != origin && road[v] <= spec.max_route_km)
            .collect();
        let Some(&dest) = reach.choose(&mut rng) else {
            continue;
        };
        routes.push(RawRoute {
            id: RouteId(routes.len() as u32),
            arcs: trace(&tree, dest)
                .into_iter()
                .map(|a| ArcId(a as u32))
                .collect(),
            flow: spec.flow.sample(&mut rng),
        });
    }

    // Endpoints come from the busiest tenth of junctions by passing routes.
    let mut traffic = vec![0usize; n];
    for r in &routes {
        traffic[arcs[r.arcs[0].index()].tail.index()] += 1;
        for a in &r.arcs {
            traffic[arcs[a.index()].head.index()] += 1;
        }
    }
    let mut busy: Vec<usize> = (0..n).collect();
    busy.sort_by_key(|&v| (Reverse(traffic[v]), v));
    busy.truncate((n / 10).max(2));
    let source = *busy.choose(&mut rng).expect("non-empty");
    let road = road_km(&fastest_tree(source, &out, secs), km);
    let gap = |v: usize| (road[v] - spec.endpoint_gap_km).abs();
    let target = busy
        .iter()
        .copied()
        .filter(|&v| v != source)
        .min_by(|&a, &b| gap(a).total_cmp(&gap(b)).then(a.cmp(&b)))
        .expect("at least two junctions");

    Scenario::new(
        format!("synthetic-{n}"),
        Some(spec.seed),
        spec.params,
        JunctionId(source as u32),
        JunctionId(target as u32),
        None,
        (0..n as u32).map(JunctionId).collect(),
        arcs,
        routes,
    )
}

fn round3(x: f64) -> f64 {
    (x * 1000.0).round() / 1000.0
}

/// Fastest-path tree from `origin`: for every reached junction, the arc it
/// was entered by and the junction before it.
fn fastest_tree(
    origin: usize,
    out: &[Vec<(usize, usize)>],
    secs: impl Fn(usize) -> f64,
) -> Vec<Option<(usize, usize)>> {
    let n = out.len();
    let mut time = vec![f64::INFINITY; n];
    let mut tree = vec![None; n];
    let mut done = vec![false; n];
    let mut heap = BinaryHeap::new();
    time[origin] = 0.0;
    tree[origin] = Some((usize::MAX, origin));
    heap.push(Reverse((OrderedFloat(0.0), origin)));
    while let Some(Reverse((OrderedFloat(t), u))) = heap.pop() {
        if done[u] {
            continue;
        }
        done[u] = true;
        for &(v, a) in &out[u] {
            let next = t + secs(a);
            if next < time[v] {
                time[v] = next;
                tree[v] = Some((a, u));
                heap.push(Reverse((OrderedFloat(next), v)));
            }
        }
    }
    tree
}

/// Road distance along the tree to every junction; infinite where unreached.
fn road_km(tree: &[Option<(usize, usize)>], km: impl Fn(usize) -> f64) -> Vec<f64> {
    let mut dist = vec![None; tree.len()];
    fn fill(
        v: usize,
        tree: &[Option<(usize, usize)>],
        km: &dyn Fn(usize) -> f64,
        dist: &mut [Option<f64>],
    ) -> f64 {
        if let Some(d) = dist[v] {
            return d;
        }
        let d = match tree[v] {
            None => f64::INFINITY,
            Some((usize::MAX, _)) => 0.0,
            Some((a, prev)) => fill(prev, tree, km, dist) + km(a),
        };
        dist[v] = Some(d);
        d
    }
    (0..tree.len())
        .map(|v| fill(v, tree, &km, &mut dist))
        .collect()
}

fn trace(tree: &[Option<(usize, usize)>], mut at: usize) -> Vec<usize> {
    let mut arcs = Vec::new();
    while let Some((a, prev)) = tree[at] {
        if a == usize::MAX {
            break;
        }
        arcs.push(a);
        at = prev;
    }
    arcs.reverse();
    arcs
}
