//! Energy path enumeration over the pruned accessibility graph.
//!
//! [`enumerate_sequences`] and [`expand_to_paths`] are the two-stage
//! construction: first every simple junction sequence from source to
//! destination, then the route combinations realizing each sequence.
//! [`enumerate_paths`] produces the same set in one pruned depth-first pass and
//! is what the solvers use. [`enumerate_bounded`] draws a seeded random subset.

use std::fmt;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::accessibility::{AccessibilityGraph, SubRoute};
use crate::energy::EnergyPath;
use crate::error::{Error, Result};
use crate::network::{Fleet, JunctionId, VehicularNetwork};

/// Default ceiling on the number of paths or sequences held in memory.
pub const DEFAULT_PATH_CAP: usize = 1_000_000;

/// Simple junction sequence `<s, k_2, ..., t>` in the accessibility graph.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct JunctionSequence(pub Vec<JunctionId>);

impl JunctionSequence {
    pub fn junctions(&self) -> &[JunctionId] {
        &self.0
    }

    /// Number of accessibility arcs.
    pub fn hops(&self) -> usize {
        self.0.len().saturating_sub(1)
    }
}

impl fmt::Display for JunctionSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "<")?;
        for (i, j) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{j}")?;
        }
        write!(f, ">")
    }
}

/// Sequences found by [`enumerate_sequences`].
#[derive(Clone, Debug)]
pub struct SequenceSet {
    /// Lexicographically ordered.
    pub sequences: Vec<JunctionSequence>,
    /// Partial sequences created while searching, finished or not.
    pub expansions: u64,
}

/// A set of energy paths between one source and destination.
#[derive(Clone, Debug)]
pub struct PathSet {
    pub source: JunctionId,
    pub target: JunctionId,
    /// Ordered by junction sequence, then route ids.
    pub paths: Vec<EnergyPath>,
    /// Whether `paths` is the whole set rather than a subset.
    pub complete: bool,
}

impl PathSet {
    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    /// Distinct junction sequences among the paths, in order.
    pub fn sequences(&self, fleet: &Fleet) -> Vec<JunctionSequence> {
        let mut out: Vec<JunctionSequence> = self
            .paths
            .iter()
            .map(|p| JunctionSequence(p.junction_sequence(fleet)))
            .collect();
        out.dedup();
        out
    }
}

fn check_endpoints(
    graph: &AccessibilityGraph,
    source: JunctionId,
    target: JunctionId,
) -> Result<()> {
    for j in [source, target] {
        if graph.position(j).is_none() {
            return Err(Error::UnknownJunction(j));
        }
    }
    if source == target {
        return Err(Error::SameEndpoints(source));
    }
    Ok(())
}

/// All simple junction sequences from `source` to `target` in `graph`
/// (normally the pruned graph), grown one hop at a time.
///
/// Fails with [`Error::EnumerationCap`] once more than `cap` sequences are
/// held at once.
pub fn enumerate_sequences(
    graph: &AccessibilityGraph,
    source: JunctionId,
    target: JunctionId,
    cap: usize,
) -> Result<SequenceSet> {
    check_endpoints(graph, source, target)?;
    let mut done = Vec::new();
    let mut frontier = vec![vec![source]];
    let mut expansions = 0u64;
    while !frontier.is_empty() {
        let mut next = Vec::new();
        for seq in &frontier {
            let last = *seq.last().expect("sequences are never empty");
            for &j in graph.successors(last) {
                if seq.contains(&j) {
                    continue;
                }
                expansions += 1;
                let mut grown = seq.clone();
                grown.push(j);
                if j == target {
                    done.push(JunctionSequence(grown));
                } else {
                    next.push(grown);
                }
            }
            if done.len() + next.len() > cap {
                return Err(Error::EnumerationCap { cap });
            }
        }
        frontier = next;
    }
    done.sort_unstable();
    Ok(SequenceSet {
        sequences: done,
        expansions,
    })
}

/// Expands each sequence into the route combinations realizing it.
///
/// A combination is kept when no route appears twice and the concatenated
/// sub-routes never revisit a junction.
pub fn expand_to_paths(
    sequences: &[JunctionSequence],
    accessibility: &AccessibilityGraph,
    network: &VehicularNetwork,
    fleet: &Fleet,
    cap: usize,
) -> Result<PathSet> {
    let Some(first) = sequences.first() else {
        return Err(Error::InvalidParameter(
            "expand_to_paths needs at least one sequence to fix the endpoints".into(),
        ));
    };
    let source = first.0[0];
    let target = *first.0.last().expect("non-empty");
    let mut paths = Vec::new();
    let mut walker = Walker::new(network, fleet, target);
    for seq in sequences {
        let js = &seq.0;
        if js.len() < 2 || js[0] != source || js[js.len() - 1] != target {
            return Err(Error::Inconsistent(format!(
                "sequence {seq} does not run from {source} to {target}"
            )));
        }
        let mut sets = Vec::with_capacity(js.len() - 1);
        for w in js.windows(2) {
            let set = accessibility.index_set(w[0], w[1]).ok_or_else(|| {
                Error::Inconsistent(format!("no index set for ({}, {})", w[0], w[1]))
            })?;
            sets.push(set);
        }
        walker.reset(source);
        let mut found = Vec::new();
        walker.product(&sets, &mut found);
        if paths.len() + found.len() > cap {
            return Err(Error::EnumerationCap { cap });
        }
        paths.extend(
            found
                .into_iter()
                .map(|segs| EnergyPath::from_valid_segments(source, target, segs, network, fleet)),
        );
    }
    Ok(finish(source, target, paths, true, fleet))
}

/// The full energy path set, found by depth-first search over
/// (junction, sub-route) choices with route reuse and junction revisits
/// pruned as soon as they appear. Same result as
/// [`expand_to_paths`] on [`enumerate_sequences`].
///
/// `graph` should be the pruned accessibility graph. Branches from the
/// source run in parallel; the output order is canonical regardless.
pub fn enumerate_paths(
    graph: &AccessibilityGraph,
    source: JunctionId,
    target: JunctionId,
    network: &VehicularNetwork,
    fleet: &Fleet,
    cap: usize,
) -> Result<PathSet> {
    check_endpoints(graph, source, target)?;
    let first_moves: Vec<(JunctionId, SubRoute)> = graph
        .successors(source)
        .iter()
        .flat_map(|&j| {
            graph
                .index_set(source, j)
                .unwrap_or_default()
                .iter()
                .map(move |&s| (j, s))
        })
        .collect();
    let counter = AtomicUsize::new(0);
    let overflow = AtomicBool::new(false);
    let branches: Vec<Vec<Vec<SubRoute>>> = first_moves
        .par_iter()
        .map(|&(_, sub)| {
            let mut walker = Walker::new(network, fleet, target);
            walker.reset(source);
            let mut found = Vec::new();
            if walker.step(sub) {
                if walker.at == target {
                    found.push(walker.segments.clone());
                } else {
                    walker.exhaust(graph, &mut found, &counter, &overflow, cap);
                }
                walker.undo();
            }
            found
        })
        .collect();
    let total: usize = branches.iter().map(Vec::len).sum();
    if overflow.load(Ordering::Relaxed) || total > cap {
        return Err(Error::EnumerationCap { cap });
    }
    let paths = branches
        .into_iter()
        .flatten()
        .map(|segs| EnergyPath::from_valid_segments(source, target, segs, network, fleet))
        .collect();
    Ok(finish(source, target, paths, true, fleet))
}

/// Builds the accessibility graph from `fleet`, prunes it toward `target`
/// and enumerates every energy path.
pub fn full_path_set(
    network: &VehicularNetwork,
    fleet: &Fleet,
    source: JunctionId,
    target: JunctionId,
    cap: usize,
) -> Result<PathSet> {
    let acc = AccessibilityGraph::build(network, fleet);
    let pruned = crate::accessibility::prune_unreachable(network, &acc, target)?;
    enumerate_paths(&pruned.graph, source, target, network, fleet, cap)
}

/// Limits for [`enumerate_bounded`].
#[derive(Clone, Debug)]
pub struct BoundedConfig {
    /// Most paths to return.
    pub limit: usize,
    pub seed: u64,
    /// Skip branches whose delay so far plus the shortest road time to the
    /// destination reaches this many seconds.
    pub horizon_s: Option<f64>,
    /// Skip branches that cannot reach the destination within this many
    /// segments.
    pub max_hops: Option<usize>,
    /// Stop after visiting this many search nodes.
    pub max_steps: Option<u64>,
}

impl BoundedConfig {
    pub fn new(limit: usize, seed: u64) -> Self {
        Self {
            limit,
            seed,
            horizon_s: None,
            max_hops: None,
            max_steps: None,
        }
    }
}

/// A seeded random subset of at most `config.limit` energy paths, drawn by
/// depth-first search with the choices at every junction shuffled.
///
/// The result is flagged complete only when the search ran to exhaustion
/// without pruning and found no more than `limit` paths.
pub fn enumerate_bounded(
    graph: &AccessibilityGraph,
    source: JunctionId,
    target: JunctionId,
    network: &VehicularNetwork,
    fleet: &Fleet,
    config: &BoundedConfig,
) -> Result<PathSet> {
    check_endpoints(graph, source, target)?;
    if config.limit == 0 {
        return Err(Error::InvalidParameter(
            "path limit must be at least 1".into(),
        ));
    }
    let to_target = match config.horizon_s {
        Some(_) => {
            let delays = network.delays_to(target)?;
            Some(delays)
        }
        None => None,
    };
    let mut search = BoundedSearch {
        graph,
        network,
        config,
        to_target,
        hops_to_target: config.max_hops.map(|_| graph.hop_counts(target, true)),
        rng: ChaCha8Rng::seed_from_u64(config.seed),
        walker: Walker::new(network, fleet, target),
        found: Vec::new(),
        steps: 0,
        cut: false,
    };
    search.walker.reset(source);
    search.run(0.0);
    let BoundedSearch { mut found, cut, .. } = search;
    let complete = !cut && found.len() <= config.limit;
    found.truncate(config.limit);
    let paths = found
        .into_iter()
        .map(|segs| EnergyPath::from_valid_segments(source, target, segs, network, fleet))
        .collect();
    Ok(finish(source, target, paths, complete, fleet))
}

fn finish(
    source: JunctionId,
    target: JunctionId,
    paths: Vec<EnergyPath>,
    complete: bool,
    fleet: &Fleet,
) -> PathSet {
    let mut keyed: Vec<_> = paths.into_iter().map(|p| (p.sort_key(fleet), p)).collect();
    keyed.sort_unstable_by(|a, b| a.0.cmp(&b.0));
    debug_assert!(
        keyed.windows(2).all(|w| w[0].0 != w[1].0),
        "duplicate energy path"
    );
    PathSet {
        source,
        target,
        paths: keyed.into_iter().map(|(_, p)| p).collect(),
        complete,
    }
}

/// Incremental path state shared by the searches.
struct Walker<'a> {
    network: &'a VehicularNetwork,
    fleet: &'a Fleet,
    target: JunctionId,
    visited: Vec<bool>,
    used: Vec<bool>,
    segments: Vec<SubRoute>,
    trail: Vec<JunctionId>,
    at: JunctionId,
}

impl<'a> Walker<'a> {
    fn new(network: &'a VehicularNetwork, fleet: &'a Fleet, target: JunctionId) -> Self {
        Self {
            network,
            fleet,
            target,
            visited: vec![false; network.junction_count()],
            used: vec![false; fleet.len()],
            segments: Vec::new(),
            trail: Vec::new(),
            at: target,
        }
    }

    fn pos(&self, j: JunctionId) -> usize {
        self.network
            .junction_index(j)
            .expect("fleet junctions are in the network")
    }

    fn reset(&mut self, source: JunctionId) {
        self.visited.iter_mut().for_each(|v| *v = false);
        self.used.iter_mut().for_each(|v| *v = false);
        self.segments.clear();
        self.trail.clear();
        let p = self.pos(source);
        self.visited[p] = true;
        self.at = source;
    }

    /// Appends `sub` if it keeps routes distinct and junctions unrevisited.
    /// A segment that crosses the destination without ending there is refused.
    fn step(&mut self, sub: SubRoute) -> bool {
        if self.used[sub.route.index()] {
            return false;
        }
        let route = self.fleet.route(sub.route);
        debug_assert_eq!(route.tail_of(sub.start), self.at);
        let inner = &route.junctions[sub.start + 1..=sub.end + 1];
        let (last, body) = inner.split_last().expect("segments have an arc");
        if body
            .iter()
            .any(|&j| j == self.target || self.visited[self.pos(j)])
            || self.visited[self.pos(*last)]
        {
            return false;
        }
        for &j in inner {
            let p = self.pos(j);
            self.visited[p] = true;
        }
        self.used[sub.route.index()] = true;
        self.segments.push(sub);
        self.trail.push(self.at);
        self.at = *last;
        true
    }

    fn undo(&mut self) {
        let sub = self.segments.pop().expect("undo without step");
        let route = self.fleet.route(sub.route);
        for &j in &route.junctions[sub.start + 1..=sub.end + 1] {
            let p = self.pos(j);
            self.visited[p] = false;
        }
        self.used[sub.route.index()] = false;
        self.at = self.trail.pop().expect("trail follows segments");
    }

    /// Cartesian product of fixed index sets with the walker's filters.
    fn product(&mut self, sets: &[&[SubRoute]], out: &mut Vec<Vec<SubRoute>>) {
        let depth = self.segments.len();
        if depth == sets.len() {
            out.push(self.segments.clone());
            return;
        }
        for &sub in sets[depth] {
            if self.step(sub) {
                self.product(sets, out);
                self.undo();
            }
        }
    }

    fn exhaust(
        &mut self,
        graph: &AccessibilityGraph,
        out: &mut Vec<Vec<SubRoute>>,
        counter: &AtomicUsize,
        overflow: &AtomicBool,
        cap: usize,
    ) {
        if overflow.load(Ordering::Relaxed) {
            return;
        }
        let here = self.at;
        for &j in graph.successors(here) {
            if self.visited[self.pos(j)] {
                continue;
            }
            for &sub in graph.index_set(here, j).unwrap_or_default() {
                if !self.step(sub) {
                    continue;
                }
                if j == self.target {
                    out.push(self.segments.clone());
                    if counter.fetch_add(1, Ordering::Relaxed) >= cap {
                        overflow.store(true, Ordering::Relaxed);
                    }
                } else {
                    self.exhaust(graph, out, counter, overflow, cap);
                }
                self.undo();
                if overflow.load(Ordering::Relaxed) {
                    return;
                }
            }
        }
    }
}

struct BoundedSearch<'a> {
    graph: &'a AccessibilityGraph,
    network: &'a VehicularNetwork,
    config: &'a BoundedConfig,
    to_target: Option<Vec<f64>>,
    /// Fewest segments to the destination, by graph position.
    hops_to_target: Option<Vec<Option<usize>>>,
    rng: ChaCha8Rng,
    walker: Walker<'a>,
    found: Vec<Vec<SubRoute>>,
    steps: u64,
    /// Set when some branch was skipped by a limit other than `limit`.
    cut: bool,
}

impl BoundedSearch<'_> {
    fn full(&self) -> bool {
        self.found.len() > self.config.limit
    }

    fn run(&mut self, delay: f64) {
        self.steps += 1;
        if self.config.max_steps.is_some_and(|m| self.steps > m) {
            self.cut = true;
            return;
        }
        let here = self.walker.at;
        let mut moves: Vec<(JunctionId, SubRoute)> = self
            .graph
            .successors(here)
            .iter()
            .filter(|&&j| !self.walker.visited[self.walker.pos(j)])
            .flat_map(|&j| {
                self.graph
                    .index_set(here, j)
                    .unwrap_or_default()
                    .iter()
                    .map(move |&s| (j, s))
            })
            .collect();
        moves.shuffle(&mut self.rng);
        for (j, sub) in moves {
            let seg_delay = self.walker.fleet.route(sub.route).sub_route_delay(
                self.network,
                sub.start,
                sub.end,
            );
            let reached = delay + seg_delay;
            if let (Some(horizon), Some(rest)) = (self.config.horizon_s, &self.to_target) {
                if reached + rest[self.walker.pos(j)] >= horizon {
                    self.cut = true;
                    continue;
                }
            }
            if let (Some(max), Some(hops)) = (self.config.max_hops, &self.hops_to_target) {
                let rest = self.graph.position(j).and_then(|p| hops[p]);
                if rest.is_none_or(|r| self.walker.segments.len() + 1 + r > max) {
                    self.cut = true;
                    continue;
                }
            }
            if !self.walker.step(sub) {
                continue;
            }
            if j == self.walker.target {
                self.found.push(self.walker.segments.clone());
            } else {
                self.run(reached);
            }
            self.walker.undo();
            if self.full() || self.config.max_steps.is_some_and(|m| self.steps > m) {
                return;
            }
        }
    }
}

/// `f(n) = 1 + (n - 1) f(n - 1)`, `f(1) = 1`, `f(0) = 0`; saturates at
/// `u128::MAX`. `f(|N| - 1)` bounds the number of junction sequences.
pub fn f_bound(n: u64) -> u128 {
    if n == 0 {
        return 0;
    }
    let mut f: u128 = 1;
    for k in 2..=n as u128 {
        f = (k - 1).saturating_mul(f).saturating_add(1);
    }
    f
}

/// `(n - 1)! e`, an upper bound on [`f_bound`] for `n >= 1`.
pub fn f_bound_closed(n: u64) -> f64 {
    if n == 0 {
        return 0.0;
    }
    (1..n).map(|k| k as f64).product::<f64>() * std::f64::consts::E
}
