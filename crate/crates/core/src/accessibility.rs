//! The junction-accessibility graph `G~(N~, A~)` and destination pruning.

use std::collections::{BTreeSet, HashMap, VecDeque};

use crate::error::{Error, Result};
use crate::network::{Fleet, JunctionId, RouteId, VehicularNetwork, VehicularRoute};

/// The part of a route between two junctions it visits: arcs `start..=end`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SubRoute {
    pub route: RouteId,
    pub start: usize,
    pub end: usize,
}

/// Arc `(i, j)` exists iff some route visits `i` strictly before `j`. Each
/// arc carries its index set: the sub-routes realizing it, ordered by route id.
#[derive(Clone, Debug, PartialEq)]
pub struct AccessibilityGraph {
    junctions: Vec<JunctionId>,
    position: HashMap<JunctionId, usize>,
    index_sets: HashMap<(JunctionId, JunctionId), Vec<SubRoute>>,
    successors: Vec<Vec<JunctionId>>,
    predecessors: Vec<Vec<JunctionId>>,
}

impl AccessibilityGraph {
    /// Builds the graph from every non-empty route of the fleet.
    pub fn build(network: &VehicularNetwork, fleet: &Fleet) -> Self {
        Self::build_with(network, fleet, |_| true)
    }

    /// Builds the graph from the non-empty routes accepted by `keep`.
    pub fn build_with(
        network: &VehicularNetwork,
        fleet: &Fleet,
        keep: impl Fn(&VehicularRoute) -> bool,
    ) -> Self {
        let mut index_sets: HashMap<(JunctionId, JunctionId), Vec<SubRoute>> = HashMap::new();
        for route in fleet.iter().filter(|r| !r.is_empty() && keep(r)) {
            let nodes = &route.junctions;
            for from in 0..nodes.len() {
                for to in from + 1..nodes.len() {
                    let entry = index_sets.entry((nodes[from], nodes[to])).or_default();
                    // fleets are loop-free, so a route realizes a pair at most once
                    debug_assert!(entry.last().is_none_or(|s| s.route != route.id));
                    entry.push(SubRoute {
                        route: route.id,
                        start: from,
                        end: to - 1,
                    });
                }
            }
        }
        Self::from_index_sets(network.junctions().to_vec(), index_sets)
    }

    fn from_index_sets(
        junctions: Vec<JunctionId>,
        index_sets: HashMap<(JunctionId, JunctionId), Vec<SubRoute>>,
    ) -> Self {
        let position: HashMap<_, _> = junctions.iter().enumerate().map(|(p, &j)| (j, p)).collect();
        let mut successors = vec![Vec::new(); junctions.len()];
        let mut predecessors = vec![Vec::new(); junctions.len()];
        for &(i, j) in index_sets.keys() {
            successors[position[&i]].push(j);
            predecessors[position[&j]].push(i);
        }
        for list in successors.iter_mut().chain(predecessors.iter_mut()) {
            list.sort_unstable();
        }
        Self {
            junctions,
            position,
            index_sets,
            successors,
            predecessors,
        }
    }

    /// Drops the sub-routes of `route` that use arcs from `keep` on, as when
    /// the route is cut back to its first `keep` arcs.
    pub(crate) fn cut_route(&mut self, route: &VehicularRoute, keep: usize) {
        let nodes = &route.junctions;
        for to in (keep + 1).max(1)..nodes.len() {
            for from in 0..to {
                let key = (nodes[from], nodes[to]);
                let Some(set) = self.index_sets.get_mut(&key) else {
                    continue;
                };
                set.retain(|s| s.route != route.id);
                if set.is_empty() {
                    self.index_sets.remove(&key);
                    let (i, j) = key;
                    let succ = &mut self.successors[self.position[&i]];
                    if let Ok(k) = succ.binary_search(&j) {
                        succ.remove(k);
                    }
                    let pred = &mut self.predecessors[self.position[&j]];
                    if let Ok(k) = pred.binary_search(&i) {
                        pred.remove(k);
                    }
                }
            }
        }
    }

    pub fn junctions(&self) -> &[JunctionId] {
        &self.junctions
    }

    pub fn arc_count(&self) -> usize {
        self.index_sets.len()
    }

    pub fn contains_arc(&self, from: JunctionId, to: JunctionId) -> bool {
        self.index_sets.contains_key(&(from, to))
    }

    /// Sub-routes realizing `(from, to)`, ordered by route id.
    pub fn index_set(&self, from: JunctionId, to: JunctionId) -> Option<&[SubRoute]> {
        self.index_sets.get(&(from, to)).map(Vec::as_slice)
    }

    /// Heads of arcs leaving `from`, ascending.
    pub fn successors(&self, from: JunctionId) -> &[JunctionId] {
        self.position
            .get(&from)
            .map_or(&[], |&p| self.successors[p].as_slice())
    }

    /// Tails of arcs entering `to`, ascending.
    pub fn predecessors(&self, to: JunctionId) -> &[JunctionId] {
        self.position
            .get(&to)
            .map_or(&[], |&p| self.predecessors[p].as_slice())
    }

    /// All arcs in lexicographic order.
    pub fn arcs(&self) -> impl Iterator<Item = (JunctionId, JunctionId)> + '_ {
        self.junctions
            .iter()
            .zip(&self.successors)
            .flat_map(|(&i, succ)| succ.iter().map(move |&j| (i, j)))
    }

    /// `|A~| / (|N~| (|N~| - 1))`.
    pub fn density(&self) -> f64 {
        let n = self.junctions.len() as f64;
        if n < 2.0 {
            return 0.0;
        }
        self.arc_count() as f64 / (n * (n - 1.0))
    }

    /// Fewest accessibility arcs from `source` to every junction, or from every
    /// junction to `source` when `reverse` is set. Indexed like [`Self::junctions`].
    pub fn hop_counts(&self, source: JunctionId, reverse: bool) -> Vec<Option<usize>> {
        let mut hops = vec![None; self.junctions.len()];
        let Some(&start) = self.position.get(&source) else {
            return hops;
        };
        hops[start] = Some(0);
        let mut queue = VecDeque::from([start]);
        while let Some(p) = queue.pop_front() {
            let next = if reverse {
                &self.predecessors[p]
            } else {
                &self.successors[p]
            };
            let d = hops[p].unwrap_or(0) + 1;
            for j in next {
                let q = self.position[j];
                if hops[q].is_none() {
                    hops[q] = Some(d);
                    queue.push_back(q);
                }
            }
        }
        hops
    }

    pub fn position(&self, junction: JunctionId) -> Option<usize> {
        self.position.get(&junction).copied()
    }

    fn retain_heads(&self, keep: impl Fn(JunctionId) -> bool) -> Self {
        let index_sets = self
            .index_sets
            .iter()
            .filter(|((_, j), _)| keep(*j))
            .map(|(k, v)| (*k, v.clone()))
            .collect();
        Self::from_index_sets(self.junctions.clone(), index_sets)
    }
}

/// Result of dropping junctions that cannot reach the destination.
#[derive(Clone, Debug)]
pub struct Pruned {
    /// `A~'`: accessibility arcs whose head can reach the destination.
    pub graph: AccessibilityGraph,
    /// `N-bar`: junctions with no road path to the destination.
    pub unreachable: BTreeSet<JunctionId>,
}

/// Removes accessibility arcs whose head has no directed road path to `target`.
pub fn prune_unreachable(
    network: &VehicularNetwork,
    accessibility: &AccessibilityGraph,
    target: JunctionId,
) -> Result<Pruned> {
    if !network.contains(target) {
        return Err(Error::UnknownJunction(target));
    }
    let reach = network.reaches(target)?;
    let unreachable: BTreeSet<JunctionId> = network
        .junctions()
        .iter()
        .zip(&reach)
        .filter(|(_, &r)| !r)
        .map(|(&j, _)| j)
        .collect();
    let graph = accessibility.retain_heads(|j| !unreachable.contains(&j));
    Ok(Pruned { graph, unreachable })
}
