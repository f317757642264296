//! Greedy fewest-cycle path construction with inline rate assignment.
//!
//! Each round picks the energy path with the fewest segments in the current
//! accessibility graph and runs it at full rate, using up the bottleneck
//! route flow. Routes whose flow runs out are cut back to the part before the
//! used sub-route and leave the graph beyond that point. The search repeats
//! until the target is covered; the last path only carries what is still
//! missing.

use crate::accessibility::{AccessibilityGraph, SubRoute};
use crate::energy::{path_loss, EnergyParams, EnergyPath, PlanEntry, TransmissionPlan};
use crate::error::{Error, Result};
use crate::network::{Fleet, JunctionId, VehicularNetwork};
use crate::paths::JunctionSequence;

/// Route flows at or below this many EVs per second count as used up.
pub const FLOW_EPS: f64 = 1e-12;

/// The fewest-segment energy path from `source` to `target` over routes with
/// positive flow. Among equally short paths the largest bottleneck flow wins,
/// then the smaller junction sequence, then the smaller route ids.
pub fn min_hop_path(
    graph: &AccessibilityGraph,
    network: &VehicularNetwork,
    fleet: &Fleet,
    source: JunctionId,
    target: JunctionId,
) -> Result<Option<EnergyPath>> {
    let (Some(s), Some(t)) = (graph.position(source), graph.position(target)) else {
        return Err(Error::UnknownJunction(
            if graph.position(source).is_none() {
                source
            } else {
                target
            },
        ));
    };
    if s == t {
        return Err(Error::SameEndpoints(source));
    }
    let to_target = graph.hop_counts(target, true);
    let Some(shortest) = to_target[s] else {
        return Ok(None);
    };
    let mut search = HopSearch {
        graph,
        network,
        fleet,
        target,
        to_target,
        hops: 0,
        on_sequence: vec![false; graph.junctions().len()],
        sequence: vec![source],
        visited: vec![false; network.junction_count()],
        used: vec![false; fleet.len()],
        segments: Vec::new(),
        best: None,
    };
    for hops in shortest..graph.junctions().len() {
        search.hops = hops;
        search.on_sequence[s] = true;
        search.walk(source, f64::INFINITY);
        search.on_sequence[s] = false;
        if let Some((_, segments)) = search.best.take() {
            return Ok(Some(EnergyPath::from_valid_segments(
                source, target, segments, network, fleet,
            )));
        }
    }
    Ok(None)
}

/// Junction sequence of [`min_hop_path`].
pub fn min_hop_sequence(
    graph: &AccessibilityGraph,
    network: &VehicularNetwork,
    fleet: &Fleet,
    source: JunctionId,
    target: JunctionId,
) -> Result<Option<JunctionSequence>> {
    Ok(min_hop_path(graph, network, fleet, source, target)?
        .map(|p| JunctionSequence(p.junction_sequence(fleet))))
}

struct HopSearch<'a> {
    graph: &'a AccessibilityGraph,
    network: &'a VehicularNetwork,
    fleet: &'a Fleet,
    target: JunctionId,
    to_target: Vec<Option<usize>>,
    hops: usize,
    on_sequence: Vec<bool>,
    sequence: Vec<JunctionId>,
    visited: Vec<bool>,
    used: Vec<bool>,
    segments: Vec<SubRoute>,
    best: Option<(f64, Vec<SubRoute>)>,
}

impl HopSearch<'_> {
    fn beaten(&self, bound: f64) -> bool {
        self.best.as_ref().is_some_and(|(d, _)| bound <= *d)
    }

    fn widest(&self, from: JunctionId, to: JunctionId) -> f64 {
        self.graph
            .index_set(from, to)
            .unwrap_or_default()
            .iter()
            .map(|s| self.fleet.route(s.route).flow)
            .fold(0.0, f64::max)
    }

    /// Junction sequences in lexicographic order with exactly `self.hops`
    /// arcs; `bound` is the best flow any route choice could reach.
    fn walk(&mut self, at: JunctionId, bound: f64) {
        let taken = self.sequence.len() - 1;
        if at == self.target {
            if taken == self.hops {
                self.assign(bound);
            }
            return;
        }
        for &j in self.graph.successors(at) {
            let pos = self.graph.position(j).expect("graph junction");
            if self.on_sequence[pos] {
                continue;
            }
            match self.to_target[pos] {
                Some(rest) if taken + 1 + rest <= self.hops => {}
                _ => continue,
            }
            if j == self.target && taken + 1 != self.hops {
                continue;
            }
            let bound = bound.min(self.widest(at, j));
            if self.beaten(bound) {
                continue;
            }
            self.on_sequence[pos] = true;
            self.sequence.push(j);
            self.walk(j, bound);
            self.sequence.pop();
            self.on_sequence[pos] = false;
        }
    }

    /// Best route choice for the current sequence.
    fn assign(&mut self, bound: f64) {
        for v in self.visited.iter_mut() {
            *v = false;
        }
        let source = self.sequence[0];
        self.visited[self.network.junction_index(source).expect("known")] = true;
        self.choose(0, bound, f64::INFINITY);
    }

    fn choose(&mut self, depth: usize, bound: f64, delta: f64) {
        if depth == self.sequence.len() - 1 {
            if !self.beaten(delta) {
                self.best = Some((delta, self.segments.clone()));
            }
            return;
        }
        let (from, to) = (self.sequence[depth], self.sequence[depth + 1]);
        for &sub in self.graph.index_set(from, to).unwrap_or_default() {
            let route = self.fleet.route(sub.route);
            let delta = delta.min(route.flow);
            if self.used[sub.route.index()] || self.beaten(delta.min(bound)) {
                continue;
            }
            let inner = &route.junctions[sub.start + 1..=sub.end + 1];
            let pos = |j: JunctionId| self.network.junction_index(j).expect("known");
            let (last, body) = inner.split_last().expect("segments have an arc");
            if body
                .iter()
                .any(|&j| j == self.target || self.visited[pos(j)])
                || self.visited[pos(*last)]
            {
                continue;
            }
            for &j in inner {
                self.visited[pos(j)] = true;
            }
            self.used[sub.route.index()] = true;
            self.segments.push(sub);
            self.choose(depth + 1, bound, delta);
            self.segments.pop();
            self.used[sub.route.index()] = false;
            for &j in inner {
                self.visited[pos(j)] = false;
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HeuristicStatus {
    Success,
    /// No path was left before the target was met.
    Infeasible,
}

/// One selected path.
#[derive(Clone, Debug)]
pub struct HeuristicStep {
    pub path: EnergyPath,
    /// Bottleneck route flow at selection time.
    pub delta: f64,
    pub rate: f64,
    pub energy: f64,
    /// False only for a final path carrying the residual.
    pub full_rate: bool,
}

/// Working state of the greedy search.
#[derive(Clone, Debug)]
pub struct HeuristicState<'a> {
    network: &'a VehicularNetwork,
    params: EnergyParams,
    source: JunctionId,
    target: JunctionId,
    fleet: Fleet,
    graph: AccessibilityGraph,
    steps: Vec<HeuristicStep>,
    delivered: f64,
}

impl<'a> HeuristicState<'a> {
    pub fn new(
        network: &'a VehicularNetwork,
        fleet: &Fleet,
        params: EnergyParams,
        source: JunctionId,
        target: JunctionId,
    ) -> Result<Self> {
        params.validate()?;
        for j in [source, target] {
            if !network.contains(j) {
                return Err(Error::UnknownJunction(j));
            }
        }
        if source == target {
            return Err(Error::SameEndpoints(source));
        }
        let fleet = fleet.clone();
        let graph = Self::rebuild(network, &fleet);
        Ok(Self {
            network,
            params,
            source,
            target,
            fleet,
            graph,
            steps: Vec::new(),
            delivered: 0.0,
        })
    }

    fn rebuild(network: &VehicularNetwork, fleet: &Fleet) -> AccessibilityGraph {
        AccessibilityGraph::build_with(network, fleet, |r| r.flow > 0.0)
    }

    /// Routes with their current flows and lengths.
    pub fn fleet(&self) -> &Fleet {
        &self.fleet
    }

    pub fn graph(&self) -> &AccessibilityGraph {
        &self.graph
    }

    pub fn steps(&self) -> &[HeuristicStep] {
        &self.steps
    }

    /// `psi`: energy delivered by the selected paths so far.
    pub fn delivered(&self) -> f64 {
        self.delivered
    }

    /// Runs one round toward `target_kwh`. Returns `Some(status)` once the
    /// search is over.
    pub fn advance(&mut self, target_kwh: f64) -> Result<Option<HeuristicStatus>> {
        if self.delivered >= target_kwh {
            return Ok(Some(HeuristicStatus::Success));
        }
        let Some(path) = min_hop_path(
            &self.graph,
            self.network,
            &self.fleet,
            self.source,
            self.target,
        )?
        else {
            return Ok(Some(HeuristicStatus::Infeasible));
        };
        let delta = path.bottleneck_flow();
        debug_assert!(delta > 0.0);
        let factor = self.params.delivery_factor(path.delay(), path.cycles());
        let rate = self.params.packet_kwh * delta;
        let energy = factor * rate;
        if self.delivered + energy < target_kwh {
            self.delivered += energy;
            self.commit(&path, delta);
            self.steps.push(HeuristicStep {
                path,
                delta,
                rate,
                energy,
                full_rate: true,
            });
            Ok(None)
        } else {
            let energy = target_kwh - self.delivered;
            let reduced = energy / factor;
            debug_assert!(reduced <= rate * (1.0 + 1e-12));
            self.delivered = target_kwh;
            self.steps.push(HeuristicStep {
                path,
                delta,
                rate: reduced,
                energy,
                full_rate: false,
            });
            Ok(Some(HeuristicStatus::Success))
        }
    }

    /// Takes `delta` from every route on the path; a route that runs dry is
    /// cut back to the arcs before its used sub-route, which keep the flow
    /// they had before this round.
    fn commit(&mut self, path: &EnergyPath, delta: f64) {
        for seg in path.segments() {
            let before = self.fleet.route(seg.route).flow;
            let after = before - delta;
            if after <= FLOW_EPS {
                self.graph.cut_route(self.fleet.route(seg.route), seg.start);
                self.fleet.truncate(seg.route, seg.start);
                self.fleet.set_flow(seg.route, before);
            } else {
                self.fleet.set_flow(seg.route, after);
            }
        }
    }

    pub fn finish(self, status: HeuristicStatus) -> Result<HeuristicOutcome> {
        let z = self.params.efficiency();
        let mut loss = 0.0;
        let mut entries = Vec::with_capacity(self.steps.len());
        for s in &self.steps {
            loss += path_loss(s.energy, s.path.cycles(), z)?;
            entries.push(PlanEntry {
                path: s.path.clone(),
                rate: s.rate,
                energy: s.energy,
            });
        }
        Ok(HeuristicOutcome {
            status,
            plan: TransmissionPlan { entries },
            delivered: self.delivered,
            loss,
            steps: self.steps,
        })
    }
}

#[derive(Clone, Debug)]
pub struct HeuristicOutcome {
    pub status: HeuristicStatus,
    /// Selected paths in order; partial when infeasible.
    pub plan: TransmissionPlan,
    pub delivered: f64,
    pub loss: f64,
    pub steps: Vec<HeuristicStep>,
}

impl HeuristicOutcome {
    pub fn is_success(&self) -> bool {
        self.status == HeuristicStatus::Success
    }
}

/// Greedy plan delivering `target_kwh` from `source` to `target`.
pub fn heuristic_min_loss(
    network: &VehicularNetwork,
    fleet: &Fleet,
    params: EnergyParams,
    source: JunctionId,
    target: JunctionId,
    target_kwh: f64,
) -> Result<HeuristicOutcome> {
    if !(target_kwh.is_finite() && target_kwh >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "energy target must be finite and >= 0, got {target_kwh}"
        )));
    }
    let mut state = HeuristicState::new(network, fleet, params, source, target)?;
    loop {
        if let Some(status) = state.advance(target_kwh)? {
            return state.finish(status);
        }
    }
}
