//! Road network, vehicular routes and loop normalization.
//!
//! A [`VehicularNetwork`] is the directed road graph with per-arc traversal
//! delays. Routes are read as [`RawRoute`]s and turned into a [`Fleet`] of
//! loop-free [`VehicularRoute`]s by [`normalize_routes`]; everything
//! downstream works on the fleet.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap, HashMap, HashSet, VecDeque};
use std::fmt;

use ordered_float::OrderedFloat;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

macro_rules! id_type {
    ($(#[$meta:meta])* $name:ident, $prefix:literal) => {
        $(#[$meta])*
        #[derive(
            Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize,
        )]
        #[serde(transparent)]
        pub struct $name(pub u32);

        impl $name {
            pub fn index(self) -> usize {
                self.0 as usize
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, concat!($prefix, "{}"), self.0)
            }
        }
    };
}

id_type!(
    /// Road junction identifier.
    JunctionId,
    "n"
);
id_type!(
    /// Road arc identifier.
    ArcId,
    "a"
);
id_type!(
    /// Vehicular route identifier.
    RouteId,
    "r"
);

/// A directed road connection.
#[derive(Clone, Debug, PartialEq)]
pub struct RoadArc {
    pub id: ArcId,
    pub tail: JunctionId,
    pub head: JunctionId,
    /// Mean traversal time in seconds.
    pub delay: f64,
}

/// Directed road graph `G(N, A)`.
#[derive(Clone, Debug)]
pub struct VehicularNetwork {
    junctions: Vec<JunctionId>,
    arcs: Vec<RoadArc>,
    junction_pos: HashMap<JunctionId, usize>,
    arc_pos: HashMap<ArcId, usize>,
    by_pair: HashMap<(JunctionId, JunctionId), ArcId>,
    incoming: Vec<Vec<usize>>,
}

impl VehicularNetwork {
    pub fn new(
        junctions: impl IntoIterator<Item = JunctionId>,
        arcs: impl IntoIterator<Item = RoadArc>,
    ) -> Result<Self> {
        let mut junctions: Vec<JunctionId> = junctions.into_iter().collect();
        junctions.sort_unstable();
        if let Some(w) = junctions.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::DuplicateJunction(w[0]));
        }
        let junction_pos: HashMap<_, _> = junctions
            .iter()
            .enumerate()
            .map(|(pos, &j)| (j, pos))
            .collect();

        let arcs: Vec<RoadArc> = arcs.into_iter().collect();
        let mut arc_pos = HashMap::with_capacity(arcs.len());
        let mut by_pair = HashMap::with_capacity(arcs.len());
        let mut incoming = vec![Vec::new(); junctions.len()];
        for (pos, arc) in arcs.iter().enumerate() {
            for end in [arc.tail, arc.head] {
                if !junction_pos.contains_key(&end) {
                    return Err(Error::UndeclaredJunction {
                        arc: arc.id,
                        junction: end,
                    });
                }
            }
            if arc.tail == arc.head {
                return Err(Error::SelfLoopArc {
                    arc: arc.id,
                    junction: arc.tail,
                });
            }
            if !(arc.delay.is_finite() && arc.delay > 0.0) {
                return Err(Error::InvalidDelay {
                    arc: arc.id,
                    delay: arc.delay,
                });
            }
            if arc_pos.insert(arc.id, pos).is_some() {
                return Err(Error::DuplicateArcId(arc.id));
            }
            if let Some(first) = by_pair.insert((arc.tail, arc.head), arc.id) {
                return Err(Error::ParallelArcs {
                    first,
                    second: arc.id,
                    tail: arc.tail,
                    head: arc.head,
                });
            }
            incoming[junction_pos[&arc.head]].push(pos);
        }

        Ok(Self {
            junctions,
            arcs,
            junction_pos,
            arc_pos,
            by_pair,
            incoming,
        })
    }

    /// Junctions in ascending id order.
    pub fn junctions(&self) -> &[JunctionId] {
        &self.junctions
    }

    pub fn junction_count(&self) -> usize {
        self.junctions.len()
    }

    pub fn contains(&self, junction: JunctionId) -> bool {
        self.junction_pos.contains_key(&junction)
    }

    /// Dense position of a junction in [`Self::junctions`].
    pub fn junction_index(&self, junction: JunctionId) -> Option<usize> {
        self.junction_pos.get(&junction).copied()
    }

    pub fn arcs(&self) -> &[RoadArc] {
        &self.arcs
    }

    pub fn arc(&self, id: ArcId) -> Option<&RoadArc> {
        self.arc_pos.get(&id).map(|&pos| &self.arcs[pos])
    }

    pub fn arc_between(&self, tail: JunctionId, head: JunctionId) -> Option<&RoadArc> {
        self.by_pair.get(&(tail, head)).and_then(|id| self.arc(*id))
    }

    /// For every junction (by dense index), whether it has a directed path to
    /// `target`. Computed by breadth-first search over reversed arcs.
    pub fn reaches(&self, target: JunctionId) -> Result<Vec<bool>> {
        let start = self
            .junction_index(target)
            .ok_or(Error::UnknownJunction(target))?;
        let mut seen = vec![false; self.junctions.len()];
        seen[start] = true;
        let mut queue = VecDeque::from([start]);
        while let Some(pos) = queue.pop_front() {
            for &arc in &self.incoming[pos] {
                let tail = self.junction_pos[&self.arcs[arc].tail];
                if !seen[tail] {
                    seen[tail] = true;
                    queue.push_back(tail);
                }
            }
        }
        Ok(seen)
    }

    /// Least road travel time from every junction (by dense index) to `target`;
    /// infinite where no path exists.
    pub fn delays_to(&self, target: JunctionId) -> Result<Vec<f64>> {
        let start = self
            .junction_index(target)
            .ok_or(Error::UnknownJunction(target))?;
        let mut best = vec![f64::INFINITY; self.junctions.len()];
        best[start] = 0.0;
        let mut heap = BinaryHeap::from([(Reverse(OrderedFloat(0.0)), start)]);
        while let Some((Reverse(OrderedFloat(d)), pos)) = heap.pop() {
            if d > best[pos] {
                continue;
            }
            for &arc in &self.incoming[pos] {
                let arc = &self.arcs[arc];
                let tail = self.junction_pos[&arc.tail];
                let cand = d + arc.delay;
                if cand < best[tail] {
                    best[tail] = cand;
                    heap.push((Reverse(OrderedFloat(cand)), tail));
                }
            }
        }
        Ok(best)
    }
}

/// A route as read from input, before loop normalization.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RawRoute {
    pub id: RouteId,
    pub arcs: Vec<ArcId>,
    /// EVs per second.
    pub flow: f64,
}

/// A loop-free vehicular route `r_i` with its EV flow.
#[derive(Clone, Debug, PartialEq)]
pub struct VehicularRoute {
    /// Dense id, equal to the route's position in its [`Fleet`].
    pub id: RouteId,
    /// Id of the raw route this one was cut from.
    pub origin: RouteId,
    pub arcs: Vec<ArcId>,
    /// `arcs.len() + 1` junctions; junction `k` is the tail of arc `k`.
    pub junctions: Vec<JunctionId>,
    /// EVs per second.
    pub flow: f64,
}

impl VehicularRoute {
    pub fn len(&self) -> usize {
        self.arcs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.arcs.is_empty()
    }

    /// Junction where arc `start` begins.
    pub fn tail_of(&self, start: usize) -> JunctionId {
        self.junctions[start]
    }

    /// Junction where arc `end` finishes.
    pub fn head_of(&self, end: usize) -> JunctionId {
        self.junctions[end + 1]
    }

    /// Total traversal delay of arcs `start..=end`.
    pub fn sub_route_delay(&self, network: &VehicularNetwork, start: usize, end: usize) -> f64 {
        self.arcs[start..=end]
            .iter()
            .map(|a| network.arc(*a).expect("fleet arcs are validated").delay)
            .sum()
    }
}

/// The normalized route set `R`. Route ids are positions.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Fleet {
    routes: Vec<VehicularRoute>,
}

impl Fleet {
    pub fn routes(&self) -> &[VehicularRoute] {
        &self.routes
    }

    pub fn get(&self, id: RouteId) -> Option<&VehicularRoute> {
        self.routes.get(id.index())
    }

    pub fn route(&self, id: RouteId) -> &VehicularRoute {
        &self.routes[id.index()]
    }

    pub fn len(&self) -> usize {
        self.routes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.routes.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, VehicularRoute> {
        self.routes.iter()
    }

    /// The routes as raw input, labelled with their normalized ids.
    pub fn to_raw(&self) -> Vec<RawRoute> {
        self.routes
            .iter()
            .map(|r| RawRoute {
                id: r.id,
                arcs: r.arcs.clone(),
                flow: r.flow,
            })
            .collect()
    }

    pub(crate) fn set_flow(&mut self, id: RouteId, flow: f64) {
        self.routes[id.index()].flow = flow;
    }

    /// Keeps only arcs `..keep`.
    pub(crate) fn truncate(&mut self, id: RouteId, keep: usize) {
        let route = &mut self.routes[id.index()];
        route.arcs.truncate(keep);
        route.junctions.truncate(keep + 1);
        if route.arcs.is_empty() {
            route.junctions.clear();
        }
    }
}

impl<'a> IntoIterator for &'a Fleet {
    type Item = &'a VehicularRoute;
    type IntoIter = std::slice::Iter<'a, VehicularRoute>;

    fn into_iter(self) -> Self::IntoIter {
        self.routes.iter()
    }
}

/// Splits looped routes into loop-free pieces.
///
/// When a route first revisits a junction, the arcs before the loop entry and
/// the arcs after the loop exit become separate routes with the original flow.
/// The remainder is processed the same way. Empty pieces are dropped. Output
/// keeps input order, with pieces of one raw route adjacent.
pub fn normalize_routes(network: &VehicularNetwork, raw: &[RawRoute]) -> Result<Fleet> {
    let mut routes = Vec::new();
    for route in raw {
        if !(route.flow.is_finite() && route.flow >= 0.0) {
            return Err(Error::InvalidFlow {
                route: route.id,
                flow: route.flow,
            });
        }
        let Some(&first) = route.arcs.first() else {
            return Err(Error::EmptyRoute(route.id));
        };
        let lookup = |a: ArcId| {
            network.arc(a).ok_or(Error::UnknownRouteArc {
                route: route.id,
                arc: a,
            })
        };
        let mut junctions = vec![lookup(first)?.tail];
        for pair in route.arcs.windows(2) {
            let (prev, next) = (lookup(pair[0])?, lookup(pair[1])?);
            if prev.head != next.tail {
                return Err(Error::DisconnectedRoute {
                    route: route.id,
                    first: prev.id,
                    second: next.id,
                });
            }
        }
        for &a in &route.arcs {
            junctions.push(lookup(a)?.head);
        }

        let mut start = 0;
        while start < route.arcs.len() {
            let mut seen: HashMap<JunctionId, usize> = HashMap::new();
            let mut cut = None;
            for (pos, &j) in junctions.iter().enumerate().skip(start) {
                if let Some(&entry) = seen.get(&j) {
                    cut = Some((entry, pos));
                    break;
                }
                seen.insert(j, pos);
            }
            let (piece_end, next_start) = match cut {
                // arcs entry..pos form the loop
                Some((entry, pos)) => (entry, pos),
                None => (route.arcs.len(), route.arcs.len()),
            };
            if piece_end > start {
                routes.push(VehicularRoute {
                    id: RouteId(routes.len() as u32),
                    origin: route.id,
                    arcs: route.arcs[start..piece_end].to_vec(),
                    junctions: junctions[start..=piece_end].to_vec(),
                    flow: route.flow,
                });
            }
            start = next_start;
        }
    }
    Ok(Fleet { routes })
}

/// Vehicular flow `h_a` on road arc `arc`: the summed flow of routes using it.
pub fn arc_flow(network: &VehicularNetwork, fleet: &Fleet, arc: ArcId) -> Result<f64> {
    if network.arc(arc).is_none() {
        return Err(Error::UnknownArc(arc));
    }
    Ok(fleet
        .iter()
        .filter(|r| r.arcs.contains(&arc))
        .map(|r| r.flow)
        .sum())
}

/// `h_a` for every arc used by at least one route.
pub fn arc_flows(fleet: &Fleet) -> BTreeMap<ArcId, f64> {
    let mut flows = BTreeMap::new();
    for route in fleet {
        let distinct: HashSet<ArcId> = route.arcs.iter().copied().collect();
        for arc in distinct {
            *flows.entry(arc).or_insert(0.0) += route.flow;
        }
    }
    flows
}
