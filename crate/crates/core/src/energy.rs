//! Energy paths and the closed-form quantities attached to them: delay, rate
//! cap, transferable energy, delivered energy and loss.
//!
//! Units are fixed throughout: kWh for energy, seconds for time, kWh/s for
//! rates and EVs per second for vehicular flows.

use std::collections::HashSet;

use crate::accessibility::SubRoute;
use crate::error::{Error, Result};
use crate::network::{ArcId, Fleet, JunctionId, RouteId, VehicularNetwork};

/// Transfer parameters shared by every path of a problem.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnergyParams {
    /// Packet size `w`: kWh moved per EV per charge-discharge cycle.
    pub packet_kwh: f64,
    pub charge_efficiency: f64,
    pub discharge_efficiency: f64,
    /// Transfer window `T` in seconds.
    pub window_s: f64,
}

impl EnergyParams {
    pub fn new(
        packet_kwh: f64,
        charge_efficiency: f64,
        discharge_efficiency: f64,
        window_s: f64,
    ) -> Result<Self> {
        let params = Self {
            packet_kwh,
            charge_efficiency,
            discharge_efficiency,
            window_s,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        if !(self.packet_kwh.is_finite() && self.packet_kwh > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "packet size must be > 0, got {}",
                self.packet_kwh
            )));
        }
        if !unit(self.charge_efficiency) || !unit(self.discharge_efficiency) {
            return Err(Error::InvalidParameter(format!(
                "efficiencies must lie in [0, 1], got {} and {}",
                self.charge_efficiency, self.discharge_efficiency
            )));
        }
        if !(self.window_s.is_finite() && self.window_s > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "transfer window must be > 0, got {}",
                self.window_s
            )));
        }
        Ok(())
    }

    /// Combined per-cycle efficiency `z = z_c z_d`.
    pub fn efficiency(&self) -> f64 {
        self.charge_efficiency * self.discharge_efficiency
    }

    /// Energy deliverable per unit rate on a path: `(T - d) z^cycles`, or 0
    /// when the delay uses up the window.
    pub fn delivery_factor(&self, delay: f64, cycles: usize) -> f64 {
        if delay >= self.window_s {
            0.0
        } else {
            (self.window_s - delay) * self.efficiency().powi(cycles as i32)
        }
    }
}

/// A chain of route segments from `source` to `target`.
///
/// Construction checks that the segments chain head-to-tail from source to
/// destination, that no route is used twice and that the concatenated arcs
/// never revisit a junction.
#[derive(Clone, Debug, PartialEq)]
pub struct EnergyPath {
    source: JunctionId,
    target: JunctionId,
    segments: Vec<SubRoute>,
    delay: f64,
    bottleneck_flow: f64,
    arc_count: usize,
}

impl EnergyPath {
    pub fn new(
        source: JunctionId,
        target: JunctionId,
        segments: Vec<SubRoute>,
        network: &VehicularNetwork,
        fleet: &Fleet,
    ) -> Result<Self> {
        let bad = |msg: String| Err(Error::Inconsistent(msg));
        if segments.is_empty() {
            return bad("energy path without segments".into());
        }
        let mut routes = HashSet::new();
        let mut visited = HashSet::from([source]);
        let mut at = source;
        for seg in &segments {
            let Some(route) = fleet.get(seg.route) else {
                return bad(format!("unknown route {}", seg.route));
            };
            if seg.start > seg.end || seg.end >= route.len() {
                return bad(format!(
                    "segment {}..={} outside route {} of {} arcs",
                    seg.start,
                    seg.end,
                    seg.route,
                    route.len()
                ));
            }
            if !routes.insert(seg.route) {
                return bad(format!("route {} used twice", seg.route));
            }
            if route.tail_of(seg.start) != at {
                return bad(format!(
                    "segment on {} starts at {}, expected {}",
                    seg.route,
                    route.tail_of(seg.start),
                    at
                ));
            }
            for &j in &route.junctions[seg.start + 1..=seg.end + 1] {
                if !visited.insert(j) {
                    return bad(format!("junction {j} revisited"));
                }
            }
            at = route.head_of(seg.end);
        }
        if at != target {
            return bad(format!("path ends at {at}, expected {target}"));
        }
        Ok(Self::from_valid_segments(
            source, target, segments, network, fleet,
        ))
    }

    /// Skips validation; callers guarantee the invariants of [`Self::new`].
    pub(crate) fn from_valid_segments(
        source: JunctionId,
        target: JunctionId,
        segments: Vec<SubRoute>,
        network: &VehicularNetwork,
        fleet: &Fleet,
    ) -> Self {
        let delay = segments_delay(&segments, network, fleet);
        let bottleneck_flow = segments
            .iter()
            .map(|s| fleet.route(s.route).flow)
            .fold(f64::INFINITY, f64::min);
        let arc_count = segments.iter().map(|s| s.end - s.start + 1).sum();
        Self {
            source,
            target,
            segments,
            delay,
            bottleneck_flow,
            arc_count,
        }
    }

    pub fn source(&self) -> JunctionId {
        self.source
    }

    pub fn target(&self) -> JunctionId {
        self.target
    }

    pub fn segments(&self) -> &[SubRoute] {
        &self.segments
    }

    /// Number of charge-discharge cycles `|p|`.
    pub fn cycles(&self) -> usize {
        self.segments.len()
    }

    /// Propagation delay `d(p)` in seconds.
    pub fn delay(&self) -> f64 {
        self.delay
    }

    /// Smallest segment flow, taken from the fleet the path was built against.
    pub fn bottleneck_flow(&self) -> f64 {
        self.bottleneck_flow
    }

    pub fn arc_count(&self) -> usize {
        self.arc_count
    }

    pub fn routes(&self) -> impl Iterator<Item = RouteId> + '_ {
        self.segments.iter().map(|s| s.route)
    }

    /// Segment boundary junctions `<s, k_2, ..., t>`.
    pub fn junction_sequence(&self, fleet: &Fleet) -> Vec<JunctionId> {
        std::iter::once(self.source)
            .chain(
                self.segments
                    .iter()
                    .map(|s| fleet.route(s.route).head_of(s.end)),
            )
            .collect()
    }

    /// Every junction crossed, in travel order.
    pub fn junctions(&self, fleet: &Fleet) -> Vec<JunctionId> {
        let mut out = vec![self.source];
        for s in &self.segments {
            out.extend_from_slice(&fleet.route(s.route).junctions[s.start + 1..=s.end + 1]);
        }
        out
    }

    pub fn arcs(&self, fleet: &Fleet) -> Vec<ArcId> {
        self.segments
            .iter()
            .flat_map(|s| fleet.route(s.route).arcs[s.start..=s.end].iter().copied())
            .collect()
    }

    /// `f_i^j` for each segment.
    pub fn segment_flows(&self, fleet: &Fleet) -> Vec<f64> {
        self.segments
            .iter()
            .map(|s| fleet.route(s.route).flow)
            .collect()
    }

    /// Canonical ordering key: junction sequence, then route ids.
    pub(crate) fn sort_key(&self, fleet: &Fleet) -> (Vec<JunctionId>, Vec<RouteId>) {
        (self.junction_sequence(fleet), self.routes().collect())
    }
}

fn segments_delay(segments: &[SubRoute], network: &VehicularNetwork, fleet: &Fleet) -> f64 {
    segments
        .iter()
        .map(|s| {
            fleet
                .route(s.route)
                .sub_route_delay(network, s.start, s.end)
        })
        .sum()
}

/// `d(p)`: summed traversal delay of every arc on the path.
pub fn propagation_delay(path: &EnergyPath, network: &VehicularNetwork, fleet: &Fleet) -> f64 {
    segments_delay(path.segments(), network, fleet)
}

/// Largest admissible path rate: `w * min_i f_i`.
pub fn rate_cap(params: &EnergyParams, segment_flows: &[f64]) -> f64 {
    if segment_flows.is_empty() {
        return 0.0;
    }
    params.packet_kwh * segment_flows.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Energy that reaches the destination in the window at rate `rate`.
pub fn transferable_energy(params: &EnergyParams, delay: f64, cycles: usize, rate: f64) -> f64 {
    params.delivery_factor(delay, cycles) * rate
}

/// Energy that must leave the source for `delivered` to arrive.
pub fn injected_energy(delivered: f64, cycles: usize, efficiency: f64) -> Result<f64> {
    if !(efficiency > 0.0 && efficiency <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "efficiency must lie in (0, 1], got {efficiency}"
        )));
    }
    Ok(delivered / efficiency.powi(cycles as i32))
}

/// Loss incurred delivering `delivered` kWh over `cycles` cycles.
pub fn path_loss(delivered: f64, cycles: usize, efficiency: f64) -> Result<f64> {
    Ok(injected_energy(delivered, cycles, efficiency)? - delivered)
}

/// Per-unit loss coefficient `1/z^cycles - 1`.
pub fn loss_coefficient(cycles: usize, efficiency: f64) -> Result<f64> {
    path_loss(1.0, cycles, efficiency)
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlanEntry {
    pub path: EnergyPath,
    /// `g_j` in kWh/s.
    pub rate: f64,
    /// `x_j` in kWh.
    pub energy: f64,
}

/// Energy amounts and rates assigned to paths.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TransmissionPlan {
    pub entries: Vec<PlanEntry>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlanTotals {
    /// `x(s, t)`.
    pub delivered: f64,
    /// `L(s, t)`.
    pub loss: f64,
    /// `nu_j`; empty when nothing is delivered.
    pub fractions: Vec<f64>,
}

/// Sums delivered energy and loss over a plan, checking every entry against
/// its transferable-energy cap.
pub fn plan_totals(plan: &TransmissionPlan, params: &EnergyParams) -> Result<PlanTotals> {
    let z = params.efficiency();
    let mut delivered = 0.0;
    let mut loss = 0.0;
    for (k, e) in plan.entries.iter().enumerate() {
        if e.rate < 0.0 || e.energy < 0.0 {
            return Err(Error::Inconsistent(format!(
                "plan entry {k} has negative rate or energy"
            )));
        }
        let cap = transferable_energy(params, e.path.delay(), e.path.cycles(), e.rate);
        if e.energy > cap + 1e-9 * cap.max(1.0) {
            return Err(Error::Inconsistent(format!(
                "plan entry {k} delivers {} kWh above its cap {cap} kWh",
                e.energy
            )));
        }
        delivered += e.energy;
        if e.energy > 0.0 {
            loss += path_loss(e.energy, e.path.cycles(), z)?;
        }
    }
    let fractions = if delivered > 0.0 {
        plan.entries.iter().map(|e| e.energy / delivered).collect()
    } else {
        Vec::new()
    };
    Ok(PlanTotals {
        delivered,
        loss,
        fractions,
    })
}
