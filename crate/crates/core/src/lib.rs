//! Energy routing over electric-vehicle traffic.
//!
//! Electric vehicles driving their usual routes can carry energy packets:
//! a packet is charged into one vehicle, rides along part of its route, is
//! handed over to another vehicle at a junction, and so on until it reaches a
//! destination. This crate models the road network and fleet, enumerates the
//! possible energy paths, and plans delivery of a target amount of energy
//! with minimal conversion loss, either exactly by linear programming or
//! approximately with a greedy min-hop heuristic.
//!
//! ```
//! use venroute::prelude::*;
//!
//! let net = VehicularNetwork::new(
//!     (0..3).map(JunctionId),
//!     [(0, 1), (1, 2)].iter().enumerate().map(|(i, &(t, h))| RoadArc {
//!         id: ArcId(i as u32),
//!         tail: JunctionId(t),
//!         head: JunctionId(h),
//!         delay: 600.0,
//!     }),
//! )?;
//! let fleet = normalize_routes(
//!     &net,
//!     &[RawRoute { id: RouteId(0), arcs: vec![ArcId(0), ArcId(1)], flow: 0.1 }],
//! )?;
//! let paths = full_path_set(&net, &fleet, JunctionId(0), JunctionId(2), DEFAULT_PATH_CAP)?;
//! assert_eq!(paths.len(), 1);
//! # Ok::<(), venroute::Error>(())
//! ```

pub mod accessibility;
pub mod energy;
pub mod error;
pub mod harness;
pub mod heuristic;
pub mod lp;
pub mod network;
pub mod paths;

pub use error::{Error, Result};

/// The types and functions most programs need.
pub mod prelude {
    pub use crate::accessibility::{prune_unreachable, AccessibilityGraph, Pruned, SubRoute};
    pub use crate::energy::{
        path_loss, plan_totals, rate_cap, transferable_energy, EnergyParams, EnergyPath, PlanEntry,
        PlanTotals, TransmissionPlan,
    };
    pub use crate::error::{Error, Result};
    pub use crate::heuristic::{heuristic_min_loss, HeuristicOutcome, HeuristicStatus};
    pub use crate::lp::{solve_min_loss, LossMinProblem, LpSolution, LpStatus};
    pub use crate::network::{
        normalize_routes, ArcId, Fleet, JunctionId, RawRoute, RoadArc, RouteId, VehicularNetwork,
        VehicularRoute,
    };
    pub use crate::paths::{
        enumerate_bounded, enumerate_paths, full_path_set, BoundedConfig, PathSet, DEFAULT_PATH_CAP,
    };
}

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/networks.md")]
    mod networks {}
    #[doc = include_str!("../../../book/src/paths.md")]
    mod paths {}
    #[doc = include_str!("../../../book/src/planning.md")]
    mod planning {}
    #[doc = include_str!("../../../book/src/heuristic.md")]
    mod heuristic {}
    #[doc = include_str!("../../../book/src/harness.md")]
    mod harness {}
}
