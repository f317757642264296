use std::path::PathBuf;

use thiserror::Error;

use crate::network::{ArcId, JunctionId, RouteId};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("route {route}: arcs {first} and {second} are not connected")]
    DisconnectedRoute {
        route: RouteId,
        first: ArcId,
        second: ArcId,
    },

    #[error("route {0} has no arcs")]
    EmptyRoute(RouteId),

    #[error("route {route} references unknown arc {arc}")]
    UnknownRouteArc { route: RouteId, arc: ArcId },

    #[error("arc {arc} references undeclared junction {junction}")]
    UndeclaredJunction { arc: ArcId, junction: JunctionId },

    #[error("duplicate arc id {0}")]
    DuplicateArcId(ArcId),

    #[error("duplicate junction id {0}")]
    DuplicateJunction(JunctionId),

    #[error("arcs {first} and {second} both join {tail} -> {head}")]
    ParallelArcs {
        first: ArcId,
        second: ArcId,
        tail: JunctionId,
        head: JunctionId,
    },

    #[error("arc {arc} is a self-loop at junction {junction}")]
    SelfLoopArc { arc: ArcId, junction: JunctionId },

    #[error("arc {arc} has invalid delay {delay} (must be finite and > 0)")]
    InvalidDelay { arc: ArcId, delay: f64 },

    #[error("route {route} has invalid flow {flow} (must be finite and >= 0)")]
    InvalidFlow { route: RouteId, flow: f64 },

    #[error("unknown junction {0}")]
    UnknownJunction(JunctionId),

    #[error("unknown arc {0}")]
    UnknownArc(ArcId),

    #[error("source and destination are both {0}")]
    SameEndpoints(JunctionId),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("inconsistent path data: {0}")]
    Inconsistent(String),

    #[error("enumeration exceeded the cap of {cap} items")]
    EnumerationCap { cap: usize },

    #[error("LP solver failure: {0}")]
    Solver(String),

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv output: {0}")]
    Csv(#[from] csv::Error),
}
