//! Scenario files: a road network, its routes, parameters and endpoints.
//!
//! ```toml
//! [meta]
//! name = "tiny"
//!
//! [params]
//! w_kwh = 1.0
//! zc = 0.9
//! zd = 1.0
//! T_s = 18000.0
//!
//! [endpoints]
//! source = 0
//! target = 1
//!
//! [junctions]
//! ids = [0, 1]
//!
//! [[arcs]]
//! id = 0
//! tail = 0
//! head = 1
//! length_km = 10.0
//! speed_kmh = 60.0
//!
//! [[routes]]
//! id = 0
//! arcs = [0]
//! flow_ev_per_s = 0.1
//! ```

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::energy::EnergyParams;
use crate::error::{Error, Result};
use crate::network::{
    normalize_routes, ArcId, Fleet, JunctionId, RawRoute, RoadArc, RouteId, VehicularNetwork,
};

/// How an arc's traversal delay is given.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ArcTiming {
    Geometry { length_km: f64, speed_kmh: f64 },
    Delay { seconds: f64 },
}

impl ArcTiming {
    pub fn delay_s(self) -> f64 {
        match self {
            Self::Geometry {
                length_km,
                speed_kmh,
            } => length_km * 3600.0 / speed_kmh,
            Self::Delay { seconds } => seconds,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ArcSpec {
    pub id: ArcId,
    pub tail: JunctionId,
    pub head: JunctionId,
    pub timing: ArcTiming,
}

/// A validated scenario. Routes are kept as written; [`Scenario::fleet`] is
/// their loop-free normalization.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub name: String,
    pub seed: Option<u64>,
    pub params: EnergyParams,
    pub source: JunctionId,
    pub target: JunctionId,
    pub target_kwh: Option<f64>,
    junctions: Vec<JunctionId>,
    arcs: Vec<ArcSpec>,
    routes: Vec<RawRoute>,
    network: VehicularNetwork,
    fleet: Fleet,
}

impl Scenario {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        name: impl Into<String>,
        seed: Option<u64>,
        params: EnergyParams,
        source: JunctionId,
        target: JunctionId,
        target_kwh: Option<f64>,
        junctions: Vec<JunctionId>,
        arcs: Vec<ArcSpec>,
        routes: Vec<RawRoute>,
    ) -> Result<Self> {
        params.validate()?;
        let network = VehicularNetwork::new(
            junctions.iter().copied(),
            arcs.iter().map(|a| RoadArc {
                id: a.id,
                tail: a.tail,
                head: a.head,
                delay: a.timing.delay_s(),
            }),
        )?;
        for j in [source, target] {
            if !network.contains(j) {
                return Err(Error::UnknownJunction(j));
            }
        }
        if source == target {
            return Err(Error::SameEndpoints(source));
        }
        if let Some(x) = target_kwh {
            if !(x.is_finite() && x >= 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "target_kwh must be finite and >= 0, got {x}"
                )));
            }
        }
        let mut seen = std::collections::HashSet::new();
        if let Some(r) = routes.iter().find(|r| !seen.insert(r.id)) {
            return Err(Error::InvalidParameter(format!(
                "duplicate route id {}",
                r.id
            )));
        }
        let fleet = normalize_routes(&network, &routes)?;
        Ok(Self {
            name: name.into(),
            seed,
            params,
            source,
            target,
            target_kwh,
            junctions,
            arcs,
            routes,
            network,
            fleet,
        })
    }

    pub fn network(&self) -> &VehicularNetwork {
        &self.network
    }

    pub fn fleet(&self) -> &Fleet {
        &self.fleet
    }

    pub fn routes(&self) -> &[RawRoute] {
        &self.routes
    }

    pub fn arcs(&self) -> &[ArcSpec] {
        &self.arcs
    }

    pub fn junctions(&self) -> &[JunctionId] {
        &self.junctions
    }

    /// Same scenario with other endpoints or target.
    pub fn with_endpoints(
        &self,
        source: JunctionId,
        target: JunctionId,
        target_kwh: Option<f64>,
    ) -> Result<Self> {
        Self::new(
            self.name.clone(),
            self.seed,
            self.params,
            source,
            target,
            target_kwh,
            self.junctions.clone(),
            self.arcs.clone(),
            self.routes.clone(),
        )
    }

    pub fn to_toml(&self) -> String {
        let file = ScenarioFile {
            meta: Meta {
                name: self.name.clone(),
                seed: self.seed,
            },
            params: ParamsFile {
                w_kwh: self.params.packet_kwh,
                zc: self.params.charge_efficiency,
                zd: self.params.discharge_efficiency,
                t_s: self.params.window_s,
            },
            endpoints: Endpoints {
                source: self.source.0,
                target: self.target.0,
                target_kwh: self.target_kwh,
            },
            junctions: Junctions {
                ids: self.junctions.iter().map(|j| j.0).collect(),
            },
            arcs: self
                .arcs
                .iter()
                .map(|a| {
                    let (length_km, speed_kmh, delay_s) = match a.timing {
                        ArcTiming::Geometry {
                            length_km,
                            speed_kmh,
                        } => (Some(length_km), Some(speed_kmh), None),
                        ArcTiming::Delay { seconds } => (None, None, Some(seconds)),
                    };
                    ArcFile {
                        id: a.id.0,
                        tail: a.tail.0,
                        head: a.head.0,
                        length_km,
                        speed_kmh,
                        delay_s,
                    }
                })
                .collect(),
            routes: self
                .routes
                .iter()
                .map(|r| RouteFile {
                    id: r.id.0,
                    arcs: r.arcs.iter().map(|a| a.0).collect(),
                    flow_ev_per_s: r.flow,
                })
                .collect(),
        };
        toml::to_string(&file).expect("scenario fields always serialize")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let file: ScenarioFile = toml::from_str(text).map_err(|e| Error::Parse {
            path: "<scenario>".into(),
            message: e.to_string(),
        })?;
        let params = EnergyParams::new(
            file.params.w_kwh,
            file.params.zc,
            file.params.zd,
            file.params.t_s,
        )?;
        let arcs = file
            .arcs
            .iter()
            .map(|a| {
                let timing = match (a.length_km, a.speed_kmh, a.delay_s) {
                    (Some(length_km), Some(speed_kmh), None) => ArcTiming::Geometry {
                        length_km,
                        speed_kmh,
                    },
                    (None, None, Some(seconds)) => ArcTiming::Delay { seconds },
                    _ => {
                        return Err(Error::Parse {
                            path: "<scenario>".into(),
                            message: format!(
                                "arc {}: give either length_km and speed_kmh, or delay_s",
                                a.id
                            ),
                        })
                    }
                };
                Ok(ArcSpec {
                    id: ArcId(a.id),
                    tail: JunctionId(a.tail),
                    head: JunctionId(a.head),
                    timing,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let routes = file
            .routes
            .iter()
            .map(|r| RawRoute {
                id: RouteId(r.id),
                arcs: r.arcs.iter().map(|&a| ArcId(a)).collect(),
                flow: r.flow_ev_per_s,
            })
            .collect();
        Self::new(
            file.meta.name,
            file.meta.seed,
            params,
            JunctionId(file.endpoints.source),
            JunctionId(file.endpoints.target),
            file.endpoints.target_kwh,
            file.junctions.ids.into_iter().map(JunctionId).collect(),
            arcs,
            routes,
        )
    }
}

pub fn load_scenario(path: &Path) -> Result<Scenario> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Scenario::from_toml(&text).map_err(|e| match e {
        Error::Parse { message, .. } => Error::Parse {
            path: path.to_path_buf(),
            message,
        },
        other => other,
    })
}

pub fn save_scenario(scenario: &Scenario, path: &Path) -> Result<()> {
    fs::write(path, scenario.to_toml()).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    meta: Meta,
    params: ParamsFile,
    endpoints: Endpoints,
    junctions: Junctions,
    #[serde(default)]
    arcs: Vec<ArcFile>,
    #[serde(default)]
    routes: Vec<RouteFile>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Meta {
    name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ParamsFile {
    w_kwh: f64,
    zc: f64,
    zd: f64,
    #[serde(rename = "T_s")]
    t_s: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Endpoints {
    source: u32,
    target: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    target_kwh: Option<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Junctions {
    ids: Vec<u32>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ArcFile {
    id: u32,
    tail: u32,
    head: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    length_km: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    speed_kmh: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    delay_s: Option<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RouteFile {
    id: u32,
    arcs: Vec<u32>,
    flow_ev_per_s: f64,
}
