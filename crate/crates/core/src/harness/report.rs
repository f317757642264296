//! CSV listings of path sets and plans.

use std::io;

use crate::energy::{path_loss, EnergyParams, EnergyPath, TransmissionPlan};
use crate::error::{Error, Result};
use crate::network::Fleet;

fn join<T: ToString>(items: impl IntoIterator<Item = T>) -> String {
    items
        .into_iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(" ")
}

fn describe(path: &EnergyPath, fleet: &Fleet) -> [String; 5] {
    [
        join(path.junction_sequence(fleet).iter().map(|j| j.0)),
        join(path.routes().map(|r| r.0)),
        path.cycles().to_string(),
        path.delay().to_string(),
        path.bottleneck_flow().to_string(),
    ]
}

fn flush<W: io::Write>(mut w: csv::Writer<W>) -> Result<()> {
    w.flush().map_err(|source| Error::Io {
        path: "<csv>".into(),
        source,
    })
}

const PATH_COLUMNS: [&str; 6] = [
    "path",
    "junctions",
    "routes",
    "cycles",
    "delay_s",
    "bottleneck_flow_ev_per_s",
];

/// One row per path: junction sequence and route ids space-separated.
pub fn write_paths_csv<W: io::Write>(paths: &[EnergyPath], fleet: &Fleet, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(PATH_COLUMNS)?;
    for (k, p) in paths.iter().enumerate() {
        let mut rec = vec![k.to_string()];
        rec.extend(describe(p, fleet));
        w.write_record(&rec)?;
    }
    flush(w)
}

/// One row per plan entry with its rate, delivered energy and loss.
pub fn write_plan_csv<W: io::Write>(
    plan: &TransmissionPlan,
    fleet: &Fleet,
    params: &EnergyParams,
    out: W,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = PATH_COLUMNS.to_vec();
    header.extend(["rate_kwh_per_s", "energy_kwh", "loss_kwh"]);
    w.write_record(&header)?;
    let z = params.efficiency();
    for (k, e) in plan.entries.iter().enumerate() {
        let mut rec = vec![k.to_string()];
        rec.extend(describe(&e.path, fleet));
        rec.push(e.rate.to_string());
        rec.push(e.energy.to_string());
        rec.push(path_loss(e.energy, e.path.cycles(), z)?.to_string());
        w.write_record(&rec)?;
    }
    flush(w)
}
