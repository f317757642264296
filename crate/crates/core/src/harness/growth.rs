//! Path counts of random instances against accessibility density.

use std::collections::BTreeMap;
use std::io;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::generate::{generate_random, RandomSpec};
use crate::accessibility::{prune_unreachable, AccessibilityGraph};
use crate::error::{Error, Result};
use crate::paths::enumerate_paths;

#[derive(Clone, Debug)]
pub struct GrowthConfig {
    pub n_values: Vec<u32>,
    /// Road densities to generate at.
    pub road_densities: Vec<f64>,
    pub instances_per_cell: usize,
    pub seed: u64,
    pub path_cap: usize,
    /// Accessibility density is binned into this many equal buckets.
    pub buckets: usize,
    /// Buckets with fewer instances stay out of the trend check.
    pub min_bucket_size: usize,
}

impl GrowthConfig {
    pub fn new(
        n_values: Vec<u32>,
        road_densities: Vec<f64>,
        instances_per_cell: usize,
        seed: u64,
    ) -> Self {
        Self {
            n_values,
            road_densities,
            instances_per_cell,
            seed,
            path_cap: crate::paths::DEFAULT_PATH_CAP,
            buckets: 5,
            min_bucket_size: 5,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GrowthRecord {
    pub n: u32,
    pub road_density: f64,
    pub instance: usize,
    pub seed: u64,
    /// Arcs of the accessibility graph over ordered junction pairs.
    pub accessibility_density: f64,
    /// `None` when enumeration hit the cap.
    pub paths: Option<usize>,
}

/// Mean path count of the instances in one group.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupMean {
    pub n: u32,
    /// Lower edge of the accessibility density bucket, or the road density.
    pub density: f64,
    pub count: usize,
    pub mean_paths: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct GrowthTable {
    pub records: Vec<GrowthRecord>,
    /// Per n, by accessibility density bucket.
    pub buckets: Vec<GroupMean>,
    /// Per road density, by n.
    pub levels: Vec<GroupMean>,
    /// Mean path count strictly rises across the density buckets of every n.
    pub rises_with_density: bool,
    /// Mean path count strictly rises with n at every road density.
    pub rises_with_n: bool,
}

impl GrowthTable {
    pub fn cap_trips(&self) -> usize {
        self.records.iter().filter(|r| r.paths.is_none()).count()
    }

    /// One CSV: instance rows, then bucket and level means, then the two
    /// trend rows.
    pub fn write_csv<W: io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "kind",
            "n",
            "road_density",
            "instance",
            "seed",
            "accessibility_density",
            "paths",
            "count",
            "status",
        ])?;
        for r in &self.records {
            w.write_record([
                "instance".to_string(),
                r.n.to_string(),
                r.road_density.to_string(),
                r.instance.to_string(),
                r.seed.to_string(),
                r.accessibility_density.to_string(),
                r.paths.map(|p| p.to_string()).unwrap_or_default(),
                String::new(),
                if r.paths.is_some() { "ok" } else { "cap" }.to_string(),
            ])?;
        }
        for b in &self.buckets {
            w.write_record([
                "bucket".to_string(),
                b.n.to_string(),
                String::new(),
                String::new(),
                String::new(),
                b.density.to_string(),
                b.mean_paths.to_string(),
                b.count.to_string(),
                String::new(),
            ])?;
        }
        for l in &self.levels {
            w.write_record([
                "level".to_string(),
                l.n.to_string(),
                l.density.to_string(),
                String::new(),
                String::new(),
                String::new(),
                l.mean_paths.to_string(),
                l.count.to_string(),
                String::new(),
            ])?;
        }
        let trend = |ok: bool| if ok { "increasing" } else { "not increasing" };
        for (what, ok) in [
            ("density", self.rises_with_density),
            ("n", self.rises_with_n),
        ] {
            w.write_record([
                format!("trend-{what}"),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                trend(ok).to_string(),
            ])?;
        }
        w.flush().map_err(|source| Error::Io {
            path: "<csv>".into(),
            source,
        })
    }
}

/// Generates `instances_per_cell` random instances for every `(n, density)`
/// pair and counts their energy paths.
pub fn run_growth(config: &GrowthConfig) -> Result<GrowthTable> {
    if config.buckets == 0 {
        return Err(Error::InvalidParameter("need at least one bucket".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut jobs = Vec::new();
    for &n in &config.n_values {
        for &d in &config.road_densities {
            for k in 0..config.instances_per_cell {
                jobs.push((n, d, k, rng.random::<u64>()));
            }
        }
    }
    let records = jobs
        .par_iter()
        .map(|&(n, road_density, instance, seed)| {
            let scenario = generate_random(&RandomSpec::new(n, road_density, seed))?;
            let (net, fleet) = (scenario.network(), scenario.fleet());
            let acc = AccessibilityGraph::build(net, fleet);
            let accessibility_density = acc.density();
            let pruned = prune_unreachable(net, &acc, scenario.target)?;
            let paths = match enumerate_paths(
                &pruned.graph,
                scenario.source,
                scenario.target,
                net,
                fleet,
                config.path_cap,
            ) {
                Ok(set) => Some(set.len()),
                Err(Error::EnumerationCap { .. }) => None,
                Err(e) => return Err(e),
            };
            Ok(GrowthRecord {
                n,
                road_density,
                instance,
                seed,
                accessibility_density,
                paths,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    // Capped instances are left out of the means.
    let mut by_bucket: BTreeMap<(u32, usize), (usize, f64)> = BTreeMap::new();
    let mut by_level: BTreeMap<(u64, u32), (usize, f64)> = BTreeMap::new();
    for r in &records {
        let Some(p) = r.paths else { continue };
        let b =
            ((r.accessibility_density * config.buckets as f64) as usize).min(config.buckets - 1);
        let e = by_bucket.entry((r.n, b)).or_default();
        e.0 += 1;
        e.1 += p as f64;
        let e = by_level.entry((r.road_density.to_bits(), r.n)).or_default();
        e.0 += 1;
        e.1 += p as f64;
    }
    let buckets: Vec<GroupMean> = by_bucket
        .into_iter()
        .map(|((n, b), (count, sum))| GroupMean {
            n,
            density: b as f64 / config.buckets as f64,
            count,
            mean_paths: sum / count as f64,
        })
        .collect();
    let mut levels: Vec<GroupMean> = by_level
        .into_iter()
        .map(|((d, n), (count, sum))| GroupMean {
            n,
            density: f64::from_bits(d),
            count,
            mean_paths: sum / count as f64,
        })
        .collect();
    levels.sort_by(|a, b| a.density.total_cmp(&b.density).then(a.n.cmp(&b.n)));

    let rising = |means: Vec<f64>| means.windows(2).all(|w| w[0] < w[1]);
    let rises_with_density = config.n_values.iter().all(|&n| {
        rising(
            buckets
                .iter()
                .filter(|b| b.n == n && b.count >= config.min_bucket_size)
                .map(|b| b.mean_paths)
                .collect(),
        )
    });
    let mut ns = config.n_values.clone();
    ns.sort_unstable();
    let rises_with_n = config.road_densities.iter().all(|&d| {
        rising(
            ns.iter()
                .filter_map(|&n| levels.iter().find(|l| l.n == n && l.density == d))
                .map(|l| l.mean_paths)
                .collect(),
        )
    });
    Ok(GrowthTable {
        records,
        buckets,
        levels,
        rises_with_density,
        rises_with_n,
    })
}
