use serde::Serialize;

use super::config::{ExperimentConfig, PolicyKind};
use super::metrics::{coverage_distance, decision_regions, Coverage, RegionTable};
use super::sweep::SweepRow;
use crate::error::Result;

/// Seed-averaged metrics at one distance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointSummary {
    pub distance: f64,
    /// Seeds that trained and evaluated successfully.
    pub seeds: usize,
    pub diverged: usize,
    pub flr_ul: f64,
    pub flr_dl: f64,
    pub flr_total: f64,
    pub mean_energy: f64,
    pub mean_offload_ratio: f64,
    pub mean_reward: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeedCoverage {
    pub seed: u64,
    pub coverage_distance: Coverage,
}

/// One policy over the distance grid at fixed bandwidth, capability scale,
/// sigma and window.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupSummary {
    pub bandwidth: f64,
    pub loc_capability_scale: f64,
    pub sigma: f64,
    pub window: usize,
    pub policy: PolicyKind,
    pub points: Vec<PointSummary>,
    pub coverage_distance: Coverage,
    pub seed_coverage: Vec<SeedCoverage>,
    pub regions: RegionTable,
}

impl GroupSummary {
    fn same_setting(&self, other: &GroupSummary) -> bool {
        self.bandwidth == other.bandwidth
            && self.loc_capability_scale == other.loc_capability_scale
            && self.sigma == other.sigma
            && self.window == other.window
    }
}

/// Partial offloading against the fixed-ratio baselines at one setting.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub bandwidth: f64,
    pub loc_capability_scale: f64,
    pub sigma: f64,
    pub window: usize,
    /// Coverage distance of partial over that of always-offload.
    pub coverage_ratio: Option<f64>,
    /// Fraction of seeds where partial covers at least as far as always-offload.
    pub coverage_win_fraction: Option<f64>,
    /// Largest `1 - E(partial) / E(never)` over distances where both meet the FLR limit.
    pub max_energy_saving: Option<f64>,
    pub max_energy_saving_distance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub flr_limit: f64,
    pub groups: Vec<GroupSummary>,
    pub comparisons: Vec<Comparison>,
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        s / n as f64
    }
}

fn point(distance: f64, rows: &[&SweepRow]) -> PointSummary {
    let ok: Vec<&&SweepRow> = rows.iter().filter(|r| r.is_ok()).collect();
    let avg = |f: fn(&SweepRow) -> Option<f64>| mean(ok.iter().filter_map(|r| f(r)));
    PointSummary {
        distance,
        seeds: ok.len(),
        diverged: rows.len() - ok.len(),
        flr_ul: avg(|r| r.flr_ul),
        flr_dl: avg(|r| r.flr_dl),
        flr_total: avg(|r| r.flr_total),
        mean_energy: avg(|r| r.mean_energy),
        mean_offload_ratio: avg(|r| r.mean_offload_ratio),
        mean_reward: avg(|r| r.mean_reward),
    }
}

/// Coverage per seed; a seed's diverged cells count as not covered.
fn seed_coverage(rows: &[&SweepRow], distances: &[f64], seeds: &[u64], flr_limit: f64) -> Result<Vec<SeedCoverage>> {
    seeds
        .iter()
        .map(|&seed| {
            let curve: Vec<(f64, f64)> = distances
                .iter()
                .map(|&d| {
                    let flr = rows
                        .iter()
                        .find(|r| r.seed == seed && r.distance == d)
                        .and_then(|r| r.flr_total)
                        .unwrap_or(1.0);
                    (d, flr)
                })
                .collect();
            Ok(SeedCoverage { seed, coverage_distance: coverage_distance(&curve, flr_limit)? })
        })
        .collect()
}

pub fn summarize(cfg: &ExperimentConfig, rows: &[SweepRow]) -> Result<Summary> {
    let axes = &cfg.sweep;
    let flr_limit = cfg.reward.flr_limit;
    let mut groups = Vec::new();
    for &bandwidth in &axes.bandwidths {
        for &loc_capability_scale in &axes.loc_capability_scales {
            for &sigma in &axes.sigmas {
                for &window in &axes.windows {
                    for &policy in &cfg.policies {
                        let rows: Vec<&SweepRow> = rows
                            .iter()
                            .filter(|r| {
                                r.bandwidth == bandwidth
                                    && r.loc_capability_scale == loc_capability_scale
                                    && r.sigma == sigma
                                    && r.window == window
                                    && r.policy == policy
                            })
                            .collect();
                        let points: Vec<PointSummary> = axes
                            .distances
                            .iter()
                            .map(|&d| {
                                let at: Vec<&SweepRow> = rows.iter().copied().filter(|r| r.distance == d).collect();
                                point(d, &at)
                            })
                            .collect();
                        let flr: Vec<(f64, f64)> = points
                            .iter()
                            .map(|p| (p.distance, if p.seeds > 0 { p.flr_total } else { 1.0 }))
                            .collect();
                        let alpha: Vec<(f64, f64)> = points
                            .iter()
                            .filter(|p| p.seeds > 0)
                            .map(|p| (p.distance, p.mean_offload_ratio))
                            .collect();
                        groups.push(GroupSummary {
                            bandwidth,
                            loc_capability_scale,
                            sigma,
                            window,
                            policy,
                            coverage_distance: coverage_distance(&flr, flr_limit)?,
                            seed_coverage: seed_coverage(&rows, &axes.distances, &cfg.seeds, flr_limit)?,
                            regions: decision_regions(&alpha, cfg.regions.always, cfg.regions.never)?,
                            points,
                        });
                    }
                }
            }
        }
    }
    let comparisons = compare(&groups, flr_limit);
    Ok(Summary { flr_limit, groups, comparisons })
}

/// Coverage ratio and per-seed wins of `a` over `b`.
pub fn coverage_comparison(a: &GroupSummary, b: &GroupSummary) -> (Option<f64>, Option<f64>) {
    let ratio = match (a.coverage_distance.distance(), b.coverage_distance.distance()) {
        (Some(x), Some(y)) => Some(x / y),
        _ => None,
    };
    let wins: Vec<bool> = a
        .seed_coverage
        .iter()
        .zip(&b.seed_coverage)
        .map(|(x, y)| match (x.coverage_distance.distance(), y.coverage_distance.distance()) {
            (_, None) => true,
            (None, Some(_)) => false,
            (Some(x), Some(y)) => x >= y,
        })
        .collect();
    let frac = (!wins.is_empty()).then(|| wins.iter().filter(|w| **w).count() as f64 / wins.len() as f64);
    (ratio, frac)
}

/// Largest relative energy saving of `a` over `b` where both meet the FLR limit.
pub fn energy_saving(a: &GroupSummary, b: &GroupSummary, flr_limit: f64) -> Option<(f64, f64)> {
    a.points
        .iter()
        .zip(&b.points)
        .filter(|(p, q)| p.seeds > 0 && q.seeds > 0 && p.flr_total <= flr_limit && q.flr_total <= flr_limit)
        .map(|(p, q)| (p.distance, 1.0 - p.mean_energy / q.mean_energy))
        .fold(None, |best: Option<(f64, f64)>, cur| match best {
            Some(b) if b.1 >= cur.1 => Some(b),
            _ => Some(cur),
        })
}

fn compare(groups: &[GroupSummary], flr_limit: f64) -> Vec<Comparison> {
    let mut out = Vec::new();
    for partial in groups.iter().filter(|g| g.policy == PolicyKind::Partial) {
        let find = |kind| groups.iter().find(|g| g.policy == kind && g.same_setting(partial));
        let (coverage_ratio, coverage_win_fraction) =
            find(PolicyKind::Always).map_or((None, None), |always| coverage_comparison(partial, always));
        let saving = find(PolicyKind::Never).and_then(|never| energy_saving(partial, never, flr_limit));
        out.push(Comparison {
            bandwidth: partial.bandwidth,
            loc_capability_scale: partial.loc_capability_scale,
            sigma: partial.sigma,
            window: partial.window,
            coverage_ratio,
            coverage_win_fraction,
            max_energy_saving: saving.map(|s| s.1),
            max_energy_saving_distance: saving.map(|s| s.0),
        });
    }
    out
}
