//! Per-road metric reports and multi-report comparison tables.

use std::io::Write;

use critgen_core::agent::Ablation;
use critgen_core::world::LayoutId;
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};
use crate::stats::two_proportion_z;
use crate::trace::TerminalCause;

/// What a finished episode contributes to the metrics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSummary {
    pub episode: usize,
    pub layout: LayoutId,
    pub seed: u64,
    pub terminal: TerminalCause,
    pub steps: usize,
    pub total_reward: f64,
    pub ttc: Option<f64>,
    pub max_proc: f64,
}

impl EpisodeSummary {
    pub fn counted_collision(&self) -> bool {
        self.terminal == TerminalCause::Collision
    }

    pub fn mean_reward(&self) -> f64 {
        if self.steps == 0 {
            0.0
        } else {
            self.total_reward / self.steps as f64
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoadMetrics {
    pub layout: LayoutId,
    pub episodes: usize,
    pub collisions: usize,
    pub excluded_collisions: usize,
    pub numeric_failures: usize,
    /// Mean seconds to collision over collided episodes.
    pub mean_ttc: Option<f64>,
    pub mean_reward: f64,
    pub mean_steps: f64,
}

impl RoadMetrics {
    pub fn collision_rate(&self) -> f64 {
        self.collisions as f64 / self.episodes as f64
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub policy: String,
    pub ablation: Ablation,
    pub seed: u64,
    pub roads: Vec<RoadMetrics>,
}

fn mean(xs: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| sum / n as f64)
}

impl MetricsReport {
    /// Reduces episode summaries into per-road rows, in first-seen road order.
    pub fn from_summaries(policy: &str, ablation: Ablation, seed: u64, summaries: &[EpisodeSummary]) -> Self {
        let mut layouts: Vec<LayoutId> = Vec::new();
        for s in summaries {
            if !layouts.contains(&s.layout) {
                layouts.push(s.layout);
            }
        }
        let roads = layouts
            .into_iter()
            .map(|layout| {
                let rows: Vec<&EpisodeSummary> = summaries.iter().filter(|s| s.layout == layout).collect();
                let count = |t: TerminalCause| rows.iter().filter(|s| s.terminal == t).count();
                RoadMetrics {
                    layout,
                    episodes: rows.len(),
                    collisions: count(TerminalCause::Collision),
                    excluded_collisions: count(TerminalCause::UnavoidableCollisionExcluded),
                    numeric_failures: count(TerminalCause::NumericFailure),
                    mean_ttc: mean(rows.iter().filter(|s| s.counted_collision()).filter_map(|s| s.ttc)),
                    mean_reward: mean(rows.iter().map(|s| s.mean_reward())).unwrap_or(0.0),
                    mean_steps: mean(rows.iter().map(|s| s.steps as f64)).unwrap_or(0.0),
                }
            })
            .collect();
        MetricsReport {
            policy: policy.to_string(),
            ablation,
            seed,
            roads,
        }
    }

    pub fn total_collisions(&self) -> usize {
        self.roads.iter().map(|r| r.collisions).sum()
    }

    pub fn total_episodes(&self) -> usize {
        self.roads.iter().map(|r| r.episodes).sum()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let r: MetricsReport = serde_json::from_str(text).map_err(|e| HarnessError::Schema {
            line: e.line(),
            message: e.to_string(),
        })?;
        for road in &r.roads {
            if road.collisions > road.episodes {
                return Err(HarnessError::Validation(format!("{}: collisions exceed episodes", road.layout)));
            }
        }
        Ok(r)
    }

    /// One CSV row per road: `policy, ablation, layout, episodes, collisions,
    /// collision_rate, excluded_collisions, numeric_failures, mean_ttc,
    /// mean_reward, mean_steps`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(METRICS_COLUMNS)?;
        for r in &self.roads {
            out.write_record([
                self.policy.clone(),
                self.ablation.to_string(),
                r.layout.to_string(),
                r.episodes.to_string(),
                r.collisions.to_string(),
                format!("{:.4}", r.collision_rate()),
                r.excluded_collisions.to_string(),
                r.numeric_failures.to_string(),
                r.mean_ttc.map(|t| format!("{t:.2}")).unwrap_or_default(),
                format!("{:.4}", r.mean_reward),
                format!("{:.2}", r.mean_steps),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

pub const METRICS_COLUMNS: [&str; 11] = [
    "policy",
    "ablation",
    "layout",
    "episodes",
    "collisions",
    "collision_rate",
    "excluded_collisions",
    "numeric_failures",
    "mean_ttc",
    "mean_reward",
    "mean_steps",
];

pub const COMPARISON_COLUMNS: [&str; 11] = [
    "layout",
    "label",
    "episodes",
    "collisions",
    "mean_ttc",
    "baseline",
    "baseline_collisions",
    "baseline_mean_ttc",
    "collision_ratio",
    "p_one_sided",
    "p_two_sided",
];

/// One report compared against the baseline on one road.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub layout: LayoutId,
    pub label: String,
    pub episodes: usize,
    pub collisions: usize,
    pub mean_ttc: Option<f64>,
    pub baseline: String,
    pub baseline_collisions: usize,
    pub baseline_mean_ttc: Option<f64>,
    /// `collisions / baseline_collisions`; `None` when the baseline has none.
    pub collision_ratio: Option<f64>,
    /// Two-proportion test of this report's rate exceeding the baseline's.
    pub p_one_sided: f64,
    pub p_two_sided: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub baseline: String,
    pub rows: Vec<ComparisonRow>,
}

/// Label used for a report in comparison tables.
pub fn report_label(r: &MetricsReport) -> String {
    if r.ablation == Ablation::Full {
        r.policy.clone()
    } else {
        format!("{}[{}]", r.policy, r.ablation)
    }
}

/// Aligns reports per road against the first one, the baseline. All reports
/// must cover the same roads.
pub fn compare(reports: &[MetricsReport]) -> Result<ComparisonTable> {
    if reports.len() < 2 {
        return Err(HarnessError::Validation("compare needs at least two reports".into()));
    }
    let base = &reports[0];
    let mut base_roads: Vec<LayoutId> = base.roads.iter().map(|r| r.layout).collect();
    base_roads.sort();
    for r in &reports[1..] {
        let mut roads: Vec<LayoutId> = r.roads.iter().map(|x| x.layout).collect();
        roads.sort();
        if roads != base_roads {
            return Err(HarnessError::Validation(format!(
                "report '{}' covers roads {roads:?}, baseline covers {base_roads:?}",
                report_label(r)
            )));
        }
    }
    let mut rows = Vec::new();
    for b in &base.roads {
        for r in &reports[1..] {
            let m = r.roads.iter().find(|x| x.layout == b.layout).expect("roads checked above");
            let test = two_proportion_z(m.collisions, m.episodes, b.collisions, b.episodes);
            rows.push(ComparisonRow {
                layout: b.layout,
                label: report_label(r),
                episodes: m.episodes,
                collisions: m.collisions,
                mean_ttc: m.mean_ttc,
                baseline: report_label(base),
                baseline_collisions: b.collisions,
                baseline_mean_ttc: b.mean_ttc,
                collision_ratio: (b.collisions > 0).then(|| m.collisions as f64 / b.collisions as f64),
                p_one_sided: test.p_one_sided,
                p_two_sided: test.p_two_sided,
            });
        }
    }
    Ok(ComparisonTable {
        baseline: report_label(base),
        rows,
    })
}

impl ComparisonTable {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("table serializes")
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let opt = |x: Option<f64>, prec: usize| x.map(|v| format!("{v:.prec$}")).unwrap_or_default();
        let mut out = csv::Writer::from_writer(w);
        out.write_record(COMPARISON_COLUMNS)?;
        for r in &self.rows {
            out.write_record([
                r.layout.to_string(),
                r.label.clone(),
                r.episodes.to_string(),
                r.collisions.to_string(),
                opt(r.mean_ttc, 2),
                r.baseline.clone(),
                r.baseline_collisions.to_string(),
                opt(r.baseline_mean_ttc, 2),
                opt(r.collision_ratio, 4),
                format!("{:.6}", r.p_one_sided),
                format!("{:.6}", r.p_two_sided),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}
