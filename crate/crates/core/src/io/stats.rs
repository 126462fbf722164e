//! JSON run reports. The schema is versioned; see the README for the field
//! reference.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::FormatError;
use crate::builder::{BuildStats, PowerDiagram};
use crate::bvh::TraversalStats;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct TraversalReport {
    pub nodes_visited: u64,
    pub leaves_visited: u64,
    pub clip_calls: u64,
    pub clip_unchanged: u64,
    pub stack_high_water: u64,
}

impl From<TraversalStats> for TraversalReport {
    fn from(t: TraversalStats) -> Self {
        Self {
            nodes_visited: t.nodes_visited,
            leaves_visited: t.leaves_visited,
            clip_calls: t.clip_calls,
            clip_unchanged: t.clip_unchanged,
            stack_high_water: t.stack_high_water,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct TimingReport {
    /// Wall-clock seconds per completed timed run.
    pub runs_seconds: Vec<f64>,
    pub mean_seconds: Option<f64>,
    pub median_seconds: Option<f64>,
    pub min_seconds: Option<f64>,
    /// Index-build fraction of the total, averaged over completed runs.
    pub index_fraction: Option<f64>,
}

impl TimingReport {
    pub fn from_runs(runs: &[f64], index_fractions: &[f64]) -> Self {
        if runs.is_empty() {
            return Self {
                runs_seconds: Vec::new(),
                mean_seconds: None,
                median_seconds: None,
                min_seconds: None,
                index_fraction: None,
            };
        }
        let mut sorted = runs.to_vec();
        sorted.sort_by(f64::total_cmp);
        let mean = runs.iter().sum::<f64>() / runs.len() as f64;
        let median = sorted[(sorted.len() - 1) / 2];
        let min = sorted[0];
        let frac = if index_fractions.is_empty() {
            None
        } else {
            Some(index_fractions.iter().sum::<f64>() / index_fractions.len() as f64)
        };
        Self {
            runs_seconds: runs.to_vec(),
            mean_seconds: Some(mean),
            median_seconds: Some(median),
            min_seconds: Some(min),
            index_fraction: frac,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct MismatchReport {
    pub missing_pairs: usize,
    pub extra_pairs: usize,
    pub reference_pairs: usize,
    pub mismatch_rate: f64,
}

/// Echo of the build configuration a run used.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct BenchConfigReport {
    pub precision: String,
    pub leaf_size: usize,
    pub warm_start: bool,
    pub warm_start_k: usize,
    pub box_margin: f64,
    pub culling: String,
    pub traversal: String,
    pub threads: usize,
}

/// Report of a single command invocation (`build`, `verify`, `sweep`).
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RunReport {
    pub schema_version: u32,
    pub command: String,
    pub machine: String,
    pub site_count: usize,
    pub config: BenchConfigReport,
    pub timing: TimingReport,
    pub traversal: TraversalReport,
    pub empty_ratio: f64,
    pub degraded_cells: u64,
    pub asymmetric_pairs: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mismatch: Option<MismatchReport>,
}

impl RunReport {
    pub fn from_build(
        command: &str,
        machine: &str,
        config: BenchConfigReport,
        diagram: &PowerDiagram,
        empty_ratio: f64,
    ) -> Self {
        let s: &BuildStats = &diagram.stats;
        Self {
            schema_version: SCHEMA_VERSION,
            command: command.to_string(),
            machine: machine.to_string(),
            site_count: diagram.site_count,
            config,
            timing: TimingReport::from_runs(
                &[s.total_seconds],
                &[if s.total_seconds > 0.0 {
                    s.index_seconds / s.total_seconds
                } else {
                    0.0
                }],
            ),
            traversal: s.traversal.into(),
            empty_ratio,
            degraded_cells: s.degraded_cells,
            asymmetric_pairs: s.asymmetric_pairs,
            mismatch: None,
        }
    }
}

/// One timed run in a benchmark: seconds, or did-not-finish.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum RunOutcome {
    Completed {
        seconds: f64,
        index_seconds: f64,
        cells_seconds: f64,
    },
    Dnf,
}

/// Full benchmark report: one entry per configuration cell.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct BenchReport {
    pub schema_version: u32,
    pub machine: String,
    pub site_count: usize,
    pub warmup_runs: usize,
    pub timed_runs: usize,
    pub timeout_seconds: f64,
    pub configs: Vec<BenchConfigEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct BenchConfigEntry {
    pub config: BenchConfigReport,
    pub outcomes: Vec<RunOutcome>,
    pub timing: TimingReport,
    pub traversal: TraversalReport,
    pub dnf: bool,
}

pub fn write_stats_json<T: Serialize>(path: &Path, report: &T) -> Result<(), FormatError> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, report)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}
