//! Benchmarking: the fixed-timeout and time-to-solution protocols, case
//! parameter sweeps and record persistence.
//!
//! Every run produces one JSON record on disk; aggregates are always computed
//! from the persisted records, never from in-memory state.

mod metrics;
mod runner;
mod sweeps;

pub use metrics::{relative_error, repetitions_for_99, time_to_solution};
pub use runner::{
    compute_references, default_workers, timeout_benchmark, tts_benchmark, ReferenceSolution,
    ReferenceStore, RunnerOptions, SolverSpec, TtsProtocol,
};
pub use sweeps::{
    find_rho_for_fee_fraction, rho_sweep, sa_hyperparameter_sweep, RhoSweepRow, SaSweepOutcome,
    SaSweepRow,
};

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which benchmarking protocol produced a record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricKind {
    Timeout,
    Tts,
}

impl MetricKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            MetricKind::Timeout => "timeout",
            MetricKind::Tts => "tts",
        }
    }
}

/// Per-draw epsilon lists are truncated to this many entries on disk; the
/// `hits`/`draws` counters always carry the full counts.
pub const MAX_STORED_EPSILONS: usize = 10_000;

/// One benchmark run: a single (case, seed, solver) execution under one
/// protocol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRecord {
    pub case: String,
    pub seed: u64,
    pub solver: String,
    pub metric: MetricKind,
    /// Timeout protocol: the single best relative error of the run.
    /// TTS protocol: per-draw relative errors (possibly truncated).
    pub epsilons: Vec<f64>,
    pub best_epsilon: Option<f64>,
    /// Time to solution in seconds; absent when fewer than the minimum
    /// number of acceptable samples was found.
    pub tts_seconds: Option<f64>,
    /// Measured per-draw success probability (TTS protocol).
    pub p_eps: Option<f64>,
    pub hits: u64,
    pub draws: u64,
    pub samples_found: u64,
    pub wall_time_s: f64,
}

impl BenchRecord {
    pub fn file_name(&self) -> String {
        format!(
            "{}-s{}-{}-{}.json",
            self.case,
            self.seed,
            self.solver,
            self.metric.as_str()
        )
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let path = dir.join(self.file_name());
        std::fs::write(path, serde_json::to_string(self)? + "\n")?;
        Ok(())
    }
}

/// Loads every `*.json` benchmark record under `dir` (non-recursive).
pub fn load_records(dir: &Path) -> Result<Vec<BenchRecord>> {
    let mut records = Vec::new();
    let mut entries: Vec<_> = std::fs::read_dir(dir)?
        .collect::<std::io::Result<Vec<_>>>()?
        .into_iter()
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .collect();
    entries.sort();
    for path in entries {
        let text = std::fs::read_to_string(&path)?;
        match serde_json::from_str::<BenchRecord>(&text) {
            Ok(record) => records.push(record),
            Err(_) => continue, // unrelated JSON (references etc.)
        }
    }
    Ok(records)
}

/// Linear-interpolation quantile of an unsorted sample. `q` in `[0, 1]`.
pub fn quantile(values: &[f64], q: f64) -> f64 {
    assert!((0.0..=1.0).contains(&q));
    assert!(!values.is_empty());
    let mut sorted: Vec<f64> = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let position = q * (sorted.len() - 1) as f64;
    let low = position.floor() as usize;
    let high = position.ceil() as usize;
    if low == high {
        sorted[low]
    } else {
        let t = position - low as f64;
        sorted[low] * (1.0 - t) + sorted[high] * t
    }
}

pub fn median(values: &[f64]) -> f64 {
    quantile(values, 0.5)
}

/// Per-(case, solver) aggregate mirroring the benchmark figures: median and
/// the 25-75% interval, plus the count of runs within the 5% error bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub case: String,
    pub solver: String,
    pub metric: MetricKind,
    /// Records that contributed a value (TTS: records with a TTS present).
    pub count: usize,
    pub median: f64,
    pub q25: f64,
    pub q75: f64,
    /// Timeout protocol: runs with best epsilon <= 5%.
    pub within_5_percent: usize,
}

/// Groups persisted records by (case, solver, metric) and aggregates the
/// protocol value (best epsilon for timeout runs, TTS seconds for TTS runs).
pub fn aggregate_records(records: &[BenchRecord]) -> Vec<AggregateRow> {
    use std::collections::BTreeMap;
    let mut groups: BTreeMap<(String, String, MetricKind), Vec<&BenchRecord>> = BTreeMap::new();
    for record in records {
        groups
            .entry((
                record.case.clone(),
                record.solver.clone(),
                record.metric,
            ))
            .or_default()
            .push(record);
    }
    let mut rows = Vec::new();
    for ((case, solver, metric), group) in groups {
        let values: Vec<f64> = match metric {
            MetricKind::Timeout => group.iter().filter_map(|r| r.best_epsilon).collect(),
            MetricKind::Tts => group.iter().filter_map(|r| r.tts_seconds).collect(),
        };
        let within = group
            .iter()
            .filter(|r| r.best_epsilon.is_some_and(|e| e <= 0.05))
            .count();
        if values.is_empty() {
            rows.push(AggregateRow {
                case,
                solver,
                metric,
                count: 0,
                median: f64::NAN,
                q25: f64::NAN,
                q75: f64::NAN,
                within_5_percent: within,
            });
            continue;
        }
        rows.push(AggregateRow {
            case,
            solver,
            metric,
            count: values.len(),
            median: median(&values),
            q25: quantile(&values, 0.25),
            q75: quantile(&values, 0.75),
            within_5_percent: within,
        });
    }
    rows
}

/// Convenience: load + aggregate. Errors on an empty record directory.
pub fn aggregate_dir(dir: &Path) -> Result<Vec<AggregateRow>> {
    let records = load_records(dir)?;
    if records.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(aggregate_records(&records))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(case: &str, seed: u64, solver: &str, eps: f64) -> BenchRecord {
        BenchRecord {
            case: case.into(),
            seed,
            solver: solver.into(),
            metric: MetricKind::Timeout,
            epsilons: vec![eps],
            best_epsilon: Some(eps),
            tts_seconds: None,
            p_eps: None,
            hits: 0,
            draws: 0,
            samples_found: 1,
            wall_time_s: 0.5,
        }
    }

    #[test]
    fn quantiles_interpolate_linearly() {
        let values = [4.0, 1.0, 3.0, 2.0];
        assert_eq!(median(&values), 2.5);
        assert_eq!(quantile(&values, 0.0), 1.0);
        assert_eq!(quantile(&values, 1.0), 4.0);
        assert!((quantile(&values, 0.25) - 1.75).abs() < 1e-12);
        assert!((quantile(&values, 0.75) - 3.25).abs() < 1e-12);
        assert_eq!(median(&[7.0]), 7.0);
    }

    #[test]
    fn aggregation_groups_by_case_and_solver() {
        let records = vec![
            record("case9", 0, "sa", 0.0),
            record("case9", 1, "sa", 0.10),
            record("case9", 0, "tabu", 0.02),
            record("case14", 0, "sa", 0.01),
        ];
        let rows = aggregate_records(&records);
        assert_eq!(rows.len(), 3);
        let sa9 = rows
            .iter()
            .find(|r| r.case == "case9" && r.solver == "sa")
            .unwrap();
        assert_eq!(sa9.count, 2);
        assert!((sa9.median - 0.05).abs() < 1e-12);
        assert_eq!(sa9.within_5_percent, 1);
    }

    #[test]
    fn records_round_trip_through_directory() {
        let dir = tempfile::tempdir().unwrap();
        let a = record("case9", 3, "sa", 0.07);
        let b = record("case14", 1, "exact", 0.0);
        a.save(dir.path()).unwrap();
        b.save(dir.path()).unwrap();
        let loaded = load_records(dir.path()).unwrap();
        assert_eq!(loaded.len(), 2);
        assert!(loaded.contains(&a));
        assert!(loaded.contains(&b));

        let rows = aggregate_dir(dir.path()).unwrap();
        assert_eq!(rows.len(), 2);
    }

    #[test]
    fn empty_directory_is_empty_input() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(aggregate_dir(dir.path()), Err(Error::EmptyInput)));
    }
}
