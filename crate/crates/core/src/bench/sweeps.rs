//! Case-study parameter sweeps: grid fee (rho) sweeps with settlement
//! aggregates, and annealer hyperparameter sweeps over sweep counts and
//! annealing schedules.

use std::time::Duration;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::runner::{prepare, Prepared, ReferenceStore, RunnerOptions, SolverSpec, TtsProtocol};
use super::{median, quantile};
use crate::error::Result;
use crate::instance::{derive_seed, generate, CaseSpec};
use crate::matching::build_qubo_with;
use crate::matching::Allocation;
use crate::settlement::{PeerRole, Settlement, TariffScheme};
use crate::solvers::{exact_solve_with, ConvexSplit, ExactConfig};

/// One grid point of a rho sweep: solved assignment, settled and aggregated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RhoSweepRow {
    pub case: String,
    pub seed: u64,
    pub rho: f64,
    pub alpha: f64,
    pub p2p_fees_ct: f64,
    pub residual_fees_ct: f64,
    pub total_dso_fees_ct: f64,
    pub baseline_fees_ct: f64,
    pub p2p_ratio: f64,
    pub mean_consumer_tariff_ct_per_kwh: f64,
    pub mean_producer_tariff_ct_per_kwh: f64,
    pub proven_optimal: bool,
}

/// Solves and settles every `(rho, alpha, seed)` grid point with the exact
/// solver under `budget_per_point`. Pair flows are computed once per seed
/// and reused across the whole grid (they do not depend on rho or alpha).
pub fn rho_sweep(
    case: &CaseSpec,
    seeds: &[u64],
    alphas: &[f64],
    rho_grid: &[f64],
    budget_per_point: Option<Duration>,
    tariffs: &TariffScheme,
    options: &RunnerOptions,
) -> Result<Vec<RhoSweepRow>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(options.workers.max(1))
        .build()
        .expect("worker pool");

    let per_seed: Vec<Result<Vec<RhoSweepRow>>> = pool.install(|| {
        seeds
            .par_iter()
            .map(|&seed| -> Result<Vec<RhoSweepRow>> {
                // rho is irrelevant for topology and loads; generate once.
                let base = generate(case, seed, crate::instance::DEFAULT_ALPHA)?;
                let pf = crate::matching::pair_flows(&base)?;
                let mut rows = Vec::new();
                for &alpha in alphas {
                    for &rho in rho_grid {
                        let instance = base.with_parameters(rho, alpha)?;
                        let allocation = Allocation::compute(&instance, &pf)?;
                        let qubo = build_qubo_with(&instance, &pf, &allocation)?;
                        let split = ConvexSplit::from_pair_flows(&instance, &pf);
                        let cfg = ExactConfig {
                            max_nodes: if options.deterministic {
                                Some(options.deterministic_max_nodes)
                            } else {
                                None
                            },
                            ..ExactConfig::default()
                        };
                        let budget = if options.deterministic {
                            None
                        } else {
                            budget_per_point
                        };
                        let result = exact_solve_with(&qubo, Some(&split), budget, &cfg);
                        let settlement = Settlement::compute(
                            &result.best.x,
                            &instance,
                            pf.trades(),
                            &allocation.trade_costs,
                            tariffs,
                        )?;
                        rows.push(row_from_settlement(
                            case,
                            seed,
                            rho,
                            alpha,
                            &settlement,
                            result.proven_optimal,
                        ));
                    }
                }
                Ok(rows)
            })
            .collect()
    });
    let mut rows = Vec::new();
    for seed_rows in per_seed {
        rows.extend(seed_rows?);
    }
    Ok(rows)
}

fn row_from_settlement(
    case: &CaseSpec,
    seed: u64,
    rho: f64,
    alpha: f64,
    settlement: &Settlement,
    proven_optimal: bool,
) -> RhoSweepRow {
    let mean_tariff = |role: PeerRole| -> f64 {
        let tariffs: Vec<f64> = settlement
            .peers
            .iter()
            .filter(|p| p.role == role)
            .map(|p| p.effective_tariff_ct_per_kwh)
            .collect();
        if tariffs.is_empty() {
            f64::NAN
        } else {
            tariffs.iter().sum::<f64>() / tariffs.len() as f64
        }
    };
    let community = &settlement.community;
    RhoSweepRow {
        case: case.name.clone(),
        seed,
        rho,
        alpha,
        p2p_fees_ct: community.p2p_fees_ct,
        residual_fees_ct: community.residual_fees_ct,
        total_dso_fees_ct: community.total_dso_fees_ct,
        baseline_fees_ct: community.baseline_fees_ct,
        p2p_ratio: community.p2p_ratio,
        mean_consumer_tariff_ct_per_kwh: mean_tariff(PeerRole::Consumer),
        mean_producer_tariff_ct_per_kwh: mean_tariff(PeerRole::Producer),
        proven_optimal,
    }
}

/// Locates the grid fee at which total DSO fees reach `fraction` of the
/// baseline, by linear interpolation between adjacent grid points of one
/// `(seed, alpha)` series. `None` when the series never crosses.
pub fn find_rho_for_fee_fraction(rows: &[RhoSweepRow], fraction: f64) -> Option<f64> {
    let mut series: Vec<&RhoSweepRow> = rows.iter().collect();
    series.sort_by(|a, b| a.rho.total_cmp(&b.rho));
    for pair in series.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let fa = a.total_dso_fees_ct / a.baseline_fees_ct - fraction;
        let fb = b.total_dso_fees_ct / b.baseline_fees_ct - fraction;
        if fa == 0.0 {
            return Some(a.rho);
        }
        if fa * fb < 0.0 {
            let t = fa / (fa - fb);
            return Some(a.rho + t * (b.rho - a.rho));
        }
    }
    series.last().and_then(|last| {
        (last.total_dso_fees_ct / last.baseline_fees_ct == fraction).then_some(last.rho)
    })
}

/// One cell of the annealer hyperparameter sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaSweepRow {
    pub case: String,
    /// `sweeps` for the sweep-count axis, `schedule` for (beta_start,
    /// beta_end) cells.
    pub grid: String,
    pub num_sweeps: usize,
    pub beta_start: f64,
    pub beta_end: f64,
    pub tts_median_s: Option<f64>,
    pub tts_q75_s: Option<f64>,
    /// Instances that produced a valid TTS estimate.
    pub instances_with_tts: usize,
    pub instances_total: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SaSweepOutcome {
    pub rows: Vec<SaSweepRow>,
    /// Soft findings, e.g. a sweep-count optimum sitting on a grid endpoint.
    pub warnings: Vec<String>,
}

/// Sweeps annealer hyperparameters with the TTS protocol: one row per sweep
/// count (at the adopted schedule) and one per schedule cell (at 100 sweeps,
/// where the schedule heatmaps live).
pub fn sa_hyperparameter_sweep(
    case: &CaseSpec,
    seeds: &[u64],
    sweep_grid: &[usize],
    schedule_grid: &[(f64, f64)],
    refs: &ReferenceStore,
    protocol: &TtsProtocol,
    options: &RunnerOptions,
) -> Result<SaSweepOutcome> {
    for &seed in seeds {
        refs.require(&case.name, seed)?;
    }

    let mut cells: Vec<(String, usize, f64, f64)> = Vec::new();
    for &sweeps in sweep_grid {
        cells.push(("sweeps".into(), sweeps, 0.2, 1000.0));
    }
    for &(beta_start, beta_end) in schedule_grid {
        cells.push(("schedule".into(), 100, beta_start, beta_end));
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(options.workers.max(1))
        .build()
        .expect("worker pool");

    // Preparation is shared by every cell of one instance.
    let prepared: Vec<(u64, Prepared, f64)> = seeds
        .iter()
        .map(|&seed| -> Result<(u64, Prepared, f64)> {
            let p = prepare(case, seed, options.alpha)?;
            let reference = refs.require(&case.name, seed)?;
            Ok((seed, p, reference.cost_ct))
        })
        .collect::<Result<Vec<_>>>()?;

    let rows: Vec<Result<SaSweepRow>> = pool.install(|| {
        cells
            .par_iter()
            .map(|(grid, sweeps, beta_start, beta_end)| -> Result<SaSweepRow> {
                let solver = SolverSpec::Sa {
                    sweeps: Some(*sweeps),
                    beta_start: *beta_start,
                    beta_end: *beta_end,
                };
                let mut tts_values = Vec::new();
                for (seed, prepared, reference_cost) in &prepared {
                    let record = super::runner::tts_single(
                        case,
                        derive_seed(*seed, &format!("sa-sweep/{grid}/{sweeps}/{beta_start}")),
                        &solver,
                        prepared,
                        *reference_cost,
                        protocol,
                        options,
                    )?;
                    if let Some(tts) = record.tts_seconds {
                        tts_values.push(tts);
                    }
                }
                Ok(SaSweepRow {
                    case: case.name.clone(),
                    grid: grid.clone(),
                    num_sweeps: *sweeps,
                    beta_start: *beta_start,
                    beta_end: *beta_end,
                    tts_median_s: (!tts_values.is_empty()).then(|| median(&tts_values)),
                    tts_q75_s: (!tts_values.is_empty()).then(|| quantile(&tts_values, 0.75)),
                    instances_with_tts: tts_values.len(),
                    instances_total: seeds.len(),
                })
            })
            .collect()
    });
    let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;

    let mut warnings = Vec::new();
    let sweep_rows: Vec<&SaSweepRow> = rows.iter().filter(|r| r.grid == "sweeps").collect();
    if sweep_rows.len() >= 3 {
        let best = sweep_rows
            .iter()
            .enumerate()
            .filter_map(|(i, r)| r.tts_median_s.map(|t| (i, t)))
            .min_by(|a, b| a.1.total_cmp(&b.1));
        if let Some((index, _)) = best {
            if index == 0 || index == sweep_rows.len() - 1 {
                warnings.push(format!(
                    "sweep-count TTS optimum sits on the grid endpoint ({} sweeps); \
                     the sweet spot may lie outside the grid",
                    sweep_rows[index].num_sweeps
                ));
            }
        }
    }
    Ok(SaSweepOutcome { rows, warnings })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::compute_references;
    use crate::instance::case_by_name;

    fn options() -> RunnerOptions {
        RunnerOptions {
            workers: 2,
            deterministic: true,
            deterministic_max_draws: 60,
            ..RunnerOptions::default()
        }
    }

    #[test]
    fn zero_rho_collects_no_p2p_fees() {
        let case = case_by_name("case9").unwrap();
        let rows = rho_sweep(
            &case,
            &[0],
            &[10.0, 100.0],
            &[0.0],
            None,
            &TariffScheme::default(),
            &options(),
        )
        .unwrap();
        assert_eq!(rows.len(), 2);
        for row in &rows {
            assert_eq!(row.p2p_fees_ct, 0.0);
            assert!(row.proven_optimal);
        }
    }

    #[test]
    fn sweep_covers_the_whole_grid() {
        let case = case_by_name("case9").unwrap();
        let rows = rho_sweep(
            &case,
            &[0, 1],
            &[100.0],
            &[0.0, 20.0],
            None,
            &TariffScheme::default(),
            &options(),
        )
        .unwrap();
        assert_eq!(rows.len(), 4);
    }

    #[test]
    fn very_large_rho_with_small_alpha_recovers_baseline() {
        let case = case_by_name("case9").unwrap();
        let rows = rho_sweep(
            &case,
            &[0],
            &[10.0],
            &[1e6],
            None,
            &TariffScheme::default(),
            &options(),
        )
        .unwrap();
        let row = &rows[0];
        assert!(row.proven_optimal);
        assert_eq!(row.p2p_ratio, 0.0);
        assert!((row.total_dso_fees_ct - row.baseline_fees_ct).abs() <= 1e-9);
    }

    #[test]
    fn fee_fraction_crossing_interpolates() {
        let mk = |rho: f64, total: f64| RhoSweepRow {
            case: "x".into(),
            seed: 0,
            rho,
            alpha: 1.0,
            p2p_fees_ct: 0.0,
            residual_fees_ct: 0.0,
            total_dso_fees_ct: total,
            baseline_fees_ct: 100.0,
            p2p_ratio: 0.0,
            mean_consumer_tariff_ct_per_kwh: 0.0,
            mean_producer_tariff_ct_per_kwh: 0.0,
            proven_optimal: true,
        };
        let rows = vec![mk(0.0, 10.0), mk(10.0, 70.0), mk(20.0, 90.0)];
        let rho = find_rho_for_fee_fraction(&rows, 0.8).unwrap();
        assert!((rho - 15.0).abs() < 1e-9);
        assert!(find_rho_for_fee_fraction(&rows, 0.95).is_none());
    }

    #[test]
    fn sa_sweep_emits_one_row_per_cell() {
        let case = case_by_name("case9").unwrap();
        let opts = options();
        let refs = compute_references(&[case.clone()], &[0, 1], &opts, None).unwrap();
        let outcome = sa_hyperparameter_sweep(
            &case,
            &[0, 1],
            &[30, 100],
            &[(0.2, 1000.0)],
            &refs,
            &TtsProtocol::default(),
            &opts,
        )
        .unwrap();
        assert_eq!(outcome.rows.len(), 3);
        assert_eq!(
            outcome.rows.iter().filter(|r| r.grid == "sweeps").count(),
            2
        );
        assert_eq!(
            outcome.rows.iter().filter(|r| r.grid == "schedule").count(),
            1
        );
        for row in &outcome.rows {
            assert_eq!(row.instances_total, 2);
        }
    }
}
