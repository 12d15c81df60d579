//! Report emission: long-format summary CSV, per-group aggregates and SVG
//! plots rendered from persisted benchmark records.

use std::path::Path;

use flowmatch_core::bench::{
    aggregate_records, AggregateRow, BenchRecord, MetricKind, RhoSweepRow, SaSweepRow,
};
use flowmatch_core::Result;

use crate::svg;

/// Long-format summary: `case,solver,seed,metric,value`, one row per record
/// value (timeout runs contribute `epsilon`, TTS runs `tts_s` and `p_eps`).
pub fn summary_csv(records: &[BenchRecord]) -> String {
    let mut out = String::from("case,solver,seed,metric,value\n");
    for r in records {
        match r.metric {
            MetricKind::Timeout => {
                if let Some(eps) = r.best_epsilon {
                    out.push_str(&format!(
                        "{},{},{},epsilon,{}\n",
                        r.case, r.solver, r.seed, eps
                    ));
                }
            }
            MetricKind::Tts => {
                let tts = r
                    .tts_seconds
                    .map(|t| t.to_string())
                    .unwrap_or_default();
                out.push_str(&format!("{},{},{},tts_s,{tts}\n", r.case, r.solver, r.seed));
                if let Some(p) = r.p_eps {
                    out.push_str(&format!("{},{},{},p_eps,{p}\n", r.case, r.solver, r.seed));
                }
            }
        }
    }
    out
}

pub fn aggregates_csv(rows: &[AggregateRow]) -> String {
    let mut out = String::from("case,solver,metric,count,median,q25,q75,within_5_percent\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.case,
            r.solver,
            r.metric.as_str(),
            r.count,
            r.median,
            r.q25,
            r.q75,
            r.within_5_percent
        ));
    }
    out
}

/// Parses a summary CSV back into `(case, solver, seed, metric, value)` rows;
/// used to re-derive aggregates from the exported file.
#[cfg_attr(not(test), allow(dead_code))]
pub fn parse_summary_csv(text: &str) -> Vec<(String, String, u64, String, Option<f64>)> {
    text.lines()
        .skip(1)
        .filter(|line| !line.is_empty())
        .filter_map(|line| {
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 5 {
                return None;
            }
            let value = if fields[4].is_empty() {
                None
            } else {
                fields[4].parse().ok()
            };
            Some((
                fields[0].to_string(),
                fields[1].to_string(),
                fields[2].parse().ok()?,
                fields[3].to_string(),
                value,
            ))
        })
        .collect()
}

/// Writes the requested report artifacts for a set of records.
pub fn emit(
    records: &[BenchRecord],
    formats: &[String],
    out_dir: &Path,
) -> Result<Vec<std::path::PathBuf>> {
    std::fs::create_dir_all(out_dir)?;
    let aggregates = aggregate_records(records);
    let mut written = Vec::new();
    for format in formats {
        match format.as_str() {
            "csv" => {
                let summary = out_dir.join("summary.csv");
                std::fs::write(&summary, summary_csv(records))?;
                written.push(summary);
                let agg = out_dir.join("aggregates.csv");
                std::fs::write(&agg, aggregates_csv(&aggregates))?;
                written.push(agg);
            }
            "json" => {
                let path = out_dir.join("aggregates.json");
                std::fs::write(&path, serde_json::to_string_pretty(&aggregates)? + "\n")?;
                written.push(path);
            }
            "svg" => {
                written.extend(plot_aggregates(&aggregates, out_dir)?);
            }
            other => {
                return Err(flowmatch_core::Error::InvalidParameter(format!(
                    "unknown report format `{other}`"
                )))
            }
        }
    }
    Ok(written)
}

/// One chart per metric: median value vs case, one series per solver, with
/// q25/q75 whiskers encoded as extra points.
fn plot_aggregates(rows: &[AggregateRow], out_dir: &Path) -> Result<Vec<std::path::PathBuf>> {
    let mut written = Vec::new();
    for metric in [MetricKind::Timeout, MetricKind::Tts] {
        let subset: Vec<&AggregateRow> = rows
            .iter()
            .filter(|r| r.metric == metric && r.count > 0)
            .collect();
        if subset.is_empty() {
            continue;
        }
        let mut cases: Vec<String> = subset.iter().map(|r| r.case.clone()).collect();
        cases.sort();
        cases.dedup();
        let mut solvers: Vec<String> = subset.iter().map(|r| r.solver.clone()).collect();
        solvers.sort();
        solvers.dedup();
        let mut series = Vec::new();
        for solver in &solvers {
            let points: Vec<(f64, f64)> = cases
                .iter()
                .enumerate()
                .filter_map(|(i, case)| {
                    subset
                        .iter()
                        .find(|r| &r.case == case && &r.solver == solver)
                        .map(|r| (i as f64, r.median))
                })
                .collect();
            series.push((solver.clone(), points));
        }
        let (title, y_label, stem) = match metric {
            MetricKind::Timeout => (
                "Median relative error within the case timeout",
                "relative error",
                "timeout_epsilon",
            ),
            MetricKind::Tts => ("Median time to solution", "TTS [s]", "tts"),
        };
        let chart = svg::line_chart(
            title,
            &format!("case index ({})", cases.join(", ")),
            y_label,
            &series,
        );
        let path = out_dir.join(format!("{stem}.svg"));
        std::fs::write(&path, chart)?;
        written.push(path);
    }
    Ok(written)
}

pub fn rho_sweep_csv(rows: &[RhoSweepRow]) -> String {
    let mut out = String::from(
        "case,seed,rho,alpha,p2p_fees_ct,residual_fees_ct,total_dso_fees_ct,baseline_fees_ct,\
         p2p_ratio,mean_consumer_tariff_ct_per_kwh,mean_producer_tariff_ct_per_kwh,proven_optimal\n",
    );
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}\n",
            r.case,
            r.seed,
            r.rho,
            r.alpha,
            r.p2p_fees_ct,
            r.residual_fees_ct,
            r.total_dso_fees_ct,
            r.baseline_fees_ct,
            r.p2p_ratio,
            r.mean_consumer_tariff_ct_per_kwh,
            r.mean_producer_tariff_ct_per_kwh,
            r.proven_optimal
        ));
    }
    out
}

/// Fee curves (p2p, total, baseline) against rho for one (seed, alpha)
/// series, plus effective tariff curves, mirroring the case-study panels.
pub fn plot_rho_sweep(rows: &[RhoSweepRow], out_dir: &Path) -> Result<Vec<std::path::PathBuf>> {
    let mut sorted: Vec<&RhoSweepRow> = rows.iter().collect();
    sorted.sort_by(|a, b| a.rho.total_cmp(&b.rho).then(a.alpha.total_cmp(&b.alpha)));
    let mut alphas: Vec<f64> = sorted.iter().map(|r| r.alpha).collect();
    alphas.sort_by(f64::total_cmp);
    alphas.dedup();

    let mut fee_series = Vec::new();
    for &alpha in &alphas {
        let points: Vec<(f64, f64)> = sorted
            .iter()
            .filter(|r| r.alpha == alpha)
            .map(|r| (r.rho, r.total_dso_fees_ct))
            .collect();
        fee_series.push((format!("total, alpha={alpha}"), points));
        let p2p: Vec<(f64, f64)> = sorted
            .iter()
            .filter(|r| r.alpha == alpha)
            .map(|r| (r.rho, r.p2p_fees_ct))
            .collect();
        fee_series.push((format!("p2p, alpha={alpha}"), p2p));
    }
    if let Some(first) = sorted.first() {
        let baseline: Vec<(f64, f64)> = sorted
            .iter()
            .filter(|r| r.alpha == first.alpha)
            .map(|r| (r.rho, r.baseline_fees_ct))
            .collect();
        fee_series.push(("baseline".to_string(), baseline));
    }
    let fees = svg::line_chart(
        "Collected grid operation fees",
        "rho [ct/kWh]",
        "fees [ct]",
        &fee_series,
    );
    let fees_path = out_dir.join("rho_fees.svg");
    std::fs::write(&fees_path, fees)?;

    let alpha = alphas.last().copied().unwrap_or(0.0);
    let tariff_series = vec![
        (
            "mean consumer tariff".to_string(),
            sorted
                .iter()
                .filter(|r| r.alpha == alpha)
                .map(|r| (r.rho, r.mean_consumer_tariff_ct_per_kwh))
                .collect(),
        ),
        (
            "mean producer tariff".to_string(),
            sorted
                .iter()
                .filter(|r| r.alpha == alpha)
                .map(|r| (r.rho, r.mean_producer_tariff_ct_per_kwh))
                .collect(),
        ),
    ];
    let tariffs = svg::line_chart(
        "Effective customer tariffs",
        "rho [ct/kWh]",
        "tariff [ct/kWh]",
        &tariff_series,
    );
    let tariffs_path = out_dir.join("rho_tariffs.svg");
    std::fs::write(&tariffs_path, tariffs)?;
    Ok(vec![fees_path, tariffs_path])
}

pub fn sa_sweep_csv(rows: &[SaSweepRow]) -> String {
    let mut out = String::from(
        "case,grid,num_sweeps,beta_start,beta_end,tts_median_s,tts_q75_s,instances_with_tts,\
         instances_total\n",
    );
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            r.case,
            r.grid,
            r.num_sweeps,
            r.beta_start,
            r.beta_end,
            r.tts_median_s.map(|v| v.to_string()).unwrap_or_default(),
            r.tts_q75_s.map(|v| v.to_string()).unwrap_or_default(),
            r.instances_with_tts,
            r.instances_total
        ));
    }
    out
}

/// TTS-vs-sweeps line chart and the (beta_start, beta_end) heatmap.
pub fn plot_sa_sweep(rows: &[SaSweepRow], out_dir: &Path) -> Result<Vec<std::path::PathBuf>> {
    let mut written = Vec::new();
    let mut sweep_rows: Vec<&SaSweepRow> = rows.iter().filter(|r| r.grid == "sweeps").collect();
    sweep_rows.sort_by_key(|r| r.num_sweeps);
    if !sweep_rows.is_empty() {
        let series = vec![
            (
                "median".to_string(),
                sweep_rows
                    .iter()
                    .filter_map(|r| r.tts_median_s.map(|t| (r.num_sweeps as f64, t)))
                    .collect::<Vec<_>>(),
            ),
            (
                "75% quantile".to_string(),
                sweep_rows
                    .iter()
                    .filter_map(|r| r.tts_q75_s.map(|t| (r.num_sweeps as f64, t)))
                    .collect::<Vec<_>>(),
            ),
        ];
        let chart = svg::line_chart(
            "Annealer TTS vs sweep count",
            "sweeps per read",
            "TTS [s]",
            &series,
        );
        let path = out_dir.join("sa_sweeps.svg");
        std::fs::write(&path, chart)?;
        written.push(path);
    }

    let schedule_rows: Vec<&SaSweepRow> = rows.iter().filter(|r| r.grid == "schedule").collect();
    if !schedule_rows.is_empty() {
        let mut starts: Vec<f64> = schedule_rows.iter().map(|r| r.beta_start).collect();
        starts.sort_by(f64::total_cmp);
        starts.dedup();
        let mut ends: Vec<f64> = schedule_rows.iter().map(|r| r.beta_end).collect();
        ends.sort_by(f64::total_cmp);
        ends.dedup();
        let cells: Vec<Vec<Option<f64>>> = starts
            .iter()
            .map(|&bs| {
                ends.iter()
                    .map(|&be| {
                        schedule_rows
                            .iter()
                            .find(|r| r.beta_start == bs && r.beta_end == be)
                            .and_then(|r| r.tts_q75_s)
                    })
                    .collect()
            })
            .collect();
        let chart = svg::heatmap(
            "Annealer 75% quantile TTS by schedule",
            "beta_end",
            "beta_start",
            &ends.iter().map(|v| v.to_string()).collect::<Vec<_>>(),
            &starts.iter().map(|v| v.to_string()).collect::<Vec<_>>(),
            &cells,
        );
        let path = out_dir.join("sa_schedule.svg");
        std::fs::write(&path, chart)?;
        written.push(path);
    }
    Ok(written)
}
