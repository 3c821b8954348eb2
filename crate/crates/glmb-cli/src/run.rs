//! Monte Carlo batch execution and result emission.

use std::path::Path;

use anyhow::{Context, Result};
use nalgebra::DVector;
use rayon::prelude::*;
use serde::Serialize;

use glmb::density::GlmbDensity;
use glmb::filter::run_filter;
use glmb::io;
use glmb::ospa::{ospa, OspaDistance};
use glmb::scenario::{generate_measurements, generate_truth, truth_cardinality};

use crate::config::ResolvedRun;

struct TrialOutcome {
    trial: u64,
    cardinality: Vec<usize>,
    ospa_series: Vec<OspaDistance>,
    ranked_assignment_calls: usize,
    error: Option<String>,
}

#[derive(Serialize)]
struct AggregateStep {
    step: u32,
    truth_cardinality: usize,
    mean_cardinality: f64,
    std_cardinality: f64,
    mean_ospa_total: f64,
    mean_ospa_localization: f64,
    mean_ospa_cardinality: f64,
}

#[derive(Serialize)]
struct AggregateFile {
    format: &'static str,
    version: u32,
    trials: u64,
    succeeded: u64,
    failed: Vec<FailedTrial>,
    base_seed: u64,
    j_max: usize,
    lookahead_enabled: bool,
    ospa_cutoff: f64,
    ospa_order: f64,
    mean_ospa_total_time_averaged: f64,
    total_ranked_assignment_calls: usize,
    per_step: Vec<AggregateStep>,
}

#[derive(Serialize)]
struct FailedTrial {
    trial: u64,
    error: String,
}

/// Runs every trial on the worker pool, writes per-trial files and the
/// aggregate. Returns the process exit code: 0 on full success, 2 if any
/// trial failed.
pub fn cmd_run(run: &ResolvedRun) -> Result<i32> {
    let truth = generate_truth(&run.scenario);
    let truth_card = truth_cardinality(&run.scenario);
    let model = run.scenario.build_model().context("building model")?;
    log::info!(
        "running {} trial(s), {} steps, j_max {}, lookahead {}",
        run.trials,
        run.scenario.duration,
        run.filter.j_max,
        run.filter.lookahead_enabled
    );

    let outcomes: Vec<TrialOutcome> = (0..run.trials)
        .into_par_iter()
        .map(|trial| {
            let seed = run.seed + trial;
            let scans = generate_measurements(&truth, &run.scenario, seed);
            let result = run_filter(&scans, &model, &run.filter, GlmbDensity::empty_prior(0));
            match result {
                Err(e) => {
                    log::error!("trial {trial}: {e}");
                    TrialOutcome {
                        trial,
                        cardinality: Vec::new(),
                        ospa_series: Vec::new(),
                        ranked_assignment_calls: 0,
                        error: Some(e.to_string()),
                    }
                }
                Ok(out) => {
                    let ospa_series: Vec<OspaDistance> = out
                        .estimates
                        .iter()
                        .enumerate()
                        .map(|(k, est)| {
                            let est_states: Vec<DVector<f64>> =
                                est.tracks.values().cloned().collect();
                            let truth_states: Vec<DVector<f64>> =
                                truth[k].iter().map(|(_, x)| x.clone()).collect();
                            ospa(&est_states, &truth_states, run.ospa_cutoff, run.ospa_order)
                                .expect("valid OSPA parameters")
                        })
                        .collect();
                    let dir = run.out_dir.join(format!("trial_{trial:03}"));
                    if let Err(e) = write_trial_files(run, &dir, &out, &ospa_series, &truth, &scans)
                    {
                        log::error!("trial {trial}: writing outputs: {e}");
                        return TrialOutcome {
                            trial,
                            cardinality: Vec::new(),
                            ospa_series: Vec::new(),
                            ranked_assignment_calls: 0,
                            error: Some(format!("writing outputs: {e}")),
                        };
                    }
                    TrialOutcome {
                        trial,
                        cardinality: out.estimates.iter().map(|e| e.cardinality()).collect(),
                        ospa_series,
                        ranked_assignment_calls: out
                            .diagnostics
                            .iter()
                            .map(|d| d.ranked_assignment_calls)
                            .sum(),
                        error: None,
                    }
                }
            }
        })
        .collect();

    let aggregate = aggregate(run, &truth_card, &outcomes);
    io::write_atomic(
        &run.out_dir.join("aggregate.json"),
        &format!("{}\n", serde_json::to_string_pretty(&aggregate)?),
    )
    .context("writing aggregate.json")?;

    let failed = aggregate.failed.len();
    if failed > 0 {
        log::error!("{failed} of {} trial(s) failed", run.trials);
        Ok(2)
    } else {
        log::info!(
            "done: mean OSPA {:.1}, outputs under {}",
            aggregate.mean_ospa_total_time_averaged,
            run.out_dir.display()
        );
        Ok(0)
    }
}

fn write_trial_files(
    run: &ResolvedRun,
    dir: &Path,
    out: &glmb::filter::FilterOutput,
    ospa_series: &[OspaDistance],
    truth: &[Vec<(u32, DVector<f64>)>],
    scans: &[Vec<DVector<f64>>],
) -> std::io::Result<()> {
    if run.emit.estimates {
        io::write_atomic(
            &dir.join("estimates.csv"),
            &io::estimates_csv(&out.estimates),
        )?;
    }
    if run.emit.diagnostics {
        io::write_atomic(
            &dir.join("diagnostics.csv"),
            &io::diagnostics_csv(&out.diagnostics),
        )?;
        io::write_atomic(
            &dir.join("diagnostics.jsonl"),
            &io::diagnostics_jsonl(&out.diagnostics),
        )?;
    }
    if run.emit.ospa {
        io::write_atomic(&dir.join("ospa.csv"), &io::ospa_csv(ospa_series))?;
    }
    if run.emit.truth {
        io::write_atomic(&dir.join("truth.csv"), &io::truth_csv(truth))?;
    }
    if run.emit.measurements {
        io::write_atomic(&dir.join("measurements.csv"), &io::measurements_csv(scans))?;
    }
    Ok(())
}

fn aggregate(run: &ResolvedRun, truth_card: &[usize], outcomes: &[TrialOutcome]) -> AggregateFile {
    let good: Vec<&TrialOutcome> = outcomes.iter().filter(|o| o.error.is_none()).collect();
    let steps = truth_card.len();
    let per_step: Vec<AggregateStep> = (0..steps)
        .map(|k| {
            let cards: Vec<f64> = good.iter().map(|o| o.cardinality[k] as f64).collect();
            let n = cards.len().max(1) as f64;
            let mean = cards.iter().sum::<f64>() / n;
            let var = cards.iter().map(|c| (c - mean) * (c - mean)).sum::<f64>() / n;
            let mean_of = |f: &dyn Fn(&OspaDistance) -> f64| {
                good.iter().map(|o| f(&o.ospa_series[k])).sum::<f64>() / n
            };
            AggregateStep {
                step: k as u32,
                truth_cardinality: truth_card[k],
                mean_cardinality: mean,
                std_cardinality: var.sqrt(),
                mean_ospa_total: mean_of(&|d| d.total),
                mean_ospa_localization: mean_of(&|d| d.localization),
                mean_ospa_cardinality: mean_of(&|d| d.cardinality),
            }
        })
        .collect();
    let mean_ospa = if per_step.is_empty() || good.is_empty() {
        0.0
    } else {
        per_step.iter().map(|s| s.mean_ospa_total).sum::<f64>() / per_step.len() as f64
    };
    AggregateFile {
        format: "glmb-aggregate",
        version: 1,
        trials: run.trials,
        succeeded: good.len() as u64,
        failed: outcomes
            .iter()
            .filter_map(|o| {
                o.error.as_ref().map(|e| FailedTrial {
                    trial: o.trial,
                    error: e.clone(),
                })
            })
            .collect(),
        base_seed: run.seed,
        j_max: run.filter.j_max,
        lookahead_enabled: run.filter.lookahead_enabled,
        ospa_cutoff: run.ospa_cutoff,
        ospa_order: run.ospa_order,
        mean_ospa_total_time_averaged: mean_ospa,
        total_ranked_assignment_calls: good.iter().map(|o| o.ranked_assignment_calls).sum(),
        per_step,
    }
}
