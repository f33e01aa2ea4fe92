//! Subcommand implementations: generate, estimate-sampling,
//! construct-weights, fit, experiment, fairness.

use crate::config::{DatasetConfig, ExperimentConfig};
use crate::dataset::{prepare, synthetic_for_cell};
use crate::manifest::OutputWriter;
use nucomplete::dataio::derive_seed;
use nucomplete::error::{Error, Result};
use nucomplete::estimators::{floored_sampling_matrix, Method};
use nucomplete::evaluation::{
    evaluate_on_synthetic, fairness_from_predictions, fit_with_validation, mean_and_two_se,
    run_repeat, FairnessAxis, FairnessResult, PredictionRecord, RepeatOutcome,
};
use nucomplete::sampling::{
    estimate_rank1, select_pmlsvt, ObservationSet, PmlsvtConfig, SamplingMethod,
};
use nucomplete::weights::{bound_diagnostics, construct_weights_full};
use serde::Serialize;
use serde_json::json;
use std::collections::BTreeMap;

const ROLE_CLI_FIT: u64 = 0x636c_0001;
const ROLE_CLI_SAMPLING: u64 = 0x636c_0002;
const ROLE_CLI_CELL: u64 = 0x636c_0003;
const ROLE_CLI_DATA: u64 = 0x636c_0004;

fn predictions_csv(preds: &[PredictionRecord]) -> String {
    let mut out = String::from("row,col,y_true,y_pred\n");
    for p in preds {
        out.push_str(&format!("{},{},{},{}\n", p.row, p.col, p.y_true, p.y_pred));
    }
    out
}

fn parse_predictions(text: &str) -> Result<Vec<PredictionRecord>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == "row,col,y_true,y_pred" => {}
        other => {
            return Err(Error::Parse {
                line: 1,
                reason: format!("expected predictions header, got {other:?}"),
            })
        }
    }
    let mut out = Vec::new();
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 4 {
            return Err(Error::Parse {
                line: idx + 1,
                reason: format!("expected 4 fields, got {}", f.len()),
            });
        }
        let parse_err = |e: String| Error::Parse { line: idx + 1, reason: e };
        out.push(PredictionRecord {
            row: f[0].trim().parse().map_err(|e| parse_err(format!("row: {e}")))?,
            col: f[1].trim().parse().map_err(|e| parse_err(format!("col: {e}")))?,
            y_true: f[2].trim().parse().map_err(|e| parse_err(format!("y_true: {e}")))?,
            y_pred: f[3].trim().parse().map_err(|e| parse_err(format!("y_pred: {e}")))?,
        });
    }
    Ok(out)
}

fn fairness_json(r: &std::result::Result<FairnessResult, String>) -> serde_json::Value {
    match r {
        Ok(f) => json!({
            "slope": f.slope,
            "intercept": f.intercept,
            "slope_se": f.slope_se,
            "t_stat": f.t_stat,
            "p_value": f.p_value,
            "n_points": f.n_points,
        }),
        Err(reason) => json!({ "error": reason }),
    }
}

// ------------------------------------------------------------------ generate

pub fn cmd_generate(cfg: &ExperimentConfig) -> Result<()> {
    let DatasetConfig::Synthetic { spec, .. } = &cfg.dataset else {
        return Err(Error::Config("generate requires a synthetic dataset".into()));
    };
    let data = prepare(&cfg.dataset)?;
    let synthetic = data.synthetic.expect("synthetic dataset");
    let mut out = OutputWriter::new(&cfg.output_dir)?;
    out.write("b_star.csv", &synthetic.b_star.to_csv())?;
    out.write("p_star.csv", &synthetic.p_star.to_csv())?;
    out.write("observations.csv", &synthetic.obs.to_csv())?;
    out.write(
        "generate.json",
        &serde_json::to_string_pretty(&json!({
            "d": spec.d,
            "rank_b": spec.rank_b,
            "rank_p": spec.rank_p,
            "noise_sd": spec.noise_sd,
            "n": spec.n,
            "seed": spec.seed,
            "p_star_sum": synthetic.p_star.sum(),
        }))
        .expect("json"),
    )?;
    out.finish("generate")
}

// -------------------------------------------------------- estimate-sampling

pub fn cmd_estimate_sampling(cfg: &ExperimentConfig) -> Result<()> {
    let data = prepare(&cfg.dataset)?;
    let est = match cfg.sampling {
        SamplingMethod::Rank1 => estimate_rank1(&data.obs)?,
        SamplingMethod::Pmlsvt => select_pmlsvt(
            &data.obs,
            &PmlsvtConfig::default_for(data.obs.len()),
            derive_seed(cfg.plan.rng_seed, ROLE_CLI_SAMPLING),
        )?,
    };
    let mut out = OutputWriter::new(&cfg.output_dir)?;
    out.write("p_hat.csv", &est.p_hat.to_csv())?;
    out.write(
        "sampling.json",
        &serde_json::to_string_pretty(&json!({
            "method": match est.method {
                SamplingMethod::Rank1 => "rank1",
                SamplingMethod::Pmlsvt => "pmlsvt",
            },
            "n_rows": est.p_hat.n_rows(),
            "n_cols": est.p_hat.n_cols(),
            "n_samples": data.obs.len(),
            "row_margins": est.row_margins,
            "col_margins": est.col_margins,
        }))
        .expect("json"),
    )?;
    out.finish("estimate-sampling")
}

// -------------------------------------------------------- construct-weights

pub fn cmd_construct_weights(cfg: &ExperimentConfig) -> Result<()> {
    let data = prepare(&cfg.dataset)?;
    let margin_spec = cfg.estimator_spec(Method::Margin);
    let seed = derive_seed(cfg.plan.rng_seed, ROLE_CLI_FIT);
    let raw = fit_with_validation(&data.obs, &margin_spec, seed)?;
    let p_hat = floored_sampling_matrix(&data.obs, cfg.sampling, seed)?;
    let sol = construct_weights_full(&raw.b_hat, &p_hat, &cfg.weights)?;

    let d = data.obs.n_rows().max(data.obs.n_cols());
    let rho = cfg.diagnostics_rho.unwrap_or((d as f64).ln().max(1.0));
    let diag = bound_diagnostics(
        &raw.b_hat,
        &sol.w,
        &p_hat,
        data.obs.len(),
        cfg.diagnostics_sigma,
        rho,
    )?;

    let mut out = OutputWriter::new(&cfg.output_dir)?;
    out.write("w.csv", &sol.w.to_csv())?;
    out.write("b_raw.csv", &raw.b_hat.to_csv())?;
    out.write(
        "weights.json",
        &serde_json::to_string_pretty(&json!({
            "objective": sol.objective,
            "n_iterations": sol.n_iterations,
            "raw_lambda": raw.lambda,
            "diagnostics": {
                "l": diag.l,
                "p_min": diag.p_min,
                "n_star": diag.n_star,
                "r_tilde": diag.r_tilde,
                "bound_value": diag.bound_value,
            },
        }))
        .expect("json"),
    )?;
    out.finish("construct-weights")
}

// ------------------------------------------------------------------- fit

pub fn cmd_fit(cfg: &ExperimentConfig) -> Result<()> {
    let data = prepare(&cfg.dataset)?;
    let mut out = OutputWriter::new(&cfg.output_dir)?;
    for (idx, &method) in cfg.methods.iter().enumerate() {
        let spec = cfg.estimator_spec(method);
        let seed = derive_seed(cfg.plan.rng_seed, ROLE_CLI_FIT ^ (idx as u64));
        let fit = fit_with_validation(&data.obs, &spec, seed)?;
        out.write(&format!("fit_{}/b_hat.csv", method.name()), &fit.b_hat.to_csv())?;
        out.write(
            &format!("fit_{}/fit.json", method.name()),
            &serde_json::to_string_pretty(&json!({
                "lambda": fit.lambda,
                "iterations": fit.n_iterations,
                "converged": fit.converged,
                "final_objective": fit.objective_trace.last(),
            }))
            .expect("json"),
        )?;
    }
    out.finish("fit")
}

// ---------------------------------------------------------------- experiment

#[derive(Clone, Debug, Serialize)]
struct CellStatus {
    method: String,
    n: usize,
    repeat: usize,
    status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

pub struct ExperimentStatus {
    pub total_cells: usize,
    pub failed_cells: usize,
}

/// (repeat, predictions, row margins, col margins) persisted per base-n cell.
type RepeatPredictions = (usize, Vec<PredictionRecord>, Vec<f64>, Vec<f64>);

enum CellOutcome {
    Synthetic {
        lambda: f64,
        rel_frobenius: f64,
        rel_l2pi: f64,
        predictions: Option<Vec<PredictionRecord>>,
        row_margins: Option<Vec<f64>>,
        col_margins: Option<Vec<f64>>,
    },
    Real(RepeatOutcome),
}

struct Cell {
    method: Method,
    method_idx: usize,
    n: usize,
    n_idx: usize,
    repeat: usize,
}

fn run_synthetic_cell(
    cfg: &ExperimentConfig,
    spec: &nucomplete::dataio::SyntheticSpec,
    cell: &Cell,
    base_n: usize,
) -> Result<CellOutcome> {
    let data_seed = derive_seed(
        cfg.plan.rng_seed,
        ROLE_CLI_DATA ^ ((cell.n_idx as u64) << 32 | cell.repeat as u64),
    );
    let data = synthetic_for_cell(spec, cell.n, data_seed)?;
    let est_spec = cfg.estimator_spec(cell.method);
    let out = evaluate_on_synthetic(
        &data,
        &est_spec,
        cfg.selection,
        derive_seed(data_seed, ROLE_CLI_CELL),
    )?;
    // Noiseless full-grid predictions at the base sample size feed the
    // fairness replay; other sweep points skip them to keep outputs small.
    let (predictions, row_margins, col_margins) = if cell.n == base_n {
        let d_r = data.b_star.n_rows();
        let d_c = data.b_star.n_cols();
        let preds: Vec<PredictionRecord> = (0..d_r)
            .flat_map(|i| {
                let b_star = &data.b_star;
                let b_hat = &out.b_hat;
                (0..d_c).map(move |j| PredictionRecord {
                    row: i,
                    col: j,
                    y_true: b_star.get(i, j),
                    y_pred: b_hat.get(i, j),
                })
            })
            .collect();
        let margins = estimate_rank1(&data.obs)?;
        (Some(preds), Some(margins.row_margins), Some(margins.col_margins))
    } else {
        (None, None, None)
    };
    Ok(CellOutcome::Synthetic {
        lambda: out.lambda,
        rel_frobenius: out.rel_frobenius,
        rel_l2pi: out.rel_l2pi,
        predictions,
        row_margins,
        col_margins,
    })
}

fn run_cell(cfg: &ExperimentConfig, obs: Option<&ObservationSet>, cell: &Cell) -> Result<CellOutcome> {
    match &cfg.dataset {
        DatasetConfig::Synthetic { spec, .. } => {
            run_synthetic_cell(cfg, spec, cell, spec.n)
        }
        _ => {
            let obs = obs.expect("real dataset prepared");
            let spec = cfg.estimator_spec(cell.method);
            Ok(CellOutcome::Real(run_repeat(obs, &spec, &cfg.plan, cell.repeat)?))
        }
    }
}

/// Per-repeat fairness regression counts for synthetic experiments.
fn synthetic_fairness_summary(
    per_repeat: &[(usize, Vec<PredictionRecord>, Vec<f64>)],
    axis: FairnessAxis,
) -> serde_json::Value {
    let mut slopes = Vec::new();
    let mut p_values = Vec::new();
    let mut significant_negative = 0usize;
    let mut rows = Vec::new();
    for (repeat, preds, margins) in per_repeat {
        match fairness_from_predictions(preds, margins, axis) {
            Ok(f) => {
                if f.slope < 0.0 && f.p_value < 0.05 {
                    significant_negative += 1;
                }
                slopes.push(f.slope);
                p_values.push(f.p_value);
                rows.push(json!({
                    "repeat": repeat,
                    "slope": f.slope,
                    "p_value": f.p_value,
                }));
            }
            Err(e) => rows.push(json!({ "repeat": repeat, "error": e.to_string() })),
        }
    }
    let mean_slope = if slopes.is_empty() {
        serde_json::Value::Null
    } else {
        json!(slopes.iter().sum::<f64>() / slopes.len() as f64)
    };
    json!({
        "mean_slope": mean_slope,
        "significant_negative": significant_negative,
        "n_regressions": slopes.len(),
        "per_repeat": rows,
    })
}

pub fn cmd_experiment(cfg: &ExperimentConfig) -> Result<ExperimentStatus> {
    let (obs, n_values, base_n) = match &cfg.dataset {
        DatasetConfig::Synthetic { spec, n_sweep } => {
            let values = n_sweep.clone().unwrap_or_else(|| vec![spec.n]);
            (None, values, spec.n)
        }
        _ => {
            let prepared = prepare(&cfg.dataset)?;
            let n = prepared.obs.len();
            (Some(prepared.obs), vec![n], n)
        }
    };

    let mut cells = Vec::new();
    for (n_idx, &n) in n_values.iter().enumerate() {
        for repeat in 0..cfg.plan.n_repeats {
            for (method_idx, &method) in cfg.methods.iter().enumerate() {
                cells.push(Cell {
                    method,
                    method_idx,
                    n,
                    n_idx,
                    repeat,
                });
            }
        }
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.parallelism)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let results: Vec<std::result::Result<CellOutcome, String>> = pool.install(|| {
        use rayon::prelude::*;
        cells
            .par_iter()
            .map(|cell| run_cell(cfg, obs.as_ref(), cell).map_err(|e| e.to_string()))
            .collect()
    });

    let mut out = OutputWriter::new(&cfg.output_dir)?;
    let mut statuses = Vec::new();
    let mut failed = 0usize;

    // Per-method collections in config order.
    let mut synth_rows = String::from("method,n,repeat,lambda,rel_frobenius,rel_l2pi\n");
    let mut real_rows = String::from("method,repeat,lambda,test_rmse\n");
    let mut synth_by_method_n: BTreeMap<(usize, usize), Vec<f64>> = BTreeMap::new();
    let mut real_by_method: BTreeMap<usize, Vec<RepeatOutcome>> = BTreeMap::new();
    let mut synth_preds: BTreeMap<usize, Vec<RepeatPredictions>> = BTreeMap::new();
    let is_synthetic = matches!(cfg.dataset, DatasetConfig::Synthetic { .. });

    for (cell, result) in cells.iter().zip(results) {
        match result {
            Err(message) => {
                failed += 1;
                statuses.push(CellStatus {
                    method: cell.method.name().into(),
                    n: cell.n,
                    repeat: cell.repeat,
                    status: "error".into(),
                    error: Some(message),
                });
            }
            Ok(CellOutcome::Synthetic {
                lambda,
                rel_frobenius,
                rel_l2pi,
                predictions,
                row_margins,
                col_margins,
            }) => {
                statuses.push(CellStatus {
                    method: cell.method.name().into(),
                    n: cell.n,
                    repeat: cell.repeat,
                    status: "ok".into(),
                    error: None,
                });
                synth_rows.push_str(&format!(
                    "{},{},{},{},{},{}\n",
                    cell.method.name(),
                    cell.n,
                    cell.repeat,
                    lambda,
                    rel_frobenius,
                    rel_l2pi
                ));
                synth_by_method_n
                    .entry((cell.method_idx, cell.n_idx))
                    .or_default()
                    .push(rel_frobenius);
                if let (Some(p), Some(rm), Some(cm)) = (predictions, row_margins, col_margins) {
                    synth_preds
                        .entry(cell.method_idx)
                        .or_default()
                        .push((cell.repeat, p, rm, cm));
                }
            }
            Ok(CellOutcome::Real(outcome)) => {
                statuses.push(CellStatus {
                    method: cell.method.name().into(),
                    n: cell.n,
                    repeat: cell.repeat,
                    status: "ok".into(),
                    error: None,
                });
                real_rows.push_str(&format!(
                    "{},{},{},{}\n",
                    cell.method.name(),
                    outcome.repeat,
                    outcome.lambda,
                    outcome.test_rmse
                ));
                real_by_method
                    .entry(cell.method_idx)
                    .or_default()
                    .push(outcome);
            }
        }
    }

    out.write(
        "cells.json",
        &serde_json::to_string_pretty(&statuses).expect("json"),
    )?;

    if is_synthetic {
        out.write("synthetic_errors.csv", &synth_rows)?;
        let mut plot = String::from("method,x,mean_rel_frobenius,two_se\n");
        let mut summary = Vec::new();
        for (method_idx, &method) in cfg.methods.iter().enumerate() {
            let mut per_n = Vec::new();
            for (n_idx, &n) in n_values.iter().enumerate() {
                if let Some(errors) = synth_by_method_n.get(&(method_idx, n_idx)) {
                    let (mean, two_se) = mean_and_two_se(errors);
                    plot.push_str(&format!("{},{},{},{}\n", method.name(), n, mean, two_se));
                    per_n.push(json!({
                        "n": n,
                        "mean_rel_frobenius": mean,
                        "two_se": two_se,
                        "repeats": errors.len(),
                    }));
                }
            }
            let fairness = match synth_preds.get(&method_idx) {
                Some(entries) => {
                    let mut sorted: Vec<_> = entries.clone();
                    sorted.sort_by_key(|(repeat, ..)| *repeat);
                    let rows_in: Vec<(usize, Vec<PredictionRecord>, Vec<f64>)> = sorted
                        .iter()
                        .map(|(r, p, rm, _)| (*r, p.clone(), rm.clone()))
                        .collect();
                    let cols_in: Vec<(usize, Vec<PredictionRecord>, Vec<f64>)> = sorted
                        .iter()
                        .map(|(r, p, _, cm)| (*r, p.clone(), cm.clone()))
                        .collect();
                    json!({
                        "rows": synthetic_fairness_summary(&rows_in, FairnessAxis::Rows),
                        "cols": synthetic_fairness_summary(&cols_in, FairnessAxis::Cols),
                    })
                }
                None => serde_json::Value::Null,
            };
            summary.push(json!({
                "method": method.name(),
                "per_n": per_n,
                "fairness": fairness,
            }));
        }
        out.write("plot_data.csv", &plot)?;
        out.write(
            "summary.json",
            &serde_json::to_string_pretty(&summary).expect("json"),
        )?;
        // Persist predictions and margins for fairness replay.
        if n_values.contains(&base_n) {
            for (method_idx, &method) in cfg.methods.iter().enumerate() {
                if let Some(entries) = synth_preds.get(&method_idx) {
                    let mut sorted: Vec<_> = entries.clone();
                    sorted.sort_by_key(|(repeat, ..)| *repeat);
                    for (repeat, preds, rm, cm) in sorted {
                        out.write(
                            &format!("predictions/{}_rep{repeat}.csv", method.name()),
                            &predictions_csv(&preds),
                        )?;
                        if method_idx == 0 {
                            out.write(
                                &format!("margins/rep{repeat}.json"),
                                &serde_json::to_string_pretty(&json!({
                                    "row_margins": rm,
                                    "col_margins": cm,
                                }))
                                .expect("json"),
                            )?;
                        }
                    }
                }
            }
        }
    } else {
        out.write("report.csv", &real_rows)?;
        let full_margins = estimate_rank1(obs.as_ref().expect("real dataset"))?;
        let mut plot = String::from("method,x,mean_rmse,two_se\n");
        let mut summary = Vec::new();
        for (method_idx, &method) in cfg.methods.iter().enumerate() {
            let Some(outcomes) = real_by_method.get(&method_idx) else {
                summary.push(json!({ "method": method.name(), "failed": true }));
                continue;
            };
            let mut sorted: Vec<&RepeatOutcome> = outcomes.iter().collect();
            sorted.sort_by_key(|o| o.repeat);
            let rmses: Vec<f64> = sorted.iter().map(|o| o.test_rmse).collect();
            let (mean, two_se) = mean_and_two_se(&rmses);
            plot.push_str(&format!("{},{},{},{}\n", method.name(), method.name(), mean, two_se));
            let pooled: Vec<PredictionRecord> = sorted
                .iter()
                .flat_map(|o| o.predictions.iter().copied())
                .collect();
            let f_rows =
                fairness_from_predictions(&pooled, &full_margins.row_margins, FairnessAxis::Rows)
                    .map_err(|e| e.to_string());
            let f_cols =
                fairness_from_predictions(&pooled, &full_margins.col_margins, FairnessAxis::Cols)
                    .map_err(|e| e.to_string());
            summary.push(json!({
                "method": method.name(),
                "mean_rmse": mean,
                "two_se": two_se,
                "repeats": rmses.len(),
                "fairness": {
                    "rows": fairness_json(&f_rows),
                    "cols": fairness_json(&f_cols),
                },
            }));
            for outcome in sorted {
                out.write(
                    &format!("predictions/{}_rep{}.csv", method.name(), outcome.repeat),
                    &predictions_csv(&outcome.predictions),
                )?;
            }
        }
        out.write("plot_data.csv", &plot)?;
        out.write(
            "summary.json",
            &serde_json::to_string_pretty(&summary).expect("json"),
        )?;
    }

    out.finish("experiment")?;
    Ok(ExperimentStatus {
        total_cells: cells.len(),
        failed_cells: failed,
    })
}

// ----------------------------------------------------------------- fairness

pub fn cmd_fairness(cfg: &ExperimentConfig) -> Result<()> {
    let pred_dir = cfg.output_dir.join("predictions");
    if !pred_dir.is_dir() {
        return Err(Error::Config(format!(
            "no predictions at {} — run the experiment command first",
            pred_dir.display()
        )));
    }
    let is_synthetic = matches!(cfg.dataset, DatasetConfig::Synthetic { .. });
    let real_margins = if is_synthetic {
        None
    } else {
        Some(estimate_rank1(&prepare(&cfg.dataset)?.obs)?)
    };

    let mut report = serde_json::Map::new();
    for &method in &cfg.methods {
        let mut repeats: Vec<(usize, Vec<PredictionRecord>)> = Vec::new();
        for repeat in 0..cfg.plan.n_repeats {
            let path = pred_dir.join(format!("{}_rep{repeat}.csv", method.name()));
            if !path.exists() {
                continue;
            }
            let text = std::fs::read_to_string(&path)
                .map_err(|e| Error::io(path.display().to_string(), e))?;
            repeats.push((repeat, parse_predictions(&text)?));
        }
        if repeats.is_empty() {
            report.insert(method.name().into(), json!({ "error": "no predictions" }));
            continue;
        }
        let value = if is_synthetic {
            // Per-repeat margins were persisted by the experiment run.
            let mut rows_in = Vec::new();
            let mut cols_in = Vec::new();
            for (repeat, preds) in &repeats {
                let mpath = cfg.output_dir.join(format!("margins/rep{repeat}.json"));
                let text = std::fs::read_to_string(&mpath)
                    .map_err(|e| Error::io(mpath.display().to_string(), e))?;
                let parsed: serde_json::Value = serde_json::from_str(&text)
                    .map_err(|e| Error::Config(format!("margins JSON: {e}")))?;
                let to_vec = |key: &str| -> Result<Vec<f64>> {
                    parsed[key]
                        .as_array()
                        .ok_or_else(|| Error::Config(format!("margins JSON missing {key}")))?
                        .iter()
                        .map(|v| {
                            v.as_f64()
                                .ok_or_else(|| Error::Config("margins JSON holds non-floats".into()))
                        })
                        .collect()
                };
                rows_in.push((*repeat, preds.clone(), to_vec("row_margins")?));
                cols_in.push((*repeat, preds.clone(), to_vec("col_margins")?));
            }
            json!({
                "rows": synthetic_fairness_summary(&rows_in, FairnessAxis::Rows),
                "cols": synthetic_fairness_summary(&cols_in, FairnessAxis::Cols),
            })
        } else {
            let margins = real_margins.as_ref().expect("real dataset margins");
            let pooled: Vec<PredictionRecord> = repeats
                .iter()
                .flat_map(|(_, p)| p.iter().copied())
                .collect();
            let f_rows =
                fairness_from_predictions(&pooled, &margins.row_margins, FairnessAxis::Rows)
                    .map_err(|e| e.to_string());
            let f_cols =
                fairness_from_predictions(&pooled, &margins.col_margins, FairnessAxis::Cols)
                    .map_err(|e| e.to_string());
            json!({ "rows": fairness_json(&f_rows), "cols": fairness_json(&f_cols) })
        };
        report.insert(method.name().into(), value);
    }

    let mut out = OutputWriter::new(&cfg.output_dir)?;
    out.write(
        "fairness.json",
        &serde_json::to_string_pretty(&serde_json::Value::Object(report)).expect("json"),
    )?;
    out.finish("fairness")
}
