//! Experiment runner: seeded repetitions over a sweep of sample sizes,
//! reporting the discrimination measures before or after removal together
//! with the prediction-bound evaluation per cell.
//!
//! Repetition `r` uses seed `base_seed + r` for sampling and for every
//! seeded pipeline step of that repetition. Repetitions are independent and
//! run in parallel; results are keyed by repetition index, so parallel and
//! serial runs emit identical reports.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{prediction_bound, BoundResult};
use crate::classifier::TrainerSpec;
use crate::error::{Error, Result};
use crate::model::CausalModel;
use crate::model_io::load_model;
use crate::removal::{di_pipeline, two_phase_with_options, TwoPhaseOptions};

/// Which removal pipeline a run exercises.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PipelineSpec {
    /// Measure only; no removal.
    None,
    TwoPhase,
    /// Phase 1 only: repair the labels and retrain, skip the tweak.
    TwoPhaseNoTweak,
    Di,
}

/// Full description of an experiment; JSON configs mirror the field names.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub model_path: String,
    pub sample_sizes: Vec<u64>,
    pub repetitions: u32,
    pub base_seed: u64,
    pub trainer: TrainerSpec,
    pub tau: f64,
    /// Gap threshold the per-cell prediction bound is evaluated at.
    pub bound_t: f64,
    pub pipeline: PipelineSpec,
    /// Include per-repetition records in the report.
    #[serde(default)]
    pub raw: bool,
}

impl ExperimentConfig {
    fn check(&self) -> Result<()> {
        if self.sample_sizes.is_empty() {
            return Err(Error::domain("at least one sample size is required"));
        }
        if self.sample_sizes.iter().any(|&s| s < 10) {
            return Err(Error::domain("sample sizes must be at least 10"));
        }
        if self.repetitions < 1 {
            return Err(Error::domain("at least one repetition is required"));
        }
        Ok(())
    }
}

/// Mean, sample variance (n-1 denominator, 0 for a single value), and
/// standard error of the mean.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Stats {
    pub mean: f64,
    pub sample_variance: f64,
    pub std_error: f64,
}

impl Stats {
    pub fn from_values(values: &[f64]) -> Stats {
        let n = values.len();
        assert!(n > 0);
        let mean = values.iter().sum::<f64>() / n as f64;
        let sample_variance = if n == 1 {
            0.0
        } else {
            values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64
        };
        Stats { mean, sample_variance, std_error: (sample_variance / n as f64).sqrt() }
    }
}

/// One repetition's measurements. Starred quantities (after removal) are
/// absent for the measurement-only pipeline.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RepRecord {
    pub rep: u32,
    pub seed: u64,
    pub n_pos: u64,
    pub n_neg: u64,
    /// Discrimination of the sampled training data.
    pub de_d: f64,
    /// Discrimination of the repaired data, when a repair ran.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub de_d_star: Option<f64>,
    /// Discrimination of the (final) classifier's predictions on the
    /// (repaired) training data.
    pub de_dh: f64,
    /// Error bias of the final classifier on the (repaired) training data.
    pub epsilon: f64,
    /// Exact discrimination of the final classifier on the population.
    pub de_mh: f64,
    /// `|DE_D(*) + epsilon|`.
    pub criterion_value: f64,
    pub satisfied: bool,
    pub flip_count: usize,
    /// Interval half-width of the prediction bound at `bound_t`.
    pub bound_half_width: f64,
    pub bound_confidence: f64,
}

/// Aggregates for one sample size.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SizeCell {
    pub size: u64,
    pub repetitions: u32,
    pub de_d: Stats,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub de_d_star: Option<Stats>,
    pub de_dh: Stats,
    pub epsilon: Stats,
    pub de_mh: Stats,
    pub abs_de_mh: Stats,
    pub criterion_value: Stats,
    pub satisfied_fraction: f64,
    pub bound_half_width: Stats,
    pub bound_confidence: Stats,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reps: Option<Vec<RepRecord>>,
}

/// Whole-experiment report; serialization order is fixed, so identical
/// configs produce byte-identical JSON.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub model_path: String,
    /// Exact discrimination of the ground-truth model.
    pub de_m: f64,
    pub pipeline: PipelineSpec,
    pub trainer: TrainerSpec,
    pub tau: f64,
    pub bound_t: f64,
    pub base_seed: u64,
    /// Second moments are sample variances (n-1 denominator); std_error is
    /// the standard error of the mean.
    pub variance_kind: String,
    pub cells: Vec<SizeCell>,
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    let model = load_model(&config.model_path)?;
    run_experiment_with_model(&model, config)
}

pub fn run_experiment_with_model(
    model: &CausalModel,
    config: &ExperimentConfig,
) -> Result<ExperimentReport> {
    config.check()?;
    let report = model.validate();
    if !report.is_valid() {
        return Err(Error::domain(format!("model is not admissible:\n{report}")));
    }
    let de_m = model.true_discrimination()?;

    let mut cells = Vec::with_capacity(config.sample_sizes.len());
    for &size in &config.sample_sizes {
        let mut reps: Vec<RepRecord> = (0..config.repetitions)
            .into_par_iter()
            .map(|r| {
                run_rep(model, config, size, r)
                    .map_err(|e| e.context(format!("size {size}, rep {r}")))
            })
            .collect::<Result<Vec<_>>>()?;
        reps.sort_by_key(|r| r.rep);

        let collect = |f: fn(&RepRecord) -> f64| -> Vec<f64> { reps.iter().map(f).collect() };
        let de_d_star = if reps.iter().all(|r| r.de_d_star.is_some()) {
            Some(Stats::from_values(
                &reps.iter().map(|r| r.de_d_star.unwrap()).collect::<Vec<_>>(),
            ))
        } else {
            None
        };
        cells.push(SizeCell {
            size,
            repetitions: config.repetitions,
            de_d: Stats::from_values(&collect(|r| r.de_d)),
            de_d_star,
            de_dh: Stats::from_values(&collect(|r| r.de_dh)),
            epsilon: Stats::from_values(&collect(|r| r.epsilon)),
            de_mh: Stats::from_values(&collect(|r| r.de_mh)),
            abs_de_mh: Stats::from_values(&collect(|r| r.de_mh.abs())),
            criterion_value: Stats::from_values(&collect(|r| r.criterion_value)),
            satisfied_fraction: reps.iter().filter(|r| r.satisfied).count() as f64
                / reps.len() as f64,
            bound_half_width: Stats::from_values(&collect(|r| r.bound_half_width)),
            bound_confidence: Stats::from_values(&collect(|r| r.bound_confidence)),
            reps: config.raw.then_some(reps),
        });
    }

    Ok(ExperimentReport {
        model_path: config.model_path.clone(),
        de_m,
        pipeline: config.pipeline,
        trainer: config.trainer,
        tau: config.tau,
        bound_t: config.bound_t,
        base_seed: config.base_seed,
        variance_kind: "sample variance (n-1 denominator)".to_string(),
        cells,
    })
}

fn run_rep(model: &CausalModel, config: &ExperimentConfig, size: u64, rep: u32) -> Result<RepRecord> {
    let seed = config.base_seed + rep as u64;
    let data = model.sample(size, seed)?;
    let counts = data.group_counts();
    let de_d = data.empirical_discrimination()?;

    let (eval_data, classifier, de_d_star, criterion_value, satisfied, flip_count) =
        match config.pipeline {
            PipelineSpec::None => {
                let h = config.trainer.train(&data)?;
                let eps = crate::classifier::error_bias(&data, &h)?;
                let criterion = (de_d + eps.epsilon).abs();
                (data.clone(), h, None, criterion, criterion <= config.tau, 0)
            }
            PipelineSpec::TwoPhase | PipelineSpec::TwoPhaseNoTweak => {
                let tweak = config.pipeline == PipelineSpec::TwoPhase;
                let (d_star, h, report) = two_phase_with_options(
                    &data,
                    &config.trainer,
                    config.tau,
                    seed,
                    TwoPhaseOptions { tweak },
                )?;
                (
                    d_star,
                    h,
                    Some(report.de_d_after),
                    report.criterion_value,
                    report.satisfied,
                    report.flips.len(),
                )
            }
            PipelineSpec::Di => {
                let (d_star, h, report) = di_pipeline(&data, &config.trainer, config.tau, seed)?;
                (
                    d_star,
                    h,
                    Some(report.de_d_after),
                    report.criterion_value,
                    report.satisfied,
                    report.flips.len(),
                )
            }
        };

    let de_dh = eval_data.empirical_predicted_discrimination(&classifier)?;
    let eps = crate::classifier::error_bias(&eval_data, &classifier)?;
    let de_mh = model.with_classifier(classifier.clone())?.true_discrimination()?;
    let bound = theorem_bound(&eval_data, &classifier, config.bound_t, de_d_star.unwrap_or(de_d), eps.epsilon)?;

    Ok(RepRecord {
        rep,
        seed,
        n_pos: counts.positive as u64,
        n_neg: counts.negative as u64,
        de_d,
        de_d_star,
        de_dh,
        epsilon: eps.epsilon,
        de_mh,
        criterion_value,
        satisfied,
        flip_count,
        bound_half_width: bound.half_width.unwrap_or(f64::NAN),
        bound_confidence: bound.confidence,
    })
}

fn theorem_bound(
    data: &crate::dataset::Dataset,
    classifier: &crate::classifier::Classifier,
    t: f64,
    de_d: f64,
    epsilon: f64,
) -> Result<BoundResult> {
    let counts = data.group_counts();
    prediction_bound(
        de_d,
        epsilon,
        classifier.complexity(),
        counts.positive as u64,
        counts.negative as u64,
        t,
    )
}

/// Render the per-size aggregates as an aligned text table.
pub fn format_report_table(report: &ExperimentReport) -> String {
    use std::fmt::Write;
    let mut out = String::new();
    let star = !matches!(report.pipeline, PipelineSpec::None);
    let suffix = if star { "*" } else { " " };
    writeln!(out, "model: {}   DE_M = {:.4}", report.model_path, report.de_m).unwrap();
    writeln!(
        out,
        "pipeline: {:?}   trainer: {}   tau = {}   reported second moment: sample variance",
        report.pipeline, report.trainer, report.tau
    )
    .unwrap();
    writeln!(
        out,
        "{:>7}  {:>20} {:>20} {:>20} {:>20} {:>10}",
        "size",
        format!("DE_D{suffix}"),
        format!("DE_Dh{suffix}"),
        format!("DE_Mh{suffix} (exact)"),
        "epsilon",
        "satisfied"
    )
    .unwrap();
    for cell in &report.cells {
        let de_d = cell.de_d_star.as_ref().unwrap_or(&cell.de_d);
        writeln!(
            out,
            "{:>7}  {:>9.4} ± {:<8.2e} {:>9.4} ± {:<8.2e} {:>9.4} ± {:<8.2e} {:>9.4} ± {:<8.2e} {:>9.2}%",
            cell.size,
            de_d.mean,
            de_d.sample_variance,
            cell.de_dh.mean,
            cell.de_dh.sample_variance,
            cell.de_mh.mean,
            cell.de_mh.sample_variance,
            cell.epsilon.mean,
            cell.epsilon.sample_variance,
            cell.satisfied_fraction * 100.0
        )
        .unwrap();
    }
    out
}
