//! Command-line interface: model queries, dataset audits, classifier
//! training and bias measurement, bound evaluation, removal pipelines, and
//! the experiment runner. `--json` switches any subcommand to its
//! machine-readable report; identical inputs produce byte-identical output.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use num_bigint::BigUint;
use serde::Serialize;

use faircause::bounds::{invert_delta, prediction_bound, sampling_bound, uniform_bound};
use faircause::classifier::{
    confusion_by_group, error_bias, Classifier, HypothesisComplexity, TieRule, TrainerSpec,
};
use faircause::dataset::Dataset;
use faircause::error::{Error, Result};
use faircause::harness::{format_report_table, run_experiment, ExperimentConfig};
use faircause::model_io::{load_model, load_schema};
use faircause::removal::{
    apply_random_flip, compute_flip_policy, di_pipeline, di_repair, massage, two_phase_with_options,
    TwoPhaseOptions, TwoPhaseReport,
};
use faircause::schema::Schema;

#[derive(Parser)]
#[command(
    name = "faircause",
    about = "Audit and remove discrimination in discrete classification under a causal model",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Inspect a causal model file.
    Model {
        #[command(subcommand)]
        command: ModelCommand,
    },
    /// Draw a seeded sample from a model into a CSV dataset.
    Sample {
        /// Model JSON file.
        model: PathBuf,
        #[arg(long)]
        n: u64,
        #[arg(long)]
        seed: u64,
        /// Output CSV path (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Measure the discrimination of a CSV dataset.
    Audit {
        data: PathBuf,
        /// Model or schema JSON supplying the attribute list.
        #[arg(long)]
        schema: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Train a classifier on a CSV dataset and save it as JSON.
    Train {
        data: PathBuf,
        #[arg(long)]
        schema: PathBuf,
        #[command(flatten)]
        trainer: TrainerArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Per-group confusion statistics and the error bias of a classifier.
    Bias {
        data: PathBuf,
        #[arg(long)]
        schema: PathBuf,
        #[arg(long)]
        classifier: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Evaluate the probabilistic bounds.
    Bound(BoundArgs),
    /// Repair a training dataset.
    Remove {
        #[command(subcommand)]
        command: RemoveCommand,
    },
    /// Tweak a trained classifier.
    Tweak {
        #[command(subcommand)]
        command: TweakCommand,
    },
    /// Run a removal pipeline end to end.
    Pipeline {
        #[command(subcommand)]
        command: PipelineCommand,
    },
    /// Run a seeded multi-size experiment from a JSON config.
    Experiment {
        #[arg(long)]
        config: PathBuf,
        /// Include per-repetition records in the report.
        #[arg(long)]
        raw: bool,
        /// Write the JSON report to this path.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Print the JSON report instead of the text table.
        #[arg(long)]
        json: bool,
    },
}

#[derive(Subcommand)]
enum ModelCommand {
    /// List every violated admissibility invariant (empty = admissible).
    Validate {
        model: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Exact discrimination of the model (risk difference of the label
    /// between the groups).
    Effect {
        model: PathBuf,
        #[arg(long)]
        json: bool,
    },
}

#[derive(Args)]
struct TrainerArgs {
    /// Training procedure.
    #[arg(long, value_parser = ["tabular", "tree"])]
    trainer: String,
    /// Maximum tree depth (tree trainer only).
    #[arg(long, default_value_t = 4)]
    depth: u32,
    /// Tie rule for majority votes.
    #[arg(long, value_parser = ["negative", "positive"], default_value = "negative")]
    ties: String,
}

impl TrainerArgs {
    fn spec(&self) -> TrainerSpec {
        let tie_rule = match self.ties.as_str() {
            "positive" => TieRule::Positive,
            _ => TieRule::Negative,
        };
        match self.trainer.as_str() {
            "tree" => TrainerSpec::Tree { max_depth: self.depth, tie_rule },
            _ => TrainerSpec::Tabular { tie_rule },
        }
    }
}

#[derive(Args)]
struct BoundArgs {
    /// Size of a finite hypothesis class.
    #[arg(long, conflicts_with = "vc")]
    finite: Option<BigUint>,
    /// VC dimension of an infinite hypothesis class.
    #[arg(long)]
    vc: Option<u32>,
    #[arg(long)]
    npos: u64,
    #[arg(long)]
    nneg: u64,
    /// Gap threshold to evaluate at.
    #[arg(long, conflicts_with = "confidence")]
    t: Option<f64>,
    /// Invert: find the smallest t reaching this confidence.
    #[arg(long)]
    confidence: Option<f64>,
    /// Data discrimination, for the prediction-interval bound.
    #[arg(long, requires = "eps")]
    de_d: Option<f64>,
    /// Error bias, for the prediction-interval bound.
    #[arg(long, requires = "de_d")]
    eps: Option<f64>,
    #[arg(long)]
    json: bool,
}

#[derive(Subcommand)]
enum RemoveCommand {
    /// Label-only repair by alternating promotions and demotions.
    Massaging {
        data: PathBuf,
        #[arg(long)]
        schema: PathBuf,
        #[arg(long)]
        tau: f64,
        /// Repaired dataset CSV (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write the flip records as CSV.
        #[arg(long)]
        flips: Option<PathBuf>,
        #[arg(long)]
        json: bool,
    },
    /// Equalize per-group marginals of the nonprotected attributes.
    Di {
        data: PathBuf,
        #[arg(long)]
        schema: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        json: bool,
    },
}

#[derive(Subcommand)]
enum TweakCommand {
    /// Wrap a classifier with per-group prediction flips sized from the
    /// data's remaining slack.
    Randomflip {
        data: PathBuf,
        #[arg(long)]
        schema: PathBuf,
        #[arg(long)]
        classifier: PathBuf,
        #[arg(long)]
        tau: f64,
        #[arg(long)]
        seed: u64,
        /// Output path for the wrapped classifier JSON.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        json: bool,
    },
}

#[derive(Subcommand)]
enum PipelineCommand {
    /// Label repair, retraining, and (unless disabled) the flip tweak.
    TwoPhase(PipelineArgs),
    /// Feature-equalizing repair first, then the same label repair,
    /// retraining, and tweak.
    Di(PipelineArgs),
}

#[derive(Args)]
struct PipelineArgs {
    data: PathBuf,
    #[arg(long)]
    schema: PathBuf,
    #[arg(long)]
    tau: f64,
    #[arg(long)]
    seed: u64,
    #[command(flatten)]
    trainer: TrainerArgs,
    /// Skip the Phase-2 classifier tweak (two-phase only).
    #[arg(long)]
    no_tweak: bool,
    /// Write the repaired dataset CSV.
    #[arg(long)]
    out_data: Option<PathBuf>,
    /// Write the final classifier JSON.
    #[arg(long)]
    out_classifier: Option<PathBuf>,
    /// Write the flip records CSV.
    #[arg(long)]
    flips: Option<PathBuf>,
    #[arg(long)]
    json: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn emit_json<T: Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn read_dataset(data: &PathBuf, schema: &PathBuf) -> Result<(Arc<Schema>, Dataset)> {
    let schema = load_schema(schema)?;
    let file = fs::File::open(data)
        .map_err(|e| Error::domain(format!("cannot read {}: {e}", data.display())))?;
    let dataset = Dataset::read_csv(file, Arc::clone(&schema))?;
    Ok((schema, dataset))
}

fn write_dataset(dataset: &Dataset, out: &Option<PathBuf>) -> Result<()> {
    match out {
        Some(path) => {
            let file = fs::File::create(path)?;
            dataset.write_csv(file)
        }
        None => {
            let mut buf = Vec::new();
            dataset.write_csv(&mut buf)?;
            print!("{}", String::from_utf8_lossy(&buf));
            Ok(())
        }
    }
}

fn write_flips(report_flips: &[faircause::removal::FlipRecord], path: &PathBuf) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["row_index", "old_label", "new_label", "kind", "ranker_score"])?;
    for f in report_flips {
        w.write_record([
            f.row_index.to_string(),
            f.old_label.clone(),
            f.new_label.clone(),
            format!("{:?}", f.kind).to_lowercase(),
            format!("{}", f.ranker_score),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn load_classifier(path: &PathBuf) -> Result<Classifier> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::domain(format!("cannot read {}: {e}", path.display())))?;
    Classifier::from_json(&text)
}

fn print_two_phase(report: &TwoPhaseReport, json: bool) -> Result<()> {
    if json {
        return emit_json(report);
    }
    println!("two-phase report");
    println!("  DE_D before        {:>12.6}", report.de_d_before);
    println!("  DE_D* after        {:>12.6}", report.de_d_after);
    println!("  epsilon (trained)  {:>12.6}", report.epsilon_before_tweak);
    println!("  epsilon (shipped)  {:>12.6}", report.epsilon_after_tweak);
    println!("  |DE_D* + epsilon|  {:>12.6}", report.criterion_value);
    println!("  tau                {:>12.6}", report.tau);
    println!("  flips              {:>12}", report.flips.len());
    println!("  tweaked            {:>12}", report.tweaked);
    println!("  satisfied          {:>12}", report.satisfied);
    if !report.massage_reached_target {
        println!("  note: label repair stalled above its target at the data's granularity");
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Model { command } => match command {
            ModelCommand::Validate { model, json } => {
                let m = load_model(&model)?;
                let report = m.validate();
                if json {
                    emit_json(&report)?;
                } else {
                    println!("{report}");
                }
                if !report.is_valid() {
                    return Err(Error::domain("model is not admissible"));
                }
                Ok(())
            }
            ModelCommand::Effect { model, json } => {
                let m = load_model(&model)?;
                let de_m = m.true_discrimination()?;
                if json {
                    emit_json(&serde_json::json!({ "de_m": de_m }))
                } else {
                    println!("DE_M = {de_m:.6}");
                    Ok(())
                }
            }
        },
        Command::Sample { model, n, seed, out } => {
            let m = load_model(&model)?;
            let data = m.sample(n, seed)?;
            write_dataset(&data, &out)
        }
        Command::Audit { data, schema, json } => {
            let (_, dataset) = read_dataset(&data, &schema)?;
            let counts = dataset.group_counts();
            let de_d = dataset.empirical_discrimination()?;
            let rates = dataset.positive_label_rates()?;
            if json {
                emit_json(&serde_json::json!({
                    "n": counts.total(),
                    "n_pos": counts.positive,
                    "n_neg": counts.negative,
                    "positive_rate_pos_group": rates[1],
                    "positive_rate_neg_group": rates[0],
                    "de_d": de_d,
                }))
            } else {
                println!(
                    "rows: {} (n+ = {}, n- = {})",
                    counts.total(),
                    counts.positive,
                    counts.negative
                );
                println!("positive rate   {:>10.6} (non-protected group)", rates[1]);
                println!("positive rate   {:>10.6} (protected group)", rates[0]);
                println!("DE_D = {de_d:.6}");
                Ok(())
            }
        }
        Command::Train { data, schema, trainer, out } => {
            let (_, dataset) = read_dataset(&data, &schema)?;
            let h = trainer.spec().train(&dataset)?;
            fs::write(&out, h.to_json()? + "\n")?;
            println!("trained {} -> {}", h.description(), out.display());
            Ok(())
        }
        Command::Bias { data, schema, classifier, json } => {
            let (_, dataset) = read_dataset(&data, &schema)?;
            let h = load_classifier(&classifier)?;
            let confusion = confusion_by_group(&dataset, &h)?;
            let bias = error_bias(&dataset, &h)?;
            let de_dh = dataset.empirical_predicted_discrimination(&h)?;
            if json {
                emit_json(&serde_json::json!({
                    "confusion": confusion,
                    "error_bias": bias,
                    "de_dh": de_dh,
                }))
            } else {
                for (name, g) in [("c+", &confusion.positive), ("c-", &confusion.negative)] {
                    println!(
                        "{name}: n={:<6} tp={:<6} fp={:<6} fn={:<6} tn={:<6} fp_rate={:.6} fn_rate={:.6}",
                        g.n,
                        g.tp,
                        g.fp,
                        g.fn_,
                        g.tn,
                        g.fp_rate(),
                        g.fn_rate()
                    );
                }
                println!("epsilon = {:.6}", bias.epsilon);
                println!("DE_Dh   = {de_dh:.6}");
                Ok(())
            }
        }
        Command::Bound(args) => run_bound(args),
        Command::Remove { command } => match command {
            RemoveCommand::Massaging { data, schema, tau, out, flips, json } => {
                let (_, dataset) = read_dataset(&data, &schema)?;
                let ranker = faircause::classifier::train_tabular(&dataset, TieRule::default())?;
                let outcome = massage(&dataset, &ranker, tau)?;
                if let Some(path) = &flips {
                    write_flips(&outcome.flips, path)?;
                }
                if json {
                    emit_json(&serde_json::json!({
                        "de_d_before": dataset.empirical_discrimination()?,
                        "de_d_after": outcome.de_d_after,
                        "flips": outcome.flips,
                        "reached_target": outcome.reached_target,
                    }))?;
                    if out.is_some() {
                        write_dataset(&outcome.dataset, &out)?;
                    }
                } else {
                    write_dataset(&outcome.dataset, &out)?;
                    eprintln!(
                        "massaging: {} flips, DE_D {:.6} -> {:.6}{}",
                        outcome.flips.len(),
                        dataset.empirical_discrimination()?,
                        outcome.de_d_after,
                        if outcome.reached_target { "" } else { " (target unreachable)" }
                    );
                }
                Ok(())
            }
            RemoveCommand::Di { data, schema, seed, out, json } => {
                let (_, dataset) = read_dataset(&data, &schema)?;
                let repaired = di_repair(&dataset, seed)?;
                if json {
                    emit_json(&serde_json::json!({
                        "de_d": repaired.empirical_discrimination()?,
                        "rows": repaired.len(),
                    }))?;
                    if out.is_some() {
                        write_dataset(&repaired, &out)?;
                    }
                } else {
                    write_dataset(&repaired, &out)?;
                }
                Ok(())
            }
        },
        Command::Tweak { command } => match command {
            TweakCommand::Randomflip { data, schema, classifier, tau, seed, out, json } => {
                let (_, dataset) = read_dataset(&data, &schema)?;
                let h = load_classifier(&classifier)?;
                let policy = compute_flip_policy(&dataset, &h, tau)?;
                let wrapped = apply_random_flip(&h, &policy, seed);
                let eps_after = error_bias(&dataset, &wrapped)?;
                if let Some(path) = &out {
                    fs::write(path, wrapped.to_json()? + "\n")?;
                }
                if json {
                    emit_json(&serde_json::json!({
                        "policy": policy,
                        "epsilon_after": eps_after.epsilon,
                    }))
                } else {
                    println!(
                        "flip policy: p+ = {:.6} ({:?}), p- = {:.6} ({:?}), sigma = {:.6}",
                        policy.positive_group.probability,
                        policy.positive_group.target,
                        policy.negative_group.probability,
                        policy.negative_group.target,
                        policy.sigma
                    );
                    println!("epsilon after tweak = {:.6}", eps_after.epsilon);
                    Ok(())
                }
            }
        },
        Command::Pipeline { command } => {
            let (args, is_di) = match command {
                PipelineCommand::TwoPhase(args) => (args, false),
                PipelineCommand::Di(args) => (args, true),
            };
            let (_, dataset) = read_dataset(&args.data, &args.schema)?;
            let trainer = args.trainer.spec();
            let (d_star, h, report) = if is_di {
                di_pipeline(&dataset, &trainer, args.tau, args.seed)?
            } else {
                two_phase_with_options(
                    &dataset,
                    &trainer,
                    args.tau,
                    args.seed,
                    TwoPhaseOptions { tweak: !args.no_tweak },
                )?
            };
            if let Some(path) = &args.out_data {
                let file = fs::File::create(path)?;
                d_star.write_csv(file)?;
            }
            if let Some(path) = &args.out_classifier {
                fs::write(path, h.to_json()? + "\n")?;
            }
            if let Some(path) = &args.flips {
                write_flips(&report.flips, path)?;
            }
            print_two_phase(&report, args.json)
        }
        Command::Experiment { config, raw, out, json } => {
            let text = fs::read_to_string(&config)
                .map_err(|e| Error::domain(format!("cannot read {}: {e}", config.display())))?;
            let mut cfg: ExperimentConfig = serde_json::from_str(&text)?;
            cfg.raw |= raw;
            let report = run_experiment(&cfg)?;
            if let Some(path) = &out {
                fs::write(path, serde_json::to_string_pretty(&report)? + "\n")?;
            }
            if json {
                emit_json(&report)
            } else {
                print!("{}", format_report_table(&report));
                Ok(())
            }
        }
    }
}

fn run_bound(args: BoundArgs) -> Result<()> {
    let complexity = match (&args.finite, args.vc) {
        (Some(size), None) => Some(HypothesisComplexity::Finite { size: size.clone() }),
        (None, Some(d)) => Some(HypothesisComplexity::vc(d)),
        (None, None) => None,
        (Some(_), Some(_)) => unreachable!("clap conflicts_with"),
    };
    match (complexity, args.t, args.confidence) {
        // Invert the uniform bound for a target confidence.
        (Some(c), None, Some(gamma)) => {
            let t = invert_delta(&c, args.npos, args.nneg, gamma)?;
            if args.json {
                emit_json(&serde_json::json!({ "t": t, "confidence": gamma }))
            } else {
                println!("smallest t with confidence {gamma}: {t:.9}");
                Ok(())
            }
        }
        // Uniform or prediction bound at threshold t.
        (Some(c), Some(t), None) => {
            let result = match (args.de_d, args.eps) {
                (Some(de_d), Some(eps)) => prediction_bound(de_d, eps, &c, args.npos, args.nneg, t)?,
                _ => uniform_bound(&c, args.npos, args.nneg, t)?,
            };
            if args.json {
                emit_json(&result)
            } else {
                println!("{result}");
                Ok(())
            }
        }
        // No complexity: the plain sampling bound.
        (None, Some(t), None) => {
            let result = sampling_bound(args.npos, args.nneg, t)?;
            if args.json {
                emit_json(&result)
            } else {
                println!("{result}");
                Ok(())
            }
        }
        (None, None, Some(_)) => Err(Error::domain(
            "--confidence needs a hypothesis class (--finite or --vc) to invert",
        )),
        _ => Err(Error::domain("provide either --t or --confidence")),
    }
}
