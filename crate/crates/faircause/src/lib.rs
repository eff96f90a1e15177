//! Auditing and removing discrimination in discrete classification under an
//! explicit causal model.
//!
//! The crate models a population as a discrete Markovian causal model over
//! one binary protected attribute, nonprotected attributes, and a binary
//! decision label. On top of that it provides:
//!
//! * the four discrimination measures: exact risk difference in the
//!   population ([`CausalModel::true_discrimination`]), its dataset
//!   estimate ([`Dataset::empirical_discrimination`]), and both again for a
//!   classifier's predictions (via [`CausalModel::with_classifier`] and
//!   [`Dataset::empirical_predicted_discrimination`]);
//! * the probabilistic bounds linking them ([`bounds`]);
//! * classifier training with per-group confusion statistics and the error
//!   bias identity ([`classifier`]);
//! * the two-phase removal pipeline with label-only repair and seeded
//!   prediction flips, plus the feature-equalizing repair baseline that
//!   shows why modifying nonprotected attributes forfeits the prediction
//!   guarantee ([`removal`]);
//! * a seeded experiment harness sweeping sample sizes with repetition
//!   statistics ([`harness`]).

pub mod bounds;
pub mod classifier;
pub mod dataset;
pub mod error;
pub mod fit;
pub mod fixtures;
pub mod harness;
pub mod model;
pub mod model_io;
pub mod removal;
pub mod rng;
pub mod schema;

pub use classifier::{
    confusion_by_group, error_bias, train_tabular, train_tree, Classifier, ConfusionByGroup,
    ErrorBias, HypothesisComplexity, TieRule, TrainerSpec,
};
pub use dataset::{Dataset, FrequencyQuery, GroupCounts};
pub use error::{Error, Result};
pub use fit::{fit_cpts, Dag};
pub use model::{CausalModel, Cpt, ValidationReport, Violation, DEFAULT_STATE_CAP};
pub use model_io::{load_model, load_schema, model_from_json, model_to_json, save_model};
pub use removal::{
    apply_random_flip, compute_flip_policy, di_pipeline, di_repair, flip_policy_with_slack,
    massage, two_phase, two_phase_with_options, FlipKind, FlipRecord, FlipTarget, MassageOutcome,
    RandomFlipPolicy, TwoPhaseOptions, TwoPhaseReport,
};
pub use schema::{Assignment, Attribute, Role, Schema};
