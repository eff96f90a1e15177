//! Discrimination removal: label repair, feature repair, and
//! prediction-flip tweaking, composed into the two-phase pipeline.
//!
//! Phase 1 edits only the label column of the training data (massaging),
//! which is the precondition under which the prediction guarantee carries
//! from the modified data to the original population. Phase 2 trains on the
//! repaired data and, when the non-discrimination criterion is still
//! violated, wraps the classifier with seeded per-group prediction flips
//! sized to shrink the error bias into the remaining slack.
//!
//! The feature-equalizing repair (`di_repair`) is the contrast case: it
//! modifies non-label attributes, so a pipeline built on it can clean the
//! training data perfectly and still discriminate in prediction.

use serde::{Deserialize, Serialize};

use crate::classifier::{confusion_by_group, error_bias, train_tabular, Classifier, Decision, ErrorBias, TieRule, TrainerSpec};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::rng::{derive, stream_rng};
use crate::schema::{NEGATIVE, POSITIVE};

/// Direction of one label flip during massaging.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FlipKind {
    /// Negative-group row raised from the negative to the positive label.
    Promotion,
    /// Positive-group row lowered from the positive to the negative label.
    Demotion,
}

/// Audit record of one massaging flip.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlipRecord {
    /// 0-based index into the input dataset's row order.
    pub row_index: usize,
    pub old_label: String,
    pub new_label: String,
    pub kind: FlipKind,
    /// Ranker score of the row at the moment it was flipped.
    pub ranker_score: f64,
}

/// Result of massaging: the repaired dataset plus bookkeeping.
#[derive(Debug, Clone)]
pub struct MassageOutcome {
    pub dataset: Dataset,
    pub flips: Vec<FlipRecord>,
    /// False when the target was unreachable at the dataset's granularity;
    /// the dataset then carries the smallest |discrimination| encountered.
    pub reached_target: bool,
    pub de_d_after: f64,
}

/// Which predictions a group's flip applies to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlipTarget {
    PositiveToNegative,
    NegativeToPositive,
}

/// Flip probability and direction for one protected group.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupFlipRule {
    pub probability: f64,
    pub target: FlipTarget,
}

impl GroupFlipRule {
    pub fn identity() -> Self {
        GroupFlipRule { probability: 0.0, target: FlipTarget::PositiveToNegative }
    }
}

/// Per-group prediction-flip policy with the slack it was sized for.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RandomFlipPolicy {
    pub negative_group: GroupFlipRule,
    pub positive_group: GroupFlipRule,
    /// Slack `tau - |DE_D*|` split evenly across the groups.
    pub sigma: f64,
}

impl RandomFlipPolicy {
    pub fn identity(sigma: f64) -> Self {
        RandomFlipPolicy {
            negative_group: GroupFlipRule::identity(),
            positive_group: GroupFlipRule::identity(),
            sigma,
        }
    }

    pub fn rule(&self, group: usize) -> GroupFlipRule {
        match group {
            NEGATIVE => self.negative_group,
            _ => self.positive_group,
        }
    }

    pub fn is_identity(&self) -> bool {
        self.negative_group.probability == 0.0 && self.positive_group.probability == 0.0
    }
}

/// Label-only repair: alternate promoting the highest-scored negative-group
/// negative row and demoting the lowest-scored positive-group positive row,
/// starting with whichever move reduces |discrimination|, until it is at
/// most `tau`. Score ties break toward the lower row index. If `tau` is
/// unreachable at the flip granularity the best configuration encountered is
/// returned with `reached_target == false`; no error is raised.
pub fn massage(data: &Dataset, ranker: &Classifier, tau: f64) -> Result<MassageOutcome> {
    if tau < 0.0 {
        return Err(Error::domain("tau must be nonnegative"));
    }
    if !ranker.schema().same_space(data.schema()) {
        return Err(Error::domain(
            "ranker attribute space does not match the dataset schema",
        ));
    }
    let schema = data.schema();
    let c = schema.protected_index();
    let l = schema.label_index();
    let counts = data.group_counts();
    let de0 = data.empirical_discrimination()?;

    let scores: Vec<f64> = data.rows().iter().map(|r| ranker.positive_score(r)).collect();
    let mut rows = data.rows().to_vec();
    let mut pos_labels = [0usize; 2];
    for row in &rows {
        if row[l] as usize == POSITIVE {
            pos_labels[row[c] as usize] += 1;
        }
    }
    let de_of = |pos_labels: &[usize; 2]| {
        pos_labels[POSITIVE] as f64 / counts.positive as f64
            - pos_labels[NEGATIVE] as f64 / counts.negative as f64
    };

    let mut de = de0;
    let mut flips = Vec::new();
    let tol = 1e-12;

    // A promotion moves the gap by -1/n-, a demotion by -1/n+; either is
    // feasible only while its candidate pool is nonempty.
    let de_after = |kind: FlipKind, pos_labels: &[usize; 2]| -> Option<f64> {
        let mut next = *pos_labels;
        match kind {
            FlipKind::Promotion => {
                if next[NEGATIVE] >= counts.negative {
                    return None;
                }
                next[NEGATIVE] += 1;
            }
            FlipKind::Demotion => {
                next[POSITIVE] = next[POSITIVE].checked_sub(1)?;
            }
        }
        Some(de_of(&next))
    };
    let reduces = |kind: FlipKind, pos_labels: &[usize; 2], de: f64| {
        de_after(kind, pos_labels).is_some_and(|next| next.abs() < de.abs())
    };

    let mut kind = if de.abs() <= tau + tol {
        None
    } else if reduces(FlipKind::Promotion, &pos_labels, de) {
        Some(FlipKind::Promotion)
    } else if reduces(FlipKind::Demotion, &pos_labels, de) {
        Some(FlipKind::Demotion)
    } else {
        None
    };

    while let Some(k) = kind {
        if de.abs() <= tau + tol {
            break;
        }
        let candidate = match k {
            FlipKind::Promotion => rows
                .iter()
                .enumerate()
                .filter(|(_, r)| r[c] as usize == NEGATIVE && r[l] as usize == NEGATIVE)
                .max_by(|(ia, _), (ib, _)| {
                    scores[*ia]
                        .partial_cmp(&scores[*ib])
                        .unwrap()
                        .then(ib.cmp(ia)) // lower index wins ties
                })
                .map(|(i, _)| i),
            FlipKind::Demotion => rows
                .iter()
                .enumerate()
                .filter(|(_, r)| r[c] as usize == POSITIVE && r[l] as usize == POSITIVE)
                .min_by(|(ia, _), (ib, _)| {
                    scores[*ia]
                        .partial_cmp(&scores[*ib])
                        .unwrap()
                        .then(ia.cmp(ib))
                })
                .map(|(i, _)| i),
        };
        let Some(row_index) = candidate else { break };
        let next_de = de_after(k, &pos_labels);
        if next_de.abs() >= de.abs() {
            break; // no further strict progress: keep the best configuration
        }
        let (old, new) = match k {
            FlipKind::Promotion => (NEGATIVE, POSITIVE),
            FlipKind::Demotion => (POSITIVE, NEGATIVE),
        };
        rows[row_index][l] = new as u8;
        match k {
            FlipKind::Promotion => pos_labels[NEGATIVE] += 1,
            FlipKind::Demotion => pos_labels[POSITIVE] -= 1,
        }
        de = next_de;
        flips.push(FlipRecord {
            row_index,
            old_label: schema.label().domain[old].clone(),
            new_label: schema.label().domain[new].clone(),
            kind: k,
            ranker_score: scores[row_index],
        });
        kind = Some(match k {
            FlipKind::Promotion => FlipKind::Demotion,
            FlipKind::Demotion => FlipKind::Promotion,
        });
    }

    let dataset = Dataset::new(std::sync::Arc::clone(schema), rows)?;
    Ok(MassageOutcome { dataset, flips, reached_target: de.abs() <= tau + tol, de_d_after: de })
}

/// Feature-equalizing repair for categorical attributes: per non-label
/// attribute, move both groups' conditional distributions onto the
/// group-size-weighted mixture by seeded random reassignment of rows from
/// over- to under-represented values. Labels and the protected column are
/// never touched; final per-group marginals match the mixture within `1/n_g`.
pub fn di_repair(data: &Dataset, seed: u64) -> Result<Dataset> {
    let schema = data.schema();
    let counts = data.group_counts();
    if counts.negative == 0 || counts.positive == 0 {
        let domain = &schema.protected().domain;
        let missing = if counts.negative == 0 { &domain[NEGATIVE] } else { &domain[POSITIVE] };
        return Err(Error::undefined(format!("no rows with {missing}")));
    }
    let c = schema.protected_index();
    let n = data.len() as f64;
    let mut rows = data.rows().to_vec();

    for (slot, &attr) in schema.z_indices().iter().enumerate() {
        let k = schema.attribute(attr).cardinality();
        // Mixture target: the overall marginal of this attribute.
        let mut global = vec![0usize; k];
        for row in &rows {
            global[row[attr] as usize] += 1;
        }
        let target: Vec<f64> = global.iter().map(|&g| g as f64 / n).collect();

        for group in [NEGATIVE, POSITIVE] {
            let members: Vec<usize> = (0..rows.len())
                .filter(|&i| rows[i][c] as usize == group)
                .collect();
            let n_g = members.len();
            let quota = largest_remainder(&target, n_g);
            let mut current = vec![0usize; k];
            for &i in &members {
                current[rows[i][attr] as usize] += 1;
            }
            // Donors: rows in over-represented values, shuffled on the
            // stream dedicated to this (attribute, group).
            let mut donors: Vec<usize> = Vec::new();
            let mut surplus = vec![0usize; k];
            for v in 0..k {
                surplus[v] = current[v].saturating_sub(quota[v]);
            }
            for &i in &members {
                let v = rows[i][attr] as usize;
                if surplus[v] > 0 {
                    donors.push(i);
                    surplus[v] -= 1;
                }
            }
            let mut rng = stream_rng(seed, (slot * 2 + group) as u64);
            shuffle(&mut donors, &mut rng);
            let mut donor_iter = donors.into_iter();
            for v in 0..k {
                for _ in current[v]..quota[v] {
                    let i = donor_iter
                        .next()
                        .expect("surplus and deficit totals match by construction");
                    rows[i][attr] = v as u8;
                }
            }
        }
    }
    Dataset::new(std::sync::Arc::clone(schema), rows)
}

/// Integer quota per value from fractional targets, by largest remainder;
/// each quota is within 1 of `target * n`.
fn largest_remainder(target: &[f64], n: usize) -> Vec<usize> {
    let mut quota: Vec<usize> = target.iter().map(|&p| (p * n as f64).floor() as usize).collect();
    let assigned: usize = quota.iter().sum();
    let mut order: Vec<usize> = (0..target.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = target[a] * n as f64 - quota[a] as f64;
        let fb = target[b] * n as f64 - quota[b] as f64;
        fb.partial_cmp(&fa).unwrap().then(a.cmp(&b))
    });
    for &v in order.iter().take(n - assigned) {
        quota[v] += 1;
    }
    quota
}

fn shuffle(items: &mut [usize], rng: &mut impl rand::Rng) {
    for i in (1..items.len()).rev() {
        let j = rng.gen_range(0..=i);
        items.swap(i, j);
    }
}

/// Size the per-group flip probabilities so the per-group error-rate gaps
/// fall within half the slack `sigma = tau - |DE_D*|` in expectation,
/// taking the minimal probability that suffices.
pub fn compute_flip_policy(data_star: &Dataset, h_star: &Classifier, tau: f64) -> Result<RandomFlipPolicy> {
    let de = data_star.empirical_discrimination()?;
    let sigma = tau - de.abs();
    if sigma < 0.0 {
        return Err(Error::PhaseOrder(format!(
            "data discrimination {:.6} exceeds tau {:.6}; repair the labels before tweaking",
            de.abs(),
            tau
        )));
    }
    flip_policy_with_slack(data_star, h_star, sigma)
}

/// The flip-policy computation against an explicit slack, for callers that
/// budget it differently.
pub fn flip_policy_with_slack(data: &Dataset, h: &Classifier, sigma: f64) -> Result<RandomFlipPolicy> {
    if sigma < 0.0 {
        return Err(Error::PhaseOrder("slack must be nonnegative".to_string()));
    }
    let confusion = confusion_by_group(data, h)?;
    let mut rules = [GroupFlipRule::identity(); 2];
    for group in [NEGATIVE, POSITIVE] {
        let stats = confusion.group(group);
        let diff = stats.fp_rate() - stats.fn_rate();
        if diff.abs() <= sigma / 2.0 {
            continue;
        }
        let group_name = &data.schema().protected().domain[group];
        if diff > 0.0 {
            let denom = stats.predicted_positive();
            if denom == 0 {
                return Err(Error::Infeasible {
                    message: format!(
                        "group {group_name} needs positive predictions flipped but has none"
                    ),
                    limiting_confidence: None,
                });
            }
            rules[group] = GroupFlipRule {
                probability: ((diff - sigma / 2.0) * stats.n as f64 / denom as f64).clamp(0.0, 1.0),
                target: FlipTarget::PositiveToNegative,
            };
        } else {
            let denom = stats.predicted_negative();
            if denom == 0 {
                return Err(Error::Infeasible {
                    message: format!(
                        "group {group_name} needs negative predictions flipped but has none"
                    ),
                    limiting_confidence: None,
                });
            }
            rules[group] = GroupFlipRule {
                probability: ((-diff - sigma / 2.0) * stats.n as f64 / denom as f64).clamp(0.0, 1.0),
                target: FlipTarget::NegativeToPositive,
            };
        }
    }
    Ok(RandomFlipPolicy {
        negative_group: rules[NEGATIVE],
        positive_group: rules[POSITIVE],
        sigma,
    })
}

/// Wrap a classifier with the flip policy. The wrapped prediction for an
/// input cell draws once from the ChaCha8 stream keyed by `seed` on that
/// cell's code, so it is deterministic per `(seed, input)`.
pub fn apply_random_flip(h: &Classifier, policy: &RandomFlipPolicy, seed: u64) -> Classifier {
    Classifier::new(
        std::sync::Arc::clone(h.schema()),
        Decision::RandomFlip {
            base: Box::new(h.decision().clone()),
            policy: *policy,
            seed,
        },
        h.complexity().clone(),
        h.tie_rule(),
        format!("{} + per-group prediction flips", h.description()),
    )
}

/// Final state of a removal pipeline run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TwoPhaseReport {
    pub de_d_before: f64,
    /// Discrimination of the repaired training data (`DE_D*`).
    pub de_d_after: f64,
    pub epsilon_before_tweak: f64,
    pub epsilon_after_tweak: f64,
    /// `|DE_D* + epsilon|` for the classifier as shipped.
    pub criterion_value: f64,
    pub tau: f64,
    pub flips: Vec<FlipRecord>,
    pub policy: RandomFlipPolicy,
    pub satisfied: bool,
    /// False when label repair stalled above its target granularity.
    pub massage_reached_target: bool,
    /// True when the shipped classifier carries the flip wrapper.
    pub tweaked: bool,
}

/// Options for [`two_phase`].
#[derive(Debug, Clone, Copy)]
pub struct TwoPhaseOptions {
    /// Run the classifier tweak when the criterion is still violated after
    /// retraining. Disabled only for ablation experiments.
    pub tweak: bool,
}

impl Default for TwoPhaseOptions {
    fn default() -> Self {
        TwoPhaseOptions { tweak: true }
    }
}

/// The two-phase removal pipeline.
///
/// Phase 1: if the trained classifier already meets `|DE_D + eps| <= tau`,
/// nothing changes. Otherwise the labels are massaged to drive the data
/// discrimination to zero (the repaired mechanism then matches the original
/// population on everything but the label).
///
/// Phase 2: retrain on the repaired data; if the criterion is still
/// violated, size a flip policy from the remaining slack, wrap the
/// classifier, and re-measure the error bias of the wrapped classifier
/// empirically.
pub fn two_phase(
    data: &Dataset,
    trainer: &TrainerSpec,
    tau: f64,
    seed: u64,
) -> Result<(Dataset, Classifier, TwoPhaseReport)> {
    two_phase_with_options(data, trainer, tau, seed, TwoPhaseOptions::default())
}

pub fn two_phase_with_options(
    data: &Dataset,
    trainer: &TrainerSpec,
    tau: f64,
    seed: u64,
    options: TwoPhaseOptions,
) -> Result<(Dataset, Classifier, TwoPhaseReport)> {
    if tau < 0.0 {
        return Err(Error::domain("tau must be nonnegative"));
    }
    let de_d = data.empirical_discrimination()?;
    let h = trainer.train(data)?;
    let eps = error_bias(data, &h)?;
    if (de_d + eps.epsilon).abs() <= tau {
        let report = TwoPhaseReport {
            de_d_before: de_d,
            de_d_after: de_d,
            epsilon_before_tweak: eps.epsilon,
            epsilon_after_tweak: eps.epsilon,
            criterion_value: (de_d + eps.epsilon).abs(),
            tau,
            flips: Vec::new(),
            policy: RandomFlipPolicy::identity((tau - de_d.abs()).max(0.0)),
            satisfied: true,
            massage_reached_target: true,
            tweaked: false,
        };
        return Ok((data.clone(), h, report));
    }

    let ranker = train_tabular(data, TieRule::default())?;
    let massaged = massage(data, &ranker, 0.0)?;
    finish_phase_two(de_d, massaged, trainer, tau, seed, options.tweak)
}

/// The contrast pipeline: equalize the nonprotected attributes first, then
/// run the same label repair, training, and tweak on the repaired data.
/// Its training data comes out clean, but because non-label attributes were
/// modified the prediction guarantee no longer transfers to the population.
pub fn di_pipeline(
    data: &Dataset,
    trainer: &TrainerSpec,
    tau: f64,
    seed: u64,
) -> Result<(Dataset, Classifier, TwoPhaseReport)> {
    if tau < 0.0 {
        return Err(Error::domain("tau must be nonnegative"));
    }
    let de_d = data.empirical_discrimination()?;
    let repaired = di_repair(data, derive(seed, "repair"))?;
    let ranker = train_tabular(&repaired, TieRule::default())?;
    let massaged = massage(&repaired, &ranker, 0.0)?;
    finish_phase_two(de_d, massaged, trainer, tau, seed, true)
}

fn finish_phase_two(
    de_d_before: f64,
    massaged: MassageOutcome,
    trainer: &TrainerSpec,
    tau: f64,
    seed: u64,
    tweak: bool,
) -> Result<(Dataset, Classifier, TwoPhaseReport)> {
    let d_star = massaged.dataset;
    let de_d_star = massaged.de_d_after;
    let h_star = trainer.train(&d_star)?;
    let eps_before = error_bias(&d_star, &h_star)?;

    let mut classifier = h_star;
    let mut eps_after: ErrorBias = eps_before;
    let mut policy = RandomFlipPolicy::identity((tau - de_d_star.abs()).max(0.0));
    let mut tweaked = false;
    if (de_d_star + eps_before.epsilon).abs() > tau && tweak && de_d_star.abs() <= tau {
        policy = compute_flip_policy(&d_star, &classifier, tau)?;
        let wrapped = apply_random_flip(&classifier, &policy, derive(seed, "flip"));
        eps_after = error_bias(&d_star, &wrapped)?;
        classifier = wrapped;
        tweaked = true;
    }

    let criterion_value = (de_d_star + eps_after.epsilon).abs();
    let report = TwoPhaseReport {
        de_d_before,
        de_d_after: de_d_star,
        epsilon_before_tweak: eps_before.epsilon,
        epsilon_after_tweak: eps_after.epsilon,
        criterion_value,
        tau,
        flips: massaged.flips,
        policy,
        satisfied: criterion_value <= tau + 1e-12,
        massage_reached_target: massaged.reached_target,
        tweaked,
    };
    Ok((d_star, classifier, report))
}
