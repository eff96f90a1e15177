//! Probabilistic guarantees linking the discrimination measures.
//!
//! Three closed forms, all driven by the group sizes `n+` and `n-` and a gap
//! threshold `t`:
//!
//! * the sampling bound: the population/dataset gap satisfies
//!   `P(|gap| <= t) > 1 - 4 exp(-(n+ n- / n) t^2)`;
//! * the uniform bound `delta(t)` on the prediction gap, which multiplies
//!   the same exponential by `4 |H|^2` for a finite hypothesis class or by
//!   `4 ((2 e n+)^d + (2 e n-)^d) / d^d` for VC dimension `d`;
//! * the prediction bound: with probability at least `1 - delta(t)`, the
//!   true discrimination in prediction is at most `|DE_D + eps| + t`.
//!
//! `delta` can exceed 1; raw and clamped values are both reported along with
//! a vacuity flag, and every exponential is evaluated in log space.

use serde::Serialize;

use crate::classifier::{ln_biguint, HypothesisComplexity};
use crate::error::{Error, Result};

/// Which closed form produced a bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundSource {
    /// Concentration of the dataset measure around the population measure.
    Sampling,
    /// Uniform bound over the hypothesis class (finite or VC).
    Uniform,
    /// Interval bound on the true discrimination in prediction.
    Prediction,
}

/// A (threshold, confidence) pair with provenance and echoed inputs.
#[derive(Debug, Clone, Serialize)]
pub struct BoundResult {
    pub source: BoundSource,
    /// Gap threshold the bound was evaluated at.
    pub t: f64,
    /// Lower confidence before clamping; negative values mean the bound is
    /// uninformative at this `t`.
    pub raw_confidence: f64,
    /// `max(raw_confidence, 0)`.
    pub confidence: f64,
    /// True when the raw confidence is not positive.
    pub vacuous: bool,
    pub n_pos: u64,
    pub n_neg: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub complexity: Option<ComplexityEcho>,
    /// For uniform and prediction bounds: the raw failure probability
    /// `delta(t)`, kept separately because `1 - delta` loses precision once
    /// `delta` drops below f64 resolution.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    /// For prediction bounds: the interval half-width `|DE_D + eps| + t`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub half_width: Option<f64>,
}

/// Complexity metadata echoed into reports in a JSON-friendly form.
#[derive(Debug, Clone, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ComplexityEcho {
    Finite { size: String },
    Vc { dimension: u32 },
}

impl From<&HypothesisComplexity> for ComplexityEcho {
    fn from(c: &HypothesisComplexity) -> Self {
        match c {
            HypothesisComplexity::Finite { size } => ComplexityEcho::Finite { size: size.to_string() },
            HypothesisComplexity::Vc { dimension } => ComplexityEcho::Vc { dimension: *dimension },
        }
    }
}

impl std::fmt::Display for BoundResult {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self.source {
            BoundSource::Sampling => "sampling bound",
            BoundSource::Uniform => "uniform bound",
            BoundSource::Prediction => "prediction bound",
        };
        writeln!(f, "{name}")?;
        writeln!(f, "  t               {:>14.6}", self.t)?;
        if let Some(hw) = self.half_width {
            writeln!(f, "  half width      {:>14.6}", hw)?;
        }
        writeln!(f, "  confidence      {:>14.6}", self.confidence)?;
        writeln!(f, "  raw confidence  {:>14.6e}", self.raw_confidence)?;
        if let Some(d) = self.delta {
            writeln!(f, "  delta           {:>14.6e}", d)?;
        }
        writeln!(f, "  n+ / n-         {:>7} / {:<7}", self.n_pos, self.n_neg)?;
        if let Some(c) = &self.complexity {
            match c {
                ComplexityEcho::Finite { size } => writeln!(f, "  |H|             {size:>14}")?,
                ComplexityEcho::Vc { dimension } => writeln!(f, "  VC dimension    {dimension:>14}")?,
            }
        }
        write!(f, "  vacuous         {:>14}", self.vacuous)
    }
}

fn check_counts(n_pos: u64, n_neg: u64) -> Result<()> {
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::domain("both group counts must be at least 1"));
    }
    Ok(())
}

fn check_t(t: f64) -> Result<()> {
    if !(t > 0.0) {
        return Err(Error::domain(format!("threshold t must be positive, got {t}")));
    }
    Ok(())
}

/// Exponent `-(n+ n- / n) t^2` shared by every bound.
fn exponent(n_pos: u64, n_neg: u64, t: f64) -> f64 {
    let np = n_pos as f64;
    let nn = n_neg as f64;
    -(np * nn / (np + nn)) * t * t
}

/// Confidence that the dataset measure sits within `t` of the population
/// measure: `1 - 4 exp(-(n+ n- / n) t^2)`, clamped at 0 and flagged vacuous
/// when the raw value is not positive.
pub fn sampling_bound(n_pos: u64, n_neg: u64, t: f64) -> Result<BoundResult> {
    check_counts(n_pos, n_neg)?;
    check_t(t)?;
    let raw = 1.0 - 4.0 * exponent(n_pos, n_neg, t).exp();
    Ok(BoundResult {
        source: BoundSource::Sampling,
        t,
        raw_confidence: raw,
        confidence: raw.max(0.0),
        vacuous: raw <= 0.0,
        n_pos,
        n_neg,
        complexity: None,
        delta: None,
        half_width: None,
    })
}

/// Natural log of the uniform failure probability `delta(t)`.
pub fn delta_ln(
    complexity: &HypothesisComplexity,
    n_pos: u64,
    n_neg: u64,
    t: f64,
) -> Result<f64> {
    check_counts(n_pos, n_neg)?;
    check_t(t)?;
    let ln4 = 4.0f64.ln();
    let expo = exponent(n_pos, n_neg, t);
    let ln_delta = match complexity {
        HypothesisComplexity::Finite { size } => {
            if size.bits() == 0 {
                return Err(Error::domain("finite hypothesis class size must be at least 1"));
            }
            ln4 + 2.0 * ln_biguint(size) + expo
        }
        HypothesisComplexity::Vc { dimension } => {
            let d = *dimension;
            if d == 0 {
                return Err(Error::domain("VC dimension must be at least 1"));
            }
            let d = d as f64;
            let a = d * (2.0 * std::f64::consts::E * n_pos as f64).ln();
            let b = d * (2.0 * std::f64::consts::E * n_neg as f64).ln();
            // log-sum-exp of the two growth terms
            let m = a.max(b);
            ln4 + m + ((a - m).exp() + (b - m).exp()).ln() - d * d.ln() + expo
        }
    };
    Ok(ln_delta)
}

/// Raw uniform failure probability `delta(t)`. May exceed 1 (the caller
/// clamps for a probability reading) and becomes `inf` when the log-space
/// value overflows `f64`.
pub fn delta(complexity: &HypothesisComplexity, n_pos: u64, n_neg: u64, t: f64) -> Result<f64> {
    Ok(delta_ln(complexity, n_pos, n_neg, t)?.exp())
}

/// Uniform bound packaged as a confidence statement at threshold `t`.
pub fn uniform_bound(
    complexity: &HypothesisComplexity,
    n_pos: u64,
    n_neg: u64,
    t: f64,
) -> Result<BoundResult> {
    let d = delta(complexity, n_pos, n_neg, t)?;
    let raw = 1.0 - d;
    Ok(BoundResult {
        source: BoundSource::Uniform,
        t,
        raw_confidence: raw,
        confidence: raw.max(0.0),
        vacuous: raw <= 0.0,
        n_pos,
        n_neg,
        complexity: Some(complexity.into()),
        delta: Some(d),
        half_width: None,
    })
}

/// Smallest `t` (within 1e-9, by bisection) with `1 - delta(t) >=
/// target_confidence`.
pub fn invert_delta(
    complexity: &HypothesisComplexity,
    n_pos: u64,
    n_neg: u64,
    target_confidence: f64,
) -> Result<f64> {
    check_counts(n_pos, n_neg)?;
    if !(0.0 < target_confidence && target_confidence < 1.0) {
        return Err(Error::domain(format!(
            "target confidence must lie in (0, 1), got {target_confidence}"
        )));
    }
    let ln_target = (1.0 - target_confidence).ln();
    let reaches = |t: f64| -> Result<bool> { Ok(delta_ln(complexity, n_pos, n_neg, t)? <= ln_target) };

    // delta(t) is strictly decreasing, so expand an upper bracket first.
    let mut hi = 1.0;
    const T_MAX: f64 = 1e9;
    while !reaches(hi)? {
        hi *= 2.0;
        if hi > T_MAX {
            let limiting = 1.0 - delta_ln(complexity, n_pos, n_neg, T_MAX)?.exp();
            return Err(Error::Infeasible {
                message: format!(
                    "confidence {target_confidence} unreachable for any t <= {T_MAX:e}"
                ),
                limiting_confidence: Some(limiting),
            });
        }
    }
    let mut lo = 0.0;
    while hi - lo > 1e-9 {
        let mid = 0.5 * (lo + hi);
        if reaches(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Interval bound on the true discrimination in prediction: with confidence
/// `1 - delta(t)`, its magnitude is at most `|de_d + eps| + t`.
pub fn prediction_bound(
    de_d: f64,
    eps: f64,
    complexity: &HypothesisComplexity,
    n_pos: u64,
    n_neg: u64,
    t: f64,
) -> Result<BoundResult> {
    let d = delta(complexity, n_pos, n_neg, t)?;
    let raw = 1.0 - d;
    Ok(BoundResult {
        source: BoundSource::Prediction,
        t,
        raw_confidence: raw,
        confidence: raw.max(0.0),
        vacuous: raw <= 0.0,
        n_pos,
        n_neg,
        complexity: Some(complexity.into()),
        delta: Some(d),
        half_width: Some((de_d + eps).abs() + t),
    })
}
