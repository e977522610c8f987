//! Odds-form belief revision about a binary latent variable.

mod belief;
mod likelihood;

pub use belief::BeliefState;
pub use likelihood::{LikelihoodModel, Mode, Observation};

use crate::diagram::{DiagramError, InfluenceDiagram};
use crate::policy::{optimal_policy, switch_threshold, ThresholdError};
use crate::rational::{to_f64, Prob};
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LearnError {
    #[error(transparent)]
    Diagram(#[from] DiagramError),
    #[error("likelihood ratio must be positive and finite, got {0}")]
    NonPositive(f64),
    #[error("belief must be a probability in (0, 1) or positive odds, got {0}")]
    InvalidBelief(f64),
    #[error("observation is impossible under both hypotheses")]
    Impossible,
    #[error("observation is possible under only one hypothesis")]
    Conclusive,
    #[error("the enabling action is never taken when the latent is {0}")]
    NeverEnabled(String),
    #[error("exact mode needs the information state the observation was made in")]
    MissingContext,
    #[error("the belief drifts away from the target and never reaches it")]
    NeverReaches,
    #[error(transparent)]
    Threshold(#[from] ThresholdError),
    #[error("{0}")]
    Protocol(String),
}

/// Expected number of observations until the odds move from their current
/// value to `target_odds` when each multiplies them by `avg_l` on average:
/// the x solving odds · avg_l^x = target.
pub fn predict_switch(b: &BeliefState, avg_l: f64, target_odds: f64) -> Result<f64, LearnError> {
    if !(avg_l > 0.0 && avg_l.is_finite()) {
        return Err(LearnError::NonPositive(avg_l));
    }
    if !(target_odds > 0.0 && target_odds.is_finite()) {
        return Err(LearnError::InvalidBelief(target_odds));
    }
    let gap = target_odds.ln() - b.log_odds;
    if gap == 0.0 {
        return Ok(0.0);
    }
    let drift = avg_l.ln();
    if drift == 0.0 || gap.signum() != drift.signum() {
        return Err(LearnError::NeverReaches);
    }
    Ok(gap / drift)
}

/// When the current policy should change, and how long the evidence takes
/// to get there on average.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SwitchPrediction {
    /// P(H) at which the optimal action changes.
    pub threshold_belief: f64,
    #[serde(skip)]
    pub threshold_exact: Prob,
    /// Expected per-observation odds multiplier under the stated truth.
    pub avg_likelihood_ratio: f64,
    pub expected_steps: f64,
}

/// Finds the nearest belief at which the optimal policy stops avoiding the
/// observation in some information state, the average likelihood ratio
/// when the latent truly is `truth`, and the expected number of
/// observations to reach that belief from the diagram's prior.
pub fn predict_switch_for(d: &InfluenceDiagram, m: &LikelihoodModel, truth: usize) -> Result<SwitchPrediction, LearnError> {
    let policy = optimal_policy(d)?;
    let (dec, enabling) = m.enabling;
    let prior = to_f64(&d.cpt(m.latent).rows[0][m.hypothesis]);
    let belief = BeliefState::from_probability("H", "not H", prior)?;
    let mut best: Option<Prob> = None;
    for (info, &action) in policy.rules.get(&dec).into_iter().flatten() {
        if action == enabling {
            continue;
        }
        let context: Vec<(usize, usize)> = d.parents(dec).iter().copied().zip(info.iter().copied()).collect();
        let t = match switch_threshold(d, dec, &context, m.latent, m.hypothesis) {
            Ok(t) => t.prior,
            Err(ThresholdError::NoThreshold | ThresholdError::UnreachableContext) => continue,
            Err(e) => return Err(e.into()),
        };
        let closer = best.as_ref().is_none_or(|b| (to_f64(&t) - prior).abs() < (to_f64(b) - prior).abs());
        if closer {
            best = Some(t);
        }
    }
    let threshold_exact = best.ok_or(ThresholdError::NoThreshold)?;
    let threshold_belief = to_f64(&threshold_exact);
    let avg_likelihood_ratio = m.average_likelihood_ratio(d, &policy, truth)?;
    let expected_steps = predict_switch(&belief, avg_likelihood_ratio, threshold_belief / (1.0 - threshold_belief))?;
    Ok(SwitchPrediction { threshold_belief, threshold_exact, avg_likelihood_ratio, expected_steps })
}
