use super::LearnError;
use serde::{Deserialize, Serialize};

/// Belief in a hypothesis against its single alternative, kept as log-odds
/// so that long runs of updates neither underflow nor lose precision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeliefState {
    pub hypothesis: String,
    pub alternative: String,
    /// ln(P(H) / P(not H)).
    pub log_odds: f64,
    pub updates: u64,
}

impl BeliefState {
    pub fn from_odds(hypothesis: impl Into<String>, alternative: impl Into<String>, odds: f64) -> Result<Self, LearnError> {
        if !(odds > 0.0 && odds.is_finite()) {
            return Err(LearnError::InvalidBelief(odds));
        }
        Ok(BeliefState { hypothesis: hypothesis.into(), alternative: alternative.into(), log_odds: odds.ln(), updates: 0 })
    }

    pub fn from_probability(hypothesis: impl Into<String>, alternative: impl Into<String>, p: f64) -> Result<Self, LearnError> {
        if !(p > 0.0 && p < 1.0) {
            return Err(LearnError::InvalidBelief(p));
        }
        Self::from_odds(hypothesis, alternative, p / (1.0 - p))
    }

    pub fn odds(&self) -> f64 {
        self.log_odds.exp()
    }

    /// P(H), computed stably for large |log-odds|.
    pub fn probability(&self) -> f64 {
        if self.log_odds >= 0.0 {
            1.0 / (1.0 + (-self.log_odds).exp())
        } else {
            let e = self.log_odds.exp();
            e / (1.0 + e)
        }
    }

    pub fn probability_alternative(&self) -> f64 {
        1.0 - self.probability()
    }

    /// Odds-form Bayes: posterior odds = `l` × prior odds.
    pub fn update(&self, l: f64) -> Result<BeliefState, LearnError> {
        if !(l > 0.0 && l.is_finite()) {
            return Err(LearnError::NonPositive(l));
        }
        Ok(BeliefState { log_odds: self.log_odds + l.ln(), updates: self.updates + 1, ..self.clone() })
    }
}
