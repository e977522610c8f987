//! Decide, observe and update: sequential stages sharing one latent truth.

mod regions;
mod run;
mod trace;

pub use regions::{partition, region_of, Region, RESOLUTION};
pub use run::{Replication, RunSummary, TraceRecord, WorldState};
pub use trace::{write_summary, write_trace, TRACE_HEADER};

use crate::diagram::{DiagramError, InfluenceDiagram};
use crate::explain::{explain, ExplainError};
use crate::knowledge::Scenario;
use crate::learn::{BeliefState, LearnError, LikelihoodModel, Mode, Observation};
use crate::policy::Policy;
use crate::rational::{to_f64, Prob};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Diagram(#[from] DiagramError),
    #[error(transparent)]
    Explain(#[from] ExplainError),
    #[error(transparent)]
    Learn(#[from] LearnError),
    #[error("`{0}` is not an outcome of the latent variable")]
    UnknownTruth(String),
    #[error("at least one seed is required")]
    NoSeeds,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub stages: usize,
    pub mode: Mode,
    /// Outcome label of the latent variable that holds in every stage; drawn
    /// from the prior once per run when absent.
    pub truth: Option<String>,
    /// Keep acting on the initial policy however the belief moves.
    pub frozen: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig { stages: 200, mode: Mode::Aggregate, truth: None, frozen: false }
    }
}

/// A scenario's diagram prepared for simulation: the belief-range
/// partition into policy regions and the likelihood ratios under each
/// region's policy.
#[derive(Debug, Clone)]
pub struct Simulator {
    pub diagram: InfluenceDiagram,
    pub model: LikelihoodModel,
    pub regions: Vec<Region>,
    pub ratios: Vec<BTreeMap<Observation, f64>>,
    pub initial: BeliefState,
    pub config: SimConfig,
    truth: Option<usize>,
}

impl Simulator {
    pub fn from_scenario(s: &Scenario, config: SimConfig, cost: Option<&Prob>) -> Result<Self, SimError> {
        let mut d = explain(s)?.diagram;
        if let Some(c) = cost {
            for name in d.instruments.iter().map(|i| i.name.clone()).collect::<Vec<_>>() {
                d = d.with_instrument_cost(&name, c)?;
            }
        }
        let model = LikelihoodModel::from_scenario(s, &d, config.mode)?;
        Simulator::new(d, model, config)
    }

    pub fn new(d: InfluenceDiagram, model: LikelihoodModel, config: SimConfig) -> Result<Self, SimError> {
        model.check(&d)?;
        let model = model.with_mode(config.mode);
        let truth = match &config.truth {
            None => None,
            Some(label) => Some(d.outcome_index(model.latent, label).ok_or_else(|| SimError::UnknownTruth(label.clone()))?),
        };
        let prior = &d.cpt(model.latent).rows[0];
        let (h, n) = model.hypothesis_names(&d);
        let initial = BeliefState::from_probability(h, n, to_f64(&prior[model.hypothesis]))?;
        let regions = partition(&d, model.latent, model.hypothesis)?;
        let ratios = regions
            .iter()
            .map(|r| ratios_under(&d, &model, &r.policy))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Simulator { diagram: d, model, regions, ratios, initial, config, truth })
    }

    /// Region whose policy is optimal at belief `b`.
    pub fn region(&self, b: &BeliefState) -> usize {
        region_of(&self.regions, b.probability())
    }

    pub fn policy(&self, region: usize) -> &Policy {
        &self.regions[region].policy
    }
}

fn ratios_under(d: &InfluenceDiagram, m: &LikelihoodModel, p: &Policy) -> Result<BTreeMap<Observation, f64>, LearnError> {
    match m.ratios(d, p) {
        Ok(r) => Ok(r.iter().map(|(k, v)| (k.clone(), to_f64(v))).collect()),
        // A policy that never takes the enabling action yields no evidence.
        Err(LearnError::NeverEnabled(_)) => Ok(BTreeMap::new()),
        Err(e) => Err(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sim(stages: usize, truth: &str, frozen: bool) -> Simulator {
        let config = SimConfig { stages, truth: Some(truth.into()), frozen, ..SimConfig::default() };
        Simulator::from_scenario(&crate::fixtures::robot(), config, None).unwrap()
    }

    #[test]
    fn zero_stages() {
        let (trace, summary) = sim(0, "Sturdy", false).run(1).unwrap();
        assert!(trace.is_empty());
        assert_eq!(summary.total_utility, 0.0);
        assert_eq!(summary.switch_stage, None);
    }

    #[test]
    fn seeded_runs_repeat() {
        let s = sim(50, "Fragile", false);
        assert_eq!(s.run(9).unwrap(), s.run(9).unwrap());
    }

    #[test]
    fn stage_behaviour() {
        let s = sim(300, "Sturdy", false);
        let (trace, _) = s.run(3).unwrap();
        let mut prev = s.initial.probability();
        for r in &trace {
            assert!([100.0, -100.0, 10.0].contains(&r.utility));
            if r.measured_density.as_deref() == Some(".5") {
                assert_eq!(r.action, "Long-Path");
                assert_eq!(r.utility, 10.0);
                assert_eq!(r.posterior_fragile, prev);
            }
            if prev < 0.25 {
                assert_eq!(r.measured_density, None);
                assert_eq!(r.action, "Short-Path");
            }
            prev = r.posterior_fragile;
        }
        let first = &trace[0];
        if first.measured_density.as_deref() == Some(".4") && first.outcome == "Resists" {
            assert!((first.posterior_fragile - 0.7835).abs() < 1e-3);
        }
    }

    #[test]
    fn trace_replays_through_update() {
        let s = sim(200, "Sturdy", false);
        let (trace, summary) = s.run(11).unwrap();
        let mut b = s.initial.clone();
        for r in &trace {
            if let Some(l) = r.likelihood_ratio {
                b = b.update(l).unwrap();
            }
            assert_eq!(b.probability(), r.posterior_fragile);
        }
        assert_eq!(b.log_odds, summary.final_log_odds);
        let total: f64 = trace.iter().map(|r| r.utility).sum();
        assert_eq!(total, summary.total_utility);
    }

    #[test]
    fn single_seed_replication_matches_run() {
        let s = sim(100, "Sturdy", true);
        let rep = s.replicate(&[5]).unwrap();
        let (_, one) = s.run(5).unwrap();
        assert_eq!(rep.summaries, vec![one.clone()]);
        assert_eq!(rep.mean_total_utility, one.total_utility);
        assert!(s.replicate(&[]).is_err());
    }

    #[test]
    fn trace_csv_has_header() {
        let s = sim(3, "Sturdy", false);
        let (trace, _) = s.run(1).unwrap();
        let mut buf = Vec::new();
        write_trace(&mut buf, &trace).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next(), Some(TRACE_HEADER));
        assert_eq!(text.lines().count(), 4);
    }
}
