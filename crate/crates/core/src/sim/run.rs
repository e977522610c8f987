use super::{SimError, Simulator};
use crate::diagram::NodeKind;
use crate::learn::{BeliefState, Mode, Observation};
use crate::rational::to_f64;
use rand::distributions::{Distribution, WeightedIndex};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// The latent truth shared by all stages and the run's random stream.
#[derive(Debug, Clone)]
pub struct WorldState {
    pub truth: usize,
    pub rng: ChaCha8Rng,
}

/// One stage of a run. `measured_density` is the instrument reading when a
/// measurement was taken; `posterior_fragile` is P(H) after the stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub stage: usize,
    pub measured_density: Option<String>,
    pub action: String,
    pub outcome: String,
    pub utility: f64,
    pub posterior_fragile: f64,
    pub likelihood_ratio: Option<f64>,
    pub policy_id: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub seed: u64,
    pub truth: String,
    pub stages: usize,
    pub total_utility: f64,
    /// First stage after which the belief-optimal policy differs from the
    /// initial one.
    pub switch_stage: Option<usize>,
    /// P(H) after the last stage.
    pub final_belief: f64,
    pub final_log_odds: f64,
    pub observations: usize,
    pub mean_log_likelihood_ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Replication {
    pub runs: usize,
    pub switched: usize,
    pub mean_switch_stage: Option<f64>,
    pub median_switch_stage: Option<f64>,
    pub mean_total_utility: f64,
    pub median_total_utility: f64,
    /// Ordered by seed as given.
    pub summaries: Vec<RunSummary>,
}

impl Simulator {
    pub fn world(&self, seed: u64) -> WorldState {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let truth = self.truth.unwrap_or_else(|| {
            let prior: Vec<f64> = self.diagram.cpt(self.model.latent).rows[0].iter().map(to_f64).collect();
            WeightedIndex::new(&prior).expect("prior has positive mass").sample(&mut rng)
        });
        WorldState { truth, rng }
    }

    /// Acts on the policy for belief `b` (or the initial policy when frozen),
    /// samples the stage's world, and updates the belief if the observation
    /// was made.
    pub fn step(&self, world: &mut WorldState, b: &BeliefState, stage: usize) -> Result<(TraceRecord, BeliefState), SimError> {
        let d = &self.diagram;
        let acting = if self.config.frozen { self.region(&self.initial) } else { self.region(b) };
        let policy = self.policy(acting);
        let mut values = vec![0usize; d.nodes.len()];
        for n in d.topological_order().expect("validated diagram") {
            match d.kind(n) {
                NodeKind::Chance if n == self.model.latent => values[n] = world.truth,
                NodeKind::Chance => {
                    let cpt = d.cpt(n);
                    let row: Vec<f64> = cpt.rows[d.row_index(&cpt.parents, &values)].iter().map(to_f64).collect();
                    values[n] = WeightedIndex::new(&row).expect("rows are distributions").sample(&mut world.rng);
                }
                NodeKind::Decision => {
                    let info: Vec<usize> = d.parents(n).iter().map(|&p| values[p]).collect();
                    values[n] = policy.choose(d, n, &info);
                }
                NodeKind::Value => {}
            }
        }
        let measured = d
            .instruments
            .iter()
            .find(|i| values[i.decision] == i.measure_action)
            .map(|i| d.nodes[i.reading].outcomes[values[i.reading]].clone());
        let (dec, enabling) = self.model.enabling;
        let action = d.nodes[dec].outcomes[values[dec]].clone();
        let (outcome, l, next) = if values[dec] == enabling {
            let context = match self.model.mode {
                Mode::Aggregate => None,
                Mode::Exact => Some(d.parents(dec).iter().map(|&p| values[p]).collect()),
            };
            let key = Observation { outcome: values[self.model.observed], context };
            let l = *self.ratios[acting].get(&key).ok_or(crate::learn::LearnError::Conclusive)?;
            (d.nodes[self.model.observed].outcomes[key.outcome].clone(), Some(l), b.update(l)?)
        } else {
            (action.clone(), None, b.clone())
        };
        let record = TraceRecord {
            stage,
            measured_density: measured,
            action,
            outcome,
            utility: to_f64(d.utility_of(&values)),
            posterior_fragile: next.probability(),
            likelihood_ratio: l,
            policy_id: acting,
        };
        Ok((record, next))
    }

    pub fn run(&self, seed: u64) -> Result<(Vec<TraceRecord>, RunSummary), SimError> {
        let mut world = self.world(seed);
        let truth = self.diagram.nodes[self.model.latent].outcomes[world.truth].clone();
        let start = self.region(&self.initial);
        let mut b = self.initial.clone();
        let mut trace = Vec::with_capacity(self.config.stages);
        let mut switch_stage = None;
        let mut log_lr = Vec::new();
        for stage in 1..=self.config.stages {
            let (record, next) = self.step(&mut world, &b, stage)?;
            if let Some(l) = record.likelihood_ratio {
                log_lr.push(l.ln());
            }
            b = next;
            if switch_stage.is_none() && self.region(&b) != start {
                switch_stage = Some(stage);
            }
            trace.push(record);
        }
        let summary = RunSummary {
            seed,
            truth,
            stages: self.config.stages,
            total_utility: trace.iter().map(|r| r.utility).sum(),
            switch_stage,
            final_belief: b.probability(),
            final_log_odds: b.log_odds,
            observations: log_lr.len(),
            mean_log_likelihood_ratio: (!log_lr.is_empty()).then(|| log_lr.iter().sum::<f64>() / log_lr.len() as f64),
        };
        Ok((trace, summary))
    }

    /// Independent runs, one per seed, executed in parallel and reported in
    /// seed order.
    pub fn replicate(&self, seeds: &[u64]) -> Result<Replication, SimError> {
        if seeds.is_empty() {
            return Err(SimError::NoSeeds);
        }
        let summaries: Vec<RunSummary> =
            seeds.par_iter().map(|&s| self.run(s).map(|(_, summary)| summary)).collect::<Result<_, _>>()?;
        let switches: Vec<f64> = summaries.iter().filter_map(|s| s.switch_stage).map(|x| x as f64).collect();
        let utilities: Vec<f64> = summaries.iter().map(|s| s.total_utility).collect();
        Ok(Replication {
            runs: summaries.len(),
            switched: switches.len(),
            mean_switch_stage: mean(&switches),
            median_switch_stage: median(&switches),
            mean_total_utility: mean(&utilities).unwrap_or(0.0),
            median_total_utility: median(&utilities).unwrap_or(0.0),
            summaries,
        })
    }
}

fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

fn median(xs: &[f64]) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[m] } else { (v[m - 1] + v[m]) / 2.0 })
}
