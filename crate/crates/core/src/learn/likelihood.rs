use super::LearnError;
use crate::diagram::{joint_distribution, InfluenceDiagram, NodeId, NodeKind, World};
use crate::knowledge::Scenario;
use crate::policy::Policy;
use crate::rational::{to_f64, Prob};
use num_traits::Zero;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

/// How much of the observed information state a likelihood ratio
/// conditions on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Condition only on the enabling action (e.g. the box was stacked),
    /// averaging over every information state in which it is taken.
    #[default]
    Aggregate,
    /// Condition on the full information state at the enabling decision.
    Exact,
}

impl FromStr for Mode {
    type Err = LearnError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "aggregate" => Ok(Mode::Aggregate),
            "exact" => Ok(Mode::Exact),
            _ => Err(LearnError::Protocol(format!("unknown likelihood mode `{s}`"))),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Aggregate => "aggregate",
            Mode::Exact => "exact",
        })
    }
}

/// An outcome of the observed node, with the values of the enabling
/// decision's informational parents when they are known.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Observation {
    pub outcome: usize,
    pub context: Option<Vec<usize>>,
}

/// Which latent variable is being learned, what is observed, and when an
/// observation is informative.
#[derive(Debug, Clone, PartialEq)]
pub struct LikelihoodModel {
    pub latent: NodeId,
    /// Outcome index of H; the other outcome is the alternative.
    pub hypothesis: usize,
    pub observed: NodeId,
    /// Decision and action under which the observation is made.
    pub enabling: (NodeId, usize),
    pub mode: Mode,
}

impl LikelihoodModel {
    /// Reads the observation protocol declared by the scenario.
    pub fn from_scenario(s: &Scenario, d: &InfluenceDiagram, mode: Mode) -> Result<Self, LearnError> {
        let proto = s.observation.as_ref().ok_or_else(|| LearnError::Protocol("scenario declares no observation reports".into()))?;
        let find = |name: &str| d.node_id(name).ok_or_else(|| LearnError::Protocol(format!("`{name}` is not a diagram node")));
        let latent = find(&proto.latent)?;
        let observed = find(&proto.observe)?;
        let dec = find(&proto.enabling.variable)?;
        let outcome = |node: NodeId, label: &str| {
            d.outcome_index(node, label)
                .ok_or_else(|| LearnError::Protocol(format!("`{label}` is not an outcome of `{}`", d.name(node))))
        };
        let hypothesis = outcome(latent, &proto.hypothesis.to_string())?;
        let action = outcome(dec, &proto.enabling.value.to_string())?;
        let m = LikelihoodModel { latent, hypothesis, observed, enabling: (dec, action), mode };
        m.check(d)?;
        Ok(m)
    }

    pub fn check(&self, d: &InfluenceDiagram) -> Result<(), LearnError> {
        let n = d.nodes.len();
        if self.latent >= n || self.observed >= n || self.enabling.0 >= n {
            return Err(LearnError::Protocol("node out of range".into()));
        }
        if d.kind(self.latent) != NodeKind::Chance || d.arity(self.latent) != 2 || !d.parents(self.latent).is_empty() {
            return Err(LearnError::Protocol(format!("`{}` must be a binary root chance node", d.name(self.latent))));
        }
        if d.kind(self.observed) != NodeKind::Chance || !d.ancestors(self.observed).contains(&self.latent) {
            return Err(LearnError::Protocol(format!(
                "`{}` must be a chance node downstream of `{}`",
                d.name(self.observed),
                d.name(self.latent)
            )));
        }
        if d.kind(self.enabling.0) != NodeKind::Decision || self.enabling.1 >= d.arity(self.enabling.0) {
            return Err(LearnError::Protocol(format!("`{}` is not a decision action", d.name(self.enabling.0))));
        }
        Ok(())
    }

    pub fn with_mode(&self, mode: Mode) -> Self {
        LikelihoodModel { mode, ..self.clone() }
    }

    pub fn hypothesis_names(&self, d: &InfluenceDiagram) -> (String, String) {
        let o = &d.nodes[self.latent].outcomes;
        (o[self.hypothesis].clone(), o[1 - self.hypothesis].clone())
    }

    /// Joint restricted to worlds where the latent has outcome `holds`.
    fn worlds(&self, d: &InfluenceDiagram, p: &Policy, holds: usize) -> Result<Vec<World>, LearnError> {
        let dh = d.with_point_mass(self.latent, holds)?;
        Ok(joint_distribution(&dh, p)?)
    }

    fn key(&self, d: &InfluenceDiagram, w: &World) -> Observation {
        let context = match self.mode {
            Mode::Aggregate => None,
            Mode::Exact => Some(d.parents(self.enabling.0).iter().map(|&q| w.values[q]).collect()),
        };
        Observation { outcome: w.values[self.observed], context }
    }

    /// Unnormalized P(observation, enabling action | latent = holds) per
    /// observation key, and their total P(enabling action | latent = holds).
    fn masses(&self, d: &InfluenceDiagram, p: &Policy, holds: usize) -> Result<(BTreeMap<Observation, Prob>, Prob), LearnError> {
        let worlds = self.worlds(d, p, holds)?;
        let (dec, action) = self.enabling;
        let mut mass: BTreeMap<Observation, Prob> = BTreeMap::new();
        let mut total = Prob::zero();
        for w in worlds.iter().filter(|w| w.values[dec] == action && !w.prob.is_zero()) {
            *mass.entry(self.key(d, w)).or_insert_with(Prob::zero) += &w.prob;
            total += &w.prob;
        }
        if total.is_zero() {
            return Err(LearnError::NeverEnabled(d.nodes[self.latent].outcomes[holds].clone()));
        }
        Ok((mass, total))
    }

    /// P(observation | latent = holds, enabling action taken) for every
    /// possible observation key.
    pub fn distribution(&self, d: &InfluenceDiagram, p: &Policy, holds: usize) -> Result<BTreeMap<Observation, Prob>, LearnError> {
        let (mass, total) = self.masses(d, p, holds)?;
        Ok(mass.into_iter().map(|(k, m)| (k, m / &total)).collect())
    }

    /// Per-key evidence for the latent value `holds`. Aggregate mode
    /// conditions on the enabling action having been taken; exact mode uses
    /// the joint probability of the whole observed information state, which
    /// makes odds-form updating coincide with direct Bayes.
    fn evidence(&self, d: &InfluenceDiagram, p: &Policy, holds: usize) -> Result<BTreeMap<Observation, Prob>, LearnError> {
        match self.mode {
            Mode::Aggregate => self.distribution(d, p, holds),
            Mode::Exact => Ok(self.masses(d, p, holds)?.0),
        }
    }

    /// L(obs) = P(obs | H, enabled) / P(obs | not H, enabled) under policy `p`.
    pub fn likelihood_ratio(&self, d: &InfluenceDiagram, p: &Policy, obs: &Observation) -> Result<Prob, LearnError> {
        let obs = self.normalize(obs)?;
        let h = self.evidence(d, p, self.hypothesis)?;
        let n = self.evidence(d, p, 1 - self.hypothesis)?;
        ratio_of(h.get(&obs), n.get(&obs))
    }

    /// Every possible observation with its likelihood ratio.
    pub fn ratios(&self, d: &InfluenceDiagram, p: &Policy) -> Result<BTreeMap<Observation, Prob>, LearnError> {
        let h = self.evidence(d, p, self.hypothesis)?;
        let n = self.evidence(d, p, 1 - self.hypothesis)?;
        let mut out = BTreeMap::new();
        for k in h.keys().chain(n.keys()) {
            if !out.contains_key(k) {
                out.insert(k.clone(), ratio_of(h.get(k), n.get(k))?);
            }
        }
        Ok(out)
    }

    /// Probability-weighted geometric mean of L when the latent truly has
    /// outcome `truth`: the expected per-observation multiplier on the odds.
    pub fn average_likelihood_ratio(&self, d: &InfluenceDiagram, p: &Policy, truth: usize) -> Result<f64, LearnError> {
        let ratios = self.ratios(d, p)?;
        let weights = self.distribution(d, p, truth)?;
        let log: f64 = weights.iter().map(|(k, w)| to_f64(w) * to_f64(&ratios[k]).ln()).sum();
        Ok(log.exp())
    }

    fn normalize(&self, obs: &Observation) -> Result<Observation, LearnError> {
        match (self.mode, &obs.context) {
            (Mode::Aggregate, _) => Ok(Observation { outcome: obs.outcome, context: None }),
            (Mode::Exact, Some(_)) => Ok(obs.clone()),
            (Mode::Exact, None) => Err(LearnError::MissingContext),
        }
    }
}

fn ratio_of(h: Option<&Prob>, n: Option<&Prob>) -> Result<Prob, LearnError> {
    match (h, n) {
        (Some(a), Some(b)) => Ok(a / b),
        (None, None) => Err(LearnError::Impossible),
        _ => Err(LearnError::Conclusive),
    }
}
