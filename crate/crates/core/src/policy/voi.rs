use super::{compile_tree, solve, Policy};
use crate::diagram::{joint_distribution, DiagramError, InfluenceDiagram, NodeId, NodeKind};
use crate::rational::Prob;
use num_traits::{One, Signed, Zero};
use thiserror::Error;

/// A value-of-information figure with the two expected utilities it
/// compares.
#[derive(Debug, Clone, PartialEq)]
pub struct Voi {
    pub value: Prob,
    pub baseline_eu: Prob,
    pub informed_eu: Prob,
}

/// Expected value of perfect information about `v`: the gain from
/// observing `v` before every decision. Instruments that measure `v` are
/// switched off in both diagrams so the comparison is against acting
/// without any information about `v`.
pub fn evpi(d: &InfluenceDiagram, v: NodeId) -> Result<Voi, DiagramError> {
    if v >= d.nodes.len() || d.kind(v) != NodeKind::Chance {
        return Err(DiagramError::WrongKind(d.nodes.get(v).map_or_else(|| v.to_string(), |n| n.name.clone())));
    }
    let base = d.without_instruments_on(v);
    let informed = base.observe_before_all(v)?;
    let baseline_eu = solve(&base)?;
    let informed_eu = solve(&informed)?;
    Ok(Voi { value: &informed_eu - &baseline_eu, baseline_eu, informed_eu })
}

/// Expected value of sample information from an instrument: EU with the
/// measurement forced on (at no cost) minus EU with it forced off, minus
/// `cost`.
pub fn evsi(d: &InfluenceDiagram, instrument: &str, cost: &Prob) -> Result<Voi, DiagramError> {
    let inst = d.instrument(instrument)?.clone();
    let free = d.with_instrument_cost(&inst.name, &Prob::zero())?;
    let on = free.force_decision(inst.decision, inst.measure_action)?;
    let off = free.force_decision(inst.decision, 1 - inst.measure_action)?;
    let informed_eu = solve(&on)?;
    let baseline_eu = solve(&off)?;
    Ok(Voi { value: &informed_eu - &baseline_eu - cost, baseline_eu, informed_eu })
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ThresholdError {
    #[error(transparent)]
    Diagram(#[from] DiagramError),
    #[error("the actions never cross: one is at least as good for every belief")]
    NoThreshold,
    #[error("decision context is missing the value of `{0}`")]
    IncompleteContext(String),
    #[error("decision context cannot occur")]
    UnreachableContext,
    #[error("`{0}` must be a binary root chance node")]
    NotBinary(String),
    #[error("decision `{0}` must offer exactly two actions")]
    NotTwoActions(String),
}

/// Belief at which the two actions of a decision are equally good in a given
/// information state.
#[derive(Debug, Clone, PartialEq)]
pub struct SwitchThreshold {
    pub decision: NodeId,
    /// Prior P(H) at which the actions tie.
    pub prior: Prob,
    /// P(H | context) at which the actions tie.
    pub posterior: Prob,
    /// Action values if H were known to hold, in action order.
    pub values_if_h: Vec<Prob>,
    /// Action values if H were known not to hold.
    pub values_if_not_h: Vec<Prob>,
    /// Action values at the diagram's current belief.
    pub current: Vec<Prob>,
}

/// Solves EU_a(p) = p·EU_a(H) + (1−p)·EU_a(¬H) for the crossing of the
/// decision's two actions, where `context` assigns every informational
/// parent of `decision`.
pub fn switch_threshold(
    d: &InfluenceDiagram,
    decision: NodeId,
    context: &[(NodeId, usize)],
    latent: NodeId,
    hypothesis: usize,
) -> Result<SwitchThreshold, ThresholdError> {
    if d.kind(latent) != NodeKind::Chance || !d.parents(latent).is_empty() || d.arity(latent) != 2 {
        return Err(ThresholdError::NotBinary(d.name(latent).to_string()));
    }
    if d.kind(decision) != NodeKind::Decision || d.actions(decision).len() != 2 {
        return Err(ThresholdError::NotTwoActions(d.name(decision).to_string()));
    }
    let info: Vec<usize> = d
        .parents(decision)
        .iter()
        .map(|&p| {
            context
                .iter()
                .find(|(n, _)| *n == p)
                .map(|&(_, v)| v)
                .ok_or_else(|| ThresholdError::IncompleteContext(d.name(p).to_string()))
        })
        .collect::<Result<_, _>>()?;
    let other = 1 - hypothesis;
    let d_h = d.with_point_mass(latent, hypothesis)?;
    let d_n = d.with_point_mass(latent, other)?;
    let values_if_h = context_values(&d_h, decision, &info)?;
    let values_if_not_h = context_values(&d_n, decision, &info)?;
    let current = context_values(d, decision, &info)?;

    let diff_h = &values_if_h[0] - &values_if_h[1];
    let diff_n = &values_if_not_h[0] - &values_if_not_h[1];
    if diff_h.is_zero() || diff_n.is_zero() || diff_h.signum() == diff_n.signum() {
        return Err(ThresholdError::NoThreshold);
    }
    let posterior = &diff_n / (&diff_n - &diff_h);

    let lr = context_probability(&d_h, context)? / context_probability(&d_n, context)?;
    let post_odds = &posterior / (Prob::one() - &posterior);
    let prior_odds = post_odds / lr;
    let prior = &prior_odds / (Prob::one() + &prior_odds);
    Ok(SwitchThreshold { decision, prior, posterior, values_if_h, values_if_not_h, current })
}

fn context_values(d: &InfluenceDiagram, decision: NodeId, info: &[usize]) -> Result<Vec<Prob>, ThresholdError> {
    let tree = compile_tree(d)?;
    let node = tree.root.find_decision(decision, info).ok_or(ThresholdError::UnreachableContext)?;
    Ok(node.action_values().into_iter().map(|(_, v)| v).collect())
}

fn context_probability(d: &InfluenceDiagram, context: &[(NodeId, usize)]) -> Result<Prob, ThresholdError> {
    let actions: Vec<(NodeId, usize)> = context.iter().copied().filter(|&(n, _)| d.kind(n) == NodeKind::Decision).collect();
    let worlds = joint_distribution(d, &Policy::constant(&actions))?;
    let p: Prob = worlds
        .iter()
        .filter(|w| context.iter().all(|&(n, v)| d.kind(n) != NodeKind::Chance || w.values[n] == v))
        .map(|w| w.prob.clone())
        .sum();
    if p.is_zero() {
        return Err(ThresholdError::UnreachableContext);
    }
    Ok(p)
}
