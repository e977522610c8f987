//! Decision-tree compilation, rollback, optimal policies and value of
//! information.

mod tree;
mod voi;

pub use tree::{compile_tree, rollback, ChanceBranch, DecisionTree, TerminalCounts, TreeNode};
pub use voi::{evpi, evsi, switch_threshold, SwitchThreshold, ThresholdError, Voi};

use crate::diagram::{joint_distribution, DiagramError, InfluenceDiagram, NodeId};
use crate::diagram::expected_utility;
use crate::rational::Prob;
use num_traits::Zero;
use std::collections::BTreeMap;

/// An exact tie at a decision, resolved in favour of the first declared
/// action.
#[derive(Debug, Clone, PartialEq)]
pub struct TieBreak {
    pub node: NodeId,
    pub info: Vec<usize>,
    pub chosen: usize,
    pub tied: Vec<usize>,
}

/// Action per (decision, values of its informational parents).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Policy {
    pub rules: BTreeMap<NodeId, BTreeMap<Vec<usize>, usize>>,
    /// Action used for information states without a rule.
    pub fallback: BTreeMap<NodeId, usize>,
    pub eu: Prob,
    pub tie_breaks: Vec<TieBreak>,
}

impl Policy {
    /// Takes the same action at a decision regardless of information.
    pub fn constant(actions: &[(NodeId, usize)]) -> Policy {
        Policy { fallback: actions.iter().copied().collect(), eu: Prob::zero(), ..Policy::default() }
    }

    pub fn choose(&self, d: &InfluenceDiagram, node: NodeId, info: &[usize]) -> usize {
        if let Some(&a) = d.forced.get(&node) {
            return a;
        }
        self.rules
            .get(&node)
            .and_then(|r| r.get(info))
            .or_else(|| self.fallback.get(&node))
            .copied()
            .unwrap_or(0)
    }

    /// The action map only, for comparing policies.
    pub fn actions(&self) -> &BTreeMap<NodeId, BTreeMap<Vec<usize>, usize>> {
        &self.rules
    }

    /// Human-readable rule table, one line per reachable information state.
    pub fn describe(&self, d: &InfluenceDiagram) -> Vec<String> {
        let mut out = Vec::new();
        for &node in &d.decision_order {
            let Some(rules) = self.rules.get(&node) else { continue };
            for (info, &a) in rules {
                let cond: Vec<String> = d
                    .parents(node)
                    .iter()
                    .zip(info)
                    .map(|(&p, &v)| format!("{}={}", d.name(p), d.nodes[p].outcomes[v]))
                    .collect();
                let cond = if cond.is_empty() { "always".to_string() } else { cond.join(", ") };
                out.push(format!("{}: {} -> {}", d.name(node), cond, d.nodes[node].outcomes[a]));
            }
        }
        out
    }
}

/// Expected utility of following `policy`, by exact enumeration.
pub fn evaluate(d: &InfluenceDiagram, policy: &Policy) -> Result<Prob, DiagramError> {
    let worlds = joint_distribution(d, policy)?;
    Ok(expected_utility(d, &worlds))
}

/// Maximum-EU policy by rollback of the compiled decision tree.
pub fn optimal_policy(d: &InfluenceDiagram) -> Result<Policy, DiagramError> {
    let tree = compile_tree(d)?;
    Ok(rollback(&tree).1)
}

/// Optimal expected utility.
pub fn solve(d: &InfluenceDiagram) -> Result<Prob, DiagramError> {
    Ok(optimal_policy(d)?.eu)
}
