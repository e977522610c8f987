//! Influence diagrams: chance, decision and value nodes over finite outcome
//! spaces, with exact conditional probability tables.

mod builder;
mod dot;
mod enumerate;
mod reverse;
mod surgery;

pub use enumerate::{
    expected_utility, is_cond_independent, joint_distribution, joint_distribution_bounded, marginal, World,
    DEFAULT_BOUND,
};
pub use builder::DiagramBuilder;
pub use reverse::reverse_arc;

use crate::knowledge::Diagnostic;
use crate::rational::{format_exact, Prob};
use num_traits::{One, Signed, Zero};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

pub type NodeId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NodeKind {
    Chance,
    Decision,
    Value,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub name: String,
    pub kind: NodeKind,
    /// Chance outcomes or decision actions. Empty for the value node.
    pub outcomes: Vec<String>,
}

/// Rows are indexed mixed-radix over the parents' outcomes, first parent most
/// significant.
#[derive(Debug, Clone, PartialEq)]
pub struct Cpt {
    pub parents: Vec<NodeId>,
    pub rows: Vec<Vec<Prob>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UtilityTable {
    pub parents: Vec<NodeId>,
    pub values: Vec<Prob>,
}

/// A measurement triple: whether to measure, the instrument's error, and
/// the resulting reading.
#[derive(Debug, Clone, PartialEq)]
pub struct Instrument {
    pub name: String,
    pub target: NodeId,
    pub decision: NodeId,
    pub error: NodeId,
    pub reading: NodeId,
    pub measure_action: usize,
    pub cost: Prob,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InfluenceDiagram {
    pub nodes: Vec<Node>,
    pub cpts: BTreeMap<NodeId, Cpt>,
    /// Informational parents of each decision node.
    pub info: BTreeMap<NodeId, Vec<NodeId>>,
    pub utility: UtilityTable,
    pub value_node: NodeId,
    pub decision_order: Vec<NodeId>,
    pub instruments: Vec<Instrument>,
    /// Decisions restricted to a single action.
    pub forced: BTreeMap<NodeId, usize>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiagramError {
    #[error("arc {from} -> {to} is not between two chance nodes")]
    NotAChanceArc { from: String, to: String },
    #[error("no arc {from} -> {to}")]
    NoSuchArc { from: String, to: String },
    #[error("reversing {from} -> {to} would create a directed cycle")]
    WouldCreateCycle { from: String, to: String },
    #[error("state space of {size} outcome combinations exceeds bound {bound}")]
    StateSpaceTooLarge { size: f64, bound: f64 },
    #[error("no node named `{0}`")]
    UnknownNode(String),
    #[error("node `{0}` has the wrong kind for this operation")]
    WrongKind(String),
    #[error("no instrument named `{0}`")]
    UnknownInstrument(String),
    #[error("invalid diagram:\n{}", .0.iter().map(|d| format!("  - {d}")).collect::<Vec<_>>().join("\n"))]
    Invalid(Vec<Diagnostic>),
}

impl InfluenceDiagram {
    pub fn node_id(&self, name: &str) -> Option<NodeId> {
        self.nodes.iter().position(|n| n.name == name)
    }

    pub fn require(&self, name: &str) -> Result<NodeId, DiagramError> {
        self.node_id(name).ok_or_else(|| DiagramError::UnknownNode(name.to_string()))
    }

    pub fn kind(&self, id: NodeId) -> NodeKind {
        self.nodes[id].kind
    }

    pub fn name(&self, id: NodeId) -> &str {
        &self.nodes[id].name
    }

    pub fn outcome_index(&self, id: NodeId, label: &str) -> Option<usize> {
        self.nodes[id].outcomes.iter().position(|o| o == label)
    }

    pub fn arity(&self, id: NodeId) -> usize {
        self.nodes[id].outcomes.len()
    }

    pub fn parents(&self, id: NodeId) -> &[NodeId] {
        match self.nodes[id].kind {
            NodeKind::Chance => self.cpts.get(&id).map_or(&[], |c| c.parents.as_slice()),
            NodeKind::Decision => self.info.get(&id).map_or(&[], Vec::as_slice),
            NodeKind::Value => &self.utility.parents,
        }
    }

    pub fn children(&self, id: NodeId) -> Vec<NodeId> {
        (0..self.nodes.len()).filter(|&c| self.parents(c).contains(&id)).collect()
    }

    pub fn arcs(&self) -> Vec<(NodeId, NodeId)> {
        let mut out = Vec::new();
        for to in 0..self.nodes.len() {
            for &from in self.parents(to) {
                out.push((from, to));
            }
        }
        out
    }

    pub fn chance_nodes(&self) -> Vec<NodeId> {
        (0..self.nodes.len()).filter(|&i| self.kind(i) == NodeKind::Chance).collect()
    }

    /// Row index of a configuration of `parents` read from `values`.
    pub fn row_index(&self, parents: &[NodeId], values: &[usize]) -> usize {
        parents.iter().fold(0, |idx, &p| idx * self.arity(p) + values[p])
    }

    pub fn row_count(&self, parents: &[NodeId]) -> usize {
        parents.iter().map(|&p| self.arity(p)).product()
    }

    pub fn cpt(&self, id: NodeId) -> &Cpt {
        &self.cpts[&id]
    }

    /// P(node = outcome | parents as assigned in `values`).
    pub fn prob(&self, id: NodeId, outcome: usize, values: &[usize]) -> &Prob {
        let cpt = self.cpt(id);
        &cpt.rows[self.row_index(&cpt.parents, values)][outcome]
    }

    pub fn utility_of(&self, values: &[usize]) -> &Prob {
        &self.utility.values[self.row_index(&self.utility.parents, values)]
    }

    /// Kahn order, lowest id first among ready nodes. `None` on a cycle.
    pub fn topological_order(&self) -> Option<Vec<NodeId>> {
        let n = self.nodes.len();
        let mut indegree: Vec<usize> = (0..n).map(|i| self.parents(i).len()).collect();
        let children: Vec<Vec<NodeId>> = (0..n).map(|i| self.children(i)).collect();
        let mut ready: BTreeSet<NodeId> = (0..n).filter(|&i| indegree[i] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(&i) = ready.iter().next() {
            ready.remove(&i);
            order.push(i);
            for &c in &children[i] {
                indegree[c] -= 1;
                if indegree[c] == 0 {
                    ready.insert(c);
                }
            }
        }
        (order.len() == n).then_some(order)
    }

    pub fn ancestors(&self, id: NodeId) -> BTreeSet<NodeId> {
        let mut seen = BTreeSet::new();
        let mut stack: Vec<NodeId> = self.parents(id).to_vec();
        while let Some(p) = stack.pop() {
            if seen.insert(p) {
                stack.extend_from_slice(self.parents(p));
            }
        }
        seen
    }

    pub fn descendants(&self, id: NodeId) -> BTreeSet<NodeId> {
        let mut seen = BTreeSet::new();
        let mut stack = self.children(id);
        while let Some(c) = stack.pop() {
            if seen.insert(c) {
                stack.extend(self.children(c));
            }
        }
        seen
    }

    /// A chance node whose every row is a point mass.
    pub fn is_deterministic(&self, id: NodeId) -> bool {
        self.cpts.get(&id).is_some_and(|c| c.rows.iter().all(|r| r.iter().filter(|p| !p.is_zero()).count() == 1))
    }

    /// Actions available at a decision, honouring `forced`.
    pub fn actions(&self, id: NodeId) -> Vec<usize> {
        match self.forced.get(&id) {
            Some(&a) => vec![a],
            None => (0..self.arity(id)).collect(),
        }
    }

    pub fn instrument(&self, name: &str) -> Result<&Instrument, DiagramError> {
        self.instruments
            .iter()
            .find(|i| i.name == name || self.name(i.decision) == name)
            .ok_or_else(|| DiagramError::UnknownInstrument(name.to_string()))
    }

    pub fn ensure_valid(&self) -> Result<(), DiagramError> {
        let d = validate(self);
        if d.is_empty() {
            Ok(())
        } else {
            Err(DiagramError::Invalid(d))
        }
    }
}

/// Well-formedness diagnostics; empty iff the diagram is usable.
pub fn validate(d: &InfluenceDiagram) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let mut diag = |m: String| out.push(Diagnostic { message: m });
    let n = d.nodes.len();

    let values: Vec<NodeId> = (0..n).filter(|&i| d.kind(i) == NodeKind::Value).collect();
    if values != [d.value_node] {
        diag(format!("expected exactly one value node, found {}", values.len()));
    }
    for (i, node) in d.nodes.iter().enumerate() {
        for &p in d.parents(i) {
            if p >= n {
                diag(format!("`{}` has out-of-range parent {p}", node.name));
                return out;
            }
            if p == i {
                diag(format!("`{}` has an arc into itself", node.name));
            }
            if d.kind(p) == NodeKind::Value {
                diag(format!("value node has an outgoing arc into `{}`", node.name));
            }
        }
        match node.kind {
            NodeKind::Value => continue,
            _ if node.outcomes.is_empty() => diag(format!("`{}` has an empty outcome space", node.name)),
            _ => {}
        }
        if node.kind == NodeKind::Chance {
            let Some(cpt) = d.cpts.get(&i) else {
                diag(format!("chance node `{}` has no CPT", node.name));
                continue;
            };
            let distinct: BTreeSet<_> = cpt.parents.iter().collect();
            if distinct.len() != cpt.parents.len() {
                diag(format!("`{}` lists a parent twice", node.name));
            }
            let expected = d.row_count(&cpt.parents);
            if cpt.rows.len() != expected {
                diag(format!("`{}` has {} CPT rows, expected {expected}", node.name, cpt.rows.len()));
            }
            for (r, row) in cpt.rows.iter().enumerate() {
                if row.len() != node.outcomes.len() {
                    diag(format!("`{}` row {r} has {} entries for {} outcomes", node.name, row.len(), node.outcomes.len()));
                }
                if row.iter().any(Signed::is_negative) {
                    diag(format!("`{}` row {r} has a negative probability", node.name));
                }
                let sum: Prob = row.iter().sum();
                if !sum.is_one() {
                    diag(format!("`{}` row {r} sums to {}", node.name, format_exact(&sum)));
                }
            }
        }
    }
    for id in d.cpts.keys() {
        if *id >= n || d.kind(*id) != NodeKind::Chance {
            diag(format!("CPT attached to non-chance node {id}"));
        }
    }
    if d.utility.values.len() != d.row_count(&d.utility.parents) {
        diag(format!("utility table has {} entries, expected {}", d.utility.values.len(), d.row_count(&d.utility.parents)));
    }
    if d.topological_order().is_none() {
        diag("the diagram has a directed cycle".into());
        return out;
    }
    let decisions: BTreeSet<NodeId> = (0..n).filter(|&i| d.kind(i) == NodeKind::Decision).collect();
    let ordered: BTreeSet<NodeId> = d.decision_order.iter().copied().collect();
    if decisions != ordered || ordered.len() != d.decision_order.len() {
        diag("decision order must list every decision node exactly once".into());
    }
    for w in d.decision_order.windows(2) {
        let (k, next) = (w[0], w[1]);
        let later: BTreeSet<NodeId> = d.parents(next).iter().copied().collect();
        if !later.contains(&k) || d.parents(k).iter().any(|p| !later.contains(p)) {
            diag(format!("no-forgetting violated between `{}` and `{}`", d.name(k), d.name(next)));
        }
    }
    for (&dec, &a) in &d.forced {
        if dec >= n || d.kind(dec) != NodeKind::Decision || a >= d.arity(dec) {
            diag(format!("invalid forced action for node {dec}"));
        }
    }
    out
}
