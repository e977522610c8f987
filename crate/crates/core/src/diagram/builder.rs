use super::{Cpt, DiagramError, InfluenceDiagram, Node, NodeId, NodeKind, UtilityTable};
use crate::rational::Prob;
use std::collections::BTreeMap;

/// Incremental construction; decisions are ordered as they are added.
#[derive(Debug, Clone, Default)]
pub struct DiagramBuilder {
    nodes: Vec<Node>,
    cpts: BTreeMap<NodeId, Cpt>,
    info: BTreeMap<NodeId, Vec<NodeId>>,
    decision_order: Vec<NodeId>,
    utility: Option<(NodeId, UtilityTable)>,
}

impl DiagramBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    fn push(&mut self, name: &str, kind: NodeKind, outcomes: &[&str]) -> NodeId {
        self.nodes.push(Node { name: name.to_string(), kind, outcomes: outcomes.iter().map(|s| s.to_string()).collect() });
        self.nodes.len() - 1
    }

    pub fn chance(&mut self, name: &str, outcomes: &[&str], parents: &[NodeId], rows: Vec<Vec<Prob>>) -> NodeId {
        let id = self.push(name, NodeKind::Chance, outcomes);
        self.cpts.insert(id, Cpt { parents: parents.to_vec(), rows });
        id
    }

    pub fn decision(&mut self, name: &str, actions: &[&str], info: &[NodeId]) -> NodeId {
        let id = self.push(name, NodeKind::Decision, actions);
        self.info.insert(id, info.to_vec());
        self.decision_order.push(id);
        id
    }

    pub fn value(&mut self, name: &str, parents: &[NodeId], values: Vec<Prob>) -> NodeId {
        let id = self.push(name, NodeKind::Value, &[]);
        self.utility = Some((id, UtilityTable { parents: parents.to_vec(), values }));
        id
    }

    /// Builds without validating.
    pub fn build_unchecked(self) -> InfluenceDiagram {
        let (value_node, utility) =
            self.utility.unwrap_or((usize::MAX, UtilityTable { parents: Vec::new(), values: Vec::new() }));
        InfluenceDiagram {
            nodes: self.nodes,
            cpts: self.cpts,
            info: self.info,
            utility,
            value_node,
            decision_order: self.decision_order,
            instruments: Vec::new(),
            forced: BTreeMap::new(),
        }
    }

    pub fn build(self) -> Result<InfluenceDiagram, DiagramError> {
        let d = self.build_unchecked();
        d.ensure_valid()?;
        Ok(d)
    }
}
