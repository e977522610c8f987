use super::generalize::{ExplanationGraph, NodeTag, UTILITY_NODE};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum WhyError {
    #[error("`{0}` does not name a node of the explanation")]
    UnknownEvent(String),
}

/// Nodes that explain `event` in the generalized explanation.
///
/// `event` is a variable name (`PathDecision`), a variable with a value
/// (`PathDecision=Short`), or a proposition as printed by the explanation.
/// For a decision the answer is what the agent knew when choosing, the
/// other causes of what the choice influences, and the utility it serves;
/// for anything else it is the node's direct variable-level causes.
pub fn answer_why(g: &ExplanationGraph, event: &str) -> Result<Vec<usize>, WhyError> {
    let id = find(g, event.trim()).ok_or_else(|| WhyError::UnknownEvent(event.to_string()))?;
    let node = &g.nodes[id];
    if node.tag != NodeTag::Decision {
        return Ok(g.variable_parents(id));
    }
    let is_decision = |i: usize| g.nodes[i].tag == NodeTag::Decision;
    let mut out: Vec<usize> = g.variable_parents(id).into_iter().filter(|&p| !is_decision(p)).collect();
    for child in variable_children(g, id) {
        if g.nodes[child].tag == NodeTag::Utility || is_decision(child) {
            continue;
        }
        for p in g.variable_parents(child) {
            if p != id && !is_decision(p) && !out.contains(&p) {
                out.push(p);
            }
        }
    }
    out.sort_unstable();
    if let Some(u) = g.node(UTILITY_NODE) {
        out.retain(|&x| x != u);
        out.push(u);
    }
    Ok(out)
}

fn variable_children(g: &ExplanationGraph, id: usize) -> Vec<usize> {
    (0..g.nodes.len()).filter(|&c| g.is_variable_node(c) && g.variable_parents(c).contains(&id)).collect()
}

fn find(g: &ExplanationGraph, event: &str) -> Option<usize> {
    if let Some(i) = g.node(event) {
        return Some(i);
    }
    if let Some((name, value)) = event.split_once('=') {
        let (name, value) = (name.trim(), value.trim());
        if let Some(i) = g.node(name) {
            let n = &g.nodes[i];
            let known = n.instances.iter().any(|a| a.args.iter().any(|t| t.to_string() == value))
                || n.distribution.as_ref().and_then(|f| f.outcomes()).is_some_and(|o| o.iter().any(|t| t.to_string() == value));
            if known || value.is_empty() {
                return Some(i);
            }
            return None;
        }
    }
    let compact: String = event.chars().filter(|c| !c.is_whitespace()).collect();
    let same = |s: String| s.chars().filter(|c| !c.is_whitespace()).collect::<String>() == compact;
    g.nodes
        .iter()
        .position(|n| same(n.atom.to_string()) || n.instances.iter().any(|a| same(a.to_string())))
}
