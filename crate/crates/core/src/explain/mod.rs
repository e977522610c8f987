//! Explanation-based generalization: prove that the training example solves
//! one stage of the decision problem, regress the proof into a generalized
//! explanation, and read an influence diagram off it.

mod generalize;
mod prove;
mod to_diagram;
mod why;

pub use generalize::{generalize, ExplanationGraph, GraphNode, NodeTag};
pub use prove::{prove, prove_with_depth, stage_goal, Justification, ProofError, ProofNode, DEFAULT_DEPTH};
pub use generalize::UTILITY_NODE;
pub use to_diagram::{to_influence_diagram, ExplainError};
pub use why::{answer_why, WhyError};

use crate::diagram::InfluenceDiagram;
use crate::knowledge::Scenario;

/// Everything learned from one training example.
#[derive(Debug, Clone)]
pub struct Explanation {
    pub proof: ProofNode,
    pub graph: ExplanationGraph,
    pub diagram: InfluenceDiagram,
}

/// Proves the example's utility, generalizes the proof and reads off the
/// influence diagram.
pub fn explain(s: &Scenario) -> Result<Explanation, ExplainError> {
    let proof = prove(&stage_goal(s)?, s)?;
    let graph = generalize(&proof, s);
    let diagram = to_influence_diagram(&graph, s)?;
    Ok(Explanation { proof, graph, diagram })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::robot;
    use crate::knowledge::{Atom, Term};
    use crate::rational::ratio;

    fn robot_graph() -> (crate::knowledge::Scenario, ExplanationGraph) {
        let s = robot();
        let p = prove(&stage_goal(&s).unwrap(), &s).unwrap();
        let g = generalize(&p, &s);
        (s, g)
    }

    #[test]
    fn proof_rests_on_example_and_hypothesis() {
        let s = robot();
        let p = prove(&stage_goal(&s).unwrap(), &s).unwrap();
        assert_eq!(p.conclusion.to_string(), "Attains(100)");
        let leaves: Vec<String> = p.leaves().iter().map(|n| n.label(&s)).collect();
        assert!(leaves.iter().any(|l| l.contains("TableStrength(Table-0, Fragile|Sturdy)")), "{leaves:?}");
        assert!(leaves.iter().any(|l| l.contains("Density(Box-0, .4")), "{leaves:?}");
    }

    #[test]
    fn unknown_goal_has_no_proof() {
        let s = robot();
        let goal = Atom::new("Levitates", vec![Term::sym("Box-0")]);
        assert!(matches!(prove(&goal, &s), Err(ProofError::NoProof(_))));
    }

    #[test]
    fn generalized_graph_names_and_bindings() {
        let (_, g) = robot_graph();
        assert!(g.is_acyclic());
        let names: Vec<&str> = g.nodes.iter().filter(|n| n.variable.is_some() || n.name == UTILITY_NODE).map(|n| n.name.as_str()).collect();
        assert_eq!(
            names,
            [
                "BoxDensity", "BoxVolume", "BoxWeight", "TableWeight", "TableStrength", "WeightRelation", "Outcome",
                "PathDecision", "Utility", "MeasureDensity", "DensimeterError", "MeasuredDensity"
            ]
        );
        let density = &g.nodes[g.node("BoxDensity").unwrap()];
        assert_eq!(density.tag, NodeTag::Chance);
        assert!(density.distribution.is_some());
        assert_eq!(g.bindings.get("b"), Some(&Term::sym("Box-0")));
        assert!(g.bindings.values().all(|t| t.is_ground()));
    }

    #[test]
    fn diagram_solves_to_known_values() {
        let (s, g) = robot_graph();
        let d = to_influence_diagram(&g, &s).unwrap();
        assert_eq!(d.nodes.len(), 12);
        assert_eq!(d.name(d.value_node), "Utility");
        assert_eq!(crate::policy::solve(&d).unwrap(), ratio(143, 3));
        let m = d.node_id("MeasureDensity").unwrap();
        let off = d.force_decision(m, 0).unwrap();
        assert_eq!(crate::policy::solve(&off).unwrap(), ratio(44, 1));
        let weight = d.node_id("BoxWeight").unwrap();
        assert_eq!(d.nodes[weight].outcomes, ["3", "4"]);
        assert!(d.is_deterministic(weight));
    }

    #[test]
    fn why_a_decision() {
        let (_, g) = robot_graph();
        let names = |ids: Vec<usize>| ids.into_iter().map(|i| g.nodes[i].name.clone()).collect::<Vec<_>>();
        assert_eq!(
            names(answer_why(&g, "PathDecision").unwrap()),
            ["TableStrength", "WeightRelation", "MeasuredDensity", "Utility"]
        );
        assert_eq!(names(answer_why(&g, "PathDecision=Short-Path").unwrap()).len(), 4);
        assert_eq!(names(answer_why(&g, "Utility").unwrap()), ["Outcome", "PathDecision"]);
        assert!(answer_why(&g, "Gravity").is_err());
    }
}
