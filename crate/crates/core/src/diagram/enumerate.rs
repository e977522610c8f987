use super::{DiagramError, InfluenceDiagram, NodeId, NodeKind};
use crate::policy::Policy;
use crate::rational::Prob;
use num_traits::{One, Zero};
use std::collections::BTreeMap;

pub const DEFAULT_BOUND: f64 = 1e6;

/// One complete assignment of chance outcomes and decision actions. The
/// value node's slot is unused.
#[derive(Debug, Clone, PartialEq)]
pub struct World {
    pub values: Vec<usize>,
    pub prob: Prob,
}

impl World {
    pub fn utility<'a>(&self, d: &'a InfluenceDiagram) -> &'a Prob {
        d.utility_of(&self.values)
    }
}

pub fn joint_distribution(d: &InfluenceDiagram, policy: &Policy) -> Result<Vec<World>, DiagramError> {
    joint_distribution_bounded(d, policy, DEFAULT_BOUND)
}

/// Exact forward enumeration of every positive-probability world under
/// `policy`.
pub fn joint_distribution_bounded(d: &InfluenceDiagram, policy: &Policy, bound: f64) -> Result<Vec<World>, DiagramError> {
    d.ensure_valid()?;
    let size: f64 = d.chance_nodes().iter().map(|&c| d.arity(c) as f64).product();
    if size > bound {
        return Err(DiagramError::StateSpaceTooLarge { size, bound });
    }
    let order = d.topological_order().expect("validated diagram is acyclic");
    let mut worlds = vec![World { values: vec![0; d.nodes.len()], prob: Prob::one() }];
    for id in order {
        match d.kind(id) {
            NodeKind::Value => {}
            NodeKind::Decision => {
                for w in &mut worlds {
                    let info: Vec<usize> = d.parents(id).iter().map(|&p| w.values[p]).collect();
                    w.values[id] = policy.choose(d, id, &info);
                }
            }
            NodeKind::Chance => {
                let mut next = Vec::with_capacity(worlds.len() * d.arity(id));
                for w in worlds {
                    for o in 0..d.arity(id) {
                        let p = d.prob(id, o, &w.values);
                        if p.is_zero() {
                            continue;
                        }
                        let mut values = w.values.clone();
                        values[id] = o;
                        next.push(World { values, prob: &w.prob * p });
                    }
                }
                worlds = next;
            }
        }
    }
    Ok(worlds)
}

/// Expected utility of an enumerated joint.
pub fn expected_utility(d: &InfluenceDiagram, worlds: &[World]) -> Prob {
    worlds.iter().map(|w| &w.prob * w.utility(d)).sum()
}

/// Marginal over a set of nodes, keyed by their values in the given order.
pub fn marginal(worlds: &[World], nodes: &[NodeId]) -> BTreeMap<Vec<usize>, Prob> {
    let mut out: BTreeMap<Vec<usize>, Prob> = BTreeMap::new();
    for w in worlds {
        let key: Vec<usize> = nodes.iter().map(|&n| w.values[n]).collect();
        *out.entry(key).or_insert_with(Prob::zero) += &w.prob;
    }
    out
}

/// Whether P(x | y, given) = P(x | given) wherever P(y, given) > 0, computed
/// from the joint under `policy`.
pub fn is_cond_independent(
    d: &InfluenceDiagram,
    x: NodeId,
    y: NodeId,
    given: &[NodeId],
    policy: &Policy,
) -> Result<bool, DiagramError> {
    for &n in [x, y].iter().chain(given) {
        if d.kind(n) != NodeKind::Chance {
            return Err(DiagramError::WrongKind(d.name(n).to_string()));
        }
    }
    let worlds = joint_distribution(d, policy)?;
    let mut xyg = vec![x, y];
    xyg.extend_from_slice(given);
    let mut yg = vec![y];
    yg.extend_from_slice(given);
    let mut xg = vec![x];
    xg.extend_from_slice(given);
    let p_xyg = marginal(&worlds, &xyg);
    let p_yg = marginal(&worlds, &yg);
    let p_xg = marginal(&worlds, &xg);
    let p_g = marginal(&worlds, given);
    let zero = Prob::zero();
    for (ygv, pyg) in &p_yg {
        let gv = &ygv[1..];
        let pg = &p_g[gv];
        for xv in 0..d.arity(x) {
            let mut k = vec![xv];
            k.extend_from_slice(ygv);
            let mut kx = vec![xv];
            kx.extend_from_slice(gv);
            let lhs = p_xyg.get(&k).unwrap_or(&zero) / pyg;
            let rhs = p_xg.get(&kx).unwrap_or(&zero) / pg;
            if lhs != rhs {
                return Ok(false);
            }
        }
    }
    Ok(true)
}
