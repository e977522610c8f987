use super::{Policy, TieBreak};
use crate::diagram::{joint_distribution, DiagramError, InfluenceDiagram, NodeId, NodeKind, World};
use crate::rational::Prob;
use num_traits::{One, Zero};
use std::collections::{BTreeSet, HashMap};

#[derive(Debug, Clone, PartialEq)]
pub struct ChanceBranch {
    pub outcome: usize,
    pub prob: Prob,
    pub child: TreeNode,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TreeNode {
    Decision {
        node: NodeId,
        /// Values of the decision's informational parents on this path.
        info: Vec<usize>,
        branches: Vec<(usize, TreeNode)>,
    },
    Chance {
        node: NodeId,
        branches: Vec<ChanceBranch>,
    },
    /// `zero` marks a branch that cannot occur; its utility is not used.
    Terminal { utility: Prob, path_prob: Prob, zero: bool },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecisionTree {
    pub root: TreeNode,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct TerminalCounts {
    pub total: usize,
    pub nonzero: usize,
}

impl TerminalCounts {
    pub fn zero(&self) -> usize {
        self.total - self.nonzero
    }
}

impl TreeNode {
    pub fn terminal_counts(&self) -> TerminalCounts {
        match self {
            TreeNode::Terminal { zero, .. } => TerminalCounts { total: 1, nonzero: usize::from(!zero) },
            TreeNode::Decision { branches, .. } => sum_counts(branches.iter().map(|(_, c)| c.terminal_counts())),
            TreeNode::Chance { branches, .. } => sum_counts(branches.iter().map(|b| b.child.terminal_counts())),
        }
    }

    /// Terminals reachable when every decision follows `policy`.
    pub fn counts_under(&self, d: &InfluenceDiagram, policy: &Policy) -> TerminalCounts {
        match self {
            TreeNode::Terminal { .. } => self.terminal_counts(),
            TreeNode::Decision { node, info, branches } => {
                let a = policy.choose(d, *node, info);
                branches.iter().find(|(x, _)| *x == a).map_or_else(TerminalCounts::default, |(_, c)| c.counts_under(d, policy))
            }
            TreeNode::Chance { branches, .. } => sum_counts(branches.iter().map(|b| b.child.counts_under(d, policy))),
        }
    }

    /// Subtree reached by taking `action` at this decision node.
    pub fn after_action(&self, action: usize) -> Option<&TreeNode> {
        match self {
            TreeNode::Decision { branches, .. } => branches.iter().find(|(a, _)| *a == action).map(|(_, c)| c),
            _ => None,
        }
    }

    /// The first decision node (in depth-first order) for `node` with the
    /// given information state.
    pub fn find_decision(&self, target: NodeId, want: &[usize]) -> Option<&TreeNode> {
        match self {
            TreeNode::Decision { node, info, branches } => {
                if *node == target && info.as_slice() == want {
                    return Some(self);
                }
                branches.iter().find_map(|(_, c)| c.find_decision(target, want))
            }
            TreeNode::Chance { branches, .. } => branches.iter().find_map(|b| b.child.find_decision(target, want)),
            TreeNode::Terminal { .. } => None,
        }
    }

    /// Rolled-back value of this subtree.
    pub fn value(&self) -> Prob {
        let mut scratch = Policy::default();
        roll(self, &mut scratch)
    }

    /// Values of each action at a decision node, in branch order.
    pub fn action_values(&self) -> Vec<(usize, Prob)> {
        match self {
            TreeNode::Decision { branches, .. } => branches.iter().map(|(a, c)| (*a, c.value())).collect(),
            _ => Vec::new(),
        }
    }

    pub fn render(&self, d: &InfluenceDiagram) -> String {
        let mut out = String::new();
        render(self, d, 0, "", &mut out);
        out
    }
}

fn sum_counts(it: impl Iterator<Item = TerminalCounts>) -> TerminalCounts {
    it.fold(TerminalCounts::default(), |a, b| TerminalCounts { total: a.total + b.total, nonzero: a.nonzero + b.nonzero })
}

fn render(t: &TreeNode, d: &InfluenceDiagram, depth: usize, label: &str, out: &mut String) {
    let pad = "  ".repeat(depth);
    match t {
        TreeNode::Terminal { utility, path_prob, zero } => {
            let tag = if *zero { " (zero probability)" } else { "" };
            out.push_str(&format!(
                "{pad}{label}U = {} [path p = {}]{tag}\n",
                crate::rational::format_exact(utility),
                crate::rational::format_exact(path_prob)
            ));
        }
        TreeNode::Decision { node, branches, .. } => {
            out.push_str(&format!("{pad}{label}decide {}\n", d.name(*node)));
            for (a, c) in branches {
                render(c, d, depth + 1, &format!("{} -> ", d.nodes[*node].outcomes[*a]), out);
            }
        }
        TreeNode::Chance { node, branches } => {
            out.push_str(&format!("{pad}{label}chance {}\n", d.name(*node)));
            for b in branches {
                let l = format!("{} (p = {}) -> ", d.nodes[*node].outcomes[b.outcome], crate::rational::format_exact(&b.prob));
                render(&b.child, d, depth + 1, &l, out);
            }
        }
    }
}

#[derive(Clone)]
struct Path {
    assigned: Vec<Option<usize>>,
    prob: Prob,
}

struct Compiler<'a> {
    d: &'a InfluenceDiagram,
    topo_pos: Vec<usize>,
    cache: HashMap<Vec<usize>, Vec<World>>,
}

/// Expands the diagram into a decision tree. Before each decision the
/// not-yet-observed informational parents are branched over their
/// positive-probability outcomes; after the last decision the unobserved,
/// non-deterministic chance ancestors that the utility depends on are
/// branched over their full outcome spaces, with impossible branches kept
/// as flagged terminals.
pub fn compile_tree(d: &InfluenceDiagram) -> Result<DecisionTree, DiagramError> {
    d.ensure_valid()?;
    let topo = d.topological_order().expect("validated diagram is acyclic");
    let mut topo_pos = vec![0; d.nodes.len()];
    for (i, &n) in topo.iter().enumerate() {
        topo_pos[n] = i;
    }
    let mut c = Compiler { d, topo_pos, cache: HashMap::new() };
    let path = Path { assigned: vec![None; d.nodes.len()], prob: Prob::one() };
    let root = c.decision_stage(0, path)?;
    Ok(DecisionTree { root })
}

impl Compiler<'_> {
    fn worlds(&mut self, path: &Path) -> Result<&Vec<World>, DiagramError> {
        let key: Vec<usize> = self
            .d
            .decision_order
            .iter()
            .map(|&k| path.assigned[k].or_else(|| self.d.forced.get(&k).copied()).unwrap_or(0))
            .collect();
        if !self.cache.contains_key(&key) {
            let actions: Vec<(NodeId, usize)> = self.d.decision_order.iter().copied().zip(key.iter().copied()).collect();
            let worlds = joint_distribution(self.d, &Policy::constant(&actions))?;
            self.cache.insert(key.clone(), worlds);
        }
        Ok(&self.cache[&key])
    }

    fn matches(path: &Path, d: &InfluenceDiagram, w: &World) -> bool {
        path.assigned
            .iter()
            .enumerate()
            .all(|(i, v)| v.is_none_or(|v| d.kind(i) != NodeKind::Chance || w.values[i] == v))
    }

    fn conditional(&mut self, path: &Path, node: NodeId) -> Result<Vec<Prob>, DiagramError> {
        let d = self.d;
        let worlds = self.worlds(path)?;
        let mut mass = vec![Prob::zero(); d.arity(node)];
        let mut total = Prob::zero();
        for w in worlds.iter().filter(|w| Self::matches(path, d, w)) {
            mass[w.values[node]] += &w.prob;
            total += &w.prob;
        }
        Ok(mass.into_iter().map(|m| if total.is_zero() { m } else { m / &total }).collect())
    }

    fn expected(&mut self, path: &Path) -> Result<Prob, DiagramError> {
        let d = self.d;
        let worlds = self.worlds(path)?;
        let mut num = Prob::zero();
        let mut total = Prob::zero();
        for w in worlds.iter().filter(|w| Self::matches(path, d, w)) {
            num += &w.prob * w.utility(d);
            total += &w.prob;
        }
        Ok(if total.is_zero() { total } else { num / total })
    }

    fn decision_stage(&mut self, k: usize, path: Path) -> Result<TreeNode, DiagramError> {
        let d = self.d;
        let Some(&dec) = d.decision_order.get(k) else {
            let hidden = self.hidden_relevant(&path);
            return self.branch_hidden(&hidden, path);
        };
        let mut pending: Vec<NodeId> = d
            .parents(dec)
            .iter()
            .copied()
            .filter(|&p| d.kind(p) == NodeKind::Chance && path.assigned[p].is_none())
            .collect();
        pending.sort_by_key(|&p| self.topo_pos[p]);
        self.branch_observed(k, dec, &pending, path)
    }

    fn branch_observed(&mut self, k: usize, dec: NodeId, pending: &[NodeId], path: Path) -> Result<TreeNode, DiagramError> {
        let d = self.d;
        if let Some((&x, rest)) = pending.split_first() {
            let probs = self.conditional(&path, x)?;
            let mut branches = Vec::new();
            for (o, p) in probs.into_iter().enumerate() {
                if p.is_zero() {
                    continue;
                }
                let mut next = path.clone();
                next.assigned[x] = Some(o);
                next.prob = &path.prob * &p;
                branches.push(ChanceBranch { outcome: o, prob: p, child: self.branch_observed(k, dec, rest, next)? });
            }
            return Ok(TreeNode::Chance { node: x, branches });
        }
        let info: Vec<usize> = d.parents(dec).iter().map(|&p| path.assigned[p].expect("observed before deciding")).collect();
        let mut branches = Vec::new();
        for a in d.actions(dec) {
            let mut next = path.clone();
            next.assigned[dec] = Some(a);
            branches.push((a, self.decision_stage(k + 1, next)?));
        }
        Ok(TreeNode::Decision { node: dec, info, branches })
    }

    fn branch_hidden(&mut self, hidden: &[NodeId], path: Path) -> Result<TreeNode, DiagramError> {
        let Some((&x, rest)) = hidden.split_first() else {
            let utility = self.expected(&path)?;
            return Ok(TreeNode::Terminal { utility, path_prob: path.prob, zero: false });
        };
        let probs = self.conditional(&path, x)?;
        let mut branches = Vec::new();
        for (o, p) in probs.into_iter().enumerate() {
            let child = if p.is_zero() {
                TreeNode::Terminal { utility: Prob::zero(), path_prob: Prob::zero(), zero: true }
            } else {
                let mut next = path.clone();
                next.assigned[x] = Some(o);
                next.prob = &path.prob * &p;
                self.branch_hidden(rest, next)?
            };
            branches.push(ChanceBranch { outcome: o, prob: p, child });
        }
        Ok(TreeNode::Chance { node: x, branches })
    }

    /// Unobserved non-deterministic chance ancestors of the value parents
    /// that the utility actually depends on given the path's decisions.
    fn hidden_relevant(&self, path: &Path) -> Vec<NodeId> {
        let d = self.d;
        let parents = &d.utility.parents;
        let mut seeds = Vec::new();
        for (slot, &p) in parents.iter().enumerate() {
            if d.kind(p) != NodeKind::Chance || !self.utility_varies(path, slot) {
                continue;
            }
            seeds.push(p);
        }
        let mut seen: BTreeSet<NodeId> = BTreeSet::new();
        while let Some(n) = seeds.pop() {
            if seen.insert(n) {
                seeds.extend(d.parents(n).iter().copied().filter(|&p| d.kind(p) == NodeKind::Chance));
            }
        }
        let mut out: Vec<NodeId> =
            seen.into_iter().filter(|&n| path.assigned[n].is_none() && !d.is_deterministic(n)).collect();
        out.sort_by_key(|&n| self.topo_pos[n]);
        out
    }

    fn utility_varies(&self, path: &Path, slot: usize) -> bool {
        let d = self.d;
        let parents = &d.utility.parents;
        let spaces: Vec<Vec<usize>> = parents
            .iter()
            .enumerate()
            .map(|(i, &p)| match (d.kind(p), path.assigned[p]) {
                (NodeKind::Decision, Some(a)) if i != slot => vec![a],
                _ => (0..d.arity(p)).collect(),
            })
            .collect();
        let mut values = vec![0; d.nodes.len()];
        for combo in crate::knowledge::product(&spaces) {
            if combo[slot] != 0 {
                continue;
            }
            for (&p, &v) in parents.iter().zip(&combo) {
                values[p] = v;
            }
            let base = d.utility_of(&values).clone();
            for o in 1..d.arity(parents[slot]) {
                values[parents[slot]] = o;
                if *d.utility_of(&values) != base {
                    return true;
                }
            }
        }
        false
    }
}

/// Expectation at chance nodes, maximum at decisions (first declared action
/// wins ties). Returns the root value and the maximizing policy.
pub fn rollback(t: &DecisionTree) -> (Prob, Policy) {
    let mut policy = Policy::default();
    let eu = roll(&t.root, &mut policy);
    policy.eu = eu.clone();
    (eu, policy)
}

fn roll(t: &TreeNode, policy: &mut Policy) -> Prob {
    match t {
        TreeNode::Terminal { utility, zero, .. } => {
            if *zero {
                Prob::zero()
            } else {
                utility.clone()
            }
        }
        TreeNode::Chance { branches, .. } => branches
            .iter()
            .filter(|b| !b.prob.is_zero())
            .map(|b| &b.prob * roll(&b.child, policy))
            .sum(),
        TreeNode::Decision { node, info, branches } => {
            let values: Vec<(usize, Prob)> = branches.iter().map(|(a, c)| (*a, roll(c, policy))).collect();
            let (best, best_v) = values
                .iter()
                .fold(None::<&(usize, Prob)>, |acc, cur| match acc {
                    Some(b) if b.1 >= cur.1 => Some(b),
                    _ => Some(cur),
                })
                .map(|(a, v)| (*a, v.clone()))
                .expect("decision has at least one action");
            let tied: Vec<usize> = values.iter().filter(|(a, v)| *a != best && *v == best_v).map(|(a, _)| *a).collect();
            if !tied.is_empty() {
                policy.tie_breaks.push(TieBreak { node: *node, info: info.clone(), chosen: best, tied });
            }
            policy.rules.entry(*node).or_default().insert(info.clone(), best);
            best_v
        }
    }
}
