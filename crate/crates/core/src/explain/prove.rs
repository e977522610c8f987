use crate::knowledge::unify::rename_atom;
use crate::knowledge::{
    eval_builtin, is_builtin, product, resolve, resolve_atom, unify, Atom, HornClause, ProbFact, ProbFactKind, Scenario,
    Substitution, Term, UTILITY_PREDICATE,
};
use crate::rational::Prob;
use num_traits::{Signed, Zero};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use thiserror::Error;

pub const DEFAULT_DEPTH: usize = 32;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Justification {
    /// A ground fact of the theory.
    Fact { clause: usize },
    /// A Horn clause of the theory; children prove its body in order.
    Clause { clause: usize },
    /// An entry of the utility table, read as `Attains(u) :- ...`.
    Utility { entry: usize },
    /// A declared distribution. `outcomes` holds the observed outcome, or
    /// the set of hypotheses consistent with the proof when unobserved.
    /// Conditional distributions have the parents' proofs as children.
    ProbFact { variable: String, outcomes: Vec<Term> },
    /// An atom of the training example.
    Example { index: usize },
    Builtin,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProofNode {
    pub conclusion: Atom,
    pub justification: Justification,
    pub children: Vec<ProofNode>,
}

impl ProofNode {
    pub fn leaves(&self) -> Vec<&ProofNode> {
        if self.children.is_empty() {
            return vec![self];
        }
        self.children.iter().flat_map(ProofNode::leaves).collect()
    }

    /// Pre-order traversal.
    pub fn walk(&self) -> Vec<&ProofNode> {
        let mut out = vec![self];
        for c in &self.children {
            out.extend(c.walk());
        }
        out
    }

    pub fn size(&self) -> usize {
        1 + self.children.iter().map(ProofNode::size).sum::<usize>()
    }

    /// Conclusion with unobserved hypothesis slots shown as `A|B`.
    pub fn label(&self, s: &Scenario) -> String {
        if let Justification::ProbFact { variable, outcomes } = &self.justification {
            if outcomes.len() > 1 {
                if let Some(f) = s.prob_fact(variable) {
                    let mut atom = self.conclusion.clone();
                    let alts: Vec<String> = outcomes.iter().map(Term::to_string).collect();
                    atom.args[f.pattern.value_slot] = Term::sym(alts.join("|"));
                    return atom.to_string();
                }
            }
        }
        self.conclusion.to_string()
    }

    pub fn render(&self, s: &Scenario) -> String {
        let mut out = String::new();
        self.render_into(s, 0, &mut out);
        out
    }

    fn render_into(&self, s: &Scenario, depth: usize, out: &mut String) {
        out.push_str(&"  ".repeat(depth));
        out.push_str(&self.label(s));
        out.push_str(&format!("  [{}]\n", self.justification));
        for c in &self.children {
            c.render_into(s, depth + 1, out);
        }
    }
}

impl fmt::Display for Justification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Justification::Fact { clause } => write!(f, "fact {}", clause + 1),
            Justification::Clause { clause } => write!(f, "clause {}", clause + 1),
            Justification::Utility { entry } => write!(f, "utility {}", entry + 1),
            Justification::ProbFact { variable, outcomes } if outcomes.len() == 1 => {
                write!(f, "{variable} = {}", outcomes[0])
            }
            Justification::ProbFact { variable, outcomes } => {
                let alts: Vec<String> = outcomes.iter().map(Term::to_string).collect();
                write!(f, "{variable} in {{{}}}", alts.join(", "))
            }
            Justification::Example { index } => write!(f, "example {}", index + 1),
            Justification::Builtin => write!(f, "arithmetic"),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ProofError {
    #[error("no proof found for {0}")]
    NoProof(Atom),
    #[error("no proof of {goal} within depth {depth}")]
    DepthExceeded { goal: Atom, depth: usize },
    #[error("the training example does not realise any utility-table entry")]
    NoStageUtility,
}

/// The goal that the training example solves one stage: it attains the
/// utility its recorded actions and outcomes earn.
pub fn stage_goal(s: &Scenario) -> Result<Atom, ProofError> {
    let u = s.example_utility().ok_or(ProofError::NoStageUtility)?;
    Ok(Atom::new(UTILITY_PREDICATE, vec![Term::Num(u)]))
}

pub fn prove(goal: &Atom, s: &Scenario) -> Result<ProofNode, ProofError> {
    prove_with_depth(goal, s, DEFAULT_DEPTH)
}

/// Backward chaining, first success in declaration order.
pub fn prove_with_depth(goal: &Atom, s: &Scenario, max_depth: usize) -> Result<ProofNode, ProofError> {
    let mut prover = Prover::new(s, max_depth);
    let mut found = None;
    prover.solve_one(goal, Substitution::new(), 0, &mut |_, subst, node| {
        found = Some(finish(&node, &subst));
        true
    });
    match found {
        Some(p) => Ok(p),
        None if prover.hit_depth => Err(ProofError::DepthExceeded { goal: goal.clone(), depth: max_depth }),
        None => Err(ProofError::NoProof(goal.clone())),
    }
}

fn finish(node: &ProofNode, s: &Substitution) -> ProofNode {
    let conclusion = strip_renaming(&resolve_atom(&node.conclusion, s));
    let justification = match &node.justification {
        Justification::ProbFact { variable, outcomes } => Justification::ProbFact {
            variable: variable.clone(),
            outcomes: outcomes.iter().map(|o| resolve(o, s)).collect(),
        },
        j => j.clone(),
    };
    ProofNode { conclusion, justification, children: node.children.iter().map(|c| finish(c, s)).collect() }
}

/// `k_12` → `k` for variables left unbound in a finished proof.
fn strip_renaming(atom: &Atom) -> Atom {
    fn go(t: &Term) -> Term {
        match t {
            Term::Var(v) => match v.rsplit_once('_') {
                Some((base, n)) if !base.is_empty() && n.chars().all(|c| c.is_ascii_digit()) => Term::Var(base.to_string()),
                _ => t.clone(),
            },
            Term::App(f, args) => Term::App(f.clone(), args.iter().map(go).collect()),
            other => other.clone(),
        }
    }
    Atom { pred: atom.pred.clone(), args: atom.args.iter().map(go).collect() }
}

type GoalsCont<'k, 'a> = dyn FnMut(&mut Prover<'a>, Substitution, Vec<ProofNode>) -> bool + 'k;
type GoalCont<'k, 'a> = dyn FnMut(&mut Prover<'a>, Substitution, ProofNode) -> bool + 'k;

pub(crate) struct Prover<'a> {
    s: &'a Scenario,
    classes: BTreeMap<Term, BTreeSet<String>>,
    utility_clauses: Vec<Option<HornClause>>,
    counter: usize,
    max_depth: usize,
    hit_depth: bool,
}

impl<'a> Prover<'a> {
    fn new(s: &'a Scenario, max_depth: usize) -> Self {
        Prover {
            s,
            classes: s.classes(),
            utility_clauses: s.problem.utilities.iter().map(|u| s.utility_clause(u)).collect(),
            counter: 0,
            max_depth,
            hit_depth: false,
        }
    }

    fn fresh(&mut self) -> usize {
        self.counter += 1;
        self.counter
    }

    fn class_ok(&self, f: &ProbFact, goal: &Atom, subst: &Substitution) -> bool {
        match (&f.pattern.class, f.pattern.subject_slot) {
            (Some(class), Some(slot)) => {
                let subject = resolve(&goal.args[slot], subst);
                !subject.is_ground() || self.classes.get(&subject).is_some_and(|c| c.contains(class))
            }
            _ => true,
        }
    }

    /// The declared prob fact a goal is about, if any.
    fn fact_for(&self, goal: &Atom, subst: &Substitution) -> Option<&'a ProbFact> {
        let s: &'a Scenario = self.s;
        s.theory.prob_facts.iter().find(|f| f.pattern.shape_matches(goal) && self.class_ok(f, goal, subst))
    }

    fn solve(&mut self, goals: &[Atom], subst: Substitution, depth: usize, k: &mut GoalsCont<'_, 'a>) -> bool {
        let Some((first, rest)) = goals.split_first() else {
            return k(self, subst, Vec::new());
        };
        self.solve_one(first, subst, depth, &mut |this, s1, node| {
            this.solve(rest, s1, depth, &mut |this2, s2, mut proofs| {
                proofs.insert(0, node.clone());
                k(this2, s2, proofs)
            })
        })
    }

    pub(crate) fn solve_one(&mut self, goal: &Atom, subst: Substitution, depth: usize, k: &mut GoalCont<'_, 'a>) -> bool {
        if depth > self.max_depth {
            self.hit_depth = true;
            return false;
        }
        let s: &'a Scenario = self.s;
        let g = resolve_atom(goal, &subst);
        let leaf = |j: Justification| ProofNode { conclusion: g.clone(), justification: j, children: Vec::new() };

        if is_builtin(&g.pred) {
            if let Some(s1) = eval_builtin(&g, &subst) {
                return k(self, s1, leaf(Justification::Builtin));
            }
            return false;
        }

        if g.pred == UTILITY_PREDICATE {
            for (entry, clause) in self.utility_clauses.clone().into_iter().enumerate() {
                let Some(clause) = clause else { continue };
                let n = self.fresh();
                let head = rename_atom(&clause.head, n);
                let Some(s1) = unify(&head, &g, &subst) else { continue };
                let body: Vec<Atom> = clause.body.iter().map(|b| rename_atom(b, n)).collect();
                let concl = g.clone();
                let stop = self.solve(&body, s1, depth + 1, &mut |this, s2, children| {
                    let node = ProofNode { conclusion: concl.clone(), justification: Justification::Utility { entry }, children };
                    k(this, s2, node)
                });
                if stop {
                    return true;
                }
            }
            return false;
        }

        for (i, clause) in s.theory.clauses.iter().enumerate() {
            let n = self.fresh();
            let head = rename_atom(&clause.head, n);
            let Some(s1) = unify(&head, &g, &subst) else { continue };
            if clause.is_fact() {
                if k(self, s1, leaf(Justification::Fact { clause: i })) {
                    return true;
                }
                continue;
            }
            let body: Vec<Atom> = clause.body.iter().map(|b| rename_atom(b, n)).collect();
            let concl = g.clone();
            let stop = self.solve(&body, s1, depth + 1, &mut |this, s2, children| {
                let node = ProofNode { conclusion: concl.clone(), justification: Justification::Clause { clause: i }, children };
                k(this, s2, node)
            });
            if stop {
                return true;
            }
        }

        let fact = self.fact_for(&g, &subst);
        if let Some(f) = fact.filter(|f| f.is_conditional()) {
            return self.conditional(f, &g, subst, depth, k);
        }

        for (i, e) in s.example.atoms.iter().enumerate() {
            if let Some(s1) = unify(e, &g, &subst) {
                if k(self, s1, leaf(Justification::Example { index: i })) {
                    return true;
                }
            }
        }

        if let Some(f) = fact.filter(|f| !f.is_derived()) {
            return self.root_fact(f, &g, subst, k);
        }
        false
    }

    fn conditional(&mut self, f: &'a ProbFact, g: &Atom, subst: Substitution, depth: usize, k: &mut GoalCont<'_, 'a>) -> bool {
        let s: &'a Scenario = self.s;
        let ProbFactKind::Distribution { outcomes, parents, .. } = &f.kind else { return false };
        // A reported outcome fixes which object the goal is about.
        let mut starts: Vec<Substitution> = s.example.atoms.iter().filter_map(|e| unify(e, g, &subst)).collect();
        if starts.is_empty() {
            starts.push(subst);
        }
        for start in starts {
            let n = self.fresh();
            let pattern = rename_atom(&f.pattern.atom, n);
            let Some(s1) = unify(&pattern, g, &start) else { continue };
            let parent_atoms: Vec<Atom> = parents.iter().map(|p| rename_atom(&p.atom, n)).collect();
            let value = pattern.args[f.pattern.value_slot].clone();
            let concl = g.clone();
            let stop = self.solve(&parent_atoms, s1, depth + 1, &mut |this, s2, children| {
                let parent_values: Vec<Vec<Term>> = parents
                    .iter()
                    .zip(&parent_atoms)
                    .map(|(p, a)| {
                        let slot = this.value_slot_of(&p.variable);
                        let v = resolve(&a.args[slot], &s2);
                        if v.is_ground() {
                            vec![v]
                        } else {
                            this.s.declared_outcomes(&p.variable).unwrap_or_default()
                        }
                    })
                    .collect();
                let possible: Vec<Term> = outcomes
                    .iter()
                    .filter(|o| {
                        product(&parent_values)
                            .iter()
                            .any(|combo| f.prob_of(o, combo).is_some_and(|p| p.is_positive()))
                    })
                    .cloned()
                    .collect();
                let v = resolve(&value, &s2);
                let mut s3 = s2.clone();
                let observed: Vec<Term> = if v.is_ground() {
                    if !possible.contains(&v) {
                        return false;
                    }
                    vec![v]
                } else {
                    if possible.len() == 1 {
                        s3.insert(var_name(&v), possible[0].clone());
                    }
                    possible
                };
                if observed.is_empty() {
                    return false;
                }
                let node = ProofNode {
                    conclusion: concl.clone(),
                    justification: Justification::ProbFact { variable: f.variable.clone(), outcomes: observed },
                    children,
                };
                k(this, s3, node)
            });
            if stop {
                return true;
            }
        }
        false
    }

    fn root_fact(&mut self, f: &'a ProbFact, g: &Atom, subst: Substitution, k: &mut GoalCont<'_, 'a>) -> bool {
        let s: &'a Scenario = self.s;
        let reported = s.example.atoms.iter().any(|e| {
            if !f.pattern.shape_matches(e) || self.fact_for(e, &Substitution::new()).map(|x| &x.variable) != Some(&f.variable) {
                return false;
            }
            let same_subject = f.pattern.subject_slot.is_some_and(|slot| {
                let subj = resolve(&g.args[slot], &subst);
                subj.is_ground() && e.args[slot] == subj
            });
            same_subject || unify(e, g, &subst).is_some()
        });
        if reported {
            return false;
        }
        let n = self.fresh();
        let pattern = rename_atom(&f.pattern.atom, n);
        let Some(mut s1) = unify(&pattern, g, &subst) else { return false };
        let outcomes = f.outcomes().unwrap_or_default();
        let row = f.row_for(&[]).map(<[Prob]>::to_vec).unwrap_or_default();
        let possible: Vec<Term> =
            outcomes.iter().zip(&row).filter(|(_, p)| !p.is_zero()).map(|(o, _)| o.clone()).collect();
        let v = resolve(&pattern.args[f.pattern.value_slot], &s1);
        let observed = if v.is_ground() {
            if !possible.contains(&v) {
                return false;
            }
            vec![v]
        } else {
            if possible.len() == 1 {
                s1.insert(var_name(&v), possible[0].clone());
            }
            possible
        };
        let node = ProofNode {
            conclusion: g.clone(),
            justification: Justification::ProbFact { variable: f.variable.clone(), outcomes: observed },
            children: Vec::new(),
        };
        k(self, s1, node)
    }

    fn value_slot_of(&self, variable: &str) -> usize {
        use crate::knowledge::VariableRef;
        match self.s.lookup(variable) {
            Some(VariableRef::Fact(f)) => f.pattern.value_slot,
            Some(VariableRef::Decision(d)) => d.pattern.value_slot,
            _ => 0,
        }
    }
}

fn var_name(t: &Term) -> String {
    match t {
        Term::Var(v) => v.clone(),
        _ => unreachable!("only unbound variables are named"),
    }
}
