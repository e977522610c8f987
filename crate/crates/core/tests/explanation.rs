mod common;

use std::collections::{BTreeMap, BTreeSet};
use tbil::explain::{explain, generalize, prove, stage_goal, to_influence_diagram, Justification, NodeTag};
use tbil::knowledge::unify::rename_atom;
use tbil::knowledge::{
    eval_builtin, is_builtin, parse_scenario, resolve, resolve_atom, unify, Atom, Scenario, Substitution, Term,
    UTILITY_PREDICATE,
};
use tbil::policy::solve;
use tbil::rational::ratio;

/// Proof tree as found by the oracle, before the final substitution.
#[derive(Clone, Debug)]
struct Tree {
    atom: Atom,
    children: Vec<Tree>,
}

impl Tree {
    fn size(&self) -> usize {
        1 + self.children.iter().map(Tree::size).sum::<usize>()
    }
    fn render(&self, s: &Substitution) -> String {
        let kids: Vec<String> = self.children.iter().map(|c| c.render(s)).collect();
        format!("{}[{}]", resolve_atom(&self.atom, s), kids.join(","))
    }
}

/// Exhaustive backward chaining: every proof, not just the first.
struct Oracle<'a> {
    s: &'a Scenario,
    classes: BTreeMap<Term, BTreeSet<String>>,
    counter: usize,
    max_depth: usize,
}

impl<'a> Oracle<'a> {
    fn new(s: &'a Scenario, max_depth: usize) -> Self {
        Oracle { s, classes: s.classes(), counter: 0, max_depth }
    }

    fn fresh(&mut self) -> usize {
        self.counter += 1;
        1_000_000 + self.counter
    }

    fn all(&mut self, goals: &[Atom], sub: &Substitution, depth: usize) -> Vec<(Substitution, Vec<Tree>)> {
        let Some((first, rest)) = goals.split_first() else {
            return vec![(sub.clone(), Vec::new())];
        };
        let mut out = Vec::new();
        for (s1, t) in self.one(first, sub, depth) {
            for (s2, mut ts) in self.all(rest, &s1, depth) {
                ts.insert(0, t.clone());
                out.push((s2, ts));
            }
        }
        out
    }

    fn clause_solutions(&mut self, head: &Atom, body: &[Atom], g: &Atom, sub: &Substitution, depth: usize) -> Vec<(Substitution, Tree)> {
        let n = self.fresh();
        let head = rename_atom(head, n);
        let Some(s1) = unify(&head, g, sub) else { return Vec::new() };
        let body: Vec<Atom> = body.iter().map(|b| rename_atom(b, n)).collect();
        self.all(&body, &s1, depth + 1).into_iter().map(|(s2, children)| (s2, Tree { atom: g.clone(), children })).collect()
    }

    fn one(&mut self, goal: &Atom, sub: &Substitution, depth: usize) -> Vec<(Substitution, Tree)> {
        if depth > self.max_depth {
            return Vec::new();
        }
        let s = self.s;
        let g = resolve_atom(goal, sub);
        let leaf = Tree { atom: g.clone(), children: Vec::new() };
        if is_builtin(&g.pred) {
            return eval_builtin(&g, sub).map(|s1| vec![(s1, leaf)]).unwrap_or_default();
        }
        let mut out = Vec::new();
        if g.pred == UTILITY_PREDICATE {
            for entry in &s.problem.utilities {
                if let Some(c) = s.utility_clause(entry) {
                    out.extend(self.clause_solutions(&c.head, &c.body, &g, sub, depth));
                }
            }
            return out;
        }
        for c in &s.theory.clauses {
            out.extend(self.clause_solutions(&c.head, &c.body, &g, sub, depth));
        }
        let class_ok = |f: &tbil::knowledge::ProbFact, sub: &Substitution| match (&f.pattern.class, f.pattern.subject_slot) {
            (Some(class), Some(slot)) => {
                let subj = resolve(&g.args[slot], sub);
                !subj.is_ground() || self.classes.get(&subj).is_some_and(|c| c.contains(class))
            }
            _ => true,
        };
        let fact = s.theory.prob_facts.iter().find(|f| f.pattern.shape_matches(&g) && class_ok(f, sub)).cloned();
        if let Some(f) = fact.as_ref().filter(|f| f.is_conditional()) {
            // Explained through its parents; the value must be possible.
            let n = self.fresh();
            let pattern = rename_atom(&f.pattern.atom, n);
            let mut starts: Vec<Substitution> = s.example.atoms.iter().filter_map(|e| unify(e, &g, sub)).collect();
            if starts.is_empty() {
                starts.push(sub.clone());
            }
            for start in starts {
                let Some(s1) = unify(&pattern, &g, &start) else { continue };
                let parents: Vec<Atom> = f.parents().iter().map(|p| rename_atom(&p.atom, n)).collect();
                for (s2, children) in self.all(&parents, &s1, depth + 1) {
                    let v = resolve(&pattern.args[f.pattern.value_slot], &s2);
                    let values: Option<Vec<Term>> = f
                        .parents()
                        .iter()
                        .zip(&parents)
                        .map(|(p, a)| {
                            let slot = s.prob_fact(&p.variable).map(|pf| pf.pattern.value_slot).or_else(|| {
                                s.decision(&p.variable).map(|d| d.pattern.value_slot)
                            })?;
                            let t = resolve(&a.args[slot], &s2);
                            t.is_ground().then_some(t)
                        })
                        .collect();
                    let ok = match values {
                        Some(vals) if v.is_ground() => f.prob_of(&v, &vals).is_some_and(|p| p > ratio(0, 1)),
                        _ => true,
                    };
                    if ok {
                        out.push((s2, Tree { atom: g.clone(), children }));
                    }
                }
            }
            return out;
        }
        for e in &s.example.atoms {
            if let Some(s1) = unify(e, &g, sub) {
                out.push((s1, leaf.clone()));
            }
        }
        if let Some(f) = fact.filter(|f| !f.is_derived()) {
            let reported = s.example.atoms.iter().any(|e| {
                f.pattern.shape_matches(e)
                    && (unify(e, &g, sub).is_some()
                        || f.pattern.subject_slot.is_some_and(|k| {
                            let subj = resolve(&g.args[k], sub);
                            subj.is_ground() && e.args[k] == subj
                        }))
            });
            if !reported {
                // A hypothesis leaf over the fact's possible outcomes.
                out.push((sub.clone(), leaf));
            }
        }
        out
    }
}

fn robot_goal() -> (Scenario, Atom) {
    let s = tbil::fixtures::robot();
    let g = stage_goal(&s).unwrap();
    (s, g)
}

#[test]
fn minimal_proof_is_unique_and_found() {
    let (s, goal) = robot_goal();
    let mut oracle = Oracle::new(&s, 10);
    let proofs = oracle.one(&goal, &Substitution::new(), 0);
    assert!(!proofs.is_empty());
    let min = proofs.iter().map(|(_, t)| t.size()).min().unwrap();
    let minimal: BTreeSet<String> = proofs.iter().filter(|(_, t)| t.size() == min).map(|(s1, t)| t.render(s1)).collect();
    assert_eq!(minimal.len(), 1, "{minimal:#?}");
    let p = prove(&goal, &s).unwrap();
    assert_eq!(p.size(), min);
}

#[test]
fn generalization_subsumes_the_proof() {
    common::checks::check_subsumption(&tbil::fixtures::robot());
}

#[test]
fn proof_leaves_are_grounded() {
    let (s, goal) = robot_goal();
    let p = prove(&goal, &s).unwrap();
    for leaf in p.leaves() {
        let ok = matches!(
            leaf.justification,
            Justification::Fact { .. } | Justification::Example { .. } | Justification::Builtin | Justification::ProbFact { .. }
        );
        assert!(ok, "dangling leaf {}", leaf.conclusion);
    }
}

#[test]
fn deterministic() {
    let s = tbil::fixtures::robot();
    let a = explain(&s).unwrap();
    let b = explain(&s).unwrap();
    assert_eq!(a.proof, b.proof);
    assert_eq!(a.graph, b.graph);
    assert_eq!(a.diagram, b.diagram);
}

#[test]
fn graph_invariants() {
    let e = explain(&tbil::fixtures::robot()).unwrap();
    assert!(e.graph.is_acyclic());
    for n in &e.graph.nodes {
        if n.tag == NodeTag::Chance {
            assert!(n.distribution.is_some(), "{} lacks a distribution", n.name);
        }
    }
    let density = &e.graph.nodes[e.graph.node("BoxDensity").unwrap()];
    let f = density.distribution.as_ref().unwrap();
    assert_eq!(f.outcomes().unwrap(), [Term::Num(ratio(3, 10)), Term::Num(ratio(2, 5))]);
    assert_eq!(f.row_for(&[]).unwrap(), [ratio(1, 2), ratio(1, 2)]);
    assert_eq!(e.graph.bindings.get("b"), Some(&Term::sym("Box-0")));
}

#[test]
fn figure_two_structure() {
    let d = explain(&tbil::fixtures::robot()).unwrap().diagram;
    let names: Vec<&str> = d.nodes.iter().map(|n| n.name.as_str()).collect();
    assert_eq!(
        names,
        [
            "BoxDensity", "BoxVolume", "BoxWeight", "TableWeight", "TableStrength", "WeightRelation", "Outcome", "PathDecision",
            "Utility", "MeasureDensity", "DensimeterError", "MeasuredDensity"
        ]
    );
    let md = d.node_id("MeasuredDensity").unwrap();
    let path = d.node_id("PathDecision").unwrap();
    assert!(d.parents(path).contains(&md));
    assert!(tbil::diagram::validate(&d).is_empty());
}

fn without_measurables(s: &Scenario) -> Scenario {
    let mut v: serde_json::Value = serde_json::from_str(&s.to_json()).unwrap();
    let obj = v.as_object_mut().unwrap();
    obj.remove("measurement");
    if let Some(order) = obj.get_mut("decision_problem").and_then(|p| p.get_mut("information_order")) {
        *order = serde_json::json!(["PathDecision"]);
    }
    parse_scenario(&v.to_string()).unwrap()
}

#[test]
fn no_measurables_no_measurement_nodes() {
    let s = without_measurables(&tbil::fixtures::robot());
    let e = explain(&s).unwrap();
    assert_eq!(e.diagram.nodes.len(), 9);
    assert!(e.diagram.node_id("MeasuredDensity").is_none());
    assert_eq!(solve(&e.diagram).unwrap(), ratio(44, 1));
}

#[test]
fn identity_generalization_without_example_constants() {
    let s = tbil::fixtures::robot();
    // A proof of an arithmetic identity mentions no example constant.
    let goal = Atom::new("Times", vec![Term::Num(ratio(2, 1)), Term::Num(ratio(3, 1)), Term::Num(ratio(6, 1))]);
    let p = prove(&goal, &s).unwrap();
    let g = generalize(&p, &s);
    assert!(g.bindings.is_empty());
    assert_eq!(g.nodes.len(), 1);
    assert_eq!(g.nodes[0].atom, goal);
    assert!(to_influence_diagram(&g, &s).is_err());
}
