use super::generalize::{ExplanationGraph, NodeTag};
use crate::diagram::{Cpt, DiagramError, InfluenceDiagram, Instrument, Node, NodeKind, UtilityTable};
use crate::knowledge::unify::rename_atom;
use crate::knowledge::{eval_builtin, is_builtin, product, resolve, unify, Atom, Scenario, Substitution, Term, VariableRef};
use crate::rational::Prob;
use num_traits::{One, Zero};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExplainError {
    #[error(transparent)]
    Diagram(#[from] DiagramError),
    #[error(transparent)]
    Proof(#[from] super::ProofError),
    #[error("`{variable}` is undefined when {context}")]
    Undefined { variable: String, context: String },
    #[error("`{variable}` depends on `{parent}`, which the explanation does not contain")]
    MissingParent { variable: String, parent: String },
    #[error("no utility entry applies when {0}")]
    UtilityUndefined(String),
    #[error("the explanation has no utility node")]
    NoUtility,
}

const UNMEASURED: &str = "Unmeasured";

/// Reads the influence diagram off a generalized explanation: declared
/// variables become chance or decision nodes (derived relations get 0/1
/// tables computed from their defining clauses), the utility table becomes
/// the value node, and arcs through class guards and arithmetic are
/// contracted.
pub fn to_influence_diagram(g: &ExplanationGraph, s: &Scenario) -> Result<InfluenceDiagram, ExplainError> {
    let keep: Vec<usize> = (0..g.nodes.len()).filter(|&i| g.is_variable_node(i)).collect();
    let did: BTreeMap<usize, usize> = keep.iter().enumerate().map(|(d, &gid)| (gid, d)).collect();
    let by_name: BTreeMap<&str, usize> = keep.iter().enumerate().map(|(d, &gid)| (g.nodes[gid].name.as_str(), d)).collect();
    let n = keep.len();
    let value_node = keep.iter().position(|&gid| g.nodes[gid].tag == NodeTag::Utility).ok_or(ExplainError::NoUtility)?;

    let mut parents: Vec<Vec<usize>> = keep.iter().map(|&gid| g.variable_parents(gid).iter().map(|p| did[p]).collect()).collect();
    let mut outcomes: Vec<Option<Vec<Term>>> = vec![None; n];
    let mut cpts: BTreeMap<usize, Cpt> = BTreeMap::new();
    let mut kinds = vec![NodeKind::Chance; n];
    kinds[value_node] = NodeKind::Value;

    // Class guards of the generalized explanation, for evaluating clauses.
    let classes: BTreeMap<Term, String> = g
        .nodes
        .iter()
        .filter(|x| x.atom.pred == "IsA" && x.atom.args.len() >= 2)
        .filter_map(|x| match &x.atom.args[1] {
            Term::Sym(c) => Some((freeze(&x.atom.args[0]), c.clone())),
            _ => None,
        })
        .collect();

    let order = topo(&parents).ok_or_else(|| {
        ExplainError::Diagram(DiagramError::Invalid(vec![crate::knowledge::Diagnostic {
            message: "the explanation has a directed cycle".into(),
        }]))
    })?;

    for &d in &order {
        if d == value_node {
            continue;
        }
        let node = &g.nodes[keep[d]];
        let name = node.name.clone();
        match s.lookup(&name) {
            Some(VariableRef::Decision(dec)) => {
                kinds[d] = NodeKind::Decision;
                outcomes[d] = Some(dec.actions.clone());
            }
            Some(VariableRef::MeasureDecision(m)) => {
                kinds[d] = NodeKind::Decision;
                outcomes[d] = Some(m.actions.iter().map(|a| Term::sym(a.clone())).collect());
            }
            Some(VariableRef::Fact(f)) if !f.is_derived() => {
                let fact_parents: Vec<usize> = f
                    .parents()
                    .iter()
                    .map(|p| {
                        by_name.get(p.variable.as_str()).copied().ok_or_else(|| ExplainError::MissingParent {
                            variable: name.clone(),
                            parent: p.variable.clone(),
                        })
                    })
                    .collect::<Result<_, _>>()?;
                let spaces: Vec<Vec<Term>> = fact_parents.iter().map(|&p| outcomes[p].clone().expect("parents first")).collect();
                let mut rows = Vec::new();
                for combo in product(&spaces) {
                    let row = f.row_for(&combo).ok_or_else(|| ExplainError::Undefined {
                        variable: name.clone(),
                        context: describe(&fact_parents, &combo, g, &keep),
                    })?;
                    rows.push(row.to_vec());
                }
                parents[d] = fact_parents.clone();
                outcomes[d] = f.outcomes().map(<[Term]>::to_vec);
                cpts.insert(d, Cpt { parents: fact_parents, rows });
            }
            Some(VariableRef::Error(m)) => {
                parents[d] = Vec::new();
                outcomes[d] = Some(m.errors.iter().cloned().map(Term::Num).collect());
                cpts.insert(d, Cpt { parents: Vec::new(), rows: vec![m.distribution.clone()] });
            }
            Some(VariableRef::Reading(m)) => {
                let target = by_name[m.variable.as_str()];
                let error = by_name[m.error_variable.as_str()];
                let decision = by_name[m.decision.as_str()];
                let targets = outcomes[target].clone().expect("target first");
                let errors = outcomes[error].clone().expect("error first");
                let mut readings: Vec<Term> = Vec::new();
                for t in &targets {
                    for e in &errors {
                        if let (Some(a), Some(b)) = (t.as_num(), e.as_num()) {
                            readings.push(Term::Num(a + b));
                        }
                    }
                }
                let mut space = vec![Term::sym(UNMEASURED)];
                space.extend(readings);
                let space = order_outcomes(space);
                let ps = vec![target, error, decision];
                let mut rows = Vec::new();
                let measure = 1;
                for t in &targets {
                    for e in &errors {
                        for a in 0..2 {
                            let hit = if a == measure {
                                match (t.as_num(), e.as_num()) {
                                    (Some(x), Some(y)) => Term::Num(x + y),
                                    _ => Term::sym(UNMEASURED),
                                }
                            } else {
                                Term::sym(UNMEASURED)
                            };
                            rows.push(point_mass(&space, &hit));
                        }
                    }
                }
                parents[d] = ps.clone();
                outcomes[d] = Some(space);
                cpts.insert(d, Cpt { parents: ps, rows });
            }
            Some(VariableRef::Fact(f)) => {
                // Derived relation: evaluate the defining clauses per parent configuration.
                let ps = parents[d].clone();
                let spaces: Vec<Vec<Term>> = ps.iter().map(|&p| outcomes[p].clone().expect("parents first")).collect();
                let slot = f.pattern.value_slot;
                let mut values = Vec::new();
                for combo in product(&spaces) {
                    let parent_atoms: Vec<Atom> = ps
                        .iter()
                        .zip(&combo)
                        .filter_map(|(&p, v)| {
                            let pn = &g.nodes[keep[p]];
                            let pslot = value_slot(s, &pn.name)?;
                            let mut a = freeze_atom(&pn.atom);
                            a.args[pslot] = v.clone();
                            Some(a)
                        })
                        .collect();
                    let mut target = freeze_atom(&node.atom);
                    target.args[slot] = Term::var("value");
                    let v = derive(s, &target, slot, &parent_atoms, &classes).ok_or_else(|| ExplainError::Undefined {
                        variable: name.clone(),
                        context: describe(&ps, &combo, g, &keep),
                    })?;
                    values.push(v);
                }
                let space = order_outcomes(values.clone());
                let rows = values.iter().map(|v| point_mass(&space, v)).collect();
                outcomes[d] = Some(space);
                cpts.insert(d, Cpt { parents: ps, rows });
            }
            None => {
                return Err(ExplainError::Undefined { variable: name, context: "no declaration exists".into() });
            }
        }
    }

    // Decisions in information order, with no-forgetting closure.
    let decision_order: Vec<usize> =
        s.decision_sequence().iter().filter_map(|nm| by_name.get(nm.as_str()).copied()).collect();
    let mut info: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    let mut known: Vec<usize> = Vec::new();
    for &dec in &decision_order {
        let mut mine = known.clone();
        for &p in &parents[dec] {
            if !mine.contains(&p) {
                mine.push(p);
            }
        }
        mine.sort_unstable();
        info.insert(dec, mine.clone());
        known = mine;
        known.push(dec);
        known.sort_unstable();
    }

    // Value node over the variables the utility table mentions.
    let mut uparents: Vec<usize> = Vec::new();
    for entry in &s.problem.utilities {
        for c in &entry.when {
            if let Some(&p) = by_name.get(c.variable.as_str()) {
                if !uparents.contains(&p) {
                    uparents.push(p);
                }
            }
        }
    }
    for &p in &parents[value_node] {
        if !uparents.contains(&p) {
            uparents.push(p);
        }
    }
    let mut instruments = Vec::new();
    for m in &s.measurables {
        let (Some(&dec), Some(&err), Some(&reading), Some(&target)) = (
            by_name.get(m.decision.as_str()),
            by_name.get(m.error_variable.as_str()),
            by_name.get(m.reading.as_str()),
            by_name.get(m.variable.as_str()),
        ) else {
            continue;
        };
        if !uparents.contains(&dec) {
            uparents.push(dec);
        }
        instruments.push(Instrument {
            name: m.instrument.clone(),
            target,
            decision: dec,
            error: err,
            reading,
            measure_action: 1,
            cost: m.cost.clone(),
        });
    }
    let spaces: Vec<Vec<Term>> = uparents.iter().map(|&p| outcomes[p].clone().expect("all outcome spaces known")).collect();
    let mut uvalues = Vec::new();
    for combo in product(&spaces) {
        let value_of = |var: &str| uparents.iter().position(|&p| g.nodes[keep[p]].name == var).map(|i| &combo[i]);
        let entry = s
            .problem
            .utilities
            .iter()
            .find(|u| u.when.iter().all(|c| value_of(&c.variable) == Some(&c.value)))
            .ok_or_else(|| ExplainError::UtilityUndefined(describe(&uparents, &combo, g, &keep)))?;
        let mut u = entry.utils.clone();
        for inst in &instruments {
            if let Some(i) = uparents.iter().position(|&p| p == inst.decision) {
                if combo[i] == Term::sym(s.measurables.iter().find(|m| m.instrument == inst.name).expect("declared").actions[1].clone()) {
                    u -= &inst.cost;
                }
            }
        }
        uvalues.push(u);
    }

    let nodes: Vec<Node> = (0..n)
        .map(|d| Node {
            name: g.nodes[keep[d]].name.clone(),
            kind: kinds[d],
            outcomes: outcomes[d].as_ref().map(|o| o.iter().map(Term::to_string).collect()).unwrap_or_default(),
        })
        .collect();
    let diagram = InfluenceDiagram {
        nodes,
        cpts,
        info,
        utility: UtilityTable { parents: uparents, values: uvalues },
        value_node,
        decision_order,
        instruments,
        forced: BTreeMap::new(),
    };
    diagram.ensure_valid()?;
    Ok(diagram)
}

/// Symbols keep their order of appearance; numbers follow, ascending.
fn order_outcomes(values: Vec<Term>) -> Vec<Term> {
    let mut symbols = Vec::new();
    let mut numbers: Vec<Term> = Vec::new();
    for v in values {
        if v.as_num().is_some() {
            if !numbers.contains(&v) {
                numbers.push(v);
            }
        } else if !symbols.contains(&v) {
            symbols.push(v);
        }
    }
    numbers.sort_by(|a, b| a.as_num().cmp(&b.as_num()));
    symbols.extend(numbers);
    symbols
}

fn point_mass(space: &[Term], hit: &Term) -> Vec<Prob> {
    space.iter().map(|o| if o == hit { Prob::one() } else { Prob::zero() }).collect()
}

fn value_slot(s: &Scenario, name: &str) -> Option<usize> {
    match s.lookup(name)? {
        VariableRef::Fact(f) => Some(f.pattern.value_slot),
        VariableRef::Decision(d) => Some(d.pattern.value_slot),
        _ => None,
    }
}

fn describe(ps: &[usize], combo: &[Term], g: &ExplanationGraph, keep: &[usize]) -> String {
    ps.iter().zip(combo).map(|(&p, v)| format!("{}={v}", g.nodes[keep[p]].name)).collect::<Vec<_>>().join(", ")
}

/// Treats the explanation's variables as fixed objects.
fn freeze(t: &Term) -> Term {
    match t {
        Term::Var(v) => Term::Sym(format!("?{v}")),
        Term::App(f, args) => Term::App(f.clone(), args.iter().map(freeze).collect()),
        other => other.clone(),
    }
}

fn freeze_atom(a: &Atom) -> Atom {
    Atom { pred: a.pred.clone(), args: a.args.iter().map(freeze).collect() }
}

/// Value of a derived relation from the first defining clause whose body
/// holds, reading variable-bearing body atoms off the parents' values.
fn derive(s: &Scenario, target: &Atom, slot: usize, parents: &[Atom], classes: &BTreeMap<Term, String>) -> Option<Term> {
    for (i, clause) in s.theory.clauses.iter().enumerate() {
        if clause.head.pred != target.pred || clause.head.args.len() != target.args.len() || clause.is_fact() {
            continue;
        }
        let head = rename_atom(&clause.head, i + 1);
        let Some(mut sigma) = unify(&head, target, &Substitution::new()) else { continue };
        let mut ok = true;
        for b in &clause.body {
            let b = rename_atom(b, i + 1);
            if b.pred == "IsA" && b.args.len() >= 2 {
                let subject = resolve(&b.args[0], &sigma);
                if let (Some(known), Term::Sym(want)) = (classes.get(&subject), &b.args[1]) {
                    if known != want {
                        ok = false;
                        break;
                    }
                }
                continue;
            }
            if is_builtin(&b.pred) {
                match eval_builtin(&b, &sigma) {
                    Some(next) => sigma = next,
                    None => {
                        ok = false;
                        break;
                    }
                }
                continue;
            }
            match parents.iter().find_map(|p| unify(&b, p, &sigma)) {
                Some(next) => sigma = next,
                None => {
                    ok = false;
                    break;
                }
            }
        }
        if ok {
            let v = resolve(&target.args[slot], &sigma);
            if v.is_ground() {
                return Some(v);
            }
        }
    }
    None
}

fn topo(parents: &[Vec<usize>]) -> Option<Vec<usize>> {
    let n = parents.len();
    let mut done = vec![false; n];
    let mut order = Vec::with_capacity(n);
    while order.len() < n {
        let next = (0..n).find(|&i| !done[i] && parents[i].iter().all(|&p| done[p]))?;
        done[next] = true;
        order.push(next);
    }
    Some(order)
}
