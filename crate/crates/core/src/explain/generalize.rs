use super::prove::{Justification, ProofNode};
use crate::knowledge::unify::{match_atom, rename_atom, unify_terms};
use crate::knowledge::{
    is_builtin, resolve, resolve_atom, Atom, DistRow, FactTag, ProbFact, ProbFactKind, Scenario, Substitution,
    Term, VarPattern, VariableRef, UTILITY_PREDICATE,
};
use std::collections::{BTreeMap, BTreeSet};

pub const UTILITY_NODE: &str = "Utility";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NodeTag {
    Chance,
    Decision,
    Utility,
    Deterministic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraphNode {
    /// Declared variable name, `Utility`, or the proposition itself.
    pub name: String,
    pub atom: Atom,
    pub variable: Option<String>,
    pub tag: NodeTag,
    pub distribution: Option<ProbFact>,
    /// Ground propositions of the specific proof this node generalizes.
    pub instances: Vec<Atom>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExplanationGraph {
    pub nodes: Vec<GraphNode>,
    /// Antecedent → consequent.
    pub edges: BTreeSet<(usize, usize)>,
    /// General variable → the specific term it replaced.
    pub bindings: Substitution,
}

impl ExplanationGraph {
    pub fn node(&self, name: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n.name == name)
    }

    pub fn parents(&self, id: usize) -> Vec<usize> {
        self.edges.iter().filter(|(_, to)| *to == id).map(|(from, _)| *from).collect()
    }

    pub fn children(&self, id: usize) -> Vec<usize> {
        self.edges.iter().filter(|(from, _)| *from == id).map(|(_, to)| *to).collect()
    }

    pub fn is_acyclic(&self) -> bool {
        let n = self.nodes.len();
        let mut indegree = vec![0; n];
        for &(_, to) in &self.edges {
            indegree[to] += 1;
        }
        let mut ready: Vec<usize> = (0..n).filter(|&i| indegree[i] == 0).collect();
        let mut seen = 0;
        while let Some(i) = ready.pop() {
            seen += 1;
            for c in self.children(i) {
                indegree[c] -= 1;
                if indegree[c] == 0 {
                    ready.push(c);
                }
            }
        }
        seen == n
    }

    /// Whether the node carries a declared variable or is the utility node,
    /// i.e. becomes a node of the influence diagram.
    pub fn is_variable_node(&self, id: usize) -> bool {
        self.nodes[id].variable.is_some() || self.nodes[id].tag == NodeTag::Utility
    }

    /// Variable-level parents: direct parents, looking through structural
    /// propositions such as class guards and arithmetic.
    pub fn variable_parents(&self, id: usize) -> Vec<usize> {
        let mut out = BTreeSet::new();
        let mut stack = self.parents(id);
        let mut seen = BTreeSet::new();
        while let Some(p) = stack.pop() {
            if !seen.insert(p) {
                continue;
            }
            if self.is_variable_node(p) {
                out.insert(p);
            } else {
                stack.extend(self.parents(p));
            }
        }
        out.into_iter().collect()
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (i, n) in self.nodes.iter().enumerate() {
            let tag = match n.tag {
                NodeTag::Chance => "chance",
                NodeTag::Decision => "decision",
                NodeTag::Utility => "utility",
                NodeTag::Deterministic => "deterministic",
            };
            out.push_str(&format!("[{}] {} : {}  ({tag})\n", i + 1, n.name, n.atom));
            if let Some(f) = &n.distribution {
                if let ProbFactKind::Distribution { outcomes, rows, parents } = &f.kind {
                    if parents.is_empty() {
                        let parts: Vec<String> = outcomes
                            .iter()
                            .zip(&rows[0].probs)
                            .map(|(o, p)| format!("{o}:{}", crate::rational::format_exact(p)))
                            .collect();
                        out.push_str(&format!("    distribution {{{}}}\n", parts.join(", ")));
                    } else {
                        let names: Vec<&str> = parents.iter().map(|p| p.variable.as_str()).collect();
                        out.push_str(&format!("    distribution conditional on {}\n", names.join(", ")));
                    }
                }
            }
            let from: Vec<String> = self.parents(i).iter().map(|&p| self.nodes[p].name.clone()).collect();
            if !from.is_empty() {
                out.push_str(&format!("    <- {}\n", from.join(", ")));
            }
        }
        if !self.bindings.is_empty() {
            let b: Vec<String> = self.bindings.iter().map(|(k, v)| format!("{k} -> {v}")).collect();
            out.push_str(&format!("bindings: {}\n", b.join(", ")));
        }
        out
    }

    /// DOT rendering of the explanation graph.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph explanation {\n  rankdir=LR;\n");
        for (i, n) in self.nodes.iter().enumerate() {
            let shape = match n.tag {
                NodeTag::Chance => "ellipse",
                NodeTag::Decision => "box",
                NodeTag::Utility => "diamond",
                NodeTag::Deterministic => "ellipse, style=dotted",
            };
            let label = format!("{}\\n{}", n.name, n.atom).replace('"', "\\\"");
            out.push_str(&format!("  g{i} [label=\"{label}\", shape={shape}];\n"));
        }
        for (a, b) in &self.edges {
            out.push_str(&format!("  g{a} -> g{b};\n"));
        }
        out.push_str("}\n");
        out
    }
}

struct GenNode<'p> {
    template: Atom,
    proof: &'p ProofNode,
    children: Vec<GenNode<'p>>,
}

struct Regressor<'s> {
    s: &'s Scenario,
    global: Substitution,
    counter: usize,
}

impl Regressor<'_> {
    fn fresh(&mut self) -> usize {
        self.counter += 1;
        self.counter
    }

    fn unify_into(&mut self, a: &Atom, b: &Atom, skip: Option<usize>) {
        if a.pred != b.pred || a.args.len() != b.args.len() {
            return;
        }
        let mut trial = self.global.clone();
        let ok = a.args.iter().zip(&b.args).enumerate().all(|(i, (x, y))| Some(i) == skip || unify_terms(x, y, &mut trial));
        if ok {
            self.global = trial;
        }
    }

    fn regress<'p>(&mut self, p: &'p ProofNode, template: Atom) -> GenNode<'p> {
        let s = self.s;
        let (body, justified_by): (Vec<Atom>, Option<Atom>) = match &p.justification {
            Justification::Clause { clause } | Justification::Fact { clause } => {
                let n = self.fresh();
                let c = &s.theory.clauses[*clause];
                (c.body.iter().map(|b| rename_atom(b, n)).collect(), Some(rename_atom(&c.head, n)))
            }
            Justification::Utility { entry } => {
                let n = self.fresh();
                match s.utility_clause(&s.problem.utilities[*entry]) {
                    Some(c) => (c.body.iter().map(|b| rename_atom(b, n)).collect(), Some(rename_atom(&c.head, n))),
                    None => (Vec::new(), None),
                }
            }
            Justification::ProbFact { variable, .. } if !p.children.is_empty() => {
                let n = self.fresh();
                let f = s.prob_fact(variable).expect("proof names a declared variable");
                let head = rename_atom(&f.pattern.atom, n);
                self.unify_into(&head, &template, Some(f.pattern.value_slot));
                (f.parents().iter().map(|x| rename_atom(&x.atom, n)).collect(), None)
            }
            _ => (Vec::new(), None),
        };
        if let Some(head) = justified_by {
            self.unify_into(&head, &template, None);
        }
        let children = p.children.iter().zip(body).map(|(c, t)| self.regress(c, t)).collect();
        GenNode { template, proof: p, children }
    }
}

/// Regresses the goal through the proof with freshly renamed clauses, so
/// only constants demanded by the theory survive; constants the example
/// supplied become variables. Value slots of declared variables range over
/// their outcome spaces.
pub fn generalize(p: &ProofNode, s: &Scenario) -> ExplanationGraph {
    if !mentions_example(p, s) {
        return retag(p, s);
    }
    let root_template = Atom::new(
        p.conclusion.pred.clone(),
        (0..p.conclusion.args.len()).map(|i| Term::var(format!("g{i}_0"))).collect(),
    );
    let mut r = Regressor { s, global: Substitution::new(), counter: 0 };
    let tree = r.regress(p, root_template);

    let classes = s.classes();
    let class_of = |t: &Term| classes.get(t).cloned();

    // Flatten, resolving templates and identifying variables from the
    // ground proof propositions.
    struct Flat {
        atom: Atom,
        specific: Atom,
        variable: Option<String>,
        tag: NodeTag,
        parent: Option<usize>,
    }
    let mut flat: Vec<Flat> = Vec::new();
    let mut stack: Vec<(&GenNode, Option<usize>)> = vec![(&tree, None)];
    while let Some((g, parent)) = stack.pop() {
        let atom = resolve_atom(&g.template, &r.global);
        let specific = g.proof.conclusion.clone();
        let (variable, tag) = classify(s, g.proof, &class_of);
        flat.push(Flat { atom, specific, variable, tag, parent });
        let id = flat.len() - 1;
        for c in g.children.iter().rev() {
            stack.push((c, Some(id)));
        }
    }

    // Each declared variable gets one value variable shared by all its
    // occurrences.
    let mut value_var: BTreeMap<String, Term> = BTreeMap::new();
    let mut subst = Substitution::new();
    let mut counter = 0;
    for f in &flat {
        let Some(slot) = f.variable.as_ref().and_then(|v| value_slot(s, v)) else { continue };
        let v = f.variable.clone().expect("checked");
        let current = resolve(&f.atom.args[slot], &subst);
        match (value_var.get(&v).cloned(), current.is_var()) {
            (None, true) => {
                value_var.insert(v, current);
            }
            (None, false) => {
                counter += 1;
                let base = value_base(s, &v);
                value_var.insert(v, Term::var(format!("{base}_v{counter}")));
            }
            (Some(canon), true) => {
                if canon != current {
                    unify_terms(&current, &canon, &mut subst);
                }
            }
            (Some(_), false) => {}
        }
    }
    for f in &mut flat {
        f.atom = resolve_atom(&f.atom, &subst);
        if let Some(v) = &f.variable {
            if let (Some(slot), Some(canon)) = (value_slot(s, v), value_var.get(v)) {
                f.atom.args[slot] = resolve(canon, &subst);
            }
        }
        if f.tag == NodeTag::Utility {
            f.atom.args = vec![Term::var("u_util")];
        }
    }

    // Pretty variable names.
    let mut names = Namer::default();
    for f in &flat {
        for v in f.atom.vars() {
            names.name(&v);
        }
    }
    for f in &mut flat {
        f.atom = names.apply(&f.atom);
    }

    // Merge occurrences into graph nodes.
    let mut nodes: Vec<GraphNode> = Vec::new();
    let mut index: BTreeMap<String, usize> = BTreeMap::new();
    let mut node_of = Vec::with_capacity(flat.len());
    for f in &flat {
        let key = match (&f.variable, f.tag) {
            (Some(v), _) => v.clone(),
            (None, NodeTag::Utility) => UTILITY_NODE.to_string(),
            (None, _) => f.atom.to_string(),
        };
        let id = *index.entry(key.clone()).or_insert_with(|| {
            nodes.push(GraphNode {
                name: key.clone(),
                atom: f.atom.clone(),
                variable: f.variable.clone(),
                tag: f.tag,
                distribution: f.variable.as_ref().and_then(|v| s.prob_fact(v)).filter(|x| !x.is_derived()).cloned(),
                instances: Vec::new(),
            });
            nodes.len() - 1
        });
        if !nodes[id].instances.contains(&f.specific) {
            nodes[id].instances.push(f.specific.clone());
        }
        node_of.push(id);
    }
    let mut edges = BTreeSet::new();
    for (i, f) in flat.iter().enumerate() {
        if let Some(p) = f.parent {
            if node_of[i] != node_of[p] {
                edges.insert((node_of[i], node_of[p]));
            }
        }
    }

    let mut g = ExplanationGraph { nodes, edges, bindings: Substitution::new() };
    insert_measurements(&mut g, s, &mut names);
    add_information_arcs(&mut g, s);
    let g = reorder(g, s);
    with_bindings(g)
}

fn constants(t: &Term, out: &mut BTreeSet<Term>) {
    match t {
        Term::Var(_) => {}
        Term::App(_, args) => {
            if t.is_ground() {
                out.insert(t.clone());
            }
            for a in args {
                constants(a, out);
            }
        }
        other => {
            out.insert(other.clone());
        }
    }
}

fn mentions_example(p: &ProofNode, s: &Scenario) -> bool {
    let mut known = BTreeSet::new();
    for a in &s.example.atoms {
        for t in &a.args {
            constants(t, &mut known);
        }
    }
    let mut stack = vec![p];
    while let Some(n) = stack.pop() {
        let mut here = BTreeSet::new();
        for t in &n.conclusion.args {
            constants(t, &mut here);
        }
        if !here.is_disjoint(&known) {
            return true;
        }
        stack.extend(n.children.iter());
    }
    false
}

/// Nothing to generalize: the proof itself, one node per distinct
/// proposition.
fn retag(p: &ProofNode, s: &Scenario) -> ExplanationGraph {
    let classes = s.classes();
    let class_of = |t: &Term| classes.get(t).cloned();
    let mut g = ExplanationGraph { nodes: Vec::new(), edges: BTreeSet::new(), bindings: Substitution::new() };
    fn walk(
        n: &ProofNode,
        s: &Scenario,
        class_of: &dyn Fn(&Term) -> Option<BTreeSet<String>>,
        g: &mut ExplanationGraph,
    ) -> usize {
        let name = n.conclusion.to_string();
        let id = match g.node(&name) {
            Some(id) => id,
            None => {
                let (_, tag) = classify(s, n, class_of);
                g.nodes.push(GraphNode {
                    name,
                    atom: n.conclusion.clone(),
                    variable: None,
                    tag,
                    distribution: None,
                    instances: vec![n.conclusion.clone()],
                });
                g.nodes.len() - 1
            }
        };
        for c in &n.children {
            let child = walk(c, s, class_of, g);
            if child != id {
                g.edges.insert((child, id));
            }
        }
        id
    }
    walk(p, s, &class_of, &mut g);
    g
}

fn classify(s: &Scenario, p: &ProofNode, class_of: &dyn Fn(&Term) -> Option<BTreeSet<String>>) -> (Option<String>, NodeTag) {
    if let Justification::Utility { .. } = p.justification {
        return (None, NodeTag::Utility);
    }
    if p.conclusion.pred == UTILITY_PREDICATE {
        return (None, NodeTag::Utility);
    }
    if is_builtin(&p.conclusion.pred) {
        return (None, NodeTag::Deterministic);
    }
    let variable = match &p.justification {
        Justification::ProbFact { variable, .. } => Some(variable.clone()),
        _ => s.variable_of(&p.conclusion, class_of),
    };
    let tag = match variable.as_deref().and_then(|v| s.lookup(v)) {
        Some(VariableRef::Fact(f)) if f.is_derived() => NodeTag::Deterministic,
        Some(VariableRef::Fact(_)) => NodeTag::Chance,
        Some(VariableRef::Decision(_)) => NodeTag::Decision,
        _ => NodeTag::Deterministic,
    };
    (variable, tag)
}

fn value_slot(s: &Scenario, variable: &str) -> Option<usize> {
    match s.lookup(variable)? {
        VariableRef::Fact(f) => Some(f.pattern.value_slot),
        VariableRef::Decision(d) => Some(d.pattern.value_slot),
        _ => None,
    }
}

fn value_base(s: &Scenario, variable: &str) -> String {
    let pattern: Option<&VarPattern> = match s.lookup(variable) {
        Some(VariableRef::Fact(f)) => Some(&f.pattern),
        Some(VariableRef::Decision(d)) => Some(&d.pattern),
        _ => None,
    };
    match pattern.map(|p| p.value_var()) {
        Some(Term::Var(v)) => v.clone(),
        _ => "x".to_string(),
    }
}

/// Renames `w_12`-style variables to short, distinct names in order of
/// first appearance.
#[derive(Default)]
struct Namer {
    map: BTreeMap<String, String>,
    used: BTreeSet<String>,
}

impl Namer {
    fn name(&mut self, v: &str) -> String {
        if let Some(n) = self.map.get(v) {
            return n.clone();
        }
        let base = v.split('_').next().filter(|b| !b.is_empty()).unwrap_or("x").to_string();
        let mut candidate = base.clone();
        let mut k = 2;
        while self.used.contains(&candidate) {
            candidate = format!("{base}{k}");
            k += 1;
        }
        self.used.insert(candidate.clone());
        self.map.insert(v.to_string(), candidate.clone());
        candidate
    }

    fn fresh(&mut self, base: &str) -> Term {
        let key = format!("{base}_fresh{}", self.map.len());
        Term::var(self.name(&key))
    }

    fn apply(&mut self, atom: &Atom) -> Atom {
        fn go(t: &Term, n: &mut Namer) -> Term {
            match t {
                Term::Var(v) => Term::Var(n.name(v)),
                Term::App(f, args) => Term::App(f.clone(), args.iter().map(|a| go(a, n)).collect()),
                other => other.clone(),
            }
        }
        Atom { pred: atom.pred.clone(), args: atom.args.iter().map(|a| go(a, self)).collect() }
    }
}

/// Adds a (measure decision, instrument error, reading) triple for every
/// instrument whose target variable appears in the explanation.
fn insert_measurements(g: &mut ExplanationGraph, s: &Scenario, names: &mut Namer) {
    for m in &s.measurables {
        let Some(target) = g.node(&m.variable) else { continue };
        let subject: Vec<Term> = s
            .prob_fact(&m.variable)
            .and_then(|f| f.pattern.subject_slot)
            .map(|slot| vec![g.nodes[target].atom.args[slot].clone()])
            .unwrap_or_default();
        let mut atom_of = |name: &str, base: &str, with_subject: bool| {
            let mut args = if with_subject { subject.clone() } else { Vec::new() };
            args.push(names.fresh(base));
            Atom::new(name, args)
        };
        let decision_atom = atom_of(&m.decision, "a", true);
        let error_atom = atom_of(&m.error_variable, "e", false);
        let reading_atom = atom_of(&m.reading, "m", true);
        let error_fact = ProbFact {
            variable: m.error_variable.clone(),
            pattern: VarPattern { atom: error_atom.clone(), value_slot: error_atom.args.len() - 1, subject_slot: None, class: None },
            kind: ProbFactKind::Distribution {
                outcomes: m.errors.iter().cloned().map(Term::Num).collect(),
                parents: Vec::new(),
                rows: vec![DistRow { when: Vec::new(), probs: m.distribution.clone() }],
            },
            tag: FactTag::ObjectiveFrequency,
        };
        let push = |g: &mut ExplanationGraph, name: &str, atom: Atom, tag, distribution| {
            g.nodes.push(GraphNode {
                name: name.to_string(),
                atom,
                variable: Some(name.to_string()),
                tag,
                distribution,
                instances: Vec::new(),
            });
            g.nodes.len() - 1
        };
        let dec = push(g, &m.decision, decision_atom, NodeTag::Decision, None);
        let err = push(g, &m.error_variable, error_atom, NodeTag::Chance, Some(error_fact));
        let reading = push(g, &m.reading, reading_atom, NodeTag::Deterministic, None);
        g.edges.insert((target, reading));
        g.edges.insert((err, reading));
        g.edges.insert((dec, reading));
        if !s.problem.information_order.contains(&m.reading) {
            for later in decisions_after(g, s, &m.decision) {
                g.edges.insert((reading, later));
                g.edges.insert((dec, later));
            }
        }
    }
}

fn decisions_after(g: &ExplanationGraph, s: &Scenario, decision: &str) -> Vec<usize> {
    let seq = s.decision_sequence();
    let pos = seq.iter().position(|d| d == decision).unwrap_or(0);
    seq[pos + 1..].iter().filter_map(|d| g.node(d)).collect()
}

/// Observations listed before a decision in the information order become
/// its informational antecedents.
fn add_information_arcs(g: &mut ExplanationGraph, s: &Scenario) {
    let order = &s.problem.information_order;
    for (i, name) in order.iter().enumerate() {
        let Some(dec) = g.node(name) else { continue };
        if g.nodes[dec].tag != NodeTag::Decision {
            continue;
        }
        for earlier in &order[..i] {
            if let Some(e) = g.node(earlier) {
                g.edges.insert((e, dec));
            }
        }
    }
}

/// Declared variables first (prob facts, then decisions), the utility node,
/// measurement triples, then structural propositions.
fn reorder(g: ExplanationGraph, s: &Scenario) -> ExplanationGraph {
    let mut rank: Vec<(usize, usize)> = Vec::new();
    for (i, n) in g.nodes.iter().enumerate() {
        let name = n.name.as_str();
        let r = if let Some(k) = s.theory.prob_facts.iter().position(|f| f.variable == name) {
            k
        } else if let Some(k) = s.problem.decisions.iter().position(|d| d.name == name) {
            1000 + k
        } else if n.tag == NodeTag::Utility {
            2000
        } else if let Some(k) = s.measurables.iter().position(|m| m.decision == name || m.error_variable == name || m.reading == name) {
            let m = &s.measurables[k];
            let within = if m.decision == name { 0 } else if m.error_variable == name { 1 } else { 2 };
            3000 + 3 * k + within
        } else {
            10_000 + i
        };
        rank.push((r, i));
    }
    rank.sort();
    let mut new_id = vec![0; g.nodes.len()];
    for (pos, &(_, old)) in rank.iter().enumerate() {
        new_id[old] = pos;
    }
    let nodes = rank.iter().map(|&(_, old)| g.nodes[old].clone()).collect();
    let edges = g.edges.iter().map(|&(a, b)| (new_id[a], new_id[b])).collect();
    ExplanationGraph { nodes, edges, bindings: g.bindings }
}

fn with_bindings(mut g: ExplanationGraph) -> ExplanationGraph {
    let mut bindings = Substitution::new();
    for n in &g.nodes {
        for inst in &n.instances {
            let mut trial = bindings.clone();
            if match_atom(&n.atom, inst, &mut trial) {
                bindings = trial;
            }
        }
    }
    bindings.retain(|k, v| *v != Term::Var(k.clone()));
    g.bindings = bindings;
    g
}
