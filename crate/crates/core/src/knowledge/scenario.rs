//! Scenario files: decision problem, domain theory, training example and
//! observation protocol, parsed from JSON.

use super::builtin::builtin_arity;
use super::term::{Atom, HornClause, SyntaxError, Term};
use crate::rational::{format_exact, parse_rational, ratio, Prob};
use num_traits::{One, Signed};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use thiserror::Error;

/// Predicate reserved for the utility relation generated from the
/// decision problem's utility table.
pub const UTILITY_PREDICATE: &str = "Attains";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScenarioError {
    #[error("{line}:{column}: malformed scenario JSON: {message}")]
    Json { line: usize, column: usize, message: String },
    #[error("{context}: syntax error at {line}:{column}: {message}")]
    Syntax { context: String, line: usize, column: usize, message: String },
    #[error("{context}: unknown symbol `{symbol}`")]
    UnknownSymbol { context: String, symbol: String },
    #[error("{context}: `{symbol}` is ambiguous between variables {candidates:?}")]
    Ambiguous { context: String, symbol: String, candidates: Vec<String> },
    #[error("empty decision domain for `{0}`")]
    EmptyDecisionDomain(String),
    #[error("{context}: probabilities sum to {sum}, outside [0.95, 1.05]")]
    NonNormalizable { context: String, sum: String },
    #[error("duplicate declaration of `{0}`")]
    Duplicate(String),
    #[error("predicate `{pred}` used with arity {found}, previously {expected}")]
    ArityConflict { pred: String, expected: usize, found: usize },
    #[error("{0}")]
    Invalid(String),
    #[error("scenario failed validation:\n{}", .0.iter().map(|d| format!("  - {d}")).collect::<Vec<_>>().join("\n"))]
    Validation(Vec<Diagnostic>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

/// How a random or decision variable shows up as an atom: the atom
/// template, which argument carries the variable's value, and which argument
/// names the object it is about (checked against `IsA` facts).
#[derive(Debug, Clone, PartialEq)]
pub struct VarPattern {
    pub atom: Atom,
    pub value_slot: usize,
    pub subject_slot: Option<usize>,
    pub class: Option<String>,
}

impl VarPattern {
    pub fn value_var(&self) -> &Term {
        &self.atom.args[self.value_slot]
    }

    /// Predicate and arity agree; class is checked separately.
    pub fn shape_matches(&self, atom: &Atom) -> bool {
        self.atom.pred == atom.pred && self.atom.args.len() == atom.args.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FactTag {
    PriorBelief,
    ObjectiveFrequency,
    Definition,
}

impl FactTag {
    fn parse(s: &str) -> Option<FactTag> {
        match s {
            "prior-belief" => Some(FactTag::PriorBelief),
            "objective-frequency" => Some(FactTag::ObjectiveFrequency),
            "definition" => Some(FactTag::Definition),
            _ => None,
        }
    }

    fn as_str(self) -> &'static str {
        match self {
            FactTag::PriorBelief => "prior-belief",
            FactTag::ObjectiveFrequency => "objective-frequency",
            FactTag::Definition => "definition",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParentRef {
    pub variable: String,
    pub atom: Atom,
}

/// One row of a conditional table. `None` entries match any parent value;
/// the first matching row applies.
#[derive(Debug, Clone, PartialEq)]
pub struct DistRow {
    pub when: Vec<Option<Term>>,
    pub probs: Vec<Prob>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProbFactKind {
    Distribution { outcomes: Vec<Term>, parents: Vec<ParentRef>, rows: Vec<DistRow> },
    /// Deterministic relation defined by the theory's clauses.
    Derived,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbFact {
    pub variable: String,
    pub pattern: VarPattern,
    pub kind: ProbFactKind,
    pub tag: FactTag,
}

impl ProbFact {
    pub fn outcomes(&self) -> Option<&[Term]> {
        match &self.kind {
            ProbFactKind::Distribution { outcomes, .. } => Some(outcomes),
            ProbFactKind::Derived => None,
        }
    }

    pub fn parents(&self) -> &[ParentRef] {
        match &self.kind {
            ProbFactKind::Distribution { parents, .. } => parents,
            ProbFactKind::Derived => &[],
        }
    }

    pub fn is_conditional(&self) -> bool {
        !self.parents().is_empty()
    }

    pub fn is_derived(&self) -> bool {
        matches!(self.kind, ProbFactKind::Derived)
    }

    /// Distribution over outcomes given parent values (in `parents` order).
    pub fn row_for(&self, parent_values: &[Term]) -> Option<&[Prob]> {
        let ProbFactKind::Distribution { rows, .. } = &self.kind else { return None };
        rows.iter()
            .find(|r| {
                r.when.len() == parent_values.len()
                    && r.when.iter().zip(parent_values).all(|(w, v)| w.as_ref().is_none_or(|w| w == v))
            })
            .map(|r| r.probs.as_slice())
    }

    pub fn prob_of(&self, outcome: &Term, parent_values: &[Term]) -> Option<Prob> {
        let outcomes = self.outcomes()?;
        let i = outcomes.iter().position(|o| o == outcome)?;
        self.row_for(parent_values).map(|r| r[i].clone())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    pub name: String,
    pub pattern: VarPattern,
    pub actions: Vec<Term>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Condition {
    pub variable: String,
    pub value: Term,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UtilityEntry {
    pub when: Vec<Condition>,
    pub utils: Prob,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecisionProblemSpec {
    pub decisions: Vec<Decision>,
    pub utilities: Vec<UtilityEntry>,
    pub horizon: u32,
    /// Decisions and observed variables in the order they become known.
    pub information_order: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingExample {
    pub atoms: Vec<Atom>,
}

/// An instrument that reads a chance variable with additive error.
#[derive(Debug, Clone, PartialEq)]
pub struct Measurable {
    pub variable: String,
    pub instrument: String,
    pub decision: String,
    /// `[skip, measure]` action labels.
    pub actions: [String; 2],
    pub reading: String,
    pub error_variable: String,
    pub errors: Vec<Prob>,
    pub distribution: Vec<Prob>,
    pub cost: Prob,
}

/// Which post-decision observation revises which latent hypothesis.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationProtocol {
    pub latent: String,
    pub hypothesis: Term,
    pub observe: String,
    pub enabling: Condition,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Theory {
    pub clauses: Vec<HornClause>,
    pub prob_facts: Vec<ProbFact>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub theory: Theory,
    pub problem: DecisionProblemSpec,
    pub example: TrainingExample,
    pub measurables: Vec<Measurable>,
    pub observation: Option<ObservationProtocol>,
}

/// What a variable name refers to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum VariableRef<'a> {
    Fact(&'a ProbFact),
    Decision(&'a Decision),
    MeasureDecision(&'a Measurable),
    Reading(&'a Measurable),
    Error(&'a Measurable),
}

impl Scenario {
    pub fn prob_fact(&self, name: &str) -> Option<&ProbFact> {
        self.theory.prob_facts.iter().find(|f| f.variable == name)
    }

    pub fn decision(&self, name: &str) -> Option<&Decision> {
        self.problem.decisions.iter().find(|d| d.name == name)
    }

    pub fn lookup(&self, name: &str) -> Option<VariableRef<'_>> {
        if let Some(f) = self.prob_fact(name) {
            return Some(VariableRef::Fact(f));
        }
        if let Some(d) = self.decision(name) {
            return Some(VariableRef::Decision(d));
        }
        for m in &self.measurables {
            if m.decision == name {
                return Some(VariableRef::MeasureDecision(m));
            }
            if m.reading == name {
                return Some(VariableRef::Reading(m));
            }
            if m.error_variable == name {
                return Some(VariableRef::Error(m));
            }
        }
        None
    }

    /// Outcome labels of a declared variable when they are known without
    /// evaluating the theory (derived variables and readings return `None`).
    pub fn declared_outcomes(&self, name: &str) -> Option<Vec<Term>> {
        match self.lookup(name)? {
            VariableRef::Fact(f) => f.outcomes().map(<[Term]>::to_vec),
            VariableRef::Decision(d) => Some(d.actions.clone()),
            VariableRef::MeasureDecision(m) => Some(m.actions.iter().map(|a| Term::sym(a.clone())).collect()),
            VariableRef::Error(m) => Some(m.errors.iter().cloned().map(Term::Num).collect()),
            VariableRef::Reading(_) => None,
        }
    }

    /// `IsA(x, C, ...)` facts from the example and the theory, as x → {C}.
    pub fn classes(&self) -> BTreeMap<Term, BTreeSet<String>> {
        let mut out: BTreeMap<Term, BTreeSet<String>> = BTreeMap::new();
        let facts = self.theory.clauses.iter().filter(|c| c.is_fact()).map(|c| &c.head);
        for a in self.example.atoms.iter().chain(facts) {
            if a.pred == "IsA" && a.args.len() >= 2 {
                if let Term::Sym(class) = &a.args[1] {
                    out.entry(a.args[0].clone()).or_default().insert(class.clone());
                }
            }
        }
        out
    }

    /// The declared variable a (possibly partially instantiated) atom is
    /// about. `class_of` reports the known class of a subject term.
    pub fn variable_of(&self, atom: &Atom, class_of: &dyn Fn(&Term) -> Option<BTreeSet<String>>) -> Option<String> {
        let class_ok = |p: &VarPattern| match (&p.class, p.subject_slot) {
            (Some(class), Some(slot)) => match class_of(&atom.args[slot]) {
                Some(classes) => classes.contains(class),
                None => true,
            },
            _ => true,
        };
        let mut hits: Vec<&str> = Vec::new();
        for f in &self.theory.prob_facts {
            if f.pattern.shape_matches(atom) && class_ok(&f.pattern) {
                hits.push(&f.variable);
            }
        }
        for d in &self.problem.decisions {
            if d.pattern.shape_matches(atom) && class_ok(&d.pattern) {
                hits.push(&d.name);
            }
        }
        if hits.len() == 1 {
            Some(hits[0].to_string())
        } else {
            None
        }
    }

    /// Value the training example reports for `variable`, if any.
    pub fn example_value(&self, variable: &str) -> Option<Term> {
        let classes = self.classes();
        let class_of = |t: &Term| classes.get(t).cloned();
        let pattern = match self.lookup(variable)? {
            VariableRef::Fact(f) => &f.pattern,
            VariableRef::Decision(d) => &d.pattern,
            _ => return None,
        };
        self.example
            .atoms
            .iter()
            .find(|a| pattern.shape_matches(a) && self.variable_of(a, &class_of).as_deref() == Some(variable))
            .map(|a| a.args[pattern.value_slot].clone())
    }

    /// Utility realised by the training example's recorded actions and outcomes.
    pub fn example_utility(&self) -> Option<Prob> {
        self.problem
            .utilities
            .iter()
            .find(|u| u.when.iter().all(|c| self.example_value(&c.variable).as_ref() == Some(&c.value)))
            .map(|u| u.utils.clone())
    }

    /// The Horn clause equivalent of a utility-table entry:
    /// `Attains(u) :- <variable atoms with their values>`.
    pub fn utility_clause(&self, entry: &UtilityEntry) -> Option<HornClause> {
        let mut body = Vec::new();
        for c in &entry.when {
            let pattern = match self.lookup(&c.variable)? {
                VariableRef::Fact(f) => &f.pattern,
                VariableRef::Decision(d) => &d.pattern,
                _ => return None,
            };
            let mut atom = pattern.atom.clone();
            atom.args[pattern.value_slot] = c.value.clone();
            body.push(atom);
        }
        Some(HornClause { head: Atom::new(UTILITY_PREDICATE, vec![Term::Num(entry.utils.clone())]), body })
    }

    /// Decisions in information order, including measurement decisions.
    pub fn decision_sequence(&self) -> Vec<String> {
        let is_decision = |n: &str| {
            matches!(self.lookup(n), Some(VariableRef::Decision(_)) | Some(VariableRef::MeasureDecision(_)))
        };
        let mut out: Vec<String> =
            self.problem.information_order.iter().filter(|n| is_decision(n)).cloned().collect();
        for m in &self.measurables {
            if !out.contains(&m.decision) {
                out.insert(0, m.decision.clone());
            }
        }
        for d in &self.problem.decisions {
            if !out.contains(&d.name) {
                out.push(d.name.clone());
            }
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&RawScenario::from(self)).expect("scenario serializes")
    }
}

// ---------------------------------------------------------------------------
// Raw JSON form

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    #[serde(default)]
    name: String,
    theory: RawTheory,
    decision_problem: RawProblem,
    training_example: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    measurement: Vec<RawMeasurement>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    observation_reports: Option<RawObservation>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTheory {
    #[serde(default)]
    clauses: Vec<String>,
    #[serde(default)]
    prob_facts: Vec<RawProbFact>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProbFact {
    variable: String,
    atom: String,
    value: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    subject: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    class: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    outcomes: Vec<Value>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    distribution: Vec<Value>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    given: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    rows: Vec<RawRow>,
    tag: String,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    derived: bool,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRow {
    when: Vec<Value>,
    distribution: Vec<Value>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProblem {
    decisions: Vec<RawDecision>,
    utilities: Vec<RawUtility>,
    horizon: u32,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    information_order: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDecision {
    name: String,
    atom: String,
    value: String,
    actions: Vec<Value>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawUtility {
    when: String,
    utils: Value,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMeasurement {
    variable: String,
    instrument: String,
    decision: String,
    #[serde(default = "default_measure_actions")]
    actions: [String; 2],
    reading: String,
    error_variable: String,
    errors: Vec<Value>,
    distribution: Vec<Value>,
    #[serde(default = "zero_value")]
    cost: Value,
}

fn default_measure_actions() -> [String; 2] {
    ["No-Measure".to_string(), "Measure".to_string()]
}

fn zero_value() -> Value {
    Value::from(0)
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawObservation {
    latent: String,
    hypothesis: String,
    observe: String,
    when: String,
}

fn literal_text(v: &Value) -> Option<String> {
    match v {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        _ => None,
    }
}

fn literal_term(v: &Value, context: &str) -> Result<Term, ScenarioError> {
    let text = literal_text(v).ok_or_else(|| ScenarioError::Invalid(format!("{context}: expected a literal, got {v}")))?;
    Ok(Term::from_token(text.trim()))
}

fn literal_prob(v: &Value, context: &str) -> Result<Prob, ScenarioError> {
    let text = literal_text(v).ok_or_else(|| ScenarioError::Invalid(format!("{context}: expected a number, got {v}")))?;
    let p = parse_rational(&text).map_err(|e| ScenarioError::Invalid(format!("{context}: {e}")))?;
    Ok(p)
}

fn syntax(context: String, e: SyntaxError) -> ScenarioError {
    ScenarioError::Syntax { context, line: e.line, column: e.column, message: e.message }
}

/// Rows summing to within [0.95, 1.05] are rescaled to sum to exactly one.
pub fn normalize_row(probs: &[Prob], context: &str) -> Result<Vec<Prob>, ScenarioError> {
    if probs.iter().any(Signed::is_negative) {
        return Err(ScenarioError::Invalid(format!("{context}: negative probability")));
    }
    let sum: Prob = probs.iter().sum();
    if sum.is_one() {
        return Ok(probs.to_vec());
    }
    if sum < ratio(95, 100) || sum > ratio(105, 100) {
        return Err(ScenarioError::NonNormalizable { context: context.to_string(), sum: format_exact(&sum) });
    }
    Ok(probs.iter().map(|p| p / &sum).collect())
}

fn pattern(atom_text: &str, value: &str, subject: Option<&str>, class: Option<String>, ctx: &str) -> Result<VarPattern, ScenarioError> {
    let atom = Atom::parse(atom_text).map_err(|e| syntax(ctx.to_string(), e))?;
    let slot_of = |name: &str| atom.args.iter().position(|a| *a == Term::from_token(name));
    let value_slot = slot_of(value).ok_or_else(|| ScenarioError::UnknownSymbol {
        context: format!("{ctx} value"),
        symbol: value.to_string(),
    })?;
    let subject_slot = match subject {
        Some(s) => Some(slot_of(s).ok_or_else(|| ScenarioError::UnknownSymbol {
            context: format!("{ctx} subject"),
            symbol: s.to_string(),
        })?),
        None => None,
    };
    Ok(VarPattern { atom, value_slot, subject_slot, class })
}

fn pattern_to_raw(p: &VarPattern) -> (String, String, Option<String>) {
    let value = p.atom.args[p.value_slot].to_string();
    let subject = p.subject_slot.map(|s| p.atom.args[s].to_string());
    (p.atom.to_string(), value, subject)
}

/// Parses and validates a scenario file.
pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    let raw: RawScenario = serde_json::from_str(text).map_err(|e| ScenarioError::Json {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let scenario = resolve_raw(raw)?;
    let diagnostics = validate_scenario(&scenario);
    if !diagnostics.is_empty() {
        return Err(ScenarioError::Validation(diagnostics));
    }
    Ok(scenario)
}

fn resolve_raw(raw: RawScenario) -> Result<Scenario, ScenarioError> {
    let clauses = raw
        .theory
        .clauses
        .iter()
        .enumerate()
        .map(|(i, c)| HornClause::parse(c).map_err(|e| syntax(format!("clause {}", i + 1), e)))
        .collect::<Result<Vec<_>, _>>()?;

    let mut seen = BTreeSet::new();
    let mut claim = |name: &str| {
        if seen.insert(name.to_string()) {
            Ok(())
        } else {
            Err(ScenarioError::Duplicate(name.to_string()))
        }
    };

    let mut prob_facts = Vec::new();
    for rf in &raw.theory.prob_facts {
        claim(&rf.variable)?;
        let ctx = format!("prob fact `{}`", rf.variable);
        let tag = FactTag::parse(&rf.tag)
            .ok_or_else(|| ScenarioError::Invalid(format!("{ctx}: unknown tag `{}`", rf.tag)))?;
        let pat = pattern(&rf.atom, &rf.value, rf.subject.as_deref(), rf.class.clone(), &ctx)?;
        let kind = if rf.derived {
            ProbFactKind::Derived
        } else {
            let outcomes = rf.outcomes.iter().map(|v| literal_term(v, &ctx)).collect::<Result<Vec<_>, _>>()?;
            let mut parents = Vec::new();
            for g in &rf.given {
                let (var, atom_text) = g.split_once(':').ok_or_else(|| {
                    ScenarioError::Invalid(format!("{ctx}: parent `{g}` must read `Variable: Atom(...)`"))
                })?;
                let atom = Atom::parse(atom_text.trim()).map_err(|e| syntax(format!("{ctx} parent"), e))?;
                parents.push(ParentRef { variable: var.trim().to_string(), atom });
            }
            let mut rows = Vec::new();
            if parents.is_empty() {
                let probs = rf.distribution.iter().map(|v| literal_prob(v, &ctx)).collect::<Result<Vec<_>, _>>()?;
                rows.push(DistRow { when: Vec::new(), probs: normalize_row(&probs, &ctx)? });
            } else {
                for (i, r) in rf.rows.iter().enumerate() {
                    let rctx = format!("{ctx} row {}", i + 1);
                    let when = r
                        .when
                        .iter()
                        .map(|v| {
                            let t = literal_term(v, &rctx)?;
                            Ok(if t == Term::sym("*") { None } else { Some(t) })
                        })
                        .collect::<Result<Vec<_>, ScenarioError>>()?;
                    let probs = r.distribution.iter().map(|v| literal_prob(v, &rctx)).collect::<Result<Vec<_>, _>>()?;
                    rows.push(DistRow { when, probs: normalize_row(&probs, &rctx)? });
                }
            }
            ProbFactKind::Distribution { outcomes, parents, rows }
        };
        prob_facts.push(ProbFact { variable: rf.variable.clone(), pattern: pat, kind, tag });
    }

    let mut decisions = Vec::new();
    for rd in &raw.decision_problem.decisions {
        claim(&rd.name)?;
        let ctx = format!("decision `{}`", rd.name);
        if rd.actions.is_empty() {
            return Err(ScenarioError::EmptyDecisionDomain(rd.name.clone()));
        }
        let pat = pattern(&rd.atom, &rd.value, None, None, &ctx)?;
        let actions = rd.actions.iter().map(|v| literal_term(v, &ctx)).collect::<Result<Vec<_>, _>>()?;
        decisions.push(Decision { name: rd.name.clone(), pattern: pat, actions });
    }

    let mut measurables = Vec::new();
    for rm in &raw.measurement {
        let ctx = format!("instrument `{}`", rm.instrument);
        for n in [&rm.decision, &rm.reading, &rm.error_variable] {
            claim(n)?;
        }
        let errors = rm.errors.iter().map(|v| literal_prob(v, &ctx)).collect::<Result<Vec<_>, _>>()?;
        let dist = rm.distribution.iter().map(|v| literal_prob(v, &ctx)).collect::<Result<Vec<_>, _>>()?;
        measurables.push(Measurable {
            variable: rm.variable.clone(),
            instrument: rm.instrument.clone(),
            decision: rm.decision.clone(),
            actions: rm.actions.clone(),
            reading: rm.reading.clone(),
            error_variable: rm.error_variable.clone(),
            errors,
            distribution: normalize_row(&dist, &ctx)?,
            cost: literal_prob(&rm.cost, &ctx)?,
        });
    }

    let example = raw
        .training_example
        .iter()
        .enumerate()
        .map(|(i, a)| Atom::parse(a).map_err(|e| syntax(format!("training example atom {}", i + 1), e)))
        .collect::<Result<Vec<_>, _>>()?;

    let mut scenario = Scenario {
        name: raw.name.clone(),
        theory: Theory { clauses, prob_facts },
        problem: DecisionProblemSpec {
            decisions,
            utilities: Vec::new(),
            horizon: raw.decision_problem.horizon,
            information_order: raw.decision_problem.information_order.clone(),
        },
        example: TrainingExample { atoms: example },
        measurables,
        observation: None,
    };

    for (i, u) in raw.decision_problem.utilities.iter().enumerate() {
        let ctx = format!("utility entry {}", i + 1);
        let when = u
            .when
            .split('&')
            .map(|part| resolve_condition(&scenario, part.trim(), &ctx))
            .collect::<Result<Vec<_>, _>>()?;
        let utils = literal_prob(&u.utils, &ctx)?;
        scenario.problem.utilities.push(UtilityEntry { when, utils });
    }

    if let Some(o) = &raw.observation_reports {
        let ctx = "observation reports";
        let enabling = resolve_condition(&scenario, o.when.trim(), ctx)?;
        scenario.observation = Some(ObservationProtocol {
            latent: o.latent.clone(),
            hypothesis: Term::from_token(o.hypothesis.trim()),
            observe: o.observe.clone(),
            enabling,
        });
    }

    check_references(&scenario)?;
    check_arities(&scenario)?;
    Ok(scenario)
}

fn resolve_condition(s: &Scenario, text: &str, ctx: &str) -> Result<Condition, ScenarioError> {
    if let Some((var, value)) = text.split_once('=') {
        let variable = var.trim().to_string();
        if s.lookup(&variable).is_none() {
            return Err(ScenarioError::UnknownSymbol { context: ctx.to_string(), symbol: variable });
        }
        return Ok(Condition { variable, value: Term::from_token(value.trim()) });
    }
    let value = Term::from_token(text);
    let mut names: Vec<String> = Vec::new();
    for f in &s.theory.prob_facts {
        if f.outcomes().is_some_and(|o| o.contains(&value)) {
            names.push(f.variable.clone());
        }
    }
    for d in &s.problem.decisions {
        if d.actions.contains(&value) {
            names.push(d.name.clone());
        }
    }
    match names.len() {
        0 => Err(ScenarioError::UnknownSymbol { context: ctx.to_string(), symbol: text.to_string() }),
        1 => Ok(Condition { variable: names.remove(0), value }),
        _ => Err(ScenarioError::Ambiguous { context: ctx.to_string(), symbol: text.to_string(), candidates: names }),
    }
}

fn check_references(s: &Scenario) -> Result<(), ScenarioError> {
    for f in &s.theory.prob_facts {
        for p in f.parents() {
            if s.lookup(&p.variable).is_none() {
                return Err(ScenarioError::UnknownSymbol {
                    context: format!("parents of `{}`", f.variable),
                    symbol: p.variable.clone(),
                });
            }
        }
    }
    for m in &s.measurables {
        if s.prob_fact(&m.variable).is_none() {
            return Err(ScenarioError::UnknownSymbol {
                context: format!("instrument `{}`", m.instrument),
                symbol: m.variable.clone(),
            });
        }
    }
    for name in &s.problem.information_order {
        if s.lookup(name).is_none() {
            return Err(ScenarioError::UnknownSymbol { context: "information order".into(), symbol: name.clone() });
        }
    }
    if let Some(o) = &s.observation {
        for n in [&o.latent, &o.observe] {
            if s.lookup(n).is_none() {
                return Err(ScenarioError::UnknownSymbol { context: "observation reports".into(), symbol: n.clone() });
            }
        }
    }
    Ok(())
}

fn check_arities(s: &Scenario) -> Result<(), ScenarioError> {
    let mut arity: BTreeMap<String, usize> = BTreeMap::new();
    let mut note = |a: &Atom| -> Result<(), ScenarioError> {
        if a.pred == UTILITY_PREDICATE {
            return Err(ScenarioError::Invalid(format!("`{UTILITY_PREDICATE}` is reserved for the utility relation")));
        }
        if let Some(n) = builtin_arity(&a.pred) {
            if n != a.arity() {
                return Err(ScenarioError::ArityConflict { pred: a.pred.clone(), expected: n, found: a.arity() });
            }
        }
        match arity.get(&a.pred) {
            Some(&n) if n != a.arity() => {
                Err(ScenarioError::ArityConflict { pred: a.pred.clone(), expected: n, found: a.arity() })
            }
            Some(_) => Ok(()),
            None => {
                arity.insert(a.pred.clone(), a.arity());
                Ok(())
            }
        }
    };
    for c in &s.theory.clauses {
        note(&c.head)?;
        c.body.iter().try_for_each(&mut note)?;
    }
    for f in &s.theory.prob_facts {
        note(&f.pattern.atom)?;
        f.parents().iter().try_for_each(|p| note(&p.atom))?;
    }
    for d in &s.problem.decisions {
        note(&d.pattern.atom)?;
    }
    s.example.atoms.iter().try_for_each(note)?;
    Ok(())
}

/// Checks every scenario invariant; an empty list means the scenario is
/// usable.
pub fn validate_scenario(s: &Scenario) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let mut diag = |m: String| out.push(Diagnostic { message: m });

    if s.problem.horizon < 1 {
        diag("horizon must be at least 1".into());
    }
    for f in &s.theory.prob_facts {
        let ProbFactKind::Distribution { outcomes, parents, rows } = &f.kind else {
            if !s.theory.clauses.iter().any(|c| f.pattern.shape_matches(&c.head)) {
                diag(format!("derived variable `{}` has no defining clause", f.variable));
            }
            continue;
        };
        if outcomes.is_empty() {
            diag(format!("`{}` has an empty outcome space", f.variable));
        }
        let distinct: BTreeSet<&Term> = outcomes.iter().collect();
        if distinct.len() != outcomes.len() {
            diag(format!("`{}` has repeated outcomes", f.variable));
        }
        for (i, r) in rows.iter().enumerate() {
            if r.probs.len() != outcomes.len() {
                diag(format!("`{}` row {} has {} entries for {} outcomes", f.variable, i + 1, r.probs.len(), outcomes.len()));
            }
            let sum: Prob = r.probs.iter().sum();
            if !sum.is_one() {
                diag(format!("`{}` row {} sums to {}", f.variable, i + 1, format_exact(&sum)));
            }
            if r.when.len() != parents.len() {
                diag(format!("`{}` row {} conditions on {} values for {} parents", f.variable, i + 1, r.when.len(), parents.len()));
            }
            for (w, p) in r.when.iter().zip(parents) {
                if let (Some(w), Some(space)) = (w, s.declared_outcomes(&p.variable)) {
                    if !space.contains(w) {
                        diag(format!("`{}` row {} references `{w}`, not an outcome of `{}`", f.variable, i + 1, p.variable));
                    }
                }
            }
        }
        let spaces: Option<Vec<Vec<Term>>> = parents.iter().map(|p| s.declared_outcomes(&p.variable)).collect();
        if let Some(spaces) = spaces {
            for combo in product(&spaces) {
                if f.row_for(&combo).is_none() {
                    let shown: Vec<String> = combo.iter().map(Term::to_string).collect();
                    diag(format!("`{}` has no row for parents ({})", f.variable, shown.join(", ")));
                }
            }
        }
    }
    for d in &s.problem.decisions {
        if d.actions.is_empty() {
            diag(format!("empty decision domain for `{}`", d.name));
        }
    }
    for (i, u) in s.problem.utilities.iter().enumerate() {
        for c in &u.when {
            match s.declared_outcomes(&c.variable) {
                Some(space) if space.contains(&c.value) => {}
                Some(_) => diag(format!("utility entry {} references undeclared outcome `{}` of `{}`", i + 1, c.value, c.variable)),
                None => diag(format!("utility entry {} references unknown variable `{}`", i + 1, c.variable)),
            }
        }
    }
    for m in &s.measurables {
        match s.prob_fact(&m.variable) {
            Some(f) if f.outcomes().is_some_and(|o| o.iter().all(|t| t.as_num().is_some())) => {}
            Some(_) => diag(format!("instrument `{}` measures non-numeric variable `{}`", m.instrument, m.variable)),
            None => diag(format!("instrument `{}` measures undeclared variable `{}`", m.instrument, m.variable)),
        }
        if m.errors.len() != m.distribution.len() || m.errors.is_empty() {
            diag(format!("instrument `{}` error distribution is malformed", m.instrument));
        }
        let sum: Prob = m.distribution.iter().sum();
        if !sum.is_one() {
            diag(format!("instrument `{}` error distribution sums to {}", m.instrument, format_exact(&sum)));
        }
        if m.cost.is_negative() {
            diag(format!("instrument `{}` has negative cost", m.instrument));
        }
    }

    let classes = s.classes();
    let class_of = |t: &Term| classes.get(t).cloned();
    let mut actions = 0;
    let mut outcomes = 0;
    for a in &s.example.atoms {
        if !a.is_ground() {
            diag(format!("training example atom `{a}` is not ground"));
        }
        let Some(var) = s.variable_of(a, &class_of) else { continue };
        match s.lookup(&var) {
            Some(VariableRef::Decision(d)) => {
                actions += 1;
                if !d.actions.contains(&a.args[d.pattern.value_slot]) {
                    diag(format!("training example action `{a}` is not a declared action of `{}`", d.name));
                }
            }
            Some(VariableRef::Fact(f)) if f.is_conditional() => outcomes += 1,
            _ => {}
        }
    }
    if actions == 0 {
        diag("training example records no action".into());
    }
    if outcomes == 0 {
        diag("training example records no outcome".into());
    }
    if let Some(o) = &s.observation {
        match s.prob_fact(&o.latent) {
            Some(f) if f.is_conditional() => diag(format!("latent `{}` must be a root variable", o.latent)),
            Some(f) => {
                if f.outcomes().map_or(0, <[Term]>::len) != 2 {
                    diag(format!("latent `{}` must have exactly two outcomes", o.latent));
                }
                if !f.outcomes().is_some_and(|x| x.contains(&o.hypothesis)) {
                    diag(format!("hypothesis `{}` is not an outcome of `{}`", o.hypothesis, o.latent));
                }
            }
            None => diag(format!("latent `{}` is not a declared prob fact", o.latent)),
        }
    }
    out
}

/// Cartesian product of value lists, first list varying slowest.
pub fn product<T: Clone>(spaces: &[Vec<T>]) -> Vec<Vec<T>> {
    let mut out = vec![Vec::new()];
    for space in spaces {
        let mut next = Vec::with_capacity(out.len() * space.len());
        for prefix in &out {
            for v in space {
                let mut p = prefix.clone();
                p.push(v.clone());
                next.push(p);
            }
        }
        out = next;
    }
    out
}

fn exact_value(p: &Prob) -> Value {
    if p.is_integer() {
        if let Ok(n) = p.numer().to_string().parse::<i64>() {
            return Value::from(n);
        }
    }
    Value::String(format_exact(p))
}

fn term_value(t: &Term) -> Value {
    Value::String(t.to_string())
}

impl From<&Scenario> for RawScenario {
    fn from(s: &Scenario) -> Self {
        let prob_facts = s
            .theory
            .prob_facts
            .iter()
            .map(|f| {
                let (atom, value, subject) = pattern_to_raw(&f.pattern);
                let mut raw = RawProbFact {
                    variable: f.variable.clone(),
                    atom,
                    value,
                    subject,
                    class: f.pattern.class.clone(),
                    outcomes: Vec::new(),
                    distribution: Vec::new(),
                    given: Vec::new(),
                    rows: Vec::new(),
                    tag: f.tag.as_str().to_string(),
                    derived: f.is_derived(),
                };
                if let ProbFactKind::Distribution { outcomes, parents, rows } = &f.kind {
                    raw.outcomes = outcomes.iter().map(term_value).collect();
                    if parents.is_empty() {
                        raw.distribution = rows[0].probs.iter().map(exact_value).collect();
                    } else {
                        raw.given = parents.iter().map(|p| format!("{}: {}", p.variable, p.atom)).collect();
                        raw.rows = rows
                            .iter()
                            .map(|r| RawRow {
                                when: r.when.iter().map(|w| w.as_ref().map_or(Value::from("*"), term_value)).collect(),
                                distribution: r.probs.iter().map(exact_value).collect(),
                            })
                            .collect();
                    }
                }
                raw
            })
            .collect();
        RawScenario {
            name: s.name.clone(),
            theory: RawTheory { clauses: s.theory.clauses.iter().map(ToString::to_string).collect(), prob_facts },
            decision_problem: RawProblem {
                decisions: s
                    .problem
                    .decisions
                    .iter()
                    .map(|d| {
                        let (atom, value, _) = pattern_to_raw(&d.pattern);
                        RawDecision { name: d.name.clone(), atom, value, actions: d.actions.iter().map(term_value).collect() }
                    })
                    .collect(),
                utilities: s
                    .problem
                    .utilities
                    .iter()
                    .map(|u| RawUtility {
                        when: u.when.iter().map(|c| format!("{}={}", c.variable, c.value)).collect::<Vec<_>>().join(" & "),
                        utils: exact_value(&u.utils),
                    })
                    .collect(),
                horizon: s.problem.horizon,
                information_order: s.problem.information_order.clone(),
            },
            training_example: s.example.atoms.iter().map(ToString::to_string).collect(),
            measurement: s
                .measurables
                .iter()
                .map(|m| RawMeasurement {
                    variable: m.variable.clone(),
                    instrument: m.instrument.clone(),
                    decision: m.decision.clone(),
                    actions: m.actions.clone(),
                    reading: m.reading.clone(),
                    error_variable: m.error_variable.clone(),
                    errors: m.errors.iter().map(exact_value).collect(),
                    distribution: m.distribution.iter().map(exact_value).collect(),
                    cost: exact_value(&m.cost),
                })
                .collect(),
            observation_reports: s.observation.as_ref().map(|o| RawObservation {
                latent: o.latent.clone(),
                hypothesis: o.hypothesis.to_string(),
                observe: o.observe.clone(),
                when: format!("{}={}", o.enabling.variable, o.enabling.value),
            }),
        }
    }
}
