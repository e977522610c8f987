use super::term::{Atom, Term};
use std::collections::BTreeMap;

/// Variable bindings. Chains are allowed; `resolve` follows them.
pub type Substitution = BTreeMap<String, Term>;

pub fn walk<'a>(term: &'a Term, s: &'a Substitution) -> &'a Term {
    let mut t = term;
    while let Term::Var(v) = t {
        match s.get(v) {
            Some(next) => t = next,
            None => break,
        }
    }
    t
}

/// Fully applies `s` to `term`.
pub fn resolve(term: &Term, s: &Substitution) -> Term {
    match walk(term, s) {
        Term::App(f, args) => Term::App(f.clone(), args.iter().map(|a| resolve(a, s)).collect()),
        other => other.clone(),
    }
}

pub fn resolve_atom(atom: &Atom, s: &Substitution) -> Atom {
    Atom { pred: atom.pred.clone(), args: atom.args.iter().map(|a| resolve(a, s)).collect() }
}

fn occurs(var: &str, term: &Term, s: &Substitution) -> bool {
    match walk(term, s) {
        Term::Var(v) => v == var,
        Term::App(_, args) => args.iter().any(|a| occurs(var, a, s)),
        _ => false,
    }
}

pub fn unify_terms(a: &Term, b: &Term, s: &mut Substitution) -> bool {
    let a = walk(a, s).clone();
    let b = walk(b, s).clone();
    match (&a, &b) {
        (Term::Var(x), Term::Var(y)) if x == y => true,
        (Term::Var(x), other) | (other, Term::Var(x)) => {
            if occurs(x, other, s) {
                return false;
            }
            s.insert(x.clone(), other.clone());
            true
        }
        (Term::App(f, fa), Term::App(g, ga)) => {
            f == g && fa.len() == ga.len() && fa.iter().zip(ga).all(|(x, y)| unify_terms(x, y, s))
        }
        _ => a == b,
    }
}

/// Most general unifier of `a` and `b` extending `bindings`, or `None`.
pub fn unify(a: &Atom, b: &Atom, bindings: &Substitution) -> Option<Substitution> {
    if a.pred != b.pred || a.args.len() != b.args.len() {
        return None;
    }
    let mut s = bindings.clone();
    for (x, y) in a.args.iter().zip(&b.args) {
        if !unify_terms(x, y, &mut s) {
            return None;
        }
    }
    Some(s)
}

/// One-way matching: binds variables of `pattern` only, so that
/// `resolve(pattern) == target`. Variables of `target` are treated as
/// constants.
pub fn match_term(pattern: &Term, target: &Term, s: &mut Substitution) -> bool {
    match pattern {
        Term::Var(v) => match s.get(v) {
            Some(bound) => bound == target,
            None => {
                s.insert(v.clone(), target.clone());
                true
            }
        },
        Term::App(f, fa) => match target {
            Term::App(g, ga) if f == g && fa.len() == ga.len() => {
                fa.iter().zip(ga).all(|(p, t)| match_term(p, t, s))
            }
            _ => false,
        },
        _ => pattern == target,
    }
}

pub fn match_atom(pattern: &Atom, target: &Atom, s: &mut Substitution) -> bool {
    pattern.pred == target.pred
        && pattern.args.len() == target.args.len()
        && pattern.args.iter().zip(&target.args).all(|(p, t)| match_term(p, t, s))
}

/// Renames every variable `v` of the atom to `v_<suffix>`.
pub fn rename_atom(atom: &Atom, suffix: usize) -> Atom {
    fn go(t: &Term, suffix: usize) -> Term {
        match t {
            Term::Var(v) => Term::Var(format!("{v}_{suffix}")),
            Term::App(f, args) => Term::App(f.clone(), args.iter().map(|a| go(a, suffix)).collect()),
            other => other.clone(),
        }
    }
    Atom { pred: atom.pred.clone(), args: atom.args.iter().map(|a| go(a, suffix)).collect() }
}
