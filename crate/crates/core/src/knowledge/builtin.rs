//! Arithmetic relations the prover evaluates directly instead of resolving.

use super::term::{Atom, Term};
use super::unify::{resolve, unify_terms, Substitution};
use num_traits::Zero;

pub const BUILTINS: &[(&str, usize)] =
    &[("Times", 3), ("Plus", 3), ("Less", 2), ("LessEq", 2), ("Greater", 2), ("Equal", 2)];

pub fn is_builtin(pred: &str) -> bool {
    BUILTINS.iter().any(|(name, _)| *name == pred)
}

pub fn builtin_arity(pred: &str) -> Option<usize> {
    BUILTINS.iter().find(|(name, _)| *name == pred).map(|(_, n)| *n)
}

/// Evaluates a builtin under `s`. Returns the extended substitution when the
/// relation holds, `None` when it fails or is not sufficiently instantiated.
pub fn eval_builtin(atom: &Atom, s: &Substitution) -> Option<Substitution> {
    let args: Vec<Term> = atom.args.iter().map(|a| resolve(a, s)).collect();
    let num = |t: &Term| t.as_num().cloned();
    let mut out = s.clone();
    match (atom.pred.as_str(), args.as_slice()) {
        ("Times", [x, y, z]) => match (num(x), num(y), num(z)) {
            (Some(a), Some(b), _) => unify_terms(z, &Term::Num(a * b), &mut out).then_some(out),
            (Some(a), None, Some(c)) if !a.is_zero() => {
                unify_terms(y, &Term::Num(c / a), &mut out).then_some(out)
            }
            (None, Some(b), Some(c)) if !b.is_zero() => {
                unify_terms(x, &Term::Num(c / b), &mut out).then_some(out)
            }
            _ => None,
        },
        ("Plus", [x, y, z]) => match (num(x), num(y), num(z)) {
            (Some(a), Some(b), _) => unify_terms(z, &Term::Num(a + b), &mut out).then_some(out),
            (Some(a), None, Some(c)) => unify_terms(y, &Term::Num(c - a), &mut out).then_some(out),
            (None, Some(b), Some(c)) => unify_terms(x, &Term::Num(c - b), &mut out).then_some(out),
            _ => None,
        },
        ("Less", [x, y]) => cmp(x, y, |o| o.is_lt()).then_some(out),
        ("LessEq", [x, y]) => cmp(x, y, |o| o.is_le()).then_some(out),
        ("Greater", [x, y]) => cmp(x, y, |o| o.is_gt()).then_some(out),
        ("Equal", [x, y]) => {
            if x.is_ground() && y.is_ground() {
                (x == y).then_some(out)
            } else {
                unify_terms(x, y, &mut out).then_some(out)
            }
        }
        _ => None,
    }
}

fn cmp(x: &Term, y: &Term, pred: impl Fn(std::cmp::Ordering) -> bool) -> bool {
    match (x.as_num(), y.as_num()) {
        (Some(a), Some(b)) => pred(a.cmp(b)),
        _ => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::int;

    #[test]
    fn times_computes_product() {
        let a = Atom::parse("Times(10, .4, w)").unwrap();
        let s = eval_builtin(&a, &Substitution::new()).unwrap();
        assert_eq!(s.get("w"), Some(&Term::Num(int(4))));
    }

    #[test]
    fn times_inverts() {
        let a = Atom::parse("Times(10, d, 3)").unwrap();
        let s = eval_builtin(&a, &Substitution::new()).unwrap();
        assert_eq!(resolve(&Term::var("d"), &s).to_string(), ".3");
    }

    #[test]
    fn comparisons() {
        let s = Substitution::new();
        assert!(eval_builtin(&Atom::parse("Less(3, 4)").unwrap(), &s).is_some());
        assert!(eval_builtin(&Atom::parse("Less(4, 4)").unwrap(), &s).is_none());
        assert!(eval_builtin(&Atom::parse("Equal(4, 4.0)").unwrap(), &s).is_some());
        assert!(eval_builtin(&Atom::parse("Less(x, 4)").unwrap(), &s).is_none());
    }
}
