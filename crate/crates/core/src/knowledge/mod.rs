//! Domain theory representation: terms, clauses, unification and scenarios.

pub mod builtin;
pub mod scenario;
pub mod term;
pub mod unify;

pub use builtin::{eval_builtin, is_builtin};
pub use scenario::*;
pub use term::{Atom, HornClause, SyntaxError, Term};
pub use unify::{match_atom, resolve, resolve_atom, unify, Substitution};
