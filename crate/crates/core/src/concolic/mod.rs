//! Concolic values: concrete numbers shadowed by symbolic expressions, and
//! the recorder that logs every data-dependent branch.

mod expr;
mod trace;
mod value;

pub use expr::{write_decimal, Affine, Assignment, SymExpr};
pub use trace::{BranchPredicate, BranchTrace, Comparison, Condition, Relation};
pub use value::{ArithOp, ConcolicValue};
