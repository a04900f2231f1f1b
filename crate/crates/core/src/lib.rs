//! Concolic testing for small neural networks.
//!
//! A forward pass runs over [`concolic::ConcolicValue`]s, logging a branch
//! predicate at every data-dependent comparison. The [`explore`] module
//! negates branch prefixes, asks an SMT solver for inputs reaching the
//! sibling paths, and stops once the predicted class changes.

pub mod concolic;
pub mod error;
pub mod explore;
pub mod nn;
pub mod select;
pub mod solve;

pub use error::{ExecError, FormatError};
