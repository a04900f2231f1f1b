//! Branch predicates and the per-execution recorder.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::expr::{Assignment, SymExpr};
use super::value::ConcolicValue;
use crate::error::ExecError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Relation {
    #[serde(rename = "=")]
    Eq,
    #[serde(rename = "!=")]
    Ne,
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">")]
    Gt,
    #[serde(rename = ">=")]
    Ge,
}

impl Relation {
    pub fn holds(self, a: f64, b: f64) -> bool {
        match self {
            Relation::Eq => a == b,
            Relation::Ne => a != b,
            Relation::Lt => a < b,
            Relation::Le => a <= b,
            Relation::Gt => a > b,
            Relation::Ge => a >= b,
        }
    }

    pub fn is_equality(self) -> bool {
        matches!(self, Relation::Eq | Relation::Ne)
    }

    pub fn is_strict(self) -> bool {
        matches!(self, Relation::Lt | Relation::Gt)
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Relation::Eq => "=",
            Relation::Ne => "!=",
            Relation::Lt => "<",
            Relation::Le => "<=",
            Relation::Gt => ">",
            Relation::Ge => ">=",
        }
    }
}

/// `lhs relation rhs` over symbolic expressions.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Comparison {
    pub lhs: Arc<SymExpr>,
    pub relation: Relation,
    pub rhs: Arc<SymExpr>,
}

impl Comparison {
    pub fn holds(&self, assignment: &Assignment) -> Result<bool, ExecError> {
        Ok(self
            .relation
            .holds(self.lhs.eval(assignment)?, self.rhs.eval(assignment)?))
    }
}

impl fmt::Display for Comparison {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.relation {
            Relation::Ne => write!(f, "(not (= {} {}))", self.lhs, self.rhs),
            r => write!(f, "({} {} {})", r.symbol(), self.lhs, self.rhs),
        }
    }
}

/// A branch condition: a single comparison, or the conjunction recorded by
/// the exponential bracketing check.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Condition {
    Compare(Comparison),
    All(Vec<Comparison>),
}

impl Condition {
    pub fn holds(&self, assignment: &Assignment) -> Result<bool, ExecError> {
        match self {
            Condition::Compare(c) => c.holds(assignment),
            Condition::All(cs) => {
                for c in cs {
                    if !c.holds(assignment)? {
                        return Ok(false);
                    }
                }
                Ok(true)
            }
        }
    }

    pub fn comparisons(&self) -> &[Comparison] {
        match self {
            Condition::Compare(c) => std::slice::from_ref(c),
            Condition::All(cs) => cs,
        }
    }

    pub fn collect_vars(&self, out: &mut std::collections::BTreeSet<usize>) {
        for c in self.comparisons() {
            c.lhs.collect_vars(out);
            c.rhs.collect_vars(out);
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Condition::Compare(c) => c.fmt(f),
            Condition::All(cs) => {
                f.write_str("(and")?;
                for c in cs {
                    write!(f, " {c}")?;
                }
                f.write_str(")")
            }
        }
    }
}

/// A condition together with its truth value on the concrete run.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BranchPredicate {
    pub condition: Condition,
    pub taken: bool,
}

impl BranchPredicate {
    /// SMT-LIB rendering of the predicate in the direction it was taken.
    pub fn as_taken(&self) -> String {
        signed(&self.condition, self.taken)
    }

    /// SMT-LIB rendering of the opposite direction.
    pub fn negated(&self) -> String {
        signed(&self.condition, !self.taken)
    }
}

fn signed(cond: &Condition, positive: bool) -> String {
    if positive {
        cond.to_string()
    } else {
        format!("(not {cond})")
    }
}

/// Predicates recorded during one forward execution, in encounter order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BranchTrace {
    predicates: Vec<BranchPredicate>,
}

impl BranchTrace {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, predicate: BranchPredicate) {
        self.predicates.push(predicate);
    }

    pub fn predicates(&self) -> &[BranchPredicate] {
        &self.predicates
    }

    pub fn len(&self) -> usize {
        self.predicates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.predicates.is_empty()
    }

    pub fn into_predicates(self) -> Vec<BranchPredicate> {
        self.predicates
    }

    /// Concrete comparison that logs a predicate when either side is symbolic.
    pub fn compare(&mut self, a: &ConcolicValue, b: &ConcolicValue, relation: Relation) -> bool {
        let taken = relation.holds(a.val, b.val);
        if a.is_symbolic() || b.is_symbolic() {
            self.record(BranchPredicate {
                condition: Condition::Compare(Comparison {
                    lhs: a.expr(),
                    relation,
                    rhs: b.expr(),
                }),
                taken,
            });
        }
        taken
    }
}
