use std::collections::BTreeSet;
use std::fmt::Write;

use crate::concolic::{Assignment, BranchPredicate, Comparison, Condition};
use crate::error::ExecError;

/// One conjunct of a query: a condition asserted positively or negated.
#[derive(Debug, Clone, PartialEq)]
pub struct Assertion {
    pub condition: Condition,
    pub positive: bool,
}

impl Assertion {
    pub fn holds(&self, assignment: &Assignment) -> Result<bool, ExecError> {
        Ok(self.condition.holds(assignment)? == self.positive)
    }

    /// The predicate in the direction it was observed.
    pub fn as_taken(p: &BranchPredicate) -> Self {
        Assertion {
            condition: p.condition.clone(),
            positive: p.taken,
        }
    }

    /// The predicate's unexplored direction.
    pub fn negated(p: &BranchPredicate) -> Self {
        Assertion {
            condition: p.condition.clone(),
            positive: !p.taken,
        }
    }

    pub fn comparison(c: Comparison) -> Self {
        Assertion {
            condition: Condition::Compare(c),
            positive: true,
        }
    }
}

/// A quantifier-free nonlinear real arithmetic query over the attack
/// variables `x0 .. x{n-1}`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConstraintSystem {
    pub var_count: usize,
    pub assertions: Vec<Assertion>,
}

pub const LOGIC: &str = "QF_NRA";

impl ConstraintSystem {
    pub fn new(var_count: usize) -> Self {
        ConstraintSystem {
            var_count,
            assertions: Vec::new(),
        }
    }

    pub fn assert(&mut self, assertion: Assertion) {
        self.assertions.push(assertion);
    }

    /// Variables referenced by the assertions.
    pub fn referenced_vars(&self) -> BTreeSet<usize> {
        let mut vars = BTreeSet::new();
        for a in &self.assertions {
            a.condition.collect_vars(&mut vars);
        }
        vars
    }

    /// `true` if every assertion holds in floating point under `assignment`.
    pub fn satisfied_by(&self, assignment: &Assignment) -> Result<bool, ExecError> {
        for a in &self.assertions {
            if !a.holds(assignment)? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// SMT-LIB2 document: logic, declarations, assertions, `check-sat`,
    /// `get-model`. Pure function of the system.
    pub fn render(&self) -> String {
        let mut out = String::new();
        writeln!(out, "(set-logic {LOGIC})").unwrap();
        let declared = self
            .var_count
            .max(self.referenced_vars().last().map_or(0, |v| v + 1));
        for id in 0..declared {
            writeln!(out, "(declare-const x{id} Real)").unwrap();
        }
        for a in &self.assertions {
            if a.positive {
                writeln!(out, "(assert {})", a.condition).unwrap();
            } else {
                writeln!(out, "(assert (not {}))", a.condition).unwrap();
            }
        }
        out.push_str("(check-sat)\n(get-model)\n");
        out
    }
}
