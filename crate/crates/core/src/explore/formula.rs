use std::collections::VecDeque;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::concolic::BranchPredicate;
use crate::solve::Assertion;

/// `prefix (as taken) ∧ ¬negated`. The recorded trace is shared between
/// all formulas produced from one execution.
#[derive(Debug, Clone)]
pub struct PathFormula {
    trace: Arc<Vec<BranchPredicate>>,
    depth: usize,
    /// Execution that produced the formula (0 = the initial input).
    pub execution: usize,
}

impl PathFormula {
    pub fn new(trace: Arc<Vec<BranchPredicate>>, depth: usize, execution: usize) -> Self {
        assert!(depth < trace.len(), "negated branch outside the trace");
        PathFormula {
            trace,
            depth,
            execution,
        }
    }

    /// Position of the negated branch, equal to the prefix length.
    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn prefix(&self) -> &[BranchPredicate] {
        &self.trace[..self.depth]
    }

    /// The branch whose other direction this formula targets.
    pub fn negated(&self) -> &BranchPredicate {
        &self.trace[self.depth]
    }

    /// Conjuncts in order: prefix as taken, then the flipped branch.
    pub fn assertions(&self) -> Vec<Assertion> {
        self.prefix()
            .iter()
            .map(Assertion::as_taken)
            .chain(std::iter::once(Assertion::negated(self.negated())))
            .collect()
    }

    /// Readable form, e.g. `¬φ1 ∧ ¬φ2 ∧ φ3` style but with full predicates.
    pub fn describe(&self) -> String {
        let mut parts: Vec<String> = self
            .prefix()
            .iter()
            .map(BranchPredicate::as_taken)
            .collect();
        parts.push(self.negated().negated());
        parts.join(" & ")
    }
}

impl PartialEq for PathFormula {
    fn eq(&self, other: &Self) -> bool {
        self.depth == other.depth
            && self.prefix() == other.prefix()
            && self.negated() == other.negated()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Order {
    /// Pop from the front: breadth-first, flipping shallow branches first.
    #[default]
    Queue,
    /// Pop from the back: depth-first, flipping the deepest branch first.
    Stack,
}

impl std::str::FromStr for Order {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "queue" => Ok(Order::Queue),
            "stack" => Ok(Order::Stack),
            _ => Err(format!("unknown order {s:?}, expected queue or stack")),
        }
    }
}

impl std::fmt::Display for Order {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Order::Queue => "queue",
            Order::Stack => "stack",
        })
    }
}

/// Pending formulas. Pushes always go to the back.
#[derive(Debug, Clone)]
pub struct Worklist<T = PathFormula> {
    items: VecDeque<T>,
    order: Order,
}

impl<T> Worklist<T> {
    pub fn new(order: Order) -> Self {
        Worklist {
            items: VecDeque::new(),
            order,
        }
    }

    pub fn order(&self) -> Order {
        self.order
    }

    pub fn push(&mut self, item: T) {
        self.items.push_back(item);
    }

    pub fn pop(&mut self) -> Option<T> {
        match self.order {
            Order::Queue => self.items.pop_front(),
            Order::Stack => self.items.pop_back(),
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &T> {
        self.items.iter()
    }
}
