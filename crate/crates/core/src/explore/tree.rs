use std::collections::{HashMap, HashSet};

use crate::concolic::{BranchPredicate, Condition};

type BranchKey = (Condition, bool);

#[derive(Debug, Default, Clone)]
struct Node {
    children: HashMap<BranchKey, usize>,
    /// Sibling directions already turned into worklist formulas.
    enqueued: HashSet<BranchKey>,
    /// Classes predicted by executions ending here.
    decisions: Vec<usize>,
}

/// Prefix trie of branch decisions seen so far.
#[derive(Debug, Clone)]
pub struct ExplorationTree {
    nodes: Vec<Node>,
}

impl Default for ExplorationTree {
    fn default() -> Self {
        Self::new()
    }
}

impl ExplorationTree {
    pub fn new() -> Self {
        ExplorationTree {
            nodes: vec![Node::default()],
        }
    }

    /// Adds the path of `trace`, records the decision at its leaf and
    /// returns the positions whose flipped direction is new. Those
    /// siblings are marked, so no prefix/flip pair is reported twice.
    pub fn insert(&mut self, trace: &[BranchPredicate], class: usize) -> Vec<usize> {
        let mut fresh = Vec::new();
        let mut node = 0;
        for (depth, p) in trace.iter().enumerate() {
            let sibling = (p.condition.clone(), !p.taken);
            let current = &mut self.nodes[node];
            if !current.children.contains_key(&sibling) && current.enqueued.insert(sibling) {
                fresh.push(depth);
            }
            let key = (p.condition.clone(), p.taken);
            node = match self.nodes[node].children.get(&key) {
                Some(&child) => child,
                None => {
                    self.nodes.push(Node::default());
                    let child = self.nodes.len() - 1;
                    self.nodes[node].children.insert(key, child);
                    child
                }
            };
        }
        self.nodes[node].decisions.push(class);
        fresh
    }

    /// Number of branch nodes, excluding the root.
    pub fn branch_nodes(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn decision_count(&self) -> usize {
        self.nodes.iter().map(|n| n.decisions.len()).sum()
    }

    /// Decisions recorded at the end of `trace`'s path, if it was inserted.
    pub fn decisions_at(&self, trace: &[BranchPredicate]) -> Option<&[usize]> {
        let mut node = 0;
        for p in trace {
            node = *self.nodes[node]
                .children
                .get(&(p.condition.clone(), p.taken))?;
        }
        Some(&self.nodes[node].decisions)
    }
}
