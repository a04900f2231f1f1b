//! The concolic attack loop: execute, negate, solve, check, repeat.

use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::formula::{Order, PathFormula, Worklist};
use super::tree::ExplorationTree;
use crate::concolic::{Assignment, BranchPredicate, Comparison, Relation, SymExpr};
use crate::error::ExecError;
use crate::nn::{forward_concolic, forward_concrete, ModelSpec, Prediction, Tensor};
use crate::solve::{Assertion, ConstraintSystem, Solver, Status};

#[derive(Debug, Clone)]
pub struct SearchConfig {
    pub order: Order,
    /// Budget for the whole attack.
    pub timeout: Duration,
    /// Budget for each solver call.
    pub query_timeout: Duration,
    /// Keeps every attack variable inside `[lo, hi]`.
    pub clamp: Option<(f64, f64)>,
    /// Keeps every attack variable within `ε` of its original value.
    pub epsilon: Option<f64>,
    /// Cap on solver queries.
    pub max_iterations: Option<usize>,
    /// Nudge solver models that miss the formula after rounding to `f64`.
    pub float_repair: bool,
    /// Re-run each SAT input concolically and compare with its formula.
    pub check_replay: bool,
    pub seed: u64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            order: Order::Queue,
            timeout: Duration::from_secs(1800),
            query_timeout: Duration::from_secs(10),
            clamp: None,
            epsilon: None,
            max_iterations: None,
            float_repair: true,
            check_replay: true,
            seed: 0,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.timeout.is_zero() || self.query_timeout.is_zero() {
            return Err("timeouts must be positive".into());
        }
        if let Some((lo, hi)) = self.clamp {
            if lo.partial_cmp(&hi) != Some(std::cmp::Ordering::Less) {
                return Err(format!("clamp interval [{lo}, {hi}] is empty"));
            }
        }
        if let Some(eps) = self.epsilon {
            if !(eps >= 0.0 && eps.is_finite()) {
                return Err(format!("epsilon {eps} must be a non-negative number"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Outcome {
    AdversarialFound,
    WorklistExhausted,
    Timeout,
}

/// Relation family of a branch, for classifying replay divergences.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BranchKind {
    Equality,
    Strict,
    NonStrict,
}

impl BranchKind {
    pub fn of(p: &BranchPredicate) -> Self {
        let rels: Vec<Relation> = p
            .condition
            .comparisons()
            .iter()
            .map(|c| c.relation)
            .collect();
        if rels.iter().any(|r| r.is_equality()) {
            BranchKind::Equality
        } else if rels.iter().any(|r| r.is_strict()) {
            BranchKind::Strict
        } else {
            BranchKind::NonStrict
        }
    }
}

/// How a SAT input behaved when executed again.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "result")]
pub enum Replay {
    /// Prefix reproduced and the targeted branch flipped.
    Matched,
    /// First disagreement with the formula, at trace position `at`.
    Divergent { at: usize, kind: BranchKind },
}

/// Compares a replayed trace with the formula that produced its input.
pub fn replay_check(formula: &PathFormula, trace: &[BranchPredicate]) -> Replay {
    for (i, expected) in formula.prefix().iter().enumerate() {
        match trace.get(i) {
            Some(p) if p.taken == expected.taken => {}
            _ => {
                return Replay::Divergent {
                    at: i,
                    kind: BranchKind::of(expected),
                }
            }
        }
    }
    let depth = formula.depth();
    let target = formula.negated();
    match trace.get(depth) {
        Some(p) if p.taken != target.taken => Replay::Matched,
        _ => Replay::Divergent {
            at: depth,
            kind: BranchKind::of(target),
        },
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct AttackStats {
    pub outcome: Option<Outcome>,
    /// Worklist pops, i.e. solver queries issued.
    pub iterations: usize,
    /// Concolic executions, including the initial one.
    pub executions: usize,
    pub sat: usize,
    pub unsat: usize,
    pub unknown: usize,
    /// Trace length of each execution, in execution order.
    pub constraints_per_execution: Vec<usize>,
    pub constraints_total: usize,
    pub formulas_pushed: usize,
    pub forward_errors: usize,
    pub solver_seconds: f64,
    pub query_bytes_total: usize,
    pub replay_matched: usize,
    pub replay_divergent_equality: usize,
    pub replay_divergent_strict: usize,
    pub replay_divergent_non_strict: usize,
    pub repaired_models: usize,
    pub wall_seconds: f64,
}

impl AttackStats {
    pub fn mean_constraints(&self) -> f64 {
        mean_usize(&self.constraints_per_execution)
    }

    pub fn mean_solver_seconds(&self) -> f64 {
        if self.iterations == 0 {
            0.0
        } else {
            self.solver_seconds / self.iterations as f64
        }
    }

    pub fn mean_query_bytes(&self) -> f64 {
        if self.iterations == 0 {
            0.0
        } else {
            self.query_bytes_total as f64 / self.iterations as f64
        }
    }

    pub fn replay_divergent(&self) -> usize {
        self.replay_divergent_equality
            + self.replay_divergent_strict
            + self.replay_divergent_non_strict
    }

    fn record_replay(&mut self, replay: Replay) {
        match replay {
            Replay::Matched => self.replay_matched += 1,
            Replay::Divergent { kind, .. } => match kind {
                BranchKind::Equality => self.replay_divergent_equality += 1,
                BranchKind::Strict => self.replay_divergent_strict += 1,
                BranchKind::NonStrict => self.replay_divergent_non_strict += 1,
            },
        }
    }
}

fn mean_usize(xs: &[usize]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<usize>() as f64 / xs.len() as f64
    }
}

/// One solver query made during an attack.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryRecord {
    pub iteration: usize,
    /// Execution that produced the formula.
    pub from_execution: usize,
    pub depth: usize,
    pub status: Status,
    /// Solver model, as returned.
    pub model: Option<Assignment>,
    /// Assignment actually executed, after repair.
    pub assignment: Option<Assignment>,
    pub repaired: bool,
    pub predicted_class: Option<usize>,
    pub replay: Option<Replay>,
    pub query_bytes: usize,
    pub solver_seconds: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdversarialExample {
    pub data: Vec<f64>,
    pub class: usize,
    pub probs: Vec<f64>,
    pub assignment: Assignment,
    /// `(flat index, original, new)` for every position that changed.
    pub changed: Vec<(usize, f64, f64)>,
}

#[derive(Debug, Clone)]
pub struct AttackResult {
    pub original: Prediction,
    pub adversarial: Option<AdversarialExample>,
    pub tree: ExplorationTree,
    pub stats: AttackStats,
    pub queries: Vec<QueryRecord>,
}

impl AttackResult {
    pub fn outcome(&self) -> Outcome {
        self.stats.outcome.expect("set when the attack returns")
    }
}

#[derive(Debug, Clone)]
pub struct Execution {
    pub prediction: Prediction,
    pub trace: Arc<Vec<BranchPredicate>>,
    pub pushed: usize,
}

/// Runs `input` concolically, extends the tree with its path and pushes a
/// formula for every branch direction not yet queued.
pub fn execute(
    model: &ModelSpec,
    input: &Tensor,
    sym_vars: &[(usize, usize)],
    worklist: &mut Worklist,
    tree: &mut ExplorationTree,
    execution: usize,
) -> Result<Execution, ExecError> {
    let run = forward_concolic(model, input, sym_vars)?;
    let trace = Arc::new(run.trace.into_predicates());
    let fresh = tree.insert(&trace, run.prediction.class);
    for &depth in &fresh {
        worklist.push(PathFormula::new(trace.clone(), depth, execution));
    }
    Ok(Execution {
        prediction: run.prediction,
        trace,
        pushed: fresh.len(),
    })
}

/// Solver input for `formula`, with optional input-domain bounds.
pub fn build_query(
    formula: Option<&PathFormula>,
    config: &SearchConfig,
    originals: &Assignment,
) -> ConstraintSystem {
    let var_count = originals.keys().next_back().map_or(0, |v| v + 1);
    let mut system = ConstraintSystem::new(var_count);
    if let Some(f) = formula {
        for a in f.assertions() {
            system.assert(a);
        }
    }
    let bound = |lhs: Arc<SymExpr>, relation, rhs: f64| {
        Assertion::comparison(Comparison {
            lhs,
            relation,
            rhs: SymExpr::constant(rhs),
        })
    };
    if let Some((lo, hi)) = config.clamp {
        for &id in originals.keys() {
            system.assert(bound(SymExpr::var(id), Relation::Ge, lo));
            system.assert(bound(SymExpr::var(id), Relation::Le, hi));
        }
    }
    if let Some(eps) = config.epsilon {
        for (&id, &orig) in originals {
            let delta = Arc::new(SymExpr::Sub(SymExpr::var(id), SymExpr::constant(orig)));
            system.assert(bound(delta.clone(), Relation::Le, eps));
            system.assert(bound(delta, Relation::Ge, -eps));
        }
    }
    system
}

/// Searches near `start` for an assignment satisfying `system` under
/// floating-point evaluation. Solvers reason over the reals and often
/// return points on a constraint boundary, which rounding can push to the
/// wrong side.
pub fn repair_assignment(
    system: &ConstraintSystem,
    start: &Assignment,
    rng: &mut impl Rng,
) -> Option<Assignment> {
    let vars: Vec<usize> = system.referenced_vars().into_iter().collect();
    if vars.is_empty() {
        return None;
    }
    let ok = |a: &Assignment| system.satisfied_by(a).unwrap_or(false);
    // single-variable ulp steps first
    for &id in &vars {
        let mut up = start[&id];
        let mut down = start[&id];
        for _ in 0..64 {
            up = next_up(up);
            down = next_down(down);
            for v in [up, down] {
                let mut cand = start.clone();
                cand.insert(id, v);
                if ok(&cand) {
                    return Some(cand);
                }
            }
        }
    }
    for exp in -15..=-4 {
        let scale = 10f64.powi(exp);
        for _ in 0..48 {
            let mut cand = start.clone();
            for &id in &vars {
                let v = start[&id];
                cand.insert(id, v + rng.gen_range(-1.0..=1.0) * scale * v.abs().max(1.0));
            }
            if ok(&cand) {
                return Some(cand);
            }
        }
    }
    None
}

fn next_up(x: f64) -> f64 {
    if x == 0.0 {
        return f64::from_bits(1);
    }
    let bits = x.to_bits();
    f64::from_bits(if x > 0.0 { bits + 1 } else { bits - 1 })
}

fn next_down(x: f64) -> f64 {
    -next_up(-x)
}

fn substitute(input: &Tensor, sym_vars: &[(usize, usize)], assignment: &Assignment) -> Tensor {
    let mut data = input.values();
    for &(index, id) in sym_vars {
        if let Some(&v) = assignment.get(&id) {
            data[index] = v;
        }
    }
    Tensor::from_values(input.shape().to_vec(), &data).expect("same shape")
}

/// Searches for an input that differs from `input` only at `targets` (flat
/// indices) and changes the predicted class.
pub fn check_adversarial(
    model: &ModelSpec,
    input: &Tensor,
    targets: &[usize],
    config: &SearchConfig,
    solver: &mut dyn Solver,
) -> Result<AttackResult, ExecError> {
    let start = Instant::now();
    let deadline = start + config.timeout;
    let original = forward_concrete(model, input)?;
    let sym_vars: Vec<(usize, usize)> = targets.iter().copied().zip(0..).collect();
    let values = input.values();
    let mut originals = Assignment::new();
    for &(index, id) in &sym_vars {
        let v = values.get(index).copied().ok_or_else(|| {
            ExecError::Shape(format!(
                "target index {index} outside input of {}",
                values.len()
            ))
        })?;
        originals.insert(id, v);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut worklist = Worklist::new(config.order);
    let mut tree = ExplorationTree::new();
    let mut stats = AttackStats::default();
    let mut queries = Vec::new();

    let run_execution = |x: &Tensor,
                         worklist: &mut Worklist,
                         tree: &mut ExplorationTree,
                         stats: &mut AttackStats|
     -> Option<Execution> {
        let n = stats.executions;
        stats.executions += 1;
        match execute(model, x, &sym_vars, worklist, tree, n) {
            Ok(e) => {
                stats.constraints_per_execution.push(e.trace.len());
                stats.constraints_total += e.trace.len();
                stats.formulas_pushed += e.pushed;
                Some(e)
            }
            Err(err) => {
                log::debug!("execution {n} failed: {err}");
                stats.forward_errors += 1;
                None
            }
        }
    };

    run_execution(input, &mut worklist, &mut tree, &mut stats);

    let mut adversarial = None;
    let outcome = loop {
        if Instant::now() >= deadline {
            break Outcome::Timeout;
        }
        if config
            .max_iterations
            .is_some_and(|cap| stats.iterations >= cap)
        {
            break if worklist.is_empty() {
                Outcome::WorklistExhausted
            } else {
                Outcome::Timeout
            };
        }
        let Some(formula) = worklist.pop() else {
            break Outcome::WorklistExhausted;
        };
        stats.iterations += 1;
        let system = build_query(Some(&formula), config, &originals);
        let budget = config
            .query_timeout
            .min(deadline.saturating_duration_since(Instant::now()));
        let result = solver.solve(&system, budget.max(Duration::from_millis(1)));
        stats.solver_seconds += result.elapsed.as_secs_f64();
        stats.query_bytes_total += result.query_bytes;
        let mut record = QueryRecord {
            iteration: stats.iterations,
            from_execution: formula.execution,
            depth: formula.depth(),
            status: result.status,
            model: result.model.clone(),
            assignment: None,
            repaired: false,
            predicted_class: None,
            replay: None,
            query_bytes: result.query_bytes,
            solver_seconds: result.elapsed.as_secs_f64(),
        };
        let model_values = match (result.status, result.model) {
            (Status::Sat, Some(m)) => m,
            (Status::Unsat, _) => {
                stats.unsat += 1;
                queries.push(record);
                continue;
            }
            (status, _) => {
                if let Some(d) = &result.diagnostic {
                    log::debug!("query {} {status:?}: {d}", stats.iterations);
                }
                stats.unknown += 1;
                queries.push(record);
                continue;
            }
        };
        stats.sat += 1;

        let mut assignment = originals.clone();
        for (id, v) in model_values {
            if originals.contains_key(&id) {
                assignment.insert(id, v);
            }
        }
        if config.float_repair && !system.satisfied_by(&assignment).unwrap_or(false) {
            if let Some(fixed) = repair_assignment(&system, &assignment, &mut rng) {
                assignment = fixed;
                record.repaired = true;
                stats.repaired_models += 1;
            }
        }
        record.assignment = Some(assignment.clone());
        let candidate = substitute(input, &sym_vars, &assignment);

        let prediction = match forward_concrete(model, &candidate) {
            Ok(p) => p,
            Err(err) => {
                log::debug!("candidate from query {} failed: {err}", stats.iterations);
                stats.forward_errors += 1;
                queries.push(record);
                continue;
            }
        };
        record.predicted_class = Some(prediction.class);

        if prediction.class != original.class {
            if config.check_replay {
                if let Ok(run) = forward_concolic(model, &candidate, &sym_vars) {
                    let replay = replay_check(&formula, run.trace.predicates());
                    stats.record_replay(replay);
                    record.replay = Some(replay);
                }
            }
            queries.push(record);
            let data = candidate.values();
            let changed = sym_vars
                .iter()
                .filter(|(i, _)| data[*i] != values[*i])
                .map(|&(i, _)| (i, values[i], data[i]))
                .collect();
            adversarial = Some(AdversarialExample {
                data,
                class: prediction.class,
                probs: prediction.probs,
                assignment,
                changed,
            });
            break Outcome::AdversarialFound;
        }

        if let Some(exec) = run_execution(&candidate, &mut worklist, &mut tree, &mut stats) {
            if config.check_replay {
                let replay = replay_check(&formula, &exec.trace);
                if let Replay::Divergent { at, kind } = replay {
                    log::debug!("query {} divergent at {at} ({kind:?})", stats.iterations);
                }
                stats.record_replay(replay);
                record.replay = Some(replay);
            }
        }
        queries.push(record);
    };

    stats.outcome = Some(outcome);
    stats.wall_seconds = start.elapsed().as_secs_f64();
    Ok(AttackResult {
        original,
        adversarial,
        tree,
        stats,
        queries,
    })
}
