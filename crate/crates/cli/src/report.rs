//! JSON report written by `attack` and `escalate`.

use serde::{Deserialize, Serialize};

use neuroconcolic::explore::{AttackResult, Outcome, QueryRecord};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Changed {
    pub index: usize,
    pub original: f64,
    pub adversarial: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputRecord {
    pub input_id: String,
    pub pixels: usize,
    pub selection: String,
    pub order: String,
    pub selected: Vec<usize>,
    pub outcome: Outcome,
    pub original_class: usize,
    pub adversarial_class: Option<usize>,
    pub changed: Vec<Changed>,
    pub adversarial_file: Option<String>,
    pub iterations: usize,
    pub sat: usize,
    pub unsat: usize,
    pub unknown: usize,
    /// Branch predicates recorded by each concolic execution.
    pub constraints_per_iteration: Vec<usize>,
    pub constraints_mean: f64,
    pub solver_time_mean: f64,
    pub query_size_mean: f64,
    pub replay_divergent: usize,
    pub wall_time: f64,
    /// Every solver query in pop order.
    pub queries: Vec<QueryRecord>,
}

impl InputRecord {
    pub fn new(
        input_id: String,
        selection: String,
        selected: Vec<usize>,
        result: &AttackResult,
        order: String,
    ) -> Self {
        let s = &result.stats;
        InputRecord {
            input_id,
            pixels: selected.len(),
            selection,
            order,
            selected,
            outcome: result.outcome(),
            original_class: result.original.class,
            adversarial_class: result.adversarial.as_ref().map(|a| a.class),
            changed: result
                .adversarial
                .iter()
                .flat_map(|a| &a.changed)
                .map(|&(index, original, adversarial)| Changed {
                    index,
                    original,
                    adversarial,
                })
                .collect(),
            adversarial_file: None,
            iterations: s.iterations,
            sat: s.sat,
            unsat: s.unsat,
            unknown: s.unknown,
            constraints_per_iteration: s.constraints_per_execution.clone(),
            constraints_mean: s.mean_constraints(),
            solver_time_mean: s.mean_solver_seconds(),
            query_size_mean: s.mean_query_bytes(),
            replay_divergent: s.replay_divergent(),
            wall_time: s.wall_seconds,
            queries: result.queries.clone(),
        }
    }

    pub fn succeeded(&self) -> bool {
        self.outcome == Outcome::AdversarialFound
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregates {
    pub attempted: usize,
    pub successes: usize,
    /// `100 · successes / attempted`.
    pub atk_percent: f64,
    /// Mean wall time of successful attacks only.
    pub mean_success_time: Option<f64>,
    pub mean_time: Option<f64>,
}

fn mean(xs: impl Iterator<Item = f64>) -> Option<f64> {
    let (n, total) = xs.fold((0usize, 0.0), |(n, t), x| (n + 1, t + x));
    (n > 0).then(|| total / n as f64)
}

impl Aggregates {
    pub fn from_records(records: &[InputRecord]) -> Self {
        let successes = records.iter().filter(|r| r.succeeded()).count();
        Aggregates {
            attempted: records.len(),
            successes,
            atk_percent: percent(successes, records.len()),
            mean_success_time: mean(
                records
                    .iter()
                    .filter(|r| r.succeeded())
                    .map(|r| r.wall_time),
            ),
            mean_time: mean(records.iter().map(|r| r.wall_time)),
        }
    }
}

fn percent(part: usize, whole: usize) -> f64 {
    if whole == 0 {
        0.0
    } else {
        100.0 * part as f64 / whole as f64
    }
}

/// One pixel count of an escalation; `attack` produces a single stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stage {
    pub pixels: usize,
    /// Inputs already broken by earlier stages and skipped here.
    pub skipped: usize,
    pub records: Vec<InputRecord>,
    pub aggregates: Aggregates,
    pub cumulative_successes: usize,
    /// Successes so far over all inputs of the batch.
    pub cumulative_atk_percent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackReport {
    pub model: String,
    pub inputs: usize,
    pub selection: String,
    pub order: String,
    pub seed: u64,
    pub stages: Vec<Stage>,
}

impl AttackReport {
    pub fn new(model: String, inputs: usize, selection: String, order: String, seed: u64) -> Self {
        AttackReport {
            model,
            inputs,
            selection,
            order,
            seed,
            stages: Vec::new(),
        }
    }

    pub fn push_stage(&mut self, pixels: usize, records: Vec<InputRecord>) {
        let before = self.stages.last().map_or(0, |s| s.cumulative_successes);
        let aggregates = Aggregates::from_records(&records);
        let cumulative = before + aggregates.successes;
        self.stages.push(Stage {
            pixels,
            skipped: before,
            records,
            aggregates,
            cumulative_successes: cumulative,
            cumulative_atk_percent: percent(cumulative, self.inputs),
        });
    }

    /// Checks that every stored aggregate matches its records.
    pub fn consistent(&self) -> bool {
        let mut cumulative = 0;
        self.stages.iter().all(|s| {
            let ok = s.aggregates == Aggregates::from_records(&s.records)
                && s.skipped == cumulative
                && s.skipped + s.records.len() == self.inputs;
            cumulative += s.aggregates.successes;
            ok && s.cumulative_successes == cumulative
                && s.cumulative_atk_percent == percent(cumulative, self.inputs)
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}
