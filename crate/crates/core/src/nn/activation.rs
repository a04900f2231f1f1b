//! Instrumented activations and the bracketing exponential.

use std::sync::Arc;

use super::model::ActivationThresholds;
use super::tensor::Tensor;
use crate::concolic::{
    BranchPredicate, BranchTrace, Comparison, ConcolicValue, Condition, Relation, SymExpr,
};
use crate::error::ExecError;

fn c(v: f64) -> ConcolicValue {
    ConcolicValue::constant(v)
}

pub fn relu(x: &ConcolicValue, rec: &mut BranchTrace) -> ConcolicValue {
    if rec.compare(x, &c(0.0), Relation::Lt) {
        c(0.0)
    } else {
        x.clone()
    }
}

/// `exp(x)` by range reduction:
///
/// * `x < 0`: `1 / exp(-x)`
/// * `x > 1`: `exp(x/2)²`, with the half evaluated once
/// * otherwise records `exp(x) ≥ 1 + x ∧ exp(x) ≤ 1 + 2x` and returns the
///   concrete exponential with the symbolic part dropped.
pub fn exp_c(x: &ConcolicValue, rec: &mut BranchTrace) -> Result<ConcolicValue, ExecError> {
    if rec.compare(x, &c(0.0), Relation::Lt) {
        let inv = exp_c(&x.neg(), rec)?;
        return c(1.0).div(&inv);
    }
    if rec.compare(x, &c(1.0), Relation::Gt) {
        let half = exp_c(&x.div(&c(2.0))?, rec)?;
        return half.mul(&half);
    }
    let value = x.val.exp();
    if !value.is_finite() {
        return Err(ExecError::NumericOverflow);
    }
    if let Some(e) = &x.exp {
        rec.record(exp_bracket(value, x.val, e));
    }
    Ok(c(value))
}

fn exp_bracket(value: f64, x: f64, e: &Arc<SymExpr>) -> BranchPredicate {
    let lower = SymExpr::add(SymExpr::constant(1.0), e.clone());
    let upper = SymExpr::add(
        SymExpr::constant(1.0),
        SymExpr::mul(SymExpr::constant(2.0), e.clone()),
    );
    let at = SymExpr::constant(value);
    BranchPredicate {
        taken: value >= 1.0 + x && value <= 1.0 + 2.0 * x,
        condition: Condition::All(vec![
            Comparison {
                lhs: at.clone(),
                relation: Relation::Ge,
                rhs: lower,
            },
            Comparison {
                lhs: at,
                relation: Relation::Le,
                rhs: upper,
            },
        ]),
    }
}

/// Records `x = 0`, `x ≥ T`, `x ≤ −T` until one holds.
fn saturation_cascade(x: &ConcolicValue, threshold: f64, rec: &mut BranchTrace) {
    let _ = rec.compare(x, &c(0.0), Relation::Eq)
        || rec.compare(x, &c(threshold), Relation::Ge)
        || rec.compare(x, &c(-threshold), Relation::Le);
}

pub fn tanh_act(
    x: &ConcolicValue,
    rec: &mut BranchTrace,
    thresholds: &ActivationThresholds,
) -> Result<ConcolicValue, ExecError> {
    saturation_cascade(x, thresholds.tanh, rec);
    let ex = exp_c(x, rec)?;
    let enx = exp_c(&x.neg(), rec)?;
    ex.sub(&enx)?.div(&ex.add(&enx)?)
}

pub fn sigmoid_act(
    x: &ConcolicValue,
    rec: &mut BranchTrace,
    thresholds: &ActivationThresholds,
) -> Result<ConcolicValue, ExecError> {
    saturation_cascade(x, thresholds.sigmoid, rec);
    let enx = exp_c(&x.neg(), rec)?;
    c(1.0).div(&c(1.0).add(&enx)?)
}

/// Concrete softmax with plain exponentials; records nothing.
pub fn softmax(logits: &Tensor) -> Result<Tensor, ExecError> {
    logits.expect_rank(1, "softmax")?;
    let exps: Vec<f64> = logits.data().iter().map(|v| v.val.exp()).collect();
    let total: f64 = exps.iter().sum();
    if !total.is_finite() || total == 0.0 {
        return Err(ExecError::NumericOverflow);
    }
    let probs: Vec<f64> = exps.iter().map(|e| e / total).collect();
    Ok(Tensor::vector(&probs))
}
