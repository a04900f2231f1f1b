use std::sync::Arc;

use super::expr::SymExpr;
use crate::error::ExecError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
    Div,
}

/// A concrete number paired with its symbolic expression over the attack
/// variables. `exp` is `None` for values that do not depend on any variable.
#[derive(Debug, Clone)]
pub struct ConcolicValue {
    pub val: f64,
    pub exp: Option<Arc<SymExpr>>,
}

impl ConcolicValue {
    pub fn constant(val: f64) -> Self {
        ConcolicValue { val, exp: None }
    }

    /// Seeds attack variable `id` at concrete value `val`.
    pub fn variable(val: f64, id: usize) -> Self {
        ConcolicValue {
            val,
            exp: Some(SymExpr::var(id)),
        }
    }

    pub fn is_symbolic(&self) -> bool {
        self.exp.is_some()
    }

    /// Symbolic view of the value, materialising constants on demand.
    pub fn expr(&self) -> Arc<SymExpr> {
        match &self.exp {
            Some(e) => e.clone(),
            None => SymExpr::constant(self.val),
        }
    }

    /// Replaces the symbolic part by the concrete value.
    pub fn downgrade(self) -> Self {
        ConcolicValue::constant(self.val)
    }

    pub fn arith(&self, rhs: &ConcolicValue, op: ArithOp) -> Result<ConcolicValue, ExecError> {
        let val = match op {
            ArithOp::Add => self.val + rhs.val,
            ArithOp::Sub => self.val - rhs.val,
            ArithOp::Mul => self.val * rhs.val,
            ArithOp::Div => {
                if rhs.val == 0.0 {
                    return Err(ExecError::DivByZero);
                }
                self.val / rhs.val
            }
        };
        if !val.is_finite() {
            return Err(ExecError::NumericOverflow);
        }
        if !self.is_symbolic() && !rhs.is_symbolic() {
            return Ok(ConcolicValue::constant(val));
        }
        let (l, r) = (self.expr(), rhs.expr());
        let exp = match op {
            ArithOp::Add => SymExpr::add(l, r),
            ArithOp::Sub => SymExpr::sub(l, r),
            ArithOp::Mul => SymExpr::mul(l, r),
            ArithOp::Div => SymExpr::div(l, r),
        };
        // identity elimination can collapse the tree to a constant (e·0)
        let exp = if exp.as_const().is_some() {
            None
        } else {
            Some(exp)
        };
        Ok(ConcolicValue { val, exp })
    }

    pub fn add(&self, rhs: &ConcolicValue) -> Result<ConcolicValue, ExecError> {
        self.arith(rhs, ArithOp::Add)
    }

    pub fn sub(&self, rhs: &ConcolicValue) -> Result<ConcolicValue, ExecError> {
        self.arith(rhs, ArithOp::Sub)
    }

    pub fn mul(&self, rhs: &ConcolicValue) -> Result<ConcolicValue, ExecError> {
        self.arith(rhs, ArithOp::Mul)
    }

    pub fn div(&self, rhs: &ConcolicValue) -> Result<ConcolicValue, ExecError> {
        self.arith(rhs, ArithOp::Div)
    }

    pub fn neg(&self) -> ConcolicValue {
        ConcolicValue {
            val: -self.val,
            exp: self.exp.clone().map(SymExpr::neg),
        }
    }
}

impl From<f64> for ConcolicValue {
    fn from(val: f64) -> Self {
        ConcolicValue::constant(val)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::concolic::expr::Assignment;
    use proptest::prelude::*;

    #[test]
    fn constants_stay_constant() {
        let r = ConcolicValue::constant(5.0)
            .mul(&ConcolicValue::constant(0.0))
            .unwrap();
        assert_eq!(r.val, 0.0);
        assert!(r.exp.is_none());
    }

    #[test]
    fn self_subtraction_keeps_tree() {
        let x = ConcolicValue::variable(2.0, 0);
        let r = x.sub(&x).unwrap();
        assert_eq!(r.val, 0.0);
        let e = r.exp.unwrap();
        assert!(matches!(*e, SymExpr::Sub(..)));
        let a: Assignment = [(0, 2.0)].into_iter().collect();
        assert_eq!(e.eval(&a).unwrap(), 0.0);
    }

    #[test]
    fn division_by_concrete_zero() {
        let x = ConcolicValue::variable(1.0, 0);
        assert_eq!(
            x.div(&ConcolicValue::constant(0.0)).unwrap_err(),
            ExecError::DivByZero
        );
    }

    #[test]
    fn overflow_is_reported() {
        let big = ConcolicValue::constant(f64::MAX);
        assert_eq!(big.add(&big).unwrap_err(), ExecError::NumericOverflow);
    }

    #[test]
    fn builds_running_example_expression() {
        // h2[0] = 0.34·1 + 0.304·2 + x·0.1 + (−0.4)·0.3 + 0.2 at x = −0.8
        let x = ConcolicValue::variable(-0.8, 0);
        let c = |v: f64| ConcolicValue::constant(v);
        let mut h = c(0.0);
        for (a, w) in [(c(0.34), 1.0), (c(0.304), 2.0), (x, 0.1), (c(-0.4), 0.3)] {
            h = h.add(&a.mul(&c(w)).unwrap()).unwrap();
        }
        h = h.add(&c(0.2)).unwrap();
        assert!((h.val - 0.948).abs() < 1e-12);
        let aff = h.exp.unwrap().affine().unwrap();
        assert!((aff.constant - 1.028).abs() < 1e-9);
        assert!((aff.coeff(0) - 0.1).abs() < 1e-9);
    }

    #[derive(Debug, Clone)]
    enum Step {
        Op(ArithOp, usize, f64),
        Neg,
    }

    fn step() -> impl Strategy<Value = Step> {
        prop_oneof![
            (
                prop_oneof![
                    Just(ArithOp::Add),
                    Just(ArithOp::Sub),
                    Just(ArithOp::Mul),
                    Just(ArithOp::Div)
                ],
                0usize..4,
                -3.0f64..3.0
            )
                .prop_map(|(op, i, c)| Step::Op(op, i, c)),
            Just(Step::Neg),
        ]
    }

    proptest! {
        #[test]
        fn concolic_consistency(
            seeds in proptest::collection::vec(-2.0f64..2.0, 3),
            steps in proptest::collection::vec(step(), 1..40),
        ) {
            let vars: Vec<ConcolicValue> = seeds
                .iter()
                .enumerate()
                .map(|(i, v)| ConcolicValue::variable(*v, i))
                .collect();
            let assignment: Assignment = seeds.iter().copied().enumerate().collect();
            let mut acc = vars[0].clone();
            for s in steps {
                let next = match s {
                    Step::Neg => Ok(acc.neg()),
                    Step::Op(op, i, c) => {
                        // operand: one of the seeds or a constant
                        let rhs = if i < vars.len() { vars[i].clone() } else { ConcolicValue::constant(c) };
                        acc.arith(&rhs, op)
                    }
                };
                match next {
                    Ok(v) if v.val.abs() < 1e6 => acc = v,
                    _ => break,
                }
            }
            if let Some(e) = &acc.exp {
                let ev = e.eval(&assignment).unwrap();
                let tol = 1e-9 * acc.val.abs().max(1.0);
                prop_assert!((ev - acc.val).abs() <= tol, "eval {} vs val {}", ev, acc.val);
            }
        }
    }
}
