//! Symbolic arithmetic expressions over attack variables.

use std::collections::BTreeMap;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use crate::error::ExecError;

/// Values for attack variables, keyed by variable id.
pub type Assignment = BTreeMap<usize, f64>;

/// Expression tree. Children are shared, so a tree built during one forward
/// pass is cheap to clone into many branch predicates.
#[derive(Debug, Clone)]
pub enum SymExpr {
    Const(f64),
    Var(usize),
    Add(Arc<SymExpr>, Arc<SymExpr>),
    Sub(Arc<SymExpr>, Arc<SymExpr>),
    Mul(Arc<SymExpr>, Arc<SymExpr>),
    Div(Arc<SymExpr>, Arc<SymExpr>),
    Neg(Arc<SymExpr>),
}

#[allow(clippy::should_implement_trait)]
impl SymExpr {
    pub fn constant(value: f64) -> Arc<SymExpr> {
        Arc::new(SymExpr::Const(value))
    }

    pub fn var(id: usize) -> Arc<SymExpr> {
        Arc::new(SymExpr::Var(id))
    }

    pub fn as_const(&self) -> Option<f64> {
        match self {
            SymExpr::Const(c) => Some(*c),
            _ => None,
        }
    }

    /// `lhs + rhs` with constant folding and `e + 0` elimination.
    pub fn add(lhs: Arc<SymExpr>, rhs: Arc<SymExpr>) -> Arc<SymExpr> {
        match (lhs.as_const(), rhs.as_const()) {
            (Some(a), Some(b)) => SymExpr::constant(a + b),
            (_, Some(0.0)) => lhs,
            (Some(0.0), _) => rhs,
            _ => Arc::new(SymExpr::Add(lhs, rhs)),
        }
    }

    pub fn sub(lhs: Arc<SymExpr>, rhs: Arc<SymExpr>) -> Arc<SymExpr> {
        match (lhs.as_const(), rhs.as_const()) {
            (Some(a), Some(b)) => SymExpr::constant(a - b),
            (_, Some(0.0)) => lhs,
            (Some(0.0), _) => SymExpr::neg(rhs),
            _ => Arc::new(SymExpr::Sub(lhs, rhs)),
        }
    }

    /// `lhs * rhs` with constant folding and the `e*1`, `e*0` identities.
    pub fn mul(lhs: Arc<SymExpr>, rhs: Arc<SymExpr>) -> Arc<SymExpr> {
        match (lhs.as_const(), rhs.as_const()) {
            (Some(a), Some(b)) => SymExpr::constant(a * b),
            (_, Some(0.0)) => SymExpr::constant(0.0),
            (Some(0.0), _) => SymExpr::constant(0.0),
            (_, Some(1.0)) => lhs,
            (Some(1.0), _) => rhs,
            _ => Arc::new(SymExpr::Mul(lhs, rhs)),
        }
    }

    pub fn div(lhs: Arc<SymExpr>, rhs: Arc<SymExpr>) -> Arc<SymExpr> {
        match (lhs.as_const(), rhs.as_const()) {
            (Some(a), Some(b)) if b != 0.0 => SymExpr::constant(a / b),
            (_, Some(1.0)) => lhs,
            _ => Arc::new(SymExpr::Div(lhs, rhs)),
        }
    }

    pub fn neg(operand: Arc<SymExpr>) -> Arc<SymExpr> {
        match operand.as_const() {
            Some(a) => SymExpr::constant(-a),
            None => Arc::new(SymExpr::Neg(operand)),
        }
    }

    pub fn eval(&self, assignment: &Assignment) -> Result<f64, ExecError> {
        Ok(match self {
            SymExpr::Const(c) => *c,
            SymExpr::Var(id) => *assignment.get(id).ok_or(ExecError::UnboundVar(*id))?,
            SymExpr::Add(a, b) => a.eval(assignment)? + b.eval(assignment)?,
            SymExpr::Sub(a, b) => a.eval(assignment)? - b.eval(assignment)?,
            SymExpr::Mul(a, b) => a.eval(assignment)? * b.eval(assignment)?,
            SymExpr::Div(a, b) => {
                let num = a.eval(assignment)?;
                let den = b.eval(assignment)?;
                if den == 0.0 {
                    return Err(ExecError::DivByZero);
                }
                num / den
            }
            SymExpr::Neg(a) => -a.eval(assignment)?,
        })
    }

    /// Inserts every variable id referenced by the expression into `out`.
    pub fn collect_vars(&self, out: &mut std::collections::BTreeSet<usize>) {
        match self {
            SymExpr::Const(_) => {}
            SymExpr::Var(id) => {
                out.insert(*id);
            }
            SymExpr::Add(a, b) | SymExpr::Sub(a, b) | SymExpr::Mul(a, b) | SymExpr::Div(a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
            SymExpr::Neg(a) => a.collect_vars(out),
        }
    }

    /// Number of nodes in the tree, counting shared subtrees once per use.
    pub fn size(&self) -> usize {
        match self {
            SymExpr::Const(_) | SymExpr::Var(_) => 1,
            SymExpr::Add(a, b) | SymExpr::Sub(a, b) | SymExpr::Mul(a, b) | SymExpr::Div(a, b) => {
                1 + a.size() + b.size()
            }
            SymExpr::Neg(a) => 1 + a.size(),
        }
    }

    /// Decomposes the expression into `constant + Σ coeff·x_id` when it is
    /// affine in the attack variables. Returns `None` for products of
    /// variables or division by a variable.
    pub fn affine(&self) -> Option<Affine> {
        match self {
            SymExpr::Const(c) => Some(Affine::constant(*c)),
            SymExpr::Var(id) => {
                let mut a = Affine::constant(0.0);
                a.coeffs.insert(*id, 1.0);
                Some(a)
            }
            SymExpr::Add(a, b) => Some(a.affine()?.combine(&b.affine()?, 1.0)),
            SymExpr::Sub(a, b) => Some(a.affine()?.combine(&b.affine()?, -1.0)),
            SymExpr::Neg(a) => Some(a.affine()?.scale(-1.0)),
            SymExpr::Mul(a, b) => {
                let (la, lb) = (a.affine()?, b.affine()?);
                if la.coeffs.is_empty() {
                    Some(lb.scale(la.constant))
                } else if lb.coeffs.is_empty() {
                    Some(la.scale(lb.constant))
                } else {
                    None
                }
            }
            SymExpr::Div(a, b) => {
                let lb = b.affine()?;
                if lb.coeffs.is_empty() && lb.constant != 0.0 {
                    Some(a.affine()?.scale(1.0 / lb.constant))
                } else {
                    None
                }
            }
        }
    }

    fn tag(&self) -> u8 {
        match self {
            SymExpr::Const(_) => 0,
            SymExpr::Var(_) => 1,
            SymExpr::Add(..) => 2,
            SymExpr::Sub(..) => 3,
            SymExpr::Mul(..) => 4,
            SymExpr::Div(..) => 5,
            SymExpr::Neg(_) => 6,
        }
    }
}

/// `constant + Σ coeffs[id]·x_id`, used for inspecting linear constraints.
#[derive(Debug, Clone, PartialEq)]
pub struct Affine {
    pub constant: f64,
    pub coeffs: BTreeMap<usize, f64>,
}

impl Affine {
    fn constant(c: f64) -> Self {
        Affine {
            constant: c,
            coeffs: BTreeMap::new(),
        }
    }

    fn scale(mut self, k: f64) -> Self {
        self.constant *= k;
        for v in self.coeffs.values_mut() {
            *v *= k;
        }
        self
    }

    fn combine(mut self, other: &Affine, sign: f64) -> Self {
        self.constant += sign * other.constant;
        for (id, c) in &other.coeffs {
            *self.coeffs.entry(*id).or_insert(0.0) += sign * c;
        }
        self
    }

    pub fn coeff(&self, id: usize) -> f64 {
        self.coeffs.get(&id).copied().unwrap_or(0.0)
    }
}

// Structural equality: constants compare by bit pattern so the relation is
// reflexive and consistent with `Hash`.
impl PartialEq for SymExpr {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (SymExpr::Const(a), SymExpr::Const(b)) => a.to_bits() == b.to_bits(),
            (SymExpr::Var(a), SymExpr::Var(b)) => a == b,
            (SymExpr::Add(a1, b1), SymExpr::Add(a2, b2))
            | (SymExpr::Sub(a1, b1), SymExpr::Sub(a2, b2))
            | (SymExpr::Mul(a1, b1), SymExpr::Mul(a2, b2))
            | (SymExpr::Div(a1, b1), SymExpr::Div(a2, b2)) => {
                (Arc::ptr_eq(a1, a2) || a1 == a2) && (Arc::ptr_eq(b1, b2) || b1 == b2)
            }
            (SymExpr::Neg(a), SymExpr::Neg(b)) => Arc::ptr_eq(a, b) || a == b,
            _ => false,
        }
    }
}

impl Eq for SymExpr {}

impl Hash for SymExpr {
    fn hash<H: Hasher>(&self, state: &mut H) {
        state.write_u8(self.tag());
        match self {
            SymExpr::Const(c) => state.write_u64(c.to_bits()),
            SymExpr::Var(id) => state.write_usize(*id),
            SymExpr::Add(a, b) | SymExpr::Sub(a, b) | SymExpr::Mul(a, b) | SymExpr::Div(a, b) => {
                a.hash(state);
                b.hash(state);
            }
            SymExpr::Neg(a) => a.hash(state),
        }
    }
}

/// Writes `value` as an SMT-LIB decimal: shortest round-trip digits, always
/// with a fractional part, negatives as `(- lit)`.
pub fn write_decimal(f: &mut impl fmt::Write, value: f64) -> fmt::Result {
    let magnitude = value.abs();
    let mut digits = format!("{magnitude}");
    if !digits.contains('.') {
        digits.push_str(".0");
    }
    if value.is_sign_negative() && magnitude != 0.0 {
        write!(f, "(- {digits})")
    } else {
        f.write_str(&digits)
    }
}

/// SMT-LIB prefix notation; variables print as `x<id>`.
impl fmt::Display for SymExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SymExpr::Const(c) => write_decimal(f, *c),
            SymExpr::Var(id) => write!(f, "x{id}"),
            SymExpr::Add(a, b) => write!(f, "(+ {a} {b})"),
            SymExpr::Sub(a, b) => write!(f, "(- {a} {b})"),
            SymExpr::Mul(a, b) => write!(f, "(* {a} {b})"),
            SymExpr::Div(a, b) => write!(f, "(/ {a} {b})"),
            SymExpr::Neg(a) => write!(f, "(- {a})"),
        }
    }
}
