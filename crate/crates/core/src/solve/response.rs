//! Parsing of solver responses: the status line and `(get-model)` output.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};

use crate::concolic::Assignment;

#[derive(Debug, Clone, PartialEq)]
enum Sexp {
    Atom(String),
    List(Vec<Sexp>),
}

fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut chars = text.chars().peekable();
    while let Some(&ch) = chars.peek() {
        match ch {
            '(' | ')' => {
                tokens.push(ch.to_string());
                chars.next();
            }
            ';' => {
                // comment to end of line
                for c in chars.by_ref() {
                    if c == '\n' {
                        break;
                    }
                }
            }
            '"' | '|' => {
                let close = ch;
                let mut tok = String::new();
                tok.push(ch);
                chars.next();
                for c in chars.by_ref() {
                    tok.push(c);
                    if c == close {
                        break;
                    }
                }
                tokens.push(tok);
            }
            c if c.is_whitespace() => {
                chars.next();
            }
            _ => {
                let mut tok = String::new();
                while let Some(&c) = chars.peek() {
                    if c.is_whitespace() || c == '(' || c == ')' {
                        break;
                    }
                    tok.push(c);
                    chars.next();
                }
                tokens.push(tok);
            }
        }
    }
    tokens
}

fn parse_sexps(tokens: &[String]) -> Result<Vec<Sexp>, String> {
    let mut stack: Vec<Vec<Sexp>> = vec![Vec::new()];
    for tok in tokens {
        match tok.as_str() {
            "(" => stack.push(Vec::new()),
            ")" => {
                let done = stack.pop().ok_or("unbalanced ')'")?;
                stack
                    .last_mut()
                    .ok_or("unbalanced ')'")?
                    .push(Sexp::List(done));
            }
            _ => stack.last_mut().unwrap().push(Sexp::Atom(tok.clone())),
        }
    }
    if stack.len() != 1 {
        return Err("unbalanced '('".into());
    }
    Ok(stack.pop().unwrap())
}

/// Solver verdict on a query.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Sat,
    Unsat,
    Unknown,
    Error,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedResponse {
    pub status: Status,
    pub model: Option<Assignment>,
    /// Set when a model value was an approximation printed by the solver.
    pub approximate: bool,
    pub diagnostic: Option<String>,
}

impl ParsedResponse {
    fn error(msg: impl Into<String>) -> Self {
        ParsedResponse {
            status: Status::Error,
            model: None,
            approximate: false,
            diagnostic: Some(msg.into()),
        }
    }
}

/// Interprets the stdout of a `(check-sat)(get-model)` run.
pub fn parse_response(text: &str) -> ParsedResponse {
    let sexps = match parse_sexps(&tokenize(text)) {
        Ok(s) => s,
        Err(e) => return ParsedResponse::error(format!("unparsable solver output: {e}")),
    };
    let mut items = sexps.into_iter();
    let status = match items.next() {
        Some(Sexp::Atom(a)) if a == "sat" => Status::Sat,
        Some(Sexp::Atom(a)) if a == "unsat" => Status::Unsat,
        Some(Sexp::Atom(a)) if a == "unknown" || a == "timeout" => Status::Unknown,
        Some(other) => return ParsedResponse::error(format!("unexpected solver output {other:?}")),
        None => return ParsedResponse::error("empty solver output"),
    };
    if status != Status::Sat {
        return ParsedResponse {
            status,
            model: None,
            approximate: false,
            diagnostic: None,
        };
    }
    let Some(model) = items.next() else {
        return ParsedResponse::error("sat without a model");
    };
    match parse_model(&model) {
        Ok((model, approximate)) => ParsedResponse {
            status,
            model: Some(model),
            approximate,
            diagnostic: None,
        },
        Err(e) => ParsedResponse::error(format!("bad model: {e}")),
    }
}

fn parse_model(sexp: &Sexp) -> Result<(Assignment, bool), String> {
    let Sexp::List(entries) = sexp else {
        return Err(format!("expected a model list, got {sexp:?}"));
    };
    let mut assignment = Assignment::new();
    let mut approximate = false;
    for entry in entries {
        match entry {
            Sexp::Atom(a) if a == "model" => continue,
            Sexp::List(def) => {
                let [Sexp::Atom(kw), Sexp::Atom(name), Sexp::List(args), Sexp::Atom(sort), value] =
                    def.as_slice()
                else {
                    return Err(format!("unexpected model entry {entry:?}"));
                };
                if kw != "define-fun" || !args.is_empty() {
                    return Err(format!("unexpected model entry {entry:?}"));
                }
                let Some(id) = name.strip_prefix('x').and_then(|n| n.parse::<usize>().ok()) else {
                    continue;
                };
                if sort != "Real" && sort != "Int" {
                    return Err(format!("variable {name} has sort {sort}"));
                }
                let (value, approx) = real_value(value)?;
                approximate |= approx;
                assignment.insert(id, to_f64(&value)?);
            }
            other => return Err(format!("unexpected model entry {other:?}")),
        }
    }
    Ok((assignment, approximate))
}

/// Nearest `f64` to an exact rational.
fn to_f64(r: &BigRational) -> Result<f64, String> {
    r.to_f64()
        .filter(|v| v.is_finite())
        .ok_or_else(|| format!("model value {r} is not representable"))
}

fn decimal(atom: &str) -> Result<(BigRational, bool), String> {
    let (body, approx) = match atom.strip_suffix('?') {
        Some(b) => (b, true),
        None => (atom, false),
    };
    let (int_part, frac_part) = body.split_once('.').unwrap_or((body, ""));
    let all_digits = |s: &str| s.chars().all(|c| c.is_ascii_digit());
    if int_part.is_empty() || !all_digits(int_part) || !all_digits(frac_part) {
        return Err(format!("not a numeral: {atom}"));
    }
    let numer: BigInt = format!("{int_part}{frac_part}")
        .parse()
        .map_err(|e| format!("{e}"))?;
    let denom = num_traits::pow(BigInt::from(10), frac_part.len());
    Ok((BigRational::new(numer, denom), approx))
}

fn real_value(sexp: &Sexp) -> Result<(BigRational, bool), String> {
    match sexp {
        Sexp::Atom(a) => decimal(a),
        Sexp::List(items) => match items.as_slice() {
            [Sexp::Atom(op), x] if op == "-" => {
                let (v, approx) = real_value(x)?;
                Ok((-v, approx))
            }
            [Sexp::Atom(op), p, q] if op == "/" => {
                let (p, ap) = real_value(p)?;
                let (q, aq) = real_value(q)?;
                if q.is_zero() {
                    return Err("division by zero in model".into());
                }
                Ok((p / q, ap || aq))
            }
            _ => Err(format!("unsupported model value {sexp:?}")),
        },
    }
}
