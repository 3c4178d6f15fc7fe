use std::collections::BTreeMap;

use thiserror::Error;

use super::ast::{BinOp, Expr, ExprKind, UnOp};
use crate::value::Value;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("unbound variable ${0}")]
    UnboundVariable(String),
    #[error("type mismatch: {op} needs {need}, got {got}")]
    TypeMismatch { op: String, need: String, got: String },
}

pub type Bindings = BTreeMap<String, Value>;

/// Evaluate an expression against variable bindings. Arithmetic is IEEE
/// double (division by zero yields inf/NaN rather than an error); `and`
/// and `or` short-circuit; ordering comparisons work on numbers and on
/// strings, equality on any pair of values of the same type.
pub fn eval(expr: &Expr, bindings: &Bindings) -> Result<Value, EvalError> {
    match &expr.kind {
        ExprKind::Lit(v) => Ok(v.clone()),
        ExprKind::Var(name) => bindings
            .get(name)
            .cloned()
            .ok_or_else(|| EvalError::UnboundVariable(name.clone())),
        ExprKind::Unary(UnOp::Not, inner) => {
            let v = eval(inner, bindings)?;
            Ok(Value::Bool(!expect_bool("not", &v)?))
        }
        ExprKind::Unary(UnOp::Neg, inner) => {
            let v = eval(inner, bindings)?;
            Ok(Value::Number(-expect_number("-", &v)?))
        }
        ExprKind::Binary(op, lhs, rhs) => match op {
            BinOp::And => {
                if !expect_bool("and", &eval(lhs, bindings)?)? {
                    return Ok(Value::Bool(false));
                }
                Ok(Value::Bool(expect_bool("and", &eval(rhs, bindings)?)?))
            }
            BinOp::Or => {
                if expect_bool("or", &eval(lhs, bindings)?)? {
                    return Ok(Value::Bool(true));
                }
                Ok(Value::Bool(expect_bool("or", &eval(rhs, bindings)?)?))
            }
            BinOp::Eq | BinOp::Ne => {
                let l = eval(lhs, bindings)?;
                let r = eval(rhs, bindings)?;
                let eq = values_equal(&l, &r);
                Ok(Value::Bool(if *op == BinOp::Eq { eq } else { !eq }))
            }
            BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => {
                let l = eval(lhs, bindings)?;
                let r = eval(rhs, bindings)?;
                let ord = order(op.symbol(), &l, &r)?;
                Ok(Value::Bool(match op {
                    BinOp::Lt => ord == std::cmp::Ordering::Less,
                    BinOp::Le => ord != std::cmp::Ordering::Greater,
                    BinOp::Gt => ord == std::cmp::Ordering::Greater,
                    BinOp::Ge => ord != std::cmp::Ordering::Less,
                    _ => unreachable!(),
                }))
            }
            BinOp::Add | BinOp::Sub | BinOp::Mul | BinOp::Div => {
                let l = expect_number(op.symbol(), &eval(lhs, bindings)?)?;
                let r = expect_number(op.symbol(), &eval(rhs, bindings)?)?;
                Ok(Value::Number(match op {
                    BinOp::Add => l + r,
                    BinOp::Sub => l - r,
                    BinOp::Mul => l * r,
                    BinOp::Div => l / r,
                    _ => unreachable!(),
                }))
            }
        },
    }
}

/// Like [`eval`] but insists the result is a bool, for rule conditions
/// and classifier predicates.
pub fn eval_condition(expr: &Expr, bindings: &Bindings) -> Result<bool, EvalError> {
    expect_bool("condition", &eval(expr, bindings)?)
}

fn values_equal(l: &Value, r: &Value) -> bool {
    match (l, r) {
        (Value::Number(a), Value::Number(b)) => a == b,
        (Value::Str(a), Value::Str(b)) => a == b,
        (Value::Bool(a), Value::Bool(b)) => a == b,
        _ => false,
    }
}

fn order(op: &str, l: &Value, r: &Value) -> Result<std::cmp::Ordering, EvalError> {
    match (l, r) {
        (Value::Number(a), Value::Number(b)) => {
            a.partial_cmp(b).ok_or_else(|| EvalError::TypeMismatch {
                op: op.to_string(),
                need: "comparable numbers".to_string(),
                got: "NaN".to_string(),
            })
        }
        (Value::Str(a), Value::Str(b)) => Ok(a.cmp(b)),
        _ => Err(EvalError::TypeMismatch {
            op: op.to_string(),
            need: "two numbers or two strings".to_string(),
            got: format!("{} and {}", l.type_name(), r.type_name()),
        }),
    }
}

fn expect_bool(op: &str, v: &Value) -> Result<bool, EvalError> {
    v.as_bool().ok_or_else(|| EvalError::TypeMismatch {
        op: op.to_string(),
        need: "bool".to_string(),
        got: v.type_name().to_string(),
    })
}

fn expect_number(op: &str, v: &Value) -> Result<f64, EvalError> {
    v.as_number().ok_or_else(|| EvalError::TypeMismatch {
        op: op.to_string(),
        need: "number".to_string(),
        got: v.type_name().to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::super::parser::parse;
    use super::*;

    fn cond(src: &str, binds: &[(&str, Value)]) -> Result<bool, EvalError> {
        let full = format!(
            "rule r priority 1 ttl 5 s {{ when fact($s, \"x\", 1) where {src} then publish context/t {{ a: 1 }} }}"
        );
        let rs = parse(&full).expect("test source parses");
        let expr = rs.rules[0].condition.clone().unwrap();
        let bindings: Bindings =
            binds.iter().map(|(k, v)| (k.to_string(), v.clone())).collect();
        eval_condition(&expr, &bindings)
    }

    #[test]
    fn arithmetic_and_comparison() {
        assert_eq!(cond("(1 + 2) * 3 == 9", &[]), Ok(true));
        assert_eq!(cond("10 / 4 > 2.4", &[]), Ok(true));
        assert_eq!(cond("$v - 1 >= 0", &[("v", Value::Number(1.0))]), Ok(true));
        assert_eq!(cond("2 - 3 - 4 == -5", &[]), Ok(true));
    }

    #[test]
    fn division_by_zero_is_ieee() {
        assert_eq!(cond("1 / 0 > 1000000", &[]), Ok(true));
        // NaN comparisons error rather than silently pick an answer.
        assert!(matches!(cond("0 / 0 > 1", &[]), Err(EvalError::TypeMismatch { .. })));
        assert_eq!(cond("0 / 0 == 0 / 0", &[]), Ok(false));
    }

    #[test]
    fn short_circuit_skips_rhs_errors() {
        assert_eq!(cond("false and $missing > 1", &[]), Ok(false));
        assert_eq!(cond("true or $missing > 1", &[]), Ok(true));
        assert_eq!(
            cond("true and $missing > 1", &[]),
            Err(EvalError::UnboundVariable("missing".to_string()))
        );
    }

    #[test]
    fn string_comparison_is_lexicographic() {
        assert_eq!(cond("\"a\" < \"b\"", &[]), Ok(true));
        assert_eq!(cond("$r == \"west\"", &[("r", Value::Str("west".into()))]), Ok(true));
    }

    #[test]
    fn cross_type_equality_is_false_not_an_error() {
        assert_eq!(cond("1 == \"1\"", &[]), Ok(false));
        assert_eq!(cond("1 != \"1\"", &[]), Ok(true));
        assert_eq!(cond("true == 1", &[]), Ok(false));
    }

    #[test]
    fn type_errors_are_reported() {
        assert!(matches!(cond("1 and true", &[]), Err(EvalError::TypeMismatch { .. })));
        assert!(matches!(cond("\"x\" + 1 == 2", &[]), Err(EvalError::TypeMismatch { .. })));
        assert!(matches!(cond("not 5", &[]), Err(EvalError::TypeMismatch { .. })));
        assert!(matches!(cond("1 < \"a\"", &[]), Err(EvalError::TypeMismatch { .. })));
    }

    #[test]
    fn non_bool_condition_is_rejected() {
        assert!(matches!(cond("1 + 1", &[]), Err(EvalError::TypeMismatch { .. })));
    }
}
