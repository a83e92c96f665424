//! Scalar values and the one implementation of the arithmetic rules.
//!
//! The kernel executor and the host interpreter both evaluate through
//! these functions, so a value computed on the simulated device is
//! bit-identical to the same expression interpreted sequentially.

use crate::frontend::{BinOp, UnOp};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Value {
    I(i64),
    R(f64),
    B(bool),
}

impl Value {
    pub fn as_f64(self) -> f64 {
        match self {
            Value::I(v) => v as f64,
            Value::R(v) => v,
            Value::B(_) => panic!("logical used as number"),
        }
    }

    pub fn as_i64(self) -> i64 {
        match self {
            Value::I(v) => v,
            _ => panic!("non-integer used as index"),
        }
    }

    pub fn truthy(self) -> bool {
        match self {
            Value::B(b) => b,
            _ => panic!("numeric used as logical"),
        }
    }
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ArithError {
    #[error("integer division by zero")]
    DivByZero,
    #[error("negative integer exponent")]
    NegIntPow,
    #[error("integer overflow")]
    Overflow,
    #[error("operands have incompatible types")]
    TypeMismatch,
}

pub fn un_op(op: UnOp, v: Value) -> Result<Value, ArithError> {
    match (op, v) {
        (UnOp::Neg, Value::I(a)) => a.checked_neg().map(Value::I).ok_or(ArithError::Overflow),
        (UnOp::Neg, Value::R(a)) => Ok(Value::R(-a)),
        (UnOp::Not, Value::B(a)) => Ok(Value::B(!a)),
        _ => Err(ArithError::TypeMismatch),
    }
}

/// Fortran numeric semantics: mixed integer/real widens the integer
/// side, except that a real base keeps an integer exponent (power by
/// repeated squaring of the exact exponent). Integer division truncates
/// toward zero; real arithmetic is IEEE-754.
pub fn bin_op(op: BinOp, l: Value, r: Value) -> Result<Value, ArithError> {
    use BinOp::*;
    if matches!(op, And | Or) {
        return match (l, r) {
            (Value::B(a), Value::B(b)) => Ok(Value::B(match op {
                And => a && b,
                Or => a || b,
                _ => unreachable!(),
            })),
            _ => Err(ArithError::TypeMismatch),
        };
    }
    if op == Pow {
        return match (l, r) {
            (Value::I(a), Value::I(b)) => int_pow(a, b),
            (Value::R(a), Value::I(b)) => {
                let e = i32::try_from(b).map_err(|_| ArithError::Overflow)?;
                Ok(Value::R(a.powi(e)))
            }
            (Value::I(a), Value::R(b)) => Ok(Value::R((a as f64).powf(b))),
            (Value::R(a), Value::R(b)) => Ok(Value::R(a.powf(b))),
            _ => Err(ArithError::TypeMismatch),
        };
    }
    match (l, r) {
        (Value::I(a), Value::I(b)) => int_bin(op, a, b),
        (Value::B(_), _) | (_, Value::B(_)) => Err(ArithError::TypeMismatch),
        (a, b) => real_bin(op, a.as_f64(), b.as_f64()),
    }
}

fn int_bin(op: BinOp, a: i64, b: i64) -> Result<Value, ArithError> {
    use BinOp::*;
    Ok(match op {
        Add => Value::I(a.checked_add(b).ok_or(ArithError::Overflow)?),
        Sub => Value::I(a.checked_sub(b).ok_or(ArithError::Overflow)?),
        Mul => Value::I(a.checked_mul(b).ok_or(ArithError::Overflow)?),
        Div => {
            if b == 0 {
                return Err(ArithError::DivByZero);
            }
            Value::I(a / b)
        }
        Eq => Value::B(a == b),
        Ne => Value::B(a != b),
        Lt => Value::B(a < b),
        Le => Value::B(a <= b),
        Gt => Value::B(a > b),
        Ge => Value::B(a >= b),
        Pow | And | Or => unreachable!(),
    })
}

fn real_bin(op: BinOp, a: f64, b: f64) -> Result<Value, ArithError> {
    use BinOp::*;
    Ok(match op {
        Add => Value::R(a + b),
        Sub => Value::R(a - b),
        Mul => Value::R(a * b),
        Div => Value::R(a / b),
        Eq => Value::B(a == b),
        Ne => Value::B(a != b),
        Lt => Value::B(a < b),
        Le => Value::B(a <= b),
        Gt => Value::B(a > b),
        Ge => Value::B(a >= b),
        Pow | And | Or => unreachable!(),
    })
}

fn int_pow(base: i64, exp: i64) -> Result<Value, ArithError> {
    if exp < 0 {
        return Err(ArithError::NegIntPow);
    }
    let e = u32::try_from(exp).map_err(|_| ArithError::Overflow)?;
    base.checked_pow(e).map(Value::I).ok_or(ArithError::Overflow)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integer_division_truncates_toward_zero() {
        assert_eq!(bin_op(BinOp::Div, Value::I(7), Value::I(2)), Ok(Value::I(3)));
        assert_eq!(
            bin_op(BinOp::Div, Value::I(-7), Value::I(2)),
            Ok(Value::I(-3))
        );
    }

    #[test]
    fn division_by_zero_is_an_error_for_integers_only() {
        assert_eq!(
            bin_op(BinOp::Div, Value::I(1), Value::I(0)),
            Err(ArithError::DivByZero)
        );
        let Value::R(inf) = bin_op(BinOp::Div, Value::R(1.0), Value::R(0.0)).unwrap() else {
            panic!()
        };
        assert!(inf.is_infinite());
    }

    #[test]
    fn mixed_arithmetic_widens() {
        assert_eq!(
            bin_op(BinOp::Mul, Value::I(3), Value::R(0.5)),
            Ok(Value::R(1.5))
        );
    }

    #[test]
    fn power_keeps_integer_exponents_exact() {
        assert_eq!(
            bin_op(BinOp::Pow, Value::I(2), Value::I(10)),
            Ok(Value::I(1024))
        );
        assert_eq!(
            bin_op(BinOp::Pow, Value::R(2.0), Value::I(3)),
            Ok(Value::R(8.0))
        );
        assert_eq!(
            bin_op(BinOp::Pow, Value::I(2), Value::I(-1)),
            Err(ArithError::NegIntPow)
        );
    }
}
