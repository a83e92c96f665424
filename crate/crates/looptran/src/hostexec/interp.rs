//! Sequential statement interpreter with Fortran semantics. Array
//! elements route through host-side buffer accesses, so host/device
//! coherence falls out of the residency automaton.

use super::runtime::Runtime;
use super::{ExecError, Result};
use crate::frontend::{
    ElemTy, Expr, ExprKind, Intent, Name, Stmt, StmtKind, SymbolTable,
};
use crate::vdevice::value::{bin_op, un_op, Value};
use crate::vdevice::{BufferId, Side};
use std::collections::HashMap;

/// One subroutine activation: scalar values plus array-to-buffer
/// bindings.
#[derive(Debug, Clone, Default)]
pub struct Env {
    pub scalars: HashMap<Name, Value>,
    pub arrays: HashMap<Name, BufferId>,
}

impl Env {
    pub fn bind_scalar(&mut self, name: impl Into<Name>, v: Value) {
        self.scalars.insert(name.into(), v);
    }

    pub fn bind_array(&mut self, name: impl Into<Name>, id: BufferId) {
        self.arrays.insert(name.into(), id);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(super) enum Flow {
    Normal,
    Returned,
}

pub(super) fn exec_stmts(
    rt: &mut Runtime,
    syms: &SymbolTable,
    env: &mut Env,
    stmts: &[Stmt],
) -> Result<Flow> {
    for st in stmts {
        match &st.kind {
            StmtKind::Comment(_) => {}
            StmtKind::Return => return Ok(Flow::Returned),
            StmtKind::Assign { target, value } => {
                let v = eval_expr(rt, syms, env, value)?;
                let sym = syms.get(&target.name).expect("parser checked");
                if sym.intent == Intent::In {
                    return Err(ExecError::WriteToIntentIn {
                        name: target.name.as_str().to_string(),
                        line: target.line,
                    });
                }
                if target.indices.is_empty() {
                    let v = coerce(sym.ty, v);
                    env.scalars.insert(target.name.clone(), v);
                } else {
                    let mut idx = Vec::with_capacity(target.indices.len());
                    for e in &target.indices {
                        idx.push(eval_expr(rt, syms, env, e)?.as_i64());
                    }
                    let id = *env
                        .arrays
                        .get(&target.name)
                        .ok_or_else(|| ExecError::Unbound {
                            name: target.name.as_str().to_string(),
                            line: target.line,
                        })?;
                    let v = coerce(sym.ty, v);
                    rt.device.write_elem(id, Side::Host, &idx, v)?;
                }
            }
            StmtKind::Do {
                var,
                lower,
                upper,
                body,
            } => {
                let lo = eval_expr(rt, syms, env, lower)?.as_i64();
                let hi = eval_expr(rt, syms, env, upper)?.as_i64();
                let trips = (hi - lo + 1).max(0);
                for k in 0..trips {
                    env.scalars.insert(var.clone(), Value::I(lo + k));
                    if exec_stmts(rt, syms, env, body)? == Flow::Returned {
                        return Ok(Flow::Returned);
                    }
                }
                // Fortran leaves the index one step past the last trip.
                env.scalars.insert(var.clone(), Value::I(lo + trips));
            }
            StmtKind::If {
                cond,
                then_body,
                else_body,
            } => {
                let body = if eval_expr(rt, syms, env, cond)?.truthy() {
                    then_body
                } else {
                    else_body
                };
                if exec_stmts(rt, syms, env, body)? == Flow::Returned {
                    return Ok(Flow::Returned);
                }
            }
            StmtKind::Call { name, args } => {
                rt.dispatch_env_call(name, args, env, syms, st.span.0)?;
            }
        }
    }
    Ok(Flow::Normal)
}

fn coerce(ty: ElemTy, v: Value) -> Value {
    match (ty, v) {
        (ElemTy::Real64, Value::I(i)) => Value::R(i as f64),
        _ => v,
    }
}

pub(super) fn eval_expr(
    rt: &mut Runtime,
    syms: &SymbolTable,
    env: &mut Env,
    e: &Expr,
) -> Result<Value> {
    match &e.kind {
        ExprKind::IntLit(v) => Ok(Value::I(*v)),
        ExprKind::RealLit(v) => Ok(Value::R(*v)),
        ExprKind::Var(n) => env.scalars.get(n).copied().ok_or_else(|| ExecError::Unbound {
            name: n.as_str().to_string(),
            line: e.line,
        }),
        ExprKind::Elem(n, indices) => {
            let mut idx = Vec::with_capacity(indices.len());
            for i in indices {
                idx.push(eval_expr(rt, syms, env, i)?.as_i64());
            }
            let id = *env.arrays.get(n).ok_or_else(|| ExecError::Unbound {
                name: n.as_str().to_string(),
                line: e.line,
            })?;
            Ok(rt.device.read_elem(id, Side::Host, &idx)?)
        }
        ExprKind::Un { op, operand } => {
            let v = eval_expr(rt, syms, env, operand)?;
            un_op(*op, v).map_err(|err| ExecError::Arith {
                line: e.line,
                message: err.to_string(),
            })
        }
        ExprKind::Bin { op, lhs, rhs } => {
            let l = eval_expr(rt, syms, env, lhs)?;
            let r = eval_expr(rt, syms, env, rhs)?;
            bin_op(*op, l, r).map_err(|err| ExecError::Arith {
                line: e.line,
                message: err.to_string(),
            })
        }
    }
}
