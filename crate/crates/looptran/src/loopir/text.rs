//! Diff-stable textual dump of a mapped kernel. The format is documented
//! in `docs/kernel-ir.md`; golden files in the test suite pin it.

use super::{KExpr, KExprKind, KInstr, LoopKernel};
use crate::frontend::{BinOp, ElemTy, UnOp};
use std::fmt::Write;

pub fn emit_kernel_text(kernel: &LoopKernel) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "kernel {}", kernel.name);
    for p in &kernel.params {
        let ty = match p.ty {
            ElemTy::Integer => "integer",
            ElemTy::Real64 => "real64",
        };
        let mode = match (p.reads, p.writes) {
            (true, true) => "inout",
            (false, true) => "out",
            _ => "in",
        };
        if p.is_array() {
            let dims: Vec<String> = p
                .dims
                .iter()
                .map(|(lo, hi)| format!("{}:{}", expr(lo, kernel), expr(hi, kernel)))
                .collect();
            let _ = writeln!(
                out,
                "  param {}: {ty} array ({}) [{mode}]",
                p.name,
                dims.join(", ")
            );
        } else {
            let _ = writeln!(out, "  param {}: {ty} scalar [in]", p.name);
        }
    }
    for a in &kernel.assumptions {
        let _ = writeln!(
            out,
            "  assume {} {} {}",
            a.variable,
            a.relation.symbol(),
            a.bound
        );
    }
    for (i, d) in kernel.domains.iter().enumerate() {
        let grid = kernel
            .grid_axes
            .iter()
            .position(|&ax| ax == i)
            .map(|ax| format!(" [grid axis {ax}]"))
            .unwrap_or_else(|| " [thread loop]".to_string());
        let _ = writeln!(
            out,
            "  domain {}: {} .. {}{grid}",
            d.var,
            expr(&d.lower, kernel),
            expr(&d.upper, kernel)
        );
    }
    let _ = writeln!(out, "  body:");
    for i in &kernel.body {
        instr(i, kernel, 2, &mut out);
    }
    out
}

fn instr(i: &KInstr, k: &LoopKernel, depth: usize, out: &mut String) {
    let pad = "  ".repeat(depth);
    match i {
        KInstr::SetLocal { local, value, .. } => {
            let _ = writeln!(out, "{pad}{} = {}", k.locals[*local].name, expr(value, k));
        }
        KInstr::Store {
            param,
            indices,
            value,
            ..
        } => {
            let idx: Vec<String> = indices.iter().map(|e| expr(e, k)).collect();
            let _ = writeln!(
                out,
                "{pad}store {}({}) = {}",
                k.params[*param].name,
                idx.join(","),
                expr(value, k)
            );
        }
        KInstr::If {
            cond,
            then_body,
            else_body,
            ..
        } => {
            let _ = writeln!(out, "{pad}if {}", expr(cond, k));
            for s in then_body {
                instr(s, k, depth + 1, out);
            }
            if !else_body.is_empty() {
                let _ = writeln!(out, "{pad}else");
                for s in else_body {
                    instr(s, k, depth + 1, out);
                }
            }
            let _ = writeln!(out, "{pad}endif");
        }
    }
}

fn prec(op: BinOp) -> u8 {
    match op {
        BinOp::Pow => 7,
        BinOp::Mul | BinOp::Div => 6,
        BinOp::Add | BinOp::Sub => 4,
        BinOp::Eq | BinOp::Ne | BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => 3,
        BinOp::And => 1,
        BinOp::Or => 0,
    }
}

fn expr_prec(e: &KExpr) -> u8 {
    match &e.kind {
        KExprKind::Bin { op, .. } => prec(*op),
        KExprKind::Un { op: UnOp::Neg, .. } => 4,
        KExprKind::Un { op: UnOp::Not, .. } => 2,
        _ => 8,
    }
}

fn expr(e: &KExpr, k: &LoopKernel) -> String {
    match &e.kind {
        KExprKind::ConstI(v) => format!("{v}"),
        KExprKind::ConstR(v) => format!("{v:?}"),
        KExprKind::Param(p) => k.params[*p].name.as_str().to_string(),
        KExprKind::DomainVar(d) => k.domains[*d].var.as_str().to_string(),
        KExprKind::Local(l) => k.locals[*l].name.as_str().to_string(),
        KExprKind::Load { param, indices } => {
            let idx: Vec<String> = indices.iter().map(|i| expr(i, k)).collect();
            format!("{}({})", k.params[*param].name, idx.join(","))
        }
        KExprKind::CastReal(inner) => format!("real({})", expr(inner, k)),
        KExprKind::Un { op, operand } => {
            let sym = match op {
                UnOp::Neg => "-",
                UnOp::Not => ".NOT. ",
            };
            if expr_prec(operand) <= expr_prec(e) {
                format!("{sym}({})", expr(operand, k))
            } else {
                format!("{sym}{}", expr(operand, k))
            }
        }
        KExprKind::Bin { op, lhs, rhs } => {
            let p = prec(*op);
            let strict_rhs = !matches!(op, BinOp::Pow);
            let ls = wrap(lhs, k, p, matches!(op, BinOp::Pow));
            let rs = wrap(rhs, k, p, strict_rhs);
            format!("{ls} {} {rs}", op.symbol())
        }
    }
}

fn wrap(e: &KExpr, k: &LoopKernel, parent: u8, strict: bool) -> String {
    let s = expr(e, k);
    let p = expr_prec(e);
    if (strict && p <= parent) || (!strict && p < parent) {
        format!("({s})")
    } else {
        s
    }
}
