//! Static bounds verification over the assumptions.
//!
//! `verified` means: the assumptions imply every domain extent is at
//! least one and every array subscript stays inside the declared bounds,
//! for all launches honoring the assumptions. Anything the affine
//! machinery cannot prove is `unknown` and the launch path re-checks
//! each access dynamically.
//!
//! The proof engine is small: subscripts and declared bounds become
//! affine forms over scalar parameters after substituting loop variables
//! by their extreme bounds (recursively, innermost out) and `=`
//! assumptions by their values; a difference is then provably
//! non-negative when its parameter coefficients are signed so that the
//! `>=`/`<=` assumptions bound it below by a non-negative constant.

use super::affine::{affine_range, param_ranges, AffVar, Affine, Ext, Range};
use super::{Diagnostic, DiagCode, Domain, KExpr, KExprKind, KInstr, LoopKernel, Severity};
use crate::frontend::{BinOp, UnOp};
use crate::regions::AssumeRel;
use std::collections::BTreeMap;

#[derive(Debug, Clone, PartialEq)]
pub enum BoundsVerdict {
    Verified,
    /// Not provable statically; launches perform per-access checks. Any
    /// definite violations found along the way ride along as warnings.
    Unknown(Vec<Diagnostic>),
}

impl BoundsVerdict {
    pub fn is_verified(&self) -> bool {
        matches!(self, BoundsVerdict::Verified)
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Dir {
    Min,
    Max,
}

impl Dir {
    fn flip(self) -> Dir {
        match self {
            Dir::Min => Dir::Max,
            Dir::Max => Dir::Min,
        }
    }
}

struct Prover<'k> {
    kernel: &'k LoopKernel,
    /// Exact values from `=` assumptions.
    pinned: BTreeMap<String, i64>,
    pranges: BTreeMap<String, Range>,
    /// Single-definition locals, inlinable.
    local_defs: Vec<Option<&'k KExpr>>,
}

impl<'k> Prover<'k> {
    fn new(kernel: &'k LoopKernel) -> Self {
        let mut pinned = BTreeMap::new();
        for a in &kernel.assumptions {
            if a.relation == AssumeRel::Eq {
                pinned.insert(a.variable.key(), a.bound);
            }
        }
        let mut def_count = vec![0usize; kernel.locals.len()];
        let mut defs: Vec<Option<&KExpr>> = vec![None; kernel.locals.len()];
        fn scan<'k>(
            body: &'k [KInstr],
            count: &mut [usize],
            defs: &mut [Option<&'k KExpr>],
            conditional: bool,
        ) {
            for i in body {
                match i {
                    KInstr::SetLocal { local, value, .. } => {
                        count[*local] += if conditional { 2 } else { 1 };
                        defs[*local] = Some(value);
                    }
                    KInstr::If {
                        then_body,
                        else_body,
                        ..
                    } => {
                        scan(then_body, count, defs, true);
                        scan(else_body, count, defs, true);
                    }
                    KInstr::Store { .. } => {}
                }
            }
        }
        scan(&kernel.body, &mut def_count, &mut defs, false);
        for (i, c) in def_count.iter().enumerate() {
            if *c != 1 {
                defs[i] = None;
            }
        }
        Prover {
            kernel,
            pinned,
            pranges: param_ranges(&kernel.assumptions),
            local_defs: defs,
        }
    }

    fn param_key(&self, idx: usize) -> String {
        self.kernel.params[idx].name.key()
    }

    /// Extreme value of an expression as an affine form over parameters;
    /// None when the expression escapes the machinery.
    fn bound(&self, e: &KExpr, dir: Dir) -> Option<Affine> {
        match &e.kind {
            KExprKind::ConstI(v) => Some(Affine::constant(*v)),
            KExprKind::ConstR(_) => None,
            KExprKind::Param(p) => {
                let key = self.param_key(*p);
                if let Some(v) = self.pinned.get(&key) {
                    return Some(Affine::constant(*v));
                }
                Some(Affine::var(AffVar::Param(key)))
            }
            KExprKind::DomainVar(d) => {
                let dom = &self.kernel.domains[*d];
                match dir {
                    Dir::Max => self.bound(&dom.upper, Dir::Max),
                    Dir::Min => self.bound(&dom.lower, Dir::Min),
                }
            }
            KExprKind::Local(l) => {
                let def = self.local_defs[*l]?;
                self.bound(def, dir)
            }
            KExprKind::Load { .. } | KExprKind::CastReal(_) => None,
            KExprKind::Un {
                op: UnOp::Neg,
                operand,
            } => Some(self.bound(operand, dir.flip())?.scale(-1)),
            KExprKind::Un { .. } => None,
            KExprKind::Bin { op, lhs, rhs } => match op {
                BinOp::Add => Some(self.bound(lhs, dir)?.add(&self.bound(rhs, dir)?)),
                BinOp::Sub => Some(self.bound(lhs, dir)?.sub(&self.bound(rhs, dir.flip())?)),
                BinOp::Mul => {
                    // One side must fold to a constant.
                    if let Some(c) = self.fold_const(lhs) {
                        let d = if c >= 0 { dir } else { dir.flip() };
                        return Some(self.bound(rhs, d)?.scale(c));
                    }
                    if let Some(c) = self.fold_const(rhs) {
                        let d = if c >= 0 { dir } else { dir.flip() };
                        return Some(self.bound(lhs, d)?.scale(c));
                    }
                    None
                }
                BinOp::Div => {
                    let k = self.fold_const(rhs)?;
                    if k <= 0 {
                        return None;
                    }
                    // Only the exactly-divisible case keeps the form affine.
                    self.bound(lhs, dir)?.div_exact(k)
                }
                _ => None,
            },
        }
    }

    fn fold_const(&self, e: &KExpr) -> Option<i64> {
        match &e.kind {
            KExprKind::ConstI(v) => Some(*v),
            KExprKind::Param(p) => self.pinned.get(&self.param_key(*p)).copied(),
            KExprKind::Un {
                op: UnOp::Neg,
                operand,
            } => Some(-self.fold_const(operand)?),
            KExprKind::Bin { op, lhs, rhs } => {
                let (l, r) = (self.fold_const(lhs)?, self.fold_const(rhs)?);
                match op {
                    BinOp::Add => Some(l + r),
                    BinOp::Sub => Some(l - r),
                    BinOp::Mul => Some(l * r),
                    BinOp::Div if r != 0 => Some(l / r),
                    _ => None,
                }
            }
            _ => None,
        }
    }

    /// Is `aff >= 0` implied by the assumption ranges?
    fn nonneg(&self, aff: &Affine) -> bool {
        let r = affine_range(aff, &|v| match v {
            AffVar::Param(p) => self.pranges.get(p).copied().unwrap_or(Range::FULL),
            AffVar::Loop { .. } => Range::FULL,
        });
        r.lo >= Ext::Finite(0)
    }

    /// Prove `a <= b` for all admissible parameter values.
    fn le(&self, a: &KExpr, b: &KExpr) -> bool {
        let (Some(amax), Some(bmin)) = (self.bound(a, Dir::Max), self.bound(b, Dir::Min)) else {
            return false;
        };
        self.nonneg(&bmin.sub(&amax))
    }
}

pub(super) fn extent_provably_positive(kernel: &LoopKernel, d: &Domain) -> bool {
    let p = Prover::new(kernel);
    p.le(&d.lower, &d.upper)
}

/// Check every domain extent and every subscript against the declared
/// bounds using only the region assumptions.
pub fn check_bounds_static(kernel: &LoopKernel) -> BoundsVerdict {
    let p = Prover::new(kernel);
    let mut notes = Vec::new();
    let mut all_proved = true;

    for d in &kernel.domains {
        if !p.le(&d.lower, &d.upper) {
            all_proved = false;
        }
    }

    let mut accesses: Vec<(usize, &Vec<KExpr>, u32)> = Vec::new();
    collect_accesses(&kernel.body, &mut accesses);
    for (param, indices, line) in accesses {
        let kp = &kernel.params[param];
        for (dim, idx) in indices.iter().enumerate() {
            let (lo, hi) = &kp.dims[dim];
            let lower_ok = {
                let (imin, dlo) = (p.bound(idx, Dir::Min), p.bound(lo, Dir::Max));
                match (imin, dlo) {
                    (Some(imin), Some(dlo)) => {
                        let ok = p.nonneg(&imin.sub(&dlo));
                        if !ok {
                            // A definitely-violating constant pair is worth
                            // telling the author about now.
                            if let (Some(iv), Some(dv)) = (imin.as_const(), dlo.as_const()) {
                                if iv < dv {
                                    notes.push(Diagnostic {
                                        severity: Severity::Warning,
                                        code: DiagCode::DynamicBounds,
                                        line,
                                        message: format!(
                                            "subscript {} of '{}' can reach {iv}, below the declared lower bound {dv}",
                                            dim + 1,
                                            kp.name
                                        ),
                                        hint: None,
                                    });
                                }
                            }
                        }
                        ok
                    }
                    _ => false,
                }
            };
            let upper_ok = {
                let (imax, dhi) = (p.bound(idx, Dir::Max), p.bound(hi, Dir::Min));
                match (imax, dhi) {
                    (Some(imax), Some(dhi)) => {
                        let ok = p.nonneg(&dhi.sub(&imax));
                        if !ok {
                            if let (Some(iv), Some(dv)) = (imax.as_const(), dhi.as_const()) {
                                if iv > dv {
                                    notes.push(Diagnostic {
                                        severity: Severity::Warning,
                                        code: DiagCode::DynamicBounds,
                                        line,
                                        message: format!(
                                            "subscript {} of '{}' can reach {iv}, above the declared upper bound {dv}",
                                            dim + 1,
                                            kp.name
                                        ),
                                        hint: None,
                                    });
                                }
                            }
                        }
                        ok
                    }
                    _ => false,
                }
            };
            if !lower_ok || !upper_ok {
                all_proved = false;
            }
        }
    }

    if all_proved {
        BoundsVerdict::Verified
    } else {
        BoundsVerdict::Unknown(notes)
    }
}

fn collect_accesses<'k>(body: &'k [KInstr], out: &mut Vec<(usize, &'k Vec<KExpr>, u32)>) {
    fn expr<'k>(e: &'k KExpr, line: u32, out: &mut Vec<(usize, &'k Vec<KExpr>, u32)>) {
        match &e.kind {
            KExprKind::Load { param, indices } => {
                out.push((*param, indices, line));
                for i in indices {
                    expr(i, line, out);
                }
            }
            KExprKind::CastReal(inner) => expr(inner, line, out),
            KExprKind::Un { operand, .. } => expr(operand, line, out),
            KExprKind::Bin { lhs, rhs, .. } => {
                expr(lhs, line, out);
                expr(rhs, line, out);
            }
            _ => {}
        }
    }
    for i in body {
        match i {
            KInstr::SetLocal { value, line, .. } => expr(value, *line, out),
            KInstr::Store {
                param,
                indices,
                value,
                line,
            } => {
                out.push((*param, indices, *line));
                for ix in indices {
                    expr(ix, *line, out);
                }
                expr(value, *line, out);
            }
            KInstr::If {
                cond,
                then_body,
                else_body,
                line,
            } => {
                expr(cond, *line, out);
                collect_accesses(then_body, out);
                collect_accesses(else_body, out);
            }
        }
    }
}
