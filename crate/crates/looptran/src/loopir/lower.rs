//! Region decomposition and lowering into [`LoopKernel`].

use super::deps::analyze_shape;
use super::{
    DiagCode, Diagnostic, Domain, KExpr, KExprKind, KInstr, KTy, KernelParam, Local, LoopKernel,
    LowerError, Result, Severity,
};
use crate::frontend::{
    BinOp, ElemTy, Expr, ExprKind, ExprTy, Intent, Name, Stmt, StmtKind, SymbolTable,
};
use crate::regions::{RegionKind, TaggedRegion};
use std::collections::HashMap;

/// One DO loop of the spine.
#[derive(Debug, Clone)]
pub struct SpineLevel {
    pub var: Name,
    pub lower: Expr,
    pub upper: Expr,
    pub line: u32,
    /// Scalar definitions between this header and the next spine DO.
    /// Empty for the innermost level.
    pub defs: Vec<Stmt>,
}

/// The canonical shape of a parallel region: optional scalar setup, a
/// perfect DO spine with thread-private scalar definitions between
/// headers, and a straight-line innermost body.
#[derive(Debug, Clone)]
pub struct RegionShape {
    pub pre: Vec<Stmt>,
    pub levels: Vec<SpineLevel>,
    pub innermost: Vec<Stmt>,
}

impl RegionShape {
    /// Reconstruct the statement list that forms the body of spine loop
    /// `k` (defs, the nested loop, or the innermost statements).
    pub fn loop_body(&self, k: usize) -> Vec<Stmt> {
        let mut body = self.levels[k].defs.clone();
        if k + 1 < self.levels.len() {
            let next = &self.levels[k + 1];
            body.push(Stmt {
                kind: StmtKind::Do {
                    var: next.var.clone(),
                    lower: next.lower.clone(),
                    upper: next.upper.clone(),
                    body: self.loop_body(k + 1),
                },
                span: (next.line, next.line),
            });
        } else {
            body.extend(self.innermost.iter().cloned());
        }
        body
    }

    /// (level, statements directly inside that level's loop), innermost
    /// last.
    pub fn direct_bodies(&self) -> Vec<(usize, &[Stmt])> {
        let mut out: Vec<(usize, &[Stmt])> = Vec::new();
        for (k, lvl) in self.levels.iter().enumerate() {
            if k + 1 < self.levels.len() {
                out.push((k, &lvl.defs));
            }
        }
        if !self.levels.is_empty() {
            out.push((self.levels.len() - 1, &self.innermost));
        }
        out
    }

    /// Statements that run before loop `level` starts, within one pass
    /// of the enclosing loops.
    pub fn defs_before_level(&self, level: usize) -> Vec<&Stmt> {
        let mut out: Vec<&Stmt> = self.pre.iter().collect();
        for lvl in &self.levels[..level] {
            out.extend(lvl.defs.iter());
        }
        out
    }

    /// All executable statements in per-thread execution order.
    pub fn flattened(&self) -> Vec<Stmt> {
        let mut out = self.pre.clone();
        for lvl in &self.levels {
            out.extend(lvl.defs.iter().cloned());
        }
        out.extend(self.innermost.iter().cloned());
        out
    }
}

fn diag_err(code: DiagCode, line: u32, message: impl Into<String>) -> LowerError {
    LowerError::Rejected(vec![Diagnostic {
        severity: Severity::Error,
        code,
        line,
        message: message.into(),
        hint: None,
    }])
}

fn is_scalar_def(st: &Stmt) -> bool {
    matches!(&st.kind, StmtKind::Assign { target, .. } if target.indices.is_empty())
}

/// Split a parallel region into setup, spine and innermost body,
/// rejecting shapes the thread model cannot express.
pub fn decompose_region(region: &TaggedRegion, _syms: &SymbolTable) -> Result<RegionShape> {
    if region.kind != RegionKind::Parallel {
        return Err(LowerError::NotParallelRegion);
    }
    let mut pre = Vec::new();
    let mut outer: Option<&Stmt> = None;
    for st in &region.statements {
        match &st.kind {
            StmtKind::Comment(_) => {}
            _ if outer.is_some() => {
                return Err(diag_err(
                    DiagCode::ImperfectNest,
                    st.span.0,
                    "statements after the loop nest are not supported in a parallel region",
                ));
            }
            StmtKind::Do { .. } => outer = Some(st),
            StmtKind::Assign { .. } if is_scalar_def(st) => pre.push(st.clone()),
            StmtKind::Assign { target, .. } => {
                return Err(diag_err(
                    DiagCode::ImperfectNest,
                    target.line,
                    "only thread-private scalar definitions may precede the loop nest",
                ));
            }
            StmtKind::Call { .. } | StmtKind::Return => {
                return Err(diag_err(
                    DiagCode::UnsupportedInKernel,
                    st.span.0,
                    "CALL and RETURN are not supported inside a parallel region",
                ));
            }
            StmtKind::If { .. } => {
                return Err(diag_err(
                    DiagCode::ImperfectNest,
                    st.span.0,
                    "conditionals outside the loop nest are not supported in a parallel region",
                ));
            }
        }
    }
    let Some(outer) = outer else {
        return Err(LowerError::NonLoopRegion {
            line: region.span.0,
        });
    };

    let mut levels = Vec::new();
    let mut innermost = Vec::new();
    build_spine(outer, &mut levels, &mut innermost)?;
    let shape = RegionShape {
        pre,
        levels,
        innermost,
    };
    check_index_scoping(&shape)?;
    Ok(shape)
}

fn build_spine(
    do_stmt: &Stmt,
    levels: &mut Vec<SpineLevel>,
    innermost: &mut Vec<Stmt>,
) -> Result<()> {
    let StmtKind::Do {
        var,
        lower,
        upper,
        body,
    } = &do_stmt.kind
    else {
        unreachable!()
    };
    let mut level = SpineLevel {
        var: var.clone(),
        lower: lower.clone(),
        upper: upper.clone(),
        line: do_stmt.span.0,
        defs: Vec::new(),
    };

    // Find the spine continuation: the body is either
    //   {scalar defs}* DO {...} {comments}*
    // or a straight-line innermost body with no DO at all.
    let inner_do = body
        .iter()
        .position(|s| matches!(s.kind, StmtKind::Do { .. }));
    match inner_do {
        Some(p) => {
            for st in &body[..p] {
                match &st.kind {
                    StmtKind::Comment(_) => {}
                    _ if is_scalar_def(st) => level.defs.push(st.clone()),
                    _ => {
                        return Err(diag_err(
                            DiagCode::ImperfectNest,
                            st.span.0,
                            "only thread-private scalar definitions may appear between loop headers",
                        ))
                    }
                }
            }
            for st in &body[p + 1..] {
                if !matches!(st.kind, StmtKind::Comment(_)) {
                    return Err(diag_err(
                        DiagCode::ImperfectNest,
                        st.span.0,
                        "statements after an inner loop are not supported in a parallel region",
                    ));
                }
            }
            levels.push(level);
            build_spine(&body[p], levels, innermost)
        }
        None => {
            validate_innermost(body)?;
            levels.push(level);
            *innermost = body
                .iter()
                .filter(|s| !matches!(s.kind, StmtKind::Comment(_)))
                .cloned()
                .collect();
            Ok(())
        }
    }
}

fn validate_innermost(stmts: &[Stmt]) -> Result<()> {
    for st in stmts {
        match &st.kind {
            StmtKind::Assign { .. } | StmtKind::Comment(_) => {}
            StmtKind::If {
                then_body,
                else_body,
                ..
            } => {
                validate_innermost(then_body)?;
                validate_innermost(else_body)?;
            }
            StmtKind::Do { .. } => {
                return Err(diag_err(
                    DiagCode::ImperfectNest,
                    st.span.0,
                    "a loop below the innermost body mixes with other statements; hoist it into the nest",
                ))
            }
            StmtKind::Call { .. } | StmtKind::Return => {
                return Err(diag_err(
                    DiagCode::UnsupportedInKernel,
                    st.span.0,
                    "CALL and RETURN are not supported inside a parallel region",
                ))
            }
        }
    }
    Ok(())
}

/// Loop indices may only be referenced at or below their own nesting
/// level; anywhere else their value would differ between the sequential
/// and the per-thread reading.
fn check_index_scoping(shape: &RegionShape) -> Result<()> {
    let depth_of: HashMap<Name, usize> = shape
        .levels
        .iter()
        .enumerate()
        .map(|(d, l)| (l.var.clone(), d))
        .collect();
    let check = |stmts: &[Stmt], max_depth: Option<usize>| -> Result<()> {
        for st in stmts {
            let mut bad: Option<(Name, u32)> = None;
            visit_names(st, &mut |n, line| {
                if let Some(&d) = depth_of.get(n) {
                    if max_depth.is_none_or(|m| d > m) && bad.is_none() {
                        bad = Some((n.clone(), line));
                    }
                }
            });
            if let Some((n, line)) = bad {
                return Err(diag_err(
                    DiagCode::UnsupportedInKernel,
                    line,
                    format!("loop index '{n}' is referenced outside its loop"),
                ));
            }
        }
        Ok(())
    };
    check(&shape.pre, None)?;
    for (k, lvl) in shape.levels.iter().enumerate() {
        // Bounds may reference strictly outer indices.
        for e in [&lvl.lower, &lvl.upper] {
            let mut bad: Option<(Name, u32)> = None;
            visit_expr_names(e, &mut |n, line| {
                if let Some(&d) = depth_of.get(n) {
                    if d >= k && bad.is_none() {
                        bad = Some((n.clone(), line));
                    }
                }
            });
            if let Some((n, line)) = bad {
                return Err(diag_err(
                    DiagCode::UnsupportedInKernel,
                    line,
                    format!("loop bound references index '{n}' of the same or a deeper loop"),
                ));
            }
        }
        if k + 1 < shape.levels.len() {
            check(&lvl.defs, Some(k))?;
        }
    }
    Ok(())
}

fn visit_expr_names(e: &Expr, f: &mut impl FnMut(&Name, u32)) {
    match &e.kind {
        ExprKind::Var(n) => f(n, e.line),
        ExprKind::Elem(n, idx) => {
            f(n, e.line);
            for i in idx {
                visit_expr_names(i, f);
            }
        }
        ExprKind::Un { operand, .. } => visit_expr_names(operand, f),
        ExprKind::Bin { lhs, rhs, .. } => {
            visit_expr_names(lhs, f);
            visit_expr_names(rhs, f);
        }
        ExprKind::IntLit(_) | ExprKind::RealLit(_) => {}
    }
}

fn visit_names(st: &Stmt, f: &mut impl FnMut(&Name, u32)) {
    match &st.kind {
        StmtKind::Assign { target, value } => {
            f(&target.name, target.line);
            for i in &target.indices {
                visit_expr_names(i, f);
            }
            visit_expr_names(value, f);
        }
        StmtKind::If {
            cond,
            then_body,
            else_body,
        } => {
            visit_expr_names(cond, f);
            for s in then_body.iter().chain(else_body) {
                visit_names(s, f);
            }
        }
        StmtKind::Do {
            lower, upper, body, ..
        } => {
            visit_expr_names(lower, f);
            visit_expr_names(upper, f);
            for s in body {
                visit_names(s, f);
            }
        }
        StmtKind::Call { args, .. } => {
            for a in args {
                visit_expr_names(a, f);
            }
        }
        StmtKind::Comment(_) | StmtKind::Return => {}
    }
}

// ---- lowering ------------------------------------------------------------

struct LowerCtx<'a> {
    syms: &'a SymbolTable,
    domain_idx: HashMap<Name, usize>,
    local_idx: HashMap<Name, usize>,
    param_idx: HashMap<Name, usize>,
    params: Vec<KernelParam>,
    locals: Vec<Local>,
    diags: Vec<Diagnostic>,
}

/// Lower a parallel region into an unmapped kernel. Dependence analysis
/// runs first; any error-severity diagnostic aborts the lowering.
pub fn lower_region(
    name: &str,
    region: &TaggedRegion,
    syms: &SymbolTable,
) -> Result<LoopKernel> {
    if region.kind != RegionKind::Parallel {
        return Err(LowerError::NotParallelRegion);
    }
    let shape = decompose_region(region, syms)?;
    let diags = analyze_shape(&shape, syms, region);
    if diags.iter().any(Diagnostic::is_error) {
        return Err(LowerError::Rejected(diags));
    }

    let mut ctx = LowerCtx {
        syms,
        domain_idx: HashMap::new(),
        local_idx: HashMap::new(),
        param_idx: HashMap::new(),
        params: Vec::new(),
        locals: Vec::new(),
        diags,
    };
    for (d, lvl) in shape.levels.iter().enumerate() {
        ctx.domain_idx.insert(lvl.var.clone(), d);
    }
    // Thread-private scalars: every scalar assigned in the region.
    let flat = shape.flattened();
    let mut targets = Vec::new();
    collect_scalar_targets_rec(&flat, &mut targets);
    for name in targets {
        if ctx.domain_idx.contains_key(&name) || ctx.local_idx.contains_key(&name) {
            continue;
        }
        let sym = syms.get(&name).expect("parser guarantees declaration");
        let idx = ctx.locals.len();
        ctx.locals.push(Local {
            name: name.clone(),
            ty: sym.ty,
        });
        ctx.local_idx.insert(name, idx);
    }
    // Parameters: remaining referenced names, dummy-argument order first.
    let mut referenced: Vec<Name> = Vec::new();
    for st in &flat {
        visit_names(st, &mut |n, _| {
            if !referenced.contains(n) {
                referenced.push(n.clone());
            }
        });
    }
    for lvl in &shape.levels {
        for e in [&lvl.lower, &lvl.upper] {
            visit_expr_names(e, &mut |n, _| {
                if !referenced.contains(n) {
                    referenced.push(n.clone());
                }
            });
        }
    }
    let mut param_names: Vec<Name> = Vec::new();
    let mut add_param_name = |n: &Name, ctx: &LowerCtx| {
        if ctx.domain_idx.contains_key(n)
            || ctx.local_idx.contains_key(n)
            || param_names.contains(n)
        {
            return;
        }
        param_names.push(n.clone());
    };
    for n in &referenced {
        add_param_name(n, &ctx);
    }
    // Names used in declared array bounds become shape parameters too.
    let mut shape_names: Vec<Name> = Vec::new();
    for n in &param_names {
        if let Some(sym) = syms.get(n) {
            if let crate::frontend::SymKind::Array { dims } = &sym.kind {
                for d in dims {
                    for e in [&d.lower, &d.upper] {
                        visit_expr_names(e, &mut |sn, _| {
                            if !param_names.contains(sn) && !shape_names.contains(sn) {
                                shape_names.push(sn.clone());
                            }
                        });
                    }
                }
            }
        }
    }
    param_names.extend(shape_names);

    for n in &param_names {
        let sym = syms
            .get(n)
            .expect("parser guarantees declaration")
            .clone();
        if ctx.domain_idx.contains_key(n) || ctx.local_idx.contains_key(n) {
            return Err(diag_err(
                DiagCode::UnsupportedInKernel,
                sym.line,
                format!("array bound references '{n}', which is written inside the region"),
            ));
        }
        let idx = ctx.params.len();
        ctx.params.push(KernelParam {
            name: n.clone(),
            ty: sym.ty,
            dims: Vec::new(),
            reads: !sym.is_array(),
            writes: false,
        });
        ctx.param_idx.insert(n.clone(), idx);
    }
    // Fill array bounds now that every scalar parameter has an index.
    for i in 0..ctx.params.len() {
        let n = ctx.params[i].name.clone();
        let sym = syms.get(&n).unwrap().clone();
        if let crate::frontend::SymKind::Array { dims } = &sym.kind {
            let mut kdims = Vec::new();
            for d in dims {
                let lo = lower_expr(&d.lower, &ctx)?;
                let hi = lower_expr(&d.upper, &ctx)?;
                for b in [&lo, &hi] {
                    if bound_mentions_domain(b) {
                        return Err(diag_err(
                            DiagCode::UnsupportedInKernel,
                            sym.line,
                            format!("declared bounds of '{n}' reference a loop index"),
                        ));
                    }
                }
                kdims.push((lo, hi));
            }
            ctx.params[i].dims = kdims;
        }
    }

    // Domains.
    let mut domains = Vec::new();
    for lvl in &shape.levels {
        domains.push(Domain {
            var: lvl.var.clone(),
            lower: lower_expr(&lvl.lower, &ctx)?,
            upper: lower_expr(&lvl.upper, &ctx)?,
        });
    }

    // Body.
    let mut body = Vec::new();
    for st in &flat {
        lower_stmt(st, &mut ctx, &mut body)?;
    }

    if ctx.diags.iter().any(Diagnostic::is_error) {
        return Err(LowerError::Rejected(ctx.diags));
    }

    Ok(LoopKernel {
        name: name.to_string(),
        domains,
        grid_axes: Vec::new(),
        params: ctx.params,
        locals: ctx.locals,
        assumptions: region.options.clone(),
        body,
    })
}

fn collect_scalar_targets_rec(stmts: &[Stmt], out: &mut Vec<Name>) {
    for st in stmts {
        match &st.kind {
            StmtKind::Assign { target, .. } if target.indices.is_empty() => {
                if !out.contains(&target.name) {
                    out.push(target.name.clone());
                }
            }
            StmtKind::If {
                then_body,
                else_body,
                ..
            } => {
                collect_scalar_targets_rec(then_body, out);
                collect_scalar_targets_rec(else_body, out);
            }
            _ => {}
        }
    }
}

fn bound_mentions_domain(e: &KExpr) -> bool {
    match &e.kind {
        KExprKind::DomainVar(_) => true,
        KExprKind::ConstI(_) | KExprKind::ConstR(_) | KExprKind::Param(_) | KExprKind::Local(_) => {
            false
        }
        KExprKind::Load { indices, .. } => indices.iter().any(bound_mentions_domain),
        KExprKind::CastReal(e) => bound_mentions_domain(e),
        KExprKind::Un { operand, .. } => bound_mentions_domain(operand),
        KExprKind::Bin { lhs, rhs, .. } => {
            bound_mentions_domain(lhs) || bound_mentions_domain(rhs)
        }
    }
}

fn kty(t: ExprTy) -> KTy {
    match t {
        ExprTy::Int => KTy::Int,
        ExprTy::Real => KTy::Real,
        ExprTy::Logical => KTy::Logical,
    }
}

fn cast_real(e: KExpr) -> KExpr {
    if e.ty == KTy::Real {
        return e;
    }
    KExpr {
        ty: KTy::Real,
        kind: KExprKind::CastReal(Box::new(e)),
    }
}

fn lower_expr(e: &Expr, ctx: &LowerCtx) -> Result<KExpr> {
    let out = match &e.kind {
        ExprKind::IntLit(v) => KExpr {
            ty: KTy::Int,
            kind: KExprKind::ConstI(*v),
        },
        ExprKind::RealLit(v) => KExpr {
            ty: KTy::Real,
            kind: KExprKind::ConstR(*v),
        },
        ExprKind::Var(n) => {
            if let Some(&d) = ctx.domain_idx.get(n) {
                KExpr {
                    ty: KTy::Int,
                    kind: KExprKind::DomainVar(d),
                }
            } else if let Some(&l) = ctx.local_idx.get(n) {
                KExpr {
                    ty: kty(e.ty),
                    kind: KExprKind::Local(l),
                }
            } else {
                let &p = ctx
                    .param_idx
                    .get(n)
                    .expect("all names registered before lowering");
                KExpr {
                    ty: kty(e.ty),
                    kind: KExprKind::Param(p),
                }
            }
        }
        ExprKind::Elem(n, indices) => {
            let &p = ctx
                .param_idx
                .get(n)
                .expect("array names registered before lowering");
            let idx = indices
                .iter()
                .map(|i| lower_expr(i, ctx))
                .collect::<Result<Vec<_>>>()?;
            KExpr {
                ty: kty(e.ty),
                kind: KExprKind::Load {
                    param: p,
                    indices: idx,
                },
            }
        }
        ExprKind::Un { op, operand } => {
            let inner = lower_expr(operand, ctx)?;
            KExpr {
                ty: inner.ty,
                kind: KExprKind::Un {
                    op: *op,
                    operand: Box::new(inner),
                },
            }
        }
        ExprKind::Bin { op, lhs, rhs } => {
            let mut l = lower_expr(lhs, ctx)?;
            let mut r = lower_expr(rhs, ctx)?;
            let arith = matches!(
                op,
                BinOp::Add | BinOp::Sub | BinOp::Mul | BinOp::Div
            ) || op.is_relational();
            if arith && l.ty != r.ty {
                // Fortran mixed arithmetic widens the integer side.
                if l.ty == KTy::Int {
                    l = cast_real(l);
                } else if r.ty == KTy::Int {
                    r = cast_real(r);
                }
            }
            if *op == BinOp::Pow && l.ty == KTy::Int && r.ty == KTy::Real {
                l = cast_real(l);
            }
            let ty = if op.is_relational() || matches!(op, BinOp::And | BinOp::Or) {
                KTy::Logical
            } else if l.ty == KTy::Real || r.ty == KTy::Real {
                KTy::Real
            } else {
                KTy::Int
            };
            KExpr {
                ty,
                kind: KExprKind::Bin {
                    op: *op,
                    lhs: Box::new(l),
                    rhs: Box::new(r),
                },
            }
        }
    };
    Ok(out)
}

fn lower_stmt(st: &Stmt, ctx: &mut LowerCtx, out: &mut Vec<KInstr>) -> Result<()> {
    match &st.kind {
        StmtKind::Comment(_) => {}
        StmtKind::Assign { target, value } => {
            let mut v = lower_expr(value, ctx)?;
            if target.indices.is_empty() {
                let &l = ctx.local_idx.get(&target.name).expect("local registered");
                if ctx.locals[l].ty == ElemTy::Real64 {
                    v = cast_real(v);
                }
                out.push(KInstr::SetLocal {
                    local: l,
                    value: v,
                    line: target.line,
                });
            } else {
                let &p = ctx
                    .param_idx
                    .get(&target.name)
                    .expect("array registered");
                let sym = ctx.syms.get(&target.name).unwrap();
                if sym.intent == Intent::In {
                    ctx.diags.push(Diagnostic {
                        severity: Severity::Error,
                        code: DiagCode::UnsupportedInKernel,
                        line: target.line,
                        message: format!("store to INTENT(IN) argument '{}'", target.name),
                        hint: None,
                    });
                }
                if ctx.params[p].ty == ElemTy::Real64 {
                    v = cast_real(v);
                }
                let indices = target
                    .indices
                    .iter()
                    .map(|i| lower_expr(i, ctx))
                    .collect::<Result<Vec<_>>>()?;
                ctx.params[p].writes = true;
                out.push(KInstr::Store {
                    param: p,
                    indices,
                    value: v,
                    line: target.line,
                });
            }
        }
        StmtKind::If {
            cond,
            then_body,
            else_body,
        } => {
            let c = lower_expr(cond, ctx)?;
            let mut t = Vec::new();
            for s in then_body {
                lower_stmt(s, ctx, &mut t)?;
            }
            let mut e = Vec::new();
            for s in else_body {
                lower_stmt(s, ctx, &mut e)?;
            }
            out.push(KInstr::If {
                cond: c,
                then_body: t,
                else_body: e,
                line: st.span.0,
            });
        }
        StmtKind::Do { .. } | StmtKind::Call { .. } | StmtKind::Return => {
            unreachable!("rejected during decomposition")
        }
    }
    Ok(())
}

/// Mark read flags on array parameters by walking the finished body.
fn mark_reads(kernel: &mut LoopKernel) {
    fn expr(e: &KExpr, reads: &mut Vec<bool>) {
        match &e.kind {
            KExprKind::Load { param, indices } => {
                reads[*param] = true;
                for i in indices {
                    expr(i, reads);
                }
            }
            KExprKind::CastReal(inner) => expr(inner, reads),
            KExprKind::Un { operand, .. } => expr(operand, reads),
            KExprKind::Bin { lhs, rhs, .. } => {
                expr(lhs, reads);
                expr(rhs, reads);
            }
            _ => {}
        }
    }
    fn instr(i: &KInstr, reads: &mut Vec<bool>) {
        match i {
            KInstr::SetLocal { value, .. } => expr(value, reads),
            KInstr::Store { indices, value, .. } => {
                for ix in indices {
                    expr(ix, reads);
                }
                expr(value, reads);
            }
            KInstr::If {
                cond,
                then_body,
                else_body,
                ..
            } => {
                expr(cond, reads);
                for s in then_body.iter().chain(else_body) {
                    instr(s, reads);
                }
            }
        }
    }
    let mut reads = vec![false; kernel.params.len()];
    for i in &kernel.body {
        instr(i, &mut reads);
    }
    for d in &kernel.domains {
        expr(&d.lower, &mut reads);
        expr(&d.upper, &mut reads);
    }
    for (p, r) in reads.iter().enumerate() {
        if *r {
            kernel.params[p].reads = true;
        }
    }
}

/// Map the outermost (up to two) domains onto the thread grid. Grid
/// extents must be launch constants, so their bounds may not reference
/// other loop indices. Returns the mapped kernel and any
/// `DYNAMIC_BOUNDS` warnings for extents the assumptions cannot pin
/// positive.
pub fn map_grid(mut kernel: LoopKernel) -> Result<(LoopKernel, Vec<Diagnostic>)> {
    mark_reads(&mut kernel);
    let n_axes = kernel.domains.len().min(2);
    for d in &kernel.domains[..n_axes] {
        if bound_mentions_domain(&d.lower) || bound_mentions_domain(&d.upper) {
            return Err(diag_err(
                DiagCode::UnsupportedInKernel,
                0,
                format!(
                    "grid domain '{}' has bounds depending on another loop index",
                    d.var
                ),
            ));
        }
    }
    kernel.grid_axes = (0..n_axes).collect();
    let mut warnings = Vec::new();
    for (i, d) in kernel.domains.iter().enumerate() {
        if !super::bounds::extent_provably_positive(&kernel, d) {
            warnings.push(Diagnostic {
                severity: Severity::Warning,
                code: DiagCode::DynamicBounds,
                line: 0,
                message: format!(
                    "extent of domain '{}' (axis {i}) cannot be proven positive from the assumptions; checked at launch",
                    d.var
                ),
                hint: None,
            });
        }
    }
    Ok((kernel, warnings))
}
