//! Loop-carried dependence detection.
//!
//! Three families of problems block parallelization:
//!
//! * `LOOP_CARRIED_SCALAR` — a scalar read before its first write within
//!   an iteration but written somewhere in the loop body, i.e. an
//!   accumulator whose value flows between iterations. Where the
//!   accumulator is a `x = x + c` counter with a constant start, the
//!   diagnostic carries the closed-form rewrite as a hint.
//! * `WRITE_OVERLAP` — two distinct iterations provably (or not provably
//!   *not*) store to the same array element.
//! * `LOOP_CARRIED_ARRAY` — one iteration stores an element another
//!   iteration loads.
//!
//! Subscripts are analyzed as affine forms `sum(a_i * var_i) + c` over
//! loop variables and integer scalar parameters; `=` assumptions are
//!   substituted first. Independence is accepted only on proof: a GCD
//! test on the per-dimension difference, an interval (Banerjee-style)
//! test using domain bounds and assumptions, or — for syntactically
//! identical subscripts — showing the subscript map pins the iteration
//! vector. Everything else is conservatively a dependence; stores
//! through subscripts the analysis cannot see are `DYNAMIC_INDEX`.

use super::affine::{affine_range, gcd, param_ranges, AffVar, Affine, Ext, Range};
use super::lower::{decompose_region, RegionShape};
use super::{DiagCode, Diagnostic, LowerError, Severity};
use crate::frontend::{print_expr, Expr, ExprKind, Name, Stmt, StmtKind, SymbolTable, UnOp};
use crate::frontend::BinOp;
use crate::regions::{AssumeRel, TaggedRegion};
use std::collections::{BTreeMap, HashMap};

pub fn detect_loop_carried_deps(region: &TaggedRegion, syms: &SymbolTable) -> Vec<Diagnostic> {
    let shape = match decompose_region(region, syms) {
        Ok(s) => s,
        Err(LowerError::NonLoopRegion { line }) => {
            return vec![Diagnostic {
                severity: Severity::Error,
                code: DiagCode::ImperfectNest,
                line,
                message: "tagged region contains no DO loop".into(),
                hint: None,
            }]
        }
        Err(LowerError::Rejected(diags)) => return diags,
        Err(LowerError::NotParallelRegion) => unreachable!(),
    };
    analyze_shape(&shape, syms, region)
}

pub(super) fn analyze_shape(
    shape: &RegionShape,
    syms: &SymbolTable,
    region: &TaggedRegion,
) -> Vec<Diagnostic> {
    let scalar_diags = scalar_carried(shape);
    if !scalar_diags.is_empty() {
        // Array subscripts built from carried scalars would only cascade
        // noise; report the root cause alone.
        return scalar_diags;
    }
    array_deps(shape, syms, region)
}

// ---- scalar accumulators ------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq)]
enum Effect {
    Read,
    Write,
    None,
}

fn expr_reads(e: &Expr, name: &Name) -> bool {
    match &e.kind {
        ExprKind::Var(n) => n == name,
        ExprKind::IntLit(_) | ExprKind::RealLit(_) => false,
        ExprKind::Elem(_, idx) => idx.iter().any(|i| expr_reads(i, name)),
        ExprKind::Un { operand, .. } => expr_reads(operand, name),
        ExprKind::Bin { lhs, rhs, .. } => expr_reads(lhs, name) || expr_reads(rhs, name),
    }
}

fn first_effect(name: &Name, stmts: &[Stmt]) -> Effect {
    for st in stmts {
        match &st.kind {
            StmtKind::Comment(_) | StmtKind::Return => {}
            StmtKind::Assign { target, value } => {
                if expr_reads(value, name)
                    || target.indices.iter().any(|i| expr_reads(i, name))
                {
                    return Effect::Read;
                }
                if target.indices.is_empty() && &target.name == name {
                    return Effect::Write;
                }
            }
            StmtKind::Call { args, .. } => {
                if args.iter().any(|a| expr_reads(a, name)) {
                    return Effect::Read;
                }
            }
            StmtKind::If {
                cond,
                then_body,
                else_body,
            } => {
                if expr_reads(cond, name) {
                    return Effect::Read;
                }
                let t = first_effect(name, then_body);
                let e = first_effect(name, else_body);
                if t == Effect::Read || e == Effect::Read {
                    return Effect::Read;
                }
                if t == Effect::Write && e == Effect::Write && !else_body.is_empty() {
                    return Effect::Write;
                }
                // A write on only some path is not definite; keep looking.
            }
            StmtKind::Do {
                var,
                lower,
                upper,
                body,
            } => {
                if expr_reads(lower, name) || expr_reads(upper, name) {
                    return Effect::Read;
                }
                if var == name {
                    // The DO header defines its index.
                    return Effect::Write;
                }
                match first_effect(name, body) {
                    Effect::Read => return Effect::Read,
                    // Zero-trip loops make writes inside non-definite.
                    Effect::Write | Effect::None => {}
                }
            }
        }
    }
    Effect::None
}

fn writes_scalar(name: &Name, stmts: &[Stmt]) -> bool {
    stmts.iter().any(|st| match &st.kind {
        StmtKind::Assign { target, .. } => target.indices.is_empty() && &target.name == name,
        StmtKind::If {
            then_body,
            else_body,
            ..
        } => writes_scalar(name, then_body) || writes_scalar(name, else_body),
        StmtKind::Do { body, .. } => writes_scalar(name, body),
        _ => false,
    })
}

fn collect_scalar_targets(stmts: &[Stmt], out: &mut Vec<(Name, u32)>) {
    for st in stmts {
        match &st.kind {
            StmtKind::Assign { target, .. } if target.indices.is_empty() => {
                if !out.iter().any(|(n, _)| n == &target.name) {
                    out.push((target.name.clone(), target.line));
                }
            }
            StmtKind::If {
                then_body,
                else_body,
                ..
            } => {
                collect_scalar_targets(then_body, out);
                collect_scalar_targets(else_body, out);
            }
            StmtKind::Do { body, .. } => collect_scalar_targets(body, out),
            _ => {}
        }
    }
}

fn scalar_carried(shape: &RegionShape) -> Vec<Diagnostic> {
    let mut diags = Vec::new();
    // Walk each spine loop's body: the body of loop k is everything the
    // decomposition nested below it.
    for k in 0..shape.levels.len() {
        let body = shape.loop_body(k);
        let mut written = Vec::new();
        collect_scalar_targets(&body, &mut written);
        for (name, _) in written {
            if first_effect(&name, &body) == Effect::Read && writes_scalar(&name, &body) {
                if diags
                    .iter()
                    .any(|d: &Diagnostic| d.message.contains(&format!("'{name}'")))
                {
                    continue;
                }
                let (line, hint) = accumulator_hint(shape, &name);
                diags.push(Diagnostic {
                    severity: Severity::Error,
                    code: DiagCode::LoopCarriedScalar,
                    line,
                    message: format!(
                        "scalar '{name}' is read before it is written in an iteration of loop '{}'; its value is carried between iterations",
                        shape.levels[k].var
                    ),
                    hint,
                });
            }
        }
    }
    diags
}

/// For the `x = x + c` counter pattern with a constant start, produce
/// the closed-form rewrite in terms of the enclosing loop index.
fn accumulator_hint(shape: &RegionShape, name: &Name) -> (u32, Option<String>) {
    // Find the accumulating assignment and the loop that directly holds it.
    let mut found: Option<(u32, i64, usize)> = None; // (line, stride, level)
    let mut count = 0usize;
    for (level, stmts) in shape.direct_bodies() {
        for st in stmts {
            if let StmtKind::Assign { target, value } = &st.kind {
                if target.indices.is_empty() && &target.name == name {
                    count += 1;
                    if let Some(stride) = increment_of(name, value) {
                        found = Some((target.line, stride, level));
                    } else {
                        found = Some((target.line, 0, level));
                    }
                }
            }
        }
    }
    let Some((line, stride, level)) = found else {
        return (region_line(shape), None);
    };
    if count != 1 || stride == 0 {
        return (line, None);
    }
    // Initial value: the last `name = const` among the statements that
    // run before the accumulating loop starts.
    let mut init: Option<i64> = None;
    for st in shape.defs_before_level(level) {
        if let StmtKind::Assign { target, value } = &st.kind {
            if target.indices.is_empty() && &target.name == name {
                init = const_int(value);
            }
        }
    }
    let Some(x0) = init else { return (line, None) };
    let lvl = &shape.levels[level];
    let Some(lo) = const_int(&lvl.lower) else {
        return (line, None);
    };
    // At iteration v the counter holds x0 + stride*(v - lo + 1).
    let offset = x0 + stride * (1 - lo);
    if offset % stride != 0 {
        return (line, None);
    }
    let m = -offset / stride;
    let var = lvl.var.as_str();
    let hint = if m > 0 {
        format!("{name} = ({var} - {m}) * {stride}")
    } else if m < 0 {
        format!("{name} = ({var} + {}) * {stride}", -m)
    } else {
        format!("{name} = {var} * {stride}")
    };
    (line, Some(hint))
}

fn increment_of(name: &Name, value: &Expr) -> Option<i64> {
    if let ExprKind::Bin {
        op: BinOp::Add,
        lhs,
        rhs,
    } = &value.kind
    {
        match (&lhs.kind, &rhs.kind) {
            (ExprKind::Var(n), _) if n == name => const_int(rhs),
            (_, ExprKind::Var(n)) if n == name => const_int(lhs),
            _ => None,
        }
    } else if let ExprKind::Bin {
        op: BinOp::Sub,
        lhs,
        rhs,
    } = &value.kind
    {
        match &lhs.kind {
            ExprKind::Var(n) if n == name => const_int(rhs).map(|c| -c),
            _ => None,
        }
    } else {
        None
    }
}

fn const_int(e: &Expr) -> Option<i64> {
    match &e.kind {
        ExprKind::IntLit(v) => Some(*v),
        ExprKind::Un {
            op: UnOp::Neg,
            operand,
        } => const_int(operand).map(|v| -v),
        _ => None,
    }
}

fn region_line(shape: &RegionShape) -> u32 {
    shape.levels.first().map_or(1, |l| l.line)
}

// ---- array subscript analysis -------------------------------------------

struct Access {
    array: Name,
    dims: Vec<Option<Affine>>,
    is_store: bool,
    line: u32,
    /// Pretty subscript text for diagnostics.
    text: String,
}

struct Collector<'a> {
    varmap: HashMap<Name, usize>,
    consts: BTreeMap<String, i64>,
    syms: &'a SymbolTable,
    accesses: Vec<Access>,
}

impl<'a> Collector<'a> {
    fn to_affine(&self, e: &Expr, env: &HashMap<Name, Option<Affine>>) -> Option<Affine> {
        match &e.kind {
            ExprKind::IntLit(v) => Some(Affine::constant(*v)),
            ExprKind::RealLit(_) => None,
            ExprKind::Var(n) => {
                if let Some(depth) = self.varmap.get(n) {
                    return Some(Affine::var(AffVar::Loop {
                        depth: *depth,
                        side: 0,
                    }));
                }
                if let Some(def) = env.get(n) {
                    return def.clone();
                }
                if let Some(v) = self.consts.get(&n.key()) {
                    return Some(Affine::constant(*v));
                }
                // Integer scalar parameter of the kernel.
                let sym = self.syms.get(n)?;
                if sym.is_array() {
                    return None;
                }
                Some(Affine::var(AffVar::Param(n.key())))
            }
            ExprKind::Elem(..) => None,
            ExprKind::Un {
                op: UnOp::Neg,
                operand,
            } => Some(self.to_affine(operand, env)?.scale(-1)),
            ExprKind::Un { .. } => None,
            ExprKind::Bin { op, lhs, rhs } => {
                let l = self.to_affine(lhs, env);
                let r = self.to_affine(rhs, env);
                match op {
                    BinOp::Add => Some(l?.add(&r?)),
                    BinOp::Sub => Some(l?.sub(&r?)),
                    BinOp::Mul => {
                        let (l, r) = (l?, r?);
                        if let Some(c) = l.as_const() {
                            Some(r.scale(c))
                        } else {
                            r.as_const().map(|c| l.scale(c))
                        }
                    }
                    BinOp::Div => {
                        let r = r?;
                        let k = r.as_const()?;
                        l?.div_exact(k)
                    }
                    _ => None,
                }
            }
        }
    }

    fn collect_expr(&mut self, e: &Expr, env: &HashMap<Name, Option<Affine>>) {
        match &e.kind {
            ExprKind::Elem(name, indices) => {
                for i in indices {
                    self.collect_expr(i, env);
                }
                let dims = indices.iter().map(|i| self.to_affine(i, env)).collect();
                self.accesses.push(Access {
                    array: name.clone(),
                    dims,
                    is_store: false,
                    line: e.line,
                    text: print_expr(e),
                });
            }
            ExprKind::Un { operand, .. } => self.collect_expr(operand, env),
            ExprKind::Bin { lhs, rhs, .. } => {
                self.collect_expr(lhs, env);
                self.collect_expr(rhs, env);
            }
            _ => {}
        }
    }

    fn collect_stmts(&mut self, stmts: &[Stmt], env: &mut HashMap<Name, Option<Affine>>) {
        for st in stmts {
            match &st.kind {
                StmtKind::Comment(_) | StmtKind::Return => {}
                StmtKind::Assign { target, value } => {
                    self.collect_expr(value, env);
                    for i in &target.indices {
                        self.collect_expr(i, env);
                    }
                    if target.indices.is_empty() {
                        let aff = self.to_affine(value, env);
                        env.insert(target.name.clone(), aff);
                    } else {
                        let dims = target
                            .indices
                            .iter()
                            .map(|i| self.to_affine(i, env))
                            .collect();
                        self.accesses.push(Access {
                            array: target.name.clone(),
                            dims,
                            is_store: true,
                            line: target.line,
                            text: format!(
                                "{}({})",
                                target.name,
                                target
                                    .indices
                                    .iter()
                                    .map(print_expr)
                                    .collect::<Vec<_>>()
                                    .join(",")
                            ),
                        });
                    }
                }
                StmtKind::Call { args, .. } => {
                    for a in args {
                        self.collect_expr(a, env);
                    }
                }
                StmtKind::If {
                    cond,
                    then_body,
                    else_body,
                } => {
                    self.collect_expr(cond, env);
                    let mut tenv = env.clone();
                    self.collect_stmts(then_body, &mut tenv);
                    let mut eenv = env.clone();
                    self.collect_stmts(else_body, &mut eenv);
                    // Scalars redefined under a branch are no longer
                    // statically known afterwards.
                    for (k, v) in &tenv {
                        if env.get(k) != Some(v) {
                            env.insert(k.clone(), None);
                        }
                    }
                    for (k, v) in &eenv {
                        if env.get(k) != Some(v) {
                            env.insert(k.clone(), None);
                        }
                    }
                }
                StmtKind::Do { .. } => {
                    // Decomposition already rejected loops below the spine.
                }
            }
        }
    }
}

fn array_deps(shape: &RegionShape, syms: &SymbolTable, region: &TaggedRegion) -> Vec<Diagnostic> {
    let varmap: HashMap<Name, usize> = shape
        .levels
        .iter()
        .enumerate()
        .map(|(d, l)| (l.var.clone(), d))
        .collect();
    let mut consts = BTreeMap::new();
    for a in &region.options {
        if a.relation == AssumeRel::Eq {
            consts.insert(a.variable.key(), a.bound);
        }
    }
    let mut col = Collector {
        varmap,
        consts,
        syms,
        accesses: Vec::new(),
    };
    let mut env = HashMap::new();
    let flat = shape.flattened();
    col.collect_stmts(&flat, &mut env);

    // Domain ranges for the interval test.
    let pranges = param_ranges(&region.options);
    let mut loop_ranges: Vec<Range> = Vec::new();
    for (depth, lvl) in shape.levels.iter().enumerate() {
        let lo = col.to_affine(&lvl.lower, &HashMap::new());
        let hi = col.to_affine(&lvl.upper, &HashMap::new());
        let var_range = |v: &AffVar| lookup_range(v, &pranges, &loop_ranges);
        let lo_r = lo.map_or(Range::FULL, |a| affine_range(&a, &var_range));
        let hi_r = hi.map_or(Range::FULL, |a| affine_range(&a, &var_range));
        let _ = depth;
        loop_ranges.push(Range {
            lo: lo_r.lo,
            hi: hi_r.hi,
        });
    }
    let var_range = move |v: &AffVar| lookup_range(v, &pranges, &loop_ranges);

    let mut diags = Vec::new();
    let arrays: Vec<Name> = {
        let mut seen = Vec::new();
        for a in &col.accesses {
            if a.is_store && !seen.contains(&a.array) {
                seen.push(a.array.clone());
            }
        }
        seen
    };
    for arr in arrays {
        let stores: Vec<&Access> = col
            .accesses
            .iter()
            .filter(|a| a.is_store && a.array == arr)
            .collect();
        let loads: Vec<&Access> = col
            .accesses
            .iter()
            .filter(|a| !a.is_store && a.array == arr)
            .collect();

        let mut bad_index = false;
        for s in &stores {
            if s.dims.iter().any(Option::is_none) {
                diags.push(Diagnostic {
                    severity: Severity::Error,
                    code: DiagCode::DynamicIndex,
                    line: s.line,
                    message: format!(
                        "store {} uses a subscript outside the affine form a*var + b; independence cannot be established",
                        s.text
                    ),
                    hint: None,
                });
                bad_index = true;
            }
        }
        if bad_index {
            continue;
        }
        for (i, s1) in stores.iter().enumerate() {
            for s2 in &stores[i..] {
                if may_conflict(s1, s2, shape.levels.len(), &var_range) {
                    diags.push(Diagnostic {
                        severity: Severity::Error,
                        code: DiagCode::WriteOverlap,
                        line: s2.line.max(s1.line),
                        message: format!(
                            "two iterations may store to the same element of '{arr}' ({} vs {})",
                            s1.text, s2.text
                        ),
                        hint: None,
                    });
                }
            }
        }
        for l in &loads {
            if l.dims.iter().any(Option::is_none) {
                diags.push(Diagnostic {
                    severity: Severity::Error,
                    code: DiagCode::LoopCarriedArray,
                    line: l.line,
                    message: format!(
                        "load {} of stored array '{arr}' uses a non-affine subscript; independence from the stores cannot be established",
                        l.text
                    ),
                    hint: None,
                });
                continue;
            }
            for s in &stores {
                if may_conflict(s, l, shape.levels.len(), &var_range) {
                    diags.push(Diagnostic {
                        severity: Severity::Error,
                        code: DiagCode::LoopCarriedArray,
                        line: l.line,
                        message: format!(
                            "one iteration stores {} while another loads {}; the value is carried between iterations",
                            s.text, l.text
                        ),
                        hint: None,
                    });
                }
            }
        }
    }
    diags
}

fn lookup_range(
    v: &AffVar,
    pranges: &BTreeMap<String, Range>,
    loop_ranges: &[Range],
) -> Range {
    match v {
        AffVar::Param(p) => pranges.get(p).copied().unwrap_or(Range::FULL),
        AffVar::Loop { depth, .. } => {
            loop_ranges.get(*depth).copied().unwrap_or(Range::FULL)
        }
    }
}

/// Can two *distinct* iterations touch the same element through these
/// two subscript vectors? Conservative: true unless proven otherwise.
fn may_conflict(
    a: &Access,
    b: &Access,
    n_loops: usize,
    var_range: &dyn Fn(&AffVar) -> Range,
) -> bool {
    let a_dims: Vec<&Affine> = a.dims.iter().map(|d| d.as_ref().unwrap()).collect();
    let b_dims: Vec<&Affine> = b.dims.iter().map(|d| d.as_ref().unwrap()).collect();
    debug_assert_eq!(a_dims.len(), b_dims.len());

    // Per-dimension disproof: no integer solution to a_d(x) = b_d(y).
    for (ad, bd) in a_dims.iter().zip(&b_dims) {
        let diff = ad.on_side(0).sub(&bd.on_side(1));
        let mut coeffs: Vec<i64> = Vec::new();
        let mut param_part = Affine::constant(diff.konst);
        for (v, c) in &diff.terms {
            match v {
                AffVar::Loop { .. } => coeffs.push(*c),
                AffVar::Param(_) => {
                    param_part.terms.insert(v.clone(), *c);
                }
            }
        }
        if coeffs.is_empty() {
            // Difference is iteration-independent: nonzero means the two
            // subscripts never meet.
            let r = affine_range(&param_part, var_range);
            if r.lo > Ext::Finite(0) || r.hi < Ext::Finite(0) {
                return false;
            }
            continue;
        }
        // GCD test: solutions need g | rhs. Parameters whose coefficient
        // is a multiple of g only shift rhs by multiples of g.
        let g = coeffs.iter().fold(0, |acc, &c| gcd(acc, c));
        if g > 1 && param_part.terms.values().all(|c| c % g == 0) && param_part.konst % g != 0 {
            return false;
        }
        // Interval test over the iteration box and assumption ranges.
        let r = affine_range(&diff, var_range);
        if r.lo > Ext::Finite(0) || r.hi < Ext::Finite(0) {
            return false;
        }
    }

    // Identical subscript vectors: conflict only where x = y is forced.
    if a_dims
        .iter()
        .zip(&b_dims)
        .all(|(ad, bd)| ad == bd)
    {
        let mut forced = vec![false; n_loops];
        loop {
            let mut progress = false;
            for ad in &a_dims {
                let mut unforced: Vec<usize> = Vec::new();
                for (v, c) in &ad.terms {
                    if let AffVar::Loop { depth, .. } = v {
                        if *c != 0 && !forced[*depth] {
                            unforced.push(*depth);
                        }
                    }
                }
                if unforced.len() == 1 {
                    forced[unforced[0]] = true;
                    progress = true;
                }
            }
            if !progress {
                break;
            }
        }
        if forced.iter().all(|&f| f) {
            return false;
        }
    }
    true
}
