//! Canonical pretty-printer. Deterministic output: uppercase keywords,
//! identifiers as written, two-space indentation, precedence-aware
//! parenthesization so that printing followed by re-parsing reproduces
//! the same tree.

use super::ast::*;

pub fn pretty_print(sub: &Subroutine) -> String {
    let mut out = String::new();
    out.push_str(&format!("SUBROUTINE {}(", sub.name));
    for (i, p) in sub.params.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        out.push_str(p.as_str());
    }
    out.push_str(")\n");
    out.push_str("  IMPLICIT NONE\n");
    for item in &sub.decls {
        match item {
            DeclItem::Comment { text, .. } => {
                out.push_str("  ");
                out.push_str(text);
                out.push('\n');
            }
            DeclItem::Decl(d) => {
                out.push_str("  ");
                out.push_str(&print_decl(d));
                out.push('\n');
            }
        }
    }
    out.push('\n');
    print_stmts(&mut out, &sub.body, 1);
    out.push_str(&format!("END SUBROUTINE {}\n", sub.name));
    out
}

fn print_decl(d: &Decl) -> String {
    let mut s = match d.ty {
        ElemTy::Integer => "INTEGER".to_string(),
        ElemTy::Real64 => "REAL(KIND=8)".to_string(),
    };
    if let Some(i) = d.intent {
        s.push_str(&format!(", INTENT({i})"));
    }
    if d.parameter {
        s.push_str(", PARAMETER");
    }
    s.push_str(" :: ");
    for (i, e) in d.entities.iter().enumerate() {
        if i > 0 {
            s.push_str(", ");
        }
        s.push_str(e.name.as_str());
        if !e.dims.is_empty() {
            s.push('(');
            for (k, dim) in e.dims.iter().enumerate() {
                if k > 0 {
                    s.push_str(", ");
                }
                s.push_str(&print_expr(&dim.lower));
                s.push(':');
                s.push_str(&print_expr(&dim.upper));
            }
            s.push(')');
        }
        if let Some(init) = &e.init {
            s.push_str(" = ");
            s.push_str(&print_expr(init));
        }
    }
    s
}

fn indent(out: &mut String, level: usize) {
    for _ in 0..level {
        out.push_str("  ");
    }
}

fn print_stmts(out: &mut String, stmts: &[Stmt], level: usize) {
    for st in stmts {
        print_stmt(out, st, level);
    }
}

fn print_stmt(out: &mut String, st: &Stmt, level: usize) {
    match &st.kind {
        StmtKind::Comment(text) => {
            indent(out, level);
            out.push_str(text);
            out.push('\n');
        }
        StmtKind::Assign { target, value } => {
            indent(out, level);
            out.push_str(&print_ref(target));
            out.push_str(" = ");
            out.push_str(&print_expr(value));
            out.push('\n');
        }
        StmtKind::Do {
            var,
            lower,
            upper,
            body,
        } => {
            indent(out, level);
            out.push_str(&format!(
                "DO {} = {}, {}\n",
                var,
                print_expr(lower),
                print_expr(upper)
            ));
            print_stmts(out, body, level + 1);
            indent(out, level);
            out.push_str("ENDDO\n");
        }
        StmtKind::If {
            cond,
            then_body,
            else_body,
        } => {
            indent(out, level);
            out.push_str(&format!("IF ({}) THEN\n", print_expr(cond)));
            print_stmts(out, then_body, level + 1);
            if !else_body.is_empty() {
                indent(out, level);
                out.push_str("ELSE\n");
                print_stmts(out, else_body, level + 1);
            }
            indent(out, level);
            out.push_str("ENDIF\n");
        }
        StmtKind::Call { name, args } => {
            indent(out, level);
            out.push_str(&format!("CALL {}(", name));
            for (i, a) in args.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                out.push_str(&print_expr(a));
            }
            out.push_str(")\n");
        }
        StmtKind::Return => {
            indent(out, level);
            out.push_str("RETURN\n");
        }
    }
}

fn print_ref(r: &VarRef) -> String {
    if r.indices.is_empty() {
        r.name.as_str().to_string()
    } else {
        let idx: Vec<String> = r.indices.iter().map(print_expr).collect();
        format!("{}({})", r.name, idx.join(","))
    }
}

// Precedence levels, higher binds tighter. Unary +/- sits below * and /
// as in Fortran.
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

// A unary minus is only grammatical as the leading term of an additive
// chain, so for parenthesization it behaves like an additive expression:
// "a + -b" is not valid Fortran, "-a + b" is.
const UNARY_NEG_PREC: u8 = 4;
const UNARY_NOT_PREC: u8 = 2;

fn expr_prec(e: &Expr) -> u8 {
    match &e.kind {
        ExprKind::IntLit(_) | ExprKind::RealLit(_) | ExprKind::Var(_) | ExprKind::Elem(..) => 8,
        ExprKind::Un { op: UnOp::Neg, .. } => UNARY_NEG_PREC,
        ExprKind::Un { op: UnOp::Not, .. } => UNARY_NOT_PREC,
        ExprKind::Bin { op, .. } => prec(*op),
    }
}

pub fn print_expr(e: &Expr) -> String {
    match &e.kind {
        ExprKind::IntLit(v) => format!("{v}"),
        ExprKind::RealLit(v) => print_real(*v),
        ExprKind::Var(n) => n.as_str().to_string(),
        ExprKind::Elem(n, idx) => {
            let parts: Vec<String> = idx.iter().map(print_expr).collect();
            format!("{}({})", n, parts.join(","))
        }
        ExprKind::Un { op, operand } => {
            let (sym, my_prec) = match op {
                UnOp::Neg => ("-", UNARY_NEG_PREC),
                UnOp::Not => (".NOT. ", UNARY_NOT_PREC),
            };
            let inner = print_expr(operand);
            if expr_prec(operand) <= my_prec {
                format!("{sym}({inner})")
            } else {
                format!("{sym}{inner}")
            }
        }
        ExprKind::Bin { op, lhs, rhs } => {
            let p = prec(*op);
            let ls = wrap(lhs, p, matches!(op, BinOp::Pow));
            // Left-associative chains need parens on an equal-precedence
            // right child; ** is right-associative so the rule flips.
            let rs = wrap(rhs, p, !matches!(op, BinOp::Pow));
            format!("{ls} {} {rs}", op.symbol())
        }
    }
}

fn wrap(e: &Expr, parent_prec: u8, strict: bool) -> String {
    let s = print_expr(e);
    let ep = expr_prec(e);
    let needs = if strict { ep <= parent_prec } else { ep < parent_prec };
    if needs {
        format!("({s})")
    } else {
        s
    }
}

/// Real literal in a form the lexer reads back as the same f64. The
/// shortest round-trip decimal from `{:?}` already is one.
fn print_real(v: f64) -> String {
    let s = format!("{v:?}");
    if s.contains('.') || s.contains('e') || s.contains('E') {
        s
    } else {
        format!("{s}.0")
    }
}
