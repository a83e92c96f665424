//! AST and symbol table for the subset.
//!
//! Identifiers keep their source spelling but compare and hash
//! case-insensitively, which is what Fortran name resolution needs.

use std::collections::HashMap;
use std::fmt;
use std::hash::{Hash, Hasher};

/// A Fortran identifier: original spelling retained, equality and
/// hashing fold case.
#[derive(Debug, Clone, Eq)]
pub struct Name(String);

impl Name {
    pub fn new(s: &str) -> Self {
        Name(s.to_string())
    }

    /// Spelling as written in the source.
    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// Lowercased key used for table lookups.
    pub fn key(&self) -> String {
        self.0.to_ascii_lowercase()
    }
}

impl PartialEq for Name {
    fn eq(&self, other: &Self) -> bool {
        self.0.eq_ignore_ascii_case(&other.0)
    }
}

impl Hash for Name {
    fn hash<H: Hasher>(&self, state: &mut H) {
        for b in self.0.bytes() {
            state.write_u8(b.to_ascii_lowercase());
        }
    }
}

impl fmt::Display for Name {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for Name {
    fn from(s: &str) -> Self {
        Name::new(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ElemTy {
    Integer,
    Real64,
}

impl fmt::Display for ElemTy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ElemTy::Integer => f.write_str("integer"),
            ElemTy::Real64 => f.write_str("real64"),
        }
    }
}

/// Expression result type. `Logical` only ever appears transiently in
/// `IF` conditions; there are no logical variables in the subset.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExprTy {
    Int,
    Real,
    Logical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    And,
    Or,
}

impl BinOp {
    pub fn is_relational(self) -> bool {
        matches!(
            self,
            BinOp::Eq | BinOp::Ne | BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge
        )
    }

    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Pow => "**",
            BinOp::Eq => "==",
            BinOp::Ne => "/=",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::And => ".AND.",
            BinOp::Or => ".OR.",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnOp {
    Neg,
    Not,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    pub kind: ExprKind,
    pub ty: ExprTy,
    pub line: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExprKind {
    IntLit(i64),
    RealLit(f64),
    /// Scalar reference.
    Var(Name),
    /// Array element reference.
    Elem(Name, Vec<Expr>),
    Un {
        op: UnOp,
        operand: Box<Expr>,
    },
    Bin {
        op: BinOp,
        lhs: Box<Expr>,
        rhs: Box<Expr>,
    },
}

/// Assignment target: scalar when `indices` is empty.
#[derive(Debug, Clone, PartialEq)]
pub struct VarRef {
    pub name: Name,
    pub indices: Vec<Expr>,
    pub line: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stmt {
    pub kind: StmtKind,
    /// (first, last) source line of the statement.
    pub span: (u32, u32),
}

#[derive(Debug, Clone, PartialEq)]
pub enum StmtKind {
    Assign {
        target: VarRef,
        value: Expr,
    },
    Do {
        var: Name,
        lower: Expr,
        upper: Expr,
        body: Vec<Stmt>,
    },
    If {
        cond: Expr,
        then_body: Vec<Stmt>,
        else_body: Vec<Stmt>,
    },
    Call {
        name: Name,
        args: Vec<Expr>,
    },
    Return,
    /// Comment line kept verbatim, `!` included.
    Comment(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DimRange {
    pub lower: Expr,
    pub upper: Expr,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Entity {
    pub name: Name,
    pub dims: Vec<DimRange>,
    pub init: Option<Expr>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Intent {
    In,
    Out,
    InOut,
    Local,
}

impl fmt::Display for Intent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Intent::In => f.write_str("IN"),
            Intent::Out => f.write_str("OUT"),
            Intent::InOut => f.write_str("INOUT"),
            Intent::Local => f.write_str("local"),
        }
    }
}

/// One declaration statement, normalized: `DIMENSION` attributes are
/// folded onto the entities at parse time so printing always uses the
/// entity-suffix form.
#[derive(Debug, Clone, PartialEq)]
pub struct Decl {
    pub ty: ElemTy,
    pub intent: Option<Intent>,
    pub parameter: bool,
    pub entities: Vec<Entity>,
    pub line: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub enum DeclItem {
    Decl(Decl),
    Comment { text: String, line: u32 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Subroutine {
    pub name: Name,
    pub params: Vec<Name>,
    pub decls: Vec<DeclItem>,
    pub body: Vec<Stmt>,
    pub span: (u32, u32),
}

#[derive(Debug, Clone, PartialEq)]
pub enum SymKind {
    Scalar,
    Array { dims: Vec<DimRange> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Symbol {
    pub name: Name,
    pub kind: SymKind,
    pub ty: ElemTy,
    pub intent: Intent,
    /// Compile-time value for `PARAMETER` constants.
    pub const_val: Option<i64>,
    pub line: u32,
}

impl Symbol {
    pub fn rank(&self) -> usize {
        match &self.kind {
            SymKind::Scalar => 0,
            SymKind::Array { dims } => dims.len(),
        }
    }

    pub fn is_array(&self) -> bool {
        matches!(self.kind, SymKind::Array { .. })
    }
}

/// Symbol table keyed case-insensitively; `order` preserves declaration
/// order for deterministic iteration.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SymbolTable {
    map: HashMap<Name, Symbol>,
    order: Vec<Name>,
}

impl SymbolTable {
    pub fn insert(&mut self, sym: Symbol) -> Option<Symbol> {
        let name = sym.name.clone();
        let prev = self.map.insert(name.clone(), sym);
        if prev.is_none() {
            self.order.push(name);
        }
        prev
    }

    pub fn get(&self, name: &Name) -> Option<&Symbol> {
        self.map.get(name)
    }

    pub fn lookup(&self, name: &str) -> Option<&Symbol> {
        self.map.get(&Name::new(name))
    }

    pub fn iter(&self) -> impl Iterator<Item = &Symbol> {
        self.order.iter().map(|n| &self.map[n])
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }
}

/// Structural equality that ignores source line information, used for
/// parse/print round-trip checks.
pub fn structural_eq(a: &Subroutine, b: &Subroutine) -> bool {
    a.name == b.name
        && a.params == b.params
        && a.decls.len() == b.decls.len()
        && a.decls.iter().zip(&b.decls).all(|(x, y)| decl_item_eq(x, y))
        && stmts_eq(&a.body, &b.body)
}

fn decl_item_eq(a: &DeclItem, b: &DeclItem) -> bool {
    match (a, b) {
        (DeclItem::Comment { text: ta, .. }, DeclItem::Comment { text: tb, .. }) => ta == tb,
        (DeclItem::Decl(da), DeclItem::Decl(db)) => {
            da.ty == db.ty
                && da.intent == db.intent
                && da.parameter == db.parameter
                && da.entities.len() == db.entities.len()
                && da.entities.iter().zip(&db.entities).all(|(x, y)| {
                    x.name == y.name
                        && x.dims.len() == y.dims.len()
                        && x.dims.iter().zip(&y.dims).all(|(dx, dy)| {
                            expr_eq(&dx.lower, &dy.lower) && expr_eq(&dx.upper, &dy.upper)
                        })
                        && match (&x.init, &y.init) {
                            (None, None) => true,
                            (Some(ix), Some(iy)) => expr_eq(ix, iy),
                            _ => false,
                        }
                })
        }
        _ => false,
    }
}

fn stmts_eq(a: &[Stmt], b: &[Stmt]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| stmt_eq(x, y))
}

fn stmt_eq(a: &Stmt, b: &Stmt) -> bool {
    match (&a.kind, &b.kind) {
        (StmtKind::Assign { target: t1, value: v1 }, StmtKind::Assign { target: t2, value: v2 }) => {
            t1.name == t2.name
                && t1.indices.len() == t2.indices.len()
                && t1.indices.iter().zip(&t2.indices).all(|(x, y)| expr_eq(x, y))
                && expr_eq(v1, v2)
        }
        (
            StmtKind::Do { var: v1, lower: l1, upper: u1, body: b1 },
            StmtKind::Do { var: v2, lower: l2, upper: u2, body: b2 },
        ) => v1 == v2 && expr_eq(l1, l2) && expr_eq(u1, u2) && stmts_eq(b1, b2),
        (
            StmtKind::If { cond: c1, then_body: t1, else_body: e1 },
            StmtKind::If { cond: c2, then_body: t2, else_body: e2 },
        ) => expr_eq(c1, c2) && stmts_eq(t1, t2) && stmts_eq(e1, e2),
        (StmtKind::Call { name: n1, args: a1 }, StmtKind::Call { name: n2, args: a2 }) => {
            n1 == n2 && a1.len() == a2.len() && a1.iter().zip(a2).all(|(x, y)| expr_eq(x, y))
        }
        (StmtKind::Return, StmtKind::Return) => true,
        (StmtKind::Comment(c1), StmtKind::Comment(c2)) => c1 == c2,
        _ => false,
    }
}

fn expr_eq(a: &Expr, b: &Expr) -> bool {
    if a.ty != b.ty {
        return false;
    }
    match (&a.kind, &b.kind) {
        (ExprKind::IntLit(x), ExprKind::IntLit(y)) => x == y,
        (ExprKind::RealLit(x), ExprKind::RealLit(y)) => x.to_bits() == y.to_bits(),
        (ExprKind::Var(x), ExprKind::Var(y)) => x == y,
        (ExprKind::Elem(n1, i1), ExprKind::Elem(n2, i2)) => {
            n1 == n2 && i1.len() == i2.len() && i1.iter().zip(i2).all(|(x, y)| expr_eq(x, y))
        }
        (ExprKind::Un { op: o1, operand: e1 }, ExprKind::Un { op: o2, operand: e2 }) => {
            o1 == o2 && expr_eq(e1, e2)
        }
        (
            ExprKind::Bin { op: o1, lhs: l1, rhs: r1 },
            ExprKind::Bin { op: o2, lhs: l2, rhs: r2 },
        ) => o1 == o2 && expr_eq(l1, l2) && expr_eq(r1, r2),
        _ => false,
    }
}
