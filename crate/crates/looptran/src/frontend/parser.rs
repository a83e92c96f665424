//! Recursive-descent parser producing a [`Subroutine`] plus its
//! [`SymbolTable`].
//!
//! Declarations are parsed first so the body parser can classify
//! `name(...)` as an array reference (there are no function references
//! in the subset) and type every expression bottom-up. Statements the
//! subset deliberately excludes (GOTO, ALLOCATE, I/O, ...) are reported
//! as `UnsupportedConstruct` rather than generic parse errors.

use super::ast::*;
use super::lexer::{Kw, OpTok, PunctTok, Token, TokenKind};
use super::{FrontendError, Result};

/// Statement keywords we recognize but refuse, so the error names the
/// construct instead of complaining about syntax.
const UNSUPPORTED_STMTS: &[&str] = &[
    "allocate",
    "deallocate",
    "goto",
    "while",
    "where",
    "select",
    "print",
    "write",
    "read",
    "open",
    "close",
    "stop",
    "exit",
    "cycle",
    "common",
    "data",
    "save",
    "function",
    "module",
    "use",
    "forall",
];

struct Cursor<'t> {
    toks: &'t [Token],
    pos: usize,
}

impl<'t> Cursor<'t> {
    fn new(toks: &'t [Token]) -> Self {
        Cursor { toks, pos: 0 }
    }

    /// Next token with free-form continuations folded away: an `&` at
    /// the end of a line swallows the line break (plus an optional
    /// trailing comment and an optional leading `&` on the next line).
    fn peek(&self) -> Option<&'t Token> {
        let mut p = self.pos;
        loop {
            let t = self.toks.get(p)?;
            if matches!(t.kind, TokenKind::Punct(PunctTok::Amp)) {
                p = skip_continuation(self.toks, p);
                continue;
            }
            return Some(t);
        }
    }

    fn advance(&mut self) -> Option<&'t Token> {
        loop {
            let t = self.toks.get(self.pos)?;
            if matches!(t.kind, TokenKind::Punct(PunctTok::Amp)) {
                self.pos = skip_continuation(self.toks, self.pos);
                continue;
            }
            self.pos += 1;
            return Some(t);
        }
    }

    fn line(&self) -> u32 {
        self.peek().map_or_else(
            || self.toks.last().map_or(1, |t| t.line),
            |t| t.line,
        )
    }
}

/// Position just past an `&` continuation: optional comment, the line
/// break, and an optional leading `&` on the continued line.
fn skip_continuation(toks: &[Token], amp_pos: usize) -> usize {
    let mut p = amp_pos + 1;
    if toks.get(p).is_some_and(|t| t.kind == TokenKind::Comment) {
        p += 1;
    }
    if toks.get(p).is_some_and(|t| t.kind == TokenKind::Eol) {
        p += 1;
    }
    if toks
        .get(p)
        .is_some_and(|t| matches!(t.kind, TokenKind::Punct(PunctTok::Amp)))
    {
        p += 1;
    }
    p
}

fn describe(tok: Option<&Token>) -> String {
    match tok {
        None => "end of input".to_string(),
        Some(t) => match &t.kind {
            TokenKind::Eol => "end of line".to_string(),
            _ => format!("'{}'", t.text),
        },
    }
}

struct Parser<'t> {
    cur: Cursor<'t>,
    syms: SymbolTable,
    /// Dummy-argument names from the SUBROUTINE header.
    dummies: Vec<Name>,
    /// DO indices currently in scope; assigning to one is an error.
    active_loop_vars: Vec<Name>,
}

/// Parse one `SUBROUTINE ... END SUBROUTINE` unit.
pub fn parse_unit(tokens: &[Token]) -> Result<(Subroutine, SymbolTable)> {
    let mut p = Parser {
        cur: Cursor::new(tokens),
        syms: SymbolTable::default(),
        dummies: Vec::new(),
        active_loop_vars: Vec::new(),
    };
    let sub = p.subroutine()?;
    p.skip_blank_lines();
    if let Some(t) = p.cur.peek() {
        if matches!(t.kind, TokenKind::Keyword(Kw::Subroutine)) {
            return Err(FrontendError::UnsupportedConstruct {
                line: t.line,
                construct: "more than one subroutine per source unit".into(),
            });
        }
        return Err(p.err_expected("end of input", Some(t)));
    }
    Ok((sub, p.syms))
}

impl<'t> Parser<'t> {
    fn err_expected(&self, expected: &str, found: Option<&Token>) -> FrontendError {
        FrontendError::Parse {
            line: found.map_or_else(|| self.cur.line(), |t| t.line),
            expected: expected.to_string(),
            found: describe(found),
        }
    }

    fn skip_blank_lines(&mut self) {
        while self
            .cur
            .peek()
            .is_some_and(|t| matches!(t.kind, TokenKind::Eol))
        {
            self.cur.advance();
        }
    }

    fn expect_eol(&mut self) -> Result<()> {
        match self.cur.peek() {
            None => Ok(()),
            Some(t) if matches!(t.kind, TokenKind::Eol) => {
                self.cur.advance();
                Ok(())
            }
            Some(t) if matches!(t.kind, TokenKind::Comment) => {
                // Trailing comment after a statement ends the line too.
                // It is dropped: only full-line comments are kept as
                // statements.
                self.cur.advance();
                self.expect_eol()
            }
            other => Err(self.err_expected("end of line", other)),
        }
    }

    fn expect_punct(&mut self, p: PunctTok, what: &str) -> Result<u32> {
        match self.cur.peek() {
            Some(t) if t.kind == TokenKind::Punct(p) => {
                let line = t.line;
                self.cur.advance();
                Ok(line)
            }
            other => Err(self.err_expected(what, other)),
        }
    }

    fn expect_kw(&mut self, kw: Kw, what: &str) -> Result<u32> {
        match self.cur.peek() {
            Some(t) if t.kind == TokenKind::Keyword(kw) => {
                let line = t.line;
                self.cur.advance();
                Ok(line)
            }
            other => Err(self.err_expected(what, other)),
        }
    }

    fn eat_punct(&mut self, p: PunctTok) -> bool {
        if self.cur.peek().is_some_and(|t| t.kind == TokenKind::Punct(p)) {
            self.cur.advance();
            return true;
        }
        false
    }

    fn ident(&mut self, what: &str) -> Result<(Name, u32)> {
        match self.cur.peek() {
            Some(t) if matches!(t.kind, TokenKind::Ident) => {
                let (name, line) = (Name::new(&t.text), t.line);
                self.cur.advance();
                Ok((name, line))
            }
            other => Err(self.err_expected(what, other)),
        }
    }

    /// Consume an identifier with the given (case-insensitive) spelling;
    /// used for context-sensitive words like `KIND` or `NONE`.
    fn expect_word(&mut self, word: &str, what: &str) -> Result<()> {
        match self.cur.peek() {
            Some(t)
                if matches!(t.kind, TokenKind::Ident)
                    && t.text.eq_ignore_ascii_case(word) =>
            {
                self.cur.advance();
                Ok(())
            }
            other => Err(self.err_expected(what, other)),
        }
    }

    // ---- unit structure ------------------------------------------------

    fn subroutine(&mut self) -> Result<Subroutine> {
        // Leading comments and blank lines before the header are file
        // trivia, not part of the unit.
        loop {
            match self.cur.peek() {
                Some(t) if matches!(t.kind, TokenKind::Eol | TokenKind::Comment) => {
                    self.cur.advance();
                }
                _ => break,
            }
        }
        let start_line = self.expect_kw(Kw::Subroutine, "SUBROUTINE")?;
        let (name, _) = self.ident("subroutine name")?;
        self.expect_punct(PunctTok::LParen, "'('")?;
        let mut params = Vec::new();
        if !self.eat_punct(PunctTok::RParen) {
            loop {
                let (p, _) = self.ident("dummy argument name")?;
                params.push(p);
                if self.eat_punct(PunctTok::Comma) {
                    continue;
                }
                self.expect_punct(PunctTok::RParen, "')'")?;
                break;
            }
        }
        self.expect_eol()?;
        self.dummies = params.clone();

        let decls = self.declarations()?;
        self.check_dummies_declared()?;
        let body = self.statements(&[BlockEnd::EndSubroutine])?;
        // statements() stops right before END SUBROUTINE.
        let end_line = self.expect_kw(Kw::End, "END SUBROUTINE")?;
        self.expect_kw(Kw::Subroutine, "SUBROUTINE after END")?;
        if self
            .cur
            .peek()
            .is_some_and(|t| matches!(t.kind, TokenKind::Ident))
        {
            let (end_name, line) = self.ident("subroutine name")?;
            if end_name != name {
                return Err(FrontendError::Parse {
                    line,
                    expected: format!("subroutine name '{name}'"),
                    found: format!("'{end_name}'"),
                });
            }
        }
        self.expect_eol()?;
        self.skip_blank_lines();

        let sub = Subroutine {
            name,
            params,
            decls,
            body,
            span: (start_line, end_line),
        };
        self.validate_unit(&sub)?;
        Ok(sub)
    }

    fn check_dummies_declared(&self) -> Result<()> {
        for d in &self.dummies {
            if self.syms.get(d).is_none() {
                return Err(FrontendError::UndeclaredSymbol {
                    name: d.as_str().to_string(),
                    line: 1,
                });
            }
        }
        Ok(())
    }

    // ---- declarations --------------------------------------------------

    fn declarations(&mut self) -> Result<Vec<DeclItem>> {
        let mut items = Vec::new();
        // Comments may belong to the declaration section or, when they
        // directly precede the first executable statement, to the body
        // (tag lines live there). Buffer them with the cursor position
        // so they can be handed back.
        let mut pending: Vec<(String, u32, usize)> = Vec::new();
        loop {
            self.skip_blank_lines();
            let Some(t) = self.cur.peek() else { break };
            match &t.kind {
                TokenKind::Comment => {
                    pending.push((t.text.clone(), t.line, self.cur.pos));
                    self.cur.advance();
                    self.expect_eol()?;
                }
                TokenKind::Keyword(Kw::Implicit) => {
                    for (text, line, _) in pending.drain(..) {
                        items.push(DeclItem::Comment { text, line });
                    }
                    self.cur.advance();
                    self.expect_word("none", "NONE after IMPLICIT")?;
                    self.expect_eol()?;
                }
                TokenKind::Keyword(Kw::Integer) | TokenKind::Keyword(Kw::Real) => {
                    for (text, line, _) in pending.drain(..) {
                        items.push(DeclItem::Comment { text, line });
                    }
                    let d = self.declaration()?;
                    items.push(DeclItem::Decl(d));
                }
                _ => break,
            }
        }
        if let Some((_, _, pos)) = pending.first() {
            self.cur.pos = *pos;
        }
        Ok(items)
    }

    fn declaration(&mut self) -> Result<Decl> {
        let t = self.cur.peek().unwrap();
        let line = t.line;
        let ty = match t.kind {
            TokenKind::Keyword(Kw::Integer) => {
                self.cur.advance();
                ElemTy::Integer
            }
            TokenKind::Keyword(Kw::Real) => {
                self.cur.advance();
                // REAL(KIND=8) is the only supported real type.
                if !self.eat_punct(PunctTok::LParen) {
                    return Err(FrontendError::UnsupportedConstruct {
                        line,
                        construct: "REAL without (KIND=8)".into(),
                    });
                }
                let has_kind_word = self
                    .cur
                    .peek()
                    .is_some_and(|t| {
                        matches!(t.kind, TokenKind::Ident) && t.text.eq_ignore_ascii_case("kind")
                    });
                let ok = if has_kind_word {
                    self.cur.advance();
                    match self.cur.peek() {
                        Some(t) if t.kind == TokenKind::Op(OpTok::Assign) => {
                            self.cur.advance();
                        }
                        other => return Err(self.err_expected("'=' after KIND", other)),
                    }
                    self.int_literal()? == 8
                } else {
                    self.int_literal()? == 8
                };
                if !ok {
                    return Err(FrontendError::UnsupportedConstruct {
                        line,
                        construct: "REAL kind other than 8".into(),
                    });
                }
                self.expect_punct(PunctTok::RParen, "')' after kind")?;
                ElemTy::Real64
            }
            _ => unreachable!(),
        };

        let mut intent = None;
        let mut parameter = false;
        let mut dim_attr: Option<Vec<DimRange>> = None;
        while self.eat_punct(PunctTok::Comma) {
            match self.cur.peek().map(|t| t.kind.clone()) {
                Some(TokenKind::Keyword(Kw::Intent)) => {
                    self.cur.advance();
                    self.expect_punct(PunctTok::LParen, "'(' after INTENT")?;
                    let i = match self.cur.peek() {
                        Some(t) if matches!(t.kind, TokenKind::Ident) => {
                            match t.text.to_ascii_lowercase().as_str() {
                                "in" => Intent::In,
                                "out" => Intent::Out,
                                "inout" => Intent::InOut,
                                _ => return Err(self.err_expected("IN, OUT or INOUT", Some(t))),
                            }
                        }
                        other => return Err(self.err_expected("IN, OUT or INOUT", other)),
                    };
                    self.cur.advance();
                    self.expect_punct(PunctTok::RParen, "')' after intent")?;
                    intent = Some(i);
                }
                Some(TokenKind::Keyword(Kw::Parameter)) => {
                    self.cur.advance();
                    parameter = true;
                }
                Some(TokenKind::Keyword(Kw::Dimension)) => {
                    self.cur.advance();
                    self.expect_punct(PunctTok::LParen, "'(' after DIMENSION")?;
                    dim_attr = Some(self.dim_ranges()?);
                }
                other => {
                    return Err(FrontendError::Parse {
                        line: self.cur.line(),
                        expected: "INTENT, DIMENSION or PARAMETER".into(),
                        found: format!("{other:?}"),
                    })
                }
            }
        }
        self.expect_punct(PunctTok::DoubleColon, "'::'")?;

        let mut entities = Vec::new();
        loop {
            let (name, nline) = self.ident("declared name")?;
            let dims = if self.eat_punct(PunctTok::LParen) {
                self.dim_ranges()?
            } else {
                dim_attr.clone().unwrap_or_default()
            };
            let init = if self
                .cur
                .peek()
                .is_some_and(|t| t.kind == TokenKind::Op(OpTok::Assign))
            {
                self.cur.advance();
                if !parameter {
                    return Err(FrontendError::UnsupportedConstruct {
                        line: nline,
                        construct: "initializer on a non-PARAMETER declaration".into(),
                    });
                }
                Some(self.expr()?)
            } else {
                None
            };
            if parameter && init.is_none() {
                return Err(FrontendError::Parse {
                    line: nline,
                    expected: "'=' initializer for PARAMETER".into(),
                    found: describe(self.cur.peek()),
                });
            }
            entities.push(Entity { name, dims, init });
            if !self.eat_punct(PunctTok::Comma) {
                break;
            }
        }
        self.expect_eol()?;

        let decl = Decl {
            ty,
            intent,
            parameter,
            entities,
            line,
        };
        self.register_decl(&decl)?;
        Ok(decl)
    }

    fn register_decl(&mut self, decl: &Decl) -> Result<()> {
        for e in &decl.entities {
            let is_dummy = self.dummies.contains(&e.name);
            if decl.intent.is_some() && !is_dummy {
                return Err(FrontendError::Parse {
                    line: decl.line,
                    expected: "INTENT only on dummy arguments".into(),
                    found: format!("'{}'", e.name),
                });
            }
            if !e.dims.is_empty() && !is_dummy {
                return Err(FrontendError::UnsupportedConstruct {
                    line: decl.line,
                    construct: format!("local array '{}' (arrays must be dummy arguments)", e.name),
                });
            }
            if decl.parameter {
                if decl.ty != ElemTy::Integer {
                    return Err(FrontendError::UnsupportedConstruct {
                        line: decl.line,
                        construct: "non-integer PARAMETER".into(),
                    });
                }
                if is_dummy {
                    return Err(FrontendError::Parse {
                        line: decl.line,
                        expected: "PARAMETER on a local name".into(),
                        found: format!("dummy argument '{}'", e.name),
                    });
                }
            }
            let const_val = match &e.init {
                None => None,
                Some(expr) => Some(self.fold_int_const(expr)?),
            };
            let intent = decl
                .intent
                .unwrap_or(if is_dummy { Intent::InOut } else { Intent::Local });
            let sym = Symbol {
                name: e.name.clone(),
                kind: if e.dims.is_empty() {
                    SymKind::Scalar
                } else {
                    SymKind::Array { dims: e.dims.clone() }
                },
                ty: decl.ty,
                intent,
                const_val,
                line: decl.line,
            };
            if self.syms.insert(sym).is_some() {
                return Err(FrontendError::DuplicateDecl {
                    name: e.name.as_str().to_string(),
                    line: decl.line,
                });
            }
        }
        Ok(())
    }

    /// Evaluate an integer constant expression over previously declared
    /// PARAMETER names.
    fn fold_int_const(&self, e: &Expr) -> Result<i64> {
        let bad = |line| FrontendError::Type {
            line,
            message: "PARAMETER initializer must be an integer constant expression".into(),
        };
        match &e.kind {
            ExprKind::IntLit(v) => Ok(*v),
            ExprKind::Var(n) => self
                .syms
                .get(n)
                .and_then(|s| s.const_val)
                .ok_or_else(|| bad(e.line)),
            ExprKind::Un { op: UnOp::Neg, operand } => Ok(-self.fold_int_const(operand)?),
            ExprKind::Bin { op, lhs, rhs } => {
                let (l, r) = (self.fold_int_const(lhs)?, self.fold_int_const(rhs)?);
                match op {
                    BinOp::Add => Ok(l + r),
                    BinOp::Sub => Ok(l - r),
                    BinOp::Mul => Ok(l * r),
                    BinOp::Div if r != 0 => Ok(l / r),
                    _ => Err(bad(e.line)),
                }
            }
            _ => Err(bad(e.line)),
        }
    }

    fn dim_ranges(&mut self) -> Result<Vec<DimRange>> {
        let mut dims = Vec::new();
        loop {
            let first = self.expr()?;
            let range = if self.eat_punct(PunctTok::Colon) {
                let upper = self.expr()?;
                DimRange { lower: first, upper }
            } else {
                // Bare extent: lower bound defaults to 1.
                let line = first.line;
                DimRange {
                    lower: Expr {
                        kind: ExprKind::IntLit(1),
                        ty: ExprTy::Int,
                        line,
                    },
                    upper: first,
                }
            };
            if range.lower.ty != ExprTy::Int || range.upper.ty != ExprTy::Int {
                return Err(FrontendError::Type {
                    line: range.lower.line,
                    message: "array bounds must be integer expressions".into(),
                });
            }
            dims.push(range);
            if self.eat_punct(PunctTok::Comma) {
                continue;
            }
            self.expect_punct(PunctTok::RParen, "')' after bounds")?;
            break;
        }
        Ok(dims)
    }

    fn int_literal(&mut self) -> Result<i64> {
        match self.cur.peek() {
            Some(t) if matches!(t.kind, TokenKind::Int) => {
                let v = t.text.parse().map_err(|_| FrontendError::Parse {
                    line: t.line,
                    expected: "integer literal".into(),
                    found: format!("'{}'", t.text),
                })?;
                self.cur.advance();
                Ok(v)
            }
            other => Err(self.err_expected("integer literal", other)),
        }
    }

    // ---- statements ----------------------------------------------------

    fn statements(&mut self, ends: &[BlockEnd]) -> Result<Vec<Stmt>> {
        let mut out = Vec::new();
        loop {
            self.skip_blank_lines();
            let Some(t) = self.cur.peek() else {
                return Err(self.err_expected(ends[0].describe(), None));
            };
            if block_end_at(&self.cur, ends).is_some() {
                return Ok(out);
            }
            let stmt = self.statement(t.line)?;
            out.push(stmt);
        }
    }

    fn statement(&mut self, line: u32) -> Result<Stmt> {
        let t = self.cur.peek().unwrap();
        match &t.kind {
            TokenKind::Comment => {
                let text = t.text.clone();
                self.cur.advance();
                self.expect_eol()?;
                Ok(Stmt {
                    kind: StmtKind::Comment(text),
                    span: (line, line),
                })
            }
            TokenKind::Keyword(Kw::Do) => self.do_stmt(line),
            TokenKind::Keyword(Kw::If) => self.if_stmt(line),
            TokenKind::Keyword(Kw::Call) => self.call_stmt(line),
            TokenKind::Keyword(Kw::Return) => {
                self.cur.advance();
                self.expect_eol()?;
                Ok(Stmt {
                    kind: StmtKind::Return,
                    span: (line, line),
                })
            }
            TokenKind::Ident => {
                if UNSUPPORTED_STMTS.contains(&t.text.to_ascii_lowercase().as_str()) {
                    return Err(FrontendError::UnsupportedConstruct {
                        line,
                        construct: t.text.to_ascii_uppercase(),
                    });
                }
                self.assign_stmt(line)
            }
            TokenKind::Keyword(kw) => Err(FrontendError::Parse {
                line,
                expected: "statement".into(),
                found: format!("'{:?}'", kw),
            }),
            _ => Err(self.err_expected("statement", Some(t))),
        }
    }

    fn do_stmt(&mut self, line: u32) -> Result<Stmt> {
        self.cur.advance(); // DO
        // A DO WHILE header is out of subset.
        if let Some(t) = self.cur.peek() {
            if matches!(t.kind, TokenKind::Ident) && t.text.eq_ignore_ascii_case("while") {
                return Err(FrontendError::UnsupportedConstruct {
                    line,
                    construct: "DO WHILE".into(),
                });
            }
        }
        let (var, vline) = self.ident("DO index variable")?;
        let sym = self.resolve(&var, vline)?;
        if sym.is_array() || sym.ty != ElemTy::Integer {
            return Err(FrontendError::Type {
                line: vline,
                message: format!("DO index '{var}' must be an integer scalar"),
            });
        }
        match self.cur.peek() {
            Some(t) if t.kind == TokenKind::Op(OpTok::Assign) => {
                self.cur.advance();
            }
            other => return Err(self.err_expected("'=' in DO header", other)),
        }
        let lower = self.expr()?;
        self.expect_punct(PunctTok::Comma, "',' in DO header")?;
        let upper = self.expr()?;
        if self.eat_punct(PunctTok::Comma) {
            return Err(FrontendError::UnsupportedConstruct {
                line,
                construct: "DO stride".into(),
            });
        }
        for (what, e) in [("lower", &lower), ("upper", &upper)] {
            if e.ty != ExprTy::Int {
                return Err(FrontendError::Type {
                    line: e.line,
                    message: format!("DO {what} bound must be an integer expression"),
                });
            }
            if expr_mentions_array(e) {
                return Err(FrontendError::Type {
                    line: e.line,
                    message: format!("DO {what} bound may only reference integer scalars"),
                });
            }
        }
        self.expect_eol()?;

        self.active_loop_vars.push(var.clone());
        let body = self.statements(&[BlockEnd::EndDo])?;
        self.active_loop_vars.pop();
        let end_line = self.consume_block_end(BlockEnd::EndDo)?;
        Ok(Stmt {
            kind: StmtKind::Do {
                var,
                lower,
                upper,
                body,
            },
            span: (line, end_line),
        })
    }

    fn if_stmt(&mut self, line: u32) -> Result<Stmt> {
        self.cur.advance(); // IF
        self.expect_punct(PunctTok::LParen, "'(' after IF")?;
        let cond = self.expr()?;
        if cond.ty != ExprTy::Logical {
            return Err(FrontendError::Type {
                line: cond.line,
                message: "IF condition must be a logical expression".into(),
            });
        }
        self.expect_punct(PunctTok::RParen, "')' after IF condition")?;
        self.expect_kw(Kw::Then, "THEN (only block IF is supported)")?;
        self.expect_eol()?;
        let then_body = self.statements(&[BlockEnd::EndIf, BlockEnd::Else])?;
        let mut else_body = Vec::new();
        let end_line;
        if block_end_at(&self.cur, &[BlockEnd::Else]).is_some() {
            self.consume_block_end(BlockEnd::Else)?;
            else_body = self.statements(&[BlockEnd::EndIf])?;
            end_line = self.consume_block_end(BlockEnd::EndIf)?;
        } else {
            end_line = self.consume_block_end(BlockEnd::EndIf)?;
        }
        Ok(Stmt {
            kind: StmtKind::If {
                cond,
                then_body,
                else_body,
            },
            span: (line, end_line),
        })
    }

    fn call_stmt(&mut self, line: u32) -> Result<Stmt> {
        self.cur.advance(); // CALL
        let (name, _) = self.ident("callee name")?;
        let mut args = Vec::new();
        if self.eat_punct(PunctTok::LParen) && !self.eat_punct(PunctTok::RParen) {
            loop {
                args.push(self.call_arg()?);
                if self.eat_punct(PunctTok::Comma) {
                    continue;
                }
                self.expect_punct(PunctTok::RParen, "')' after call arguments")?;
                break;
            }
        }
        self.expect_eol()?;
        Ok(Stmt {
            kind: StmtKind::Call { name, args },
            span: (line, line),
        })
    }

    /// A call argument is an expression, or a bare array name passed by
    /// reference.
    fn call_arg(&mut self) -> Result<Expr> {
        if let Some(t) = self.cur.peek() {
            if matches!(t.kind, TokenKind::Ident) {
                let name = Name::new(&t.text);
                let line = t.line;
                if let Some(sym) = self.syms.get(&name) {
                    if sym.is_array() {
                        // Whole-array actual only when not subscripted.
                        let next_is_paren = {
                            let mut c = Cursor {
                                toks: self.cur.toks,
                                pos: self.cur.pos,
                            };
                            c.advance();
                            c.peek()
                                .is_some_and(|t| t.kind == TokenKind::Punct(PunctTok::LParen))
                        };
                        if !next_is_paren {
                            let ty = elem_expr_ty(sym.ty);
                            self.cur.advance();
                            return Ok(Expr {
                                kind: ExprKind::Var(name),
                                ty,
                                line,
                            });
                        }
                    }
                }
            }
        }
        self.expr()
    }

    fn assign_stmt(&mut self, line: u32) -> Result<Stmt> {
        let (name, nline) = self.ident("assignment target")?;
        let sym = self.resolve(&name, nline)?.clone();
        let mut indices = Vec::new();
        if self.eat_punct(PunctTok::LParen) {
            if !sym.is_array() {
                return Err(FrontendError::Type {
                    line: nline,
                    message: format!("'{name}' is a scalar but is indexed"),
                });
            }
            loop {
                let idx = self.expr()?;
                if idx.ty != ExprTy::Int {
                    return Err(FrontendError::Type {
                        line: idx.line,
                        message: "array index must be an integer expression".into(),
                    });
                }
                indices.push(idx);
                if self.eat_punct(PunctTok::Comma) {
                    continue;
                }
                self.expect_punct(PunctTok::RParen, "')' after indices")?;
                break;
            }
            if indices.len() != sym.rank() {
                return Err(FrontendError::RankMismatch {
                    name: name.as_str().to_string(),
                    line: nline,
                    declared: sym.rank(),
                    used: indices.len(),
                });
            }
        } else if sym.is_array() {
            return Err(FrontendError::Type {
                line: nline,
                message: format!("whole-array assignment to '{name}' is not supported"),
            });
        }
        if indices.is_empty() {
            if self.active_loop_vars.contains(&name) {
                return Err(FrontendError::UnsupportedConstruct {
                    line: nline,
                    construct: format!("assignment to active DO index '{name}'"),
                });
            }
            if sym.const_val.is_some() {
                return Err(FrontendError::Type {
                    line: nline,
                    message: format!("assignment to PARAMETER constant '{name}'"),
                });
            }
        }
        match self.cur.peek() {
            Some(t) if t.kind == TokenKind::Op(OpTok::Assign) => {
                self.cur.advance();
            }
            other => return Err(self.err_expected("'='", other)),
        }
        let value = self.expr()?;
        let target_ty = if indices.is_empty() && sym.is_array() {
            unreachable!()
        } else {
            sym.ty
        };
        match (target_ty, value.ty) {
            (ElemTy::Integer, ExprTy::Int) | (ElemTy::Real64, ExprTy::Real) => {}
            (ElemTy::Real64, ExprTy::Int) => {} // widened on assignment
            (ElemTy::Integer, ExprTy::Real) => {
                return Err(FrontendError::UnsupportedConstruct {
                    line,
                    construct: "implicit real-to-integer conversion".into(),
                })
            }
            (_, ExprTy::Logical) => {
                return Err(FrontendError::Type {
                    line,
                    message: "cannot assign a logical expression".into(),
                })
            }
        }
        self.expect_eol()?;
        Ok(Stmt {
            kind: StmtKind::Assign {
                target: VarRef {
                    name,
                    indices,
                    line: nline,
                },
                value,
            },
            span: (line, line),
        })
    }

    fn consume_block_end(&mut self, which: BlockEnd) -> Result<u32> {
        let Some(n) = block_end_at(&self.cur, &[which]) else {
            return Err(self.err_expected(which.describe(), self.cur.peek()));
        };
        let line = self.cur.peek().unwrap().line;
        for _ in 0..n {
            self.cur.advance();
        }
        self.expect_eol()?;
        Ok(line)
    }

    // ---- expressions (Fortran operator precedence) ----------------------

    fn expr(&mut self) -> Result<Expr> {
        self.or_expr()
    }

    fn or_expr(&mut self) -> Result<Expr> {
        let mut lhs = self.and_expr()?;
        while self
            .cur
            .peek()
            .is_some_and(|t| t.kind == TokenKind::Op(OpTok::Or))
        {
            let line = self.cur.peek().unwrap().line;
            self.cur.advance();
            let rhs = self.and_expr()?;
            lhs = self.mk_logical(BinOp::Or, lhs, rhs, line)?;
        }
        Ok(lhs)
    }

    fn and_expr(&mut self) -> Result<Expr> {
        let mut lhs = self.not_expr()?;
        while self
            .cur
            .peek()
            .is_some_and(|t| t.kind == TokenKind::Op(OpTok::And))
        {
            let line = self.cur.peek().unwrap().line;
            self.cur.advance();
            let rhs = self.not_expr()?;
            lhs = self.mk_logical(BinOp::And, lhs, rhs, line)?;
        }
        Ok(lhs)
    }

    fn not_expr(&mut self) -> Result<Expr> {
        if self
            .cur
            .peek()
            .is_some_and(|t| t.kind == TokenKind::Op(OpTok::Not))
        {
            let line = self.cur.peek().unwrap().line;
            self.cur.advance();
            let operand = self.not_expr()?;
            if operand.ty != ExprTy::Logical {
                return Err(FrontendError::Type {
                    line,
                    message: ".NOT. needs a logical operand".into(),
                });
            }
            return Ok(Expr {
                kind: ExprKind::Un {
                    op: UnOp::Not,
                    operand: Box::new(operand),
                },
                ty: ExprTy::Logical,
                line,
            });
        }
        self.rel_expr()
    }

    fn rel_expr(&mut self) -> Result<Expr> {
        let lhs = self.add_expr()?;
        let op = match self.cur.peek().map(|t| &t.kind) {
            Some(TokenKind::Op(OpTok::Eq)) => Some(BinOp::Eq),
            Some(TokenKind::Op(OpTok::Ne)) => Some(BinOp::Ne),
            Some(TokenKind::Op(OpTok::Lt)) => Some(BinOp::Lt),
            Some(TokenKind::Op(OpTok::Le)) => Some(BinOp::Le),
            Some(TokenKind::Op(OpTok::Gt)) => Some(BinOp::Gt),
            Some(TokenKind::Op(OpTok::Ge)) => Some(BinOp::Ge),
            _ => None,
        };
        let Some(op) = op else { return Ok(lhs) };
        let line = self.cur.peek().unwrap().line;
        self.cur.advance();
        let rhs = self.add_expr()?;
        if lhs.ty == ExprTy::Logical || rhs.ty == ExprTy::Logical {
            return Err(FrontendError::Type {
                line,
                message: "relational operands must be numeric".into(),
            });
        }
        Ok(Expr {
            kind: ExprKind::Bin {
                op,
                lhs: Box::new(lhs),
                rhs: Box::new(rhs),
            },
            ty: ExprTy::Logical,
            line,
        })
    }

    fn add_expr(&mut self) -> Result<Expr> {
        // Fortran puts unary +/- below * and /: -a*b parses as -(a*b).
        let leading = match self.cur.peek().map(|t| &t.kind) {
            Some(TokenKind::Op(OpTok::Minus)) => {
                let line = self.cur.peek().unwrap().line;
                self.cur.advance();
                Some((true, line))
            }
            Some(TokenKind::Op(OpTok::Plus)) => {
                let line = self.cur.peek().unwrap().line;
                self.cur.advance();
                Some((false, line))
            }
            _ => None,
        };
        let mut lhs = self.mul_expr()?;
        if let Some((neg, line)) = leading {
            if lhs.ty == ExprTy::Logical {
                return Err(FrontendError::Type {
                    line,
                    message: "unary sign needs a numeric operand".into(),
                });
            }
            if neg {
                let ty = lhs.ty;
                lhs = Expr {
                    kind: ExprKind::Un {
                        op: UnOp::Neg,
                        operand: Box::new(lhs),
                    },
                    ty,
                    line,
                };
            }
        }
        loop {
            let op = match self.cur.peek().map(|t| &t.kind) {
                Some(TokenKind::Op(OpTok::Plus)) => BinOp::Add,
                Some(TokenKind::Op(OpTok::Minus)) => BinOp::Sub,
                _ => return Ok(lhs),
            };
            let line = self.cur.peek().unwrap().line;
            self.cur.advance();
            let rhs = self.mul_expr()?;
            lhs = self.mk_arith(op, lhs, rhs, line)?;
        }
    }

    fn mul_expr(&mut self) -> Result<Expr> {
        let mut lhs = self.pow_expr()?;
        loop {
            let op = match self.cur.peek().map(|t| &t.kind) {
                Some(TokenKind::Op(OpTok::Star)) => BinOp::Mul,
                Some(TokenKind::Op(OpTok::Slash)) => BinOp::Div,
                _ => return Ok(lhs),
            };
            let line = self.cur.peek().unwrap().line;
            self.cur.advance();
            let rhs = self.pow_expr()?;
            lhs = self.mk_arith(op, lhs, rhs, line)?;
        }
    }

    fn pow_expr(&mut self) -> Result<Expr> {
        let base = self.primary()?;
        if self
            .cur
            .peek()
            .is_some_and(|t| t.kind == TokenKind::Op(OpTok::Pow))
        {
            let line = self.cur.peek().unwrap().line;
            self.cur.advance();
            let exp = self.pow_expr()?; // right-associative
            return self.mk_arith(BinOp::Pow, base, exp, line);
        }
        Ok(base)
    }

    fn mk_arith(&self, op: BinOp, lhs: Expr, rhs: Expr, line: u32) -> Result<Expr> {
        if lhs.ty == ExprTy::Logical || rhs.ty == ExprTy::Logical {
            return Err(FrontendError::Type {
                line,
                message: format!("'{}' needs numeric operands", op.symbol()),
            });
        }
        let ty = if lhs.ty == ExprTy::Real || rhs.ty == ExprTy::Real {
            ExprTy::Real
        } else {
            ExprTy::Int
        };
        Ok(Expr {
            kind: ExprKind::Bin {
                op,
                lhs: Box::new(lhs),
                rhs: Box::new(rhs),
            },
            ty,
            line,
        })
    }

    fn mk_logical(&self, op: BinOp, lhs: Expr, rhs: Expr, line: u32) -> Result<Expr> {
        if lhs.ty != ExprTy::Logical || rhs.ty != ExprTy::Logical {
            return Err(FrontendError::Type {
                line,
                message: format!("'{}' needs logical operands", op.symbol()),
            });
        }
        Ok(Expr {
            kind: ExprKind::Bin {
                op,
                lhs: Box::new(lhs),
                rhs: Box::new(rhs),
            },
            ty: ExprTy::Logical,
            line,
        })
    }

    fn primary(&mut self) -> Result<Expr> {
        let Some(t) = self.cur.peek() else {
            return Err(self.err_expected("expression", None));
        };
        let line = t.line;
        match &t.kind {
            TokenKind::Int => {
                let v: i64 = t.text.parse().map_err(|_| FrontendError::Parse {
                    line,
                    expected: "integer literal".into(),
                    found: format!("'{}'", t.text),
                })?;
                self.cur.advance();
                Ok(Expr {
                    kind: ExprKind::IntLit(v),
                    ty: ExprTy::Int,
                    line,
                })
            }
            TokenKind::Real => {
                let normalized = t.text.replace(['d', 'D'], "e");
                let v: f64 = normalized.parse().map_err(|_| FrontendError::Parse {
                    line,
                    expected: "real literal".into(),
                    found: format!("'{}'", t.text),
                })?;
                self.cur.advance();
                Ok(Expr {
                    kind: ExprKind::RealLit(v),
                    ty: ExprTy::Real,
                    line,
                })
            }
            TokenKind::Punct(PunctTok::LParen) => {
                self.cur.advance();
                let inner = self.expr()?;
                self.expect_punct(PunctTok::RParen, "')'")?;
                Ok(inner)
            }
            TokenKind::Ident => {
                let name = Name::new(&t.text);
                self.cur.advance();
                let sym = self.resolve(&name, line)?.clone();
                if self
                    .cur
                    .peek()
                    .is_some_and(|t| t.kind == TokenKind::Punct(PunctTok::LParen))
                {
                    if !sym.is_array() {
                        return Err(FrontendError::UnsupportedConstruct {
                            line,
                            construct: format!(
                                "function reference '{name}(...)' (no intrinsics in the subset)"
                            ),
                        });
                    }
                    self.cur.advance();
                    let mut indices = Vec::new();
                    loop {
                        let idx = self.expr()?;
                        if idx.ty != ExprTy::Int {
                            return Err(FrontendError::Type {
                                line: idx.line,
                                message: "array index must be an integer expression".into(),
                            });
                        }
                        indices.push(idx);
                        if self.eat_punct(PunctTok::Comma) {
                            continue;
                        }
                        self.expect_punct(PunctTok::RParen, "')' after indices")?;
                        break;
                    }
                    if indices.len() != sym.rank() {
                        return Err(FrontendError::RankMismatch {
                            name: name.as_str().to_string(),
                            line,
                            declared: sym.rank(),
                            used: indices.len(),
                        });
                    }
                    let ty = elem_expr_ty(sym.ty);
                    return Ok(Expr {
                        kind: ExprKind::Elem(name, indices),
                        ty,
                        line,
                    });
                }
                if sym.is_array() {
                    return Err(FrontendError::Type {
                        line,
                        message: format!("array '{name}' used without indices"),
                    });
                }
                if let Some(v) = sym.const_val {
                    // PARAMETER constants fold to literals right here.
                    return Ok(Expr {
                        kind: ExprKind::IntLit(v),
                        ty: ExprTy::Int,
                        line,
                    });
                }
                Ok(Expr {
                    kind: ExprKind::Var(name),
                    ty: elem_expr_ty(sym.ty),
                    line,
                })
            }
            _ => Err(self.err_expected("expression", Some(t))),
        }
    }

    fn resolve(&self, name: &Name, line: u32) -> Result<&Symbol> {
        self.syms
            .get(name)
            .ok_or_else(|| FrontendError::UndeclaredSymbol {
                name: name.as_str().to_string(),
                line,
            })
    }

    fn validate_unit(&self, _sub: &Subroutine) -> Result<()> {
        // Name resolution and rank checks already ran during parsing;
        // nothing further for now.
        Ok(())
    }
}

fn elem_expr_ty(t: ElemTy) -> ExprTy {
    match t {
        ElemTy::Integer => ExprTy::Int,
        ElemTy::Real64 => ExprTy::Real,
    }
}

fn expr_mentions_array(e: &Expr) -> bool {
    match &e.kind {
        ExprKind::Elem(..) => true,
        ExprKind::IntLit(_) | ExprKind::RealLit(_) | ExprKind::Var(_) => false,
        ExprKind::Un { operand, .. } => expr_mentions_array(operand),
        ExprKind::Bin { lhs, rhs, .. } => expr_mentions_array(lhs) || expr_mentions_array(rhs),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum BlockEnd {
    EndDo,
    EndIf,
    Else,
    EndSubroutine,
}

impl BlockEnd {
    fn describe(self) -> &'static str {
        match self {
            BlockEnd::EndDo => "ENDDO",
            BlockEnd::EndIf => "ENDIF",
            BlockEnd::Else => "ELSE",
            BlockEnd::EndSubroutine => "END SUBROUTINE",
        }
    }
}

/// If the cursor sits at one of the given block terminators, return how
/// many tokens it spans (ENDDO = 1, END DO = 2).
fn block_end_at(cur: &Cursor, ends: &[BlockEnd]) -> Option<usize> {
    let t = cur.peek()?;
    let second_kind = {
        // Peek one significant token further.
        let mut c = Cursor {
            toks: cur.toks,
            pos: cur.pos,
        };
        c.advance();
        c.peek().map(|t| t.kind.clone())
    };
    for &end in ends {
        let hit = match end {
            BlockEnd::EndDo => match &t.kind {
                TokenKind::Keyword(Kw::EndDo) => Some(1),
                TokenKind::Keyword(Kw::End) if second_kind == Some(TokenKind::Keyword(Kw::Do)) => {
                    Some(2)
                }
                _ => None,
            },
            BlockEnd::EndIf => match &t.kind {
                TokenKind::Keyword(Kw::EndIf) => Some(1),
                TokenKind::Keyword(Kw::End) if second_kind == Some(TokenKind::Keyword(Kw::If)) => {
                    Some(2)
                }
                _ => None,
            },
            BlockEnd::Else => match &t.kind {
                TokenKind::Keyword(Kw::Else) => Some(1),
                _ => None,
            },
            BlockEnd::EndSubroutine => match &t.kind {
                TokenKind::Keyword(Kw::End)
                    if second_kind == Some(TokenKind::Keyword(Kw::Subroutine)) =>
                {
                    Some(0) // not consumed here; subroutine() handles it
                }
                _ => None,
            },
        };
        if let Some(n) = hit {
            return Some(n.max(1));
        }
    }
    None
}
