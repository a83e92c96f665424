//! Host/parallel region splitting driven by the comment-tag protocol.
//!
//! A parallel region is the span of statements between a
//! `!#LOOPY_START` line and its matching `!#LOOPY_END`. Everything else
//! is host code. The tags are ordinary Fortran comments, so the same
//! source still compiles untouched by any standard compiler; stripping
//! them must never change what the parser sees (tested on the corpus).
//!
//! Tag grammar:
//!
//! ```text
//! !#LOOPY_START
//! !#LOOPY_START(assume="nxc>=3", assume="istart=1")
//! !#LOOPY_END
//! ```
//!
//! `assume` is the only defined option key; unknown keys are errors, not
//! warnings, so a typo cannot silently change semantics. Each assumption
//! is a single-variable affine bound `var >= k`, `var <= k` or `var = k`
//! over an integer scalar.

use crate::frontend::{ElemTy, Name, Stmt, StmtKind, Subroutine, SymbolTable};
use std::fmt;
use thiserror::Error;

pub const TAG_START: &str = "!#LOOPY_START";
pub const TAG_END: &str = "!#LOOPY_END";
const TAG_PREFIX: &str = "!#LOOPY_";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegionKind {
    Host,
    Parallel,
}

/// One contiguous span of body statements, host or parallel.
#[derive(Debug, Clone)]
pub struct TaggedRegion {
    pub kind: RegionKind,
    pub statements: Vec<Stmt>,
    pub options: Vec<Assumption>,
    /// (first, last) source line covered, tag lines included for
    /// parallel regions.
    pub span: (u32, u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AssumeRel {
    Ge,
    Le,
    Eq,
}

impl AssumeRel {
    pub fn symbol(self) -> &'static str {
        match self {
            AssumeRel::Ge => ">=",
            AssumeRel::Le => "<=",
            AssumeRel::Eq => "=",
        }
    }
}

/// Single-variable affine bound promised by the tag author.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assumption {
    pub variable: Name,
    pub relation: AssumeRel,
    pub bound: i64,
}

impl fmt::Display for Assumption {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "assume=\"{}{}{}\"",
            self.variable,
            self.relation.symbol(),
            self.bound
        )
    }
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum RegionError {
    #[error("line {0}: unmatched parallel-region tag")]
    UnmatchedTag(u32),
    #[error("line {0}: nested parallel-region tag")]
    NestedTag(u32),
    #[error("line {0}: tag must be at the top level of the subroutine body")]
    MisplacedTag(u32),
    #[error("line {line}: bad tag option: {text}")]
    BadTagOption { line: u32, text: String },
    #[error("line {line}: assumption variable '{name}' is not an integer scalar")]
    AssumeNotIntScalar { name: String, line: u32 },
}

pub type Result<T> = std::result::Result<T, RegionError>;

fn tag_of(stmt: &Stmt) -> Option<(&str, u32)> {
    if let StmtKind::Comment(text) = &stmt.kind {
        let t = text.trim_end();
        if t.starts_with(TAG_PREFIX) {
            return Some((t, stmt.span.0));
        }
    }
    None
}

/// Split a subroutine body into an ordered partition of host and
/// parallel regions. Tag comments belong to no region; every other
/// statement lands in exactly one.
pub fn extract_regions(sub: &Subroutine, syms: &SymbolTable) -> Result<Vec<TaggedRegion>> {
    // Tags hiding inside DO/IF bodies would silently change meaning, so
    // hunt them down first.
    for st in &sub.body {
        check_no_nested_tags(st)?;
    }
    for item in &sub.decls {
        if let crate::frontend::DeclItem::Comment { text, line } = item {
            if text.trim_end().starts_with(TAG_PREFIX) {
                return Err(RegionError::MisplacedTag(*line));
            }
        }
    }

    let mut regions = Vec::new();
    let mut host_run: Vec<Stmt> = Vec::new();
    let mut parallel: Option<(Vec<Stmt>, Vec<Assumption>, u32)> = None;

    fn flush_host(run: &mut Vec<Stmt>, regions: &mut Vec<TaggedRegion>) {
        if run.is_empty() {
            return;
        }
        let span = (run.first().unwrap().span.0, run.last().unwrap().span.1);
        regions.push(TaggedRegion {
            kind: RegionKind::Host,
            statements: std::mem::take(run),
            options: Vec::new(),
            span,
        });
    }

    for st in &sub.body {
        match tag_of(st) {
            Some((text, line)) => {
                if let Some(rest) = text.strip_prefix(TAG_START) {
                    if parallel.is_some() {
                        return Err(RegionError::NestedTag(line));
                    }
                    let options = parse_tag_suffix(rest, line)?;
                    for a in &options {
                        let ok = syms
                            .get(&a.variable)
                            .is_some_and(|s| !s.is_array() && s.ty == ElemTy::Integer);
                        if !ok {
                            return Err(RegionError::AssumeNotIntScalar {
                                name: a.variable.as_str().to_string(),
                                line,
                            });
                        }
                    }
                    flush_host(&mut host_run, &mut regions);
                    parallel = Some((Vec::new(), options, line));
                } else if text
                    .strip_prefix(TAG_END)
                    .is_some_and(|r| r.trim().is_empty())
                {
                    let Some((stmts, options, start_line)) = parallel.take() else {
                        return Err(RegionError::UnmatchedTag(line));
                    };
                    regions.push(TaggedRegion {
                        kind: RegionKind::Parallel,
                        statements: stmts,
                        options,
                        span: (start_line, line),
                    });
                } else {
                    // Anything else spelled like a tag is a typo worth
                    // failing on.
                    return Err(RegionError::BadTagOption {
                        line,
                        text: text.to_string(),
                    });
                }
            }
            None => match &mut parallel {
                Some((stmts, _, _)) => stmts.push(st.clone()),
                None => host_run.push(st.clone()),
            },
        }
    }
    if let Some((_, _, line)) = parallel {
        return Err(RegionError::UnmatchedTag(line));
    }
    flush_host(&mut host_run, &mut regions);
    // Host regions that contain only comments carry no work.
    regions.retain(|r| {
        r.kind == RegionKind::Parallel
            || r.statements
                .iter()
                .any(|s| !matches!(s.kind, StmtKind::Comment(_)))
    });
    Ok(regions)
}

fn check_no_nested_tags(st: &Stmt) -> Result<()> {
    match &st.kind {
        StmtKind::Do { body, .. } => {
            for s in body {
                if let Some((_, line)) = tag_of(s) {
                    return Err(RegionError::MisplacedTag(line));
                }
                check_no_nested_tags(s)?;
            }
        }
        StmtKind::If {
            then_body,
            else_body,
            ..
        } => {
            for s in then_body.iter().chain(else_body) {
                if let Some((_, line)) = tag_of(s) {
                    return Err(RegionError::MisplacedTag(line));
                }
                check_no_nested_tags(s)?;
            }
        }
        _ => {}
    }
    Ok(())
}

/// Parse what follows `!#LOOPY_START`: either nothing or a
/// `(key="value", ...)` option list.
fn parse_tag_suffix(rest: &str, line: u32) -> Result<Vec<Assumption>> {
    let rest = rest.trim();
    if rest.is_empty() {
        return Ok(Vec::new());
    }
    let Some(inner) = rest.strip_prefix('(').and_then(|r| r.strip_suffix(')')) else {
        return Err(RegionError::BadTagOption {
            line,
            text: rest.to_string(),
        });
    };
    parse_tag_options_at(inner, line)
}

/// Parse the parenthesized option list of a START tag (the text between
/// the parentheses). Empty input means no options.
pub fn parse_tag_options(raw: &str) -> Result<Vec<Assumption>> {
    parse_tag_options_at(raw, 0)
}

fn parse_tag_options_at(raw: &str, line: u32) -> Result<Vec<Assumption>> {
    let bad = |text: &str| RegionError::BadTagOption {
        line,
        text: text.to_string(),
    };
    let mut out = Vec::new();
    let raw = raw.trim();
    if raw.is_empty() {
        return Ok(out);
    }
    for piece in raw.split(',') {
        let piece = piece.trim();
        let Some((key, value)) = piece.split_once('=') else {
            return Err(bad(piece));
        };
        let key = key.trim();
        if key != "assume" {
            return Err(bad(piece));
        }
        let value = value.trim();
        let Some(quoted) = value.strip_prefix('"').and_then(|v| v.strip_suffix('"')) else {
            return Err(bad(piece));
        };
        out.push(parse_assumption(quoted).ok_or_else(|| bad(piece))?);
    }
    Ok(out)
}

fn parse_assumption(s: &str) -> Option<Assumption> {
    let s = s.trim();
    let (idx, rel, len) = if let Some(i) = s.find(">=") {
        (i, AssumeRel::Ge, 2)
    } else if let Some(i) = s.find("<=") {
        (i, AssumeRel::Le, 2)
    } else if let Some(i) = s.find('=') {
        (i, AssumeRel::Eq, 1)
    } else {
        return None;
    };
    let var = s[..idx].trim();
    let bound = s[idx + len..].trim();
    if var.is_empty() || !var.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
        return None;
    }
    let bound: i64 = bound.parse().ok()?;
    Some(Assumption {
        variable: Name::new(var),
        relation: rel,
        bound,
    })
}

/// Remove tag comment lines from raw source, used by the
/// compilability-preservation tests.
pub fn strip_tags(source: &str) -> String {
    source
        .lines()
        .filter(|l| !l.trim_start().starts_with(TAG_PREFIX))
        .map(|l| format!("{l}\n"))
        .collect()
}
