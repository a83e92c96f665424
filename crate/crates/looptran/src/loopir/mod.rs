//! Parallel loop IR.
//!
//! A tagged region lowers into a [`LoopKernel`]: an ordered list of
//! iteration domains (one per DO loop of the nest, outermost first), a
//! straight-line instruction body over thread-private scalars, and the
//! parameter list the kernel is launched with. `map_grid` marks up to
//! the two outermost domains as thread-grid axes; any remaining domains
//! run as per-thread loops.
//!
//! Lowering refuses any nest it cannot prove race-free: scalar
//! accumulators carried between iterations, array elements stored by one
//! iteration and touched by another, and subscripts the affine analysis
//! cannot see through. The diagnostics carry rewrite hints where a
//! mechanical fix exists.

mod affine;
mod bounds;
mod deps;
mod lower;
mod text;

#[cfg(test)]
mod tests;

pub use bounds::{check_bounds_static, BoundsVerdict};
pub use deps::detect_loop_carried_deps;
pub use lower::{decompose_region, lower_region, map_grid, RegionShape};
pub use text::emit_kernel_text;

use crate::frontend::{BinOp, ElemTy, Name, UnOp};
use crate::regions::Assumption;
use std::fmt;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiagCode {
    LoopCarriedScalar,
    LoopCarriedArray,
    WriteOverlap,
    DynamicIndex,
    DynamicBounds,
    ImperfectNest,
    UnsupportedInKernel,
}

impl fmt::Display for DiagCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            DiagCode::LoopCarriedScalar => "LOOP_CARRIED_SCALAR",
            DiagCode::LoopCarriedArray => "LOOP_CARRIED_ARRAY",
            DiagCode::WriteOverlap => "WRITE_OVERLAP",
            DiagCode::DynamicIndex => "DYNAMIC_INDEX",
            DiagCode::DynamicBounds => "DYNAMIC_BOUNDS",
            DiagCode::ImperfectNest => "IMPERFECT_NEST",
            DiagCode::UnsupportedInKernel => "UNSUPPORTED_IN_KERNEL",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostic {
    pub severity: Severity,
    pub code: DiagCode,
    pub line: u32,
    pub message: String,
    pub hint: Option<String>,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{sev}[{}] line {}: {}", self.code, self.line, self.message)?;
        if let Some(h) = &self.hint {
            write!(f, "\n  hint: {h}")?;
        }
        Ok(())
    }
}

impl Diagnostic {
    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }
}

#[derive(Debug, Clone, Error)]
pub enum LowerError {
    #[error("line {line}: tagged region contains no DO loop")]
    NonLoopRegion { line: u32 },
    #[error("region is not a parallel region")]
    NotParallelRegion,
    #[error("kernel rejected:\n{}", format_diags(.0))]
    Rejected(Vec<Diagnostic>),
}

fn format_diags(diags: &[Diagnostic]) -> String {
    diags
        .iter()
        .map(|d| d.to_string())
        .collect::<Vec<_>>()
        .join("\n")
}

pub type Result<T> = std::result::Result<T, LowerError>;

/// Kernel-side expression type. `Logical` appears only in branch
/// conditions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KTy {
    Int,
    Real,
    Logical,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KExpr {
    pub ty: KTy,
    pub kind: KExprKind,
}

#[derive(Debug, Clone, PartialEq)]
pub enum KExprKind {
    ConstI(i64),
    ConstR(f64),
    /// Value of a scalar parameter.
    Param(usize),
    /// Current value of an iteration-domain index.
    DomainVar(usize),
    /// Thread-private scalar.
    Local(usize),
    Load {
        param: usize,
        indices: Vec<KExpr>,
    },
    /// Integer widened to real, mirroring Fortran mixed arithmetic.
    CastReal(Box<KExpr>),
    Un {
        op: UnOp,
        operand: Box<KExpr>,
    },
    Bin {
        op: BinOp,
        lhs: Box<KExpr>,
        rhs: Box<KExpr>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum KInstr {
    SetLocal {
        local: usize,
        value: KExpr,
        line: u32,
    },
    Store {
        param: usize,
        indices: Vec<KExpr>,
        value: KExpr,
        line: u32,
    },
    If {
        cond: KExpr,
        then_body: Vec<KInstr>,
        else_body: Vec<KInstr>,
        line: u32,
    },
}

/// One iteration domain: `var` runs from `lower` to `upper` inclusive.
/// Bounds are expressions over scalar parameters and outer domain
/// variables.
#[derive(Debug, Clone, PartialEq)]
pub struct Domain {
    pub var: Name,
    pub lower: KExpr,
    pub upper: KExpr,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Local {
    pub name: Name,
    pub ty: ElemTy,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelParam {
    pub name: Name,
    pub ty: ElemTy,
    /// Declared bounds per dimension; empty for scalars.
    pub dims: Vec<(KExpr, KExpr)>,
    /// The kernel loads from this parameter.
    pub reads: bool,
    /// The kernel stores to this parameter.
    pub writes: bool,
}

impl KernelParam {
    pub fn rank(&self) -> usize {
        self.dims.len()
    }

    pub fn is_array(&self) -> bool {
        !self.dims.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoopKernel {
    pub name: String,
    /// Outermost first.
    pub domains: Vec<Domain>,
    /// Indices into `domains` that map onto the thread grid; set by
    /// `map_grid`. Axis 0 is the outermost domain.
    pub grid_axes: Vec<usize>,
    pub params: Vec<KernelParam>,
    pub locals: Vec<Local>,
    pub assumptions: Vec<Assumption>,
    pub body: Vec<KInstr>,
}

impl LoopKernel {
    pub fn param_index(&self, name: &Name) -> Option<usize> {
        self.params.iter().position(|p| &p.name == name)
    }
}
