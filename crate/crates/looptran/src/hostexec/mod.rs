//! Host-side execution: interpret host regions against live buffers,
//! dispatch `CALL` statements to translated subroutines or registered
//! externals, and launch parallel regions on the virtual device.

mod externals;

#[cfg(test)]
mod tests;
mod interp;
mod registry;
mod runtime;

pub use externals::register_builtin_externals;
pub use interp::Env;
pub use registry::{ArgSlot, DefaultContext, ExtCtx, ExtParamKind, ExternalRegistry, ExternalSpec, Object};
pub use runtime::{interpret, DriverArg, ExecStrategy, Runtime};

use crate::loopir::LowerError;
use crate::regions::RegionError;
use crate::translate::TranslateError;
use crate::vdevice::DeviceError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ExecError {
    #[error(transparent)]
    Device(#[from] DeviceError),
    #[error("unknown callee '{0}'")]
    UnknownCallee(String),
    #[error("'{callee}' takes {expected} arguments, got {got}")]
    ArityMismatch {
        callee: String,
        expected: usize,
        got: usize,
    },
    #[error("'{callee}' argument {position}: {detail}")]
    BadArg {
        callee: String,
        position: usize,
        detail: String,
    },
    #[error("no object issued for handle {0}")]
    BadHandle(i64),
    #[error("matrix is not positive definite (pivot {pivot} at index {index})")]
    NotSpd { pivot: f64, index: usize },
    #[error("'{callee}' argument {position} must be a variable (it is written back)")]
    NotDefinable { callee: String, position: usize },
    #[error("line {line}: {message}")]
    Arith { line: u32, message: String },
    #[error("line {line}: '{name}' is used before it is set")]
    Unbound { name: String, line: u32 },
    #[error("line {line}: assignment to INTENT(IN) argument '{name}'")]
    WriteToIntentIn { name: String, line: u32 },
    #[error(transparent)]
    Lower(#[from] LowerError),
    #[error(transparent)]
    Region(#[from] RegionError),
    #[error(transparent)]
    Translate(#[from] TranslateError),
}

pub type Result<T> = std::result::Result<T, ExecError>;
