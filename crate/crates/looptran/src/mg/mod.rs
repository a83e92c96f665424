//! Structured-grid multigrid solver whose grid kernels are all written
//! in the legacy subset and run through the translator: problem
//! assembly, Galerkin hierarchy construction, the V-cycle driver and
//! per-level accounting.

pub mod corpus;
mod hierarchy;
mod problem;
mod report;
mod solver;
mod stencil;

pub use hierarchy::{
    build_interp, build_operator_chain, galerkin_coarse, InterpMode, OperatorChain,
};
pub use problem::{build_problem, build_problem_with, DiffusionField, ProblemSpec};
pub use report::{KernelLine, LevelReport, Report};
pub use solver::{
    predicted_launches_per_cycle, CoarseFactorCtx, GridHierarchy, Level, Solver, SWEEP_COLORS,
};
pub use stencil::{coarse_parents, weight_between, Dir, IDir, InterpStencil, StencilOperator, DIRS};

use serde::Deserialize;
use thiserror::Error;

#[derive(Debug, Clone, Error)]
pub enum MgError {
    #[error("bad problem: {0}")]
    BadProblem(String),
    #[error("coarse operator is not positive definite (pivot {pivot} at index {index})")]
    NotSpd { pivot: f64, index: usize },
    #[error("did not converge; {} cycles run, last relative residual {:?}", history.len(), history.last())]
    NotConverged { history: Vec<f64> },
    #[error("execution failed: {0}")]
    Exec(String),
    #[error(transparent)]
    Device(#[from] crate::vdevice::DeviceError),
}

/// Solve configuration, the JSON document the command line consumes.
#[derive(Debug, Clone, Deserialize)]
pub struct SolveConfig {
    pub n: usize,
    #[serde(rename = "D", default = "default_diffusion")]
    pub d: DiffusionConfig,
    #[serde(default = "default_cycles")]
    pub cycles: CycleConfig,
    pub tol: f64,
    #[serde(default = "default_maxiter")]
    pub maxiter: usize,
    #[serde(default = "default_threshold")]
    pub threshold: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum DiffusionConfig {
    /// "constant" or "piecewise".
    Named(String),
    /// { "grid_file": "d.json" } with a padded 2D array of samples.
    File { grid_file: String },
}

#[derive(Debug, Clone, Deserialize)]
pub struct CycleConfig {
    pub nu1: u32,
    pub nu2: u32,
}

fn default_diffusion() -> DiffusionConfig {
    DiffusionConfig::Named("constant".into())
}

fn default_cycles() -> CycleConfig {
    CycleConfig { nu1: 1, nu2: 1 }
}

fn default_maxiter() -> usize {
    20
}

fn default_threshold() -> usize {
    3
}

impl SolveConfig {
    pub fn diffusion_field(&self, base_dir: &std::path::Path) -> Result<DiffusionField, MgError> {
        match &self.d {
            DiffusionConfig::Named(s) if s == "constant" => Ok(DiffusionField::Constant(1.0)),
            DiffusionConfig::Named(s) if s == "piecewise" => Ok(DiffusionField::Piecewise {
                left: 1.0,
                right: 10.0,
            }),
            DiffusionConfig::Named(s) => {
                Err(MgError::BadProblem(format!("unknown diffusion field '{s}'")))
            }
            DiffusionConfig::File { grid_file } => {
                let path = base_dir.join(grid_file);
                let text = std::fs::read_to_string(&path).map_err(|e| {
                    MgError::BadProblem(format!("cannot read {}: {e}", path.display()))
                })?;
                let grid: Vec<Vec<f64>> = serde_json::from_str(&text).map_err(|e| {
                    MgError::BadProblem(format!("bad diffusion grid {}: {e}", path.display()))
                })?;
                Ok(DiffusionField::Grid(grid))
            }
        }
    }
}

#[cfg(test)]
mod tests;
