//! Finite-difference discretization of -div(D grad u) = f on the unit
//! square with homogeneous Dirichlet boundaries.
//!
//! Nodes sit at (i*h, j*h), h = 1/(n+1); the ghost ring holds the
//! boundary nodes. Edge conductances take the harmonic mean of D at the
//! endpoints, which keeps the operator symmetric and handles jumps in D.
//! Coefficients and right-hand side carry the h^2 scaling, so the
//! constant-coefficient interior stencil is the familiar 4 / -1 cross.

use super::stencil::{Dir, StencilOperator};
use super::MgError;

#[derive(Debug, Clone)]
pub enum DiffusionField {
    Constant(f64),
    /// `left` where x < 0.5, `right` elsewhere.
    Piecewise { left: f64, right: f64 },
    /// Sampled at every padded node, outer index y.
    Grid(Vec<Vec<f64>>),
}

impl DiffusionField {
    fn eval(&self, x: f64, y: f64, n: usize) -> f64 {
        match self {
            DiffusionField::Constant(d) => *d,
            DiffusionField::Piecewise { left, right } => {
                if x < 0.5 {
                    *left
                } else {
                    *right
                }
            }
            DiffusionField::Grid(g) => {
                let h = 1.0 / (n as f64 + 1.0);
                let iy = (y / h).round() as usize;
                let ix = (x / h).round() as usize;
                g[iy][ix]
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct ProblemSpec {
    /// Interior points per dimension; odd and at least 3 so the grid
    /// coarsens onto coincident points.
    pub n: usize,
    pub diffusion: DiffusionField,
    pub rhs: f64,
}

fn harmonic(a: f64, b: f64) -> f64 {
    2.0 * a * b / (a + b)
}

/// Assemble the 5-point operator (stored 9-point, diagonal slots zero)
/// and the h^2-scaled right-hand side.
pub fn build_problem(spec: &ProblemSpec) -> Result<(StencilOperator, Vec<f64>), MgError> {
    build_problem_with(spec.n, &spec.diffusion, &|_, _| spec.rhs)
}

/// Assembly with an arbitrary forcing function, for manufactured
/// solutions in tests.
pub fn build_problem_with(
    n: usize,
    diffusion: &DiffusionField,
    rhs: &dyn Fn(f64, f64) -> f64,
) -> Result<(StencilOperator, Vec<f64>), MgError> {
    if n < 3 || n % 2 == 0 {
        return Err(MgError::BadProblem(format!(
            "interior extent must be odd and at least 3, got {n}"
        )));
    }
    if let DiffusionField::Grid(g) = diffusion {
        if g.len() != n + 2 || g.iter().any(|row| row.len() != n + 2) {
            return Err(MgError::BadProblem(format!(
                "diffusion grid must be {np} x {np}",
                np = n + 2
            )));
        }
    }
    let h = 1.0 / (n as f64 + 1.0);
    let np = n + 2;
    // Padded index (i, j) has coordinates ((i-1) h, (j-1) h).
    let d_at = |i: usize, j: usize| -> Result<f64, MgError> {
        let v = diffusion.eval((i as f64 - 1.0) * h, (j as f64 - 1.0) * h, n);
        if v <= 0.0 {
            return Err(MgError::BadProblem(format!(
                "diffusion must be positive everywhere, got {v}"
            )));
        }
        Ok(v)
    };

    let mut op = StencilOperator::zeros(n);
    let mut b = vec![0.0; np * np];
    for j in 2..=n + 1 {
        for i in 2..=n + 1 {
            let dc = d_at(i, j)?;
            let cw = harmonic(d_at(i - 1, j)?, dc);
            let ce = harmonic(d_at(i + 1, j)?, dc);
            let cs = harmonic(d_at(i, j - 1)?, dc);
            let cn = harmonic(d_at(i, j + 1)?, dc);
            *op.at_mut(i, j, Dir::O) = cw + ce + cs + cn;
            // Dirichlet: couplings into the ghost ring are dropped, the
            // diagonal keeps the full sum.
            if i > 2 {
                *op.at_mut(i, j, Dir::W) = -cw;
            }
            if i < n + 1 {
                *op.at_mut(i, j, Dir::E) = -ce;
            }
            if j > 2 {
                *op.at_mut(i, j, Dir::S) = -cs;
            }
            if j < n + 1 {
                *op.at_mut(i, j, Dir::N) = -cn;
            }
            b[(i - 1) + (j - 1) * np] = h * h * rhs((i as f64 - 1.0) * h, (j as f64 - 1.0) * h);
        }
    }
    Ok((op, b))
}
