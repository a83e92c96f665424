//! The V-cycle driver. Every grid-touching step of the cycle runs as a
//! translated kernel launch (or, under the interpreted strategy, as the
//! sequential interpretation of the same source); the driver only moves
//! handles around and keeps the per-level accounting.

use super::corpus;
use super::hierarchy::{build_operator_chain, InterpMode, OperatorChain};
use super::problem::{build_problem, ProblemSpec};
use super::report::Report;
use super::stencil::{InterpStencil, StencilOperator};
use super::MgError;
use crate::frontend::ElemTy;
use crate::hostexec::{ArgSlot, DriverArg, ExecStrategy, Runtime};
use crate::vdevice::{BufferId, Residency, Side};
use std::sync::Arc;

/// Red first, black second; each color covers two parity lattices so
/// updates within a launch touch only the other colors.
pub const SWEEP_COLORS: [(i64, i64); 4] = [(0, 0), (1, 1), (1, 0), (0, 1)];

#[derive(Debug)]
pub struct Level {
    /// Interior extent per dimension.
    pub n: usize,
    pub so: BufferId,
    pub u: BufferId,
    pub f: BufferId,
    pub r: BufferId,
    /// Interpolation weights between this level and the next finer one;
    /// None on the finest level.
    pub ci: Option<BufferId>,
}

impl Level {
    pub fn padded(&self) -> i64 {
        (self.n + 2) as i64
    }
}

#[derive(Debug)]
pub struct GridHierarchy {
    pub levels: Vec<Level>,
    pub threshold: usize,
    pub interp_mode: InterpMode,
    /// Dense coarsest operator, Cholesky-factored in place.
    pub coarse_mat: BufferId,
    /// Packed right-hand side / solution workspace.
    pub coarse_vec: BufferId,
    pub coarse_m: usize,
    /// Registry handle standing for the factored coarse context.
    pub coarse_handle: i64,
    /// Host copies of the per-level operators, for inspection and tests.
    pub ops: Vec<StencilOperator>,
    pub interps: Vec<InterpStencil>,
}

/// Context object the coarse-solve handle resolves to.
#[derive(Debug)]
pub struct CoarseFactorCtx {
    pub factor: BufferId,
    pub m: usize,
}

pub struct Solver {
    pub rt: Runtime,
    pub h: GridHierarchy,
    pub nu1: u32,
    pub nu2: u32,
    report: Report,
    cycles: u64,
}

/// Kernel launches one V-cycle issues, from the cycle structure: each
/// non-coarsest level runs nu1+nu2 four-color sweeps, a residual before
/// restriction and one on exit, the restriction, the zero-fill of the
/// coarse solution and the correction; the coarsest packs and unpacks
/// around the dense solve.
pub fn predicted_launches_per_cycle(levels: usize, nu1: u32, nu2: u32) -> u64 {
    (levels as u64 - 1) * (4 * (nu1 as u64 + nu2 as u64) + 5) + 2
}

impl Solver {
    pub fn from_problem(
        spec: &ProblemSpec,
        threshold: usize,
        interp_mode: InterpMode,
        nu1: u32,
        nu2: u32,
    ) -> Result<Solver, MgError> {
        let (op, rhs) = build_problem(spec)?;
        Solver::from_operator(op, rhs, threshold, interp_mode, nu1, nu2)
    }

    /// Build the hierarchy and device state from an assembled fine
    /// operator and padded right-hand side.
    pub fn from_operator(
        fine: StencilOperator,
        rhs: Vec<f64>,
        threshold: usize,
        interp_mode: InterpMode,
        nu1: u32,
        nu2: u32,
    ) -> Result<Solver, MgError> {
        let mut rt = Runtime::new();
        corpus::load_corpus(&mut rt).map_err(|e| MgError::Exec(e.to_string()))?;
        let chain = build_operator_chain(fine, threshold, interp_mode)?;
        let h = upload_hierarchy(&mut rt, chain, rhs, threshold, interp_mode)?;
        let sizes: Vec<usize> = h.levels.iter().map(|l| l.n).collect();
        Ok(Solver {
            rt,
            h,
            nu1,
            nu2,
            report: Report::new(&sizes),
            cycles: 0,
        })
    }

    pub fn set_strategy(&mut self, strategy: ExecStrategy) {
        self.rt.strategy = strategy;
    }

    pub fn report(&self) -> Report {
        let mut r = self.report.clone();
        r.cycles = self.cycles;
        r
    }

    pub fn cycles(&self) -> u64 {
        self.cycles
    }

    /// Current solution, padded, host-side copy.
    pub fn solution(&mut self) -> Result<Vec<f64>, MgError> {
        let id = self.h.levels[0].u;
        Ok(self.rt.device.read_all_f64(id, Side::Host)?)
    }

    pub fn residual_field(&mut self) -> Result<Vec<f64>, MgError> {
        let id = self.h.levels[0].r;
        Ok(self.rt.device.read_all_f64(id, Side::Host)?)
    }

    fn step<T>(
        &mut self,
        level: usize,
        label: &str,
        f: impl FnOnce(&mut Runtime, &GridHierarchy) -> Result<T, MgError>,
    ) -> Result<T, MgError> {
        let before = self.rt.device.ledger_snapshot();
        let out = f(&mut self.rt, &self.h)?;
        let delta = self.rt.device.ledger_snapshot().delta_since(&before);
        self.report.add(level, label, &delta);
        Ok(out)
    }

    fn sweep(&mut self, ell: usize) -> Result<(), MgError> {
        self.step(ell, "relax_color", |rt, h| {
            let lv = &h.levels[ell];
            call(
                rt,
                "sweep_rb",
                &[
                    DriverArg::Buf(lv.u),
                    DriverArg::Buf(lv.f),
                    DriverArg::Buf(lv.so),
                    DriverArg::Int(lv.padded()),
                    DriverArg::Int(lv.padded()),
                ],
            )
        })
    }

    fn residual(&mut self, ell: usize) -> Result<(), MgError> {
        self.step(ell, "residual", |rt, h| {
            let lv = &h.levels[ell];
            call(
                rt,
                "residual",
                &[
                    DriverArg::Buf(lv.r),
                    DriverArg::Buf(lv.u),
                    DriverArg::Buf(lv.f),
                    DriverArg::Buf(lv.so),
                    DriverArg::Int(lv.padded()),
                    DriverArg::Int(lv.padded()),
                ],
            )
        })
    }

    /// One V-cycle rooted at `ell`. On return the level's residual
    /// buffer reflects the updated solution, so the caller's
    /// convergence check costs nothing extra.
    pub fn vcycle(&mut self, ell: usize) -> Result<(), MgError> {
        if ell + 1 == self.h.levels.len() {
            return self.coarse_solve(ell);
        }
        for _ in 0..self.nu1 {
            self.sweep(ell)?;
        }
        self.residual(ell)?;
        self.step(ell, "restrict", |rt, h| {
            let (fine, coarse) = (&h.levels[ell], &h.levels[ell + 1]);
            call(
                rt,
                "restrict",
                &[
                    DriverArg::Buf(coarse.f),
                    DriverArg::Buf(fine.r),
                    DriverArg::Buf(coarse.ci.expect("coarse levels carry weights")),
                    DriverArg::Int(coarse.padded()),
                    DriverArg::Int(coarse.padded()),
                    DriverArg::Int(1),
                    DriverArg::Int(1),
                ],
            )
        })?;
        self.step(ell, "fillz", |rt, h| {
            let coarse = &h.levels[ell + 1];
            call(
                rt,
                "fillz",
                &[
                    DriverArg::Buf(coarse.u),
                    DriverArg::Int(coarse.padded()),
                    DriverArg::Int(coarse.padded()),
                ],
            )
        })?;
        self.vcycle(ell + 1)?;
        self.step(ell, "interp_add", |rt, h| {
            let (fine, coarse) = (&h.levels[ell], &h.levels[ell + 1]);
            call(
                rt,
                "interp_add",
                &[
                    DriverArg::Buf(fine.u),
                    DriverArg::Buf(coarse.u),
                    DriverArg::Buf(coarse.ci.expect("coarse levels carry weights")),
                    DriverArg::Int(fine.padded()),
                    DriverArg::Int(fine.padded()),
                    DriverArg::Int(coarse.padded()),
                    DriverArg::Int(coarse.padded()),
                ],
            )
        })?;
        for _ in 0..self.nu2 {
            self.sweep(ell)?;
        }
        self.residual(ell)
    }

    fn coarse_solve(&mut self, ell: usize) -> Result<(), MgError> {
        let m = self.h.coarse_m as i64;
        self.step(ell, "pack_interior", |rt, h| {
            let lv = &h.levels[ell];
            call(
                rt,
                "pack_interior",
                &[
                    DriverArg::Buf(h.coarse_vec),
                    DriverArg::Buf(lv.f),
                    DriverArg::Int(m),
                    DriverArg::Int(lv.padded()),
                    DriverArg::Int(lv.padded()),
                ],
            )
        })?;
        self.step(ell, "cholesky_solve", |rt, h| {
            // The factored matrix travels as an opaque integer handle.
            let obj = rt
                .registry
                .convert_handle(h.coarse_handle)
                .map_err(|e| MgError::Exec(e.to_string()))?;
            let ctx = obj
                .downcast_ref::<CoarseFactorCtx>()
                .ok_or_else(|| MgError::Exec("coarse handle holds a foreign object".into()))?;
            let mut slots = vec![
                ArgSlot::Buf(ctx.factor),
                ArgSlot::Int(ctx.m as i64),
                ArgSlot::Buf(h.coarse_vec),
            ];
            rt.invoke_external("cholesky_solve", &mut slots)
                .map_err(|e| MgError::Exec(e.to_string()))
        })?;
        self.step(ell, "unpack_interior", |rt, h| {
            let lv = &h.levels[ell];
            call(
                rt,
                "unpack_interior",
                &[
                    DriverArg::Buf(lv.u),
                    DriverArg::Buf(h.coarse_vec),
                    DriverArg::Int(m),
                    DriverArg::Int(lv.padded()),
                    DriverArg::Int(lv.padded()),
                ],
            )
        })
    }

    fn norm_of(&mut self, id: BufferId, len: usize) -> Result<f64, MgError> {
        self.step(0, "norm2", |rt, _| {
            let mut slots = vec![
                ArgSlot::Buf(id),
                ArgSlot::Int(len as i64),
                ArgSlot::Real(0.0),
            ];
            rt.invoke_external("norm2", &mut slots)
                .map_err(|e| MgError::Exec(e.to_string()))?;
            match slots[2] {
                ArgSlot::Real(v) => Ok(v),
                _ => unreachable!(),
            }
        })
    }

    /// Repeat V-cycles until the relative residual reaches `tol` or
    /// `maxiter` cycles have run. The history holds one relative norm
    /// per cycle.
    pub fn solve(&mut self, tol: f64, maxiter: usize) -> Result<Vec<f64>, MgError> {
        if tol <= 0.0 {
            return Err(MgError::BadProblem(format!(
                "tolerance must be positive, got {tol}"
            )));
        }
        let f0 = self.h.levels[0].f;
        let len = {
            let p = self.h.levels[0].padded() as usize;
            p * p
        };
        let bnorm = self.norm_of(f0, len)?;
        if bnorm == 0.0 {
            return Ok(Vec::new());
        }
        let single_level = self.h.levels.len() == 1;
        let mut history = Vec::new();
        for _ in 0..maxiter {
            self.vcycle(0)?;
            if single_level {
                // The direct solve leaves no residual behind; compute one.
                self.residual(0)?;
            }
            self.cycles += 1;
            let rnorm = self.norm_of(self.h.levels[0].r, len)?;
            history.push(rnorm / bnorm);
            if rnorm / bnorm <= tol {
                return Ok(history);
            }
        }
        Err(MgError::NotConverged { history })
    }
}

fn call(rt: &mut Runtime, name: &str, args: &[DriverArg]) -> Result<(), MgError> {
    rt.call(name, args)
        .map_err(|e| MgError::Exec(format!("{name}: {e}")))
}

fn upload_hierarchy(
    rt: &mut Runtime,
    chain: OperatorChain,
    rhs: Vec<f64>,
    threshold: usize,
    interp_mode: InterpMode,
) -> Result<GridHierarchy, MgError> {
    let mut levels = Vec::new();
    for (k, op) in chain.ops.iter().enumerate() {
        let np = (op.n + 2) as i64;
        let grid = [(1, np), (1, np)];
        let so = rt
            .device
            .create_buffer(&[(1, np), (1, np), (1, 9)], ElemTy::Real64, Residency::Host)?;
        rt.device.write_all_f64(so, Side::Host, &op.coef)?;
        let u = rt.device.create_buffer(&grid, ElemTy::Real64, Residency::Host)?;
        let f = rt.device.create_buffer(&grid, ElemTy::Real64, Residency::Host)?;
        let r = rt.device.create_buffer(&grid, ElemTy::Real64, Residency::Host)?;
        if k == 0 {
            rt.device.write_all_f64(f, Side::Host, &rhs)?;
        }
        let ci = if k > 0 {
            let w = &chain.interp[k - 1];
            let id = rt.device.create_buffer(
                &[(1, np), (1, np), (1, 8)],
                ElemTy::Real64,
                Residency::Host,
            )?;
            rt.device.write_all_f64(id, Side::Host, &w.w)?;
            Some(id)
        } else {
            None
        };
        levels.push(Level {
            n: op.n,
            so,
            u,
            f,
            r,
            ci,
        });
    }

    // Dense coarsest operator, factored once through the registry; the
    // factor context is reachable only through its integer handle.
    let coarsest = chain.ops.last().unwrap();
    let m = coarsest.n * coarsest.n;
    let dense = coarsest.to_dense();
    let coarse_mat =
        rt.device
            .create_buffer(&[(1, (m * m) as i64)], ElemTy::Real64, Residency::Host)?;
    rt.device.write_all_f64(coarse_mat, Side::Host, &dense)?;
    let coarse_vec = rt
        .device
        .create_buffer(&[(1, m as i64)], ElemTy::Real64, Residency::Host)?;
    let mut slots = vec![ArgSlot::Buf(coarse_mat), ArgSlot::Int(m as i64)];
    rt.invoke_external("cholesky_factor", &mut slots)
        .map_err(|e| match e {
            crate::hostexec::ExecError::NotSpd { pivot, index } => MgError::NotSpd { pivot, index },
            other => MgError::Exec(other.to_string()),
        })?;
    let coarse_handle = rt.registry.issue_handle(Arc::new(CoarseFactorCtx {
        factor: coarse_mat,
        m,
    }));

    Ok(GridHierarchy {
        levels,
        threshold,
        interp_mode,
        coarse_mat,
        coarse_vec,
        coarse_m: m,
        coarse_handle,
        ops: chain.ops,
        interps: chain.interp,
    })
}
