//! Kernel launches.
//!
//! A launch binds buffers and scalars to the kernel parameters, applies
//! one batched residency access per buffer, then runs every grid point
//! exactly once under the requested schedule. Threads never write
//! directly: each one collects its stores, and the device applies them
//! in schedule order once the whole grid has run. A thread reading an
//! element it stored earlier in the same iteration sees its own value
//! through a small overlay.
//!
//! Every subscript is checked against the parameter's declared bounds;
//! a violation aborts the launch with the thread coordinates and leaves
//! the buffers untouched.

use super::buffer::{flat_index, AccessMode, Payload, Side, TransferEvent};
use super::value::{bin_op, un_op, Value};
use super::{read_payload, BufferId, DeviceError, ExecMode, Result, VirtualDevice};
use crate::frontend::ElemTy;
use crate::loopir::{KExpr, KExprKind, KInstr, LoopKernel};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ArgValue {
    Int(i64),
    Real(f64),
    Buffer(BufferId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Schedule {
    Natural,
    Shuffled(u64),
}

#[derive(Debug, Clone)]
pub struct LaunchPlan {
    pub kernel: Arc<LoopKernel>,
    /// Parameter bindings by name; each kernel parameter exactly once.
    pub args: Vec<(crate::frontend::Name, ArgValue)>,
    pub schedule: Schedule,
}

#[derive(Debug, Clone)]
pub struct LaunchStats {
    pub threads: u64,
    pub grid: Vec<u64>,
    pub transfers: Vec<TransferEvent>,
}

struct ParamSlot {
    value: Option<Value>,
    buffer: Option<BufferId>,
    /// Declared bounds evaluated under the scalar bindings.
    dims: Vec<(i64, i64)>,
    elem: ElemTy,
}

struct ExecCtx<'a> {
    kernel: &'a LoopKernel,
    scalars: Vec<Option<Value>>,
    payloads: Vec<Option<&'a Payload>>,
    dims: Vec<Vec<(i64, i64)>>,
    elems: Vec<ElemTy>,
    grid: Vec<u64>,
    grid_lowers: Vec<i64>,
}

struct ThreadState {
    domain_vals: Vec<i64>,
    locals: Vec<Option<Value>>,
    /// Store lists per parameter, in execution order.
    writes: Vec<Vec<(u32, u64)>>,
    /// Start of the current thread's writes in each list, for the
    /// own-store overlay.
    thread_start: Vec<usize>,
}

impl VirtualDevice {
    /// Run every grid point of the plan's kernel exactly once.
    pub fn launch(&mut self, plan: &LaunchPlan) -> Result<LaunchStats> {
        let kernel = &plan.kernel;
        let slots = self.bind_args(kernel, &plan.args)?;

        // Grid extents from the mapped domains, scalars only.
        let scalar_env: Vec<Option<Value>> = slots.iter().map(|s| s.value).collect();
        let mut grid = Vec::new();
        let mut grid_lowers = Vec::new();
        for &ax in &kernel.grid_axes {
            let d = &kernel.domains[ax];
            let lo = eval_static(&d.lower, &scalar_env, kernel)?.as_i64();
            let hi = eval_static(&d.upper, &scalar_env, kernel)?.as_i64();
            let extent = hi - lo + 1;
            if extent < 1 {
                return Err(DeviceError::EmptyGrid {
                    kernel: kernel.name.clone(),
                    domain: d.var.as_str().to_string(),
                    extent,
                });
            }
            grid.push(extent as u64);
            grid_lowers.push(lo);
        }
        let total: u64 = grid.iter().product();

        // One batched access per bound buffer, before execution.
        let mut transfers = Vec::new();
        for (p, slot) in slots.iter().enumerate() {
            if let Some(id) = slot.buffer {
                let kp = &kernel.params[p];
                let mode = match (kp.reads, kp.writes) {
                    (true, true) => AccessMode::ReadWrite,
                    (false, true) => AccessMode::Write,
                    _ => AccessMode::Read,
                };
                transfers.extend(self.access(id, Side::Device, mode, Some(total))?);
            }
        }

        // Shuffled schedules run a seed-deterministic permutation.
        let order: Option<Vec<u64>> = match plan.schedule {
            Schedule::Natural => None,
            Schedule::Shuffled(seed) => {
                let mut ids: Vec<u64> = (0..total).collect();
                ids.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
                Some(ids)
            }
        };

        let ctx = ExecCtx {
            kernel,
            scalars: scalar_env,
            payloads: slots
                .iter()
                .map(|s| {
                    s.buffer.map(|id| {
                        let buf = self.buffers.get(&id).expect("bound above");
                        super::side_payload(buf, Side::Device)
                    })
                })
                .collect(),
            dims: slots.iter().map(|s| s.dims.clone()).collect(),
            elems: slots.iter().map(|s| s.elem).collect(),
            grid: grid.clone(),
            grid_lowers,
        };

        let merged = run_grid(&ctx, total, order.as_deref(), self.mode)?;
        drop(ctx);

        // Apply stores in schedule order, one parameter at a time.
        for (p, writes) in merged.into_iter().enumerate() {
            if writes.is_empty() {
                continue;
            }
            let id = slots[p].buffer.expect("stores go to buffers");
            let buf = self.buffers.get_mut(&id).expect("bound above");
            let payload = super::side_payload_mut(buf, Side::Device);
            match payload {
                Payload::F64(v) => {
                    for (flat, bits) in writes {
                        v[flat as usize] = f64::from_bits(bits);
                    }
                }
                Payload::I32(v) => {
                    for (flat, bits) in writes {
                        v[flat as usize] = bits as i32;
                    }
                }
            }
        }

        self.ledger.record_launch(&kernel.name, total);
        Ok(LaunchStats {
            threads: total,
            grid,
            transfers,
        })
    }

    /// `launch` under a seed-deterministic thread permutation.
    pub fn shuffle_launch(&mut self, plan: &LaunchPlan, seed: u64) -> Result<LaunchStats> {
        let shuffled = LaunchPlan {
            kernel: plan.kernel.clone(),
            args: plan.args.clone(),
            schedule: Schedule::Shuffled(seed),
        };
        self.launch(&shuffled)
    }

    fn bind_args(
        &self,
        kernel: &LoopKernel,
        args: &[(crate::frontend::Name, ArgValue)],
    ) -> Result<Vec<ParamSlot>> {
        let mismatch = |detail: String| DeviceError::BindingMismatch {
            kernel: kernel.name.clone(),
            detail,
        };
        if args.len() != kernel.params.len() {
            return Err(mismatch(format!(
                "kernel takes {} parameters, {} bound",
                kernel.params.len(),
                args.len()
            )));
        }
        let mut slots: Vec<Option<ParamSlot>> = (0..kernel.params.len()).map(|_| None).collect();
        for (name, value) in args {
            let Some(p) = kernel.param_index(name) else {
                return Err(mismatch(format!("no parameter named '{name}'")));
            };
            if slots[p].is_some() {
                return Err(mismatch(format!("parameter '{name}' bound twice")));
            }
            let kp = &kernel.params[p];
            let slot = match (*value, kp.is_array()) {
                (ArgValue::Int(v), false) => {
                    let value = match kp.ty {
                        ElemTy::Integer => Value::I(v),
                        ElemTy::Real64 => Value::R(v as f64),
                    };
                    ParamSlot {
                        value: Some(value),
                        buffer: None,
                        dims: Vec::new(),
                        elem: kp.ty,
                    }
                }
                (ArgValue::Real(v), false) => {
                    if kp.ty != ElemTy::Real64 {
                        return Err(mismatch(format!("'{name}' is integer, got a real")));
                    }
                    ParamSlot {
                        value: Some(Value::R(v)),
                        buffer: None,
                        dims: Vec::new(),
                        elem: kp.ty,
                    }
                }
                (ArgValue::Buffer(id), true) => {
                    let buf = self.buffer(id)?;
                    if buf.elem != kp.ty {
                        return Err(mismatch(format!(
                            "'{name}' needs {} elements, buffer holds {}",
                            kp.ty, buf.elem
                        )));
                    }
                    if buf.shape.len() != kp.rank() {
                        return Err(mismatch(format!(
                            "'{name}' has rank {}, buffer has rank {}",
                            kp.rank(),
                            buf.shape.len()
                        )));
                    }
                    ParamSlot {
                        value: None,
                        buffer: Some(id),
                        dims: Vec::new(),
                        elem: kp.ty,
                    }
                }
                (ArgValue::Buffer(_), false) => {
                    return Err(mismatch(format!("'{name}' is a scalar, got a buffer")))
                }
                (_, true) => return Err(mismatch(format!("'{name}' is an array, got a scalar"))),
            };
            slots[p] = Some(slot);
        }
        let mut slots: Vec<ParamSlot> = slots
            .into_iter()
            .enumerate()
            .map(|(p, s)| {
                s.ok_or_else(|| mismatch(format!("parameter '{}' not bound", kernel.params[p].name)))
            })
            .collect::<Result<_>>()?;
        // Declared bounds under the scalar bindings; buffer extents must
        // agree dimension by dimension (lower bounds rebase positionally).
        let scalar_env: Vec<Option<Value>> = slots.iter().map(|s| s.value).collect();
        for (p, kp) in kernel.params.iter().enumerate() {
            if !kp.is_array() {
                continue;
            }
            let mut dims = Vec::new();
            for (lo, hi) in &kp.dims {
                let lo = eval_static(lo, &scalar_env, kernel)?.as_i64();
                let hi = eval_static(hi, &scalar_env, kernel)?.as_i64();
                dims.push((lo, hi));
            }
            let id = slots[p].buffer.unwrap();
            let buf = self.buffer(id)?;
            for (d, ((lo, hi), (blo, bhi))) in dims.iter().zip(&buf.shape).enumerate() {
                if hi - lo != bhi - blo {
                    return Err(mismatch(format!(
                        "'{}' dimension {}: declared extent {} but buffer extent {}",
                        kernel.params[p].name,
                        d + 1,
                        hi - lo + 1,
                        bhi - blo + 1
                    )));
                }
            }
            slots[p].dims = dims;
        }
        Ok(slots)
    }
}

/// Evaluate an expression over scalar parameters only (declared bounds,
/// grid extents).
fn eval_static(e: &KExpr, scalars: &[Option<Value>], kernel: &LoopKernel) -> Result<Value> {
    match &e.kind {
        KExprKind::ConstI(v) => Ok(Value::I(*v)),
        KExprKind::ConstR(v) => Ok(Value::R(*v)),
        KExprKind::Param(p) => scalars[*p].ok_or_else(|| DeviceError::BindingMismatch {
            kernel: kernel.name.clone(),
            detail: format!("'{}' used where a scalar is needed", kernel.params[*p].name),
        }),
        KExprKind::CastReal(inner) => {
            Ok(Value::R(eval_static(inner, scalars, kernel)?.as_f64()))
        }
        KExprKind::Un { op, operand } => {
            let v = eval_static(operand, scalars, kernel)?;
            un_op(*op, v).map_err(|e| DeviceError::Arith {
                line: 0,
                message: e.to_string(),
            })
        }
        KExprKind::Bin { op, lhs, rhs } => {
            let l = eval_static(lhs, scalars, kernel)?;
            let r = eval_static(rhs, scalars, kernel)?;
            bin_op(*op, l, r).map_err(|e| DeviceError::Arith {
                line: 0,
                message: e.to_string(),
            })
        }
        KExprKind::DomainVar(_) | KExprKind::Local(_) | KExprKind::Load { .. } => {
            Err(DeviceError::BindingMismatch {
                kernel: kernel.name.clone(),
                detail: "launch-time expression depends on thread state".into(),
            })
        }
    }
}

fn run_grid(
    ctx: &ExecCtx,
    total: u64,
    order: Option<&[u64]>,
    mode: ExecMode,
) -> Result<Vec<Vec<(u32, u64)>>> {
    let n_params = ctx.kernel.params.len();
    #[cfg(feature = "parallel")]
    if mode == ExecMode::Parallel && total > 1 {
        use rayon::prelude::*;
        let threads = rayon::current_num_threads().max(1) as u64;
        let chunk = (total / (threads * 8)).max(256).min(total);
        let ranges: Vec<(u64, u64)> = (0..total)
            .step_by(chunk as usize)
            .map(|s| (s, (s + chunk).min(total)))
            .collect();
        let outs: Vec<Result<Vec<Vec<(u32, u64)>>>> = ranges
            .par_iter()
            .map(|&(s, e)| run_span(ctx, s, e, order))
            .collect();
        let mut merged: Vec<Vec<(u32, u64)>> = vec![Vec::new(); n_params];
        for out in outs {
            let out = out?;
            for (p, mut w) in out.into_iter().enumerate() {
                merged[p].append(&mut w);
            }
        }
        return Ok(merged);
    }
    let _ = mode;
    run_span(ctx, 0, total, order)
}

/// Execute schedule positions `start..end`, collecting stores.
fn run_span(
    ctx: &ExecCtx,
    start: u64,
    end: u64,
    order: Option<&[u64]>,
) -> Result<Vec<Vec<(u32, u64)>>> {
    let n_params = ctx.kernel.params.len();
    let mut st = ThreadState {
        domain_vals: vec![0; ctx.kernel.domains.len()],
        locals: vec![None; ctx.kernel.locals.len()],
        writes: vec![Vec::new(); n_params],
        thread_start: vec![0; n_params],
    };
    for pos in start..end {
        let id = order.map_or(pos, |o| o[pos as usize]);
        // Decode the flat thread id into grid coordinates, axis 0 slowest.
        let mut rem = id;
        for (k, &ax) in ctx.kernel.grid_axes.iter().enumerate().rev() {
            let ext = ctx.grid[k];
            let coord = rem % ext;
            rem /= ext;
            st.domain_vals[ax] = ctx.grid_lowers[k] + coord as i64;
        }
        for l in st.locals.iter_mut() {
            *l = None;
        }
        for (p, w) in st.writes.iter().enumerate() {
            st.thread_start[p] = w.len();
        }
        run_inner_domains(ctx, &mut st, ctx.kernel.grid_axes.len())?;
    }
    Ok(st.writes)
}

fn run_inner_domains(ctx: &ExecCtx, st: &mut ThreadState, d: usize) -> Result<()> {
    if d == ctx.kernel.domains.len() {
        return run_body(ctx, st, &ctx.kernel.body);
    }
    let dom = &ctx.kernel.domains[d];
    let lo = eval(ctx, st, &dom.lower, 0)?.as_i64();
    let hi = eval(ctx, st, &dom.upper, 0)?.as_i64();
    let mut v = lo;
    while v <= hi {
        st.domain_vals[d] = v;
        run_inner_domains(ctx, st, d + 1)?;
        v += 1;
    }
    Ok(())
}

fn run_body(ctx: &ExecCtx, st: &mut ThreadState, body: &[KInstr]) -> Result<()> {
    for instr in body {
        match instr {
            KInstr::SetLocal { local, value, line } => {
                let v = eval(ctx, st, value, *line)?;
                st.locals[*local] = Some(v);
            }
            KInstr::Store {
                param,
                indices,
                value,
                line,
            } => {
                let v = eval(ctx, st, value, *line)?;
                let mut idx = Vec::with_capacity(indices.len());
                for i in indices {
                    idx.push(eval(ctx, st, i, *line)?.as_i64());
                }
                let flat = flat_index(&ctx.dims[*param], &idx).ok_or_else(|| {
                    oob(ctx, st, *param, &idx, *line)
                })?;
                let bits = match (ctx.elems[*param], v) {
                    (ElemTy::Real64, v) => v.as_f64().to_bits(),
                    (ElemTy::Integer, Value::I(i)) => i as i32 as u32 as u64,
                    (ElemTy::Integer, _) => unreachable!("typed at lowering"),
                };
                st.writes[*param].push((flat as u32, bits));
            }
            KInstr::If {
                cond,
                then_body,
                else_body,
                line,
            } => {
                if eval(ctx, st, cond, *line)?.truthy() {
                    run_body(ctx, st, then_body)?;
                } else {
                    run_body(ctx, st, else_body)?;
                }
            }
        }
    }
    Ok(())
}

fn oob(ctx: &ExecCtx, st: &ThreadState, param: usize, idx: &[i64], line: u32) -> DeviceError {
    let thread: Vec<i64> = ctx
        .kernel
        .grid_axes
        .iter()
        .map(|&ax| st.domain_vals[ax])
        .collect();
    DeviceError::OutOfBounds {
        buffer: ctx.kernel.params[param].name.as_str().to_string(),
        indices: idx.to_vec(),
        thread,
        line,
    }
}

fn eval(ctx: &ExecCtx, st: &mut ThreadState, e: &KExpr, line: u32) -> Result<Value> {
    match &e.kind {
        KExprKind::ConstI(v) => Ok(Value::I(*v)),
        KExprKind::ConstR(v) => Ok(Value::R(*v)),
        KExprKind::Param(p) => Ok(ctx.scalars[*p].expect("scalar params bound")),
        KExprKind::DomainVar(d) => Ok(Value::I(st.domain_vals[*d])),
        KExprKind::Local(l) => st.locals[*l].ok_or_else(|| DeviceError::UninitializedLocal {
            name: ctx.kernel.locals[*l].name.as_str().to_string(),
            line,
        }),
        KExprKind::Load { param, indices } => {
            let mut idx = Vec::with_capacity(indices.len());
            for i in indices {
                idx.push(eval(ctx, st, i, line)?.as_i64());
            }
            let flat = flat_index(&ctx.dims[*param], &idx)
                .ok_or_else(|| oob(ctx, st, *param, &idx, line))?;
            // The thread's own earlier store wins over the snapshot.
            for (f, bits) in st.writes[*param][st.thread_start[*param]..].iter().rev() {
                if *f as usize == flat {
                    return Ok(match ctx.elems[*param] {
                        ElemTy::Real64 => Value::R(f64::from_bits(*bits)),
                        ElemTy::Integer => Value::I(*bits as u32 as i32 as i64),
                    });
                }
            }
            let payload = ctx.payloads[*param].expect("arrays bound to buffers");
            Ok(read_payload(payload, flat))
        }
        KExprKind::CastReal(inner) => Ok(Value::R(eval(ctx, st, inner, line)?.as_f64())),
        KExprKind::Un { op, operand } => {
            let v = eval(ctx, st, operand, line)?;
            un_op(*op, v).map_err(|err| DeviceError::Arith {
                line,
                message: err.to_string(),
            })
        }
        KExprKind::Bin { op, lhs, rhs } => {
            let l = eval(ctx, st, lhs, line)?;
            let r = eval(ctx, st, rhs, line)?;
            bin_op(*op, l, r).map_err(|err| DeviceError::Arith {
                line,
                message: err.to_string(),
            })
        }
    }
}
