//! The runtime that ties translated units, the registry and the device
//! together.

use super::interp::{eval_expr, exec_stmts, Env};
use super::registry::{ArgSlot, ExtParamKind, ExternalRegistry};
use super::{register_builtin_externals, ExecError, Result};
use crate::frontend::{Expr, ExprKind, Intent, Name, SymbolTable};
use crate::regions::RegionKind;
use crate::translate::{compile_region, CompiledKernel, TranslationUnit};
use crate::vdevice::{ArgValue, LaunchPlan, LaunchStats, Schedule, Side, Value, VirtualDevice};
use std::collections::HashMap;
use std::sync::Arc;

/// How translated subroutines execute their parallel regions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExecStrategy {
    /// Parallel regions launch as kernels on the virtual device.
    Translated,
    /// Everything runs through the sequential interpreter on the host
    /// side; no kernels are launched. The reference path for
    /// translation-equivalence checks.
    Interpreted,
}

/// Argument a driver passes to [`Runtime::call`].
#[derive(Debug, Clone, Copy)]
pub enum DriverArg {
    Buf(crate::vdevice::BufferId),
    Int(i64),
    Real(f64),
}

pub struct Runtime {
    pub device: VirtualDevice,
    pub registry: ExternalRegistry,
    pub strategy: ExecStrategy,
    units: HashMap<String, Arc<TranslationUnit>>,
    kernel_cache: HashMap<(String, usize), CompiledKernel>,
}

impl Default for Runtime {
    fn default() -> Self {
        Self::new()
    }
}

impl Runtime {
    pub fn new() -> Runtime {
        let mut registry = ExternalRegistry::new();
        register_builtin_externals(&mut registry);
        Runtime {
            device: VirtualDevice::new(),
            registry,
            strategy: ExecStrategy::Translated,
            units: HashMap::new(),
            kernel_cache: HashMap::new(),
        }
    }

    /// Parse and register one subroutine; returns its lowercased name.
    pub fn load_source(&mut self, source: &str) -> Result<String> {
        let unit = TranslationUnit::from_source(source)?;
        let key = unit.name().key();
        self.units.insert(key.clone(), Arc::new(unit));
        Ok(key)
    }

    pub fn unit(&self, name: &str) -> Option<Arc<TranslationUnit>> {
        self.units.get(&name.to_ascii_lowercase()).cloned()
    }

    pub fn unit_names(&self) -> Vec<String> {
        let mut names: Vec<String> = self.units.keys().cloned().collect();
        names.sort();
        names
    }

    /// Memory side externals operate on under the current strategy.
    pub fn external_side(&self) -> Side {
        match self.strategy {
            ExecStrategy::Translated => Side::Device,
            ExecStrategy::Interpreted => Side::Host,
        }
    }

    /// Compiled kernel for a unit's parallel region; lowered and
    /// validated on first use, memoized afterwards.
    pub fn compiled(&mut self, unit_name: &str, region_idx: usize) -> Result<CompiledKernel> {
        let key = (unit_name.to_ascii_lowercase(), region_idx);
        if let Some(c) = self.kernel_cache.get(&key) {
            return Ok(c.clone());
        }
        let unit = self
            .unit(unit_name)
            .ok_or_else(|| ExecError::UnknownCallee(unit_name.to_string()))?;
        let compiled = compile_region(&unit, region_idx)?;
        self.kernel_cache.insert(key.clone(), compiled.clone());
        Ok(compiled)
    }

    /// Locate a kernel by its dump name across all loaded units.
    pub fn find_kernel(&self, kernel_name: &str) -> Option<(String, usize)> {
        let want = kernel_name.to_ascii_lowercase();
        for (key, unit) in &self.units {
            for idx in unit.parallel_region_indices() {
                if unit.kernel_name(idx) == want {
                    return Some((key.clone(), idx));
                }
            }
        }
        None
    }

    /// Call a translated subroutine or an external from driver code.
    pub fn call(&mut self, name: &str, args: &[DriverArg]) -> Result<()> {
        if let Some(unit) = self.unit(name) {
            let sub = &unit.subroutine;
            if sub.params.len() != args.len() {
                return Err(ExecError::ArityMismatch {
                    callee: name.to_string(),
                    expected: sub.params.len(),
                    got: args.len(),
                });
            }
            let mut env = Env::default();
            for (dummy, arg) in sub.params.iter().zip(args) {
                let sym = unit.symbols.get(dummy).expect("dummies declared");
                match (sym.is_array(), arg) {
                    (true, DriverArg::Buf(id)) => env.bind_array(dummy.clone(), *id),
                    (false, DriverArg::Int(v)) => {
                        let v = if sym.ty == crate::frontend::ElemTy::Real64 {
                            Value::R(*v as f64)
                        } else {
                            Value::I(*v)
                        };
                        env.bind_scalar(dummy.clone(), v)
                    }
                    (false, DriverArg::Real(v)) => env.bind_scalar(dummy.clone(), Value::R(*v)),
                    _ => {
                        return Err(ExecError::BadArg {
                            callee: name.to_string(),
                            position: sub.params.iter().position(|p| p == dummy).unwrap() + 1,
                            detail: "array/scalar mismatch".into(),
                        })
                    }
                }
            }
            return self.run_unit(&unit, &mut env);
        }
        // Externals take the same shapes.
        let mut slots: Vec<ArgSlot> = args
            .iter()
            .map(|a| match a {
                DriverArg::Buf(id) => ArgSlot::Buf(*id),
                DriverArg::Int(v) => ArgSlot::Int(*v),
                DriverArg::Real(v) => ArgSlot::Real(*v),
            })
            .collect();
        let side = self.external_side();
        self.registry
            .invoke(name, &mut slots, &mut self.device, side)
    }

    /// Invoke an external directly and hand back the slots for
    /// inspection of outputs.
    pub fn invoke_external(&mut self, name: &str, slots: &mut Vec<ArgSlot>) -> Result<()> {
        let side = self.external_side();
        self.registry.invoke(name, slots, &mut self.device, side)
    }

    /// Execute a subroutine activation region by region.
    pub(super) fn run_unit(&mut self, unit: &Arc<TranslationUnit>, env: &mut Env) -> Result<()> {
        for (idx, region) in unit.regions.iter().enumerate() {
            match (region.kind, self.strategy) {
                (RegionKind::Parallel, ExecStrategy::Translated) => {
                    self.launch_region(unit, idx, env)?;
                }
                _ => {
                    let flow = exec_stmts(self, &unit.symbols, env, &region.statements)?;
                    if flow == super::interp::Flow::Returned {
                        return Ok(());
                    }
                }
            }
        }
        Ok(())
    }

    /// Interpret a whole subroutine sequentially regardless of tags;
    /// the independent reference side of equivalence checks.
    pub fn interpret_unit(&mut self, unit: &Arc<TranslationUnit>, env: &mut Env) -> Result<()> {
        let saved = self.strategy;
        self.strategy = ExecStrategy::Interpreted;
        let r = self.run_unit(unit, env);
        self.strategy = saved;
        r
    }

    fn launch_region(
        &mut self,
        unit: &Arc<TranslationUnit>,
        region_idx: usize,
        env: &Env,
    ) -> Result<LaunchStats> {
        let compiled = self.compiled(&unit.name().key(), region_idx)?;
        let plan = self.plan_from_env(&compiled, env, Schedule::Natural)?;
        Ok(self.device.launch(&plan)?)
    }

    /// Bind a compiled kernel's parameters from an activation
    /// environment.
    pub fn plan_from_env(
        &self,
        compiled: &CompiledKernel,
        env: &Env,
        schedule: Schedule,
    ) -> Result<LaunchPlan> {
        let kernel = &compiled.kernel;
        let mut args = Vec::with_capacity(kernel.params.len());
        for p in &kernel.params {
            let v = if p.is_array() {
                let id = env.arrays.get(&p.name).ok_or_else(|| ExecError::Unbound {
                    name: p.name.as_str().to_string(),
                    line: 0,
                })?;
                ArgValue::Buffer(*id)
            } else {
                match env.scalars.get(&p.name) {
                    Some(Value::I(v)) => ArgValue::Int(*v),
                    Some(Value::R(v)) => ArgValue::Real(*v),
                    _ => {
                        return Err(ExecError::Unbound {
                            name: p.name.as_str().to_string(),
                            line: 0,
                        })
                    }
                }
            };
            args.push((p.name.clone(), v));
        }
        Ok(LaunchPlan {
            kernel: kernel.clone(),
            args,
            schedule,
        })
    }

    /// `CALL` dispatch from interpreted statements: translated
    /// subroutines get a fresh by-reference activation, externals get
    /// converted arguments per their signature.
    pub(super) fn dispatch_env_call(
        &mut self,
        name: &Name,
        arg_exprs: &[Expr],
        caller_env: &mut Env,
        caller_syms: &SymbolTable,
        line: u32,
    ) -> Result<()> {
        if let Some(unit) = self.unit(&name.key()) {
            let sub = &unit.subroutine;
            if sub.params.len() != arg_exprs.len() {
                return Err(ExecError::ArityMismatch {
                    callee: name.as_str().to_string(),
                    expected: sub.params.len(),
                    got: arg_exprs.len(),
                });
            }
            let mut env = Env::default();
            // (dummy, caller target) pairs copied back on return.
            let mut writebacks: Vec<(Name, &Expr)> = Vec::new();
            for (pos, (dummy, actual)) in sub.params.iter().zip(arg_exprs).enumerate() {
                let sym = unit.symbols.get(dummy).expect("dummies declared");
                if sym.is_array() {
                    let ExprKind::Var(arr) = &actual.kind else {
                        return Err(ExecError::BadArg {
                            callee: name.as_str().to_string(),
                            position: pos + 1,
                            detail: "array argument must be a bare array name".into(),
                        });
                    };
                    let id = *caller_env.arrays.get(arr).ok_or_else(|| ExecError::Unbound {
                        name: arr.as_str().to_string(),
                        line,
                    })?;
                    env.bind_array(dummy.clone(), id);
                } else {
                    let v = eval_expr(self, caller_syms, caller_env, actual)?;
                    let v = if sym.ty == crate::frontend::ElemTy::Real64 {
                        match v {
                            Value::I(i) => Value::R(i as f64),
                            other => other,
                        }
                    } else {
                        v
                    };
                    env.bind_scalar(dummy.clone(), v);
                    if sym.intent != Intent::In {
                        if !matches!(actual.kind, ExprKind::Var(_) | ExprKind::Elem(..)) {
                            return Err(ExecError::NotDefinable {
                                callee: name.as_str().to_string(),
                                position: pos + 1,
                            });
                        }
                        writebacks.push((dummy.clone(), actual));
                    }
                }
            }
            self.run_unit(&unit, &mut env)?;
            for (dummy, target) in writebacks {
                let v = env.scalars[&dummy];
                write_back(self, caller_syms, caller_env, target, v, line)?;
            }
            return Ok(());
        }

        if self.registry.lookup(&name.key()).is_none() {
            return Err(ExecError::UnknownCallee(name.as_str().to_string()));
        }
        let spec_params: Vec<ExtParamKind> =
            self.registry.lookup(&name.key()).unwrap().params.clone();
        if spec_params.len() != arg_exprs.len() {
            return Err(ExecError::ArityMismatch {
                callee: name.as_str().to_string(),
                expected: spec_params.len(),
                got: arg_exprs.len(),
            });
        }
        let mut slots = Vec::with_capacity(arg_exprs.len());
        for (pos, (kind, actual)) in spec_params.iter().zip(arg_exprs).enumerate() {
            let slot = match kind {
                ExtParamKind::Buffer => {
                    let ExprKind::Var(arr) = &actual.kind else {
                        return Err(ExecError::BadArg {
                            callee: name.as_str().to_string(),
                            position: pos + 1,
                            detail: "array argument must be a bare array name".into(),
                        });
                    };
                    ArgSlot::Buf(*caller_env.arrays.get(arr).ok_or_else(|| {
                        ExecError::Unbound {
                            name: arr.as_str().to_string(),
                            line,
                        }
                    })?)
                }
                ExtParamKind::IntOut | ExtParamKind::RealOut
                    if !matches!(actual.kind, ExprKind::Var(_) | ExprKind::Elem(..)) =>
                {
                    return Err(ExecError::NotDefinable {
                        callee: name.as_str().to_string(),
                        position: pos + 1,
                    })
                }
                _ => match eval_expr(self, caller_syms, caller_env, actual)? {
                    Value::I(v) => ArgSlot::Int(v),
                    Value::R(v) => ArgSlot::Real(v),
                    Value::B(_) => {
                        return Err(ExecError::BadArg {
                            callee: name.as_str().to_string(),
                            position: pos + 1,
                            detail: "logical arguments are not supported".into(),
                        })
                    }
                },
            };
            slots.push(slot);
        }
        let side = self.external_side();
        self.registry
            .invoke(&name.key(), &mut slots, &mut self.device, side)?;
        for (pos, kind) in spec_params.iter().enumerate() {
            if matches!(kind, ExtParamKind::IntOut | ExtParamKind::RealOut) {
                let v = match &slots[pos] {
                    ArgSlot::Int(v) => Value::I(*v),
                    ArgSlot::Real(v) => Value::R(*v),
                    _ => continue,
                };
                write_back(self, caller_syms, caller_env, &arg_exprs[pos], v, line)?;
            }
        }
        Ok(())
    }
}

/// Store a by-reference result into the caller's variable or array
/// element.
fn write_back(
    rt: &mut Runtime,
    syms: &SymbolTable,
    env: &mut Env,
    target: &Expr,
    v: Value,
    line: u32,
) -> Result<()> {
    match &target.kind {
        ExprKind::Var(n) => {
            let v = match syms.get(n).map(|s| s.ty) {
                Some(crate::frontend::ElemTy::Real64) => match v {
                    Value::I(i) => Value::R(i as f64),
                    other => other,
                },
                _ => v,
            };
            env.scalars.insert(n.clone(), v);
            Ok(())
        }
        ExprKind::Elem(n, indices) => {
            let mut idx = Vec::with_capacity(indices.len());
            for e in indices {
                idx.push(eval_expr(rt, syms, env, e)?.as_i64());
            }
            let id = *env.arrays.get(n).ok_or_else(|| ExecError::Unbound {
                name: n.as_str().to_string(),
                line,
            })?;
            Ok(rt.device.write_elem(id, Side::Host, &idx, v)?)
        }
        _ => unreachable!("definability checked at dispatch"),
    }
}

/// Interpret a run of statements against an environment; entry point
/// for host regions reached from driver code and for tests.
pub fn interpret(
    rt: &mut Runtime,
    syms: &SymbolTable,
    env: &mut Env,
    stmts: &[crate::frontend::Stmt],
) -> Result<()> {
    exec_stmts(rt, syms, env, stmts).map(|_| ())
}
