//! External-call registry with integer-handle conversion.
//!
//! Legacy calling conventions pass opaque integer handles; the registry
//! keeps the handle-to-object table and converts flagged argument
//! positions before the native implementation runs, the same shim an
//! interop wrapper performs when it turns a Fortran handle into the
//! native object and then calls the real routine.

use super::{ExecError, Result};
use crate::vdevice::{Side, VirtualDevice};
use std::any::Any;
use std::collections::{BTreeSet, HashMap};
use std::sync::Arc;

pub type Object = Arc<dyn Any + Send + Sync>;

/// The process-wide default context, bound to handle 0 at startup.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DefaultContext;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExtParamKind {
    Buffer,
    IntIn,
    RealIn,
    /// Written by the external and copied back to the caller.
    IntOut,
    RealOut,
}

#[derive(Clone)]
pub enum ArgSlot {
    Buf(crate::vdevice::BufferId),
    Int(i64),
    Real(f64),
    /// A converted handle.
    Obj(Object),
}

pub struct ExtCtx<'a> {
    pub device: &'a mut VirtualDevice,
    /// Memory side the external operates on.
    pub side: Side,
}

type ExtImpl = Box<dyn Fn(&mut ExtCtx, &mut [ArgSlot]) -> Result<()> + Send + Sync>;

pub struct ExternalSpec {
    pub params: Vec<ExtParamKind>,
    /// Positions whose integer argument is converted to the registered
    /// object before the implementation runs.
    pub handle_params: BTreeSet<usize>,
    imp: ExtImpl,
}

impl ExternalSpec {
    pub fn new(
        params: Vec<ExtParamKind>,
        handle_params: impl IntoIterator<Item = usize>,
        imp: impl Fn(&mut ExtCtx, &mut [ArgSlot]) -> Result<()> + Send + Sync + 'static,
    ) -> ExternalSpec {
        ExternalSpec {
            params,
            handle_params: handle_params.into_iter().collect(),
            imp: Box::new(imp),
        }
    }
}

pub struct ExternalRegistry {
    map: HashMap<String, ExternalSpec>,
    handles: HashMap<i64, Object>,
    next_handle: i64,
}

impl Default for ExternalRegistry {
    fn default() -> Self {
        Self::new()
    }
}

impl ExternalRegistry {
    pub fn new() -> ExternalRegistry {
        let mut handles: HashMap<i64, Object> = HashMap::new();
        handles.insert(0, Arc::new(DefaultContext));
        ExternalRegistry {
            map: HashMap::new(),
            handles,
            next_handle: 1,
        }
    }

    pub fn register(&mut self, name: &str, spec: ExternalSpec) {
        self.map.insert(name.to_ascii_lowercase(), spec);
    }

    pub fn lookup(&self, name: &str) -> Option<&ExternalSpec> {
        self.map.get(&name.to_ascii_lowercase())
    }

    /// Associate an object with a fresh integer handle.
    pub fn issue_handle(&mut self, obj: Object) -> i64 {
        let h = self.next_handle;
        self.next_handle += 1;
        self.handles.insert(h, obj);
        h
    }

    /// The object a previously issued handle stands for; handle 0 is
    /// the default context.
    pub fn convert_handle(&self, raw: i64) -> Result<Object> {
        self.handles
            .get(&raw)
            .cloned()
            .ok_or(ExecError::BadHandle(raw))
    }

    /// Validate the slots against the signature, convert handle
    /// positions, and run the implementation. Mutated scalar slots are
    /// the caller's to copy back.
    pub fn invoke(
        &self,
        name: &str,
        slots: &mut Vec<ArgSlot>,
        device: &mut VirtualDevice,
        side: Side,
    ) -> Result<()> {
        let spec = self
            .lookup(name)
            .ok_or_else(|| ExecError::UnknownCallee(name.to_string()))?;
        if slots.len() != spec.params.len() {
            return Err(ExecError::ArityMismatch {
                callee: name.to_string(),
                expected: spec.params.len(),
                got: slots.len(),
            });
        }
        for (i, (slot, kind)) in slots.iter_mut().zip(&spec.params).enumerate() {
            let bad = |detail: &str| ExecError::BadArg {
                callee: name.to_string(),
                position: i + 1,
                detail: detail.to_string(),
            };
            if spec.handle_params.contains(&i) {
                let ArgSlot::Int(raw) = slot else {
                    return Err(bad("expected an integer handle"));
                };
                *slot = ArgSlot::Obj(self.convert_handle(*raw)?);
                continue;
            }
            match (kind, &slot) {
                (ExtParamKind::Buffer, ArgSlot::Buf(_)) => {}
                (ExtParamKind::IntIn | ExtParamKind::IntOut, ArgSlot::Int(_)) => {}
                (ExtParamKind::RealIn | ExtParamKind::RealOut, ArgSlot::Real(_)) => {}
                // An integer actual widens into a real dummy.
                (ExtParamKind::RealIn | ExtParamKind::RealOut, ArgSlot::Int(v)) => {
                    let v = *v;
                    *slot = ArgSlot::Real(v as f64);
                }
                (ExtParamKind::Buffer, _) => return Err(bad("expected an array")),
                (ExtParamKind::IntIn | ExtParamKind::IntOut, _) => {
                    return Err(bad("expected an integer"))
                }
                (ExtParamKind::RealIn | ExtParamKind::RealOut, _) => {
                    return Err(bad("expected a real"))
                }
            }
        }
        let mut ctx = ExtCtx { device, side };
        (spec.imp)(&mut ctx, slots)
    }
}
