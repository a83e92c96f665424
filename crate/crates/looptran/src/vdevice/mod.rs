//! Simulated accelerator: two memory sides, residency-tracked buffers,
//! and kernel launches over a thread grid.
//!
//! One device serializes its launches through `&mut self`. Thread
//! execution may run in parallel (rayon, behind the `parallel` feature)
//! or sequentially; results are identical either way because threads
//! collect their stores and the device applies them in schedule order
//! after the grid finishes. Race-free kernels make that order
//! irrelevant, which is exactly what the shuffled-schedule harness
//! verifies.

mod buffer;
mod exec;
mod ledger;
pub mod value;

pub use buffer::{
    flat_index, AccessMode, Buffer, BufferId, Direction, Payload, Residency, Side, TransferEvent,
};
pub use exec::{ArgValue, LaunchPlan, LaunchStats, Schedule};
pub use ledger::{KernelStats, TransferLedger};
pub use value::Value;

use crate::frontend::ElemTy;
use std::collections::HashMap;
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum DeviceError {
    #[error("bad buffer shape: {0}")]
    BadShape(String),
    #[error("use after free: {0}")]
    UseAfterFree(BufferId),
    #[error("binding mismatch for kernel '{kernel}': {detail}")]
    BindingMismatch { kernel: String, detail: String },
    #[error("kernel '{kernel}': domain '{domain}' has extent {extent} at launch")]
    EmptyGrid {
        kernel: String,
        domain: String,
        extent: i64,
    },
    #[error(
        "out-of-bounds access to '{buffer}' at ({}) from thread ({}), line {line}",
        fmt_idx(indices),
        fmt_idx(thread)
    )]
    OutOfBounds {
        buffer: String,
        indices: Vec<i64>,
        thread: Vec<i64>,
        line: u32,
    },
    #[error("line {line}: {message}")]
    Arith { line: u32, message: String },
    #[error("line {line}: '{name}' read before it is defined in this thread")]
    UninitializedLocal { name: String, line: u32 },
}

fn fmt_idx(v: &[i64]) -> String {
    v.iter()
        .map(|i| i.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

pub type Result<T> = std::result::Result<T, DeviceError>;

/// How grid threads are driven.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExecMode {
    Sequential,
    /// Data-parallel over rayon when the `parallel` feature is on;
    /// falls back to sequential otherwise.
    Parallel,
}

impl Default for ExecMode {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            ExecMode::Parallel
        } else {
            ExecMode::Sequential
        }
    }
}

pub struct VirtualDevice {
    buffers: HashMap<BufferId, Buffer>,
    next_id: u64,
    ledger: TransferLedger,
    mode: ExecMode,
}

impl Default for VirtualDevice {
    fn default() -> Self {
        Self::new()
    }
}

impl VirtualDevice {
    pub fn new() -> VirtualDevice {
        VirtualDevice::with_mode(ExecMode::default())
    }

    pub fn with_mode(mode: ExecMode) -> VirtualDevice {
        VirtualDevice {
            buffers: HashMap::new(),
            next_id: 1,
            ledger: TransferLedger::default(),
            mode,
        }
    }

    pub fn mode(&self) -> ExecMode {
        self.mode
    }

    pub fn set_mode(&mut self, mode: ExecMode) {
        self.mode = mode;
    }

    pub fn create_buffer(
        &mut self,
        shape: &[(i64, i64)],
        elem: ElemTy,
        residency: Residency,
    ) -> Result<BufferId> {
        let buf = Buffer::new(shape, elem, residency)
            .ok_or_else(|| DeviceError::BadShape(format!("{shape:?}")))?;
        let id = BufferId(self.next_id);
        self.next_id += 1;
        self.buffers.insert(id, buf);
        Ok(id)
    }

    pub fn free(&mut self, id: BufferId) -> Result<()> {
        self.buffers
            .remove(&id)
            .map(|_| ())
            .ok_or(DeviceError::UseAfterFree(id))
    }

    pub fn buffer(&self, id: BufferId) -> Result<&Buffer> {
        self.buffers.get(&id).ok_or(DeviceError::UseAfterFree(id))
    }

    fn buffer_mut(&mut self, id: BufferId) -> Result<&mut Buffer> {
        self.buffers
            .get_mut(&id)
            .ok_or(DeviceError::UseAfterFree(id))
    }

    /// One residency transition on behalf of `batch` logical accesses of
    /// the same side and mode (they cannot transfer more than the first
    /// one does). Returns the transfers performed: zero or one event.
    pub fn access(
        &mut self,
        id: BufferId,
        side: Side,
        mode: AccessMode,
        batch: Option<u64>,
    ) -> Result<Vec<TransferEvent>> {
        let _ = batch;
        let buf = self.buffer_mut(id)?;
        let ev = buf.access(id, side, mode);
        if let Some(ev) = &ev {
            self.ledger.record_transfer(ev);
        }
        Ok(ev.into_iter().collect())
    }

    pub fn ledger_snapshot(&self) -> TransferLedger {
        self.ledger.clone()
    }

    // ---- element and bulk accessors (host or device side) ----------------

    pub fn read_elem(&mut self, id: BufferId, side: Side, indices: &[i64]) -> Result<Value> {
        self.access(id, side, AccessMode::Read, None)?;
        let buf = self.buffer(id)?;
        let flat = buf
            .flat_index(indices)
            .ok_or_else(|| DeviceError::OutOfBounds {
                buffer: id.to_string(),
                indices: indices.to_vec(),
                thread: vec![],
                line: 0,
            })?;
        Ok(read_payload(side_payload(buf, side), flat))
    }

    pub fn write_elem(
        &mut self,
        id: BufferId,
        side: Side,
        indices: &[i64],
        value: Value,
    ) -> Result<()> {
        self.access(id, side, AccessMode::Write, None)?;
        let buf = self.buffer_mut(id)?;
        let flat = buf
            .flat_index(indices)
            .ok_or_else(|| DeviceError::OutOfBounds {
                buffer: id.to_string(),
                indices: indices.to_vec(),
                thread: vec![],
                line: 0,
            })?;
        write_payload(side_payload_mut(buf, side), flat, value);
        Ok(())
    }

    /// Whole-payload copy from one side, with read accounting.
    pub fn read_all_f64(&mut self, id: BufferId, side: Side) -> Result<Vec<f64>> {
        let len = self.buffer(id)?.len() as u64;
        self.access(id, side, AccessMode::Read, Some(len))?;
        match side_payload(self.buffer(id)?, side) {
            Payload::F64(v) => Ok(v.clone()),
            Payload::I32(_) => Err(DeviceError::BindingMismatch {
                kernel: String::new(),
                detail: format!("{id} holds integers, not reals"),
            }),
        }
    }

    /// Whole-payload overwrite of one side, with write accounting.
    pub fn write_all_f64(&mut self, id: BufferId, side: Side, data: &[f64]) -> Result<()> {
        let len = self.buffer(id)?.len();
        if data.len() != len {
            return Err(DeviceError::BadShape(format!(
                "payload length {} does not match buffer length {len}",
                data.len()
            )));
        }
        self.access(id, side, AccessMode::Write, Some(len as u64))?;
        match side_payload_mut(self.buffer_mut(id)?, side) {
            Payload::F64(v) => v.copy_from_slice(data),
            Payload::I32(_) => {
                return Err(DeviceError::BindingMismatch {
                    kernel: String::new(),
                    detail: format!("{id} holds integers, not reals"),
                })
            }
        }
        Ok(())
    }

    /// Raw little-endian bytes of one side without touching residency;
    /// testing support for bitwise comparisons.
    pub fn peek_bytes(&self, id: BufferId, side: Side) -> Result<Vec<u8>> {
        let buf = self.buffer(id)?;
        let p = match side {
            Side::Host => buf.host.as_ref(),
            Side::Device => buf.device.as_ref(),
        };
        Ok(match p {
            None => Vec::new(),
            Some(Payload::F64(v)) => v.iter().flat_map(|x| x.to_le_bytes()).collect(),
            Some(Payload::I32(v)) => v.iter().flat_map(|x| x.to_le_bytes()).collect(),
        })
    }
}

fn side_payload(buf: &Buffer, side: Side) -> &Payload {
    match side {
        Side::Host => buf.host.as_ref().expect("validated by access"),
        Side::Device => buf.device.as_ref().expect("validated by access"),
    }
}

fn side_payload_mut(buf: &mut Buffer, side: Side) -> &mut Payload {
    match side {
        Side::Host => buf.host.as_mut().expect("validated by access"),
        Side::Device => buf.device.as_mut().expect("validated by access"),
    }
}

fn read_payload(p: &Payload, flat: usize) -> Value {
    match p {
        Payload::F64(v) => Value::R(v[flat]),
        Payload::I32(v) => Value::I(v[flat] as i64),
    }
}

fn write_payload(p: &mut Payload, flat: usize, value: Value) {
    match (p, value) {
        (Payload::F64(v), val) => v[flat] = val.as_f64(),
        (Payload::I32(v), Value::I(val)) => v[flat] = val as i32,
        (Payload::I32(_), _) => panic!("type-checked at binding time"),
    }
}

#[cfg(test)]
mod tests;
