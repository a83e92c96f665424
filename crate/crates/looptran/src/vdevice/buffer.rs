//! Residency-tracked buffers.
//!
//! A buffer owns up to two copies of the same array, one per memory
//! side. A dirty bit on a side means that side holds writes the other
//! has not seen. Any access first validates the touched side (one
//! whole-buffer transfer when it is absent or stale), then a write marks
//! the touched side dirty. Two consequences worth naming: repeated reads
//! on one side never transfer twice, and at most one dirty bit is ever
//! set.

use crate::frontend::ElemTy;
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BufferId(pub(super) u64);

impl std::fmt::Display for BufferId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "buf#{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Host,
    Device,
}

impl Side {
    pub fn other(self) -> Side {
        match self {
            Side::Host => Side::Device,
            Side::Device => Side::Host,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AccessMode {
    Read,
    Write,
    ReadWrite,
}

impl AccessMode {
    pub fn writes(self) -> bool {
        matches!(self, AccessMode::Write | AccessMode::ReadWrite)
    }
}

/// Where the initial payload lives.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Residency {
    Host,
    Device,
    ZeroedBoth,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    H2d,
    D2h,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TransferEvent {
    pub buffer: u64,
    pub direction: Direction,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    F64(Vec<f64>),
    I32(Vec<i32>),
}

impl Payload {
    fn zeroed(elem: ElemTy, len: usize) -> Payload {
        match elem {
            ElemTy::Real64 => Payload::F64(vec![0.0; len]),
            ElemTy::Integer => Payload::I32(vec![0; len]),
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Payload::F64(v) => v.len(),
            Payload::I32(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone)]
pub struct Buffer {
    pub shape: Vec<(i64, i64)>,
    pub elem: ElemTy,
    pub host: Option<Payload>,
    pub device: Option<Payload>,
    pub host_dirty: bool,
    pub device_dirty: bool,
}

impl Buffer {
    pub fn new(shape: &[(i64, i64)], elem: ElemTy, residency: Residency) -> Option<Buffer> {
        if shape.is_empty() || shape.iter().any(|(lo, hi)| lo > hi) {
            return None;
        }
        let len: i64 = shape.iter().map(|(lo, hi)| hi - lo + 1).product();
        let len = usize::try_from(len).ok()?;
        let (host, device) = match residency {
            Residency::Host => (Some(Payload::zeroed(elem, len)), None),
            Residency::Device => (None, Some(Payload::zeroed(elem, len))),
            Residency::ZeroedBoth => (
                Some(Payload::zeroed(elem, len)),
                Some(Payload::zeroed(elem, len)),
            ),
        };
        Some(Buffer {
            shape: shape.to_vec(),
            elem,
            host,
            device,
            host_dirty: false,
            device_dirty: false,
        })
    }

    pub fn len(&self) -> usize {
        self.shape
            .iter()
            .map(|(lo, hi)| (hi - lo + 1) as usize)
            .product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn elem_size(&self) -> u64 {
        match self.elem {
            ElemTy::Real64 => 8,
            ElemTy::Integer => 4,
        }
    }

    pub fn bytes(&self) -> u64 {
        self.len() as u64 * self.elem_size()
    }

    fn copy_of(&self, side: Side) -> &Option<Payload> {
        match side {
            Side::Host => &self.host,
            Side::Device => &self.device,
        }
    }

    fn dirty(&self, side: Side) -> bool {
        match side {
            Side::Host => self.host_dirty,
            Side::Device => self.device_dirty,
        }
    }

    fn set_dirty(&mut self, side: Side, v: bool) {
        match side {
            Side::Host => self.host_dirty = v,
            Side::Device => self.device_dirty = v,
        }
    }

    /// Apply one access. Returns the transfer it caused, if any.
    pub fn access(&mut self, id: BufferId, side: Side, mode: AccessMode) -> Option<TransferEvent> {
        let mut event = None;
        let stale = self.copy_of(side).is_none() || self.dirty(side.other());
        if stale {
            let src = self
                .copy_of(side.other())
                .clone()
                .expect("a buffer always holds at least one valid copy");
            match side {
                Side::Host => self.host = Some(src),
                Side::Device => self.device = Some(src),
            }
            self.set_dirty(side.other(), false);
            event = Some(TransferEvent {
                buffer: id.0,
                direction: match side {
                    Side::Host => Direction::D2h,
                    Side::Device => Direction::H2d,
                },
                bytes: self.bytes(),
            });
        }
        if mode.writes() {
            self.set_dirty(side, true);
            self.set_dirty(side.other(), false);
        }
        debug_assert!(!(self.host_dirty && self.device_dirty));
        event
    }

    /// Flat offset of a multi-dimensional index, first dimension fastest
    /// (column-major), or None when out of the declared bounds.
    pub fn flat_index(&self, indices: &[i64]) -> Option<usize> {
        flat_index(&self.shape, indices)
    }
}

pub fn flat_index(shape: &[(i64, i64)], indices: &[i64]) -> Option<usize> {
    if indices.len() != shape.len() {
        return None;
    }
    let mut flat: i64 = 0;
    let mut stride: i64 = 1;
    for (&idx, &(lo, hi)) in indices.iter().zip(shape) {
        if idx < lo || idx > hi {
            return None;
        }
        flat += (idx - lo) * stride;
        stride *= hi - lo + 1;
    }
    usize::try_from(flat).ok()
}
