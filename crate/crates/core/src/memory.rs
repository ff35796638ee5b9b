// Licensed under the Apache License, Version 2.0 or the MIT License.
// SPDX-License-Identifier: Apache-2.0 OR MIT
// Copyright kernsim Contributors 2026.

//! Flat simulated RAM and the per-process protection regions layered on top
//! of it (the simulated MPU).
//!
//! Every process-originated access and every kernel access to process memory
//! goes through [`SimMemory`]. Kernel accessors bypass the region checks but
//! never the bounds check. Zero-length accesses are always legal and never
//! touch the backing store, whatever their base address.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::ids::ProcessId;

/// A simulated physical address.
pub type Address = u32;

/// Default number of protection regions a process may configure.
pub const DEFAULT_MPU_MAX_REGIONS: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Permission {
    None,
    Read,
    ReadWrite,
}

impl Permission {
    pub fn allows(self, kind: AccessKind) -> bool {
        matches!(
            (self, kind),
            (Permission::Read, AccessKind::Read) | (Permission::ReadWrite, _)
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum AccessKind {
    Read,
    Write,
}

impl AccessKind {
    pub fn as_str(self) -> &'static str {
        match self {
            AccessKind::Read => "read",
            AccessKind::Write => "write",
        }
    }
}

/// A contiguous protection region. Zero-length regions are legal at any base
/// and cover no bytes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct MemoryRegion {
    pub base: Address,
    pub length: u32,
    pub permission: Permission,
}

impl MemoryRegion {
    pub const fn new(base: Address, length: u32, permission: Permission) -> Self {
        MemoryRegion {
            base,
            length,
            permission,
        }
    }

    /// One past the last byte, widened so it cannot overflow.
    pub fn end(&self) -> u64 {
        self.base as u64 + self.length as u64
    }

    pub fn contains(&self, addr: u64) -> bool {
        addr >= self.base as u64 && addr < self.end()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Accessor {
    Kernel,
    Process(ProcessId),
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum MemoryError {
    #[error("{requested} regions requested but the MPU supports at most {max}")]
    TooManyRegions { requested: usize, max: usize },
    #[error("range [{base:#x}, +{length}) exceeds the address space")]
    OutOfBounds { base: Address, length: u32 },
    #[error("process {pid} may not {} [{base:#x}, +{length})", kind.as_str())]
    AccessDenied {
        pid: ProcessId,
        base: Address,
        length: u32,
        kind: AccessKind,
    },
    #[error("process {0} has no protection configuration")]
    UnknownProcess(ProcessId),
}

/// The board's RAM: a fixed-size byte array.
#[derive(Clone, Debug)]
pub struct AddressSpace {
    bytes: Box<[u8]>,
}

impl AddressSpace {
    pub fn new(total_size: u32) -> Self {
        AddressSpace {
            bytes: vec![0u8; total_size as usize].into_boxed_slice(),
        }
    }

    pub fn total_size(&self) -> u32 {
        self.bytes.len() as u32
    }

    fn in_bounds(&self, base: Address, length: u32) -> bool {
        base as u64 + length as u64 <= self.bytes.len() as u64
    }
}

/// Simulated RAM plus the MPU configuration of every live process.
#[derive(Debug)]
pub struct SimMemory {
    space: AddressSpace,
    max_regions: usize,
    regions: BTreeMap<ProcessId, Vec<MemoryRegion>>,
    byte_touches: u64,
}

impl SimMemory {
    pub fn new(total_size: u32, max_regions: usize) -> Self {
        SimMemory {
            space: AddressSpace::new(total_size),
            max_regions,
            regions: BTreeMap::new(),
            byte_touches: 0,
        }
    }

    pub fn total_size(&self) -> u32 {
        self.space.total_size()
    }

    pub fn max_regions(&self) -> usize {
        self.max_regions
    }

    /// Replaces the protection configuration of `pid`.
    pub fn configure_regions(
        &mut self,
        pid: ProcessId,
        regions: &[MemoryRegion],
    ) -> Result<(), MemoryError> {
        if regions.len() > self.max_regions {
            return Err(MemoryError::TooManyRegions {
                requested: regions.len(),
                max: self.max_regions,
            });
        }
        if let Some(r) = regions
            .iter()
            .find(|r| !self.space.in_bounds(r.base, r.length))
        {
            return Err(MemoryError::OutOfBounds {
                base: r.base,
                length: r.length,
            });
        }
        self.regions.insert(pid, regions.to_vec());
        Ok(())
    }

    /// Drops the configuration of a dead process. Later accesses by it fail.
    pub fn clear_regions(&mut self, pid: ProcessId) {
        self.regions.remove(&pid);
    }

    pub fn regions(&self, pid: ProcessId) -> Option<&[MemoryRegion]> {
        self.regions.get(&pid).map(Vec::as_slice)
    }

    /// Decides whether an access would be allowed, without performing it.
    pub fn check(
        &self,
        accessor: Accessor,
        base: Address,
        length: u32,
        kind: AccessKind,
    ) -> Result<(), MemoryError> {
        if length == 0 {
            return Ok(());
        }
        if !self.space.in_bounds(base, length) {
            return Err(MemoryError::OutOfBounds { base, length });
        }
        let pid = match accessor {
            Accessor::Kernel => return Ok(()),
            Accessor::Process(pid) => pid,
        };
        let regions = self
            .regions
            .get(&pid)
            .ok_or(MemoryError::UnknownProcess(pid))?;
        if covered(regions, base, length, kind) {
            Ok(())
        } else {
            Err(MemoryError::AccessDenied {
                pid,
                base,
                length,
                kind,
            })
        }
    }

    pub fn read(
        &mut self,
        accessor: Accessor,
        base: Address,
        length: u32,
    ) -> Result<Vec<u8>, MemoryError> {
        self.check(accessor, base, length, AccessKind::Read)?;
        if length == 0 {
            return Ok(Vec::new());
        }
        self.byte_touches += 1;
        let start = base as usize;
        Ok(self.space.bytes[start..start + length as usize].to_vec())
    }

    pub fn write(
        &mut self,
        accessor: Accessor,
        base: Address,
        data: &[u8],
    ) -> Result<(), MemoryError> {
        let length = data.len() as u32;
        self.check(accessor, base, length, AccessKind::Write)?;
        if length == 0 {
            return Ok(());
        }
        self.byte_touches += 1;
        let start = base as usize;
        self.space.bytes[start..start + data.len()].copy_from_slice(data);
        Ok(())
    }

    /// Number of accesses that actually touched the byte array.
    pub fn byte_touches(&self) -> u64 {
        self.byte_touches
    }

    /// Raw view for inspection by tests and the harness; performs no checks.
    pub fn snapshot(&self, base: Address, length: u32) -> Option<&[u8]> {
        if !self.space.in_bounds(base, length) {
            return None;
        }
        Some(&self.space.bytes[base as usize..(base + length) as usize])
    }
}

/// Whether the union of regions granting `kind` covers `[base, base+length)`.
fn covered(regions: &[MemoryRegion], base: Address, length: u32, kind: AccessKind) -> bool {
    let end = base as u64 + length as u64;
    let mut cursor = base as u64;
    // Regions are few (bounded by the MPU size) so a repeated scan is fine.
    while cursor < end {
        let next = regions
            .iter()
            .filter(|r| r.length > 0 && r.permission.allows(kind) && r.contains(cursor))
            .map(MemoryRegion::end)
            .max();
        match next {
            Some(e) => cursor = e,
            None => return false,
        }
    }
    true
}
