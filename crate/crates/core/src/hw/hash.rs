// Licensed under the Apache License, Version 2.0 or the MIT License.
// SPDX-License-Identifier: Apache-2.0 OR MIT
// Copyright kernsim Contributors 2026.

//! Digest accelerator.
//!
//! The driver loads the DMA source, writes LEN, then sets CTRL.START. The job
//! takes `max(1, ceil(LEN / bytes_per_tick))` ticks, after which the digest
//! sits in DIGEST_HI:DIGEST_LO, STATUS.DONE is set and the line is raised if
//! CTRL.IRQEN. START clears itself.

use std::cell::{Cell, RefCell};
use std::rc::Rc;

use super::periph::{HwError, IrqLine, MmioBlock, Peripheral};
use super::regmap::RegisterMapSpec;
use crate::trace::Trace;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// 64-bit FNV-1a.
pub fn fnv1a64(data: &[u8]) -> u64 {
    data.iter()
        .fold(FNV_OFFSET, |h, &b| (h ^ b as u64).wrapping_mul(FNV_PRIME))
}

/// Ticks a job of `len` bytes occupies the engine.
pub fn hash_job_ticks(len: usize, bytes_per_tick: u32) -> u64 {
    let per = bytes_per_tick.max(1) as u64;
    (len as u64).div_ceil(per).max(1)
}

pub struct HashPeripheral {
    block: MmioBlock,
    irq: IrqLine,
    bytes_per_tick: u32,
    dma: RefCell<Vec<u8>>,
    remaining: Cell<u64>,
}

impl HashPeripheral {
    pub fn new(
        spec: RegisterMapSpec,
        trace: Rc<Trace>,
        irq: IrqLine,
        bytes_per_tick: u32,
    ) -> Result<Self, HwError> {
        let block = MmioBlock::new(spec, trace);
        block.require(&[
            ("CTRL", &["START", "IRQEN", "ALG"]),
            ("LEN", &[]),
            ("STATUS", &["BUSY", "DONE"]),
            ("DIGEST_LO", &[]),
            ("DIGEST_HI", &[]),
        ])?;
        Ok(HashPeripheral {
            block,
            irq,
            bytes_per_tick: bytes_per_tick.max(1),
            dma: RefCell::new(Vec::new()),
            remaining: Cell::new(0),
        })
    }

    pub fn load_dma(&self, bytes: &[u8]) {
        *self.dma.borrow_mut() = bytes.to_vec();
    }

    pub fn bytes_per_tick(&self) -> u32 {
        self.bytes_per_tick
    }

    fn busy(&self) -> bool {
        self.block.hw_field("STATUS", "BUSY") == 1
    }
}

impl Peripheral for HashPeripheral {
    fn block(&self) -> &MmioBlock {
        &self.block
    }

    fn irq(&self) -> u32 {
        self.irq.id()
    }

    fn on_write(&self, register: &str) {
        if register != "CTRL" || self.block.hw_field("CTRL", "START") != 1 {
            return;
        }
        self.block.hw_set_field("CTRL", "START", 0);
        if self.busy() {
            return;
        }
        let len = (self.block.hw_get("LEN") as usize).min(self.dma.borrow().len());
        self.remaining
            .set(hash_job_ticks(len, self.bytes_per_tick));
        self.block.hw_set_field("STATUS", "DONE", 0);
        self.block.hw_set_field("STATUS", "BUSY", 1);
    }

    fn tick(&self, _now: u64) {
        if !self.busy() {
            return;
        }
        let left = self.remaining.get().saturating_sub(1);
        self.remaining.set(left);
        if left > 0 {
            return;
        }
        let len = (self.block.hw_get("LEN") as usize).min(self.dma.borrow().len());
        let digest = fnv1a64(&self.dma.borrow()[..len]);
        self.block.hw_set("DIGEST_LO", digest as u32);
        self.block.hw_set("DIGEST_HI", (digest >> 32) as u32);
        self.block.hw_set_field("STATUS", "BUSY", 0);
        self.block.hw_set_field("STATUS", "DONE", 1);
        if self.block.hw_field("CTRL", "IRQEN") == 1 {
            self.irq.raise();
        }
    }

    fn is_active(&self) -> bool {
        self.busy()
    }
}
