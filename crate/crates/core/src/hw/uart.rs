// Licensed under the Apache License, Version 2.0 or the MIT License.
// SPDX-License-Identifier: Apache-2.0 OR MIT
// Copyright kernsim Contributors 2026.

//! Transmit-only UART with a DMA channel.
//!
//! The driver loads the DMA source, writes TXLEN, then writes 1 to TXSTART.
//! One byte leaves every `ticks_per_byte` ticks; STATUS.DONE is set and the
//! line raised (if CTRL.IRQEN) once TXCOUNT reaches TXLEN.

use std::cell::{Cell, RefCell};
use std::rc::Rc;

use serde_json::json;

use super::periph::{HwError, IrqLine, MmioBlock, Peripheral};
use super::regmap::RegisterMapSpec;
use crate::trace::{Actor, Trace};

pub struct UartPeripheral {
    block: MmioBlock,
    irq: IrqLine,
    trace: Rc<Trace>,
    ticks_per_byte: u32,
    dma: RefCell<Vec<u8>>,
    active: RefCell<Vec<u8>>,
    phase: Cell<u32>,
    output: RefCell<Vec<u8>>,
}

impl UartPeripheral {
    pub fn new(
        spec: RegisterMapSpec,
        trace: Rc<Trace>,
        irq: IrqLine,
        ticks_per_byte: u32,
    ) -> Result<Self, HwError> {
        let block = MmioBlock::new(spec, trace.clone());
        block.require(&[
            ("CTRL", &["EN", "IRQEN"]),
            ("TXLEN", &[]),
            ("TXCOUNT", &[]),
            ("STATUS", &["BUSY", "DONE"]),
            ("TXSTART", &[]),
        ])?;
        Ok(UartPeripheral {
            block,
            irq,
            trace,
            ticks_per_byte: ticks_per_byte.max(1),
            dma: RefCell::new(Vec::new()),
            active: RefCell::new(Vec::new()),
            phase: Cell::new(0),
            output: RefCell::new(Vec::new()),
        })
    }

    /// Stages the bytes the next transfer will read.
    pub fn load_dma(&self, bytes: &[u8]) {
        *self.dma.borrow_mut() = bytes.to_vec();
    }

    /// Everything transmitted so far.
    pub fn output(&self) -> Vec<u8> {
        self.output.borrow().clone()
    }

    pub fn ticks_per_byte(&self) -> u32 {
        self.ticks_per_byte
    }

    fn busy(&self) -> bool {
        self.block.hw_field("STATUS", "BUSY") == 1
    }

    fn finish(&self) {
        self.block.hw_set_field("STATUS", "BUSY", 0);
        self.block.hw_set_field("STATUS", "DONE", 1);
        let sent = std::mem::take(&mut *self.active.borrow_mut());
        self.trace.record(
            Actor::Hw(self.block.name()),
            "uart_tx",
            json!({ "count": sent.len(), "text": String::from_utf8_lossy(&sent) }),
        );
        if self.block.hw_field("CTRL", "IRQEN") == 1 {
            self.irq.raise();
        }
    }
}

impl Peripheral for UartPeripheral {
    fn block(&self) -> &MmioBlock {
        &self.block
    }

    fn irq(&self) -> u32 {
        self.irq.id()
    }

    fn on_write(&self, register: &str) {
        if register != "TXSTART" || self.block.hw_get("TXSTART") != 1 {
            return;
        }
        self.block.hw_set("TXSTART", 0);
        if self.busy() || self.block.hw_field("CTRL", "EN") == 0 {
            return;
        }
        let len = self.block.hw_get("TXLEN") as usize;
        let dma = self.dma.borrow();
        *self.active.borrow_mut() = Vec::with_capacity(len.min(dma.len()));
        drop(dma);
        self.block.hw_set("TXCOUNT", 0);
        self.block.hw_set_field("STATUS", "DONE", 0);
        self.block.hw_set_field("STATUS", "BUSY", 1);
        self.phase.set(0);
        if len == 0 {
            self.finish();
        }
    }

    fn tick(&self, _now: u64) {
        if !self.busy() {
            return;
        }
        let phase = self.phase.get() + 1;
        if phase < self.ticks_per_byte {
            self.phase.set(phase);
            return;
        }
        self.phase.set(0);
        let sent = self.block.hw_get("TXCOUNT") as usize;
        let len = (self.block.hw_get("TXLEN") as usize).min(self.dma.borrow().len());
        if sent < len {
            let byte = self.dma.borrow()[sent];
            self.output.borrow_mut().push(byte);
            self.active.borrow_mut().push(byte);
            self.block.hw_set("TXCOUNT", sent as u32 + 1);
        }
        if sent + 1 >= len {
            self.finish();
        }
    }

    fn is_active(&self) -> bool {
        self.busy()
    }
}
