// Licensed under the Apache License, Version 2.0 or the MIT License.
// SPDX-License-Identifier: Apache-2.0 OR MIT
// Copyright kernsim Contributors 2026.

//! Free-running 32-bit counter with one compare register.
//!
//! COUNT tracks `clock_start + now` and wraps. The line is raised on the tick
//! where COUNT equals COMPARE while CTRL.ENABLE and CTRL.IRQEN are set. A
//! write that leaves an enabled compare value already passed raises the line
//! at once, so a deadline in the past is never lost.

use std::cell::Cell;
use std::rc::Rc;

use super::periph::{HwError, IrqLine, MmioBlock, Peripheral};
use super::regmap::RegisterMapSpec;
use crate::hil::time::passed;
use crate::trace::Trace;

pub struct AlarmPeripheral {
    block: MmioBlock,
    irq: IrqLine,
    clock_start: u32,
    now: Cell<u64>,
}

impl AlarmPeripheral {
    pub fn new(
        spec: RegisterMapSpec,
        trace: Rc<Trace>,
        irq: IrqLine,
        clock_start: u32,
    ) -> Result<Self, HwError> {
        let block = MmioBlock::new(spec, trace);
        block.require(&[
            ("COUNT", &[]),
            ("COMPARE", &[]),
            ("CTRL", &["ENABLE", "IRQEN"]),
        ])?;
        block.hw_set("COUNT", clock_start);
        Ok(AlarmPeripheral {
            block,
            irq,
            clock_start,
            now: Cell::new(0),
        })
    }

    pub fn count(&self) -> u32 {
        self.block.hw_get("COUNT")
    }

    fn enabled(&self) -> bool {
        self.block.hw_field("CTRL", "ENABLE") == 1 && self.block.hw_field("CTRL", "IRQEN") == 1
    }
}

impl Peripheral for AlarmPeripheral {
    fn block(&self) -> &MmioBlock {
        &self.block
    }

    fn irq(&self) -> u32 {
        self.irq.id()
    }

    fn on_write(&self, register: &str) {
        if matches!(register, "COMPARE" | "CTRL")
            && self.enabled()
            && passed(self.count(), self.block.hw_get("COMPARE"))
        {
            self.irq.raise();
        }
    }

    fn tick(&self, now: u64) {
        self.now.set(now);
        let count = self.clock_start.wrapping_add(now as u32);
        self.block.hw_set("COUNT", count);
        if self.enabled() && count == self.block.hw_get("COMPARE") {
            self.irq.raise();
        }
    }

    fn is_active(&self) -> bool {
        self.enabled()
    }
}
