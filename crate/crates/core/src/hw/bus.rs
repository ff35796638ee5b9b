// Licensed under the Apache License, Version 2.0 or the MIT License.
// SPDX-License-Identifier: Apache-2.0 OR MIT
// Copyright kernsim Contributors 2026.

use std::cell::RefCell;
use std::rc::Rc;

use super::clock::SimClock;
use super::intc::InterruptController;
use super::periph::Peripheral;

/// Owns simulated time and steps every peripheral once per tick.
pub struct Bus {
    clock: Rc<SimClock>,
    intc: Rc<InterruptController>,
    peripherals: RefCell<Vec<Rc<dyn Peripheral>>>,
}

impl Bus {
    pub fn new(clock: Rc<SimClock>, intc: Rc<InterruptController>) -> Self {
        Bus {
            clock,
            intc,
            peripherals: RefCell::new(Vec::new()),
        }
    }

    pub fn clock(&self) -> &Rc<SimClock> {
        &self.clock
    }

    pub fn intc(&self) -> &Rc<InterruptController> {
        &self.intc
    }

    pub fn attach(&self, p: Rc<dyn Peripheral>) {
        let mut ps = self.peripherals.borrow_mut();
        ps.push(p);
        ps.sort_by_key(|p| p.irq());
    }

    /// Advances time by `n` ticks, one at a time. Returns the deliverable
    /// lines afterwards.
    pub fn tick(&self, n: u64) -> Vec<u32> {
        let ps: Vec<_> = self.peripherals.borrow().clone();
        for _ in 0..n {
            self.clock.advance();
            let now = self.clock.now();
            for p in &ps {
                p.tick(now);
            }
        }
        self.intc.deliverable()
    }

    /// No pending interrupt and no device with work outstanding.
    pub fn is_idle(&self) -> bool {
        !self.intc.any_pending() && self.peripherals.borrow().iter().all(|p| !p.is_active())
    }
}
