// Licensed under the Apache License, Version 2.0 or the MIT License.
// SPDX-License-Identifier: Apache-2.0 OR MIT
// Copyright kernsim Contributors 2026.

//! Interrupt lines and the chip-level dispatch table.

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::rc::Rc;

use serde_json::json;

use crate::trace::{Actor, Trace};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InterruptLine {
    pub irq_id: u32,
    pub source: String,
    pub pending: bool,
    pub enabled: bool,
}

/// Pending/enabled state of every line. Delivery order is ascending irq id.
#[derive(Debug)]
pub struct InterruptController {
    lines: RefCell<BTreeMap<u32, InterruptLine>>,
    trace: Rc<Trace>,
}

impl InterruptController {
    pub fn new(trace: Rc<Trace>) -> Self {
        InterruptController {
            lines: RefCell::new(BTreeMap::new()),
            trace,
        }
    }

    /// Declares a line, enabled, with no interrupt pending.
    pub fn register(&self, irq_id: u32, source: &str) {
        self.lines.borrow_mut().insert(
            irq_id,
            InterruptLine {
                irq_id,
                source: source.into(),
                pending: false,
                enabled: true,
            },
        );
    }

    pub fn set_enabled(&self, irq_id: u32, enabled: bool) {
        if let Some(l) = self.lines.borrow_mut().get_mut(&irq_id) {
            l.enabled = enabled;
        }
    }

    pub fn raise(&self, irq_id: u32) {
        let source = {
            let mut lines = self.lines.borrow_mut();
            let Some(line) = lines.get_mut(&irq_id) else {
                return;
            };
            if line.pending {
                return;
            }
            line.pending = true;
            line.source.clone()
        };
        self.trace
            .record(Actor::Hw(source), "irq_raise", json!({ "irq": irq_id }));
    }

    /// Lines that are deliverable right now, in priority order.
    pub fn deliverable(&self) -> Vec<u32> {
        self.lines
            .borrow()
            .values()
            .filter(|l| l.pending && l.enabled)
            .map(|l| l.irq_id)
            .collect()
    }

    /// Clears a pending line. Returns whether it was deliverable.
    pub fn take(&self, irq_id: u32) -> bool {
        let mut lines = self.lines.borrow_mut();
        match lines.get_mut(&irq_id) {
            Some(l) if l.pending && l.enabled => {
                l.pending = false;
                true
            }
            _ => false,
        }
    }

    pub fn any_pending(&self) -> bool {
        self.lines.borrow().values().any(|l| l.pending && l.enabled)
    }

    pub fn line(&self, irq_id: u32) -> Option<InterruptLine> {
        self.lines.borrow().get(&irq_id).cloned()
    }
}

/// Implemented by chip drivers that own an interrupt line.
pub trait InterruptService {
    fn handle_interrupt(&self);
}

/// Maps interrupt lines to their chip drivers.
pub struct Chip {
    intc: Rc<InterruptController>,
    handlers: RefCell<BTreeMap<u32, Rc<dyn InterruptService>>>,
}

impl Chip {
    pub fn new(intc: Rc<InterruptController>) -> Self {
        Chip {
            intc,
            handlers: RefCell::new(BTreeMap::new()),
        }
    }

    pub fn intc(&self) -> &Rc<InterruptController> {
        &self.intc
    }

    pub fn attach(&self, irq_id: u32, handler: Rc<dyn InterruptService>) {
        self.handlers.borrow_mut().insert(irq_id, handler);
    }

    /// Clears `irq_id` and runs its handler. Returns false if it was not
    /// deliverable or has no handler.
    pub fn dispatch(&self, irq_id: u32) -> bool {
        if !self.intc.take(irq_id) {
            return false;
        }
        let handler = self.handlers.borrow().get(&irq_id).cloned();
        match handler {
            Some(h) => {
                h.handle_interrupt();
                true
            }
            None => false,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hw::SimClock;
    use std::cell::Cell;

    struct Counter(Cell<u32>);
    impl InterruptService for Counter {
        fn handle_interrupt(&self) {
            self.0.set(self.0.get() + 1);
        }
    }

    #[test]
    fn delivery_requires_pending_and_enabled() {
        let trace = Rc::new(Trace::new(Rc::new(SimClock::new())));
        let intc = Rc::new(InterruptController::new(trace));
        intc.register(3, "b");
        intc.register(1, "a");
        let chip = Chip::new(intc.clone());
        let c = Rc::new(Counter(Cell::new(0)));
        chip.attach(1, c.clone());
        chip.attach(3, c.clone());

        intc.set_enabled(3, false);
        intc.raise(3);
        intc.raise(1);
        assert_eq!(intc.deliverable(), vec![1]);
        assert!(chip.dispatch(1));
        assert!(!chip.dispatch(1));
        assert!(!chip.dispatch(3));
        intc.set_enabled(3, true);
        assert!(chip.dispatch(3));
        assert_eq!(c.0.get(), 2);
        assert!(!intc.any_pending());
    }
}
