// Licensed under the Apache License, Version 2.0 or the MIT License.
// SPDX-License-Identifier: Apache-2.0 OR MIT
// Copyright kernsim Contributors 2026.

use std::cell::Cell;

/// Monotone simulated time. Only the bus advances it.
#[derive(Debug, Default)]
pub struct SimClock {
    now: Cell<u64>,
}

impl SimClock {
    pub fn new() -> Self {
        SimClock::default()
    }

    pub fn now(&self) -> u64 {
        self.now.get()
    }

    pub(crate) fn advance(&self) {
        self.now.set(self.now.get() + 1);
    }
}
