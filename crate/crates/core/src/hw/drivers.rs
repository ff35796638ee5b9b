// Licensed under the Apache License, Version 2.0 or the MIT License.
// SPDX-License-Identifier: Apache-2.0 OR MIT
// Copyright kernsim Contributors 2026.

//! Chip drivers: HIL implementations that talk to the peripheral models
//! through their register maps. Completions are only ever delivered from
//! `handle_interrupt`, never from inside the call that started the work.

use std::cell::{Cell, RefCell};
use std::rc::{Rc, Weak};

use super::alarm::AlarmPeripheral;
use super::hash::HashPeripheral;
use super::intc::InterruptService;
use super::periph::Peripheral;
use super::uart::UartPeripheral;
use crate::hil::digest::{DigestClient, DigestEngine};
use crate::hil::split_phase::SplitPhaseOp;
use crate::hil::time::{Alarm, AlarmClient, Ticks};
use crate::hil::uart::{Transmit, TransmitClient};
use crate::hil::window::BufferWindow;
use crate::syscall::ErrorCode;

pub struct HwAlarm {
    periph: Rc<AlarmPeripheral>,
    frequency: u32,
    client: RefCell<Option<Weak<dyn AlarmClient>>>,
}

impl HwAlarm {
    pub fn new(periph: Rc<AlarmPeripheral>, frequency: u32) -> Self {
        HwAlarm {
            periph,
            frequency,
            client: RefCell::new(None),
        }
    }
}

impl Alarm for HwAlarm {
    fn now(&self) -> Ticks {
        self.periph.read_reg("COUNT").unwrap_or_else(|_| self.periph.count())
    }

    fn frequency(&self) -> u32 {
        self.frequency
    }

    fn set_alarm(&self, deadline: Ticks) {
        let _ = self.periph.write_reg("COMPARE", deadline);
        if !self.is_armed() {
            let _ = self.periph.field_set("CTRL", "IRQEN", 1);
            let _ = self.periph.field_set("CTRL", "ENABLE", 1);
        }
    }

    fn get_alarm(&self) -> Ticks {
        self.periph.read_reg("COMPARE").unwrap_or(0)
    }

    fn disarm(&self) {
        let _ = self.periph.field_set("CTRL", "ENABLE", 0);
    }

    fn is_armed(&self) -> bool {
        self.periph.field_get("CTRL", "ENABLE").unwrap_or(0) == 1
            && self.periph.field_get("CTRL", "IRQEN").unwrap_or(0) == 1
    }

    fn set_alarm_client(&self, client: Weak<dyn AlarmClient>) {
        *self.client.borrow_mut() = Some(client);
    }
}

impl InterruptService for HwAlarm {
    fn handle_interrupt(&self) {
        let client = self.client.borrow().as_ref().and_then(Weak::upgrade);
        if let Some(c) = client {
            c.alarm_fired();
        }
    }
}

pub struct HwUart {
    periph: Rc<UartPeripheral>,
    op: SplitPhaseOp,
    window: RefCell<Option<BufferWindow>>,
    client: RefCell<Option<Weak<dyn TransmitClient>>>,
}

impl HwUart {
    pub fn new(periph: Rc<UartPeripheral>) -> Self {
        HwUart {
            periph,
            op: SplitPhaseOp::new(),
            window: RefCell::new(None),
            client: RefCell::new(None),
        }
    }

    fn start(&self, len: u32) -> Result<(), ErrorCode> {
        let p = &self.periph;
        p.write_reg("TXLEN", len).map_err(|_| ErrorCode::Fail)?;
        p.field_set("CTRL", "IRQEN", 1).map_err(|_| ErrorCode::Fail)?;
        p.field_set("CTRL", "EN", 1).map_err(|_| ErrorCode::Fail)?;
        p.write_reg("TXSTART", 1).map_err(|_| ErrorCode::Fail)
    }
}

impl Transmit for HwUart {
    fn set_transmit_client(&self, client: Weak<dyn TransmitClient>) {
        *self.client.borrow_mut() = Some(client);
    }

    fn transmit(&self, window: BufferWindow) -> Result<(), (ErrorCode, BufferWindow)> {
        if window.is_empty() {
            return Err((ErrorCode::Size, window));
        }
        if let Err(e) = self.op.begin("uart") {
            return Err((e, window));
        }
        self.periph.load_dma(window.as_slice());
        if let Err(e) = self.start(window.len() as u32) {
            self.op.finish();
            return Err((e, window));
        }
        *self.window.borrow_mut() = Some(window);
        Ok(())
    }

    fn is_busy(&self) -> bool {
        !self.op.is_idle()
    }
}

impl InterruptService for HwUart {
    fn handle_interrupt(&self) {
        if self.op.complete().is_none() {
            return;
        }
        let count = self.periph.read_reg("TXCOUNT").unwrap_or(0) as usize;
        let window = self.window.borrow_mut().take();
        self.op.finish();
        let client = self.client.borrow().as_ref().and_then(Weak::upgrade);
        if let (Some(c), Some(w)) = (client, window) {
            c.transmitted(w, count, Ok(()));
        }
    }
}

pub struct HwHash {
    periph: Rc<HashPeripheral>,
    op: SplitPhaseOp,
    window: RefCell<Option<BufferWindow>>,
    client: RefCell<Option<Weak<dyn DigestClient>>>,
    jobs: Cell<u64>,
}

impl HwHash {
    pub fn new(periph: Rc<HashPeripheral>) -> Self {
        HwHash {
            periph,
            op: SplitPhaseOp::new(),
            window: RefCell::new(None),
            client: RefCell::new(None),
            jobs: Cell::new(0),
        }
    }

    /// Jobs started since construction.
    pub fn jobs_started(&self) -> u64 {
        self.jobs.get()
    }

    fn start(&self, len: u32) -> Result<(), ErrorCode> {
        let p = &self.periph;
        p.write_reg("LEN", len).map_err(|_| ErrorCode::Fail)?;
        p.field_set_enum("CTRL", "ALG", "fnv1a64")
            .map_err(|_| ErrorCode::NoSupport)?;
        p.field_set("CTRL", "IRQEN", 1).map_err(|_| ErrorCode::Fail)?;
        p.field_set("CTRL", "START", 1).map_err(|_| ErrorCode::Fail)
    }
}

impl DigestEngine for HwHash {
    fn set_digest_client(&self, client: Weak<dyn DigestClient>) {
        *self.client.borrow_mut() = Some(client);
    }

    fn compute(&self, window: BufferWindow) -> Result<(), (ErrorCode, BufferWindow)> {
        if let Err(e) = self.op.begin("hash") {
            return Err((e, window));
        }
        self.periph.load_dma(window.as_slice());
        if let Err(e) = self.start(window.len() as u32) {
            self.op.finish();
            return Err((e, window));
        }
        self.jobs.set(self.jobs.get() + 1);
        *self.window.borrow_mut() = Some(window);
        Ok(())
    }

    fn is_busy(&self) -> bool {
        !self.op.is_idle()
    }
}

impl InterruptService for HwHash {
    fn handle_interrupt(&self) {
        if self.op.complete().is_none() {
            return;
        }
        let lo = self.periph.read_reg("DIGEST_LO");
        let hi = self.periph.read_reg("DIGEST_HI");
        let result = match (lo, hi) {
            (Ok(lo), Ok(hi)) => Ok(((hi as u64) << 32) | lo as u64),
            _ => Err(ErrorCode::Fail),
        };
        let window = self.window.borrow_mut().take();
        self.op.finish();
        let client = self.client.borrow().as_ref().and_then(Weak::upgrade);
        if let (Some(c), Some(w)) = (client, window) {
            c.digest_done(w, result);
        }
    }
}
