// Licensed under the Apache License, Version 2.0 or the MIT License.
// SPDX-License-Identifier: Apache-2.0 OR MIT
// Copyright kernsim Contributors 2026.

//! The common peripheral surface: a traced register block plus behaviour
//! hooks invoked on bus writes and on every clock tick.

use std::cell::RefCell;
use std::rc::Rc;

use serde_json::json;
use thiserror::Error;

use super::intc::InterruptController;
use super::mmio::{MmioError, RegisterFile};
use super::regmap::RegisterMapSpec;
use crate::trace::{Actor, Trace};

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum HwError {
    #[error("{periph}: map lacks required register {register}")]
    MissingRegister { periph: String, register: String },
    #[error("{periph}: map lacks required field {register}.{field}")]
    MissingField {
        periph: String,
        register: String,
        field: String,
    },
}

/// Register storage shared between the bus and a peripheral model. Every
/// bus-side write and every rejected access is traced.
pub struct MmioBlock {
    regs: RefCell<RegisterFile>,
    trace: Rc<Trace>,
    actor: Actor,
}

impl MmioBlock {
    pub fn new(spec: RegisterMapSpec, trace: Rc<Trace>) -> Self {
        let actor = Actor::Hw(spec.name.clone());
        MmioBlock {
            regs: RefCell::new(RegisterFile::new(spec)),
            trace,
            actor,
        }
    }

    pub fn name(&self) -> String {
        self.regs.borrow().name().to_string()
    }

    /// Checks that the map declares every register and field a model needs.
    pub fn require(&self, registers: &[(&str, &[&str])]) -> Result<(), HwError> {
        let regs = self.regs.borrow();
        let spec = regs.spec();
        for (reg, fields) in registers {
            let r = spec.register(reg).ok_or_else(|| HwError::MissingRegister {
                periph: spec.name.clone(),
                register: reg.to_string(),
            })?;
            for f in *fields {
                if r.field(f).is_none() {
                    return Err(HwError::MissingField {
                        periph: spec.name.clone(),
                        register: reg.to_string(),
                        field: f.to_string(),
                    });
                }
            }
        }
        Ok(())
    }

    fn reject(&self, e: MmioError) -> MmioError {
        self.trace
            .record(self.actor.clone(), "mmio_error", json!({ "error": e.to_string() }));
        e
    }

    fn traced_write(&self, register: &str, value: u32) {
        self.trace.record(
            self.actor.clone(),
            "mmio_write",
            json!({ "reg": register, "value": value }),
        );
    }

    pub fn read(&self, offset: u32) -> Result<u32, MmioError> {
        let r = self.regs.borrow().read(offset).map(|(_, v)| v);
        r.map_err(|e| self.reject(e))
    }

    /// Returns the name of the register written.
    pub fn write(&self, offset: u32, value: u32) -> Result<String, MmioError> {
        let r = self
            .regs
            .borrow_mut()
            .write(offset, value)
            .map(str::to_string);
        let name = r.map_err(|e| self.reject(e))?;
        let stored = self.regs.borrow().hw_get(&name);
        self.traced_write(&name, stored);
        Ok(name)
    }

    pub fn read_named(&self, register: &str) -> Result<u32, MmioError> {
        let r = self.regs.borrow().read_named(register);
        r.map_err(|e| self.reject(e))
    }

    pub fn write_named(&self, register: &str, value: u32) -> Result<(), MmioError> {
        let r = self.regs.borrow_mut().write_named(register, value);
        r.map_err(|e| self.reject(e))?;
        let stored = self.regs.borrow().hw_get(register);
        self.traced_write(register, stored);
        Ok(())
    }

    pub fn field_get(&self, register: &str, field: &str) -> Result<u32, MmioError> {
        let r = self.regs.borrow().field_get(register, field);
        r.map_err(|e| self.reject(e))
    }

    pub fn field_set(&self, register: &str, field: &str, value: u32) -> Result<(), MmioError> {
        let r = self.regs.borrow_mut().field_set(register, field, value);
        r.map_err(|e| self.reject(e))?;
        let stored = self.regs.borrow().hw_get(register);
        self.traced_write(register, stored);
        Ok(())
    }

    pub fn field_set_enum(&self, register: &str, field: &str, name: &str) -> Result<(), MmioError> {
        let r = self.regs.borrow_mut().field_set_enum(register, field, name);
        r.map_err(|e| self.reject(e))?;
        let stored = self.regs.borrow().hw_get(register);
        self.traced_write(register, stored);
        Ok(())
    }

    pub fn hw_get(&self, register: &str) -> u32 {
        self.regs.borrow().hw_get(register)
    }

    pub fn hw_set(&self, register: &str, value: u32) {
        self.regs.borrow_mut().hw_set(register, value)
    }

    pub fn hw_field(&self, register: &str, field: &str) -> u32 {
        self.regs.borrow().hw_field(register, field)
    }

    pub fn hw_set_field(&self, register: &str, field: &str, value: u32) {
        self.regs.borrow_mut().hw_set_field(register, field, value)
    }
}

/// An interrupt line as seen by the peripheral that drives it.
#[derive(Clone)]
pub struct IrqLine {
    intc: Rc<InterruptController>,
    irq: u32,
}

impl IrqLine {
    pub fn new(intc: Rc<InterruptController>, irq: u32, source: &str) -> Self {
        intc.register(irq, source);
        IrqLine { intc, irq }
    }

    pub fn id(&self) -> u32 {
        self.irq
    }

    pub fn raise(&self) {
        self.intc.raise(self.irq)
    }
}

/// A memory-mapped device model.
pub trait Peripheral {
    fn block(&self) -> &MmioBlock;

    fn irq(&self) -> u32;

    /// Behaviour triggered by a bus write to `register`.
    fn on_write(&self, register: &str);

    /// Advances the model by one tick; `now` is the already-advanced clock.
    fn tick(&self, now: u64);

    /// Whether the device has an operation or timer outstanding.
    fn is_active(&self) -> bool;

    fn name(&self) -> String {
        self.block().name()
    }

    fn mmio_read(&self, offset: u32) -> Result<u32, MmioError> {
        self.block().read(offset)
    }

    fn mmio_write(&self, offset: u32, value: u32) -> Result<(), MmioError> {
        let reg = self.block().write(offset, value)?;
        self.on_write(&reg);
        Ok(())
    }

    fn read_reg(&self, register: &str) -> Result<u32, MmioError> {
        self.block().read_named(register)
    }

    fn write_reg(&self, register: &str, value: u32) -> Result<(), MmioError> {
        self.block().write_named(register, value)?;
        self.on_write(register);
        Ok(())
    }

    fn field_get(&self, register: &str, field: &str) -> Result<u32, MmioError> {
        self.block().field_get(register, field)
    }

    fn field_set(&self, register: &str, field: &str, value: u32) -> Result<(), MmioError> {
        self.block().field_set(register, field, value)?;
        self.on_write(register);
        Ok(())
    }

    fn field_set_enum(&self, register: &str, field: &str, name: &str) -> Result<(), MmioError> {
        self.block().field_set_enum(register, field, name)?;
        self.on_write(register);
        Ok(())
    }
}
