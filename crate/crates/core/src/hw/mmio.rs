// Licensed under the Apache License, Version 2.0 or the MIT License.
// SPDX-License-Identifier: Apache-2.0 OR MIT
// Copyright kernsim Contributors 2026.

//! Register storage backed by a validated [`RegisterMapSpec`].
//!
//! Bus-side accesses (`read`/`write` by offset, `field_get`/`field_set` by
//! name) enforce the declared access kind. Peripheral models update their own
//! status registers through the `hw_*` methods, which bypass that check the
//! way hardware does.

use thiserror::Error;

use super::regmap::{width_mask, FieldSpec, RegisterMapSpec, RegisterSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MmioOp {
    Read,
    Write,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum MmioError {
    #[error("{periph}: no register at offset {offset:#x}")]
    UnknownOffset { periph: String, offset: u32 },
    #[error("{periph}: no register named {register}")]
    UnknownRegister { periph: String, register: String },
    #[error("{periph}: {register} has no field {field}")]
    UnknownField {
        periph: String,
        register: String,
        field: String,
    },
    #[error("{periph}: {register} does not permit {op:?}")]
    IllegalAccessKind {
        periph: String,
        register: String,
        op: MmioOp,
    },
    #[error("{periph}: value {value} does not fit {register}.{field}")]
    ValueOutOfRange {
        periph: String,
        register: String,
        field: String,
        value: u32,
    },
    #[error("{periph}: {register}.{field} has no enumerator {name}")]
    UnknownEnumName {
        periph: String,
        register: String,
        field: String,
        name: String,
    },
}

/// Current values of every register in one peripheral.
#[derive(Clone, Debug)]
pub struct RegisterFile {
    spec: RegisterMapSpec,
    values: Vec<u32>,
}

impl RegisterFile {
    pub fn new(spec: RegisterMapSpec) -> Self {
        let values = vec![0; spec.registers.len()];
        RegisterFile { spec, values }
    }

    pub fn spec(&self) -> &RegisterMapSpec {
        &self.spec
    }

    pub fn name(&self) -> &str {
        &self.spec.name
    }

    fn reg_by_offset(&self, offset: u32) -> Result<usize, MmioError> {
        self.spec
            .index_at(offset)
            .ok_or_else(|| MmioError::UnknownOffset {
                periph: self.spec.name.clone(),
                offset,
            })
    }

    fn reg_by_name(&self, register: &str) -> Result<usize, MmioError> {
        self.spec
            .register_index(register)
            .ok_or_else(|| MmioError::UnknownRegister {
                periph: self.spec.name.clone(),
                register: register.into(),
            })
    }

    fn field(&self, idx: usize, field: &str) -> Result<&FieldSpec, MmioError> {
        let reg = &self.spec.registers[idx];
        reg.field(field).ok_or_else(|| MmioError::UnknownField {
            periph: self.spec.name.clone(),
            register: reg.name.clone(),
            field: field.into(),
        })
    }

    fn require(&self, reg: &RegisterSpec, op: MmioOp) -> Result<(), MmioError> {
        let ok = match op {
            MmioOp::Read => reg.access.readable(),
            MmioOp::Write => reg.access.writable(),
        };
        if ok {
            Ok(())
        } else {
            Err(MmioError::IllegalAccessKind {
                periph: self.spec.name.clone(),
                register: reg.name.clone(),
                op,
            })
        }
    }

    /// Bus read. Returns the register name alongside the value.
    pub fn read(&self, offset: u32) -> Result<(&str, u32), MmioError> {
        let idx = self.reg_by_offset(offset)?;
        let reg = &self.spec.registers[idx];
        self.require(reg, MmioOp::Read)?;
        Ok((&reg.name, self.values[idx]))
    }

    /// Bus write. Bits beyond the register width are discarded.
    pub fn write(&mut self, offset: u32, value: u32) -> Result<&str, MmioError> {
        let idx = self.reg_by_offset(offset)?;
        let reg = &self.spec.registers[idx];
        self.require(reg, MmioOp::Write)?;
        self.values[idx] = value & width_mask(reg.width);
        Ok(&self.spec.registers[idx].name)
    }

    pub fn read_named(&self, register: &str) -> Result<u32, MmioError> {
        let offset = self.spec.registers[self.reg_by_name(register)?].offset;
        self.read(offset).map(|(_, v)| v)
    }

    pub fn write_named(&mut self, register: &str, value: u32) -> Result<(), MmioError> {
        let offset = self.spec.registers[self.reg_by_name(register)?].offset;
        self.write(offset, value).map(|_| ())
    }

    pub fn field_get(&self, register: &str, field: &str) -> Result<u32, MmioError> {
        let idx = self.reg_by_name(register)?;
        self.require(&self.spec.registers[idx], MmioOp::Read)?;
        let f = self.field(idx, field)?;
        Ok((self.values[idx] >> f.bit_offset) & f.max_value())
    }

    /// Read-modify-write of only the field's bits. A write-only register is
    /// modified against its last written value.
    pub fn field_set(&mut self, register: &str, field: &str, value: u32) -> Result<(), MmioError> {
        let idx = self.reg_by_name(register)?;
        self.require(&self.spec.registers[idx], MmioOp::Write)?;
        let f = self.field(idx, field)?;
        if value > f.max_value() {
            return Err(MmioError::ValueOutOfRange {
                periph: self.spec.name.clone(),
                register: register.into(),
                field: field.into(),
                value,
            });
        }
        let mask = f.mask();
        let shifted = value << f.bit_offset;
        self.values[idx] = (self.values[idx] & !mask) | (shifted & mask);
        Ok(())
    }

    pub fn field_set_enum(
        &mut self,
        register: &str,
        field: &str,
        name: &str,
    ) -> Result<(), MmioError> {
        let idx = self.reg_by_name(register)?;
        let f = self.field(idx, field)?;
        let value = f
            .enum_values
            .as_ref()
            .and_then(|m| m.get(name))
            .copied()
            .ok_or_else(|| MmioError::UnknownEnumName {
                periph: self.spec.name.clone(),
                register: register.into(),
                field: field.into(),
                name: name.into(),
            })?;
        self.field_set(register, field, value)
    }

    /// Hardware-side register read, ignoring the access matrix.
    pub fn hw_get(&self, register: &str) -> u32 {
        self.spec
            .register_index(register)
            .map(|i| self.values[i])
            .unwrap_or(0)
    }

    /// Hardware-side register update, ignoring the access matrix.
    pub fn hw_set(&mut self, register: &str, value: u32) {
        if let Some(i) = self.spec.register_index(register) {
            self.values[i] = value & width_mask(self.spec.registers[i].width);
        }
    }

    pub fn hw_field(&self, register: &str, field: &str) -> u32 {
        let Some(i) = self.spec.register_index(register) else {
            return 0;
        };
        match self.spec.registers[i].field(field) {
            Some(f) => (self.values[i] >> f.bit_offset) & f.max_value(),
            None => 0,
        }
    }

    pub fn hw_set_field(&mut self, register: &str, field: &str, value: u32) {
        let Some(i) = self.spec.register_index(register) else {
            return;
        };
        if let Some(f) = self.spec.registers[i].field(field) {
            let mask = f.mask();
            self.values[i] = (self.values[i] & !mask) | ((value << f.bit_offset) & mask);
        }
    }
}
