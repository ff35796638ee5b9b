// Licensed under the Apache License, Version 2.0 or the MIT License.
// SPDX-License-Identifier: Apache-2.0 OR MIT
// Copyright kernsim Contributors 2026.

//! Declarative peripheral register maps.
//!
//! A map is authored as JSON laid out like a datasheet table:
//!
//! ```json
//! {"name": "alarm", "registers": [
//!   {"name": "COUNT",   "offset": 0, "width": 32, "access": "R"},
//!   {"name": "COMPARE", "offset": 4, "width": 32, "access": "RW"},
//!   {"name": "CTRL",    "offset": 8, "width": 32, "access": "RW",
//!    "fields": [{"name": "ENABLE", "offset": 0, "width": 1},
//!               {"name": "IRQEN",  "offset": 1, "width": 1}]}]}
//! ```
//!
//! Loading validates the whole map and reports every violation at once.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RegisterAccess {
    R,
    W,
    RW,
}

impl RegisterAccess {
    pub fn readable(self) -> bool {
        matches!(self, RegisterAccess::R | RegisterAccess::RW)
    }

    pub fn writable(self) -> bool {
        matches!(self, RegisterAccess::W | RegisterAccess::RW)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldSpec {
    pub name: String,
    #[serde(rename = "offset")]
    pub bit_offset: u32,
    #[serde(rename = "width")]
    pub bit_width: u32,
    #[serde(rename = "enum", default, skip_serializing_if = "Option::is_none")]
    pub enum_values: Option<BTreeMap<String, u32>>,
}

impl FieldSpec {
    pub fn mask(&self) -> u32 {
        width_mask(self.bit_width) << self.bit_offset
    }

    pub fn max_value(&self) -> u32 {
        width_mask(self.bit_width)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegisterSpec {
    pub name: String,
    pub offset: u32,
    pub width: u32,
    pub access: RegisterAccess,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub fields: Vec<FieldSpec>,
}

impl RegisterSpec {
    pub fn byte_len(&self) -> u32 {
        self.width / 8
    }

    pub fn field(&self, name: &str) -> Option<&FieldSpec> {
        self.fields.iter().find(|f| f.name == name)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegisterMapSpec {
    pub name: String,
    pub registers: Vec<RegisterSpec>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SpecViolation {
    Parse(String),
    BadWidth { register: String, width: u32 },
    Misaligned { register: String, offset: u32, width: u32 },
    Overlap { first: String, second: String },
    DuplicateRegister(String),
    DuplicateField { register: String, field: String },
    EmptyField { register: String, field: String },
    FieldOverflow { register: String, field: String },
    FieldOverlap { register: String, first: String, second: String },
    EnumOverflow { register: String, field: String, name: String, value: u32 },
}

impl fmt::Display for SpecViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpecViolation::Parse(e) => write!(f, "parse error: {e}"),
            SpecViolation::BadWidth { register, width } => {
                write!(f, "{register}: width {width} is not 8, 16 or 32")
            }
            SpecViolation::Misaligned {
                register,
                offset,
                width,
            } => write!(f, "{register}: offset {offset:#x} not aligned to {width} bits"),
            SpecViolation::Overlap { first, second } => {
                write!(f, "registers {first} and {second} overlap")
            }
            SpecViolation::DuplicateRegister(r) => write!(f, "register {r} declared twice"),
            SpecViolation::DuplicateField { register, field } => {
                write!(f, "{register}.{field} declared twice")
            }
            SpecViolation::EmptyField { register, field } => {
                write!(f, "{register}.{field} has zero width")
            }
            SpecViolation::FieldOverflow { register, field } => {
                write!(f, "{register}.{field} extends past the register width")
            }
            SpecViolation::FieldOverlap {
                register,
                first,
                second,
            } => write!(f, "{register}: fields {first} and {second} overlap"),
            SpecViolation::EnumOverflow {
                register,
                field,
                name,
                value,
            } => write!(f, "{register}.{field}: enum {name}={value} does not fit"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("invalid register map: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
pub struct SpecError(pub Vec<SpecViolation>);

pub(crate) fn width_mask(width: u32) -> u32 {
    if width >= 32 {
        u32::MAX
    } else {
        (1u32 << width) - 1
    }
}

pub fn load_register_map(text: &str) -> Result<RegisterMapSpec, SpecError> {
    let spec: RegisterMapSpec = serde_json::from_str(text)
        .map_err(|e| SpecError(vec![SpecViolation::Parse(e.to_string())]))?;
    spec.validated()
}

impl RegisterMapSpec {
    pub fn validated(self) -> Result<Self, SpecError> {
        let violations = self.validate();
        if violations.is_empty() {
            Ok(self)
        } else {
            Err(SpecError(violations))
        }
    }

    pub fn validate(&self) -> Vec<SpecViolation> {
        let mut out = Vec::new();
        let mut names = BTreeSet::new();
        for r in &self.registers {
            if !names.insert(r.name.as_str()) {
                out.push(SpecViolation::DuplicateRegister(r.name.clone()));
            }
            if !matches!(r.width, 8 | 16 | 32) {
                out.push(SpecViolation::BadWidth {
                    register: r.name.clone(),
                    width: r.width,
                });
                continue;
            }
            if r.offset % r.byte_len() != 0 {
                out.push(SpecViolation::Misaligned {
                    register: r.name.clone(),
                    offset: r.offset,
                    width: r.width,
                });
            }
            validate_fields(r, &mut out);
        }

        let mut by_offset: Vec<&RegisterSpec> = self
            .registers
            .iter()
            .filter(|r| matches!(r.width, 8 | 16 | 32))
            .collect();
        by_offset.sort_by_key(|r| (r.offset, r.name.as_str()));
        // A register can overlap any later one that starts before its end, not
        // only its immediate neighbour.
        for (i, a) in by_offset.iter().enumerate() {
            let a_end = a.offset as u64 + a.byte_len() as u64;
            for b in &by_offset[i + 1..] {
                if (b.offset as u64) >= a_end {
                    break;
                }
                out.push(SpecViolation::Overlap {
                    first: a.name.clone(),
                    second: b.name.clone(),
                });
            }
        }
        out
    }

    pub fn register(&self, name: &str) -> Option<&RegisterSpec> {
        self.registers.iter().find(|r| r.name == name)
    }

    pub fn register_index(&self, name: &str) -> Option<usize> {
        self.registers.iter().position(|r| r.name == name)
    }

    pub fn index_at(&self, offset: u32) -> Option<usize> {
        self.registers.iter().position(|r| r.offset == offset)
    }
}

fn validate_fields(r: &RegisterSpec, out: &mut Vec<SpecViolation>) {
    let mut names = BTreeSet::new();
    for f in &r.fields {
        if !names.insert(f.name.as_str()) {
            out.push(SpecViolation::DuplicateField {
                register: r.name.clone(),
                field: f.name.clone(),
            });
        }
        if f.bit_width == 0 {
            out.push(SpecViolation::EmptyField {
                register: r.name.clone(),
                field: f.name.clone(),
            });
        }
        if f.bit_offset as u64 + f.bit_width as u64 > r.width as u64 {
            out.push(SpecViolation::FieldOverflow {
                register: r.name.clone(),
                field: f.name.clone(),
            });
        }
        if let Some(values) = &f.enum_values {
            for (name, value) in values {
                if f.bit_width < 32 && *value > width_mask(f.bit_width) {
                    out.push(SpecViolation::EnumOverflow {
                        register: r.name.clone(),
                        field: f.name.clone(),
                        name: name.clone(),
                        value: *value,
                    });
                }
            }
        }
    }
    for (i, a) in r.fields.iter().enumerate() {
        for b in &r.fields[i + 1..] {
            let a_end = a.bit_offset as u64 + a.bit_width as u64;
            let b_end = b.bit_offset as u64 + b.bit_width as u64;
            if (a.bit_offset as u64) < b_end && (b.bit_offset as u64) < a_end {
                out.push(SpecViolation::FieldOverlap {
                    register: r.name.clone(),
                    first: a.name.clone(),
                    second: b.name.clone(),
                });
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const ALARM: &str = r#"{"name": "alarm", "registers": [
        {"name": "COUNT", "offset": 0, "width": 32, "access": "R"},
        {"name": "COMPARE", "offset": 4, "width": 32, "access": "RW"},
        {"name": "CTRL", "offset": 8, "width": 32, "access": "RW",
         "fields": [{"name": "ENABLE", "offset": 0, "width": 1},
                    {"name": "IRQEN", "offset": 1, "width": 1}]}]}"#;

    /// Byte-occupancy oracle: a map has no overlap iff no byte is claimed twice.
    fn brute_force_overlaps(spec: &RegisterMapSpec) -> bool {
        let mut claimed = BTreeMap::new();
        for r in &spec.registers {
            for b in r.offset..r.offset + r.width / 8 {
                if claimed.insert(b, &r.name).is_some() {
                    return true;
                }
            }
        }
        false
    }

    #[test]
    fn alarm_map_is_valid() {
        let spec = load_register_map(ALARM).unwrap();
        assert!(!brute_force_overlaps(&spec));
        assert_eq!(spec.register("CTRL").unwrap().fields.len(), 2);
    }

    #[test]
    fn overlapping_registers_rejected() {
        let text = r#"{"name": "x", "registers": [
            {"name": "A", "offset": 0, "width": 32, "access": "R"},
            {"name": "B", "offset": 0, "width": 32, "access": "R"}]}"#;
        let err = load_register_map(text).unwrap_err();
        assert!(err
            .0
            .iter()
            .any(|v| matches!(v, SpecViolation::Overlap { .. })));
    }

    #[test]
    fn non_adjacent_overlap_detected() {
        // A (32-bit) spans B and C, which do not overlap each other.
        let spec = RegisterMapSpec {
            name: "x".into(),
            registers: vec![
                RegisterSpec {
                    name: "A".into(),
                    offset: 0,
                    width: 32,
                    access: RegisterAccess::RW,
                    fields: vec![],
                },
                RegisterSpec {
                    name: "B".into(),
                    offset: 1,
                    width: 8,
                    access: RegisterAccess::RW,
                    fields: vec![],
                },
                RegisterSpec {
                    name: "C".into(),
                    offset: 2,
                    width: 8,
                    access: RegisterAccess::RW,
                    fields: vec![],
                },
            ],
        };
        let overlaps = spec
            .validate()
            .into_iter()
            .filter(|v| matches!(v, SpecViolation::Overlap { .. }))
            .count();
        assert_eq!(overlaps, 2);
        assert!(brute_force_overlaps(&spec));
    }

    #[test]
    fn field_overflow_rejected() {
        let text = r#"{"name": "x", "registers": [
            {"name": "CTRL", "offset": 0, "width": 32, "access": "RW",
             "fields": [{"name": "ENABLE", "offset": 31, "width": 2}]}]}"#;
        let err = load_register_map(text).unwrap_err();
        assert_eq!(
            err.0,
            vec![SpecViolation::FieldOverflow {
                register: "CTRL".into(),
                field: "ENABLE".into()
            }]
        );
    }

    #[test]
    fn reports_every_violation() {
        let text = r#"{"name": "x", "registers": [
            {"name": "A", "offset": 2, "width": 32, "access": "R"},
            {"name": "B", "offset": 8, "width": 12, "access": "R"},
            {"name": "C", "offset": 16, "width": 8, "access": "RW",
             "fields": [{"name": "F", "offset": 0, "width": 4},
                        {"name": "G", "offset": 2, "width": 4, "enum": {"big": 99}}]}]}"#;
        let err = load_register_map(text).unwrap_err();
        assert!(err.0.iter().any(|v| matches!(v, SpecViolation::Misaligned { .. })));
        assert!(err.0.iter().any(|v| matches!(v, SpecViolation::BadWidth { .. })));
        assert!(err.0.iter().any(|v| matches!(v, SpecViolation::FieldOverlap { .. })));
        assert!(err.0.iter().any(|v| matches!(v, SpecViolation::EnumOverflow { .. })));
    }

    #[test]
    fn malformed_json_is_a_spec_error() {
        assert!(matches!(
            load_register_map("{").unwrap_err().0[0],
            SpecViolation::Parse(_)
        ));
    }
}
