// Licensed under the Apache License, Version 2.0 or the MIT License.
// SPDX-License-Identifier: Apache-2.0 OR MIT
// Copyright kernsim Contributors 2026.

//! Board-construction checks that each driver layer's requirements are met
//! by the layer directly beneath it.
//!
//! Layers are listed top first. A requirement is satisfied when the layer
//! below provides the same value for the property, or when either side says
//! `configurable`. A layer that declares `min_buffer` needs the layer above
//! to declare a `buffer_size` at least that large.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

pub const CONFIGURABLE: &str = "configurable";

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Layer {
    pub name: String,
    #[serde(default)]
    pub provides: BTreeMap<String, String>,
    #[serde(default)]
    pub requires: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub buffer_size: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_buffer: Option<u32>,
}

impl Layer {
    pub fn new(name: &str) -> Self {
        Layer {
            name: name.into(),
            ..Layer::default()
        }
    }

    pub fn provides(mut self, prop: &str, value: &str) -> Self {
        self.provides.insert(prop.into(), value.into());
        self
    }

    pub fn requires(mut self, prop: &str, value: &str) -> Self {
        self.requires.insert(prop.into(), value.into());
        self
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum MismatchKind {
    /// The layer below provides a different, fixed value.
    Unsatisfied { required: String, provided: String },
    /// Nothing below provides the property.
    Missing { required: String },
    BufferTooSmall { declared: u32, minimum: u32 },
    MissingBufferDeclaration { minimum: u32 },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mismatch {
    pub upper: String,
    /// `None` when the upper layer is the bottom of the stack.
    pub lower: Option<String>,
    pub property: String,
    pub kind: MismatchKind,
}

impl fmt::Display for Mismatch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let lower = self.lower.as_deref().unwrap_or("<bottom of stack>");
        match &self.kind {
            MismatchKind::Unsatisfied { required, provided } => write!(
                f,
                "layer {} requires {}={} but layer {} provides {}",
                self.upper, self.property, required, lower, provided
            ),
            MismatchKind::Missing { required } => write!(
                f,
                "layer {} requires {}={} but layer {} does not provide it",
                self.upper, self.property, required, lower
            ),
            MismatchKind::BufferTooSmall { declared, minimum } => write!(
                f,
                "layer {} passes a {}-byte buffer but layer {} needs at least {}",
                self.upper, declared, lower, minimum
            ),
            MismatchKind::MissingBufferDeclaration { minimum } => write!(
                f,
                "layer {} declares no buffer size but layer {} needs at least {}",
                self.upper, lower, minimum
            ),
        }
    }
}

pub fn satisfies(required: &str, provided: &str) -> bool {
    required == provided || required == CONFIGURABLE || provided == CONFIGURABLE
}

/// Checks one upper/lower pair.
pub fn check_pair(upper: &Layer, lower: Option<&Layer>) -> Vec<Mismatch> {
    let mut out = Vec::new();
    let lower_name = lower.map(|l| l.name.clone());
    for (prop, required) in &upper.requires {
        let kind = match lower.and_then(|l| l.provides.get(prop)) {
            Some(provided) if satisfies(required, provided) => continue,
            Some(provided) => MismatchKind::Unsatisfied {
                required: required.clone(),
                provided: provided.clone(),
            },
            None => MismatchKind::Missing {
                required: required.clone(),
            },
        };
        out.push(Mismatch {
            upper: upper.name.clone(),
            lower: lower_name.clone(),
            property: prop.clone(),
            kind,
        });
    }
    if let Some(minimum) = lower.and_then(|l| l.min_buffer) {
        let kind = match upper.buffer_size {
            Some(declared) if declared >= minimum => None,
            Some(declared) => Some(MismatchKind::BufferTooSmall { declared, minimum }),
            None => Some(MismatchKind::MissingBufferDeclaration { minimum }),
        };
        if let Some(kind) = kind {
            out.push(Mismatch {
                upper: upper.name.clone(),
                lower: lower_name,
                property: "buffer_size".into(),
                kind,
            });
        }
    }
    out
}

/// Validates a whole stack, listed top first.
pub fn validate_composition(stack: &[Layer]) -> Result<(), Vec<Mismatch>> {
    let mismatches: Vec<Mismatch> = stack
        .iter()
        .enumerate()
        .flat_map(|(i, upper)| check_pair(upper, stack.get(i + 1)))
        .collect();
    if mismatches.is_empty() {
        Ok(())
    } else {
        Err(mismatches)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn configurable_controller_satisfies_sensor() {
        let stack = [
            Layer::new("sensor").requires("cs_polarity", "active_low"),
            Layer::new("spi").provides("cs_polarity", CONFIGURABLE),
        ];
        assert!(validate_composition(&stack).is_ok());
    }

    #[test]
    fn fixed_polarity_mismatch_names_both_layers() {
        let stack = [
            Layer::new("sensor").requires("cs_polarity", "active_low"),
            Layer::new("spi").provides("cs_polarity", "active_high"),
        ];
        let err = validate_composition(&stack).unwrap_err();
        assert_eq!(err.len(), 1);
        let msg = err[0].to_string();
        assert!(msg.contains("sensor") && msg.contains("spi"), "{msg}");
    }

    #[test]
    fn empty_stack_is_valid() {
        assert!(validate_composition(&[]).is_ok());
    }

    #[test]
    fn bottom_layer_requirements_are_missing() {
        let stack = [Layer::new("spi").requires("clock", "fast")];
        let err = validate_composition(&stack).unwrap_err();
        assert!(matches!(err[0].kind, MismatchKind::Missing { .. }));
        assert_eq!(err[0].lower, None);
    }

    #[test]
    fn buffer_sizes() {
        let mut upper = Layer::new("console");
        let mut lower = Layer::new("uart");
        lower.min_buffer = Some(64);
        upper.buffer_size = Some(32);
        let err = validate_composition(&[upper.clone(), lower.clone()]).unwrap_err();
        assert_eq!(
            err[0].kind,
            MismatchKind::BufferTooSmall {
                declared: 32,
                minimum: 64
            }
        );
        upper.buffer_size = None;
        let err = validate_composition(&[upper.clone(), lower.clone()]).unwrap_err();
        assert!(matches!(err[0].kind, MismatchKind::MissingBufferDeclaration { .. }));
        upper.buffer_size = Some(64);
        assert!(validate_composition(&[upper, lower]).is_ok());
    }
}
