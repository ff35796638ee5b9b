// Licensed under the Apache License, Version 2.0 or the MIT License.
// SPDX-License-Identifier: Apache-2.0 OR MIT
// Copyright kernsim Contributors 2026.

//! Board configuration files and their validation.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::capabilities::CapabilityKind;
use crate::hil::composition::{validate_composition, Layer, Mismatch};
use crate::hw::{load_register_map, RegisterMapSpec};
use crate::kernel::binary::VerifierPolicy;
use crate::kernel::{
    KernelConfig, DEFAULT_CAPSULE_STEP_BUDGET, DEFAULT_QUANTUM_STATEMENTS, DEFAULT_UPCALL_QUEUE_DEPTH,
};
use crate::memory::DEFAULT_MPU_MAX_REGIONS;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LoaderKind {
    #[default]
    Sync,
    Async,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CapsuleType {
    Alarm,
    Console,
    ProcessControl,
    ProcessInfo,
    Scratch,
    Faulty,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlarmConfig {
    pub map: PathBuf,
    pub irq: u32,
    #[serde(default = "default_frequency")]
    pub frequency: u32,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UartConfig {
    pub map: PathBuf,
    pub irq: u32,
    #[serde(default = "one")]
    pub ticks_per_byte: u32,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HashConfig {
    pub map: PathBuf,
    pub irq: u32,
    #[serde(default = "default_bytes_per_tick")]
    pub bytes_per_tick: u32,
}

fn default_frequency() -> u32 {
    32_768
}

fn one() -> u32 {
    1
}

fn default_bytes_per_tick() -> u32 {
    64
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PeripheralsConfig {
    #[serde(default)]
    pub alarm: Option<AlarmConfig>,
    #[serde(default)]
    pub uart: Option<UartConfig>,
    #[serde(default)]
    pub hash: Option<HashConfig>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CapsuleConfig {
    pub name: String,
    #[serde(rename = "type")]
    pub kind: CapsuleType,
    pub driver: u32,
    #[serde(default)]
    pub buffer_size: Option<u32>,
}

/// A composition layer; `buffer_from` takes the declared buffer size from
/// a capsule entry.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StackLayer {
    #[serde(flatten)]
    pub layer: Layer,
    #[serde(default)]
    pub buffer_from: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StackConfig {
    pub name: String,
    /// Top layer first.
    pub layers: Vec<StackLayer>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SigningConfig {
    #[serde(default)]
    pub key_id: u16,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoardConfig {
    #[serde(default = "default_board_name")]
    pub name: String,
    #[serde(default = "default_ram")]
    pub ram_size: u32,
    #[serde(default = "default_regions")]
    pub mpu_max_regions: usize,
    #[serde(default = "default_queue_depth")]
    pub upcall_queue_depth: usize,
    #[serde(default = "default_budget")]
    pub capsule_step_budget: u64,
    #[serde(default = "default_quantum")]
    pub quantum_statements: u32,
    #[serde(default)]
    pub clock_start: u32,
    #[serde(default)]
    pub peripherals: PeripheralsConfig,
    #[serde(default)]
    pub capsules: Vec<CapsuleConfig>,
    #[serde(default)]
    pub stacks: Vec<StackConfig>,
    #[serde(default)]
    pub capabilities: BTreeMap<String, Vec<String>>,
    #[serde(default)]
    pub loader: LoaderKind,
    #[serde(default)]
    pub verifier: VerifierPolicy,
    #[serde(default)]
    pub signing: SigningConfig,
}

fn default_board_name() -> String {
    "board".into()
}

fn default_ram() -> u32 {
    64 * 1024
}

fn default_regions() -> usize {
    DEFAULT_MPU_MAX_REGIONS
}

fn default_queue_depth() -> usize {
    DEFAULT_UPCALL_QUEUE_DEPTH
}

fn default_budget() -> u64 {
    DEFAULT_CAPSULE_STEP_BUDGET
}

fn default_quantum() -> u32 {
    DEFAULT_QUANTUM_STATEMENTS
}

/// One problem found while checking a board.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ConfigViolation {
    Parse(String),
    RegisterMap { peripheral: String, path: PathBuf, message: String },
    Composition { stack: String, mismatch: Box<Mismatch> },
    UnknownBufferSource { stack: String, layer: String, capsule: String },
    DuplicateCapsule(String),
    DuplicateDriver { driver: u32, first: String, second: String },
    MissingPeripheral { capsule: String, peripheral: &'static str },
    UnknownCapabilityHolder(String),
    UnknownCapability { holder: String, kind: String },
    BadValue { field: &'static str, message: String },
}

impl fmt::Display for ConfigViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigViolation::Parse(m) => write!(f, "board does not parse: {m}"),
            ConfigViolation::RegisterMap { peripheral, path, message } => {
                write!(f, "peripheral {peripheral}: register map {}: {message}", path.display())
            }
            ConfigViolation::Composition { stack, mismatch } => write!(f, "stack {stack}: {mismatch}"),
            ConfigViolation::UnknownBufferSource { stack, layer, capsule } => {
                write!(f, "stack {stack}: layer {layer} takes its buffer from unknown capsule {capsule}")
            }
            ConfigViolation::DuplicateCapsule(n) => write!(f, "capsule {n} declared twice"),
            ConfigViolation::DuplicateDriver { driver, first, second } => {
                write!(f, "driver number {driver} used by both {first} and {second}")
            }
            ConfigViolation::MissingPeripheral { capsule, peripheral } => {
                write!(f, "capsule {capsule} needs the {peripheral} peripheral")
            }
            ConfigViolation::UnknownCapabilityHolder(h) => {
                write!(f, "capabilities granted to unknown capsule {h}")
            }
            ConfigViolation::UnknownCapability { holder, kind } => {
                write!(f, "capsule {holder} is granted unknown capability {kind}")
            }
            ConfigViolation::BadValue { field, message } => write!(f, "{field}: {message}"),
        }
    }
}

/// Register maps resolved and validated alongside the board.
#[derive(Clone, Debug, Default)]
pub struct ResolvedMaps {
    pub alarm: Option<RegisterMapSpec>,
    pub uart: Option<RegisterMapSpec>,
    pub hash: Option<RegisterMapSpec>,
}

impl BoardConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigViolation> {
        serde_json::from_str(text).map_err(|e| ConfigViolation::Parse(e.to_string()))
    }

    pub fn kernel_config(&self) -> KernelConfig {
        KernelConfig {
            ram_size: self.ram_size,
            mpu_max_regions: self.mpu_max_regions,
            upcall_queue_depth: self.upcall_queue_depth,
            capsule_step_budget: self.capsule_step_budget,
            quantum_statements: self.quantum_statements,
        }
    }

    /// Composition stacks with buffer declarations filled in from capsules.
    pub fn resolved_stacks(&self) -> (Vec<(String, Vec<Layer>)>, Vec<ConfigViolation>) {
        let mut errors = Vec::new();
        let stacks = self
            .stacks
            .iter()
            .map(|s| {
                let layers = s
                    .layers
                    .iter()
                    .map(|l| {
                        let mut layer = l.layer.clone();
                        if let Some(src) = &l.buffer_from {
                            match self.capsules.iter().find(|c| &c.name == src) {
                                Some(c) => layer.buffer_size = c.buffer_size.or(layer.buffer_size),
                                None => errors.push(ConfigViolation::UnknownBufferSource {
                                    stack: s.name.clone(),
                                    layer: layer.name.clone(),
                                    capsule: src.clone(),
                                }),
                            }
                        }
                        layer
                    })
                    .collect();
                (s.name.clone(), layers)
            })
            .collect();
        (stacks, errors)
    }

    /// Every check that can run without building the board. Map paths are
    /// resolved against `base_dir`.
    pub fn validate(&self, base_dir: &Path) -> Result<ResolvedMaps, Vec<ConfigViolation>> {
        let mut errors = Vec::new();
        if self.ram_size == 0 {
            errors.push(ConfigViolation::BadValue {
                field: "ram_size",
                message: "must be positive".into(),
            });
        }
        if self.upcall_queue_depth == 0 {
            errors.push(ConfigViolation::BadValue {
                field: "upcall_queue_depth",
                message: "must be positive".into(),
            });
        }
        if self.quantum_statements == 0 {
            errors.push(ConfigViolation::BadValue {
                field: "quantum_statements",
                message: "must be positive".into(),
            });
        }

        let mut maps = ResolvedMaps::default();
        let p = &self.peripherals;
        let mut irqs = BTreeMap::new();
        let entries = [
            ("alarm", p.alarm.as_ref().map(|a| (&a.map, a.irq)), &mut maps.alarm),
            ("uart", p.uart.as_ref().map(|u| (&u.map, u.irq)), &mut maps.uart),
            ("hash", p.hash.as_ref().map(|h| (&h.map, h.irq)), &mut maps.hash),
        ];
        for (name, entry, slot) in entries {
            let Some((path, irq)) = entry else {
                continue;
            };
            if let Some(other) = irqs.insert(irq, name) {
                errors.push(ConfigViolation::BadValue {
                    field: "peripherals",
                    message: format!("irq {irq} used by both {other} and {name}"),
                });
            }
            let full = base_dir.join(path);
            let loaded = std::fs::read_to_string(&full)
                .map_err(|e| e.to_string())
                .and_then(|text| load_register_map(&text).map_err(|e| e.to_string()));
            match loaded {
                Ok(spec) => *slot = Some(spec),
                Err(message) => errors.push(ConfigViolation::RegisterMap {
                    peripheral: name.into(),
                    path: path.clone(),
                    message,
                }),
            }
        }

        let mut names = BTreeSet::new();
        let mut drivers: BTreeMap<u32, &str> = BTreeMap::new();
        for c in &self.capsules {
            if !names.insert(c.name.as_str()) {
                errors.push(ConfigViolation::DuplicateCapsule(c.name.clone()));
            }
            if let Some(first) = drivers.insert(c.driver, &c.name) {
                errors.push(ConfigViolation::DuplicateDriver {
                    driver: c.driver,
                    first: first.into(),
                    second: c.name.clone(),
                });
            }
            let needs = match c.kind {
                CapsuleType::Alarm => p.alarm.is_none().then_some("alarm"),
                CapsuleType::Console => p.uart.is_none().then_some("uart"),
                _ => None,
            };
            if let Some(peripheral) = needs {
                errors.push(ConfigViolation::MissingPeripheral {
                    capsule: c.name.clone(),
                    peripheral,
                });
            }
            if c.kind == CapsuleType::Console && c.buffer_size == Some(0) {
                errors.push(ConfigViolation::BadValue {
                    field: "buffer_size",
                    message: format!("capsule {} needs a non-empty buffer", c.name),
                });
            }
        }
        if self.loader == LoaderKind::Async && p.hash.is_none() {
            errors.push(ConfigViolation::MissingPeripheral {
                capsule: "loader".into(),
                peripheral: "hash",
            });
        }

        for (holder, kinds) in &self.capabilities {
            if !names.contains(holder.as_str()) {
                errors.push(ConfigViolation::UnknownCapabilityHolder(holder.clone()));
            }
            for k in kinds {
                if CapabilityKind::from_name(k).is_none() {
                    errors.push(ConfigViolation::UnknownCapability {
                        holder: holder.clone(),
                        kind: k.clone(),
                    });
                }
            }
        }

        let (stacks, stack_errors) = self.resolved_stacks();
        errors.extend(stack_errors);
        for (name, layers) in stacks {
            if let Err(ms) = validate_composition(&layers) {
                errors.extend(ms.into_iter().map(|mismatch| ConfigViolation::Composition {
                    stack: name.clone(),
                    mismatch: Box::new(mismatch),
                }));
            }
        }

        if errors.is_empty() {
            Ok(maps)
        } else {
            Err(errors)
        }
    }
}
