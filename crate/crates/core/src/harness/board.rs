// Licensed under the Apache License, Version 2.0 or the MIT License.
// SPDX-License-Identifier: Apache-2.0 OR MIT
// Copyright kernsim Contributors 2026.

//! Board construction: peripherals, capsules, capabilities, loader.

use std::path::Path;
use std::rc::{Rc, Weak};

use serde_json::json;

use crate::capabilities::{CapabilityAuthority, CapabilityError, CapabilityKind, CapabilityToken};
use crate::capsules::{AlarmDriver, Console, Faulty, ProcessControl, ProcessInfo, Scratch};
use crate::hil::virtual_alarm::MuxAlarm;
use crate::hw::{
    AlarmPeripheral, Bus, Chip, HashPeripheral, HwAlarm, HwError, HwHash, HwUart, InterruptController, IrqLine,
    SimClock, UartPeripheral,
};
use crate::ids::ProcessId;
use crate::kernel::driver::SyscallDriver;
use crate::kernel::loader::{AsyncLoader, LoadError, SyncLoader};
use crate::kernel::Kernel;
use crate::trace::{Actor, Trace};

use super::config::{BoardConfig, CapsuleType, ConfigViolation, LoaderKind};
use super::script::ScriptLoader;

pub enum BoardLoader {
    Sync(SyncLoader),
    Async(Rc<AsyncLoader>),
}

/// What happened when an app was handed to the loader.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LoadOutcome {
    Loaded(ProcessId),
    Rejected(String),
    Submitted(u32),
}

pub struct Board {
    pub config: BoardConfig,
    pub clock: Rc<SimClock>,
    pub trace: Rc<Trace>,
    pub authority: Rc<CapabilityAuthority>,
    pub kernel: Rc<Kernel>,
    pub bus: Rc<Bus>,
    pub chip: Rc<Chip>,
    pub alarm: Option<Rc<AlarmPeripheral>>,
    pub uart: Option<Rc<UartPeripheral>>,
    pub hash: Option<Rc<HashPeripheral>>,
    pub mux: Option<Rc<MuxAlarm>>,
    pub loader: BoardLoader,
    drivers: Vec<Rc<dyn SyscallDriver>>,
    loader_token: CapabilityToken,
}

fn hw_violation(peripheral: &str, e: HwError) -> Vec<ConfigViolation> {
    vec![ConfigViolation::RegisterMap {
        peripheral: peripheral.into(),
        path: Default::default(),
        message: e.to_string(),
    }]
}

impl Board {
    /// Validates `config`, builds every component and finalizes the board.
    pub fn build(config: BoardConfig, base_dir: &Path) -> Result<Board, Vec<ConfigViolation>> {
        let maps = config.validate(base_dir)?;
        let clock = Rc::new(SimClock::new());
        let trace = Rc::new(Trace::new(clock.clone()));
        trace.record(
            Actor::Kernel,
            "board_building",
            json!({ "board": config.name, "ram_size": config.ram_size, "loader": config.loader }),
        );
        let authority = Rc::new(CapabilityAuthority::new(trace.clone()));
        let intc = Rc::new(InterruptController::new(trace.clone()));
        let chip = Rc::new(Chip::new(intc.clone()));
        let bus = Rc::new(Bus::new(clock.clone(), intc.clone()));
        let kernel = Kernel::new(config.kernel_config(), clock.clone(), trace.clone(), authority.clone());
        kernel.set_chip(chip.clone());

        let p = &config.peripherals;
        let (mut alarm, mut mux) = (None, None);
        if let (Some(c), Some(spec)) = (&p.alarm, maps.alarm) {
            let line = IrqLine::new(intc.clone(), c.irq, "alarm");
            let periph = Rc::new(
                AlarmPeripheral::new(spec, trace.clone(), line, config.clock_start)
                    .map_err(|e| hw_violation("alarm", e))?,
            );
            bus.attach(periph.clone());
            let hw = Rc::new(HwAlarm::new(periph.clone(), c.frequency));
            chip.attach(c.irq, hw.clone());
            let m = MuxAlarm::new(hw);
            m.install();
            alarm = Some(periph);
            mux = Some(m);
        }
        let (mut uart, mut hw_uart) = (None, None);
        if let (Some(c), Some(spec)) = (&p.uart, maps.uart) {
            let line = IrqLine::new(intc.clone(), c.irq, "uart");
            let periph = Rc::new(
                UartPeripheral::new(spec, trace.clone(), line, c.ticks_per_byte)
                    .map_err(|e| hw_violation("uart", e))?,
            );
            bus.attach(periph.clone());
            let hw = Rc::new(HwUart::new(periph.clone()));
            chip.attach(c.irq, hw.clone());
            uart = Some(periph);
            hw_uart = Some(hw);
        }
        let (mut hash, mut hw_hash) = (None, None);
        if let (Some(c), Some(spec)) = (&p.hash, maps.hash) {
            let line = IrqLine::new(intc.clone(), c.irq, "hash");
            let periph = Rc::new(
                HashPeripheral::new(spec, trace.clone(), line, c.bytes_per_tick)
                    .map_err(|e| hw_violation("hash", e))?,
            );
            bus.attach(periph.clone());
            let hw = Rc::new(HwHash::new(periph.clone()));
            chip.attach(c.irq, hw.clone());
            hash = Some(periph);
            hw_hash = Some(hw);
        }

        let mut drivers: Vec<Rc<dyn SyscallDriver>> = Vec::new();
        for c in &config.capsules {
            let id = kernel.add_capsule(&c.name);
            let mut tokens = Vec::new();
            for kind in config.capabilities.get(&c.name).into_iter().flatten() {
                let kind = CapabilityKind::from_name(kind).expect("validated");
                tokens.push(authority.mint(kind, &c.name).expect("board is building"));
            }
            let driver: Rc<dyn SyscallDriver> = match c.kind {
                CapsuleType::Alarm => {
                    let client = mux.as_ref().expect("validated").new_client();
                    AlarmDriver::new(kernel.clone(), id, client)
                }
                CapsuleType::Console => Console::new(
                    kernel.clone(),
                    id,
                    hw_uart.clone().expect("validated"),
                    c.buffer_size
                        .map_or(crate::capsules::console::DEFAULT_BUFFER_SIZE, |b| b as usize),
                ),
                CapsuleType::ProcessControl => ProcessControl::new(kernel.clone(), tokens),
                CapsuleType::ProcessInfo => ProcessInfo::new(kernel.clone()),
                CapsuleType::Scratch => Scratch::new(kernel.clone(), id),
                CapsuleType::Faulty => Faulty::new(kernel.clone(), id),
            };
            let weak: Weak<dyn SyscallDriver> = Rc::downgrade(&driver);
            kernel
                .register_driver(id, c.driver, weak)
                .expect("driver numbers validated unique");
            drivers.push(driver);
        }

        let loader_token = authority
            .mint(CapabilityKind::LoaderControl, "kernel")
            .expect("board is building");
        let code_loader = Rc::new(ScriptLoader);
        let loader = match config.loader {
            LoaderKind::Sync => BoardLoader::Sync(SyncLoader::new(config.verifier.clone(), code_loader)),
            LoaderKind::Async => {
                let l = AsyncLoader::new(
                    hw_hash.expect("validated"),
                    config.verifier.clone(),
                    code_loader,
                    authority.clone(),
                    trace.clone(),
                );
                kernel.set_loader(l.clone());
                BoardLoader::Async(l)
            }
        };
        authority.finalize().expect("finalized once");

        Ok(Board {
            config,
            clock,
            trace,
            authority,
            kernel,
            bus,
            chip,
            alarm,
            uart,
            hash,
            mux,
            loader,
            drivers,
            loader_token,
        })
    }

    /// Reads, parses and builds a board file. Map paths are relative to it.
    pub fn from_file(path: &Path) -> Result<Board, Vec<ConfigViolation>> {
        let text = std::fs::read_to_string(path).map_err(|e| vec![ConfigViolation::Parse(e.to_string())])?;
        let config = BoardConfig::parse(&text).map_err(|e| vec![e])?;
        Board::build(config, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn driver_count(&self) -> usize {
        self.drivers.len()
    }

    /// Hands a binary to the configured loader.
    pub fn load(&self, name: &str, bytes: Vec<u8>) -> Result<LoadOutcome, CapabilityError> {
        match &self.loader {
            BoardLoader::Sync(l) => match l.load(&self.kernel, &self.loader_token, name, &bytes) {
                Ok(pid) => Ok(LoadOutcome::Loaded(pid)),
                Err(LoadError::Rejected(r)) => Ok(LoadOutcome::Rejected(format!("{r:?}"))),
                Err(LoadError::Capability(e)) => Err(e),
            },
            BoardLoader::Async(l) => l.submit(&self.loader_token, name, bytes).map(LoadOutcome::Submitted),
        }
    }

    /// Mints after construction always fail; exposed for tests.
    pub fn try_mint(&self, kind: CapabilityKind, holder: &str) -> Result<CapabilityToken, CapabilityError> {
        self.authority.mint(kind, holder)
    }
}
