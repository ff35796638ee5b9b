// Licensed under the Apache License, Version 2.0 or the MIT License.
// SPDX-License-Identifier: Apache-2.0 OR MIT
// Copyright kernsim Contributors 2026.

//! The simulated chip: clock, register maps, peripheral models, interrupt
//! controller and the drivers that expose them through the HIL.

pub mod alarm;
pub mod bus;
pub mod clock;
pub mod drivers;
pub mod hash;
pub mod intc;
pub mod mmio;
pub mod periph;
pub mod regmap;
pub mod uart;

pub use alarm::AlarmPeripheral;
pub use bus::Bus;
pub use clock::SimClock;
pub use drivers::{HwAlarm, HwHash, HwUart};
pub use hash::{fnv1a64, HashPeripheral};
pub use intc::{Chip, InterruptController, InterruptLine, InterruptService};
pub use mmio::{MmioError, MmioOp, RegisterFile};
pub use periph::{HwError, IrqLine, MmioBlock, Peripheral};
pub use regmap::{
    load_register_map, FieldSpec, RegisterAccess, RegisterMapSpec, RegisterSpec, SpecError,
    SpecViolation,
};
pub use uart::UartPeripheral;
