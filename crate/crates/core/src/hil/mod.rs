// Licensed under the Apache License, Version 2.0 or the MIT License.
// SPDX-License-Identifier: Apache-2.0 OR MIT
// Copyright kernsim Contributors 2026.

//! Hardware interface layer: chip-agnostic split-phase driver interfaces
//! plus the generic capsule-side building blocks that sit on top of them.

pub mod composition;
pub mod digest;
pub mod split_phase;
pub mod time;
pub mod uart;
pub mod virtual_alarm;
pub mod window;

pub use window::{BufferWindow, RangeError};
