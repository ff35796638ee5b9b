// Licensed under the Apache License, Version 2.0 or the MIT License.
// SPDX-License-Identifier: Apache-2.0 OR MIT
// Copyright kernsim Contributors 2026.

//! Capsules: semi-trusted kernel extensions.
//!
//! Capsules reach process memory only through the kernel's scoped buffer
//! and grant accessors, and hardware only through HIL traits.

pub mod alarm_driver;
pub mod console;
pub mod faulty;
pub mod process_control;
pub mod scratch;

use serde_json::json;

use crate::ids::{CapsuleId, ProcessId};
use crate::kernel::driver::BufferError;
use crate::kernel::Kernel;
use crate::syscall::ErrorCode;

pub use alarm_driver::AlarmDriver;
pub use console::Console;
pub use faulty::Faulty;
pub use process_control::{ProcessControl, ProcessInfo};
pub use scratch::Scratch;

pub(crate) fn buffer_error_code(e: BufferError) -> ErrorCode {
    match e {
        BufferError::OutOfRange => ErrorCode::Size,
        BufferError::ProcessDead => ErrorCode::Fail,
        BufferError::WriteToReadOnly => ErrorCode::Fail,
        BufferError::NoDriver => ErrorCode::NoDevice,
    }
}

/// Records a capsule-level error without disturbing the run.
pub(crate) fn report(kernel: &Kernel, capsule: CapsuleId, pid: ProcessId, e: BufferError) {
    kernel.trace().record(
        kernel.capsule_actor(capsule),
        "capsule_error",
        json!({ "pid": pid.0, "error": e.to_string() }),
    );
}
