// Licensed under the Apache License, Version 2.0 or the MIT License.
// SPDX-License-Identifier: Apache-2.0 OR MIT
// Copyright kernsim Contributors 2026.

use std::rc::Weak;

use super::window::BufferWindow;
use crate::syscall::ErrorCode;

pub trait DigestClient {
    fn digest_done(&self, window: BufferWindow, result: Result<u64, ErrorCode>);
}

/// Split-phase 64-bit digest over the active window.
pub trait DigestEngine {
    fn set_digest_client(&self, client: Weak<dyn DigestClient>);

    /// Starts a job; `BUSY` if one is pending.
    fn compute(&self, window: BufferWindow) -> Result<(), (ErrorCode, BufferWindow)>;

    fn is_busy(&self) -> bool;
}
