// Licensed under the Apache License, Version 2.0 or the MIT License.
// SPDX-License-Identifier: Apache-2.0 OR MIT
// Copyright kernsim Contributors 2026.

use std::rc::Weak;

use super::window::BufferWindow;
use crate::syscall::ErrorCode;

pub trait TransmitClient {
    /// Hands back the window passed to `transmit` and the number of bytes sent.
    fn transmitted(&self, window: BufferWindow, count: usize, result: Result<(), ErrorCode>);
}

/// Split-phase byte transmission. The active window of `window` is sent.
pub trait Transmit {
    fn set_transmit_client(&self, client: Weak<dyn TransmitClient>);

    /// Starts a transfer. On error the window comes straight back: `BUSY`
    /// while a transfer is pending, `SIZE` for an empty window.
    fn transmit(&self, window: BufferWindow) -> Result<(), (ErrorCode, BufferWindow)>;

    fn is_busy(&self) -> bool;
}
