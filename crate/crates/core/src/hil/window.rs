// Licensed under the Apache License, Version 2.0 or the MIT License.
// SPDX-License-Identifier: Apache-2.0 OR MIT
// Copyright kernsim Contributors 2026.

//! A resizable view over an owned byte buffer.
//!
//! Slicing narrows the active window relative to the current one; `reset`
//! always restores the full backing buffer. The type is deliberately not
//! `Clone`: handing a window to a split-phase operation gives it away until
//! the completion callback returns it.

use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Error)]
#[error("range [{start}, +{len}) exceeds window of length {window_len}")]
pub struct RangeError {
    pub start: usize,
    pub len: usize,
    pub window_len: usize,
}

#[derive(Debug, PartialEq, Eq)]
pub struct BufferWindow {
    backing: Box<[u8]>,
    start: usize,
    len: usize,
}

impl BufferWindow {
    pub fn new(capacity: usize) -> Self {
        Self::from_vec(vec![0; capacity])
    }

    pub fn from_vec(bytes: Vec<u8>) -> Self {
        let len = bytes.len();
        BufferWindow {
            backing: bytes.into_boxed_slice(),
            start: 0,
            len,
        }
    }

    pub fn capacity(&self) -> usize {
        self.backing.len()
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Offset of the window within the backing buffer.
    pub fn window_start(&self) -> usize {
        self.start
    }

    /// Narrows the window to `[start, start + len)` of the current window.
    pub fn slice(&mut self, start: usize, len: usize) -> Result<(), RangeError> {
        match start.checked_add(len) {
            Some(end) if end <= self.len => {
                self.start += start;
                self.len = len;
                Ok(())
            }
            _ => Err(RangeError {
                start,
                len,
                window_len: self.len,
            }),
        }
    }

    pub fn reset(&mut self) {
        self.start = 0;
        self.len = self.backing.len();
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.backing[self.start..self.start + self.len]
    }

    pub fn as_mut_slice(&mut self) -> &mut [u8] {
        &mut self.backing[self.start..self.start + self.len]
    }

    /// The entire backing buffer, regardless of the window.
    pub fn backing(&self) -> &[u8] {
        &self.backing
    }
}
