// Licensed under the Apache License, Version 2.0 or the MIT License.
// SPDX-License-Identifier: Apache-2.0 OR MIT
// Copyright kernsim Contributors 2026.

//! Bookkeeping for a resource that allows one outstanding operation.

use std::cell::{Cell, RefCell};

use crate::syscall::ErrorCode;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum OpState {
    Idle,
    Pending { op_id: u32, owner: String },
    Completing { op_id: u32 },
}

#[derive(Debug)]
pub struct SplitPhaseOp {
    state: RefCell<OpState>,
    next_id: Cell<u32>,
}

impl Default for SplitPhaseOp {
    fn default() -> Self {
        SplitPhaseOp {
            state: RefCell::new(OpState::Idle),
            next_id: Cell::new(1),
        }
    }
}

impl SplitPhaseOp {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn state(&self) -> OpState {
        self.state.borrow().clone()
    }

    pub fn is_idle(&self) -> bool {
        *self.state.borrow() == OpState::Idle
    }

    /// Claims the resource for `owner`.
    pub fn begin(&self, owner: &str) -> Result<u32, ErrorCode> {
        let mut s = self.state.borrow_mut();
        if *s != OpState::Idle {
            return Err(ErrorCode::Busy);
        }
        let op_id = self.next_id.get();
        self.next_id.set(op_id.wrapping_add(1));
        *s = OpState::Pending {
            op_id,
            owner: owner.into(),
        };
        Ok(op_id)
    }

    /// Moves a pending operation to completing; returns its id.
    pub fn complete(&self) -> Option<u32> {
        let mut s = self.state.borrow_mut();
        match *s {
            OpState::Pending { op_id, .. } => {
                *s = OpState::Completing { op_id };
                Some(op_id)
            }
            _ => None,
        }
    }

    /// Releases the resource after the completion callback.
    pub fn finish(&self) {
        *self.state.borrow_mut() = OpState::Idle;
    }
}
