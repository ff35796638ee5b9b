// Licensed under the Apache License, Version 2.0 or the MIT License.
// SPDX-License-Identifier: Apache-2.0 OR MIT
// Copyright kernsim Contributors 2026.

//! Privilege tokens minted only while a board is being built.
//!
//! A [`CapabilityToken`] has private fields and is neither `Clone` nor
//! constructible outside this crate, so code that was never handed one
//! cannot call an API that demands it:
//!
//! ```compile_fail
//! use kernsim_core::capabilities::{CapabilityKind, CapabilityToken};
//! let forged = CapabilityToken { kind: CapabilityKind::ProcessManagement, board: todo!(), receipt: 0 };
//! ```
//!
//! Tokens are bound to the board that minted them; presenting one to
//! another board is rejected at run time.

use std::cell::{Cell, RefCell};
use std::fmt;
use std::rc::Rc;
use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::trace::{Actor, Trace};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CapabilityKind {
    ProcessManagement,
    GrantInspection,
    LoaderControl,
}

impl CapabilityKind {
    pub const ALL: [CapabilityKind; 3] = [
        CapabilityKind::ProcessManagement,
        CapabilityKind::GrantInspection,
        CapabilityKind::LoaderControl,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CapabilityKind::ProcessManagement => "ProcessManagement",
            CapabilityKind::GrantInspection => "GrantInspection",
            CapabilityKind::LoaderControl => "LoaderControl",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == name)
    }
}

impl fmt::Display for CapabilityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Identity of one board instance within the host process.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct BoardId(u64);

static NEXT_BOARD: AtomicU64 = AtomicU64::new(1);

impl BoardId {
    fn fresh() -> Self {
        BoardId(NEXT_BOARD.fetch_add(1, Ordering::Relaxed))
    }
}

#[derive(Debug, PartialEq, Eq)]
pub struct CapabilityToken {
    kind: CapabilityKind,
    board: BoardId,
    receipt: u64,
}

impl CapabilityToken {
    pub fn kind(&self) -> CapabilityKind {
        self.kind
    }

    pub fn board(&self) -> BoardId {
        self.board
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoardPhase {
    Building,
    Finalized,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum CapabilityError {
    #[error("capabilities can only be minted while the board is being built")]
    PhaseError,
    #[error("capability was minted by a different board")]
    ForeignCapability,
    #[error("expected a {expected} capability, got {got}")]
    WrongKind {
        expected: CapabilityKind,
        got: CapabilityKind,
    },
    #[error("no live process {0}")]
    NoSuchProcess(u32),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MintRecord {
    pub kind: CapabilityKind,
    pub holder: String,
}

/// Mints tokens for one board and later verifies them.
pub struct CapabilityAuthority {
    board: BoardId,
    phase: Cell<BoardPhase>,
    mints: RefCell<Vec<MintRecord>>,
    trace: Rc<Trace>,
}

impl CapabilityAuthority {
    pub fn new(trace: Rc<Trace>) -> Self {
        CapabilityAuthority {
            board: BoardId::fresh(),
            phase: Cell::new(BoardPhase::Building),
            mints: RefCell::new(Vec::new()),
            trace,
        }
    }

    pub fn board(&self) -> BoardId {
        self.board
    }

    pub fn phase(&self) -> BoardPhase {
        self.phase.get()
    }

    /// Mints a token for `holder` (a capsule name, or `kernel`).
    pub fn mint(&self, kind: CapabilityKind, holder: &str) -> Result<CapabilityToken, CapabilityError> {
        if self.phase.get() != BoardPhase::Building {
            self.trace.record(
                Actor::Kernel,
                "cap_mint_refused",
                json!({ "holder": holder, "cap": kind.name() }),
            );
            return Err(CapabilityError::PhaseError);
        }
        let mut mints = self.mints.borrow_mut();
        mints.push(MintRecord {
            kind,
            holder: holder.into(),
        });
        self.trace.record(
            Actor::Kernel,
            "cap_mint",
            json!({ "holder": holder, "cap": kind.name() }),
        );
        Ok(CapabilityToken {
            kind,
            board: self.board,
            receipt: mints.len() as u64 - 1,
        })
    }

    /// Building → Finalized. Happens exactly once.
    pub fn finalize(&self) -> Result<(), CapabilityError> {
        if self.phase.get() != BoardPhase::Building {
            return Err(CapabilityError::PhaseError);
        }
        self.phase.set(BoardPhase::Finalized);
        self.trace.record(
            Actor::Kernel,
            "board_finalized",
            json!({ "mints": self.mints.borrow().len() }),
        );
        Ok(())
    }

    /// Checks a presented token and returns its holder's actor.
    pub fn verify(
        &self,
        token: &CapabilityToken,
        expected: CapabilityKind,
    ) -> Result<Actor, CapabilityError> {
        if token.board != self.board {
            return Err(CapabilityError::ForeignCapability);
        }
        if token.kind != expected {
            return Err(CapabilityError::WrongKind {
                expected,
                got: token.kind,
            });
        }
        let mints = self.mints.borrow();
        let rec = &mints[token.receipt as usize];
        Ok(if rec.holder == "kernel" {
            Actor::Kernel
        } else {
            Actor::Capsule(rec.holder.clone())
        })
    }

    pub fn mints(&self) -> Vec<MintRecord> {
        self.mints.borrow().clone()
    }
}
