// Licensed under the Apache License, Version 2.0 or the MIT License.
// SPDX-License-Identifier: Apache-2.0 OR MIT
// Copyright kernsim Contributors 2026.

//! Data model and record encoding of the system call interface.
//!
//! Allow and subscribe have swapping semantics: each call hands back whatever
//! the slot previously held. The structured records defined here are both the
//! scenario syntax for issuing calls and the trace syntax for their returns.

use core::fmt;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::memory::Address;

/// Name under which the null upcall is written in records.
pub const NULL_UPCALL: &str = "null";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ErrorCode {
    #[serde(rename = "FAIL")]
    Fail = 1,
    #[serde(rename = "BUSY")]
    Busy = 2,
    #[serde(rename = "RESERVE")]
    Reserve = 5,
    #[serde(rename = "INVAL")]
    Inval = 6,
    #[serde(rename = "SIZE")]
    Size = 7,
    #[serde(rename = "NOMEM")]
    NoMem = 9,
    #[serde(rename = "NOSUPPORT")]
    NoSupport = 10,
    #[serde(rename = "NODEVICE")]
    NoDevice = 11,
}

impl ErrorCode {
    pub const ALL: [ErrorCode; 8] = [
        ErrorCode::Fail,
        ErrorCode::Busy,
        ErrorCode::Reserve,
        ErrorCode::Inval,
        ErrorCode::Size,
        ErrorCode::NoMem,
        ErrorCode::NoSupport,
        ErrorCode::NoDevice,
    ];

    pub fn as_u32(self) -> u32 {
        self as u32
    }

    pub fn from_u32(v: u32) -> Option<ErrorCode> {
        ErrorCode::ALL.into_iter().find(|e| e.as_u32() == v)
    }

    pub fn name(self) -> &'static str {
        match self {
            ErrorCode::Fail => "FAIL",
            ErrorCode::Busy => "BUSY",
            ErrorCode::Reserve => "RESERVE",
            ErrorCode::Inval => "INVAL",
            ErrorCode::Size => "SIZE",
            ErrorCode::NoMem => "NOMEM",
            ErrorCode::NoSupport => "NOSUPPORT",
            ErrorCode::NoDevice => "NODEVICE",
        }
    }
}

impl fmt::Display for ErrorCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum YieldMode {
    #[default]
    Wait,
    NoWait,
}

/// A userspace region shared through allow.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SharedRegion {
    pub base: Address,
    pub len: u32,
}

impl SharedRegion {
    /// Returned by the first allow on a slot.
    pub const EMPTY: SharedRegion = SharedRegion { base: 0, len: 0 };

    pub const fn new(base: Address, len: u32) -> Self {
        SharedRegion { base, len }
    }
}

/// A registered upcall. `handler == None` is the null upcall.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct UpcallDescriptor {
    pub handler: Option<String>,
    pub userdata: u32,
}

impl UpcallDescriptor {
    pub fn null() -> Self {
        UpcallDescriptor::default()
    }

    pub fn new(handler: impl Into<String>, userdata: u32) -> Self {
        UpcallDescriptor {
            handler: Some(handler.into()),
            userdata,
        }
    }

    pub fn is_null(&self) -> bool {
        self.handler.is_none()
    }

    fn record_name(&self) -> String {
        self.handler.clone().unwrap_or_else(|| NULL_UPCALL.into())
    }

    fn from_record_name(name: String, userdata: u32) -> Self {
        UpcallDescriptor {
            handler: (name != NULL_UPCALL).then_some(name),
            userdata,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SyscallInvocation {
    Yield(YieldMode),
    Subscribe {
        driver: u32,
        subscribe: u32,
        upcall: UpcallDescriptor,
    },
    Command {
        driver: u32,
        command: u32,
        arg0: u32,
        arg1: u32,
    },
    ReadWriteAllow {
        driver: u32,
        buffer: u32,
        region: SharedRegion,
    },
    ReadOnlyAllow {
        driver: u32,
        buffer: u32,
        region: SharedRegion,
    },
    Exit {
        code: u32,
    },
}

impl SyscallInvocation {
    pub fn class_name(&self) -> &'static str {
        match self {
            SyscallInvocation::Yield(_) => "yield",
            SyscallInvocation::Subscribe { .. } => "subscribe",
            SyscallInvocation::Command { .. } => "command",
            SyscallInvocation::ReadWriteAllow { .. } => "rw_allow",
            SyscallInvocation::ReadOnlyAllow { .. } => "ro_allow",
            SyscallInvocation::Exit { .. } => "exit",
        }
    }

    pub fn is_allow(&self) -> bool {
        matches!(
            self,
            SyscallInvocation::ReadWriteAllow { .. } | SyscallInvocation::ReadOnlyAllow { .. }
        )
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SyscallReturn {
    Success,
    SuccessWithValue(u32),
    SuccessWithRegion(SharedRegion),
    SuccessWithUpcall(UpcallDescriptor),
    Failure(ErrorCode),
    FailureWithRegion(ErrorCode, SharedRegion),
    /// A rejected subscribe hands the offered upcall back, so every subscribe
    /// return carries a descriptor.
    FailureWithUpcall(ErrorCode, UpcallDescriptor),
}

impl SyscallReturn {
    pub fn is_success(&self) -> bool {
        matches!(
            self,
            SyscallReturn::Success
                | SyscallReturn::SuccessWithValue(_)
                | SyscallReturn::SuccessWithRegion(_)
                | SyscallReturn::SuccessWithUpcall(_)
        )
    }

    pub fn region(&self) -> Option<SharedRegion> {
        match self {
            SyscallReturn::SuccessWithRegion(r) | SyscallReturn::FailureWithRegion(_, r) => {
                Some(*r)
            }
            _ => None,
        }
    }

    pub fn upcall(&self) -> Option<&UpcallDescriptor> {
        match self {
            SyscallReturn::SuccessWithUpcall(u) | SyscallReturn::FailureWithUpcall(_, u) => Some(u),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum AbiError {
    #[error("malformed invocation: {0}")]
    MalformedInvocation(String),
    #[error("malformed return record: {0}")]
    MalformedReturn(String),
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "class", rename_all = "snake_case")]
enum InvocationRecord {
    Yield {
        #[serde(default)]
        mode: YieldMode,
    },
    Subscribe {
        driver: u32,
        sub: u32,
        #[serde(rename = "fn")]
        handler: String,
        #[serde(default)]
        userdata: u32,
    },
    Command {
        driver: u32,
        cmd: u32,
        #[serde(default)]
        args: Vec<u32>,
    },
    RwAllow {
        driver: u32,
        buf: u32,
        base: u32,
        len: u32,
    },
    RoAllow {
        driver: u32,
        buf: u32,
        base: u32,
        len: u32,
    },
    Exit {
        #[serde(default)]
        code: u32,
    },
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
enum ReturnRecord {
    Success,
    SuccessValue {
        value: u32,
    },
    SuccessRegion {
        base: u32,
        len: u32,
    },
    SuccessUpcall {
        #[serde(rename = "fn")]
        handler: String,
        userdata: u32,
    },
    Failure {
        err: ErrorCode,
    },
    FailureRegion {
        err: ErrorCode,
        base: u32,
        len: u32,
    },
    FailureUpcall {
        err: ErrorCode,
        #[serde(rename = "fn")]
        handler: String,
        userdata: u32,
    },
}

pub fn decode_invocation(record: &Value) -> Result<SyscallInvocation, AbiError> {
    let rec: InvocationRecord = serde_json::from_value(record.clone())
        .map_err(|e| AbiError::MalformedInvocation(e.to_string()))?;
    Ok(match rec {
        InvocationRecord::Yield { mode } => SyscallInvocation::Yield(mode),
        InvocationRecord::Subscribe {
            driver,
            sub,
            handler,
            userdata,
        } => SyscallInvocation::Subscribe {
            driver,
            subscribe: sub,
            upcall: UpcallDescriptor::from_record_name(handler, userdata),
        },
        InvocationRecord::Command { driver, cmd, args } => {
            if args.len() > 2 {
                return Err(AbiError::MalformedInvocation(format!(
                    "command takes at most 2 arguments, got {}",
                    args.len()
                )));
            }
            SyscallInvocation::Command {
                driver,
                command: cmd,
                arg0: args.first().copied().unwrap_or(0),
                arg1: args.get(1).copied().unwrap_or(0),
            }
        }
        InvocationRecord::RwAllow {
            driver,
            buf,
            base,
            len,
        } => SyscallInvocation::ReadWriteAllow {
            driver,
            buffer: buf,
            region: SharedRegion::new(base, len),
        },
        InvocationRecord::RoAllow {
            driver,
            buf,
            base,
            len,
        } => SyscallInvocation::ReadOnlyAllow {
            driver,
            buffer: buf,
            region: SharedRegion::new(base, len),
        },
        InvocationRecord::Exit { code } => SyscallInvocation::Exit { code },
    })
}

pub fn encode_invocation(inv: &SyscallInvocation) -> Value {
    let rec = match inv.clone() {
        SyscallInvocation::Yield(mode) => InvocationRecord::Yield { mode },
        SyscallInvocation::Subscribe {
            driver,
            subscribe,
            upcall,
        } => InvocationRecord::Subscribe {
            driver,
            sub: subscribe,
            handler: upcall.record_name(),
            userdata: upcall.userdata,
        },
        SyscallInvocation::Command {
            driver,
            command,
            arg0,
            arg1,
        } => InvocationRecord::Command {
            driver,
            cmd: command,
            args: vec![arg0, arg1],
        },
        SyscallInvocation::ReadWriteAllow {
            driver,
            buffer,
            region,
        } => InvocationRecord::RwAllow {
            driver,
            buf: buffer,
            base: region.base,
            len: region.len,
        },
        SyscallInvocation::ReadOnlyAllow {
            driver,
            buffer,
            region,
        } => InvocationRecord::RoAllow {
            driver,
            buf: buffer,
            base: region.base,
            len: region.len,
        },
        SyscallInvocation::Exit { code } => InvocationRecord::Exit { code },
    };
    serde_json::to_value(rec).expect("invocation records always serialize")
}

pub fn encode_return(r: &SyscallReturn) -> Value {
    let rec = match r.clone() {
        SyscallReturn::Success => ReturnRecord::Success,
        SyscallReturn::SuccessWithValue(value) => ReturnRecord::SuccessValue { value },
        SyscallReturn::SuccessWithRegion(region) => ReturnRecord::SuccessRegion {
            base: region.base,
            len: region.len,
        },
        SyscallReturn::SuccessWithUpcall(u) => ReturnRecord::SuccessUpcall {
            handler: u.record_name(),
            userdata: u.userdata,
        },
        SyscallReturn::Failure(err) => ReturnRecord::Failure { err },
        SyscallReturn::FailureWithRegion(err, region) => ReturnRecord::FailureRegion {
            err,
            base: region.base,
            len: region.len,
        },
        SyscallReturn::FailureWithUpcall(err, u) => ReturnRecord::FailureUpcall {
            err,
            handler: u.record_name(),
            userdata: u.userdata,
        },
    };
    serde_json::to_value(rec).expect("return records always serialize")
}

pub fn decode_return(record: &Value) -> Result<SyscallReturn, AbiError> {
    let rec: ReturnRecord = serde_json::from_value(record.clone())
        .map_err(|e| AbiError::MalformedReturn(e.to_string()))?;
    Ok(match rec {
        ReturnRecord::Success => SyscallReturn::Success,
        ReturnRecord::SuccessValue { value } => SyscallReturn::SuccessWithValue(value),
        ReturnRecord::SuccessRegion { base, len } => {
            SyscallReturn::SuccessWithRegion(SharedRegion::new(base, len))
        }
        ReturnRecord::SuccessUpcall { handler, userdata } => {
            SyscallReturn::SuccessWithUpcall(UpcallDescriptor::from_record_name(handler, userdata))
        }
        ReturnRecord::Failure { err } => SyscallReturn::Failure(err),
        ReturnRecord::FailureRegion { err, base, len } => {
            SyscallReturn::FailureWithRegion(err, SharedRegion::new(base, len))
        }
        ReturnRecord::FailureUpcall {
            err,
            handler,
            userdata,
        } => SyscallReturn::FailureWithUpcall(
            err,
            UpcallDescriptor::from_record_name(handler, userdata),
        ),
    })
}
