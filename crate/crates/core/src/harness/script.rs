// Licensed under the Apache License, Version 2.0 or the MIT License.
// SPDX-License-Identifier: Apache-2.0 OR MIT
// Copyright kernsim Contributors 2026.

//! Scenario scripts: the userspace programs of the simulator.
//!
//! A script is JSON:
//!
//! ```json
//! {
//!   "name": "blink",
//!   "app_ram": 1024,
//!   "main": [
//!     { "syscall": { "class": "subscribe", "driver": 0, "sub": 0, "fn": "fired" } },
//!     { "syscall": { "class": "command", "driver": 0, "cmd": 4, "args": [500] } },
//!     { "expect": { "variant": "success_value" } },
//!     { "syscall": { "class": "yield", "mode": "wait" } }
//!   ],
//!   "handlers": { "fired": ["halt"] }
//! }
//! ```
//!
//! Addresses in allow records and local reads/writes are offsets from the
//! start of the process's memory, unless an allow record sets
//! `"absolute": true`. Expect patterns match any subset of the encoded
//! return record; `"rel_base"` matches a region base relative to the process.

use std::collections::BTreeMap;
use std::rc::Rc;

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::kernel::binary::ProcessBinary;
use crate::kernel::code::{CodeLoader, CodeStep, ProcessCode, ProcessEnv, ProcessImage};
use crate::syscall::{
    decode_invocation, encode_return, SharedRegion, SyscallInvocation, SyscallReturn, UpcallDescriptor,
    YieldMode,
};

pub const DEFAULT_GRANT_SPACE: u32 = 512;
pub const MAIN_ENTRY: &str = "main";
const SYNC_HANDLER: &str = "__sync";
const SYNC_TIMEOUT_HANDLER: &str = "__sync_timeout";
const ALARM_SET_RELATIVE: u32 = 4;
const ALARM_STOP: u32 = 3;

#[derive(Debug, Error)]
pub enum ScriptError {
    #[error("script does not parse: {0}")]
    Parse(String),
    #[error("{context}: {message}")]
    Invalid { context: String, message: String },
}

fn invalid(context: &str, message: impl Into<String>) -> ScriptError {
    ScriptError::Invalid {
        context: context.into(),
        message: message.into(),
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FlashContents {
    Text(String),
    Bytes(Vec<u8>),
}

impl FlashContents {
    pub fn bytes(&self) -> Vec<u8> {
        match self {
            FlashContents::Text(s) => s.as_bytes().to_vec(),
            FlashContents::Bytes(b) => b.clone(),
        }
    }
}

/// The on-disk form of a scenario.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub name: String,
    #[serde(default = "default_app_ram")]
    pub app_ram: u32,
    #[serde(default = "default_grant_space")]
    pub grant_space: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flash: Option<FlashContents>,
    #[serde(default = "default_entry")]
    pub entry: String,
    #[serde(default)]
    pub main: Vec<Value>,
    #[serde(default)]
    pub handlers: BTreeMap<String, Vec<Value>>,
}

fn default_app_ram() -> u32 {
    1024
}

fn default_grant_space() -> u32 {
    DEFAULT_GRANT_SPACE
}

fn default_entry() -> String {
    MAIN_ENTRY.into()
}

impl ScenarioFile {
    pub fn parse(text: &str) -> Result<Self, ScriptError> {
        let file: ScenarioFile = serde_json::from_str(text).map_err(|e| ScriptError::Parse(e.to_string()))?;
        Script::compile(&file)?;
        Ok(file)
    }

    pub fn flash_bytes(&self) -> Vec<u8> {
        self.flash.as_ref().map(FlashContents::bytes).unwrap_or_default()
    }

    /// Total memory the process asks for: RAM, flash and grant space.
    pub fn min_memory(&self) -> u32 {
        self.app_ram + self.flash_bytes().len() as u32 + self.grant_space
    }

    /// Packs the scenario into a signed process binary.
    pub fn pack(&self, key_id: u16) -> ProcessBinary {
        let payload = serde_json::to_vec(self).expect("scenarios always serialize");
        ProcessBinary::new(&self.entry, self.min_memory(), payload, key_id)
    }
}

/// One compiled statement.
#[derive(Clone, Debug, PartialEq)]
pub enum Stmt {
    Syscall(SyscallInvocation, bool),
    Expect(Value),
    ExpectSuccess,
    WriteLocal { offset: u32, bytes: Vec<u8> },
    ReadLocal { offset: u32, len: u32 },
    Loop { count: u32, body: Rc<[Stmt]> },
    Halt,
}

/// A compiled scenario.
#[derive(Clone, Debug)]
pub struct Script {
    pub name: String,
    pub entry: String,
    pub main: Rc<[Stmt]>,
    pub handlers: BTreeMap<String, Rc<[Stmt]>>,
}

impl Script {
    pub fn compile(file: &ScenarioFile) -> Result<Script, ScriptError> {
        let mut handlers = BTreeMap::new();
        for (name, body) in &file.handlers {
            if name == crate::syscall::NULL_UPCALL || name.starts_with("__") {
                return Err(invalid(name, "reserved handler name"));
            }
            let ctx = format!("handler {name}");
            handlers.insert(name.clone(), compile_block(body, &ctx, true)?);
        }
        handlers.insert(SYNC_HANDLER.into(), Rc::from(Vec::new()));
        handlers.insert(SYNC_TIMEOUT_HANDLER.into(), Rc::from(Vec::new()));
        let main = compile_block(&file.main, "main", false)?;
        let script = Script {
            name: file.name.clone(),
            entry: file.entry.clone(),
            main,
            handlers,
        };
        if !script.has_entry(&file.entry) {
            return Err(invalid("entry", format!("no code named {}", file.entry)));
        }
        Ok(script)
    }

    fn has_entry(&self, entry: &str) -> bool {
        entry == MAIN_ENTRY || self.handlers.contains_key(entry)
    }
}

fn compile_block(stmts: &[Value], ctx: &str, in_handler: bool) -> Result<Rc<[Stmt]>, ScriptError> {
    let mut out = Vec::new();
    for (i, s) in stmts.iter().enumerate() {
        compile_stmt(s, &format!("{ctx}[{i}]"), in_handler, &mut out)?;
    }
    Ok(Rc::from(out))
}

fn field_u32(obj: &Map<String, Value>, key: &str, ctx: &str) -> Result<u32, ScriptError> {
    obj.get(key)
        .and_then(Value::as_u64)
        .and_then(|v| u32::try_from(v).ok())
        .ok_or_else(|| invalid(ctx, format!("missing or invalid `{key}`")))
}

fn opt_u32(obj: &Map<String, Value>, key: &str, ctx: &str) -> Result<u32, ScriptError> {
    if obj.contains_key(key) {
        field_u32(obj, key, ctx)
    } else {
        Ok(0)
    }
}

fn compile_stmt(s: &Value, ctx: &str, in_handler: bool, out: &mut Vec<Stmt>) -> Result<(), ScriptError> {
    if s.as_str() == Some("halt") {
        out.push(Stmt::Halt);
        return Ok(());
    }
    let obj = s
        .as_object()
        .filter(|o| o.len() == 1)
        .ok_or_else(|| invalid(ctx, "statement must be \"halt\" or an object with one key"))?;
    let (key, body) = obj.iter().next().expect("one key");
    match key.as_str() {
        "syscall" => {
            let mut record = body
                .as_object()
                .cloned()
                .ok_or_else(|| invalid(ctx, "syscall record must be an object"))?;
            let absolute = record
                .remove("absolute")
                .map(|v| v.as_bool().unwrap_or(false))
                .unwrap_or(false);
            let inv = decode_invocation(&Value::Object(record)).map_err(|e| invalid(ctx, e.to_string()))?;
            if in_handler && matches!(inv, SyscallInvocation::Yield(_)) {
                return Err(invalid(ctx, "handlers may not yield"));
            }
            out.push(Stmt::Syscall(inv, absolute));
        }
        "expect" => {
            if !body.is_object() {
                return Err(invalid(ctx, "expect pattern must be an object"));
            }
            out.push(Stmt::Expect(body.clone()));
        }
        "write_local" => {
            let o = body.as_object().ok_or_else(|| invalid(ctx, "write_local needs an object"))?;
            let offset = field_u32(o, "offset", ctx)?;
            let bytes = match (o.get("bytes"), o.get("text")) {
                (Some(b), None) => serde_json::from_value::<Vec<u8>>(b.clone())
                    .map_err(|e| invalid(ctx, e.to_string()))?,
                (None, Some(Value::String(t))) => t.as_bytes().to_vec(),
                _ => return Err(invalid(ctx, "write_local needs `bytes` or `text`")),
            };
            out.push(Stmt::WriteLocal { offset, bytes });
        }
        "read_local" => {
            let o = body.as_object().ok_or_else(|| invalid(ctx, "read_local needs an object"))?;
            out.push(Stmt::ReadLocal {
                offset: field_u32(o, "offset", ctx)?,
                len: field_u32(o, "len", ctx)?,
            });
        }
        "loop" => {
            let o = body.as_object().ok_or_else(|| invalid(ctx, "loop needs an object"))?;
            let count = field_u32(o, "count", ctx)?;
            let stmts = o
                .get("body")
                .and_then(Value::as_array)
                .ok_or_else(|| invalid(ctx, "loop needs a `body` list"))?;
            let body = compile_block(stmts, &format!("{ctx}.body"), in_handler)?;
            out.push(Stmt::Loop { count, body });
        }
        "sync_command" => {
            if in_handler {
                return Err(invalid(ctx, "sync_command yields and cannot run in a handler"));
            }
            expand_sync_command(body, ctx, out)?;
        }
        other => return Err(invalid(ctx, format!("unknown statement `{other}`"))),
    }
    Ok(())
}

/// subscribe, command, expect success, yield-wait, unsubscribe. With a
/// `timeout`, a second subscription to the alarm driver bounds the wait.
fn expand_sync_command(body: &Value, ctx: &str, out: &mut Vec<Stmt>) -> Result<(), ScriptError> {
    let o = body.as_object().ok_or_else(|| invalid(ctx, "sync_command needs an object"))?;
    let driver = field_u32(o, "driver", ctx)?;
    let cmd = field_u32(o, "cmd", ctx)?;
    let sub = opt_u32(o, "sub", ctx)?;
    let args: Vec<u32> = match o.get("args") {
        Some(a) => serde_json::from_value(a.clone()).map_err(|e| invalid(ctx, e.to_string()))?,
        None => Vec::new(),
    };
    if args.len() > 2 {
        return Err(invalid(ctx, "command takes at most 2 arguments"));
    }
    let timeout = match o.get("timeout") {
        None => None,
        Some(_) => {
            let alarm = if o.contains_key("alarm_driver") {
                field_u32(o, "alarm_driver", ctx)?
            } else {
                0
            };
            if alarm == driver {
                return Err(invalid(ctx, "timeout alarm must differ from the awaited driver"));
            }
            Some((alarm, field_u32(o, "timeout", ctx)?))
        }
    };
    let subscribe = |driver, sub, handler: Option<&str>| {
        Stmt::Syscall(
            SyscallInvocation::Subscribe {
                driver,
                subscribe: sub,
                upcall: match handler {
                    Some(h) => UpcallDescriptor::new(h, 0),
                    None => UpcallDescriptor::null(),
                },
            },
            false,
        )
    };
    let command = |driver, command, arg0, arg1| {
        Stmt::Syscall(
            SyscallInvocation::Command {
                driver,
                command,
                arg0,
                arg1,
            },
            false,
        )
    };
    out.push(subscribe(driver, sub, Some(SYNC_HANDLER)));
    if let Some((alarm, ticks)) = timeout {
        out.push(subscribe(alarm, 0, Some(SYNC_TIMEOUT_HANDLER)));
        out.push(command(alarm, ALARM_SET_RELATIVE, ticks, 0));
    }
    out.push(command(
        driver,
        cmd,
        args.first().copied().unwrap_or(0),
        args.get(1).copied().unwrap_or(0),
    ));
    out.push(Stmt::ExpectSuccess);
    out.push(Stmt::Syscall(SyscallInvocation::Yield(YieldMode::Wait), false));
    out.push(subscribe(driver, sub, None));
    if let Some((alarm, _)) = timeout {
        out.push(command(alarm, ALARM_STOP, 0, 0));
        out.push(subscribe(alarm, 0, None));
    }
    Ok(())
}

/// Subset match: every key in `pattern` must equal the same key in `actual`.
pub fn pattern_matches(pattern: &Value, actual: &Value) -> bool {
    match (pattern, actual) {
        (Value::Object(p), Value::Object(a)) => p
            .iter()
            .all(|(k, v)| a.get(k).is_some_and(|av| pattern_matches(v, av))),
        _ => pattern == actual,
    }
}

fn relocate(region: SharedRegion, base: u32) -> SharedRegion {
    SharedRegion::new(region.base.wrapping_add(base), region.len)
}

struct Frame {
    body: Rc<[Stmt]>,
    pc: usize,
    /// Iterations left including the current one, for loop bodies.
    iterations: u32,
}

impl Frame {
    fn new(body: Rc<[Stmt]>, iterations: u32) -> Self {
        Frame {
            body,
            pc: 0,
            iterations,
        }
    }
}

/// Interprets a compiled script as process code.
pub struct ScriptCode {
    script: Script,
    main: Vec<Frame>,
    handler: Vec<Frame>,
    in_handler: bool,
    last_return: Option<SyscallReturn>,
}

impl ScriptCode {
    pub fn new(script: Script) -> Self {
        let entry = if script.entry == MAIN_ENTRY {
            script.main.clone()
        } else {
            script.handlers[&script.entry].clone()
        };
        ScriptCode {
            main: vec![Frame::new(entry, 1)],
            handler: Vec::new(),
            in_handler: false,
            last_return: None,
            script,
        }
    }

    /// Next statement of the active stack, unwinding finished frames.
    fn fetch(stack: &mut Vec<Frame>) -> Option<Stmt> {
        loop {
            let top = stack.last_mut()?;
            if top.pc < top.body.len() {
                let s = top.body[top.pc].clone();
                top.pc += 1;
                return Some(s);
            }
            if top.iterations > 1 {
                top.iterations -= 1;
                top.pc = 0;
            } else {
                stack.pop();
            }
        }
    }

    fn expect(&self, env: &mut dyn ProcessEnv, pattern: Value, matches: impl FnOnce(&Value) -> bool) {
        let actual = self.last_return.as_ref().map(encode_return).unwrap_or(Value::Null);
        let pass = matches(&actual);
        env.note("expect", json!({ "pattern": pattern, "actual": actual, "pass": pass }));
    }
}

fn relative_pattern(pattern: &Value, base: u32) -> Value {
    let mut p = pattern.clone();
    if let Some(obj) = p.as_object_mut() {
        if let Some(rel) = obj.remove("rel_base").and_then(|v| v.as_u64()) {
            obj.insert("base".into(), json!(base.wrapping_add(rel as u32)));
        }
    }
    p
}

impl ProcessCode for ScriptCode {
    fn run(&mut self, env: &mut dyn ProcessEnv) -> CodeStep {
        loop {
            if !env.charge() {
                return CodeStep::Preempted;
            }
            let stack = if self.in_handler {
                &mut self.handler
            } else {
                &mut self.main
            };
            let Some(stmt) = Self::fetch(stack) else {
                if self.in_handler {
                    self.in_handler = false;
                    return CodeStep::UpcallDone;
                }
                return CodeStep::Finished;
            };
            let base = env.memory_base();
            match stmt {
                Stmt::Syscall(inv, absolute) => {
                    let inv = match inv {
                        SyscallInvocation::ReadWriteAllow { driver, buffer, region } if !absolute => {
                            SyscallInvocation::ReadWriteAllow {
                                driver,
                                buffer,
                                region: relocate(region, base),
                            }
                        }
                        SyscallInvocation::ReadOnlyAllow { driver, buffer, region } if !absolute => {
                            SyscallInvocation::ReadOnlyAllow {
                                driver,
                                buffer,
                                region: relocate(region, base),
                            }
                        }
                        other => other,
                    };
                    return CodeStep::Syscall(inv);
                }
                Stmt::Expect(pattern) => {
                    let resolved = relative_pattern(&pattern, base);
                    self.expect(env, pattern, |actual| pattern_matches(&resolved, actual));
                }
                Stmt::ExpectSuccess => {
                    let ok = self.last_return.as_ref().is_some_and(SyscallReturn::is_success);
                    self.expect(env, json!({ "success": true }), |_| ok);
                }
                Stmt::WriteLocal { offset, bytes } => {
                    let addr = base.wrapping_add(offset);
                    if let Err(e) = env.write(addr, &bytes) {
                        return CodeStep::Fault(e.to_string());
                    }
                    env.note("local_write", json!({ "offset": offset, "len": bytes.len() }));
                }
                Stmt::ReadLocal { offset, len } => {
                    let addr = base.wrapping_add(offset);
                    match env.read(addr, len) {
                        Ok(bytes) => env.note("local_read", json!({ "offset": offset, "bytes": bytes })),
                        Err(e) => return CodeStep::Fault(e.to_string()),
                    }
                }
                Stmt::Loop { count, body } => {
                    if count > 0 {
                        stack.push(Frame::new(body, count));
                    }
                }
                Stmt::Halt => return CodeStep::Syscall(SyscallInvocation::Exit { code: 0 }),
            }
        }
    }

    fn syscall_returned(&mut self, ret: SyscallReturn) {
        self.last_return = Some(ret);
    }

    fn enter_upcall(&mut self, handler: &str, _args: [u32; 3], _userdata: u32) -> bool {
        let Some(body) = self.script.handlers.get(handler) else {
            return false;
        };
        self.handler = vec![Frame::new(body.clone(), 1)];
        self.in_handler = true;
        self.last_return = None;
        true
    }

    fn handler_names(&self) -> Vec<String> {
        self.script.handlers.keys().cloned().collect()
    }

    fn has_entry(&self, entry: &str) -> bool {
        self.script.has_entry(entry)
    }
}

/// Turns verified binaries carrying scenario payloads into runnable code.
#[derive(Clone, Copy, Debug, Default)]
pub struct ScriptLoader;

impl CodeLoader for ScriptLoader {
    fn instantiate(&self, binary: &ProcessBinary) -> Result<(Box<dyn ProcessCode>, ProcessImage), String> {
        let text = std::str::from_utf8(&binary.payload).map_err(|e| e.to_string())?;
        let file = ScenarioFile::parse(text).map_err(|e| e.to_string())?;
        let script = Script::compile(&file).map_err(|e| e.to_string())?;
        let image = ProcessImage {
            flash: file.flash_bytes(),
            app_ram: file.app_ram,
        };
        Ok((Box::new(ScriptCode::new(script)), image))
    }
}
