// Licensed under the Apache License, Version 2.0 or the MIT License.
// SPDX-License-Identifier: Apache-2.0 OR MIT
// Copyright kernsim Contributors 2026.

//! Process loading: header check, integrity check, runnability check.
//!
//! The asynchronous loader runs each job as an explicit state machine that
//! advances at most one transition per kernel loop step and hands the
//! payload digest to the hash engine as a split-phase operation. The
//! synchronous loader performs the same checks inline, hashing in software.

use std::cell::{Cell, RefCell};
use std::fmt;
use std::rc::{Rc, Weak};

use serde_json::json;
use thiserror::Error;

use super::binary::{ProcessBinary, VerifierPolicy};
use super::code::CodeLoader;
use super::Kernel;
use crate::capabilities::{CapabilityAuthority, CapabilityError, CapabilityKind, CapabilityToken};
use crate::hil::digest::{DigestClient, DigestEngine};
use crate::hil::window::BufferWindow;
use crate::hw::fnv1a64;
use crate::ids::ProcessId;
use crate::syscall::ErrorCode;
use crate::trace::{Actor, Trace};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RejectReason {
    BadHeader,
    BadIntegrity,
    NotRunnable,
    NoRoom,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LoaderState {
    Fetched,
    HeaderChecked,
    IntegrityPending(u32),
    IntegrityChecked,
    Runnable,
    Rejected(RejectReason),
}

impl LoaderState {
    pub fn is_terminal(self) -> bool {
        matches!(self, LoaderState::Runnable | LoaderState::Rejected(_))
    }
}

impl fmt::Display for LoaderState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LoaderState::Fetched => f.write_str("Fetched"),
            LoaderState::HeaderChecked => f.write_str("HeaderChecked"),
            LoaderState::IntegrityPending(_) => f.write_str("IntegrityPending"),
            LoaderState::IntegrityChecked => f.write_str("IntegrityChecked"),
            LoaderState::Runnable => f.write_str("Runnable"),
            LoaderState::Rejected(r) => write!(f, "Rejected({r:?})"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LoaderEvent {
    Start,
    HashSubmitted(u32),
    DigestDone(u64),
    RunnabilityChecked(Result<(), RejectReason>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Error)]
#[error("event {event:?} is not valid in state {state}")]
pub struct InvalidTransition {
    pub state: LoaderState,
    pub event: LoaderEvent,
}

#[derive(Clone, Debug)]
pub struct LoaderJob {
    pub id: u32,
    pub name: String,
    pub bytes: Vec<u8>,
    pub binary: Option<ProcessBinary>,
    pub state: LoaderState,
    pub pid: Option<ProcessId>,
}

impl LoaderJob {
    pub fn new(id: u32, name: &str, bytes: Vec<u8>) -> Self {
        LoaderJob {
            id,
            name: name.into(),
            bytes,
            binary: None,
            state: LoaderState::Fetched,
            pid: None,
        }
    }

    /// Applies one event. On error the job is unchanged.
    pub fn advance(
        &mut self,
        event: LoaderEvent,
        policy: &VerifierPolicy,
    ) -> Result<LoaderState, InvalidTransition> {
        let next = match (self.state, event) {
            (LoaderState::Fetched, LoaderEvent::Start) => match ProcessBinary::parse(&self.bytes) {
                Ok(b) => {
                    self.binary = Some(b);
                    LoaderState::HeaderChecked
                }
                Err(_) => LoaderState::Rejected(RejectReason::BadHeader),
            },
            (LoaderState::HeaderChecked, LoaderEvent::HashSubmitted(job)) => {
                LoaderState::IntegrityPending(job)
            }
            (LoaderState::IntegrityPending(_), LoaderEvent::DigestDone(d)) => {
                let binary = self.binary.as_ref().expect("header checked");
                if policy.accepts(&binary.credential, d) {
                    LoaderState::IntegrityChecked
                } else {
                    LoaderState::Rejected(RejectReason::BadIntegrity)
                }
            }
            (LoaderState::IntegrityChecked, LoaderEvent::RunnabilityChecked(r)) => match r {
                Ok(()) => LoaderState::Runnable,
                Err(reason) => LoaderState::Rejected(reason),
            },
            (state, event) => return Err(InvalidTransition { state, event }),
        };
        self.state = next;
        Ok(next)
    }
}

/// Instantiates and places a verified binary.
fn make_runnable(
    kernel: &Kernel,
    code_loader: &dyn CodeLoader,
    name: &str,
    binary: &ProcessBinary,
) -> Result<ProcessId, RejectReason> {
    let (code, image) = code_loader
        .instantiate(binary)
        .map_err(|_| RejectReason::NotRunnable)?;
    if !code.has_entry(&binary.entry) {
        return Err(RejectReason::NotRunnable);
    }
    kernel.create_process(name, code, image, binary.min_memory)
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum LoadError {
    #[error("rejected: {0:?}")]
    Rejected(RejectReason),
    #[error(transparent)]
    Capability(#[from] CapabilityError),
}

/// Runs every loader stage inline.
pub struct SyncLoader {
    policy: VerifierPolicy,
    code_loader: Rc<dyn CodeLoader>,
}

impl SyncLoader {
    pub fn new(policy: VerifierPolicy, code_loader: Rc<dyn CodeLoader>) -> Self {
        SyncLoader {
            policy,
            code_loader,
        }
    }

    pub fn load(
        &self,
        kernel: &Kernel,
        token: &CapabilityToken,
        name: &str,
        bytes: &[u8],
    ) -> Result<ProcessId, LoadError> {
        let holder = kernel.authority().verify(token, CapabilityKind::LoaderControl)?;
        kernel.trace().record(
            holder,
            "privileged",
            json!({ "op": "load_sync", "cap": CapabilityKind::LoaderControl.name(), "name": name }),
        );
        let result = self.check_and_place(kernel, bytes, name);
        let outcome = match &result {
            Ok(pid) => json!({ "name": name, "result": "Runnable", "pid": pid.0 }),
            Err(r) => json!({ "name": name, "result": format!("Rejected({r:?})") }),
        };
        kernel.trace().record(Actor::Kernel, "load_sync", outcome);
        result.map_err(LoadError::Rejected)
    }

    fn check_and_place(&self, kernel: &Kernel, bytes: &[u8], name: &str) -> Result<ProcessId, RejectReason> {
        let binary = ProcessBinary::parse(bytes).map_err(|_| RejectReason::BadHeader)?;
        if !self.policy.accepts(&binary.credential, fnv1a64(&binary.payload)) {
            return Err(RejectReason::BadIntegrity);
        }
        make_runnable(kernel, self.code_loader.as_ref(), name, &binary)
    }
}

/// Something the kernel loop pumps once per step.
pub trait LoaderPump {
    /// Performs pending transitions. Returns whether anything moved.
    fn pump(&self, kernel: &Kernel) -> bool;

    fn is_idle(&self) -> bool;
}

pub struct AsyncLoader {
    engine: Rc<dyn DigestEngine>,
    policy: VerifierPolicy,
    code_loader: Rc<dyn CodeLoader>,
    authority: Rc<CapabilityAuthority>,
    trace: Rc<Trace>,
    jobs: RefCell<Vec<LoaderJob>>,
    inflight: Cell<Option<u32>>,
}

impl AsyncLoader {
    pub fn new(
        engine: Rc<dyn DigestEngine>,
        policy: VerifierPolicy,
        code_loader: Rc<dyn CodeLoader>,
        authority: Rc<CapabilityAuthority>,
        trace: Rc<Trace>,
    ) -> Rc<Self> {
        let loader = Rc::new(AsyncLoader {
            engine,
            policy,
            code_loader,
            authority,
            trace,
            jobs: RefCell::new(Vec::new()),
            inflight: Cell::new(None),
        });
        let client: Rc<dyn DigestClient> = loader.clone();
        let weak: Weak<dyn DigestClient> = Rc::downgrade(&client);
        loader.engine.set_digest_client(weak);
        loader
    }

    /// Queues a binary for checking. Requires the loader capability.
    pub fn submit(&self, token: &CapabilityToken, name: &str, bytes: Vec<u8>) -> Result<u32, CapabilityError> {
        let holder = self.authority.verify(token, CapabilityKind::LoaderControl)?;
        self.trace.record(
            holder,
            "privileged",
            json!({ "op": "loader_submit", "cap": CapabilityKind::LoaderControl.name(), "name": name }),
        );
        let mut jobs = self.jobs.borrow_mut();
        let id = jobs.len() as u32;
        jobs.push(LoaderJob::new(id, name, bytes));
        self.trace_state(&jobs[id as usize]);
        Ok(id)
    }

    pub fn jobs(&self) -> Vec<LoaderJob> {
        self.jobs.borrow().clone()
    }

    pub fn job_state(&self, id: u32) -> Option<LoaderState> {
        self.jobs.borrow().get(id as usize).map(|j| j.state)
    }

    fn trace_state(&self, job: &LoaderJob) {
        self.trace.record(
            Actor::Kernel,
            "loader_state",
            json!({ "job": job.id, "name": job.name, "state": job.state.to_string() }),
        );
    }

    fn apply(&self, job: &mut LoaderJob, event: LoaderEvent) {
        if job.advance(event, &self.policy).is_ok() {
            self.trace_state(job);
        }
    }
}

impl LoaderPump for AsyncLoader {
    fn pump(&self, kernel: &Kernel) -> bool {
        let mut progressed = false;
        let count = self.jobs.borrow().len();
        for i in 0..count {
            let mut job = self.jobs.borrow()[i].clone();
            match job.state {
                LoaderState::Fetched => {
                    self.apply(&mut job, LoaderEvent::Start);
                    progressed = true;
                }
                LoaderState::HeaderChecked if !self.engine.is_busy() => {
                    let payload = job.binary.as_ref().expect("header checked").payload.clone();
                    if self.engine.compute(BufferWindow::from_vec(payload)).is_ok() {
                        self.inflight.set(Some(job.id));
                        let id = job.id;
                        self.apply(&mut job, LoaderEvent::HashSubmitted(id));
                        progressed = true;
                    }
                }
                LoaderState::IntegrityChecked => {
                    let binary = job.binary.clone().expect("header checked");
                    let r = make_runnable(kernel, self.code_loader.as_ref(), &job.name, &binary);
                    job.pid = r.ok();
                    self.apply(&mut job, LoaderEvent::RunnabilityChecked(r.map(|_| ())));
                    progressed = true;
                }
                _ => {}
            }
            self.jobs.borrow_mut()[i] = job;
        }
        progressed
    }

    fn is_idle(&self) -> bool {
        self.jobs.borrow().iter().all(|j| j.state.is_terminal())
    }
}

impl DigestClient for AsyncLoader {
    fn digest_done(&self, _window: BufferWindow, result: Result<u64, ErrorCode>) {
        let Some(id) = self.inflight.take() else {
            return;
        };
        let mut job = self.jobs.borrow()[id as usize].clone();
        match result {
            Ok(d) => self.apply(&mut job, LoaderEvent::DigestDone(d)),
            Err(_) => {
                job.state = LoaderState::Rejected(RejectReason::BadIntegrity);
                self.trace_state(&job);
            }
        }
        self.jobs.borrow_mut()[id as usize] = job;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn transitions_follow_the_pipeline() {
        let b = ProcessBinary::new("main", 64, vec![1, 2, 3], 0);
        let digest = b.credential.digest;
        let mut job = LoaderJob::new(0, "a", b.encode());
        let p = VerifierPolicy::DigestMatch;
        assert_eq!(
            job.advance(LoaderEvent::DigestDone(digest), &p),
            Err(InvalidTransition {
                state: LoaderState::Fetched,
                event: LoaderEvent::DigestDone(digest)
            })
        );
        assert_eq!(job.advance(LoaderEvent::Start, &p), Ok(LoaderState::HeaderChecked));
        assert_eq!(
            job.advance(LoaderEvent::HashSubmitted(9), &p),
            Ok(LoaderState::IntegrityPending(9))
        );
        assert_eq!(
            job.advance(LoaderEvent::DigestDone(digest), &p),
            Ok(LoaderState::IntegrityChecked)
        );
        assert_eq!(
            job.advance(LoaderEvent::RunnabilityChecked(Ok(())), &p),
            Ok(LoaderState::Runnable)
        );
        assert!(job.advance(LoaderEvent::Start, &p).is_err());
    }

    #[test]
    fn digest_mismatch_rejects() {
        let b = ProcessBinary::new("main", 64, vec![1, 2, 3], 0);
        let mut job = LoaderJob::new(0, "a", b.encode());
        let p = VerifierPolicy::DigestMatch;
        job.advance(LoaderEvent::Start, &p).unwrap();
        job.advance(LoaderEvent::HashSubmitted(0), &p).unwrap();
        assert_eq!(
            job.advance(LoaderEvent::DigestDone(b.credential.digest ^ 1), &p),
            Ok(LoaderState::Rejected(RejectReason::BadIntegrity))
        );
    }

    #[test]
    fn bad_magic_rejected_at_start() {
        let mut job = LoaderJob::new(0, "a", b"NOPE....".to_vec());
        assert_eq!(
            job.advance(LoaderEvent::Start, &VerifierPolicy::AcceptAll),
            Ok(LoaderState::Rejected(RejectReason::BadHeader))
        );
    }
}
