// Licensed under the Apache License, Version 2.0 or the MIT License.
// SPDX-License-Identifier: Apache-2.0 OR MIT
// Copyright kernsim Contributors 2026.

//! Multiplexes one hardware alarm across clients registered at board
//! construction.
//!
//! The hardware compare value is rewritten only when a newly set deadline
//! becomes the earliest armed one. On a hardware fire every client whose
//! deadline has passed is called back in registration order, and the
//! hardware is re-armed for the next earliest deadline or disarmed.

use std::cell::RefCell;
use std::rc::{Rc, Weak};

use super::time::{order_key, passed, Alarm, AlarmClient, Ticks};

struct Entry {
    deadline: Ticks,
    armed: bool,
    client: Option<Weak<dyn AlarmClient>>,
}

pub struct MuxAlarm {
    hw: Rc<dyn Alarm>,
    entries: RefCell<Vec<Entry>>,
}

impl MuxAlarm {
    pub fn new(hw: Rc<dyn Alarm>) -> Rc<Self> {
        Rc::new(MuxAlarm {
            hw,
            entries: RefCell::new(Vec::new()),
        })
    }

    /// Registers the mux as the hardware alarm's client.
    pub fn install(self: &Rc<Self>) {
        let me: Rc<dyn AlarmClient> = self.clone();
        self.hw.set_alarm_client(Rc::downgrade(&me));
    }

    /// Creates a new virtual alarm. Registration order is callback order.
    pub fn new_client(self: &Rc<Self>) -> VirtualAlarm {
        let mut entries = self.entries.borrow_mut();
        entries.push(Entry {
            deadline: 0,
            armed: false,
            client: None,
        });
        VirtualAlarm {
            mux: self.clone(),
            id: entries.len() - 1,
        }
    }

    pub fn client_count(&self) -> usize {
        self.entries.borrow().len()
    }

    pub fn armed_count(&self) -> usize {
        self.entries.borrow().iter().filter(|e| e.armed).count()
    }

    /// The earliest armed deadline, relative to `now`.
    fn earliest(&self, now: Ticks, except: Option<usize>) -> Option<Ticks> {
        self.entries
            .borrow()
            .iter()
            .enumerate()
            .filter(|(i, e)| e.armed && Some(*i) != except)
            .map(|(_, e)| e.deadline)
            .min_by_key(|d| order_key(now, *d))
    }

    fn set(&self, id: usize, deadline: Ticks) {
        let now = self.hw.now();
        let others = self.earliest(now, Some(id));
        {
            let mut entries = self.entries.borrow_mut();
            entries[id].deadline = deadline;
            entries[id].armed = true;
        }
        let is_new_min = match others {
            Some(d) => order_key(now, deadline) <= order_key(now, d),
            None => true,
        };
        if is_new_min {
            self.hw.set_alarm(deadline);
        }
    }

    fn disarm(&self, id: usize) {
        self.entries.borrow_mut()[id].armed = false;
        if self.armed_count() == 0 {
            self.hw.disarm();
        }
    }
}

impl AlarmClient for MuxAlarm {
    fn alarm_fired(&self) {
        let now = self.hw.now();
        let due: Vec<Option<Weak<dyn AlarmClient>>> = {
            let mut entries = self.entries.borrow_mut();
            entries
                .iter_mut()
                .filter(|e| e.armed && passed(now, e.deadline))
                .map(|e| {
                    e.armed = false;
                    e.client.clone()
                })
                .collect()
        };
        for client in due.into_iter().flatten() {
            if let Some(c) = client.upgrade() {
                c.alarm_fired();
            }
        }
        match self.earliest(self.hw.now(), None) {
            Some(d) => self.hw.set_alarm(d),
            None => self.hw.disarm(),
        }
    }
}

/// One client's view of the shared alarm.
pub struct VirtualAlarm {
    mux: Rc<MuxAlarm>,
    id: usize,
}

impl VirtualAlarm {
    pub fn id(&self) -> usize {
        self.id
    }
}

impl Alarm for VirtualAlarm {
    fn now(&self) -> Ticks {
        self.mux.hw.now()
    }

    fn frequency(&self) -> u32 {
        self.mux.hw.frequency()
    }

    fn set_alarm(&self, deadline: Ticks) {
        self.mux.set(self.id, deadline)
    }

    fn get_alarm(&self) -> Ticks {
        self.mux.entries.borrow()[self.id].deadline
    }

    fn disarm(&self) {
        self.mux.disarm(self.id)
    }

    fn is_armed(&self) -> bool {
        self.mux.entries.borrow()[self.id].armed
    }

    fn set_alarm_client(&self, client: Weak<dyn AlarmClient>) {
        self.mux.entries.borrow_mut()[self.id].client = Some(client);
    }
}
