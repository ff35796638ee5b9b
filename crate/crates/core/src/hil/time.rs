// Licensed under the Apache License, Version 2.0 or the MIT License.
// SPDX-License-Identifier: Apache-2.0 OR MIT
// Copyright kernsim Contributors 2026.

//! 32-bit alarm interfaces and wraparound-aware tick arithmetic.
//!
//! A deadline `d` has passed at `now` when `now - d` (mod 2^32) lies in the
//! lower half of the ring. Comparisons between deadlines are made relative
//! to `now` for the same reason.

use std::rc::Weak;

pub type Ticks = u32;

pub const HALF_RING: u32 = 1 << 31;

pub fn passed(now: Ticks, deadline: Ticks) -> bool {
    now.wrapping_sub(deadline) < HALF_RING
}

/// Signed distance from `now` to `deadline`; smaller fires sooner.
pub fn order_key(now: Ticks, deadline: Ticks) -> i32 {
    deadline.wrapping_sub(now) as i32
}

pub trait AlarmClient {
    fn alarm_fired(&self);
}

pub trait Alarm {
    fn now(&self) -> Ticks;
    fn frequency(&self) -> u32;
    /// Arms the alarm for an absolute deadline, replacing any previous one.
    fn set_alarm(&self, deadline: Ticks);
    fn get_alarm(&self) -> Ticks;
    fn disarm(&self);
    fn is_armed(&self) -> bool;
    fn set_alarm_client(&self, client: Weak<dyn AlarmClient>);
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn passed_handles_wraparound() {
        assert!(passed(100, 100));
        assert!(passed(101, 100));
        assert!(!passed(99, 100));
        assert!(passed(5, u32::MAX - 5));
        assert!(!passed(u32::MAX - 5, 5));
    }

    #[test]
    fn ordering_is_relative_to_now() {
        let now = u32::MAX - 10;
        assert!(order_key(now, 5) > order_key(now, u32::MAX - 1));
        assert!(order_key(now, now - 3) < 0);
    }
}
