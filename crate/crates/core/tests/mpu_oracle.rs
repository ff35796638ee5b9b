// Licensed under the Apache License, Version 2.0 or the MIT License.
// SPDX-License-Identifier: Apache-2.0 OR MIT
// Copyright kernsim Contributors 2026.

mod common;

use proptest::prelude::*;

use common::criteria::{mpu_oracle, SPACE};
use kernsim_core::ids::ProcessId;
use kernsim_core::memory::{AccessKind, Accessor, MemoryError, MemoryRegion, Permission, SimMemory};

#[test]
fn exhaustive_accesses_match_the_oracle() {
    common::criteria::c4_mpu_oracle().unwrap();
}

fn region() -> impl Strategy<Value = MemoryRegion> {
    (0..SPACE, 0..=SPACE, 0usize..3).prop_map(|(base, len, p)| {
        let perm = [Permission::None, Permission::Read, Permission::ReadWrite][p];
        MemoryRegion::new(base, len.min(SPACE - base), perm)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2_000))]

    #[test]
    fn random_accesses(
        regions in prop::collection::vec(region(), 0..=8),
        base in 0..SPACE + 8,
        len in 0..SPACE + 8,
        write in any::<bool>(),
    ) {
        let mut mem = SimMemory::new(SPACE, 8);
        let pid = ProcessId(3);
        mem.configure_regions(pid, &regions).unwrap();
        let kind = if write { AccessKind::Write } else { AccessKind::Read };
        let (allowed, oob) = mpu_oracle(&regions, base, len, kind);
        let got = mem.check(Accessor::Process(pid), base, len, kind);
        prop_assert_eq!(got.is_ok(), allowed);
        prop_assert_eq!(matches!(got, Err(MemoryError::OutOfBounds { .. })), oob);
    }
}

#[test]
fn region_limit_is_enforced() {
    let mut mem = SimMemory::new(SPACE, 2);
    let r = MemoryRegion::new(0, 8, Permission::Read);
    assert!(matches!(
        mem.configure_regions(ProcessId(0), &[r, r, r]),
        Err(MemoryError::TooManyRegions { .. })
    ));
    assert!(mem.configure_regions(ProcessId(0), &[r, r]).is_ok());
}

#[test]
fn kernel_bypasses_regions() {
    let mut mem = SimMemory::new(SPACE, 8);
    mem.write(Accessor::Kernel, 10, &[1, 2, 3]).unwrap();
    assert_eq!(mem.read(Accessor::Kernel, 10, 3).unwrap(), vec![1, 2, 3]);
    assert!(mem.check(Accessor::Process(ProcessId(9)), 10, 1, AccessKind::Read).is_err());
}

#[test]
fn adjacent_regions_cover_a_straddling_access() {
    let mut mem = SimMemory::new(SPACE, 8);
    let pid = ProcessId(1);
    mem.configure_regions(
        pid,
        &[
            MemoryRegion::new(0, 16, Permission::ReadWrite),
            MemoryRegion::new(16, 16, Permission::ReadWrite),
        ],
    )
    .unwrap();
    assert!(mem.check(Accessor::Process(pid), 12, 8, AccessKind::Write).is_ok());
    assert!(mem.check(Accessor::Process(pid), 28, 8, AccessKind::Read).is_err());
}
