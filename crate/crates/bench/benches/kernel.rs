// Licensed under the Apache License, Version 2.0 or the MIT License.
// SPDX-License-Identifier: Apache-2.0 OR MIT
// Copyright kernsim Contributors 2026.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};

use kernsim_bench::{allow_churn, demo_apps, demo_board, sync_demo};
use kernsim_core::harness::{run_board, run_files, RunOptions};
use kernsim_core::hw::{load_register_map, RegisterFile};
use kernsim_core::ids::ProcessId;
use kernsim_core::memory::{AccessKind, Accessor, MemoryRegion, Permission, SimMemory};

fn demo(c: &mut Criterion) {
    let apps = demo_apps();
    c.bench_function("demo_run", |b| {
        b.iter(|| run_files(&demo_board(), black_box(&apps), RunOptions::default()).ticks)
    });
}

fn syscalls(c: &mut Criterion) {
    c.bench_function("allow_churn_1000", |b| {
        b.iter_batched(
            || (sync_demo(), allow_churn(1000)),
            |(board, app)| run_board(board, &[app], RunOptions::default()).ticks,
            BatchSize::SmallInput,
        )
    });
}

fn mpu(c: &mut Criterion) {
    let mut mem = SimMemory::new(65536, 8);
    let pid = ProcessId(0);
    let regions: Vec<MemoryRegion> = (0..8)
        .map(|i| MemoryRegion::new(i * 4096, 4096, Permission::ReadWrite))
        .collect();
    mem.configure_regions(pid, &regions).unwrap();
    c.bench_function("mpu_check_spanning", |b| {
        b.iter(|| mem.check(Accessor::Process(pid), black_box(1000), black_box(20000), AccessKind::Write))
    });
}

fn registers(c: &mut Criterion) {
    let text = std::fs::read_to_string(kernsim_bench::workspace_root().join("boards/maps/alarm.json")).unwrap();
    let mut file = RegisterFile::new(load_register_map(&text).unwrap());
    c.bench_function("field_set_get", |b| {
        b.iter(|| {
            file.field_set("CTRL", "IRQEN", black_box(1)).unwrap();
            file.field_get("CTRL", "IRQEN").unwrap()
        })
    });
}

criterion_group!(benches, demo, syscalls, mpu, registers);
criterion_main!(benches);
