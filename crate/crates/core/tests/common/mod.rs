#![allow(dead_code)]

use std::net::TcpListener;
use std::sync::atomic::{AtomicU16, Ordering};

use crtsplit::{setup, AssignmentMode, CipherId, SetupConfig, SetupParams};

static NEXT_BASE: AtomicU16 = AtomicU16::new(0);

/// A base port with `count` free consecutive ports after it. The ports are
/// released again before returning, so a racing process can still take
/// them; callers retry on bind failure.
pub fn free_port_base(count: u16) -> u16 {
    let offset = (std::process::id() % 300) as u16 * 100;
    loop {
        let step = NEXT_BASE.fetch_add(count + 1, Ordering::Relaxed);
        let base = 20_000 + (offset + step) % 40_000;
        let held: Result<Vec<_>, _> = (0..count)
            .map(|i| TcpListener::bind(("127.0.0.1", base + i)))
            .collect();
        if held.is_ok() {
            return base;
        }
    }
}

pub fn config(
    available: u16,
    used: u16,
    multiplier: u16,
    seed: u64,
    mode: AssignmentMode,
) -> SetupConfig {
    setup(&SetupParams {
        cipher: CipherId::Aes128,
        key: &[0x2b; 16],
        iv: &[0x7e; 16],
        available,
        used,
        multiplier,
        seed,
        mode,
    })
    .unwrap()
}
