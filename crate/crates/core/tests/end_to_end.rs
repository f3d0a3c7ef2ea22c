mod common;

use std::thread;

use proptest::prelude::*;

use crtsplit::transfer::{receive_message, send_message};
use crtsplit::transport::memory_pair;
use crtsplit::{AssignmentMode, Receiver, Result, Sender, SetupConfig};

use common::config;

fn run(tx_cfg: SetupConfig, rx_cfg: SetupConfig, data: Vec<u8>) -> Result<Vec<u8>> {
    let (mut tx, mut rx) = memory_pair(&tx_cfg.cell_widths())?;
    let sending =
        thread::spawn(move || send_message(&mut Sender::new(tx_cfg), &data, &mut tx, None));
    let got = receive_message(&mut Receiver::new(rx_cfg), &mut rx);
    // a failing receiver drops its queues, so the sender may see Closed
    drop(rx);
    let sent = sending.join().expect("sender thread");
    let got = got?;
    sent?;
    Ok(got)
}

fn mode() -> impl Strategy<Value = AssignmentMode> {
    prop_oneof![Just(AssignmentMode::Dynamic), Just(AssignmentMode::Static)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn receive_inverts_send(
        data in proptest::collection::vec(any::<u8>(), 0..10_000),
        used in 2u16..=10,
        extra in 0usize..3,
        multiplier in 1u16..=4,
        per_session in 1u32..6,
        seed: u64,
        mode in mode(),
    ) {
        let available = [used, used + 1, 2 * used][extra];
        let cfg = config(available, used, multiplier, seed, mode)
            .with_superblocks_per_session(per_session)
            .unwrap();
        prop_assert_eq!(run(cfg.clone(), cfg, data.clone()).unwrap(), data);
    }
}

#[test]
fn mismatched_seed_is_an_integrity_failure() {
    for mode in [AssignmentMode::Dynamic, AssignmentMode::Static] {
        let data = vec![0x5a; 4096];
        let err = run(config(16, 10, 4, 1, mode), config(16, 10, 4, 2, mode), data).unwrap_err();
        assert!(err.is_integrity(), "{mode:?}: {err}");
    }
}

#[test]
fn wrong_cipher_key_garbles_or_fails() {
    let cfg = config(12, 6, 2, 3, AssignmentMode::Dynamic);
    let other = crtsplit::keyfile::deserialize_config(&{
        let mut bytes = crtsplit::serialize_config(&cfg);
        bytes[6] ^= 0x80;
        bytes
    })
    .unwrap();
    let data: Vec<u8> = (0..1000u32).map(|i| i as u8).collect();
    match run(cfg, other, data.clone()) {
        Ok(got) => assert_ne!(got, data),
        Err(e) => assert!(e.is_integrity(), "{e}"),
    }
}
