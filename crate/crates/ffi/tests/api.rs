use std::ffi::CStr;
use std::ptr;

use crtsplit_ffi::*;

const KEY: [u8; 16] = [0x11; 16];
const IV: [u8; 16] = [0x22; 16];

fn new_config(
    available: u16,
    used: u16,
    multiplier: u16,
    seed: u64,
    mode: u8,
) -> *mut CrtsplitConfig {
    let mut cfg = ptr::null_mut();
    let status = unsafe {
        crtsplit_config_new(
            available,
            used,
            multiplier,
            seed,
            mode,
            KEY.as_ptr(),
            16,
            IV.as_ptr(),
            16,
            &mut cfg,
        )
    };
    assert_eq!(status, CrtsplitStatus::Ok, "{}", last_error());
    cfg
}

fn last_error() -> String {
    let p = crtsplit_last_error();
    if p.is_null() {
        return String::new();
    }
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn sender_receiver_round_trip() {
    for mode in [CRTSPLIT_MODE_DYNAMIC, CRTSPLIT_MODE_STATIC] {
        let cfg = new_config(16, 10, 4, 42, mode);
        unsafe {
            assert_eq!(crtsplit_config_channels(cfg), 16);
            assert_eq!(crtsplit_config_superblock_bytes(cfg), 64);
            assert_eq!(crtsplit_config_cell_width(cfg, 0), 7);
            assert_eq!(crtsplit_config_cell_width(cfg, 16), 0);
            assert_eq!(crtsplit_config_frame_bytes(cfg), 16 * 7);

            let (mut tx, mut rx) = (ptr::null_mut(), ptr::null_mut());
            assert_eq!(crtsplit_sender_new(cfg, &mut tx), CrtsplitStatus::Ok);
            assert_eq!(crtsplit_receiver_new(cfg, &mut rx), CrtsplitStatus::Ok);
            for round in 0..5u8 {
                let plain: Vec<u8> = (0..64).map(|i| i ^ round).collect();
                let mut frame = vec![0u8; 112];
                let mut written = 0;
                let s = crtsplit_sender_process(
                    tx,
                    plain.as_ptr(),
                    64,
                    frame.as_mut_ptr(),
                    frame.len(),
                    &mut written,
                );
                assert_eq!(s, CrtsplitStatus::Ok, "{}", last_error());
                assert_eq!(written, 112);
                let mut back = vec![0u8; 64];
                let s = crtsplit_receiver_process(
                    rx,
                    frame.as_ptr(),
                    112,
                    back.as_mut_ptr(),
                    64,
                    &mut written,
                );
                assert_eq!(s, CrtsplitStatus::Ok, "{}", last_error());
                assert_eq!((written, &back), (64, &plain));
            }
            crtsplit_sender_free(tx);
            crtsplit_receiver_free(rx);
            crtsplit_config_free(cfg);
        }
    }
}

#[test]
fn small_buffers_report_the_needed_size() {
    let cfg = new_config(12, 6, 1, 1, CRTSPLIT_MODE_DYNAMIC);
    unsafe {
        let mut tx = ptr::null_mut();
        crtsplit_sender_new(cfg, &mut tx);
        let mut frame = [0u8; 4];
        let mut written = 0;
        let s = crtsplit_sender_process(
            tx,
            [0u8; 16].as_ptr(),
            16,
            frame.as_mut_ptr(),
            4,
            &mut written,
        );
        assert_eq!(s, CrtsplitStatus::BufferTooSmall);
        assert_eq!(written, crtsplit_config_frame_bytes(cfg));

        let mut image = [0u8; 8];
        let s = crtsplit_config_serialize(cfg, image.as_mut_ptr(), image.len(), &mut written);
        assert_eq!(s, CrtsplitStatus::BufferTooSmall);
        let mut image = vec![0u8; written];
        let s = crtsplit_config_serialize(cfg, image.as_mut_ptr(), image.len(), &mut written);
        assert_eq!(s, CrtsplitStatus::Ok);
        assert_eq!(&image[..4], b"CRTM");

        let mut parsed = ptr::null_mut();
        assert_eq!(
            crtsplit_config_from_bytes(image.as_ptr(), image.len(), &mut parsed),
            CrtsplitStatus::Ok
        );
        image[0] = b'X';
        let mut bad = ptr::null_mut();
        assert_eq!(
            crtsplit_config_from_bytes(image.as_ptr(), image.len(), &mut bad),
            CrtsplitStatus::KeyFile
        );
        assert!(bad.is_null());
        assert!(last_error().contains("magic"), "{}", last_error());

        crtsplit_sender_free(tx);
        crtsplit_config_free(parsed);
        crtsplit_config_free(cfg);
    }
}

#[test]
fn error_codes() {
    let mut cfg = ptr::null_mut();
    unsafe {
        let s = crtsplit_config_new(
            8,
            9,
            1,
            0,
            CRTSPLIT_MODE_DYNAMIC,
            KEY.as_ptr(),
            16,
            IV.as_ptr(),
            16,
            &mut cfg,
        );
        assert_eq!(s, CrtsplitStatus::BadParameters);
        assert!(!last_error().is_empty());
        let s = crtsplit_config_new(8, 4, 1, 0, 9, KEY.as_ptr(), 16, IV.as_ptr(), 16, &mut cfg);
        assert_eq!(s, CrtsplitStatus::BadParameters);
        let s = crtsplit_config_new(8, 4, 1, 0, 0, ptr::null(), 16, IV.as_ptr(), 16, &mut cfg);
        assert_eq!(s, CrtsplitStatus::NullPointer);
        assert!(cfg.is_null());
        assert_eq!(
            crtsplit_sender_new(ptr::null(), &mut ptr::null_mut()),
            CrtsplitStatus::NullPointer
        );
        crtsplit_config_free(ptr::null_mut());
    }

    // a receiver whose key differs from the sender's sees out-of-range residues
    let (a, b) = (
        new_config(16, 10, 4, 1, CRTSPLIT_MODE_DYNAMIC),
        new_config(16, 10, 4, 2, CRTSPLIT_MODE_DYNAMIC),
    );
    unsafe {
        let (mut tx, mut rx) = (ptr::null_mut(), ptr::null_mut());
        crtsplit_sender_new(a, &mut tx);
        crtsplit_receiver_new(b, &mut rx);
        let mut frame = vec![0u8; 112];
        let mut back = vec![0u8; 64];
        let mut written = 0;
        let mut statuses = Vec::new();
        for _ in 0..8 {
            crtsplit_sender_process(
                tx,
                [7u8; 64].as_ptr(),
                64,
                frame.as_mut_ptr(),
                112,
                &mut written,
            );
            statuses.push(crtsplit_receiver_process(
                rx,
                frame.as_ptr(),
                112,
                back.as_mut_ptr(),
                64,
                &mut written,
            ));
        }
        assert!(
            statuses.contains(&CrtsplitStatus::Integrity),
            "{statuses:?}"
        );
        crtsplit_sender_free(tx);
        crtsplit_receiver_free(rx);
        crtsplit_config_free(a);
        crtsplit_config_free(b);
    }
}

#[test]
fn crt_on_big_endian_bytes() {
    let moduli = [3u64, 5, 7];
    let mut residues = [0u64; 3];
    unsafe {
        assert_eq!(
            crtsplit_crt_split(
                [23u8].as_ptr(),
                1,
                moduli.as_ptr(),
                3,
                residues.as_mut_ptr()
            ),
            CrtsplitStatus::Ok
        );
        assert_eq!(residues, [2, 3, 2]);
        let mut out = [0xffu8; 4];
        assert_eq!(
            crtsplit_crt_combine(residues.as_ptr(), moduli.as_ptr(), 3, out.as_mut_ptr(), 4),
            CrtsplitStatus::Ok
        );
        assert_eq!(out, [0, 0, 0, 23]);
        let big = [0xffu8; 2];
        assert_eq!(
            crtsplit_crt_split(big.as_ptr(), 2, moduli.as_ptr(), 3, residues.as_mut_ptr()),
            CrtsplitStatus::Integrity
        );
        assert_eq!(
            crtsplit_crt_split(
                big.as_ptr(),
                2,
                [4u64, 6].as_ptr(),
                2,
                residues.as_mut_ptr()
            ),
            CrtsplitStatus::BadParameters
        );
        let moduli = [251u64, 253];
        assert_eq!(
            crtsplit_crt_combine([1u64, 2].as_ptr(), moduli.as_ptr(), 2, out.as_mut_ptr(), 1),
            CrtsplitStatus::BufferTooSmall
        );

        let mut loss = 0.0;
        assert_eq!(
            crtsplit_bandwidth_loss(128, 1, 10, &mut loss),
            CrtsplitStatus::Ok
        );
        assert_eq!(loss, 0.1875);
        assert_eq!(
            crtsplit_bandwidth_loss(128, 0, 10, &mut loss),
            CrtsplitStatus::BadParameters
        );
    }
}

#[test]
fn header_declares_every_export() {
    let header =
        std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/crtsplit.h"))
            .unwrap();
    for name in [
        "crtsplit_last_error",
        "crtsplit_config_new",
        "crtsplit_config_from_bytes",
        "crtsplit_config_serialize",
        "crtsplit_config_free",
        "crtsplit_sender_process",
        "crtsplit_receiver_process",
        "crtsplit_crt_split",
        "crtsplit_crt_combine",
        "crtsplit_bandwidth_loss",
        "typedef struct CrtsplitConfig CrtsplitConfig",
        "CRTSPLIT_STATUS_INTEGRITY = 4",
    ] {
        assert!(header.contains(name), "{name}");
    }
}
