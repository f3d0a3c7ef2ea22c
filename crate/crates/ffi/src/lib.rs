//! C ABI over `crtsplit`.
//!
//! Handles are opaque heap objects released with their `_free` function.
//! Every fallible call returns a [`CrtsplitStatus`]; the message of the
//! most recent failure on the calling thread is available from
//! [`crtsplit_last_error`]. Output buffers follow one convention: the
//! caller passes capacity, the library writes the length used (or needed,
//! with `CRTSPLIT_STATUS_BUFFER_TOO_SMALL`).

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use crtsplit::analysis::bandwidth_loss;
use crtsplit::scheme::ChannelPacket;
use crtsplit::{
    crt_combine, crt_split, deserialize_config, serialize_config, setup, AssignmentMode, ChannelId,
    CipherId, Error, ModuliSet, Natural, ResidueVector, SetupConfig, SetupParams, SuperBlock,
};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CrtsplitStatus {
    Ok = 0,
    NullPointer = 1,
    BadParameters = 2,
    Transport = 3,
    Integrity = 4,
    KeyFile = 5,
    BufferTooSmall = 6,
    Panic = 7,
}

pub const CRTSPLIT_MODE_DYNAMIC: u8 = 0;
pub const CRTSPLIT_MODE_STATIC: u8 = 1;

/// A key: cipher, channel counts, seed and moduli.
pub struct CrtsplitConfig(SetupConfig);

pub struct CrtsplitSender(crtsplit::Sender);

pub struct CrtsplitReceiver(crtsplit::Receiver);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: String) {
    let message = CString::new(message.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(message));
}

fn status_of(e: &Error) -> CrtsplitStatus {
    match e {
        Error::BadMagic
        | Error::BadVersion(_)
        | Error::Truncated
        | Error::InvariantViolation(_) => CrtsplitStatus::KeyFile,
        e if e.is_integrity() => CrtsplitStatus::Integrity,
        e if e.is_transport() => CrtsplitStatus::Transport,
        _ => CrtsplitStatus::BadParameters,
    }
}

struct Failure(CrtsplitStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(CrtsplitStatus::NullPointer, format!("{what} is null"))
}

fn guard(body: impl FnOnce() -> Result<(), Failure>) -> CrtsplitStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => CrtsplitStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_last_error(message);
            status
        }
        Err(_) => {
            set_last_error("panic inside crtsplit".into());
            CrtsplitStatus::Panic
        }
    }
}

unsafe fn input<'a>(data: *const u8, len: usize, what: &str) -> Result<&'a [u8], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if data.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts(data, len))
}

/// Copies `bytes` into a caller buffer, reporting the length either way.
unsafe fn output(
    bytes: &[u8],
    out: *mut u8,
    capacity: usize,
    written: *mut usize,
) -> Result<(), Failure> {
    if written.is_null() {
        return Err(null("written"));
    }
    *written = bytes.len();
    if bytes.len() > capacity {
        return Err(Failure(
            CrtsplitStatus::BufferTooSmall,
            format!("need {} bytes, have {capacity}", bytes.len()),
        ));
    }
    if !bytes.is_empty() {
        if out.is_null() {
            return Err(null("out"));
        }
        ptr::copy_nonoverlapping(bytes.as_ptr(), out, bytes.len());
    }
    Ok(())
}

/// Fails with `BUFFER_TOO_SMALL` before any state changes.
unsafe fn reserve(needed: usize, capacity: usize, written: *mut usize) -> Result<(), Failure> {
    if needed <= capacity {
        return Ok(());
    }
    if !written.is_null() {
        *written = needed;
    }
    Err(Failure(
        CrtsplitStatus::BufferTooSmall,
        format!("need {needed} bytes, have {capacity}"),
    ))
}

unsafe fn store<T>(slot: *mut *mut T, value: T) -> Result<(), Failure> {
    if slot.is_null() {
        return Err(null("out"));
    }
    *slot = Box::into_raw(Box::new(value));
    Ok(())
}

/// Message for the last failure on this thread, or null. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn crtsplit_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |m| m.as_ptr()))
}

/// Runs the setup phase. `mode` is `CRTSPLIT_MODE_DYNAMIC` or
/// `CRTSPLIT_MODE_STATIC`; key and IV are 16 bytes each.
///
/// # Safety
/// `key` and `iv` must point to `key_len`/`iv_len` readable bytes and `out`
/// must be writable.
#[no_mangle]
pub unsafe extern "C" fn crtsplit_config_new(
    available: u16,
    used: u16,
    multiplier: u16,
    seed: u64,
    mode: u8,
    key: *const u8,
    key_len: usize,
    iv: *const u8,
    iv_len: usize,
    out: *mut *mut CrtsplitConfig,
) -> CrtsplitStatus {
    guard(|| {
        let mode = match mode {
            CRTSPLIT_MODE_DYNAMIC => AssignmentMode::Dynamic,
            CRTSPLIT_MODE_STATIC => AssignmentMode::Static,
            other => {
                return Err(Failure(
                    CrtsplitStatus::BadParameters,
                    format!("unknown mode {other}"),
                ))
            }
        };
        let cfg = setup(&SetupParams {
            cipher: CipherId::Aes128,
            key: input(key, key_len, "key")?,
            iv: input(iv, iv_len, "iv")?,
            available,
            used,
            multiplier,
            seed,
            mode,
        })?;
        store(out, CrtsplitConfig(cfg))
    })
}

/// Parses a key file image.
///
/// # Safety
/// `data` must point to `len` readable bytes and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn crtsplit_config_from_bytes(
    data: *const u8,
    len: usize,
    out: *mut *mut CrtsplitConfig,
) -> CrtsplitStatus {
    guard(|| {
        let cfg = deserialize_config(input(data, len, "data")?)?;
        store(out, CrtsplitConfig(cfg))
    })
}

/// Writes the key file image.
///
/// # Safety
/// `cfg` must come from this library; `out` must hold `capacity` bytes.
#[no_mangle]
pub unsafe extern "C" fn crtsplit_config_serialize(
    cfg: *const CrtsplitConfig,
    out: *mut u8,
    capacity: usize,
    written: *mut usize,
) -> CrtsplitStatus {
    guard(|| {
        let cfg = cfg.as_ref().ok_or_else(|| null("cfg"))?;
        output(&serialize_config(&cfg.0), out, capacity, written)
    })
}

/// # Safety
/// `cfg` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn crtsplit_config_free(cfg: *mut CrtsplitConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Plaintext bytes per superblock, or 0 for a null handle.
///
/// # Safety
/// `cfg` must be null or come from this library.
#[no_mangle]
pub unsafe extern "C" fn crtsplit_config_superblock_bytes(cfg: *const CrtsplitConfig) -> usize {
    cfg.as_ref().map_or(0, |c| c.0.superblock_bytes())
}

/// Number of channels `A`, or 0 for a null handle.
///
/// # Safety
/// `cfg` must be null or come from this library.
#[no_mangle]
pub unsafe extern "C" fn crtsplit_config_channels(cfg: *const CrtsplitConfig) -> u16 {
    cfg.as_ref().map_or(0, |c| c.0.available())
}

/// Cell width of one channel, or 0 when out of range.
///
/// # Safety
/// `cfg` must be null or come from this library.
#[no_mangle]
pub unsafe extern "C" fn crtsplit_config_cell_width(
    cfg: *const CrtsplitConfig,
    channel: u16,
) -> usize {
    cfg.as_ref()
        .and_then(|c| c.0.cell_widths().get(usize::from(channel)).copied())
        .unwrap_or(0)
}

/// Sum of all cell widths: the bytes one superblock occupies on the wire.
///
/// # Safety
/// `cfg` must be null or come from this library.
#[no_mangle]
pub unsafe extern "C" fn crtsplit_config_frame_bytes(cfg: *const CrtsplitConfig) -> usize {
    cfg.as_ref().map_or(0, |c| c.0.cell_widths().iter().sum())
}

/// # Safety
/// `cfg` must come from this library; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn crtsplit_sender_new(
    cfg: *const CrtsplitConfig,
    out: *mut *mut CrtsplitSender,
) -> CrtsplitStatus {
    guard(|| {
        let cfg = cfg.as_ref().ok_or_else(|| null("cfg"))?;
        store(out, CrtsplitSender(crtsplit::Sender::new(cfg.0.clone())))
    })
}

/// # Safety
/// `sender` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn crtsplit_sender_free(sender: *mut CrtsplitSender) {
    if !sender.is_null() {
        drop(Box::from_raw(sender));
    }
}

/// Encrypts and splits one superblock. `plaintext_len` must equal the
/// superblock size; the output is every channel's cell concatenated in
/// channel order (`crtsplit_config_frame_bytes` long).
///
/// # Safety
/// Pointers must be valid for the given lengths.
#[no_mangle]
pub unsafe extern "C" fn crtsplit_sender_process(
    sender: *mut CrtsplitSender,
    plaintext: *const u8,
    plaintext_len: usize,
    out: *mut u8,
    capacity: usize,
    written: *mut usize,
) -> CrtsplitStatus {
    guard(|| {
        let sender = sender.as_mut().ok_or_else(|| null("sender"))?;
        let block = SuperBlock(input(plaintext, plaintext_len, "plaintext")?.to_vec());
        reserve(
            sender.0.config().cell_widths().iter().sum(),
            capacity,
            written,
        )?;
        let packets = sender.0.process_superblock(&block)?;
        let frame: Vec<u8> = packets.into_iter().flat_map(|p| p.payload).collect();
        output(&frame, out, capacity, written)
    })
}

/// # Safety
/// `cfg` must come from this library; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn crtsplit_receiver_new(
    cfg: *const CrtsplitConfig,
    out: *mut *mut CrtsplitReceiver,
) -> CrtsplitStatus {
    guard(|| {
        let cfg = cfg.as_ref().ok_or_else(|| null("cfg"))?;
        store(
            out,
            CrtsplitReceiver(crtsplit::Receiver::new(cfg.0.clone())),
        )
    })
}

/// # Safety
/// `receiver` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn crtsplit_receiver_free(receiver: *mut CrtsplitReceiver) {
    if !receiver.is_null() {
        drop(Box::from_raw(receiver));
    }
}

/// Inverse of `crtsplit_sender_process`: takes one frame of all channels'
/// cells and writes the decrypted superblock.
///
/// # Safety
/// Pointers must be valid for the given lengths.
#[no_mangle]
pub unsafe extern "C" fn crtsplit_receiver_process(
    receiver: *mut CrtsplitReceiver,
    frame: *const u8,
    frame_len: usize,
    out: *mut u8,
    capacity: usize,
    written: *mut usize,
) -> CrtsplitStatus {
    guard(|| {
        let receiver = receiver.as_mut().ok_or_else(|| null("receiver"))?;
        let frame = input(frame, frame_len, "frame")?;
        let widths = receiver.0.config().cell_widths();
        let expected: usize = widths.iter().sum();
        if frame.len() != expected {
            return Err(Error::BadWidth {
                expected,
                actual: frame.len(),
            }
            .into());
        }
        reserve(receiver.0.config().superblock_bytes(), capacity, written)?;
        let selected = receiver.0.next_selection()?;
        let mut offset = 0;
        let mut packets = Vec::with_capacity(selected.len());
        for (id, &w) in widths.iter().enumerate() {
            let channel = ChannelId(id as u16);
            if selected.contains(&channel) {
                packets.push(ChannelPacket::received(
                    channel,
                    frame[offset..offset + w].to_vec(),
                ));
            }
            offset += w;
        }
        let block = receiver.0.process_packets(&packets)?;
        output(&block.0, out, capacity, written)
    })
}

unsafe fn moduli_from(moduli: *const u64, count: usize) -> Result<ModuliSet, Failure> {
    if count == 0 {
        return Err(Failure(CrtsplitStatus::BadParameters, "no moduli".into()));
    }
    if moduli.is_null() {
        return Err(null("moduli"));
    }
    let values = slice::from_raw_parts(moduli, count)
        .iter()
        .map(|&q| Natural::from(q))
        .collect();
    Ok(ModuliSet::new(values)?)
}

/// Residues of the big-endian integer `x` modulo each of `count` moduli.
///
/// # Safety
/// `x` must hold `x_len` bytes; `moduli` and `residues` `count` values.
#[no_mangle]
pub unsafe extern "C" fn crtsplit_crt_split(
    x: *const u8,
    x_len: usize,
    moduli: *const u64,
    count: usize,
    residues: *mut u64,
) -> CrtsplitStatus {
    guard(|| {
        let set = moduli_from(moduli, count)?;
        let x = Natural::from_bytes_be(input(x, x_len, "x")?);
        let split = crt_split(&x, &set)?;
        if residues.is_null() {
            return Err(null("residues"));
        }
        let out = slice::from_raw_parts_mut(residues, count);
        for (slot, r) in out.iter_mut().zip(split.0) {
            *slot = r.try_into().expect("residue below a u64 modulus");
        }
        Ok(())
    })
}

/// The unique integer below the moduli product with the given residues,
/// written big-endian and left-padded to exactly `width` bytes.
///
/// # Safety
/// `moduli` and `residues` must hold `count` values; `out` `width` bytes.
#[no_mangle]
pub unsafe extern "C" fn crtsplit_crt_combine(
    residues: *const u64,
    moduli: *const u64,
    count: usize,
    out: *mut u8,
    width: usize,
) -> CrtsplitStatus {
    guard(|| {
        let set = moduli_from(moduli, count)?;
        if residues.is_null() {
            return Err(null("residues"));
        }
        let residues = slice::from_raw_parts(residues, count)
            .iter()
            .map(|&r| Natural::from(r))
            .collect();
        let x = crt_combine(&ResidueVector(residues), &set)?;
        let mut written = 0;
        reserve((x.bits() as usize).div_ceil(8), width, &mut written)?;
        output(
            &crtsplit::cipher::to_fixed_be(&x, width)?,
            out,
            width,
            &mut written,
        )
    })
}

/// Fraction of channel bandwidth lost to byte alignment.
///
/// # Safety
/// `loss` must be writable.
#[no_mangle]
pub unsafe extern "C" fn crtsplit_bandwidth_loss(
    block_bits: u64,
    multiplier: u64,
    channels: u64,
    loss: *mut f64,
) -> CrtsplitStatus {
    guard(|| {
        let report = bandwidth_loss(block_bits, multiplier, channels)?;
        *loss.as_mut().ok_or_else(|| null("loss"))? = report.loss_fraction;
        Ok(())
    })
}
