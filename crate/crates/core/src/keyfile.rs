//! Binary key file holding a [`SetupConfig`]. Big-endian throughout:
//!
//! ```text
//! "CRTM" | version u8 = 1 | cipher_id u8 | key | iv (16)
//! | A u16 | S u16 | L u16 | mode u8 (0 dynamic, 1 static) | seed u64
//! | superblocks_per_session u32 | modulus count u16
//! | count x (byte length u16 | magnitude bytes)
//! ```

use crate::channel_select::AssignmentMode;
use crate::cipher::{CipherId, CipherSuite, BLOCK_BYTES};
use crate::crt::{ModuliSet, Natural};
use crate::error::{Error, Result};
use crate::scheme::SetupConfig;

pub const MAGIC: &[u8; 4] = b"CRTM";
pub const VERSION: u8 = 0x01;

pub fn serialize_config(cfg: &SetupConfig) -> Vec<u8> {
    let mut out = Vec::with_capacity(64 + cfg.moduli().len() * 10);
    out.extend_from_slice(MAGIC);
    out.push(VERSION);
    out.push(cfg.cipher().id() as u8);
    out.extend_from_slice(cfg.cipher().key());
    out.extend_from_slice(cfg.cipher().iv());
    out.extend_from_slice(&cfg.available().to_be_bytes());
    out.extend_from_slice(&cfg.used().to_be_bytes());
    out.extend_from_slice(&cfg.multiplier().to_be_bytes());
    out.push(match cfg.mode() {
        AssignmentMode::Dynamic => 0,
        AssignmentMode::Static => 1,
    });
    out.extend_from_slice(&cfg.seed().to_be_bytes());
    out.extend_from_slice(&cfg.superblocks_per_session().to_be_bytes());
    out.extend_from_slice(&(cfg.moduli().len() as u16).to_be_bytes());
    for q in cfg.moduli().moduli() {
        let bytes = q.to_bytes_be();
        out.extend_from_slice(&(bytes.len() as u16).to_be_bytes());
        out.extend_from_slice(&bytes);
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() < n {
            return Err(Error::Truncated);
        }
        let (head, tail) = self.buf.split_at(n);
        self.buf = tail;
        Ok(head)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_be_bytes(self.array()?))
    }
}

pub fn deserialize_config(bytes: &[u8]) -> Result<SetupConfig> {
    let mut r = Reader { buf: bytes };
    if r.take(4).map_err(|_| Error::BadMagic)? != MAGIC {
        return Err(Error::BadMagic);
    }
    let version = r.u8()?;
    if version != VERSION {
        return Err(Error::BadVersion(version));
    }
    let cipher_byte = r.u8()?;
    let cipher_id = CipherId::from_byte(cipher_byte).ok_or_else(|| {
        Error::InvariantViolation(format!("unknown cipher id {cipher_byte:#04x}"))
    })?;
    let key = r.take(cipher_id.key_len())?;
    let iv = r.take(BLOCK_BYTES)?;
    let available = r.u16()?;
    let used = r.u16()?;
    let multiplier = r.u16()?;
    let mode = match r.u8()? {
        0 => AssignmentMode::Dynamic,
        1 => AssignmentMode::Static,
        other => return Err(Error::InvariantViolation(format!("unknown mode {other}"))),
    };
    let seed = u64::from_be_bytes(r.array()?);
    let per_session = u32::from_be_bytes(r.array()?);
    let count = r.u16()?;
    let mut moduli = Vec::with_capacity(usize::from(count));
    for _ in 0..count {
        let len = usize::from(r.u16()?);
        let magnitude = r.take(len)?;
        if magnitude.first() == Some(&0) {
            return Err(Error::InvariantViolation(
                "modulus has a leading zero byte".into(),
            ));
        }
        moduli.push(Natural::from_bytes_be(magnitude));
    }
    if !r.buf.is_empty() {
        return Err(Error::InvariantViolation(format!(
            "{} trailing bytes",
            r.buf.len()
        )));
    }

    let invalid = |e: Error| Error::InvariantViolation(e.to_string());
    let cipher = CipherSuite::new(cipher_id, key, iv).map_err(invalid)?;
    let moduli = ModuliSet::new(moduli).map_err(invalid)?;
    SetupConfig::from_parts(
        cipher,
        available,
        used,
        multiplier,
        seed,
        mode,
        per_session,
        moduli,
    )
    .map_err(invalid)
}
