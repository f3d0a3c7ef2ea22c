//! Superblock encryption: CBC over the `L` cipher blocks of each
//! superblock, with the chaining value carried from one superblock to the
//! next.
//!
//! The IV is part of the key and every session restarts the chain from it,
//! so two sessions (or two transfers) under one key that begin with the
//! same plaintext begin with the same ciphertext.

use aes::cipher::generic_array::GenericArray;
use aes::cipher::{BlockDecrypt, BlockEncrypt, KeyInit};
use aes::Aes128;

use crate::crt::Natural;
use crate::error::{Error, Result};

pub const BLOCK_BYTES: usize = 16;
pub const BLOCK_BITS: u64 = 128;

pub type Block = [u8; BLOCK_BYTES];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum CipherId {
    Aes128 = 0x01,
}

impl CipherId {
    pub fn from_byte(byte: u8) -> Option<Self> {
        match byte {
            0x01 => Some(CipherId::Aes128),
            _ => None,
        }
    }

    pub fn key_len(self) -> usize {
        match self {
            CipherId::Aes128 => 16,
        }
    }

    pub fn block_bits(self) -> u64 {
        match self {
            CipherId::Aes128 => BLOCK_BITS,
        }
    }
}

/// Block cipher, key and IV.
#[derive(Clone)]
pub struct CipherSuite {
    id: CipherId,
    key: Vec<u8>,
    iv: Block,
    aes: Aes128,
}

impl std::fmt::Debug for CipherSuite {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CipherSuite")
            .field("id", &self.id)
            .field("key", &"<redacted>")
            .field("iv", &hex::encode(self.iv))
            .finish()
    }
}

impl PartialEq for CipherSuite {
    fn eq(&self, other: &Self) -> bool {
        self.id == other.id && self.key == other.key && self.iv == other.iv
    }
}

impl Eq for CipherSuite {}

impl CipherSuite {
    pub fn new(id: CipherId, key: &[u8], iv: &[u8]) -> Result<Self> {
        if key.len() != id.key_len() {
            return Err(Error::BadLength(format!(
                "key is {} bytes, {:?} needs {}",
                key.len(),
                id,
                id.key_len()
            )));
        }
        let iv: Block = iv.try_into().map_err(|_| {
            Error::BadLength(format!("iv is {} bytes, need {BLOCK_BYTES}", iv.len()))
        })?;
        let aes = Aes128::new(GenericArray::from_slice(key));
        Ok(CipherSuite {
            id,
            key: key.to_vec(),
            iv,
            aes,
        })
    }

    pub fn id(&self) -> CipherId {
        self.id
    }

    pub fn key(&self) -> &[u8] {
        &self.key
    }

    pub fn iv(&self) -> &Block {
        &self.iv
    }

    pub fn block_bits(&self) -> u64 {
        self.id.block_bits()
    }

    pub fn encrypt_block(&self, block: &mut Block) {
        self.aes.encrypt_block(GenericArray::from_mut_slice(block));
    }

    pub fn decrypt_block(&self, block: &mut Block) {
        self.aes.decrypt_block(GenericArray::from_mut_slice(block));
    }

    /// CBC-encrypts every block of `sb`; `chain` enters as the previous
    /// ciphertext block (the IV at session start) and leaves as the last.
    pub fn encrypt_superblock(&self, sb: &SuperBlock, chain: &mut Block) -> Result<SuperBlock> {
        check_blocks(sb)?;
        let mut out = sb.0.clone();
        for chunk in out.chunks_exact_mut(BLOCK_BYTES) {
            let block: &mut Block = chunk.try_into().expect("exact chunk");
            xor_into(block, chain);
            self.encrypt_block(block);
            *chain = *block;
        }
        Ok(SuperBlock(out))
    }

    pub fn decrypt_superblock(&self, sb: &SuperBlock, chain: &mut Block) -> Result<SuperBlock> {
        check_blocks(sb)?;
        let mut out = sb.0.clone();
        for chunk in out.chunks_exact_mut(BLOCK_BYTES) {
            let block: &mut Block = chunk.try_into().expect("exact chunk");
            let ciphertext = *block;
            self.decrypt_block(block);
            xor_into(block, chain);
            *chain = ciphertext;
        }
        Ok(SuperBlock(out))
    }
}

fn check_blocks(sb: &SuperBlock) -> Result<()> {
    if sb.0.is_empty() || !sb.0.len().is_multiple_of(BLOCK_BYTES) {
        return Err(Error::BadLength(format!(
            "superblock of {} bytes is not a whole number of blocks",
            sb.0.len()
        )));
    }
    Ok(())
}

fn xor_into(block: &mut Block, other: &Block) {
    block.iter_mut().zip(other).for_each(|(b, o)| *b ^= o);
}

/// `N/8` bytes read as a big-endian `N`-bit integer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SuperBlock(pub Vec<u8>);

impl SuperBlock {
    pub fn bytes(&self) -> &[u8] {
        &self.0
    }

    pub fn bits(&self) -> u64 {
        self.0.len() as u64 * 8
    }

    pub fn to_natural(&self) -> Natural {
        Natural::from_bytes_be(&self.0)
    }

    /// Big-endian encoding of `x` in exactly `bits / 8` bytes.
    pub fn from_natural(x: &Natural, bits: u64) -> Result<Self> {
        Ok(SuperBlock(to_fixed_be(x, (bits / 8) as usize)?))
    }
}

/// `x` as exactly `width` big-endian bytes.
pub fn to_fixed_be(x: &Natural, width: usize) -> Result<Vec<u8>> {
    if x.bits() > width as u64 * 8 {
        return Err(Error::Overflow {
            bits: width as u64 * 8,
        });
    }
    let mut out = vec![0u8; width];
    if x.bits() > 0 {
        let raw = x.to_bytes_be();
        out[width - raw.len()..].copy_from_slice(&raw);
    }
    Ok(out)
}

/// Widest superblock whose padding length fits in one byte.
pub const MAX_SUPERBLOCK_BYTES: usize = 255;

/// PKCS#7 at superblock width: always appends between 1 and `N/8` bytes,
/// each holding the pad length.
pub fn pad(data: &[u8], superblock_bits: u64) -> Result<Vec<SuperBlock>> {
    let width = (superblock_bits / 8) as usize;
    if width == 0 || width > MAX_SUPERBLOCK_BYTES || !superblock_bits.is_multiple_of(8) {
        return Err(Error::BadLength(format!(
            "superblock of {superblock_bits} bits cannot carry PKCS#7 padding"
        )));
    }
    let fill = width - data.len() % width;
    let mut padded = Vec::with_capacity(data.len() + fill);
    padded.extend_from_slice(data);
    padded.extend(std::iter::repeat_n(fill as u8, fill));
    Ok(padded
        .chunks_exact(width)
        .map(|c| SuperBlock(c.to_vec()))
        .collect())
}

/// Strips the padding added by [`pad`].
pub fn unpad(blocks: &[SuperBlock]) -> Result<Vec<u8>> {
    let last = blocks.last().ok_or(Error::BadPadding)?;
    let width = last.0.len();
    if width == 0 || blocks.iter().any(|b| b.0.len() != width) {
        return Err(Error::BadPadding);
    }
    let fill = padding_len(&last.0)?;
    let total = blocks.len() * width;
    let mut out = Vec::with_capacity(total - fill);
    for b in blocks {
        out.extend_from_slice(&b.0);
    }
    out.truncate(total - fill);
    Ok(out)
}

/// Length of the padding at the end of the final superblock.
pub fn padding_len(last: &[u8]) -> Result<usize> {
    let width = last.len();
    let fill = usize::from(*last.last().ok_or(Error::BadPadding)?);
    if fill == 0 || fill > width || last[width - fill..].iter().any(|&b| usize::from(b) != fill) {
        return Err(Error::BadPadding);
    }
    Ok(fill)
}
