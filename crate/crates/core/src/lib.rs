//! Multi-channel transmission of block-cipher output.
//!
//! Plaintext is cut into `N`-bit superblocks and encrypted with AES-128 in
//! CBC mode. Each ciphertext superblock, read as an integer, is reduced
//! modulo `S` pairwise-coprime moduli and the residues travel on `S` of `A`
//! available channels chosen by a generator both sides share. The other
//! channels carry random cells of the same width. The receiver recombines
//! the residues with the Chinese remainder theorem and decrypts.
//!
//! Modules, bottom-up:
//!
//! - [`crt`] and [`primes`]: residue arithmetic and moduli generation
//! - [`channel_select`]: the shared generator and channel/moduli assignment
//! - [`cipher`]: superblock CBC, padding, integer conversion
//! - [`scheme`] and [`keyfile`]: setup, sender/receiver sessions, key files
//! - [`transport`] and [`transfer`]: cell streams over memory or TCP
//! - [`analysis`]: bandwidth, channel-count and distinguisher analyses

pub mod analysis;
pub mod channel_select;
pub mod cipher;
pub mod crt;
pub mod error;
pub mod keyfile;
pub mod primes;
pub mod scheme;
pub mod transfer;
pub mod transport;

pub use channel_select::{AssignmentMode, ChannelId, Prng};
pub use cipher::{CipherId, CipherSuite, SuperBlock};
pub use crt::{crt_combine, crt_split, gen_moduli, ModuliSet, Natural, ResidueVector};
pub use error::{Error, Result};
pub use keyfile::{deserialize_config, serialize_config};
pub use scheme::{setup, ChannelPacket, Receiver, Sender, SetupConfig, SetupParams};
