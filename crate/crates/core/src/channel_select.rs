//! Pseudorandom channel selection shared by both ends of a link.
//!
//! Sender and receiver run the same generator from the same seed, so they
//! pick the same `S` channels out of `A` without exchanging anything.
//!
//! The generator is a plain LCG. Anyone who sees a few outputs can predict
//! the rest, so the selection hides channels only from an observer who
//! cannot recover the seed.

use std::collections::BTreeMap;

use crate::crt::ModuliSet;
use crate::error::{Error, Result};

const LCG_MULTIPLIER: u64 = 6364136223846793005;
const LCG_INCREMENT: u64 = 1442695040888963407;
const MAX_REJECTIONS: usize = 128;

/// XOR masks deriving independent streams from one master seed.
pub const CHANNEL_DOMAIN: u64 = 0x0101_0101_0101_0101;
pub const MODULI_DOMAIN: u64 = 0x0202_0202_0202_0202;
pub const DECOY_DOMAIN: u64 = 0x0303_0303_0303_0303;

/// Full-period 64-bit linear congruential generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Prng {
    state: u64,
}

impl Prng {
    pub fn new(seed: u64) -> Self {
        Prng { state: seed }
    }

    /// Generator for one seed domain of a master seed.
    pub fn for_domain(master_seed: u64, domain: u64) -> Self {
        Prng::new(master_seed ^ domain)
    }

    pub fn state(&self) -> u64 {
        self.state
    }

    /// Advances the state and returns it.
    pub fn next_u64(&mut self) -> u64 {
        self.state = self
            .state
            .wrapping_mul(LCG_MULTIPLIER)
            .wrapping_add(LCG_INCREMENT);
        self.state
    }

    /// Unbiased draw from `[0, bound)` using the high 32 bits of each output.
    ///
    /// Outputs at or above the largest multiple of `bound` that fits in 32
    /// bits are rejected; the loop gives up after 128 rejections.
    pub fn draw_uniform(&mut self, bound: u32) -> Result<u32> {
        if bound == 0 {
            return Err(Error::BadParameters("draw bound must be at least 1".into()));
        }
        let bound = u64::from(bound);
        let limit = ((1u64 << 32) / bound) * bound;
        for _ in 0..MAX_REJECTIONS {
            let high = self.next_u64() >> 32;
            if high < limit {
                return Ok((high % bound) as u32);
            }
        }
        Err(Error::GeneratorExhausted)
    }

    /// Fills `out` with bytes taken from the high 32 bits of successive
    /// outputs; the low bits of an LCG have short periods.
    pub fn fill_bytes(&mut self, out: &mut [u8]) {
        for chunk in out.chunks_mut(4) {
            let word = ((self.next_u64() >> 32) as u32).to_be_bytes();
            chunk.copy_from_slice(&word[..chunk.len()]);
        }
    }
}

/// Index of one of the `A` available channels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ChannelId(pub u16);

impl ChannelId {
    pub fn index(self) -> usize {
        usize::from(self.0)
    }
}

impl std::fmt::Display for ChannelId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Picks `used` distinct channels out of `available`, in order of first draw.
///
/// Draws that repeat an already chosen channel are discarded.
pub fn select_channels(prng: &mut Prng, available: u16, used: u16) -> Result<Vec<ChannelId>> {
    if used == 0 || used > available {
        return Err(Error::BadParameters(format!(
            "cannot select {used} of {available} channels"
        )));
    }
    let mut taken = vec![false; usize::from(available)];
    let mut selected = Vec::with_capacity(usize::from(used));
    while selected.len() < usize::from(used) {
        let id = prng.draw_uniform(u32::from(available))? as usize;
        if !taken[id] {
            taken[id] = true;
            selected.push(ChannelId(id as u16));
        }
    }
    Ok(selected)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AssignmentMode {
    /// `S` moduli, rebound to the selected channels every session.
    Dynamic,
    /// One modulus per available channel, fixed for the life of the key.
    Static,
}

/// Which modulus each selected channel carries residues for.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChannelAssignment {
    selected: Vec<ChannelId>,
    modulus_of: BTreeMap<ChannelId, usize>,
}

impl ChannelAssignment {
    pub fn selected(&self) -> &[ChannelId] {
        &self.selected
    }

    pub fn modulus_of(&self, channel: ChannelId) -> Option<usize> {
        self.modulus_of.get(&channel).copied()
    }

    pub fn is_selected(&self, channel: ChannelId) -> bool {
        self.modulus_of.contains_key(&channel)
    }

    /// Modulus indices in selection order.
    pub fn modulus_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.selected.iter().map(move |c| self.modulus_of[c])
    }
}

/// Binds moduli to the selected channels.
///
/// Static mode needs one modulus per available channel and gives channel
/// `c` modulus `c`; dynamic mode needs exactly one modulus per selected
/// channel and assigns them positionally.
pub fn assign_moduli(
    mode: AssignmentMode,
    moduli: &ModuliSet,
    available: u16,
    selected: &[ChannelId],
) -> Result<ChannelAssignment> {
    let expected = match mode {
        AssignmentMode::Static => usize::from(available),
        AssignmentMode::Dynamic => selected.len(),
    };
    if moduli.len() != expected {
        return Err(Error::SizeMismatch {
            expected,
            actual: moduli.len(),
        });
    }
    let mut modulus_of = BTreeMap::new();
    for (position, &channel) in selected.iter().enumerate() {
        if channel.0 >= available {
            return Err(Error::BadParameters(format!(
                "channel {channel} outside census of {available}"
            )));
        }
        let index = match mode {
            AssignmentMode::Static => channel.index(),
            AssignmentMode::Dynamic => position,
        };
        if modulus_of.insert(channel, index).is_some() {
            return Err(Error::BadParameters(format!(
                "channel {channel} selected twice"
            )));
        }
    }
    Ok(ChannelAssignment {
        selected: selected.to_vec(),
        modulus_of,
    })
}
