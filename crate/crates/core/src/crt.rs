//! Residue arithmetic over a set of pairwise-coprime moduli.

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

use crate::channel_select::Prng;
use crate::error::{Error, Result};
use crate::primes;

/// Arbitrary-precision nonnegative integer.
pub type Natural = BigUint;

/// `ceil(log2 q)` for `q >= 1`.
pub fn ceil_log2(q: &Natural) -> u64 {
    if q.is_zero() {
        return 0;
    }
    (q - 1u32).bits()
}

/// Pairwise-coprime moduli with their CRT reconstruction basis.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModuliSet {
    moduli: Vec<Natural>,
    bit_lengths: Vec<u64>,
    byte_widths: Vec<usize>,
    product: Natural,
    // basis[i] ≡ 1 (mod q_i) and ≡ 0 (mod q_j), j ≠ i
    basis: Vec<Natural>,
}

impl ModuliSet {
    pub fn new(moduli: Vec<Natural>) -> Result<Self> {
        if moduli.is_empty() {
            return Err(Error::BadParameters("empty moduli set".into()));
        }
        for (i, q) in moduli.iter().enumerate() {
            if q <= &Natural::one() {
                return Err(Error::BadParameters(format!("modulus {q} is not above 1")));
            }
            for p in &moduli[..i] {
                if !p.gcd(q).is_one() {
                    return Err(Error::NotCoprime(p.to_string(), q.to_string()));
                }
            }
        }

        let product: Natural = moduli.iter().product();
        let mut basis = Vec::with_capacity(moduli.len());
        for q in &moduli {
            let cofactor = &product / q;
            let (_, u, _) = ext_gcd(&(&cofactor % q), q)?;
            let inverse = u.mod_floor(&BigInt::from(q.clone()));
            let inverse = inverse.to_biguint().expect("mod_floor is nonnegative");
            basis.push((cofactor * inverse) % &product);
        }

        let bit_lengths: Vec<u64> = moduli.iter().map(ceil_log2).collect();
        let byte_widths = bit_lengths
            .iter()
            .map(|&l| l.div_ceil(8) as usize)
            .collect();
        Ok(ModuliSet {
            moduli,
            bit_lengths,
            byte_widths,
            product,
            basis,
        })
    }

    pub fn moduli(&self) -> &[Natural] {
        &self.moduli
    }

    pub fn bit_lengths(&self) -> &[u64] {
        &self.bit_lengths
    }

    pub fn byte_widths(&self) -> &[usize] {
        &self.byte_widths
    }

    pub fn product(&self) -> &Natural {
        &self.product
    }

    pub fn len(&self) -> usize {
        self.moduli.len()
    }

    pub fn is_empty(&self) -> bool {
        self.moduli.is_empty()
    }

    /// Total residue bits, the sum of `ceil(log2 q_i)`.
    pub fn total_bits(&self) -> u64 {
        self.bit_lengths.iter().sum()
    }

    /// Whether every `bits`-bit value has a unique residue vector.
    pub fn covers(&self, bits: u64) -> bool {
        self.product.bits() > bits
    }

    /// The moduli at `indices`, in that order, as a new set.
    pub fn subset(&self, indices: impl IntoIterator<Item = usize>) -> Result<ModuliSet> {
        let picked = indices
            .into_iter()
            .map(|i| {
                self.moduli.get(i).cloned().ok_or(Error::SizeMismatch {
                    expected: self.moduli.len(),
                    actual: i + 1,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        ModuliSet::new(picked)
    }
}

/// Residues index-aligned with a [`ModuliSet`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResidueVector(pub Vec<Natural>);

impl ResidueVector {
    pub fn residues(&self) -> &[Natural] {
        &self.0
    }
}

pub fn crt_split(x: &Natural, moduli: &ModuliSet) -> Result<ResidueVector> {
    if x >= moduli.product() {
        return Err(Error::InputOutOfRange);
    }
    Ok(ResidueVector(
        moduli.moduli().iter().map(|q| x % q).collect(),
    ))
}

/// The unique value below the moduli product with the given residues.
pub fn crt_combine(residues: &ResidueVector, moduli: &ModuliSet) -> Result<Natural> {
    if residues.0.len() != moduli.len() {
        return Err(Error::SizeMismatch {
            expected: moduli.len(),
            actual: residues.0.len(),
        });
    }
    let mut acc = Natural::zero();
    for (index, ((r, q), b)) in residues
        .0
        .iter()
        .zip(moduli.moduli())
        .zip(&moduli.basis)
        .enumerate()
    {
        if r >= q {
            return Err(Error::ResidueOutOfRange { index });
        }
        acc += r * b;
    }
    Ok(acc % moduli.product())
}

/// Extended Euclid: `(g, u, v)` with `g = gcd(a, b) = u*a + v*b`.
pub fn ext_gcd(a: &Natural, b: &Natural) -> Result<(Natural, BigInt, BigInt)> {
    if a.is_zero() && b.is_zero() {
        return Err(Error::BothZero);
    }
    let (mut old_r, mut r) = (BigInt::from(a.clone()), BigInt::from(b.clone()));
    let (mut old_s, mut s) = (BigInt::one(), BigInt::zero());
    let (mut old_t, mut t) = (BigInt::zero(), BigInt::one());
    while !r.is_zero() {
        let q = &old_r / &r;
        let next_r = &old_r - &q * &r;
        old_r = std::mem::replace(&mut r, next_r);
        let next_s = &old_s - &q * &s;
        old_s = std::mem::replace(&mut s, next_s);
        let next_t = &old_t - &q * &t;
        old_t = std::mem::replace(&mut t, next_t);
    }
    debug_assert!(!old_r.is_negative());
    let (_, g) = old_r.into_parts();
    Ok((g, old_s, old_t))
}

/// Bit length used for every modulus when splitting `superblock_bits`
/// across `channels` moduli: `ceil(N/S) + 1`.
pub fn modulus_bits(superblock_bits: u64, channels: usize) -> u64 {
    superblock_bits.div_ceil(channels as u64) + 1
}

/// `count` distinct primes of bit length `ceil(N/S) + 1`, drawn from the
/// generator seeded with `seed`.
///
/// Any `S` of them multiply to at least `2^(S*ceil(N/S)) >= 2^N`, so
/// `count > S` (static assignment) keeps every `S`-subset sufficient.
pub fn gen_moduli_for(
    superblock_bits: u64,
    channels: usize,
    count: usize,
    seed: u64,
) -> Result<ModuliSet> {
    if channels == 0 || count < channels {
        return Err(Error::BadParameters(format!(
            "need at least {channels} moduli, asked for {count}"
        )));
    }
    if superblock_bits < 8 {
        return Err(Error::BadParameters(
            "superblock must be at least 8 bits".into(),
        ));
    }
    let bits = modulus_bits(superblock_bits, channels);
    let mut prng = Prng::new(seed);
    ModuliSet::new(primes::generate_primes(bits, count, &mut prng)?)
}

/// `S` distinct primes sized so their product covers `N` bits.
pub fn gen_moduli(superblock_bits: u64, channels: usize, seed: u64) -> Result<ModuliSet> {
    gen_moduli_for(superblock_bits, channels, channels, seed)
}
