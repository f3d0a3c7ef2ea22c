//! Primality testing, prime counting by bit length, and seeded prime
//! generation for CRT moduli.

use std::sync::OnceLock;

use num_bigint::BigUint;
use num_traits::{One, Zero};

use crate::channel_select::Prng;
use crate::error::{Error, Result};

/// The first thirteen primes. As Miller-Rabin bases they decide primality
/// exactly below 3,317,044,064,679,887,385,961,981.
const WITNESSES: [u32; 13] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41];

/// Bit lengths up to this are counted exactly with a sieve.
pub const EXACT_COUNT_BITS: u64 = 20;

/// Miller-Rabin with a fixed base set: exact below ~3.3e24, never rejects
/// a prime.
pub fn is_probable_prime(n: &BigUint) -> bool {
    if n < &BigUint::from(2u32) {
        return false;
    }
    for &p in &WITNESSES {
        let p = BigUint::from(p);
        if n == &p {
            return true;
        }
        if (n % &p).is_zero() {
            return false;
        }
    }

    let one = BigUint::one();
    let n_minus_one = n - &one;
    let twos = n_minus_one.trailing_zeros().unwrap_or(0);
    let odd = &n_minus_one >> twos;

    'witness: for &a in &WITNESSES {
        let mut x = BigUint::from(a).modpow(&odd, n);
        if x == one || x == n_minus_one {
            continue;
        }
        for _ in 1..twos {
            x = (&x * &x) % n;
            if x == n_minus_one {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

fn small_prime_counts() -> &'static [u64; EXACT_COUNT_BITS as usize + 1] {
    static COUNTS: OnceLock<[u64; EXACT_COUNT_BITS as usize + 1]> = OnceLock::new();
    COUNTS.get_or_init(|| {
        let limit = 1usize << EXACT_COUNT_BITS;
        let mut composite = vec![false; limit];
        let mut counts = [0u64; EXACT_COUNT_BITS as usize + 1];
        for n in 2..limit {
            if composite[n] {
                continue;
            }
            let bits = usize::BITS - n.leading_zeros();
            counts[bits as usize] += 1;
            let mut multiple = n * n;
            while multiple < limit {
                composite[multiple] = true;
                multiple += n;
            }
        }
        counts
    })
}

/// Logarithmic integral via its convergent series; valid for x > 1.
fn li(x: f64) -> f64 {
    const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
    let ln_x = x.ln();
    let mut term = 1.0;
    let mut sum = 0.0;
    let mut k = 1.0;
    loop {
        term *= ln_x / k;
        let contribution = term / k;
        sum += contribution;
        if contribution < sum * 1e-17 && k > ln_x {
            break;
        }
        k += 1.0;
    }
    EULER_GAMMA + ln_x.ln() + sum
}

/// Number of primes `p` with `2^(bits-1) <= p < 2^bits`.
///
/// Exact up to [`EXACT_COUNT_BITS`]; above that the logarithmic-integral
/// estimate, saturating once it leaves `f64` range.
pub fn primes_with_bit_length(bits: u64) -> u64 {
    if bits <= EXACT_COUNT_BITS {
        return small_prime_counts()[bits as usize];
    }
    if bits > 1000 {
        return u64::MAX;
    }
    let high = 2f64.powi(bits as i32);
    let estimate = li(high) - li(high / 2.0);
    if estimate >= u64::MAX as f64 {
        u64::MAX
    } else {
        estimate as u64
    }
}

/// Draws an odd candidate with exactly `bits` bits (top bit set).
///
/// `ceil(bits/64)` generator outputs are concatenated most significant
/// first and truncated to `bits` bits. Two-bit candidates are 2 or 3.
fn draw_candidate(prng: &mut Prng, bits: u64) -> BigUint {
    if bits == 2 {
        return BigUint::from(2 + (prng.next_u64() >> 63));
    }
    let words = bits.div_ceil(64);
    let mut candidate = BigUint::zero();
    for _ in 0..words {
        candidate = (candidate << 64u32) | BigUint::from(prng.next_u64());
    }
    let mask = (BigUint::one() << bits) - 1u32;
    candidate &= mask;
    candidate.set_bit(bits - 1, true);
    candidate.set_bit(0, true);
    candidate
}

/// `count` distinct primes of exactly `bits` bits, in draw order.
pub fn generate_primes(bits: u64, count: usize, prng: &mut Prng) -> Result<Vec<BigUint>> {
    if bits < 2 {
        return Err(Error::BadParameters(format!("no primes have {bits} bits")));
    }
    if primes_with_bit_length(bits) < count as u64 {
        return Err(Error::NotEnoughPrimes {
            bits,
            needed: count,
        });
    }
    let mut primes: Vec<BigUint> = Vec::with_capacity(count);
    while primes.len() < count {
        let candidate = draw_candidate(prng, bits);
        if !primes.contains(&candidate) && is_probable_prime(&candidate) {
            primes.push(candidate);
        }
    }
    Ok(primes)
}

/// Plain trial division, used by tests as an independent check.
pub fn is_prime_by_trial_division(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2u64;
    while d * d <= n {
        if n.is_multiple_of(d) {
            return false;
        }
        d += 1;
    }
    true
}
