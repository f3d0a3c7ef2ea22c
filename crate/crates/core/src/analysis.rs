//! Quantitative and security analyses of the scheme: bandwidth lost to
//! byte-aligned residues, the feasible channel count, residue
//! independence, the distinguishing probability for an adversary who knows
//! the moduli, and the reduction from breaking the residue layer to
//! breaking the cipher.
//!
//! A note on `P(B = b | R = r)`: for a residue `r` modulo `q` and a
//! superblock uniform over `[0, 2^N)`, exactly `floor((2^N - r - 1)/q) + 1`
//! superblocks share that residue, so the conditional probability of any
//! one of them is the reciprocal of that count, close to `q / 2^N` but
//! equal to it only when `q` divides `2^N`.

use std::fmt::Write as _;

use num_integer::Integer;
use num_traits::{One, ToPrimitive};

use crate::cipher::SuperBlock;
use crate::crt::{crt_split, gen_moduli, ModuliSet, Natural, ResidueVector};
use crate::error::{Error, Result};
use crate::primes::primes_with_bit_length;

#[derive(Debug, Clone, PartialEq)]
pub struct BandwidthReport {
    pub superblock_bits: u64,
    pub channels: u64,
    pub bits_per_channel: u64,
    pub bytes_per_channel: u64,
    pub loss_fraction: f64,
}

/// Share of each channel's bytes wasted when `ceil(N/S)` payload bits are
/// carried in whole bytes.
pub fn bandwidth_loss(block_bits: u64, multiplier: u64, channels: u64) -> Result<BandwidthReport> {
    if block_bits == 0 || multiplier == 0 || channels == 0 {
        return Err(Error::BadParameters(
            "bandwidth parameters must be positive".into(),
        ));
    }
    let superblock_bits = block_bits * multiplier;
    let bits_per_channel = superblock_bits.div_ceil(channels);
    let bytes_per_channel = bits_per_channel.div_ceil(8);
    let carried = 8 * bytes_per_channel;
    Ok(BandwidthReport {
        superblock_bits,
        channels,
        bits_per_channel,
        bytes_per_channel,
        loss_fraction: (carried - bits_per_channel) as f64 / carried as f64,
    })
}

/// Largest `S` for which at least `S` primes of bit length
/// `ceil(N/S) + 1` exist, i.e. the most channels the moduli generator
/// can serve for `N`-bit superblocks.
pub fn s_max_estimate(superblock_bits: u64) -> u64 {
    (1..=superblock_bits.max(1))
        .filter(|&s| {
            let bits = superblock_bits.div_ceil(s) + 1;
            primes_with_bit_length(bits) >= s
        })
        .max()
        .unwrap_or(0)
}

/// Joint counts of `(x mod p, x mod q)` over `x` in `[0, pq)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JointTable {
    pub p: u64,
    pub q: u64,
    /// Row-major, `counts[y * q + z]`.
    pub counts: Vec<u32>,
}

impl JointTable {
    pub fn count(&self, y: u64, z: u64) -> u32 {
        self.counts[(y * self.q + z) as usize]
    }

    /// Every cell hit exactly once, so the joint probability `1/(pq)` is
    /// the product of the marginals `1/p` and `1/q`.
    pub fn is_flat(&self) -> bool {
        self.counts.iter().all(|&c| c == 1)
    }
}

/// Largest `p*q` tabulated exhaustively.
pub const INDEPENDENCE_LIMIT: u64 = 1 << 20;

pub fn independence_check(p: u64, q: u64) -> Result<JointTable> {
    if p < 2 || q < 2 {
        return Err(Error::BadParameters("moduli must exceed 1".into()));
    }
    if p.gcd(&q) != 1 {
        return Err(Error::NotCoprime(p.to_string(), q.to_string()));
    }
    let cells = p
        .checked_mul(q)
        .filter(|&c| c <= INDEPENDENCE_LIMIT)
        .ok_or_else(|| Error::BadParameters(format!("{p} * {q} exceeds 2^20")))?;
    let mut counts = vec![0u32; cells as usize];
    // (x mod p, x mod q) stepped alongside x
    let (mut y, mut z) = (0u64, 0u64);
    for _ in 0..cells {
        counts[(y * q + z) as usize] += 1;
        y += 1;
        if y == p {
            y = 0;
        }
        z += 1;
        if z == q {
            z = 0;
        }
    }
    Ok(JointTable { p, q, counts })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistinguisherReport {
    pub superblock_bits: u64,
    /// Sum of `ceil(log2 q_i)`.
    pub total_bits: u64,
    /// `1 - 2^(N - total_bits)`: the share of residue-bit tuples that no
    /// ciphertext below `2^N` produces.
    pub p_d_theoretical: f64,
    /// `(q_i, 2^l_i - q_i)`: each channel's never-used value range.
    pub per_channel_gap: Vec<(Natural, Natural)>,
    pub empirical_detection_rate: Option<f64>,
}

pub fn distinguishability(superblock_bits: u64, moduli: &ModuliSet) -> Result<DistinguisherReport> {
    if !moduli.covers(superblock_bits) {
        return Err(Error::ProductTooSmall {
            bits: superblock_bits,
        });
    }
    let total_bits = moduli.total_bits();
    let exponent = superblock_bits as f64 - total_bits as f64;
    let per_channel_gap = moduli
        .moduli()
        .iter()
        .zip(moduli.bit_lengths())
        .map(|(q, &l)| (q.clone(), (Natural::one() << l) - q))
        .collect();
    Ok(DistinguisherReport {
        superblock_bits,
        total_bits,
        p_d_theoretical: 1.0 - exponent.exp2(),
        per_channel_gap,
        empirical_detection_rate: None,
    })
}

/// Counts cells whose big-endian value is at least `q`, out of all cells.
pub fn invalid_residue_scan(cells: &[u8], width: usize, q: &Natural) -> Result<(u64, u64)> {
    if width == 0 || !cells.len().is_multiple_of(width) {
        return Err(Error::WidthMismatch {
            len: cells.len(),
            width,
        });
    }
    let invalid = cells
        .chunks_exact(width)
        .filter(|c| &Natural::from_bytes_be(c) >= q)
        .count();
    Ok((invalid as u64, (cells.len() / width) as u64))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Real,
    Decoy,
}

/// Labels a channel a decoy as soon as one of its cells is at least the
/// modulus hypothesized for it. Only an adversary holding the right
/// moduli learns anything: with a hypothesis at or above the cell range,
/// nothing is ever flagged.
///
/// `hypothesis[c]` is a guess for channel `c`'s modulus; it need not be
/// coprime to the others.
pub fn channel_classifier(
    transcript: &[Vec<u8>],
    widths: &[usize],
    hypothesis: &[Natural],
) -> Result<Vec<Verdict>> {
    if transcript.len() != widths.len() || transcript.len() != hypothesis.len() {
        return Err(Error::SizeMismatch {
            expected: transcript.len(),
            actual: widths.len().min(hypothesis.len()),
        });
    }
    transcript
        .iter()
        .zip(widths)
        .zip(hypothesis)
        .enumerate()
        .map(|(channel, ((cells, &width), q))| {
            if cells.is_empty() {
                return Err(Error::BadParameters(format!(
                    "channel {channel} has no cells"
                )));
            }
            let (invalid, _) = invalid_residue_scan(cells, width, q)?;
            Ok(if invalid > 0 {
                Verdict::Decoy
            } else {
                Verdict::Real
            })
        })
        .collect()
}

/// Probability a uniformly random `width`-byte cell is a valid residue
/// modulo `q`.
pub fn valid_cell_probability(q: &Natural, width: usize) -> f64 {
    let space = 8 * width as i32;
    let q = q.to_f64().unwrap_or(f64::INFINITY);
    (q / 2f64.powi(space)).min(1.0)
}

/// Fewest cells `k` with `(q / 2^(8w))^k < miss_rate`; `None` when a
/// random cell is always valid.
pub fn cells_to_detect(q: &Natural, width: usize, miss_rate: f64) -> Option<u64> {
    let valid = valid_cell_probability(q, width);
    if valid >= 1.0 {
        return None;
    }
    if valid == 0.0 {
        return Some(1);
    }
    let mut k = (miss_rate.ln() / valid.ln()).floor().max(1.0) as u64;
    while valid.powf(k as f64) >= miss_rate {
        k += 1;
    }
    Some(k)
}

/// Turns any procedure that attacks residue-split traffic into an attack
/// on the bare cipher: split the ciphertext over freshly chosen moduli and
/// hand the residues over.
pub fn cipher_breaker_reduction<T>(
    ciphertext: &SuperBlock,
    channels: usize,
    seed: u64,
    crt_breaker: impl FnOnce(&ModuliSet, &ResidueVector) -> T,
) -> Result<T> {
    let moduli = gen_moduli(ciphertext.bits(), channels, seed)?;
    let residues = crt_split(&ciphertext.to_natural(), &moduli)?;
    Ok(crt_breaker(&moduli, &residues))
}

/// `%.6g`-style rendering: six significant digits, trailing zeros trimmed.
pub fn sig6(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x == 0.0 { "0".into() } else { x.to_string() };
    }
    let sci = format!("{x:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    if !(-4..6).contains(&exp) {
        format!("{}e{exp}", trim_zeros(mantissa))
    } else {
        let decimals = (5 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

pub fn render_bandwidth(block_bits: u64, channels: u64, multipliers: &[u64]) -> Result<String> {
    let mut out = format!("# bandwidth loss, N_B={block_bits} S={channels}\n");
    out.push_str("L\tN\tbits_per_channel\tbytes_per_channel\tloss_fraction\tloss_percent\n");
    for &l in multipliers {
        let r = bandwidth_loss(block_bits, l, channels)?;
        writeln!(
            out,
            "{l}\t{}\t{}\t{}\t{}\t{}",
            r.superblock_bits,
            r.bits_per_channel,
            r.bytes_per_channel,
            sig6(r.loss_fraction),
            sig6(r.loss_fraction * 100.0)
        )
        .expect("string write");
    }
    Ok(out)
}

pub fn render_smax(superblock_bits: &[u64]) -> String {
    let mut out = String::from("# feasible channel count\nN\ts_max\ts_max*log2(N)/N\n");
    for &n in superblock_bits {
        let s = s_max_estimate(n);
        let ratio = s as f64 * (n as f64).log2() / n as f64;
        writeln!(out, "{n}\t{s}\t{}", sig6(ratio)).expect("string write");
    }
    out
}

pub fn render_distinguisher(report: &DistinguisherReport) -> String {
    let mut out = format!(
        "# distinguishability, N={} L_total={}\nP_D\t{}\n",
        report.superblock_bits,
        report.total_bits,
        sig6(report.p_d_theoretical)
    );
    if let Some(rate) = report.empirical_detection_rate {
        writeln!(out, "empirical_detection_rate\t{}", sig6(rate)).expect("string write");
    }
    out.push_str("channel\tmodulus\tbits\tgap\n");
    for (i, (q, gap)) in report.per_channel_gap.iter().enumerate() {
        writeln!(out, "{i}\t{q}\t{}\t{gap}", crate::crt::ceil_log2(q)).expect("string write");
    }
    out
}

pub fn render_independence(table: &JointTable) -> String {
    let min = table.counts.iter().min().copied().unwrap_or(0);
    let max = table.counts.iter().max().copied().unwrap_or(0);
    format!(
        "# residue independence\np\tq\tcells\tmin_count\tmax_count\tflat\n{}\t{}\t{}\t{min}\t{max}\t{}\n",
        table.p,
        table.q,
        table.counts.len(),
        table.is_flat()
    )
}

pub fn render_verdicts(
    transcript: &[Vec<u8>],
    widths: &[usize],
    hypothesis: &[Natural],
    verdicts: &[Verdict],
) -> Result<String> {
    let mut out =
        String::from("# channel classification\nchannel\twidth\tcells\tinvalid\tverdict\n");
    for (c, (((cells, &w), q), v)) in transcript
        .iter()
        .zip(widths)
        .zip(hypothesis)
        .zip(verdicts)
        .enumerate()
    {
        let (invalid, total) = invalid_residue_scan(cells, w, q)?;
        let verdict = match v {
            Verdict::Real => "real",
            Verdict::Decoy => "decoy",
        };
        writeln!(out, "{c}\t{w}\t{total}\t{invalid}\t{verdict}").expect("string write");
    }
    Ok(out)
}
