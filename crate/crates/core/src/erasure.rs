//! Systematic Reed-Solomon erasure coding over Z_p.
//!
//! A message of `n` symbols is read as the values at points `0..n` of the
//! unique polynomial of degree `< n`; the codeword is that polynomial
//! evaluated at `0..m`. The first `n` codeword symbols are the message and
//! any `n` symbols determine it.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::algebra::{batch_invert, Scalar};

/// Payload bytes carried by one symbol (one byte short of the field width).
pub const BYTES_PER_SYMBOL: usize = 31;
const LENGTH_HEADER: usize = 8;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ErasureError {
    #[error("code rate {0} must satisfy 0 < rate <= 1")]
    RateOutOfRange(String),
    #[error("codeword length {0} exceeds the supported evaluation domain")]
    CodewordTooLong(usize),
    #[error("message must contain at least one symbol")]
    EmptyMessage,
    #[error("need {needed} fragments, got {got}")]
    InsufficientFragments { needed: usize, got: usize },
    #[error("fragment position {0} appears twice")]
    DuplicatePosition(usize),
    #[error("fragments do not lie on a single codeword")]
    InconsistentFragments,
    #[error("symbols do not hold a packed byte string: {0}")]
    BadPacking(&'static str),
}

/// Code rate `num/den`, the message-to-codeword length ratio.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Rate {
    num: u32,
    den: u32,
}

impl Rate {
    pub const HALF: Rate = Rate { num: 1, den: 2 };
    pub const ONE: Rate = Rate { num: 1, den: 1 };

    pub fn new(num: u32, den: u32) -> Result<Self, ErasureError> {
        if num == 0 || den == 0 || num > den {
            return Err(ErasureError::RateOutOfRange(format!("{num}/{den}")));
        }
        Ok(Rate { num, den })
    }

    pub fn numerator(&self) -> u32 {
        self.num
    }

    pub fn denominator(&self) -> u32 {
        self.den
    }

    /// `ceil(n / rate)`.
    pub fn codeword_len(&self, message_len: usize) -> usize {
        (message_len * self.den as usize).div_ceil(self.num as usize)
    }

    /// Inverse of [`Rate::codeword_len`]. The map is strictly increasing
    /// because `rate <= 1`, so at most one message length matches.
    pub fn message_len(&self, codeword_len: usize) -> Option<usize> {
        let guess = codeword_len * self.num as usize / self.den as usize;
        (guess.saturating_sub(1)..=guess + 1)
            .find(|&n| n >= 1 && self.codeword_len(n) == codeword_len)
    }
}

impl Default for Rate {
    fn default() -> Self {
        Rate::HALF
    }
}

impl fmt::Display for Rate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

impl FromStr for Rate {
    type Err = ErasureError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || ErasureError::RateOutOfRange(s.to_string());
        match s.split_once('/') {
            Some((n, d)) => Rate::new(
                n.trim().parse().map_err(|_| bad())?,
                d.trim().parse().map_err(|_| bad())?,
            ),
            None => Rate::new(s.trim().parse().map_err(|_| bad())?, 1),
        }
    }
}

/// Encodes `msg` into a systematic codeword of length `ceil(len / rate)`.
pub fn encode(msg: &[Scalar], rate: Rate) -> Result<Vec<Scalar>, ErasureError> {
    if msg.is_empty() {
        return Err(ErasureError::EmptyMessage);
    }
    let n = msg.len();
    let m = rate.codeword_len(n);
    if m > u32::MAX as usize {
        return Err(ErasureError::CodewordTooLong(m));
    }
    let mut out = Vec::with_capacity(m);
    out.extend_from_slice(msg);
    if m == n {
        return Ok(out);
    }
    // With points 0..n and targets z >= n every difference z - i lies in
    // 1..m, so one batch of inverses serves all parity symbols.
    let weighted: Vec<Scalar> = consecutive_weights(n)
        .iter()
        .zip(msg)
        .map(|(w, y)| *w * *y)
        .collect();
    let mut inverses: Vec<Scalar> = (1..m as u64).map(Scalar::from_u64).collect();
    batch_invert(&mut inverses);
    let inv = |k: usize| inverses[k - 1];
    // ell(z) = prod_{i<n} (z - i); ell(n) = n!
    let mut ell = (1..=n as u64).fold(Scalar::ONE, |acc, k| acc * Scalar::from_u64(k));
    for z in n..m {
        let sum: Scalar = weighted
            .iter()
            .enumerate()
            .map(|(i, wy)| *wy * inv(z - i))
            .sum();
        out.push(ell * sum);
        if z + 1 < m {
            ell = ell * Scalar::from_u64(z as u64 + 1) * inv(z + 1 - n);
        }
    }
    Ok(out)
}

/// Recovers the `message_len`-symbol message from `(position, symbol)` pairs.
///
/// Any `message_len` distinct positions suffice; extra fragments are checked
/// against the interpolated polynomial.
pub fn decode(
    fragments: &[(usize, Scalar)],
    message_len: usize,
) -> Result<Vec<Scalar>, ErasureError> {
    if message_len == 0 {
        return Err(ErasureError::EmptyMessage);
    }
    let mut frags = fragments.to_vec();
    frags.sort_by_key(|f| f.0);
    for pair in frags.windows(2) {
        if pair[0].0 == pair[1].0 {
            return Err(ErasureError::DuplicatePosition(pair[0].0));
        }
    }
    if frags.len() < message_len {
        return Err(ErasureError::InsufficientFragments {
            needed: message_len,
            got: frags.len(),
        });
    }
    let (basis, extra) = frags.split_at(message_len);
    let xs: Vec<Scalar> = basis.iter().map(|f| Scalar::from_u64(f.0 as u64)).collect();
    let ys: Vec<Scalar> = basis.iter().map(|f| f.1).collect();
    let systematic = basis.iter().enumerate().all(|(i, f)| f.0 == i);
    let weights = if systematic {
        consecutive_weights(message_len)
    } else {
        general_weights(&xs)
    };
    let msg: Vec<Scalar> = if systematic {
        ys.clone()
    } else {
        (0..message_len)
            .map(|z| match basis.binary_search_by_key(&z, |f| f.0) {
                Ok(i) => ys[i],
                Err(_) => interpolate_at(&xs, &ys, &weights, Scalar::from_u64(z as u64)),
            })
            .collect()
    };
    for &(pos, value) in extra {
        if interpolate_at(&xs, &ys, &weights, Scalar::from_u64(pos as u64)) != value {
            return Err(ErasureError::InconsistentFragments);
        }
    }
    Ok(msg)
}

/// Packs bytes into symbols: an 8-byte big-endian length header followed by
/// the data, cut into 31-byte blocks, each block zero-padded and read as a
/// big-endian integer below 2^248.
pub fn pack_bytes(data: &[u8]) -> Vec<Scalar> {
    let mut stream = Vec::with_capacity(LENGTH_HEADER + data.len());
    stream.extend_from_slice(&(data.len() as u64).to_be_bytes());
    stream.extend_from_slice(data);
    stream
        .chunks(BYTES_PER_SYMBOL)
        .map(|chunk| {
            let mut buf = [0u8; 32];
            buf[1..1 + chunk.len()].copy_from_slice(chunk);
            Scalar::from_bytes(&buf).expect("values below 2^248 are canonical")
        })
        .collect()
}

/// Number of symbols [`pack_bytes`] produces for `len` bytes.
pub fn packed_len(len: usize) -> usize {
    (len + LENGTH_HEADER).div_ceil(BYTES_PER_SYMBOL)
}

pub fn unpack_bytes(symbols: &[Scalar]) -> Result<Vec<u8>, ErasureError> {
    let mut stream = Vec::with_capacity(symbols.len() * BYTES_PER_SYMBOL);
    for s in symbols {
        let bytes = s.to_bytes();
        if bytes[0] != 0 {
            return Err(ErasureError::BadPacking("symbol exceeds 31 bytes"));
        }
        stream.extend_from_slice(&bytes[1..]);
    }
    if stream.len() < LENGTH_HEADER {
        return Err(ErasureError::BadPacking("missing length header"));
    }
    let len = u64::from_be_bytes(stream[..LENGTH_HEADER].try_into().unwrap());
    let len = usize::try_from(len).map_err(|_| ErasureError::BadPacking("length overflow"))?;
    if len > stream.len() - LENGTH_HEADER || packed_len(len) != symbols.len() {
        return Err(ErasureError::BadPacking(
            "length header disagrees with symbol count",
        ));
    }
    if stream[LENGTH_HEADER + len..].iter().any(|&b| b != 0) {
        return Err(ErasureError::BadPacking("non-zero padding"));
    }
    stream.truncate(LENGTH_HEADER + len);
    stream.drain(..LENGTH_HEADER);
    Ok(stream)
}

/// Barycentric weights `1 / prod_{j != i} (i - j)` for the points `0..n`.
fn consecutive_weights(n: usize) -> Vec<Scalar> {
    let mut fact = Vec::with_capacity(n);
    let mut acc = Scalar::ONE;
    for i in 0..n {
        if i > 0 {
            acc *= Scalar::from_u64(i as u64);
        }
        fact.push(acc);
    }
    let mut denoms: Vec<Scalar> = (0..n)
        .map(|i| {
            let d = fact[i] * fact[n - 1 - i];
            if (n - 1 - i) % 2 == 1 {
                -d
            } else {
                d
            }
        })
        .collect();
    batch_invert(&mut denoms);
    denoms
}

fn general_weights(xs: &[Scalar]) -> Vec<Scalar> {
    let mut denoms: Vec<Scalar> = xs
        .iter()
        .enumerate()
        .map(|(i, xi)| {
            xs.iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .fold(Scalar::ONE, |acc, (_, xj)| acc * (*xi - *xj))
        })
        .collect();
    batch_invert(&mut denoms);
    denoms
}

/// Evaluates the interpolating polynomial through `(xs, ys)` at `z`.
fn interpolate_at(xs: &[Scalar], ys: &[Scalar], weights: &[Scalar], z: Scalar) -> Scalar {
    if let Some(i) = xs.iter().position(|x| *x == z) {
        return ys[i];
    }
    let mut diffs: Vec<Scalar> = xs.iter().map(|x| z - *x).collect();
    let ell = diffs.iter().fold(Scalar::ONE, |acc, d| acc * *d);
    batch_invert(&mut diffs);
    let sum: Scalar = weights
        .iter()
        .zip(ys)
        .zip(&diffs)
        .map(|((w, y), inv)| *w * *y * *inv)
        .sum();
    ell * sum
}
