//! Pairing-group arithmetic over BLS12-381.
//!
//! Tags, hash outputs and the public generator `alpha` live in G1; the fixed
//! verification bases `g` and `v = g^x` live in G2. All group laws are
//! written additively (`+` is the group operation, `point * scalar` is
//! exponentiation), following the backend's convention.

use std::cell::Cell;
use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Mul, MulAssign, Neg, Sub, SubAssign};

use blstrs::{Bls12, G1Affine, G1Projective, G2Affine, G2Prepared, G2Projective, Gt};
use ff::Field;
use group::prime::PrimeCurveAffine;
use group::{Curve, Group};
use pairing::{MillerLoopResult, MultiMillerLoop};
use rand::RngCore;
use sha2::{Digest, Sha256};

use crate::encoding::DecodeError;

pub const SCALAR_BYTES: usize = 32;
pub const G1_BYTES: usize = 48;
pub const G2_BYTES: usize = 96;

/// Domain separation tag for the hash onto G1.
pub const HASH_TO_GROUP_DST: &[u8] = b"KDPOS-V01-CS01-with-BLS12381G1_XMD:SHA-256_SSWU_RO_";
/// Domain separation label prefixed to every hash-to-scalar input.
pub const HASH_TO_SCALAR_LABEL: &[u8] = b"KDPOS-V01-H1";

/// Group order p of BLS12-381, big-endian.
pub const MODULUS_BE: [u8; 32] = [
    0x73, 0xed, 0xa7, 0x53, 0x29, 0x9d, 0x7d, 0x48, 0x33, 0x39, 0xd8, 0x08, 0x09, 0xa1, 0xd8, 0x05,
    0x53, 0xbd, 0xa4, 0x02, 0xff, 0xfe, 0x5b, 0xfe, 0xff, 0xff, 0xff, 0xff, 0x00, 0x00, 0x00, 0x01,
];

/// Bit length of p; hash-to-scalar digests are truncated to this many bits.
pub const MODULUS_BITS: u32 = 255;

/// Element of Z_p.
#[derive(Clone, Copy, PartialEq, Eq)]
pub struct Scalar(pub(crate) blstrs::Scalar);

impl Scalar {
    pub const ZERO: Scalar = Scalar(blstrs::Scalar::ZERO);
    pub const ONE: Scalar = Scalar(blstrs::Scalar::ONE);

    pub fn from_u64(v: u64) -> Self {
        Scalar(blstrs::Scalar::from(v))
    }

    pub fn random<R: RngCore + ?Sized>(rng: &mut R) -> Self {
        let mut wide = [0u8; 64];
        rng.fill_bytes(&mut wide);
        Scalar::from_be_bytes_mod_order(&wide)
    }

    /// Canonical 32-byte big-endian encoding.
    pub fn to_bytes(&self) -> [u8; SCALAR_BYTES] {
        self.0.to_bytes_be()
    }

    /// Parses a canonical encoding; values `>= p` are rejected.
    pub fn from_bytes(bytes: &[u8; SCALAR_BYTES]) -> Result<Self, DecodeError> {
        Option::from(blstrs::Scalar::from_bytes_be(bytes))
            .map(Scalar)
            .ok_or(DecodeError::InvalidElement("scalar"))
    }

    pub fn from_slice(bytes: &[u8]) -> Result<Self, DecodeError> {
        let arr: [u8; SCALAR_BYTES] = bytes.try_into().map_err(|_| DecodeError::BadLength {
            expected: SCALAR_BYTES,
            got: bytes.len(),
        })?;
        Scalar::from_bytes(&arr)
    }

    /// Interprets arbitrary big-endian bytes as an integer and reduces it mod p.
    pub fn from_be_bytes_mod_order(bytes: &[u8]) -> Self {
        let base = blstrs::Scalar::from(256u64);
        let mut acc = blstrs::Scalar::ZERO;
        let mut chunks = bytes.chunks_exact(8);
        let two64 = blstrs::Scalar::from(u64::MAX) + blstrs::Scalar::ONE;
        for chunk in &mut chunks {
            let limb = u64::from_be_bytes(chunk.try_into().unwrap());
            acc = acc * two64 + blstrs::Scalar::from(limb);
        }
        for &b in chunks.remainder() {
            acc = acc * base + blstrs::Scalar::from(b as u64);
        }
        Scalar(acc)
    }

    pub fn is_zero(&self) -> bool {
        bool::from(self.0.is_zero())
    }

    pub fn invert(&self) -> Option<Scalar> {
        Option::from(self.0.invert()).map(Scalar)
    }

    pub fn square(&self) -> Scalar {
        Scalar(self.0.square())
    }
}

impl Default for Scalar {
    fn default() -> Self {
        Scalar::ZERO
    }
}

impl fmt::Debug for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Scalar(0x{})", hex::encode(self.to_bytes()))
    }
}

impl std::hash::Hash for Scalar {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.to_bytes().hash(state);
    }
}

impl PartialOrd for Scalar {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Scalar {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.to_bytes().cmp(&other.to_bytes())
    }
}

impl From<u64> for Scalar {
    fn from(v: u64) -> Self {
        Scalar::from_u64(v)
    }
}

macro_rules! forward_binop {
    ($ty:ident, $rhs:ident, $trait:ident, $method:ident, $assign_trait:ident, $assign_method:ident, $op:tt) => {
        impl $trait<$rhs> for $ty {
            type Output = $ty;
            fn $method(self, rhs: $rhs) -> $ty {
                $ty(self.0 $op rhs.0)
            }
        }
        impl<'a> $trait<&'a $rhs> for $ty {
            type Output = $ty;
            fn $method(self, rhs: &'a $rhs) -> $ty {
                $ty(self.0 $op rhs.0)
            }
        }
        impl<'a> $trait<$rhs> for &'a $ty {
            type Output = $ty;
            fn $method(self, rhs: $rhs) -> $ty {
                $ty(self.0 $op rhs.0)
            }
        }
        impl<'a, 'b> $trait<&'b $rhs> for &'a $ty {
            type Output = $ty;
            fn $method(self, rhs: &'b $rhs) -> $ty {
                $ty(self.0 $op rhs.0)
            }
        }
        impl $assign_trait<$rhs> for $ty {
            fn $assign_method(&mut self, rhs: $rhs) {
                self.0 = self.0 $op rhs.0;
            }
        }
    };
}

forward_binop!(Scalar, Scalar, Add, add, AddAssign, add_assign, +);
forward_binop!(Scalar, Scalar, Sub, sub, SubAssign, sub_assign, -);
forward_binop!(Scalar, Scalar, Mul, mul, MulAssign, mul_assign, *);

impl Neg for Scalar {
    type Output = Scalar;
    fn neg(self) -> Scalar {
        Scalar(-self.0)
    }
}

impl Sum for Scalar {
    fn sum<I: Iterator<Item = Scalar>>(iter: I) -> Scalar {
        iter.fold(Scalar::ZERO, |a, b| a + b)
    }
}

macro_rules! curve_group {
    ($name:ident, $proj:ty, $affine:ty, $bytes:expr, $label:expr) => {
        #[derive(Clone, Copy, PartialEq, Eq)]
        pub struct $name(pub(crate) $proj);

        impl $name {
            pub fn identity() -> Self {
                $name(<$proj>::identity())
            }

            pub fn generator() -> Self {
                $name(<$proj>::generator())
            }

            pub fn is_identity(&self) -> bool {
                bool::from(self.0.is_identity())
            }

            /// Canonical compressed encoding.
            pub fn to_bytes(&self) -> [u8; $bytes] {
                self.0.to_affine().to_compressed()
            }

            /// Parses a compressed point; off-curve, non-subgroup and
            /// non-canonical encodings are rejected.
            pub fn from_bytes(bytes: &[u8; $bytes]) -> Result<Self, DecodeError> {
                Option::<$affine>::from(<$affine>::from_compressed(bytes))
                    .map(|a| $name(a.into()))
                    .ok_or(DecodeError::InvalidElement($label))
            }

            pub fn from_slice(bytes: &[u8]) -> Result<Self, DecodeError> {
                let arr: [u8; $bytes] = bytes.try_into().map_err(|_| DecodeError::BadLength {
                    expected: $bytes,
                    got: bytes.len(),
                })?;
                $name::from_bytes(&arr)
            }

            pub fn double(&self) -> Self {
                $name(self.0.double())
            }
        }

        impl fmt::Debug for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}(0x{})", stringify!($name), hex::encode(self.to_bytes()))
            }
        }

        impl std::hash::Hash for $name {
            fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
                self.to_bytes().hash(state);
            }
        }

        forward_binop!($name, $name, Add, add, AddAssign, add_assign, +);
        forward_binop!($name, $name, Sub, sub, SubAssign, sub_assign, -);

        impl Mul<Scalar> for $name {
            type Output = $name;
            fn mul(self, rhs: Scalar) -> $name {
                $name(self.0 * rhs.0)
            }
        }

        impl<'a> Mul<&'a Scalar> for &'a $name {
            type Output = $name;
            fn mul(self, rhs: &'a Scalar) -> $name {
                $name(self.0 * rhs.0)
            }
        }

        impl MulAssign<Scalar> for $name {
            fn mul_assign(&mut self, rhs: Scalar) {
                self.0 *= rhs.0;
            }
        }

        impl Neg for $name {
            type Output = $name;
            fn neg(self) -> $name {
                $name(-self.0)
            }
        }

        impl Sum for $name {
            fn sum<I: Iterator<Item = $name>>(iter: I) -> $name {
                iter.fold($name::identity(), |a, b| a + b)
            }
        }
    };
}

curve_group!(G1Element, G1Projective, G1Affine, G1_BYTES, "G1 point");
curve_group!(G2Element, G2Projective, G2Affine, G2_BYTES, "G2 point");

impl G1Element {
    /// `sum(points[i] * scalars[i])`, computed with a multi-scalar multiplication.
    pub fn multi_exp(points: &[G1Element], scalars: &[Scalar]) -> G1Element {
        assert_eq!(points.len(), scalars.len(), "multi_exp length mismatch");
        if points.is_empty() {
            return G1Element::identity();
        }
        let p: Vec<G1Projective> = points.iter().map(|x| x.0).collect();
        let s: Vec<blstrs::Scalar> = scalars.iter().map(|x| x.0).collect();
        G1Element(G1Projective::multi_exp(&p, &s))
    }

    /// A uniformly random element with unknown discrete logarithm.
    pub fn random<R: RngCore + ?Sized>(rng: &mut R) -> Self {
        let mut seed = [0u8; 32];
        rng.fill_bytes(&mut seed);
        G1Element(G1Projective::hash_to_curve(
            &seed,
            b"KDPOS-V01-RANDOM-G1",
            &[],
        ))
    }
}

/// Precomputed multiples of a fixed G1 base for fast repeated multiplication.
///
/// Stores `d * 256^k * base` for every byte position `k` and digit `d`, so a
/// product costs at most 32 mixed additions.
pub struct FixedBaseTable {
    // windows[k][d - 1] = d * 256^(31 - k) * base, matching big-endian scalar bytes.
    windows: Vec<Vec<G1Affine>>,
}

impl FixedBaseTable {
    pub fn new(base: &G1Element) -> Self {
        let mut windows = Vec::with_capacity(SCALAR_BYTES);
        let mut window_base = base.0;
        let mut per_window: Vec<Vec<G1Projective>> = Vec::with_capacity(SCALAR_BYTES);
        for _ in 0..SCALAR_BYTES {
            let mut row = Vec::with_capacity(255);
            let mut acc = window_base;
            for _ in 0..255 {
                row.push(acc);
                acc += window_base;
            }
            // acc = 256 * window_base now.
            window_base = acc;
            per_window.push(row);
        }
        per_window.reverse();
        for row in per_window {
            let mut affine = vec![G1Affine::identity(); row.len()];
            G1Projective::batch_normalize(&row, &mut affine);
            windows.push(affine);
        }
        FixedBaseTable { windows }
    }

    pub fn mul(&self, s: &Scalar) -> G1Element {
        let mut acc = G1Projective::identity();
        for (k, &byte) in s.to_bytes().iter().enumerate() {
            if byte != 0 {
                acc += &self.windows[k][byte as usize - 1];
            }
        }
        G1Element(acc)
    }
}

impl G2Element {
    pub fn random<R: RngCore + ?Sized>(rng: &mut R) -> Self {
        G2Element(G2Projective::generator() * Scalar::random(rng).0)
    }
}

/// Replaces every element with its inverse using one field inversion.
///
/// Panics if any element is zero.
pub fn batch_invert(values: &mut [Scalar]) {
    let mut prefix = Vec::with_capacity(values.len());
    let mut acc = Scalar::ONE;
    for v in values.iter() {
        prefix.push(acc);
        acc *= *v;
    }
    let mut inv = acc.invert().expect("batch_invert on a zero element");
    for (v, before) in values.iter_mut().zip(prefix).rev() {
        let next = inv * *v;
        *v = inv * before;
        inv = next;
    }
}

/// Element of the target group G_T.
#[derive(Clone, Copy, PartialEq, Eq)]
pub struct GtElement(Gt);

impl GtElement {
    pub fn identity() -> Self {
        GtElement(Gt::identity())
    }

    pub fn is_identity(&self) -> bool {
        bool::from(self.0.is_identity())
    }

    pub fn pow(&self, e: &Scalar) -> Self {
        GtElement(self.0 * e.0)
    }
}

impl fmt::Debug for GtElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_identity() {
            write!(f, "GtElement(1)")
        } else {
            write!(f, "GtElement(..)")
        }
    }
}

impl Add for GtElement {
    type Output = GtElement;
    fn add(self, rhs: GtElement) -> GtElement {
        GtElement(self.0 + rhs.0)
    }
}

thread_local! {
    static PAIRINGS: Cell<u64> = const { Cell::new(0) };
}

/// Number of pairing evaluations performed on the current thread.
pub fn pairing_count() -> u64 {
    PAIRINGS.with(|c| c.get())
}

fn count_pairings(n: u64) {
    PAIRINGS.with(|c| c.set(c.get() + n));
}

/// The bilinear map e: G1 x G2 -> G_T.
pub fn pair(a: &G1Element, b: &G2Element) -> GtElement {
    count_pairings(1);
    GtElement(blstrs::pairing(&a.0.to_affine(), &b.0.to_affine()))
}

/// Decides `e(lhs.0, lhs.1) == e(rhs.0, rhs.1)`.
///
/// Evaluates both pairings as Miller loops over `e(lhs) * e(-rhs)` and shares
/// one final exponentiation; counts as two pairing evaluations.
pub fn pairings_equal(lhs: (&G1Element, &G2Element), rhs: (&G1Element, &G2Element)) -> bool {
    count_pairings(2);
    let a = lhs.0 .0.to_affine();
    let b = G2Prepared::from(lhs.1 .0.to_affine());
    let c = (-rhs.0 .0).to_affine();
    let d = G2Prepared::from(rhs.1 .0.to_affine());
    let ml = Bls12::multi_miller_loop(&[(&a, &b), (&c, &d)]);
    bool::from(ml.final_exponentiation().is_identity())
}

/// Random-oracle hash onto G1 (hash_to_curve, SSWU, random-oracle variant).
pub fn hash_to_group(msg: &[u8]) -> G1Element {
    G1Element(G1Projective::hash_to_curve(msg, HASH_TO_GROUP_DST, &[]))
}

/// A 255-bit hash output, the common input of scalar and index reduction.
///
/// Computed as `SHA-256(len(label) || label || msg)` with the top bit of the
/// digest cleared. Reducing it mod p carries a bias below 2^-3 on the top
/// bit range only; it is accepted.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct WideHash([u8; 32]);

impl WideHash {
    pub fn of(msg: &[u8]) -> Self {
        let mut h = Sha256::new();
        h.update((HASH_TO_SCALAR_LABEL.len() as u32).to_be_bytes());
        h.update(HASH_TO_SCALAR_LABEL);
        h.update(msg);
        let mut out: [u8; 32] = h.finalize().into();
        out[0] &= 0x7f;
        WideHash(out)
    }

    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }

    pub fn to_scalar(&self) -> Scalar {
        Scalar::from_be_bytes_mod_order(&self.0)
    }

    /// `value mod n`, for `n >= 1`.
    pub fn reduce(&self, n: u64) -> u64 {
        assert!(n > 0, "reduction modulus must be positive");
        let n = n as u128;
        self.0
            .iter()
            .fold(0u128, |acc, &b| ((acc << 8) | b as u128) % n) as u64
    }
}

/// H1: hash to Z_p.
pub fn hash_to_scalar(msg: &[u8]) -> Scalar {
    WideHash::of(msg).to_scalar()
}

/// Public parameters shared by every party.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GroupParams {
    pub g: G2Element,
    pub modulus: [u8; 32],
    pub hash_to_group_dst: &'static [u8],
    pub hash_to_scalar_label: &'static [u8],
}

impl GroupParams {
    pub fn bls12_381() -> Self {
        GroupParams {
            g: G2Element::generator(),
            modulus: MODULUS_BE,
            hash_to_group_dst: HASH_TO_GROUP_DST,
            hash_to_scalar_label: HASH_TO_SCALAR_LABEL,
        }
    }

    /// Digest identifying these parameters, exchanged in handshakes.
    pub fn fingerprint(&self) -> [u8; 32] {
        let mut h = Sha256::new();
        h.update(self.g.to_bytes());
        h.update(self.modulus);
        h.update(self.hash_to_group_dst);
        h.update(self.hash_to_scalar_label);
        h.finalize().into()
    }
}
