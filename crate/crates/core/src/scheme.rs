//! The proof-of-storage construction.
//!
//! Segment `j` (1-based) of file `fid` carries the tag
//! `sigma_j = x * (H(fid, j) + m_j * alpha)` in G1. A challenge is a list of
//! `(index, coefficient)` pairs per file; the server answers with
//! `sigma = sum nu_j * sigma_{r_j}` and `mu = sum nu_j * m_{r_j}`, and anyone
//! holding the public key checks
//! `e(sigma, g) == e(sum nu_j * H(fid, r_j) + mu * alpha, v)`.
//! Per-file answers can be folded into one pair checked with two pairings.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::{Rng, RngCore};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::algebra::{
    hash_to_group, pairings_equal, FixedBaseTable, G1Element, G2Element, GroupParams, Scalar,
    WideHash, G1_BYTES, SCALAR_BYTES,
};
use crate::beacon::Timestamp;
use crate::encoding::{DecodeError, FieldReader, FieldWriter};
use crate::keyword_index::{FileId, Keyword, SigningKey, VerifyingKey};

/// Security parameter the scheme is instantiated for.
pub const SECURITY_BITS: u32 = 128;
/// Default number of challenged segments per file (`l = lambda`).
pub const DEFAULT_CHALLENGE_SIZE: usize = SECURITY_BITS as usize;
/// Bytes in each of a keyword token's random strings (lambda bits).
pub const TOKEN_NONCE_BYTES: usize = (SECURITY_BITS / 8) as usize;

const SEGMENT_LABEL: &str = "kdpos/H/segment";
const CHALLENGE_LABEL: &str = "kdpos/H1/challenge";

// Files smaller than this are tagged without building a fixed-base table.
const FIXED_BASE_THRESHOLD: usize = 48;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SchemeError {
    #[error("security level {0} is not supported (only {SECURITY_BITS})")]
    UnsupportedSecurityLevel(u32),
    #[error("a file must have at least one segment")]
    EmptyFile,
    #[error("challenge is empty")]
    EmptyChallenge,
    #[error("proof is empty")]
    EmptyProof,
    #[error("challenge size must be at least 1")]
    ZeroChallengeSize,
    #[error("file {0} has zero segments")]
    ZeroSegments(FileId),
    #[error("unknown file {0}")]
    UnknownFile(FileId),
    #[error("segment {index} of file {fid} is out of range 1..={segments}")]
    IndexOutOfRange {
        fid: FileId,
        index: u64,
        segments: u64,
    },
    #[error("proof does not cover exactly the challenged files")]
    FidSetMismatch,
    #[error("expected a {expected} proof")]
    WrongProofForm { expected: &'static str },
}

#[derive(Clone)]
pub struct SecretKey {
    x: Scalar,
    ssk: SigningKey,
}

impl SecretKey {
    pub fn signing_key(&self) -> &SigningKey {
        &self.ssk
    }

    /// The tag exponent, exposed for test oracles only.
    #[cfg(any(test, feature = "ground-truth"))]
    pub fn exponent(&self) -> Scalar {
        self.x
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = FieldWriter::new("kdpos/secret-key");
        w.bytes(&self.x.to_bytes()).bytes(&self.ssk.to_bytes());
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, DecodeError> {
        let mut r = FieldReader::with_label(bytes, "kdpos/secret-key")?;
        let x = Scalar::from_slice(r.bytes()?)?;
        let ssk = SigningKey::from_bytes(r.bytes()?)?;
        r.finish()?;
        Ok(SecretKey { x, ssk })
    }
}

impl std::fmt::Debug for SecretKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("SecretKey(..)")
    }
}

/// `pk = (v, psk, alpha)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PublicKey {
    pub v: G2Element,
    pub psk: VerifyingKey,
    pub alpha: G1Element,
}

impl PublicKey {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = FieldWriter::new("kdpos/public-key");
        w.bytes(&self.v.to_bytes())
            .bytes(&self.psk.to_bytes())
            .bytes(&self.alpha.to_bytes())
            .bytes(&GroupParams::bls12_381().fingerprint());
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, DecodeError> {
        let mut r = FieldReader::with_label(bytes, "kdpos/public-key")?;
        let v = G2Element::from_slice(r.bytes()?)?;
        let psk = VerifyingKey::from_bytes(r.bytes()?)?;
        let alpha = G1Element::from_slice(r.bytes()?)?;
        let params: [u8; 32] = r.array()?;
        r.finish()?;
        if params != GroupParams::bls12_381().fingerprint() {
            return Err(DecodeError::Invalid(
                "public key uses different group parameters".into(),
            ));
        }
        Ok(PublicKey { v, psk, alpha })
    }

    pub fn fingerprint(&self) -> [u8; 32] {
        Sha256::digest(self.to_bytes()).into()
    }
}

#[derive(Clone, Debug)]
pub struct KeyPair {
    pub sk: SecretKey,
    pub pk: PublicKey,
}

/// Generates `sk = (x, ssk)` and `pk = (g^x, psk, alpha)`.
pub fn setup<R: RngCore + ?Sized>(security_bits: u32, rng: &mut R) -> Result<KeyPair, SchemeError> {
    if security_bits != SECURITY_BITS {
        return Err(SchemeError::UnsupportedSecurityLevel(security_bits));
    }
    let x = loop {
        let x = Scalar::random(rng);
        if !x.is_zero() {
            break x;
        }
    };
    let alpha = loop {
        let a = G1Element::random(rng);
        if !a.is_identity() && a != G1Element::generator() {
            break a;
        }
    };
    let ssk = SigningKey::generate(rng);
    let pk = PublicKey {
        v: GroupParams::bls12_381().g * x,
        psk: ssk.verifying_key(),
        alpha,
    };
    Ok(KeyPair {
        sk: SecretKey { x, ssk },
        pk,
    })
}

/// Field-tagged encoding of `fid || j`, the input to H for segment tags.
pub fn segment_hash_input(fid: &FileId, index: u64) -> Vec<u8> {
    let mut w = FieldWriter::new(SEGMENT_LABEL);
    w.bytes(&fid.to_bytes()).u64(index);
    w.finish()
}

/// `H(fid || j)`.
pub fn segment_hash(fid: &FileId, index: u64) -> G1Element {
    hash_to_group(&segment_hash_input(fid, index))
}

/// An encoded file with one tag per segment.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FileRecord {
    pub fid: FileId,
    pub segments: Vec<Scalar>,
    pub tags: Vec<G1Element>,
}

impl FileRecord {
    pub fn segment_count(&self) -> u64 {
        self.segments.len() as u64
    }

    /// `(m_j, sigma_j)` for 1-based `j`.
    pub fn get(&self, index: u64) -> Option<(Scalar, G1Element)> {
        let i = usize::try_from(index).ok()?.checked_sub(1)?;
        Some((*self.segments.get(i)?, *self.tags.get(i)?))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = FieldWriter::new("kdpos/file-record");
        w.bytes(&self.fid.to_bytes())
            .u32(self.segments.len() as u32);
        for (m, t) in self.segments.iter().zip(&self.tags) {
            w.bytes(&m.to_bytes()).bytes(&t.to_bytes());
        }
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, DecodeError> {
        let mut r = FieldReader::with_label(bytes, "kdpos/file-record")?;
        let fid = FileId::from_slice(r.bytes()?)?;
        let n = r.count(8 + SCALAR_BYTES + G1_BYTES)?;
        if n == 0 {
            return Err(DecodeError::Invalid("file record without segments".into()));
        }
        let mut segments = Vec::with_capacity(n);
        let mut tags = Vec::with_capacity(n);
        for _ in 0..n {
            segments.push(Scalar::from_slice(r.bytes()?)?);
            tags.push(G1Element::from_slice(r.bytes()?)?);
        }
        r.finish()?;
        Ok(FileRecord {
            fid,
            segments,
            tags,
        })
    }
}

/// Tags every segment: `sigma_j = x * H(fid, j) + m_j * (x * alpha)`.
pub fn tag_file(
    fid: FileId,
    segments: Vec<Scalar>,
    keys: &KeyPair,
) -> Result<FileRecord, SchemeError> {
    if segments.is_empty() {
        return Err(SchemeError::EmptyFile);
    }
    let x = keys.sk.x;
    let x_alpha = keys.pk.alpha * x;
    let table = (segments.len() >= FIXED_BASE_THRESHOLD).then(|| FixedBaseTable::new(&x_alpha));
    let tags = segments
        .iter()
        .enumerate()
        .map(|(i, m)| {
            let h = segment_hash(&fid, i as u64 + 1) * x;
            let a = match &table {
                Some(t) => t.mul(m),
                None => x_alpha * *m,
            };
            h + a
        })
        .collect();
    Ok(FileRecord {
        fid,
        segments,
        tags,
    })
}

/// Public read check: `e(tag, g) == e(H(fid, j) + m * alpha, v)`.
pub fn verify_read(
    fid: &FileId,
    index: u64,
    segment: &Scalar,
    tag: &G1Element,
    pk: &PublicKey,
) -> bool {
    if index == 0 {
        return false;
    }
    let rhs = segment_hash(fid, index) + pk.alpha * *segment;
    pairings_equal((tag, &GroupParams::bls12_381().g), (&rhs, &pk.v))
}

/// Owner's read check by direct exponentiation with `x`.
pub fn verify_read_with_secret(
    fid: &FileId,
    index: u64,
    segment: &Scalar,
    tag: &G1Element,
    keys: &KeyPair,
) -> bool {
    index != 0 && *tag == (segment_hash(fid, index) + keys.pk.alpha * *segment) * keys.sk.x
}

/// `dbar = {(fid, n)}`, what a verifier needs to know about outsourced files.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Metadata {
    entries: BTreeMap<FileId, u64>,
}

impl Metadata {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, fid: FileId, segments: u64) -> bool {
        self.entries.insert(fid, segments).is_none()
    }

    pub fn segments(&self, fid: &FileId) -> Option<u64> {
        self.entries.get(fid).copied()
    }

    pub fn contains(&self, fid: &FileId) -> bool {
        self.entries.contains_key(fid)
    }

    pub fn fids(&self) -> Vec<FileId> {
        self.entries.keys().copied().collect()
    }

    pub fn entries(&self) -> impl Iterator<Item = (FileId, u64)> + '_ {
        self.entries.iter().map(|(f, n)| (*f, *n))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// `(fid, n)` for each requested file, in request order.
    pub fn select(&self, fids: &[FileId]) -> Result<Vec<(FileId, u64)>, SchemeError> {
        fids.iter()
            .map(|f| {
                self.segments(f)
                    .map(|n| (*f, n))
                    .ok_or(SchemeError::UnknownFile(*f))
            })
            .collect()
    }

    pub fn encode_into(&self, w: &mut FieldWriter) {
        w.u32(self.entries.len() as u32);
        for (fid, n) in &self.entries {
            w.bytes(&fid.to_bytes()).u64(*n);
        }
    }

    pub fn decode_from(r: &mut FieldReader<'_>) -> Result<Self, DecodeError> {
        let count = r.count(4 + SCALAR_BYTES + 4 + 8)?;
        let mut md = Metadata::new();
        for _ in 0..count {
            let fid = FileId::from_slice(r.bytes()?)?;
            let n = r.u64()?;
            if n == 0 || !md.insert(fid, n) {
                return Err(DecodeError::Invalid(
                    "metadata entry repeated or empty".into(),
                ));
            }
        }
        Ok(md)
    }
}

/// Challenge for one file: `Q_i = {(r_j, nu_j)}` with 1-based indices.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FileChallenge {
    pub fid: FileId,
    pub pairs: Vec<(u64, Scalar)>,
}

/// Per-file challenges in audit order.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ChallengeSet {
    pub files: Vec<FileChallenge>,
}

impl ChallengeSet {
    pub fn fids(&self) -> Vec<FileId> {
        self.files.iter().map(|f| f.fid).collect()
    }

    pub fn is_empty(&self) -> bool {
        self.files.is_empty() || self.files.iter().any(|f| f.pairs.is_empty())
    }

    pub fn get(&self, fid: &FileId) -> Option<&FileChallenge> {
        self.files.iter().find(|f| f.fid == *fid)
    }

    pub fn encode_into(&self, w: &mut FieldWriter) {
        w.u32(self.files.len() as u32);
        for f in &self.files {
            w.bytes(&f.fid.to_bytes()).u32(f.pairs.len() as u32);
            for (r, nu) in &f.pairs {
                w.u64(*r).bytes(&nu.to_bytes());
            }
        }
    }

    pub fn decode_from(r: &mut FieldReader<'_>) -> Result<Self, DecodeError> {
        let nfiles = r.count(4 + SCALAR_BYTES + 8)?;
        let mut files = Vec::with_capacity(nfiles);
        for _ in 0..nfiles {
            let fid = FileId::from_slice(r.bytes()?)?;
            let npairs = r.count(12 + 4 + SCALAR_BYTES)?;
            let mut pairs = Vec::with_capacity(npairs);
            for _ in 0..npairs {
                let idx = r.u64()?;
                let nu = Scalar::from_slice(r.bytes()?)?;
                pairs.push((idx, nu));
            }
            files.push(FileChallenge { fid, pairs });
        }
        Ok(ChallengeSet { files })
    }

    /// Digest binding a proof to this exact challenge.
    pub fn digest(&self) -> [u8; 32] {
        let mut w = FieldWriter::new("kdpos/challenge-digest");
        self.encode_into(&mut w);
        Sha256::digest(w.finish()).into()
    }
}

fn validate_files(files: &[(FileId, u64)], l: usize) -> Result<(), SchemeError> {
    if files.is_empty() {
        return Err(SchemeError::EmptyChallenge);
    }
    if l == 0 {
        return Err(SchemeError::ZeroChallengeSize);
    }
    if let Some((fid, _)) = files.iter().find(|(_, n)| *n == 0) {
        return Err(SchemeError::ZeroSegments(*fid));
    }
    Ok(())
}

/// H1 input for challenge derivation: `str_t || fid || j || s`.
pub fn challenge_hash_input(str_t: &[u8], fid: &FileId, j: u64, s: &[u8]) -> Vec<u8> {
    let mut w = FieldWriter::new(CHALLENGE_LABEL);
    w.bytes(str_t).bytes(&fid.to_bytes()).u64(j).bytes(s);
    w.finish()
}

/// Derives `Q` from public beacon output and a token's random strings:
/// `r_j = H1(str_t, fid, j, s0) mod n + 1` and `nu_j = H1(str_t, fid, j, s1) mod p`
/// for `j` in `0..l`.
pub fn derive_challenge(
    str_t: &[u8],
    files: &[(FileId, u64)],
    s0: &[u8],
    s1: &[u8],
    l: usize,
) -> Result<ChallengeSet, SchemeError> {
    validate_files(files, l)?;
    let files = files
        .iter()
        .map(|(fid, n)| FileChallenge {
            fid: *fid,
            pairs: (0..l as u64)
                .map(|j| {
                    let r = WideHash::of(&challenge_hash_input(str_t, fid, j, s0)).reduce(*n) + 1;
                    let nu = WideHash::of(&challenge_hash_input(str_t, fid, j, s1)).to_scalar();
                    (r, nu)
                })
                .collect(),
        })
        .collect();
    Ok(ChallengeSet { files })
}

/// Samples `Q` directly: `r_j` uniform in `1..=n`, `nu_j` uniform in Z_p.
pub fn sample_challenge<R: RngCore + ?Sized>(
    files: &[(FileId, u64)],
    l: usize,
    rng: &mut R,
) -> Result<ChallengeSet, SchemeError> {
    validate_files(files, l)?;
    let files = files
        .iter()
        .map(|(fid, n)| FileChallenge {
            fid: *fid,
            pairs: (0..l)
                .map(|_| (rng.gen_range(1..=*n), Scalar::random(rng)))
                .collect(),
        })
        .collect();
    Ok(ChallengeSet { files })
}

/// `(sigma, mu)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ProofPair {
    pub sigma: G1Element,
    pub mu: Scalar,
}

impl ProofPair {
    pub const ENCODED_LEN: usize = G1_BYTES + SCALAR_BYTES;

    /// `sigma || mu`, 80 bytes.
    pub fn to_bytes(&self) -> [u8; Self::ENCODED_LEN] {
        let mut out = [0u8; Self::ENCODED_LEN];
        out[..G1_BYTES].copy_from_slice(&self.sigma.to_bytes());
        out[G1_BYTES..].copy_from_slice(&self.mu.to_bytes());
        out
    }

    pub fn from_slice(bytes: &[u8]) -> Result<Self, DecodeError> {
        if bytes.len() != Self::ENCODED_LEN {
            return Err(DecodeError::BadLength {
                expected: Self::ENCODED_LEN,
                got: bytes.len(),
            });
        }
        Ok(ProofPair {
            sigma: G1Element::from_slice(&bytes[..G1_BYTES])?,
            mu: Scalar::from_slice(&bytes[G1_BYTES..])?,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum StorageProof {
    PerFile(Vec<(FileId, ProofPair)>),
    Batched(ProofPair),
}

impl StorageProof {
    pub fn is_batched(&self) -> bool {
        matches!(self, StorageProof::Batched(_))
    }

    /// Bytes of proof material: 80 per pair.
    pub fn pair_bytes(&self) -> usize {
        match self {
            StorageProof::PerFile(v) => v.len() * ProofPair::ENCODED_LEN,
            StorageProof::Batched(_) => ProofPair::ENCODED_LEN,
        }
    }
}

/// Read access to stored records, as seen by a prover.
pub trait RecordSource {
    fn record(&self, fid: &FileId) -> Option<&FileRecord>;
}

impl RecordSource for HashMap<FileId, FileRecord> {
    fn record(&self, fid: &FileId) -> Option<&FileRecord> {
        self.get(fid)
    }
}

impl RecordSource for BTreeMap<FileId, FileRecord> {
    fn record(&self, fid: &FileId) -> Option<&FileRecord> {
        self.get(fid)
    }
}

impl RecordSource for [FileRecord] {
    fn record(&self, fid: &FileId) -> Option<&FileRecord> {
        self.iter().find(|r| r.fid == *fid)
    }
}

/// `sigma = sum nu_j * sigma_{r_j}`, `mu = sum nu_j * m_{r_j}` for one file.
pub fn prove_file(
    challenge: &FileChallenge,
    record: &FileRecord,
) -> Result<ProofPair, SchemeError> {
    let mut tags = Vec::with_capacity(challenge.pairs.len());
    let mut coeffs = Vec::with_capacity(challenge.pairs.len());
    let mut mu = Scalar::ZERO;
    for &(r, nu) in &challenge.pairs {
        let (m, tag) = record.get(r).ok_or(SchemeError::IndexOutOfRange {
            fid: challenge.fid,
            index: r,
            segments: record.segment_count(),
        })?;
        tags.push(tag);
        coeffs.push(nu);
        mu += nu * m;
    }
    Ok(ProofPair {
        sigma: G1Element::multi_exp(&tags, &coeffs),
        mu,
    })
}

/// Per-file proof for every challenged file.
pub fn prove<S: RecordSource + ?Sized>(
    challenge: &ChallengeSet,
    records: &S,
) -> Result<StorageProof, SchemeError> {
    if challenge.is_empty() {
        return Err(SchemeError::EmptyChallenge);
    }
    let pairs = challenge
        .files
        .iter()
        .map(|fc| {
            let rec = records
                .record(&fc.fid)
                .ok_or(SchemeError::UnknownFile(fc.fid))?;
            Ok((fc.fid, prove_file(fc, rec)?))
        })
        .collect::<Result<Vec<_>, SchemeError>>()?;
    Ok(StorageProof::PerFile(pairs))
}

/// Folds per-file pairs into `(prod sigma_i, sum mu_i)`.
pub fn aggregate(proof: &StorageProof) -> Result<ProofPair, SchemeError> {
    let StorageProof::PerFile(pairs) = proof else {
        return Err(SchemeError::WrongProofForm {
            expected: "per-file",
        });
    };
    if pairs.is_empty() {
        return Err(SchemeError::EmptyProof);
    }
    Ok(ProofPair {
        sigma: pairs.iter().map(|(_, p)| p.sigma).sum(),
        mu: pairs.iter().map(|(_, p)| p.mu).sum(),
    })
}

/// `H(fid, r)` for each index, for callers that check many responses to one
/// index set.
pub fn segment_hashes(fid: &FileId, indices: &[u64]) -> Vec<G1Element> {
    indices.iter().map(|r| segment_hash(fid, *r)).collect()
}

fn challenge_point(
    challenges: &[&FileChallenge],
    hashes: &[Vec<G1Element>],
    mu: Scalar,
    pk: &PublicKey,
) -> G1Element {
    let mut points = Vec::new();
    let mut coeffs = Vec::new();
    for (fc, hs) in challenges.iter().zip(hashes) {
        for ((_, nu), h) in fc.pairs.iter().zip(hs) {
            points.push(*h);
            coeffs.push(*nu);
        }
    }
    points.push(pk.alpha);
    coeffs.push(mu);
    G1Element::multi_exp(&points, &coeffs)
}

/// Checks one file's pair against precomputed `H(fid, r_j)` (same order as
/// `challenge.pairs`).
pub fn verify_file_with_hashes(
    challenge: &FileChallenge,
    hashes: &[G1Element],
    pair: &ProofPair,
    pk: &PublicKey,
) -> bool {
    if challenge.pairs.is_empty() || hashes.len() != challenge.pairs.len() {
        return false;
    }
    let rhs = challenge_point(&[challenge], &[hashes.to_vec()], pair.mu, pk);
    pairings_equal((&pair.sigma, &GroupParams::bls12_381().g), (&rhs, &pk.v))
}

fn challenge_hashes(fc: &FileChallenge) -> Vec<G1Element> {
    fc.pairs
        .iter()
        .map(|(r, _)| segment_hash(&fc.fid, *r))
        .collect()
}

/// Accepts iff the proof answers exactly the challenged files and every
/// per-file equation holds. Batched proofs are routed to [`verify_batched`].
pub fn verify(
    challenge: &ChallengeSet,
    proof: &StorageProof,
    pk: &PublicKey,
) -> Result<bool, SchemeError> {
    let pairs = match proof {
        StorageProof::Batched(pair) => return verify_batched(challenge, pair, pk),
        StorageProof::PerFile(pairs) => pairs,
    };
    if challenge.is_empty() {
        return Err(SchemeError::EmptyChallenge);
    }
    let challenged: BTreeSet<FileId> = challenge.fids().into_iter().collect();
    let answered: BTreeSet<FileId> = pairs.iter().map(|(f, _)| *f).collect();
    if challenged != answered
        || pairs.len() != challenge.files.len()
        || challenged.len() != pairs.len()
    {
        return Err(SchemeError::FidSetMismatch);
    }
    for (fid, pair) in pairs {
        let fc = challenge.get(fid).expect("fid sets are equal");
        if !verify_file_with_hashes(fc, &challenge_hashes(fc), pair, pk) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Batched check with exactly two pairings:
/// `e(sigma, g) == e(sum_i sum_j nu_j * H(fid_i, r_j) + mu * alpha, v)`.
pub fn verify_batched(
    challenge: &ChallengeSet,
    pair: &ProofPair,
    pk: &PublicKey,
) -> Result<bool, SchemeError> {
    if challenge.is_empty() {
        return Err(SchemeError::EmptyChallenge);
    }
    let files: Vec<&FileChallenge> = challenge.files.iter().collect();
    let hashes: Vec<Vec<G1Element>> = files.iter().map(|fc| challenge_hashes(fc)).collect();
    let rhs = challenge_point(&files, &hashes, pair.mu, pk);
    Ok(pairings_equal(
        (&pair.sigma, &GroupParams::bls12_381().g),
        (&rhs, &pk.v),
    ))
}

/// `t_w = (w, s0, s1, t)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KeywordToken {
    pub keyword: Keyword,
    pub s0: [u8; TOKEN_NONCE_BYTES],
    pub s1: [u8; TOKEN_NONCE_BYTES],
    pub t: Timestamp,
}

impl KeywordToken {
    pub fn encode_into(&self, w: &mut FieldWriter) {
        w.str(self.keyword.as_str())
            .bytes(&self.s0)
            .bytes(&self.s1)
            .i64(self.t.0);
    }

    pub fn decode_from(r: &mut FieldReader<'_>) -> Result<Self, DecodeError> {
        let raw = r.string()?;
        let keyword = Keyword::parse(&raw)
            .filter(|k| k.as_str() == raw)
            .ok_or_else(|| DecodeError::Invalid(format!("keyword {raw:?} is not normalized")))?;
        Ok(KeywordToken {
            keyword,
            s0: r.array()?,
            s1: r.array()?,
            t: Timestamp(r.i64()?),
        })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = FieldWriter::new("kdpos/token");
        self.encode_into(&mut w);
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, DecodeError> {
        let mut r = FieldReader::with_label(bytes, "kdpos/token")?;
        let t = Self::decode_from(&mut r)?;
        r.finish()?;
        Ok(t)
    }

    /// The token's challenge for the given files and beacon output.
    pub fn challenge(
        &self,
        str_t: &[u8],
        files: &[(FileId, u64)],
        l: usize,
    ) -> Result<ChallengeSet, SchemeError> {
        derive_challenge(str_t, files, &self.s0, &self.s1, l)
    }
}

/// Fresh token for keyword `w`, to be answered once the beacon passes `t`.
pub fn make_token<R: RngCore + ?Sized>(
    keyword: Keyword,
    t: Timestamp,
    rng: &mut R,
) -> KeywordToken {
    let mut s0 = [0u8; TOKEN_NONCE_BYTES];
    let mut s1 = [0u8; TOKEN_NONCE_BYTES];
    rng.fill_bytes(&mut s0);
    rng.fill_bytes(&mut s1);
    KeywordToken { keyword, s0, s1, t }
}
