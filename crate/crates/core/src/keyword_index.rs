//! Keyword extraction and the signed lookup table.
//!
//! Each row binds a keyword to the exact, sorted list of identifiers of the
//! files containing it, under the data owner's signature. A verifier that
//! accepts a row therefore knows precisely which files a keyword audit must
//! cover. Absence of a keyword is not authenticated.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use ed25519_dalek::{Signer, Verifier};
use rand::RngCore;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::algebra::{Scalar, SCALAR_BYTES};
use crate::encoding::{DecodeError, FieldReader, FieldWriter};

/// Longest keyword kept by [`extract_keywords`], in bytes.
pub const MAX_KEYWORD_BYTES: usize = 64;
pub const SIGNATURE_SCHEME: &str = "ed25519";
pub const TABLE_VERSION: u32 = 1;

const ROW_MESSAGE_LABEL: &str = "kdpos/index-row";
const TABLE_LABEL: &str = "kdpos/table";
const ROW_LABEL: &str = "kdpos/row";

#[derive(Debug, Error)]
pub enum IndexError {
    #[error("file identifier {0} appears more than once")]
    DuplicateFileId(FileId),
    #[error("keyword {0:?} not found")]
    KeywordNotFound(String),
    #[error("table was signed by a different key")]
    ForeignTable,
    #[error(transparent)]
    Decode(#[from] DecodeError),
}

/// File identifier, drawn uniformly from Z_p.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FileId(pub Scalar);

impl FileId {
    pub fn random<R: RngCore + ?Sized>(rng: &mut R) -> Self {
        FileId(Scalar::random(rng))
    }

    pub fn to_bytes(&self) -> [u8; SCALAR_BYTES] {
        self.0.to_bytes()
    }

    pub fn from_slice(bytes: &[u8]) -> Result<Self, DecodeError> {
        Scalar::from_slice(bytes).map(FileId)
    }
}

impl fmt::Display for FileId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&hex::encode(self.to_bytes()))
    }
}

impl fmt::Debug for FileId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "FileId({}..)", &hex::encode(self.to_bytes())[..12])
    }
}

impl FromStr for FileId {
    type Err = DecodeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let raw = hex::decode(s.trim())
            .map_err(|_| DecodeError::Invalid(format!("bad hex file id {s:?}")))?;
        FileId::from_slice(&raw)
    }
}

/// A normalized keyword: lowercase, alphanumeric, 1 to 64 bytes.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Keyword(String);

impl Keyword {
    /// Normalizes a single user-supplied token. Returns `None` if the input
    /// does not normalize to exactly one keyword.
    pub fn parse(raw: &str) -> Option<Keyword> {
        let mut tokens = tokenize(raw);
        match (tokens.next(), tokens.next()) {
            (Some(k), None) => Some(k),
            _ => None,
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    fn from_wire(raw: &[u8]) -> Result<Self, DecodeError> {
        let s = std::str::from_utf8(raw)
            .map_err(|_| DecodeError::Invalid("keyword is not UTF-8".into()))?;
        if s.is_empty() || s.len() > MAX_KEYWORD_BYTES {
            return Err(DecodeError::Invalid("keyword length out of range".into()));
        }
        Ok(Keyword(s.to_string()))
    }
}

impl fmt::Display for Keyword {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Debug for Keyword {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.0)
    }
}

fn tokenize(text: &str) -> impl Iterator<Item = Keyword> + '_ {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(|t| t.to_lowercase())
        .filter(|t| t.len() <= MAX_KEYWORD_BYTES)
        .map(Keyword)
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Extraction {
    pub keywords: BTreeSet<Keyword>,
    /// Content was not valid UTF-8; no keywords were extracted.
    pub non_utf8: bool,
}

/// Distinct normalized keywords of a file: lowercase, split on every
/// non-alphanumeric character, tokens longer than 64 bytes dropped.
pub fn extract_keywords(content: &[u8]) -> Extraction {
    match std::str::from_utf8(content) {
        Ok(text) => Extraction {
            keywords: tokenize(text).collect(),
            non_utf8: false,
        },
        Err(_) => Extraction {
            keywords: BTreeSet::new(),
            non_utf8: true,
        },
    }
}

/// Owner's row-signing key.
#[derive(Clone)]
pub struct SigningKey(ed25519_dalek::SigningKey);

impl SigningKey {
    pub fn generate<R: RngCore + ?Sized>(rng: &mut R) -> Self {
        let mut seed = [0u8; 32];
        rng.fill_bytes(&mut seed);
        SigningKey(ed25519_dalek::SigningKey::from_bytes(&seed))
    }

    pub fn verifying_key(&self) -> VerifyingKey {
        VerifyingKey(self.0.verifying_key())
    }

    pub fn sign(&self, msg: &[u8]) -> Vec<u8> {
        self.0.sign(msg).to_bytes().to_vec()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = FieldWriter::new(SIGNATURE_SCHEME);
        w.bytes(&self.0.to_bytes());
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, DecodeError> {
        let mut r = FieldReader::with_label(bytes, SIGNATURE_SCHEME)?;
        let seed: [u8; 32] = r.array()?;
        r.finish()?;
        Ok(SigningKey(ed25519_dalek::SigningKey::from_bytes(&seed)))
    }
}

impl fmt::Debug for SigningKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("SigningKey(..)")
    }
}

/// Public verification key; its encoding names the signature scheme.
#[derive(Clone, Copy, PartialEq, Eq)]
pub struct VerifyingKey(ed25519_dalek::VerifyingKey);

impl VerifyingKey {
    pub fn verify(&self, msg: &[u8], signature: &[u8]) -> bool {
        let Ok(sig) = ed25519_dalek::Signature::from_slice(signature) else {
            return false;
        };
        self.0.verify(msg, &sig).is_ok()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = FieldWriter::new(SIGNATURE_SCHEME);
        w.bytes(self.0.as_bytes());
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, DecodeError> {
        let mut r = FieldReader::with_label(bytes, SIGNATURE_SCHEME)?;
        let raw: [u8; 32] = r.array()?;
        r.finish()?;
        ed25519_dalek::VerifyingKey::from_bytes(&raw)
            .map(VerifyingKey)
            .map_err(|_| DecodeError::InvalidElement("ed25519 verifying key"))
    }

    pub fn fingerprint(&self) -> [u8; 32] {
        Sha256::digest(self.to_bytes()).into()
    }
}

impl fmt::Debug for VerifyingKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "VerifyingKey({})", hex::encode(self.0.as_bytes()))
    }
}

/// The signed message for a row: label, keyword, count, then each identifier.
pub fn row_message(keyword: &Keyword, fids: &[FileId]) -> Vec<u8> {
    let mut w = FieldWriter::new(ROW_MESSAGE_LABEL);
    w.str(keyword.as_str()).u32(fids.len() as u32);
    for fid in fids {
        w.bytes(&fid.to_bytes());
    }
    w.finish()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IndexRow {
    pub keyword: Keyword,
    pub fids: Vec<FileId>,
    pub signature: Vec<u8>,
}

impl IndexRow {
    pub fn len(&self) -> usize {
        self.fids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fids.is_empty()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = FieldWriter::new(ROW_LABEL);
        w.str(self.keyword.as_str()).u32(self.fids.len() as u32);
        for fid in &self.fids {
            w.bytes(&fid.to_bytes());
        }
        w.bytes(&self.signature);
        w.finish()
    }

    /// Decodes a row without judging it; ordering and signature are left to
    /// [`verify_row`].
    pub fn from_bytes(bytes: &[u8]) -> Result<Self, DecodeError> {
        let mut r = FieldReader::with_label(bytes, ROW_LABEL)?;
        let keyword = Keyword::from_wire(r.bytes()?)?;
        let n = r.count(4 + SCALAR_BYTES)?;
        let fids = (0..n)
            .map(|_| FileId::from_slice(r.bytes()?))
            .collect::<Result<Vec<_>, _>>()?;
        let signature = r.bytes()?.to_vec();
        r.finish()?;
        Ok(IndexRow {
            keyword,
            fids,
            signature,
        })
    }
}

/// True iff `row` is the owner-signed row for `keyword`.
pub fn verify_row(psk: &VerifyingKey, keyword: &Keyword, row: &IndexRow) -> bool {
    row.keyword == *keyword && psk.verify(&row_message(keyword, &row.fids), &row.signature)
}

/// Keyword dictionary over signed rows.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LookupTable {
    rows: HashMap<Keyword, IndexRow>,
}

impl LookupTable {
    pub fn lookup(&self, keyword: &Keyword) -> Result<&IndexRow, IndexError> {
        self.rows
            .get(keyword)
            .ok_or_else(|| IndexError::KeywordNotFound(keyword.to_string()))
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Rows in keyword order.
    pub fn rows(&self) -> Vec<&IndexRow> {
        let mut rows: Vec<&IndexRow> = self.rows.values().collect();
        rows.sort_by(|a, b| a.keyword.cmp(&b.keyword));
        rows
    }

    /// Replaces (or inserts) a row verbatim. Used by test adversaries.
    pub fn replace_row(&mut self, row: IndexRow) {
        self.rows.insert(row.keyword.clone(), row);
    }

    /// Every identifier referenced by any row.
    pub fn referenced_fids(&self) -> BTreeSet<FileId> {
        self.rows
            .values()
            .flat_map(|r| r.fids.iter().copied())
            .collect()
    }

    /// Storage cost in bits: sum over rows of `n_w * |fid| + |signature|`.
    pub fn overhead_bits(&self) -> usize {
        self.rows
            .values()
            .map(|r| (r.fids.len() * SCALAR_BYTES + r.signature.len()) * 8)
            .sum()
    }

    /// Header (version, signer fingerprint, row count) then rows sorted by keyword.
    pub fn to_bytes(&self, psk: &VerifyingKey) -> Vec<u8> {
        let mut w = FieldWriter::new(TABLE_LABEL);
        w.u32(TABLE_VERSION)
            .bytes(&psk.fingerprint())
            .u32(self.rows.len() as u32);
        for row in self.rows() {
            w.bytes(&row.to_bytes());
        }
        w.finish()
    }

    /// Decodes a table, returning the signer fingerprint recorded in its header.
    pub fn from_bytes(bytes: &[u8]) -> Result<(Self, [u8; 32]), DecodeError> {
        let mut r = FieldReader::with_label(bytes, TABLE_LABEL)?;
        let version = r.u32()?;
        if version != TABLE_VERSION {
            return Err(DecodeError::Invalid(format!(
                "unsupported table version {version}"
            )));
        }
        let fingerprint: [u8; 32] = r.array()?;
        let n = r.count(4)?;
        let mut rows = HashMap::with_capacity(n);
        for _ in 0..n {
            let row = IndexRow::from_bytes(r.bytes()?)?;
            if rows.insert(row.keyword.clone(), row).is_some() {
                return Err(DecodeError::Invalid("duplicate keyword row".into()));
            }
        }
        r.finish()?;
        Ok((LookupTable { rows }, fingerprint))
    }
}

/// Builds the signed table from each file's keyword set.
pub fn build_table(
    files: &[(FileId, BTreeSet<Keyword>)],
    ssk: &SigningKey,
) -> Result<LookupTable, IndexError> {
    let mut seen = BTreeSet::new();
    let mut inverted: BTreeMap<&Keyword, Vec<FileId>> = BTreeMap::new();
    for (fid, keywords) in files {
        if !seen.insert(*fid) {
            return Err(IndexError::DuplicateFileId(*fid));
        }
        for w in keywords {
            inverted.entry(w).or_default().push(*fid);
        }
    }
    let rows = inverted
        .into_iter()
        .map(|(w, mut fids)| {
            fids.sort();
            let signature = ssk.sign(&row_message(w, &fids));
            (
                w.clone(),
                IndexRow {
                    keyword: w.clone(),
                    fids,
                    signature,
                },
            )
        })
        .collect();
    Ok(LookupTable { rows })
}
