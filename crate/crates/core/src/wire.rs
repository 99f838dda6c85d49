//! Request/response messages exchanged between roles.
//!
//! An encoded message is `version || kind || payload`, where the payload is a
//! field-tagged record labelled by kind. Decoding checks the version and kind
//! bytes, validates every length before allocating, and rejects trailing data.

use std::fmt;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::algebra::{G1Element, Scalar, SCALAR_BYTES};
use crate::beacon::Timestamp;
use crate::encoding::{DecodeError, FieldReader, FieldWriter};
use crate::keyword_index::{FileId, IndexRow, LookupTable};
use crate::scheme::{
    ChallengeSet, FileRecord, KeywordToken, ProofPair, PublicKey, StorageProof, TOKEN_NONCE_BYTES,
};

pub const WIRE_VERSION: u8 = 1;
/// Largest encoded message either side will accept.
pub const MAX_MESSAGE_BYTES: usize = 1 << 30;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum MessageKind {
    Upload = 1,
    ReadRequest = 2,
    ReadResponse = 3,
    FidChallenge = 4,
    KeywordToken = 5,
    Proof = 6,
    Error = 7,
    Ack = 8,
}

impl MessageKind {
    pub const ALL: [MessageKind; 8] = [
        MessageKind::Upload,
        MessageKind::ReadRequest,
        MessageKind::ReadResponse,
        MessageKind::FidChallenge,
        MessageKind::KeywordToken,
        MessageKind::Proof,
        MessageKind::Error,
        MessageKind::Ack,
    ];

    pub fn from_byte(b: u8) -> Option<Self> {
        Self::ALL.into_iter().find(|k| *k as u8 == b)
    }

    pub fn name(self) -> &'static str {
        match self {
            MessageKind::Upload => "upload",
            MessageKind::ReadRequest => "read-req",
            MessageKind::ReadResponse => "read-resp",
            MessageKind::FidChallenge => "fid-challenge",
            MessageKind::KeywordToken => "kw-token",
            MessageKind::Proof => "proof",
            MessageKind::Error => "error",
            MessageKind::Ack => "ack",
        }
    }

    fn label(self) -> String {
        format!("kdpos/msg/{}", self.name())
    }
}

impl fmt::Display for MessageKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum WireError {
    #[error("message is empty or lacks a header")]
    MissingHeader,
    #[error("unsupported wire version {0} (expected {WIRE_VERSION})")]
    VersionMismatch(u8),
    #[error("unknown message kind {0}")]
    UnknownKind(u8),
    #[error("message of {0} bytes exceeds the size limit")]
    TooLarge(usize),
    #[error("malformed {kind} message: {source}")]
    Malformed {
        kind: MessageKind,
        source: DecodeError,
    },
}

/// Everything the server needs to store: records, the signed table, and the
/// owner's public key (used to check requests are meant for this store).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UploadPackage {
    pub pk: PublicKey,
    pub records: Vec<FileRecord>,
    pub table: LookupTable,
}

/// How the challenge set is fixed.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ChallengeForm {
    /// The verifier sampled `Q` and sends it.
    Explicit(ChallengeSet),
    /// Both sides derive `Q` from the beacon output at `t` and `(s0, s1)`.
    Beacon {
        fids: Vec<FileId>,
        s0: [u8; TOKEN_NONCE_BYTES],
        s1: [u8; TOKEN_NONCE_BYTES],
        t: Timestamp,
        l: u32,
    },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FidChallenge {
    pub pk_fingerprint: [u8; 32],
    pub batch: bool,
    pub form: ChallengeForm,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TokenRequest {
    pub pk_fingerprint: [u8; 32],
    pub batch: bool,
    pub l: u32,
    pub token: KeywordToken,
}

/// A proof bound to the challenge it answers.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProofResponse {
    pub challenge_digest: [u8; 32],
    pub fid_digest: [u8; 32],
    /// `T_L[w]` for keyword audits.
    pub row: Option<IndexRow>,
    pub proof: StorageProof,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u16)]
pub enum ErrorCode {
    Malformed = 1,
    UnknownFile = 2,
    IndexOutOfRange = 3,
    KeywordNotFound = 4,
    RandomnessPending = 5,
    KeyMismatch = 6,
    EmptyChallenge = 7,
    NoData = 8,
    Unsupported = 9,
    Internal = 10,
}

impl ErrorCode {
    const ALL: [ErrorCode; 10] = [
        ErrorCode::Malformed,
        ErrorCode::UnknownFile,
        ErrorCode::IndexOutOfRange,
        ErrorCode::KeywordNotFound,
        ErrorCode::RandomnessPending,
        ErrorCode::KeyMismatch,
        ErrorCode::EmptyChallenge,
        ErrorCode::NoData,
        ErrorCode::Unsupported,
        ErrorCode::Internal,
    ];

    pub fn from_u16(v: u16) -> Option<Self> {
        Self::ALL.into_iter().find(|c| *c as u16 == v)
    }

    pub fn name(self) -> &'static str {
        match self {
            ErrorCode::Malformed => "malformed",
            ErrorCode::UnknownFile => "unknown-file",
            ErrorCode::IndexOutOfRange => "index-out-of-range",
            ErrorCode::KeywordNotFound => "keyword-not-found",
            ErrorCode::RandomnessPending => "randomness-pending",
            ErrorCode::KeyMismatch => "key-mismatch",
            ErrorCode::EmptyChallenge => "empty-challenge",
            ErrorCode::NoData => "no-data",
            ErrorCode::Unsupported => "unsupported",
            ErrorCode::Internal => "internal",
        }
    }
}

impl fmt::Display for ErrorCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ErrorReply {
    pub code: ErrorCode,
    pub detail: String,
}

impl ErrorReply {
    pub fn new(code: ErrorCode, detail: impl Into<String>) -> Self {
        ErrorReply {
            code,
            detail: detail.into(),
        }
    }
}

impl fmt::Display for ErrorReply {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.code, self.detail)
    }
}

// Messages are handled one at a time, so the large upload variant is not boxed.
#[allow(clippy::large_enum_variant)]
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Message {
    Upload(UploadPackage),
    ReadRequest {
        fid: FileId,
        index: u64,
    },
    ReadResponse {
        fid: FileId,
        index: u64,
        segment: Scalar,
        tag: G1Element,
    },
    FidChallenge(FidChallenge),
    KeywordToken(TokenRequest),
    Proof(ProofResponse),
    Error(ErrorReply),
    Ack(String),
}

impl Message {
    pub fn kind(&self) -> MessageKind {
        match self {
            Message::Upload(_) => MessageKind::Upload,
            Message::ReadRequest { .. } => MessageKind::ReadRequest,
            Message::ReadResponse { .. } => MessageKind::ReadResponse,
            Message::FidChallenge(_) => MessageKind::FidChallenge,
            Message::KeywordToken(_) => MessageKind::KeywordToken,
            Message::Proof(_) => MessageKind::Proof,
            Message::Error(_) => MessageKind::Error,
            Message::Ack(_) => MessageKind::Ack,
        }
    }

    pub fn error(code: ErrorCode, detail: impl Into<String>) -> Self {
        Message::Error(ErrorReply::new(code, detail))
    }
}

/// SHA-256 over the field-tagged list of identifiers, in order.
pub fn fid_list_digest(fids: &[FileId]) -> [u8; 32] {
    let mut w = FieldWriter::new("kdpos/fid-list");
    w.u32(fids.len() as u32);
    for f in fids {
        w.bytes(&f.to_bytes());
    }
    Sha256::digest(w.finish()).into()
}

const FORM_PER_FILE: u8 = 0;
const FORM_BATCHED: u8 = 1;
const FORM_EXPLICIT: u8 = 0;
const FORM_BEACON: u8 = 1;

fn encode_payload(msg: &Message, w: &mut FieldWriter) {
    match msg {
        Message::Upload(p) => {
            w.bytes(&p.pk.to_bytes()).u32(p.records.len() as u32);
            for r in &p.records {
                w.bytes(&r.to_bytes());
            }
            w.bytes(&p.table.to_bytes(&p.pk.psk));
        }
        Message::ReadRequest { fid, index } => {
            w.bytes(&fid.to_bytes()).u64(*index);
        }
        Message::ReadResponse {
            fid,
            index,
            segment,
            tag,
        } => {
            w.bytes(&fid.to_bytes())
                .u64(*index)
                .bytes(&segment.to_bytes())
                .bytes(&tag.to_bytes());
        }
        Message::FidChallenge(c) => {
            w.bytes(&c.pk_fingerprint).u8(c.batch as u8);
            match &c.form {
                ChallengeForm::Explicit(q) => {
                    w.u8(FORM_EXPLICIT);
                    q.encode_into(w);
                }
                ChallengeForm::Beacon { fids, s0, s1, t, l } => {
                    w.u8(FORM_BEACON).u32(fids.len() as u32);
                    for f in fids {
                        w.bytes(&f.to_bytes());
                    }
                    w.bytes(s0).bytes(s1).i64(t.0).u32(*l);
                }
            }
        }
        Message::KeywordToken(t) => {
            w.bytes(&t.pk_fingerprint).u8(t.batch as u8).u32(t.l);
            t.token.encode_into(w);
        }
        Message::Proof(p) => {
            let form = if p.proof.is_batched() {
                FORM_BATCHED
            } else {
                FORM_PER_FILE
            };
            w.u8(form).bytes(&p.challenge_digest).bytes(&p.fid_digest);
            match &p.row {
                Some(row) => w.bytes(&row.to_bytes()),
                None => w.bytes(&[]),
            };
            match &p.proof {
                StorageProof::Batched(pair) => {
                    w.bytes(&pair.to_bytes());
                }
                StorageProof::PerFile(pairs) => {
                    w.u32(pairs.len() as u32);
                    for (fid, pair) in pairs {
                        w.bytes(&fid.to_bytes()).bytes(&pair.to_bytes());
                    }
                }
            }
        }
        Message::Error(e) => {
            w.bytes(&(e.code as u16).to_be_bytes()).str(&e.detail);
        }
        Message::Ack(detail) => {
            w.str(detail);
        }
    }
}

fn flag(r: &mut FieldReader<'_>) -> Result<bool, DecodeError> {
    match r.u8()? {
        0 => Ok(false),
        1 => Ok(true),
        b => Err(DecodeError::Invalid(format!("flag byte {b}"))),
    }
}

fn decode_payload(kind: MessageKind, r: &mut FieldReader<'_>) -> Result<Message, DecodeError> {
    Ok(match kind {
        MessageKind::Upload => {
            let pk = PublicKey::from_bytes(r.bytes()?)?;
            let n = r.count(4)?;
            let records = (0..n)
                .map(|_| FileRecord::from_bytes(r.bytes()?))
                .collect::<Result<Vec<_>, _>>()?;
            let (table, signer) = LookupTable::from_bytes(r.bytes()?)?;
            if signer != pk.psk.fingerprint() {
                return Err(DecodeError::Invalid(
                    "table signer does not match the public key".into(),
                ));
            }
            Message::Upload(UploadPackage { pk, records, table })
        }
        MessageKind::ReadRequest => Message::ReadRequest {
            fid: FileId::from_slice(r.bytes()?)?,
            index: r.u64()?,
        },
        MessageKind::ReadResponse => Message::ReadResponse {
            fid: FileId::from_slice(r.bytes()?)?,
            index: r.u64()?,
            segment: Scalar::from_slice(r.bytes()?)?,
            tag: G1Element::from_slice(r.bytes()?)?,
        },
        MessageKind::FidChallenge => {
            let pk_fingerprint = r.array()?;
            let batch = flag(r)?;
            let form = match r.u8()? {
                FORM_EXPLICIT => ChallengeForm::Explicit(ChallengeSet::decode_from(r)?),
                FORM_BEACON => {
                    let n = r.count(4 + SCALAR_BYTES)?;
                    let fids = (0..n)
                        .map(|_| FileId::from_slice(r.bytes()?))
                        .collect::<Result<Vec<_>, _>>()?;
                    ChallengeForm::Beacon {
                        fids,
                        s0: r.array()?,
                        s1: r.array()?,
                        t: Timestamp(r.i64()?),
                        l: r.u32()?,
                    }
                }
                b => return Err(DecodeError::Invalid(format!("challenge form {b}"))),
            };
            Message::FidChallenge(FidChallenge {
                pk_fingerprint,
                batch,
                form,
            })
        }
        MessageKind::KeywordToken => Message::KeywordToken(TokenRequest {
            pk_fingerprint: r.array()?,
            batch: flag(r)?,
            l: r.u32()?,
            token: KeywordToken::decode_from(r)?,
        }),
        MessageKind::Proof => {
            let form = r.u8()?;
            let challenge_digest = r.array()?;
            let fid_digest = r.array()?;
            let row = match r.bytes()? {
                [] => None,
                raw => Some(IndexRow::from_bytes(raw)?),
            };
            let proof = match form {
                FORM_BATCHED => StorageProof::Batched(ProofPair::from_slice(r.bytes()?)?),
                FORM_PER_FILE => {
                    let n = r.count(8 + SCALAR_BYTES + ProofPair::ENCODED_LEN)?;
                    let pairs = (0..n)
                        .map(|_| {
                            Ok((
                                FileId::from_slice(r.bytes()?)?,
                                ProofPair::from_slice(r.bytes()?)?,
                            ))
                        })
                        .collect::<Result<Vec<_>, DecodeError>>()?;
                    StorageProof::PerFile(pairs)
                }
                b => return Err(DecodeError::Invalid(format!("proof form {b}"))),
            };
            Message::Proof(ProofResponse {
                challenge_digest,
                fid_digest,
                row,
                proof,
            })
        }
        MessageKind::Error => {
            let raw = u16::from_be_bytes(r.array()?);
            let code = ErrorCode::from_u16(raw)
                .ok_or_else(|| DecodeError::Invalid(format!("error code {raw}")))?;
            Message::Error(ErrorReply {
                code,
                detail: r.string()?,
            })
        }
        MessageKind::Ack => Message::Ack(r.string()?),
    })
}

/// Payload bytes of a message (the part after the two header bytes).
pub fn encode_payload_bytes(msg: &Message) -> Vec<u8> {
    let mut w = FieldWriter::new(&msg.kind().label());
    encode_payload(msg, &mut w);
    w.finish()
}

pub fn encode_message(msg: &Message) -> Vec<u8> {
    let payload = encode_payload_bytes(msg);
    let mut out = Vec::with_capacity(payload.len() + 2);
    out.push(WIRE_VERSION);
    out.push(msg.kind() as u8);
    out.extend_from_slice(&payload);
    out
}

pub fn decode_message(bytes: &[u8]) -> Result<Message, WireError> {
    if bytes.len() > MAX_MESSAGE_BYTES {
        return Err(WireError::TooLarge(bytes.len()));
    }
    let [version, kind, payload @ ..] = bytes else {
        return Err(WireError::MissingHeader);
    };
    if *version != WIRE_VERSION {
        return Err(WireError::VersionMismatch(*version));
    }
    let kind = MessageKind::from_byte(*kind).ok_or(WireError::UnknownKind(*kind))?;
    let malformed = |source| WireError::Malformed { kind, source };
    let mut r = FieldReader::with_label(payload, &kind.label()).map_err(malformed)?;
    let msg = decode_payload(kind, &mut r).map_err(malformed)?;
    r.finish().map_err(malformed)?;
    Ok(msg)
}
