//! Client, server and auditor.
//!
//! The client owns the keys and produces upload packages, the server stores
//! them and answers reads and audits, and the auditor checks the server with
//! nothing but the public key and the shared metadata.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock, RwLockReadGuard};
use std::time::Instant;

use rand::RngCore;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::algebra::{pairing_count, G1Element, Scalar};
use crate::beacon::{BeaconError, RandomnessSource, Timestamp, SEED_BYTES};
use crate::encoding::{DecodeError, FieldReader, FieldWriter};
use crate::erasure::{self, ErasureError, Rate};
use crate::keyword_index::{
    build_table, extract_keywords, verify_row, FileId, IndexError, IndexRow, Keyword, LookupTable,
};
use crate::scheme::{
    aggregate, derive_challenge, make_token, prove, sample_challenge, tag_file, verify,
    verify_batched, verify_read_with_secret, ChallengeSet, FileRecord, KeyPair, KeywordToken,
    Metadata, PublicKey, RecordSource, SchemeError, SecretKey, StorageProof,
    DEFAULT_CHALLENGE_SIZE, TOKEN_NONCE_BYTES,
};
use crate::transport::{Endpoint, Handler, TransportError};
use crate::wire::{
    encode_message, fid_list_digest, ChallengeForm, ErrorCode, ErrorReply, FidChallenge, Message,
    MessageKind, ProofResponse, TokenRequest, UploadPackage,
};

/// Largest per-file challenge a server will answer.
pub const MAX_CHALLENGE_SIZE: u32 = 1 << 16;

#[derive(Debug, Error)]
pub enum RoleError {
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error("server error {0}")]
    Server(ErrorReply),
    #[error("unexpected {0} response")]
    UnexpectedResponse(MessageKind),
    #[error(transparent)]
    Scheme(#[from] SchemeError),
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error(transparent)]
    Erasure(#[from] ErasureError),
    #[error(transparent)]
    Decode(#[from] DecodeError),
    #[error(transparent)]
    Beacon(#[from] BeaconError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("no files to outsource")]
    EmptyUpload,
    #[error("a file named {0:?} was already outsourced")]
    DuplicateName(String),
    #[error("no file {0} in the metadata")]
    UnknownFile(FileId),
    #[error("no file identifiers given")]
    NoFiles,
    #[error("file {fid}: only {got} of the {needed} needed segments verified")]
    NotEnoughValidSegments {
        fid: FileId,
        needed: usize,
        got: usize,
    },
    #[error("code rate {rate} does not fit a file of {segments} segments")]
    RateMismatch { rate: Rate, segments: u64 },
    #[error("upload rejected: {0}")]
    BadUpload(String),
    #[error("metadata signature does not verify")]
    BadMetadataSignature,
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> RoleError + '_ {
    move |source| RoleError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), RoleError> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes).map_err(io_err(&tmp))?;
    fs::rename(&tmp, path).map_err(io_err(path))
}

fn read_file(path: &Path) -> Result<Vec<u8>, RoleError> {
    fs::read(path).map_err(io_err(path))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FileEntry {
    pub name: String,
    pub segments: u64,
    pub keywords: BTreeSet<Keyword>,
}

/// Summary of one newly outsourced file.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct OutsourcedFile {
    pub name: String,
    pub fid: String,
    pub bytes: usize,
    pub segments: u64,
    pub keywords: usize,
    pub non_utf8: bool,
}

/// The data owner. Keeps keys, the code rate, and per-file keyword sets so
/// the signed table can be rebuilt over every file on each upload.
#[derive(Clone, Debug)]
pub struct ClientState {
    pub keys: KeyPair,
    pub rate: Rate,
    files: BTreeMap<FileId, FileEntry>,
}

impl ClientState {
    pub fn new(keys: KeyPair, rate: Rate) -> Self {
        ClientState {
            keys,
            rate,
            files: BTreeMap::new(),
        }
    }

    pub fn files(&self) -> &BTreeMap<FileId, FileEntry> {
        &self.files
    }

    pub fn find(&self, name: &str) -> Option<FileId> {
        self.files
            .iter()
            .find(|(_, e)| e.name == name)
            .map(|(f, _)| *f)
    }

    pub fn metadata(&self) -> Metadata {
        let mut md = Metadata::new();
        for (fid, e) in &self.files {
            md.insert(*fid, e.segments);
        }
        md
    }

    /// Encodes, tags and indexes `files`; the package carries the new records
    /// and a table re-signed over every file outsourced so far.
    pub fn outsource<R: RngCore + ?Sized>(
        &mut self,
        files: &[(String, Vec<u8>)],
        rng: &mut R,
    ) -> Result<(UploadPackage, Vec<OutsourcedFile>), RoleError> {
        if files.is_empty() {
            return Err(RoleError::EmptyUpload);
        }
        let mut names: BTreeSet<&str> = self.files.values().map(|e| e.name.as_str()).collect();
        for (name, _) in files {
            if !names.insert(name) {
                return Err(RoleError::DuplicateName(name.clone()));
            }
        }
        let mut records = Vec::with_capacity(files.len());
        let mut entries = Vec::with_capacity(files.len());
        let mut summary = Vec::with_capacity(files.len());
        for (name, bytes) in files {
            let fid = loop {
                let f = FileId::random(rng);
                if !self.files.contains_key(&f) && !records.iter().any(|r: &FileRecord| r.fid == f)
                {
                    break f;
                }
            };
            let codeword = erasure::encode(&erasure::pack_bytes(bytes), self.rate)?;
            let record = tag_file(fid, codeword, &self.keys)?;
            let extraction = extract_keywords(bytes);
            summary.push(OutsourcedFile {
                name: name.clone(),
                fid: fid.to_string(),
                bytes: bytes.len(),
                segments: record.segment_count(),
                keywords: extraction.keywords.len(),
                non_utf8: extraction.non_utf8,
            });
            entries.push((
                fid,
                FileEntry {
                    name: name.clone(),
                    segments: record.segment_count(),
                    keywords: extraction.keywords,
                },
            ));
            records.push(record);
        }
        let mut all = self.files.clone();
        all.extend(entries);
        let index: Vec<(FileId, BTreeSet<Keyword>)> =
            all.iter().map(|(f, e)| (*f, e.keywords.clone())).collect();
        let table = build_table(&index, self.keys.sk.signing_key())?;
        self.files = all;
        Ok((
            UploadPackage {
                pk: self.keys.pk,
                records,
                table,
            },
            summary,
        ))
    }

    /// Fetches and checks segments until enough verify, then decodes.
    pub fn read_file(&self, server: &dyn Endpoint, fid: &FileId) -> Result<Vec<u8>, RoleError> {
        let n = self
            .files
            .get(fid)
            .ok_or(RoleError::UnknownFile(*fid))?
            .segments;
        let k = self
            .rate
            .message_len(n as usize)
            .ok_or(RoleError::RateMismatch {
                rate: self.rate,
                segments: n,
            })?;
        let mut fragments = Vec::with_capacity(k);
        for j in 1..=n {
            if fragments.len() == k {
                break;
            }
            let reply = server.call(&Message::ReadRequest {
                fid: *fid,
                index: j,
            })?;
            match reply {
                Message::ReadResponse {
                    fid: got,
                    index,
                    segment,
                    tag,
                } if got == *fid && index == j => {
                    if verify_read_with_secret(fid, j, &segment, &tag, &self.keys) {
                        fragments.push((j as usize - 1, segment));
                    }
                }
                Message::Error(e) if e.code == ErrorCode::IndexOutOfRange => {}
                Message::Error(e) => return Err(RoleError::Server(e)),
                other => return Err(RoleError::UnexpectedResponse(other.kind())),
            }
        }
        if fragments.len() < k {
            return Err(RoleError::NotEnoughValidSegments {
                fid: *fid,
                needed: k,
                got: fragments.len(),
            });
        }
        let message = if fragments.iter().enumerate().all(|(i, (pos, _))| i == *pos) {
            fragments.into_iter().map(|(_, m)| m).collect()
        } else {
            erasure::decode(&fragments, k)?
        };
        Ok(erasure::unpack_bytes(&message)?)
    }

    /// Metadata plus the owner's signature, for handing to an auditor.
    pub fn metadata_file(&self) -> MetadataFile {
        MetadataFile::sign(self.keys.pk, self.rate, self.metadata(), &self.keys.sk)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = FieldWriter::new("kdpos/client");
        w.bytes(&self.keys.sk.to_bytes())
            .bytes(&self.keys.pk.to_bytes())
            .u32(self.rate.numerator())
            .u32(self.rate.denominator())
            .u32(self.files.len() as u32);
        for (fid, e) in &self.files {
            w.bytes(&fid.to_bytes())
                .str(&e.name)
                .u64(e.segments)
                .u32(e.keywords.len() as u32);
            for k in &e.keywords {
                w.str(k.as_str());
            }
        }
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, RoleError> {
        let mut r = FieldReader::with_label(bytes, "kdpos/client")?;
        let sk = SecretKey::from_bytes(r.bytes()?)?;
        let pk = PublicKey::from_bytes(r.bytes()?)?;
        let rate = Rate::new(r.u32()?, r.u32()?)?;
        let n = r.count(4 * 4)?;
        let mut files = BTreeMap::new();
        for _ in 0..n {
            let fid = FileId::from_slice(r.bytes()?)?;
            let name = r.string()?;
            let segments = r.u64()?;
            let nk = r.count(5)?;
            let mut keywords = BTreeSet::new();
            for _ in 0..nk {
                let raw = r.string()?;
                let k = Keyword::parse(&raw)
                    .filter(|k| k.as_str() == raw)
                    .ok_or_else(|| DecodeError::Invalid(format!("bad keyword {raw:?}")))?;
                keywords.insert(k);
            }
            files.insert(
                fid,
                FileEntry {
                    name,
                    segments,
                    keywords,
                },
            );
        }
        r.finish()?;
        Ok(ClientState {
            keys: KeyPair { sk, pk },
            rate,
            files,
        })
    }
}

/// Owner-signed `(pk, rate, metadata)` as loaded by an auditor.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MetadataFile {
    pub pk: PublicKey,
    pub rate: Rate,
    pub metadata: Metadata,
    signature: Vec<u8>,
}

impl MetadataFile {
    fn body(pk: &PublicKey, rate: Rate, metadata: &Metadata) -> Vec<u8> {
        let mut w = FieldWriter::new("kdpos/metadata");
        w.bytes(&pk.to_bytes())
            .u32(rate.numerator())
            .u32(rate.denominator());
        metadata.encode_into(&mut w);
        w.finish()
    }

    pub fn sign(pk: PublicKey, rate: Rate, metadata: Metadata, sk: &SecretKey) -> Self {
        let signature = sk.signing_key().sign(&Self::body(&pk, rate, &metadata));
        MetadataFile {
            pk,
            rate,
            metadata,
            signature,
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = FieldWriter::new("kdpos/signed-metadata");
        w.bytes(&Self::body(&self.pk, self.rate, &self.metadata))
            .bytes(&self.signature);
        w.finish()
    }

    /// Decodes and checks the signature against the enclosed key.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self, RoleError> {
        let mut r = FieldReader::with_label(bytes, "kdpos/signed-metadata")?;
        let body = r.bytes()?;
        let signature = r.bytes()?.to_vec();
        r.finish()?;
        let mut b = FieldReader::with_label(body, "kdpos/metadata")?;
        let pk = PublicKey::from_bytes(b.bytes()?)?;
        let rate = Rate::new(b.u32()?, b.u32()?)?;
        let metadata = Metadata::decode_from(&mut b)?;
        b.finish()?;
        if !pk.psk.verify(body, &signature) {
            return Err(RoleError::BadMetadataSignature);
        }
        Ok(MetadataFile {
            pk,
            rate,
            metadata,
            signature,
        })
    }
}

/// A challenge the server has pinned down and is about to answer.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Resolved {
    pub challenge: ChallengeSet,
    pub row: Option<IndexRow>,
    pub batch: bool,
}

/// The server's storage: records by identifier, the signed table, and the
/// owner's public key.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ServerStore {
    pub pk: Option<PublicKey>,
    pub records: HashMap<FileId, FileRecord>,
    pub table: LookupTable,
}

impl RecordSource for ServerStore {
    fn record(&self, fid: &FileId) -> Option<&FileRecord> {
        self.records.get(fid)
    }
}

impl ServerStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds the package's records and adopts its table.
    pub fn ingest(&mut self, package: UploadPackage) -> Result<(), RoleError> {
        if let Some(pk) = &self.pk {
            if *pk != package.pk {
                return Err(RoleError::BadUpload(
                    "package is for a different public key".into(),
                ));
            }
        }
        let mut incoming = HashMap::with_capacity(package.records.len());
        for rec in package.records {
            if rec.segments.is_empty() || rec.segments.len() != rec.tags.len() {
                return Err(RoleError::BadUpload(format!(
                    "record {} has mismatched tags",
                    rec.fid
                )));
            }
            if let Some(old) = self.records.get(&rec.fid) {
                if *old != rec {
                    return Err(RoleError::BadUpload(format!(
                        "file {} is already stored",
                        rec.fid
                    )));
                }
            }
            if incoming.insert(rec.fid, rec).is_some() {
                return Err(RoleError::BadUpload(
                    "duplicate file identifier in package".into(),
                ));
            }
        }
        for fid in package.table.referenced_fids() {
            if !self.records.contains_key(&fid) && !incoming.contains_key(&fid) {
                return Err(RoleError::BadUpload(format!(
                    "table references unknown file {fid}"
                )));
            }
        }
        self.pk = Some(package.pk);
        self.records.extend(incoming);
        self.table = package.table;
        Ok(())
    }

    pub fn serve_read(&self, fid: &FileId, index: u64) -> Result<(Scalar, G1Element), ErrorReply> {
        let rec = self
            .records
            .get(fid)
            .ok_or_else(|| ErrorReply::new(ErrorCode::UnknownFile, fid.to_string()))?;
        rec.get(index).ok_or_else(|| {
            ErrorReply::new(
                ErrorCode::IndexOutOfRange,
                format!("segment {index} of {}", rec.segment_count()),
            )
        })
    }

    fn counts(&self, fids: &[FileId]) -> Result<Vec<(FileId, u64)>, ErrorReply> {
        fids.iter()
            .map(|f| {
                self.records
                    .get(f)
                    .map(|r| (*f, r.segment_count()))
                    .ok_or_else(|| ErrorReply::new(ErrorCode::UnknownFile, f.to_string()))
            })
            .collect()
    }

    fn check_key(&self, fingerprint: &[u8; 32]) -> Result<(), ErrorReply> {
        match &self.pk {
            None => Err(ErrorReply::new(
                ErrorCode::NoData,
                "nothing has been uploaded",
            )),
            Some(pk) if pk.fingerprint() != *fingerprint => Err(ErrorReply::new(
                ErrorCode::KeyMismatch,
                "request is for a different public key",
            )),
            Some(_) => Ok(()),
        }
    }

    fn beacon_challenge(
        &self,
        beacon: &dyn RandomnessSource,
        t: Timestamp,
        fids: &[FileId],
        s0: &[u8],
        s1: &[u8],
        l: u32,
    ) -> Result<ChallengeSet, ErrorReply> {
        if l == 0 || l > MAX_CHALLENGE_SIZE {
            return Err(ErrorReply::new(
                ErrorCode::Malformed,
                format!("challenge size {l}"),
            ));
        }
        if fids.is_empty() {
            return Err(ErrorReply::new(
                ErrorCode::EmptyChallenge,
                "no files to challenge",
            ));
        }
        let files = self.counts(fids)?;
        let out = beacon
            .get_randomness(t)
            .map_err(|e| ErrorReply::new(ErrorCode::Internal, e.to_string()))?
            .ok_or_else(|| {
                ErrorReply::new(
                    ErrorCode::RandomnessPending,
                    format!("no block after {t} yet"),
                )
            })?;
        derive_challenge(&out.str_t, &files, s0, s1, l as usize)
            .map_err(|e| ErrorReply::new(ErrorCode::Malformed, e.to_string()))
    }

    /// Works out which challenge a request asks for.
    pub fn resolve(
        &self,
        request: &Message,
        beacon: &dyn RandomnessSource,
    ) -> Result<Resolved, ErrorReply> {
        match request {
            Message::FidChallenge(FidChallenge {
                pk_fingerprint,
                batch,
                form,
            }) => {
                self.check_key(pk_fingerprint)?;
                let challenge = match form {
                    ChallengeForm::Explicit(q) => {
                        if q.is_empty() {
                            return Err(ErrorReply::new(
                                ErrorCode::EmptyChallenge,
                                "empty challenge",
                            ));
                        }
                        q.clone()
                    }
                    ChallengeForm::Beacon { fids, s0, s1, t, l } => {
                        self.beacon_challenge(beacon, *t, fids, s0, s1, *l)?
                    }
                };
                Ok(Resolved {
                    challenge,
                    row: None,
                    batch: *batch,
                })
            }
            Message::KeywordToken(TokenRequest {
                pk_fingerprint,
                batch,
                l,
                token,
            }) => {
                self.check_key(pk_fingerprint)?;
                let row = self
                    .table
                    .lookup(&token.keyword)
                    .map_err(|e| ErrorReply::new(ErrorCode::KeywordNotFound, e.to_string()))?
                    .clone();
                let challenge =
                    self.beacon_challenge(beacon, token.t, &row.fids, &token.s0, &token.s1, *l)?;
                Ok(Resolved {
                    challenge,
                    row: Some(row),
                    batch: *batch,
                })
            }
            other => Err(ErrorReply::new(
                ErrorCode::Unsupported,
                format!("{} is not a challenge", other.kind()),
            )),
        }
    }

    pub fn save(&self, root: &Path) -> Result<(), RoleError> {
        let dir = root.join("records");
        fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        let Some(pk) = &self.pk else {
            return Ok(());
        };
        for (fid, rec) in &self.records {
            let path = dir.join(format!("{fid}.rec"));
            if !path.exists() {
                write_atomic(&path, &rec.to_bytes())?;
            }
        }
        write_atomic(&root.join("table.bin"), &self.table.to_bytes(&pk.psk))?;
        write_atomic(&root.join("pk.bin"), &pk.to_bytes())
    }

    /// Loads a store written by [`ServerStore::save`]; a missing root or an
    /// empty directory yields an empty store.
    pub fn load(root: &Path) -> Result<Self, RoleError> {
        let pk_path = root.join("pk.bin");
        if !pk_path.exists() {
            return Ok(ServerStore::new());
        }
        let pk = PublicKey::from_bytes(&read_file(&pk_path)?)?;
        let table_path = root.join("table.bin");
        let (table, signer) = LookupTable::from_bytes(&read_file(&table_path)?)?;
        if signer != pk.psk.fingerprint() {
            return Err(RoleError::BadUpload(
                "stored table was signed by another key".into(),
            ));
        }
        let dir = root.join("records");
        let mut records = Vec::new();
        let mut entries: Vec<PathBuf> = fs::read_dir(&dir)
            .map_err(io_err(&dir))?
            .map(|e| e.map(|e| e.path()))
            .collect::<Result<_, _>>()
            .map_err(io_err(&dir))?;
        entries.sort();
        for path in entries {
            if path.extension().is_some_and(|e| e == "rec") {
                let rec = FileRecord::from_bytes(&read_file(&path)?)?;
                if path.file_stem().and_then(|s| s.to_str()) != Some(rec.fid.to_string().as_str()) {
                    return Err(RoleError::BadUpload(format!(
                        "{} holds another file",
                        path.display()
                    )));
                }
                records.push(rec);
            }
        }
        let mut store = ServerStore::new();
        store.ingest(UploadPackage { pk, records, table })?;
        Ok(store)
    }
}

/// Proves the resolved challenge from `source` and wraps it for the wire.
pub fn answer<S: RecordSource + ?Sized>(resolved: &Resolved, source: &S) -> Message {
    let proof = match prove(&resolved.challenge, source) {
        Ok(p) => p,
        Err(e @ SchemeError::UnknownFile(_)) => {
            return Message::error(ErrorCode::UnknownFile, e.to_string())
        }
        Err(e @ SchemeError::IndexOutOfRange { .. }) => {
            return Message::error(ErrorCode::IndexOutOfRange, e.to_string())
        }
        Err(e) => return Message::error(ErrorCode::Malformed, e.to_string()),
    };
    let proof = if resolved.batch {
        match aggregate(&proof) {
            Ok(pair) => StorageProof::Batched(pair),
            Err(e) => return Message::error(ErrorCode::Internal, e.to_string()),
        }
    } else {
        proof
    };
    Message::Proof(ProofResponse {
        challenge_digest: resolved.challenge.digest(),
        fid_digest: fid_list_digest(&resolved.challenge.fids()),
        row: resolved.row.clone(),
        proof,
    })
}

/// Honest server: a store behind a read-write lock, optionally persisted.
pub struct Server {
    store: RwLock<ServerStore>,
    beacon: Arc<dyn RandomnessSource>,
    root: Option<PathBuf>,
}

impl Server {
    pub fn new(store: ServerStore, beacon: Arc<dyn RandomnessSource>) -> Self {
        Server {
            store: RwLock::new(store),
            beacon,
            root: None,
        }
    }

    /// Opens (or creates) a store directory; uploads are written back to it.
    pub fn open(root: &Path, beacon: Arc<dyn RandomnessSource>) -> Result<Self, RoleError> {
        let store = ServerStore::load(root)?;
        Ok(Server {
            store: RwLock::new(store),
            beacon,
            root: Some(root.to_path_buf()),
        })
    }

    pub fn store(&self) -> RwLockReadGuard<'_, ServerStore> {
        self.store.read().unwrap_or_else(|e| e.into_inner())
    }

    pub fn into_store(self) -> ServerStore {
        self.store.into_inner().unwrap_or_else(|e| e.into_inner())
    }

    pub fn beacon(&self) -> &Arc<dyn RandomnessSource> {
        &self.beacon
    }

    fn upload(&self, package: UploadPackage) -> Message {
        let mut store = self.store.write().unwrap_or_else(|e| e.into_inner());
        let mut next = store.clone();
        let count = package.records.len();
        if let Err(e) = next.ingest(package) {
            return Message::error(ErrorCode::Malformed, e.to_string());
        }
        if let Some(root) = &self.root {
            if let Err(e) = next.save(root) {
                return Message::error(ErrorCode::Internal, e.to_string());
            }
        }
        *store = next;
        Message::Ack(format!("stored {count} files"))
    }
}

impl Handler for Server {
    fn handle(&self, request: Message) -> Message {
        match request {
            Message::Upload(p) => self.upload(p),
            Message::ReadRequest { fid, index } => match self.store().serve_read(&fid, index) {
                Ok((segment, tag)) => Message::ReadResponse {
                    fid,
                    index,
                    segment,
                    tag,
                },
                Err(e) => Message::Error(e),
            },
            req @ (Message::FidChallenge(_) | Message::KeywordToken(_)) => {
                let store = self.store();
                match store.resolve(&req, self.beacon.as_ref()) {
                    Ok(resolved) => answer(&resolved, &*store),
                    Err(e) => Message::Error(e),
                }
            }
            other => Message::error(
                ErrorCode::Unsupported,
                format!("cannot handle {}", other.kind()),
            ),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AuditMode {
    /// The auditor samples `Q` and sends it.
    Interactive,
    /// `Q` is derived from beacon output on both sides.
    Beacon,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Pass,
    Fail,
    /// The beacon has not produced output for the requested time yet.
    Deferred,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub challenge_ms: f64,
    pub server_ms: f64,
    pub verify_ms: f64,
}

/// One audit, as written to the JSON-lines report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    /// `fid` or `keyword`.
    pub audit: String,
    pub mode: AuditMode,
    pub batch: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub keyword: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beacon_height: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beacon_output: Option<String>,
    /// Hex `s0` and `s1` that, with the beacon output, fix a derived challenge.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nonces: Option<[String; 2]>,
    pub pk_fingerprint: String,
    pub challenge_size: usize,
    pub challenged_fids: Vec<String>,
    pub outcome: Outcome,
    /// Which check failed: `row-signature`, `empty-row`, `unknown-file`,
    /// `challenge-binding`, `fid-set`, `proof-form`, `per-file-equation`,
    /// `batched-equation`, or `server-error`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failed_check: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub challenge_digest: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub proof_digest: Option<String>,
    /// Bytes of `(sigma, mu)` material in the proof.
    pub proof_bytes: usize,
    /// Size of the whole encoded response message.
    pub response_bytes: usize,
    pub pairings: u64,
    pub timings: Timings,
    /// The challenge the auditor checked against.
    #[serde(skip)]
    pub challenge: Option<ChallengeSet>,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.outcome == Outcome::Pass
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }

    fn fail(&mut self, check: &str, reason: impl Into<String>) {
        self.outcome = Outcome::Fail;
        self.failed_check = Some(check.to_string());
        self.reason = Some(reason.into());
    }
}

fn ms(since: Instant) -> f64 {
    since.elapsed().as_secs_f64() * 1e3
}

/// What the auditor checks a proof response against.
enum Expect {
    Challenge(ChallengeSet),
    /// The challenge depends on the row the server returns.
    Token {
        token: KeywordToken,
        str_t: [u8; SEED_BYTES],
    },
}

/// Third-party auditor: public key, metadata and a beacon handle. Holds no
/// secrets.
pub struct AuditorState {
    pub pk: PublicKey,
    pub metadata: Metadata,
    pub beacon: Arc<dyn RandomnessSource>,
    pub challenge_size: usize,
}

impl AuditorState {
    pub fn new(pk: PublicKey, metadata: Metadata, beacon: Arc<dyn RandomnessSource>) -> Self {
        AuditorState {
            pk,
            metadata,
            beacon,
            challenge_size: DEFAULT_CHALLENGE_SIZE,
        }
    }

    pub fn with_challenge_size(mut self, l: usize) -> Self {
        self.challenge_size = l;
        self
    }

    fn report(&self, audit: &str, mode: AuditMode, batch: bool) -> AuditReport {
        AuditReport {
            audit: audit.to_string(),
            mode,
            batch,
            keyword: None,
            timestamp: None,
            beacon_height: None,
            beacon_output: None,
            nonces: None,
            pk_fingerprint: hex::encode(self.pk.fingerprint()),
            challenge_size: self.challenge_size,
            challenged_fids: Vec::new(),
            outcome: Outcome::Pass,
            failed_check: None,
            reason: None,
            challenge_digest: None,
            proof_digest: None,
            proof_bytes: 0,
            response_bytes: 0,
            pairings: 0,
            timings: Timings::default(),
            challenge: None,
        }
    }

    fn l_u32(&self) -> Result<u32, RoleError> {
        match u32::try_from(self.challenge_size) {
            Ok(l) if (1..=MAX_CHALLENGE_SIZE).contains(&l) => Ok(l),
            _ => Err(SchemeError::ZeroChallengeSize.into()),
        }
    }

    /// Sends `request` and checks the reply. Transport problems are errors;
    /// everything the server gets wrong lands in the report.
    fn exchange(
        &self,
        server: &dyn Endpoint,
        request: &Message,
        expect: Expect,
        report: &mut AuditReport,
    ) -> Result<(), RoleError> {
        let sent = Instant::now();
        let reply = server.call(request)?;
        report.timings.server_ms = ms(sent);
        report.response_bytes = encode_message(&reply).len();
        let resp = match reply {
            Message::Proof(p) => p,
            Message::Error(e) if e.code == ErrorCode::RandomnessPending => {
                report.outcome = Outcome::Deferred;
                report.reason = Some(e.to_string());
                return Ok(());
            }
            Message::Error(e) if e.code == ErrorCode::KeywordNotFound => {
                report.fail("keyword-not-found", e.to_string());
                return Ok(());
            }
            Message::Error(e) => {
                report.fail("server-error", e.to_string());
                return Ok(());
            }
            other => return Err(RoleError::UnexpectedResponse(other.kind())),
        };
        report.proof_bytes = resp.proof.pair_bytes();
        report.proof_digest = Some(hex::encode(Sha256::digest(encode_message(
            &Message::Proof(resp.clone()),
        ))));

        let started = Instant::now();
        let pairings_before = pairing_count();
        let verdict = self.check_response(expect, &resp, report);
        report.pairings = pairing_count() - pairings_before;
        report.timings.verify_ms = ms(started);
        if let Err((check, reason)) = verdict {
            report.fail(check, reason);
        }
        Ok(())
    }

    /// Checks the row (keyword audits), then challenge binding, file list,
    /// proof form and the pairing equation, in that order.
    fn check_response(
        &self,
        expect: Expect,
        resp: &ProofResponse,
        report: &mut AuditReport,
    ) -> Result<(), (&'static str, String)> {
        let challenge = match expect {
            Expect::Challenge(q) => q,
            Expect::Token { token, str_t } => {
                let w = &token.keyword;
                let row = resp
                    .row
                    .as_ref()
                    .ok_or(("row-signature", "response carries no index row".to_string()))?;
                if !verify_row(&self.pk.psk, w, row) {
                    return Err((
                        "row-signature",
                        format!("row for {w:?} is not signed by the owner"),
                    ));
                }
                if row.fids.is_empty() {
                    return Err(("empty-row", format!("row for {w:?} lists no files")));
                }
                report.challenged_fids = row.fids.iter().map(|f| f.to_string()).collect();
                let files = self
                    .metadata
                    .select(&row.fids)
                    .map_err(|e| ("unknown-file", e.to_string()))?;
                token
                    .challenge(&str_t, &files, self.challenge_size)
                    .map_err(|e| ("challenge-binding", e.to_string()))?
            }
        };
        report.challenge_digest = Some(hex::encode(challenge.digest()));
        let challenge = report.challenge.insert(challenge);
        if resp.challenge_digest != challenge.digest() {
            return Err((
                "challenge-binding",
                "proof answers a different challenge".into(),
            ));
        }
        if resp.fid_digest != fid_list_digest(&challenge.fids()) {
            return Err(("fid-set", "proof covers a different file list".into()));
        }
        if resp.proof.is_batched() != report.batch {
            return Err(("proof-form", "proof is not in the requested form".into()));
        }
        let (check, result) = match &resp.proof {
            StorageProof::Batched(pair) => (
                "batched-equation",
                verify_batched(challenge, pair, &self.pk),
            ),
            per_file => ("per-file-equation", verify(challenge, per_file, &self.pk)),
        };
        match result {
            Ok(true) => Ok(()),
            Ok(false) => Err((check, "pairing equation does not hold".into())),
            Err(SchemeError::FidSetMismatch) => {
                Err(("fid-set", SchemeError::FidSetMismatch.to_string()))
            }
            Err(e) => Err((check, e.to_string())),
        }
    }

    /// File-identifier audit over `fids`.
    pub fn audit_by_fids<R: RngCore + ?Sized>(
        &self,
        server: &dyn Endpoint,
        fids: &[FileId],
        mode: AuditMode,
        batch: bool,
        timestamp: Option<Timestamp>,
        rng: &mut R,
    ) -> Result<AuditReport, RoleError> {
        if fids.is_empty() {
            return Err(RoleError::NoFiles);
        }
        let files = self.metadata.select(fids).map_err(|e| match e {
            SchemeError::UnknownFile(f) => RoleError::UnknownFile(f),
            other => other.into(),
        })?;
        let l = self.l_u32()?;
        let mut report = self.report("fid", mode, batch);
        report.challenged_fids = fids.iter().map(|f| f.to_string()).collect();
        let started = Instant::now();
        let (challenge, form) = match mode {
            AuditMode::Interactive => {
                let q = sample_challenge(&files, self.challenge_size, rng)?;
                (q.clone(), ChallengeForm::Explicit(q))
            }
            AuditMode::Beacon => {
                let t = match timestamp {
                    Some(t) => t,
                    None => self.beacon.recent_timestamp()?,
                };
                report.timestamp = Some(t.0);
                let mut s0 = [0u8; TOKEN_NONCE_BYTES];
                let mut s1 = [0u8; TOKEN_NONCE_BYTES];
                rng.fill_bytes(&mut s0);
                rng.fill_bytes(&mut s1);
                let Some(out) = self.beacon.get_randomness(t)? else {
                    report.outcome = Outcome::Deferred;
                    report.reason = Some(format!("no beacon output after {t} yet"));
                    return Ok(report);
                };
                report.beacon_height = Some(out.block_height);
                report.beacon_output = Some(hex::encode(out.str_t));
                report.nonces = Some([hex::encode(s0), hex::encode(s1)]);
                let q = derive_challenge(&out.str_t, &files, &s0, &s1, self.challenge_size)?;
                (
                    q,
                    ChallengeForm::Beacon {
                        fids: fids.to_vec(),
                        s0,
                        s1,
                        t,
                        l,
                    },
                )
            }
        };
        report.timings.challenge_ms = ms(started);
        let request = Message::FidChallenge(FidChallenge {
            pk_fingerprint: self.pk.fingerprint(),
            batch,
            form,
        });
        self.exchange(server, &request, Expect::Challenge(challenge), &mut report)?;
        Ok(report)
    }

    /// Keyword audit: one token covers every file whose row lists `keyword`.
    pub fn audit_by_keyword<R: RngCore + ?Sized>(
        &self,
        server: &dyn Endpoint,
        keyword: &Keyword,
        timestamp: Option<Timestamp>,
        batch: bool,
        rng: &mut R,
    ) -> Result<AuditReport, RoleError> {
        let l = self.l_u32()?;
        let mut report = self.report("keyword", AuditMode::Beacon, batch);
        report.keyword = Some(keyword.to_string());
        let started = Instant::now();
        let t = match timestamp {
            Some(t) => t,
            None => self.beacon.recent_timestamp()?,
        };
        report.timestamp = Some(t.0);
        let token = make_token(keyword.clone(), t, rng);
        let Some(out) = self.beacon.get_randomness(t)? else {
            report.outcome = Outcome::Deferred;
            report.reason = Some(format!("no beacon output after {t} yet"));
            return Ok(report);
        };
        report.beacon_height = Some(out.block_height);
        report.beacon_output = Some(hex::encode(out.str_t));
        report.nonces = Some([hex::encode(token.s0), hex::encode(token.s1)]);
        report.timings.challenge_ms = ms(started);
        let request = Message::KeywordToken(TokenRequest {
            pk_fingerprint: self.pk.fingerprint(),
            batch,
            l,
            token: token.clone(),
        });
        let expect = Expect::Token {
            token,
            str_t: out.str_t,
        };
        self.exchange(server, &request, expect, &mut report)?;
        Ok(report)
    }
}
