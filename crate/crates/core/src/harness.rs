//! Malicious servers, the storage game, and the extractor.
//!
//! An [`Adversary`] answers the same requests as an honest server but
//! follows a [`Strategy`]. [`run_game`] plays a script of reads and audits
//! against it and records every verdict. [`extract`] recovers challenged
//! segments from any server whose answers verify often enough, by collecting
//! linearly independent `(nu, mu)` rows and solving the system.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, Mutex};

use rand::seq::index;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::Serialize;
use thiserror::Error;

use crate::algebra::{G1Element, Scalar};
use crate::beacon::RandomnessSource;
use crate::erasure::{self, ErasureError, Rate};
use crate::keyword_index::{FileId, Keyword};
use crate::roles::{
    answer, AuditMode, AuditReport, AuditorState, Outcome, Resolved, RoleError, ServerStore,
};
use crate::scheme::{
    segment_hashes, verify_file_with_hashes, verify_read, ChallengeSet, FileChallenge, FileRecord,
    ProofPair, PublicKey, StorageProof, SECURITY_BITS,
};
use crate::transport::{Endpoint, Handler, TransportError};
use crate::wire::{ChallengeForm, ErrorCode, FidChallenge, Message, ProofResponse};

/// Longest script [`run_game`] accepts (`lambda^2` operations).
pub const MAX_SCRIPT_OPS: usize = (SECURITY_BITS * SECURITY_BITS) as usize;

#[derive(Clone, Debug, PartialEq)]
pub enum Strategy {
    Honest,
    /// Overwrite `round(delta * n)` segments of each targeted file with junk,
    /// keeping the tags.
    DeleteFraction {
        delta: f64,
        target: Option<FileId>,
    },
    /// Drop `drop` identifiers from the row for `keyword`, keeping its
    /// signature.
    TruncateIndex {
        keyword: Keyword,
        drop: usize,
    },
    /// Random `sigma`, `mu` shifted off the honest value.
    ForgeProof,
    /// Honest with probability `q`, junk otherwise.
    AnswerWithProbability {
        q: f64,
    },
    /// Answer each file's challenge from a different file's segments and tags.
    WrongFileSubstitution,
}

impl Strategy {
    pub fn name(&self) -> &'static str {
        match self {
            Strategy::Honest => "honest",
            Strategy::DeleteFraction { .. } => "delete-fraction",
            Strategy::TruncateIndex { .. } => "truncate-index",
            Strategy::ForgeProof => "forge-proof",
            Strategy::AnswerWithProbability { .. } => "answer-with-probability",
            Strategy::WrongFileSubstitution => "wrong-file-substitution",
        }
    }
}

/// A strategy with its seed, written as
/// `strategy=delete-fraction delta=0.05 seed=7`.
#[derive(Clone, Debug, PartialEq)]
pub struct StrategyConfig {
    pub strategy: Strategy,
    pub seed: u64,
}

impl StrategyConfig {
    pub fn honest() -> Self {
        StrategyConfig {
            strategy: Strategy::Honest,
            seed: 0,
        }
    }

    pub fn new(strategy: Strategy, seed: u64) -> Self {
        StrategyConfig { strategy, seed }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("bad strategy {input:?}: {reason}")]
pub struct StrategyParseError {
    input: String,
    reason: String,
}

impl FromStr for StrategyConfig {
    type Err = StrategyParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = |reason: String| StrategyParseError {
            input: s.to_string(),
            reason,
        };
        let mut fields = BTreeMap::new();
        for part in s.split_whitespace() {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| err(format!("{part:?} is not key=value")))?;
            if fields.insert(k, v).is_some() {
                return Err(err(format!("{k} given twice")));
            }
        }
        let mut take = |k: &str| fields.remove(k);
        let name = take("strategy").ok_or_else(|| err("missing strategy=".into()))?;
        let seed = match take("seed") {
            Some(v) => v.parse().map_err(|_| err(format!("bad seed {v:?}")))?,
            None => 0,
        };
        let prob = |key: &str, v: Option<&str>| -> Result<f64, StrategyParseError> {
            let v = v.ok_or_else(|| err(format!("{key}= is required")))?;
            match v.parse::<f64>() {
                Ok(x) if (0.0..=1.0).contains(&x) => Ok(x),
                _ => Err(err(format!("{key} must be in [0, 1], got {v:?}"))),
            }
        };
        let strategy = match name {
            "honest" => Strategy::Honest,
            "delete-fraction" => Strategy::DeleteFraction {
                delta: prob("delta", take("delta"))?,
                target: take("fid")
                    .map(|f| f.parse().map_err(|_| err(format!("bad fid {f:?}"))))
                    .transpose()?,
            },
            "truncate-index" => {
                let raw = take("keyword").ok_or_else(|| err("keyword= is required".into()))?;
                let keyword =
                    Keyword::parse(raw).ok_or_else(|| err(format!("bad keyword {raw:?}")))?;
                let drop = match take("k") {
                    Some(v) => v.parse().map_err(|_| err(format!("bad k {v:?}")))?,
                    None => 1,
                };
                Strategy::TruncateIndex { keyword, drop }
            }
            "forge-proof" => Strategy::ForgeProof,
            "answer-with-probability" => Strategy::AnswerWithProbability {
                q: prob("q", take("q"))?,
            },
            "wrong-file-substitution" => Strategy::WrongFileSubstitution,
            other => return Err(err(format!("unknown strategy {other:?}"))),
        };
        if let Some(k) = fields.keys().next() {
            return Err(err(format!("unexpected key {k:?} for {name}")));
        }
        Ok(StrategyConfig { strategy, seed })
    }
}

impl fmt::Display for StrategyConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "strategy={}", self.strategy.name())?;
        match &self.strategy {
            Strategy::DeleteFraction { delta, target } => {
                write!(f, " delta={delta}")?;
                if let Some(t) = target {
                    write!(f, " fid={t}")?;
                }
            }
            Strategy::TruncateIndex { keyword, drop } => write!(f, " keyword={keyword} k={drop}")?,
            Strategy::AnswerWithProbability { q } => write!(f, " q={q}")?,
            _ => {}
        }
        write!(f, " seed={}", self.seed)
    }
}

/// A server that follows a [`Strategy`]. Deterministic given the seed and
/// the sequence of requests.
pub struct Adversary {
    store: ServerStore,
    beacon: Arc<dyn RandomnessSource>,
    config: StrategyConfig,
    rng: Mutex<ChaCha20Rng>,
    // Read only by the ground-truth accessors.
    #[cfg_attr(not(any(test, feature = "ground-truth")), allow(dead_code))]
    corrupted: BTreeMap<FileId, BTreeSet<u64>>,
}

impl Adversary {
    /// Takes over `store` and applies the strategy's up-front tampering.
    pub fn new(
        mut store: ServerStore,
        beacon: Arc<dyn RandomnessSource>,
        config: StrategyConfig,
    ) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(config.seed);
        let mut corrupted = BTreeMap::new();
        match &config.strategy {
            Strategy::DeleteFraction { delta, target } => {
                let mut fids: Vec<FileId> = match target {
                    Some(t) => vec![*t],
                    None => store.records.keys().copied().collect(),
                };
                fids.sort();
                for fid in fids {
                    let Some(rec) = store.records.get_mut(&fid) else {
                        continue;
                    };
                    let hit = corrupt_segments(rec, *delta, &mut rng);
                    corrupted.insert(fid, hit);
                }
            }
            Strategy::TruncateIndex { keyword, drop } => {
                if let Ok(row) = store.table.lookup(keyword) {
                    let mut row = row.clone();
                    let drop = (*drop).min(row.fids.len());
                    for _ in 0..drop {
                        let i = rng.gen_range(0..row.fids.len());
                        row.fids.remove(i);
                    }
                    store.table.replace_row(row);
                }
            }
            _ => {}
        }
        Adversary {
            store,
            beacon,
            config,
            rng: Mutex::new(rng),
            corrupted,
        }
    }

    pub fn config(&self) -> &StrategyConfig {
        &self.config
    }

    /// The store the adversary actually answers from. Test oracles only.
    #[cfg(any(test, feature = "ground-truth"))]
    pub fn true_store(&self) -> &ServerStore {
        &self.store
    }

    /// Indices overwritten by a delete-fraction strategy. Test oracles only.
    #[cfg(any(test, feature = "ground-truth"))]
    pub fn corrupted_indices(&self, fid: &FileId) -> BTreeSet<u64> {
        self.corrupted.get(fid).cloned().unwrap_or_default()
    }

    fn junk(&self, resolved: &Resolved, rng: &mut ChaCha20Rng) -> Message {
        let pair = |rng: &mut ChaCha20Rng| ProofPair {
            sigma: G1Element::random(rng),
            mu: Scalar::random(rng),
        };
        let honest = answer(resolved, &self.store);
        let Message::Proof(mut resp) = honest else {
            return honest;
        };
        resp.proof = match resp.proof {
            StorageProof::Batched(_) => StorageProof::Batched(pair(rng)),
            StorageProof::PerFile(pairs) => {
                StorageProof::PerFile(pairs.into_iter().map(|(f, _)| (f, pair(rng))).collect())
            }
        };
        Message::Proof(resp)
    }

    fn forge(&self, resolved: &Resolved, rng: &mut ChaCha20Rng) -> Message {
        let honest = answer(resolved, &self.store);
        let Message::Proof(mut resp) = honest else {
            return honest;
        };
        let mut forge = |p: ProofPair| ProofPair {
            sigma: G1Element::random(rng),
            mu: p.mu + nonzero_scalar(rng),
        };
        resp.proof = match resp.proof {
            StorageProof::Batched(p) => StorageProof::Batched(forge(p)),
            StorageProof::PerFile(pairs) => {
                StorageProof::PerFile(pairs.into_iter().map(|(f, p)| (f, forge(p))).collect())
            }
        };
        Message::Proof(resp)
    }

    fn substitute(&self, resolved: &Resolved) -> Message {
        let mut fids: Vec<FileId> = self.store.records.keys().copied().collect();
        fids.sort();
        let records: Vec<FileRecord> = resolved
            .challenge
            .fids()
            .iter()
            .filter_map(|fid| {
                let own = self.store.records.get(fid)?;
                let pos = fids.iter().position(|f| f == fid)?;
                let other = &self.store.records[&fids[(pos + 1) % fids.len()]];
                Some(FileRecord {
                    fid: *fid,
                    segments: other
                        .segments
                        .iter()
                        .cycle()
                        .take(own.segments.len())
                        .copied()
                        .collect(),
                    tags: other
                        .tags
                        .iter()
                        .cycle()
                        .take(own.tags.len())
                        .copied()
                        .collect(),
                })
            })
            .collect();
        answer(resolved, records.as_slice())
    }
}

fn nonzero_scalar<R: RngCore + ?Sized>(rng: &mut R) -> Scalar {
    loop {
        let s = Scalar::random(rng);
        if !s.is_zero() {
            return s;
        }
    }
}

/// Overwrites `round(delta * n)` distinct segments with different values.
fn corrupt_segments<R: RngCore + ?Sized>(
    rec: &mut FileRecord,
    delta: f64,
    rng: &mut R,
) -> BTreeSet<u64> {
    let n = rec.segments.len();
    let count = ((delta * n as f64).round() as usize).min(n);
    let mut hit = BTreeSet::new();
    for i in index::sample(rng, n, count) {
        rec.segments[i] += nonzero_scalar(rng);
        hit.insert(i as u64 + 1);
    }
    hit
}

impl Handler for Adversary {
    fn handle(&self, request: Message) -> Message {
        match request {
            Message::ReadRequest { fid, index } => match self.store.serve_read(&fid, index) {
                Ok((segment, tag)) => Message::ReadResponse {
                    fid,
                    index,
                    segment,
                    tag,
                },
                Err(e) => Message::Error(e),
            },
            req @ (Message::FidChallenge(_) | Message::KeywordToken(_)) => {
                let resolved = match self.store.resolve(&req, self.beacon.as_ref()) {
                    Ok(r) => r,
                    Err(e) => return Message::Error(e),
                };
                let mut rng = self.rng.lock().unwrap_or_else(|e| e.into_inner());
                match &self.config.strategy {
                    Strategy::Honest
                    | Strategy::DeleteFraction { .. }
                    | Strategy::TruncateIndex { .. } => answer(&resolved, &self.store),
                    Strategy::ForgeProof => self.forge(&resolved, &mut rng),
                    Strategy::AnswerWithProbability { q } => {
                        if rng.gen_bool(*q) {
                            answer(&resolved, &self.store)
                        } else {
                            self.junk(&resolved, &mut rng)
                        }
                    }
                    Strategy::WrongFileSubstitution => self.substitute(&resolved),
                }
            }
            other => Message::error(
                ErrorCode::Unsupported,
                format!("adversary ignores {}", other.kind()),
            ),
        }
    }
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("script has {0} operations, more than the limit of {MAX_SCRIPT_OPS}")]
    ScriptTooLong(usize),
    #[error(transparent)]
    Role(#[from] RoleError),
    #[error(transparent)]
    Transport(#[from] TransportError),
}

/// One challenger-side operation in the game.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum GameOp {
    Read {
        fid: FileId,
        index: u64,
    },
    AuditFids {
        fids: Vec<FileId>,
        mode: AuditMode,
        batch: bool,
    },
    AuditKeyword {
        keyword: Keyword,
        batch: bool,
    },
}

impl GameOp {
    fn describe(&self) -> (&'static str, String) {
        match self {
            GameOp::Read { fid, index } => ("read", format!("{fid}#{index}")),
            GameOp::AuditFids { fids, mode, batch } => (
                "audit-fids",
                format!(
                    "{} files, {mode:?}{}",
                    fids.len(),
                    if *batch { ", batched" } else { "" }
                ),
            ),
            GameOp::AuditKeyword { keyword, batch } => (
                "audit-keyword",
                format!("{keyword}{}", if *batch { ", batched" } else { "" }),
            ),
        }
    }
}

/// A recorded verdict, as returned to the adversary.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GameStep {
    pub step: usize,
    pub op: &'static str,
    pub target: String,
    pub accepted: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GameTranscript {
    pub strategy: String,
    pub steps: Vec<GameStep>,
    pub final_step: GameStep,
    #[serde(skip)]
    pub final_report: Option<AuditReport>,
}

impl GameTranscript {
    pub fn final_accepted(&self) -> bool {
        self.final_step.accepted
    }

    /// One JSON object per step, then the final challenge.
    pub fn to_json_lines(&self) -> String {
        let mut out = String::new();
        for s in self.steps.iter().chain(std::iter::once(&self.final_step)) {
            out.push_str(&serde_json::to_string(s).expect("step serializes"));
            out.push('\n');
        }
        out
    }
}

fn play<R: RngCore + ?Sized>(
    step: usize,
    op: &GameOp,
    server: &dyn Endpoint,
    auditor: &AuditorState,
    rng: &mut R,
) -> Result<(GameStep, Option<AuditReport>), HarnessError> {
    let (name, target) = op.describe();
    let (accepted, detail, report) = match op {
        GameOp::Read { fid, index } => match server.call(&Message::ReadRequest {
            fid: *fid,
            index: *index,
        })? {
            Message::ReadResponse {
                fid: got,
                index: j,
                segment,
                tag,
            } => {
                let ok = got == *fid
                    && j == *index
                    && verify_read(fid, *index, &segment, &tag, &auditor.pk);
                (ok, None, None)
            }
            Message::Error(e) => (false, Some(e.to_string()), None),
            other => (false, Some(format!("unexpected {}", other.kind())), None),
        },
        GameOp::AuditFids { fids, mode, batch } => {
            let r = auditor.audit_by_fids(server, fids, *mode, *batch, None, rng)?;
            (r.passed(), r.failed_check.clone(), Some(r))
        }
        GameOp::AuditKeyword { keyword, batch } => {
            let r = auditor.audit_by_keyword(server, keyword, None, *batch, rng)?;
            (r.passed(), r.failed_check.clone(), Some(r))
        }
    };
    let detail = match (&report, detail) {
        (Some(r), None) if r.outcome == Outcome::Deferred => Some("deferred".to_string()),
        (_, d) => d,
    };
    Ok((
        GameStep {
            step,
            op: name,
            target,
            accepted,
            detail,
        },
        report,
    ))
}

/// Plays `script` against `server`, recording every verdict, then runs the
/// final challenge.
pub fn run_game<R: RngCore + ?Sized>(
    server: &dyn Endpoint,
    strategy: &StrategyConfig,
    auditor: &AuditorState,
    script: &[GameOp],
    final_challenge: &GameOp,
    rng: &mut R,
) -> Result<GameTranscript, HarnessError> {
    if script.len() > MAX_SCRIPT_OPS {
        return Err(HarnessError::ScriptTooLong(script.len()));
    }
    let mut steps = Vec::with_capacity(script.len());
    for (i, op) in script.iter().enumerate() {
        steps.push(play(i, op, server, auditor, rng)?.0);
    }
    let (final_step, final_report) = play(script.len(), final_challenge, server, auditor, rng)?;
    Ok(GameTranscript {
        strategy: strategy.to_string(),
        steps,
        final_step,
        final_report,
    })
}

/// Rows of coefficient vectors over Z_p with their right-hand sides, kept in
/// reduced row echelon form so every retained row is independent.
#[derive(Clone, Debug)]
pub struct ExtractionMatrix {
    width: usize,
    // (row, rhs, pivot column); each row is 1 at its pivot and 0 at every
    // other row's pivot.
    rows: Vec<(Vec<Scalar>, Scalar, usize)>,
}

impl ExtractionMatrix {
    pub fn new(width: usize) -> Self {
        ExtractionMatrix {
            width,
            rows: Vec::with_capacity(width),
        }
    }

    pub fn rank(&self) -> usize {
        self.rows.len()
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn is_complete(&self) -> bool {
        self.rows.len() == self.width
    }

    /// Adds `coeffs . x = rhs`. Returns false, leaving the matrix unchanged,
    /// if the row depends on those already held.
    pub fn add_row(&mut self, coeffs: &[Scalar], rhs: Scalar) -> bool {
        assert_eq!(coeffs.len(), self.width, "row width");
        let mut v = coeffs.to_vec();
        let mut b = rhs;
        for (row, rb, p) in &self.rows {
            let c = v[*p];
            if !c.is_zero() {
                for (x, r) in v.iter_mut().zip(row) {
                    *x -= c * *r;
                }
                b -= c * *rb;
            }
        }
        let Some(q) = v.iter().position(|x| !x.is_zero()) else {
            return false;
        };
        let inv = v[q].invert().expect("nonzero pivot");
        for x in v.iter_mut() {
            *x *= inv;
        }
        b *= inv;
        for (row, rb, _) in self.rows.iter_mut() {
            let c = row[q];
            if !c.is_zero() {
                for (x, r) in row.iter_mut().zip(&v) {
                    *x -= c * *r;
                }
                *rb -= c * b;
            }
        }
        self.rows.push((v, b, q));
        true
    }

    /// The unique solution once the matrix has full rank.
    pub fn solve(&self) -> Option<Vec<Scalar>> {
        if !self.is_complete() {
            return None;
        }
        let mut x = vec![Scalar::ZERO; self.width];
        for (_, b, p) in &self.rows {
            x[*p] = *b;
        }
        Some(x)
    }
}

#[derive(Debug, Error)]
pub enum ExtractError {
    #[error("index set is empty")]
    EmptyIndexSet,
    #[error("index {0} is outside 1..={1} or repeated")]
    BadIndex(u64, u64),
    #[error("rank {rank} of {k} after {rounds} rounds")]
    RankDeficient {
        rank: usize,
        k: usize,
        rounds: usize,
    },
    #[error("file cannot be reconstructed: {0}")]
    Unrecoverable(ErasureError),
    #[error(transparent)]
    Transport(#[from] TransportError),
}

/// Default round budget for `k` target indices.
pub fn default_max_rounds(k: usize) -> usize {
    4 * k + 64
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Extracted {
    /// Segment values in the order of the requested indices.
    pub segments: Vec<Scalar>,
    pub rounds: usize,
    /// Responses that failed verification or were errors.
    pub rejected: usize,
    /// Verified responses whose coefficient row added no rank.
    pub dependent: usize,
}

fn extraction_request(
    pk: &PublicKey,
    fid: FileId,
    indices: &[u64],
    nu: &[Scalar],
) -> (ChallengeSet, Message) {
    let challenge = ChallengeSet {
        files: vec![FileChallenge {
            fid,
            pairs: indices.iter().copied().zip(nu.iter().copied()).collect(),
        }],
    };
    let msg = Message::FidChallenge(FidChallenge {
        pk_fingerprint: pk.fingerprint(),
        batch: false,
        form: ChallengeForm::Explicit(challenge.clone()),
    });
    (challenge, msg)
}

fn accepted_pair(
    challenge: &ChallengeSet,
    hashes: &[G1Element],
    reply: &Message,
    pk: &PublicKey,
) -> Option<ProofPair> {
    let Message::Proof(ProofResponse {
        challenge_digest,
        proof: StorageProof::PerFile(pairs),
        ..
    }) = reply
    else {
        return None;
    };
    let fc = &challenge.files[0];
    match pairs.as_slice() {
        [(fid, pair)]
            if *fid == fc.fid
                && *challenge_digest == challenge.digest()
                && verify_file_with_hashes(fc, hashes, pair, pk) =>
        {
            Some(*pair)
        }
        _ => None,
    }
}

/// Challenges the fixed index set `indices` of `fid` with fresh coefficients
/// until `k = |indices|` independent verified responses are held, then
/// solves for the segments.
pub fn extract<R: RngCore + ?Sized>(
    server: &dyn Endpoint,
    pk: &PublicKey,
    fid: FileId,
    segments: u64,
    indices: &[u64],
    max_rounds: usize,
    rng: &mut R,
) -> Result<Extracted, ExtractError> {
    if indices.is_empty() {
        return Err(ExtractError::EmptyIndexSet);
    }
    let mut seen = BTreeSet::new();
    for &r in indices {
        if r == 0 || r > segments || !seen.insert(r) {
            return Err(ExtractError::BadIndex(r, segments));
        }
    }
    let k = indices.len();
    let hashes = segment_hashes(&fid, indices);
    let mut matrix = ExtractionMatrix::new(k);
    let (mut rejected, mut dependent, mut rounds) = (0, 0, 0);
    while !matrix.is_complete() && rounds < max_rounds {
        rounds += 1;
        let nu: Vec<Scalar> = (0..k).map(|_| Scalar::random(rng)).collect();
        let (challenge, request) = extraction_request(pk, fid, indices, &nu);
        let reply = server.call(&request)?;
        match accepted_pair(&challenge, &hashes, &reply, pk) {
            Some(pair) => {
                if !matrix.add_row(&nu, pair.mu) {
                    dependent += 1;
                }
            }
            None => rejected += 1,
        }
    }
    match matrix.solve() {
        Some(segments) => Ok(Extracted {
            segments,
            rounds,
            rejected,
            dependent,
        }),
        None => Err(ExtractError::RankDeficient {
            rank: matrix.rank(),
            k,
            rounds,
        }),
    }
}

#[derive(Clone, Debug, Default)]
pub struct ExtractFileOptions {
    /// Indices per extraction window (default 32).
    pub window: Option<usize>,
    /// Round budget per window (default `4 * window + 64`).
    pub max_rounds: Option<usize>,
    /// Indices known to be intact; only these are targeted when given.
    pub survivors: Option<Vec<u64>>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FileExtraction {
    pub bytes: Vec<u8>,
    /// Indices whose values were recovered.
    pub recovered: Vec<u64>,
    /// Indices given up on after bisection.
    pub lost: Vec<u64>,
    pub rounds: usize,
}

/// Recovers the original bytes of `fid`: extracts windows of indices until
/// enough segments are known to erasure-decode, halving any window that
/// does not reach full rank to isolate the bad indices.
pub fn extract_file<R: RngCore + ?Sized>(
    server: &dyn Endpoint,
    pk: &PublicKey,
    fid: FileId,
    segments: u64,
    rate: Rate,
    opts: &ExtractFileOptions,
    rng: &mut R,
) -> Result<FileExtraction, ExtractError> {
    let need = rate
        .message_len(segments as usize)
        .ok_or(ExtractError::Unrecoverable(
            ErasureError::InsufficientFragments { needed: 1, got: 0 },
        ))?;
    let window = opts.window.unwrap_or(32).max(1);
    let max_rounds = opts
        .max_rounds
        .unwrap_or_else(|| default_max_rounds(window));
    let candidates: Vec<u64> = match &opts.survivors {
        Some(s) => {
            let set: BTreeSet<u64> = s
                .iter()
                .copied()
                .filter(|r| (1..=segments).contains(r))
                .collect();
            set.into_iter().collect()
        }
        None => (1..=segments).collect(),
    };
    let mut fragments: Vec<(usize, Scalar)> = Vec::with_capacity(need);
    let mut lost = Vec::new();
    let mut rounds = 0;
    let mut pending: Vec<Vec<u64>> = candidates
        .chunks(window)
        .rev()
        .map(|c| c.to_vec())
        .collect();
    while fragments.len() < need {
        let Some(mut chunk) = pending.pop() else {
            break;
        };
        chunk.truncate(need - fragments.len());
        match extract(server, pk, fid, segments, &chunk, max_rounds, rng) {
            Ok(ex) => {
                rounds += ex.rounds;
                fragments.extend(chunk.iter().map(|r| *r as usize - 1).zip(ex.segments));
            }
            Err(ExtractError::RankDeficient { rounds: used, .. }) => {
                rounds += used;
                if chunk.len() == 1 {
                    lost.push(chunk[0]);
                } else {
                    let right = chunk.split_off(chunk.len() / 2);
                    pending.push(right);
                    pending.push(chunk);
                }
            }
            Err(e) => return Err(e),
        }
    }
    if fragments.len() < need {
        return Err(ExtractError::Unrecoverable(
            ErasureError::InsufficientFragments {
                needed: need,
                got: fragments.len(),
            },
        ));
    }
    fragments.sort_by_key(|(pos, _)| *pos);
    let recovered = fragments.iter().map(|(pos, _)| *pos as u64 + 1).collect();
    let message = erasure::decode(&fragments, need).map_err(ExtractError::Unrecoverable)?;
    let bytes = erasure::unpack_bytes(&message).map_err(ExtractError::Unrecoverable)?;
    lost.sort();
    Ok(FileExtraction {
        bytes,
        recovered,
        lost,
        rounds,
    })
}
