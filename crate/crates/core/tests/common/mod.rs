#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use kdpos::beacon::{MockChain, RandomnessSource, DEFAULT_EPOCH_SECS, DEFAULT_GENESIS};
use kdpos::erasure::Rate;
use kdpos::keyword_index::{FileId, Keyword};
use kdpos::roles::{AuditorState, ClientState, Server, ServerStore};
use kdpos::scheme::{setup, SECURITY_BITS};
use rand::Rng;
use rand_chacha::ChaCha20Rng;

pub const VOCAB: &[&str] = &[
    "storage",
    "audit",
    "Cloud",
    "movie",
    "important",
    "ledger",
    "zebra",
    "report",
    "invoice",
    "photo",
    "backup",
    "archive",
    "river",
    "mountain",
    "delta",
    "Alpha",
    "beta",
    "gamma",
    "x",
    "yz",
    "2024",
    "node",
    "block",
    "chain",
    "naïve",
    "café",
    "ÜBER",
    "data",
    "file",
    "proof",
    "tag",
    "segment",
    "keyword",
    "index",
    "server",
    "client",
    "auditor",
    "beacon",
    "epoch",
    "hash",
];
const SEPARATORS: &[&str] = &[" ", "  ", "\n", ", ", ". ", "-", "_", "/", "\t", "!"];

pub fn mock_chain() -> Arc<MockChain> {
    Arc::new(MockChain::new(
        b"test-chain",
        DEFAULT_EPOCH_SECS,
        DEFAULT_GENESIS,
        DEFAULT_GENESIS.plus(100 * DEFAULT_EPOCH_SECS + 17),
    ))
}

/// Text of roughly `len` bytes drawn from the vocabulary.
pub fn random_text(rng: &mut ChaCha20Rng, len: usize) -> Vec<u8> {
    let mut out = String::with_capacity(len + 16);
    while out.len() < len {
        out.push_str(VOCAB[rng.gen_range(0..VOCAB.len())]);
        out.push_str(SEPARATORS[rng.gen_range(0..SEPARATORS.len())]);
    }
    let mut cut = len.min(out.len());
    while !out.is_char_boundary(cut) {
        cut -= 1;
    }
    out.truncate(cut);
    out.into_bytes()
}

/// `count` files with log-uniform sizes in `0..=max_bytes`; the first file
/// has exactly `max_bytes` when `include_max` is set.
pub fn random_corpus(
    rng: &mut ChaCha20Rng,
    count: usize,
    max_bytes: usize,
    include_max: bool,
) -> Vec<(String, Vec<u8>)> {
    (0..count)
        .map(|i| {
            let len = if include_max && i == 0 {
                max_bytes
            } else {
                let e: f64 = rng.gen_range(0.0..=(max_bytes as f64 + 1.0).log2());
                (e.exp2() as usize).saturating_sub(1).min(max_bytes)
            };
            let bytes = if rng.gen_ratio(1, 12) {
                let mut b = vec![0u8; len.max(2)];
                rng.fill(b.as_mut_slice());
                b[0] = 0xff;
                b
            } else {
                random_text(rng, len)
            };
            (format!("file-{i}.txt"), bytes)
        })
        .collect()
}

/// Independent keyword oracle: walks characters by hand.
pub fn brute_force_keywords(bytes: &[u8]) -> BTreeSet<String> {
    let Ok(text) = std::str::from_utf8(bytes) else {
        return BTreeSet::new();
    };
    let mut out = BTreeSet::new();
    let mut cur = String::new();
    for c in text.chars().chain(std::iter::once(' ')) {
        if c.is_alphanumeric() {
            cur.push(c);
        } else if !cur.is_empty() {
            let w = cur.to_lowercase();
            if w.len() <= 64 {
                out.insert(w);
            }
            cur.clear();
        }
    }
    out
}

pub fn inverted_index(
    files: &[(String, Vec<u8>)],
    fids: &[FileId],
) -> BTreeMap<String, BTreeSet<FileId>> {
    let mut idx: BTreeMap<String, BTreeSet<FileId>> = BTreeMap::new();
    for ((_, bytes), fid) in files.iter().zip(fids) {
        for w in brute_force_keywords(bytes) {
            idx.entry(w).or_default().insert(*fid);
        }
    }
    idx
}

pub struct Fixture {
    pub client: ClientState,
    pub store: ServerStore,
    pub chain: Arc<MockChain>,
    pub files: Vec<(String, Vec<u8>)>,
    pub fids: Vec<FileId>,
}

impl Fixture {
    pub fn new(rng: &mut ChaCha20Rng, files: Vec<(String, Vec<u8>)>, rate: Rate) -> Self {
        let keys = setup(SECURITY_BITS, rng).unwrap();
        let mut client = ClientState::new(keys, rate);
        let (package, summary) = client.outsource(&files, rng).unwrap();
        let fids = summary.iter().map(|s| s.fid.parse().unwrap()).collect();
        let mut store = ServerStore::new();
        store.ingest(package).unwrap();
        Fixture {
            client,
            store,
            chain: mock_chain(),
            files,
            fids,
        }
    }

    pub fn server(&self) -> Server {
        Server::new(self.store.clone(), self.beacon())
    }

    pub fn beacon(&self) -> Arc<dyn RandomnessSource> {
        self.chain.clone()
    }

    pub fn auditor(&self, l: usize) -> AuditorState {
        AuditorState::new(self.client.keys.pk, self.client.metadata(), self.beacon())
            .with_challenge_size(l)
    }

    pub fn keyword_index(&self) -> BTreeMap<String, BTreeSet<FileId>> {
        inverted_index(&self.files, &self.fids)
    }

    pub fn keyword(&self, w: &str) -> Keyword {
        Keyword::parse(w).unwrap()
    }
}
