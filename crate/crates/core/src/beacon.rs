//! Time-dependent public randomness.
//!
//! For a timestamp `t`, a source returns the hash of the first block appended
//! after `t`, or nothing if that block does not exist yet. Two sources are
//! provided: a deterministic [`MockChain`] whose clock tests advance by hand,
//! and [`ChainFile`], which replays `height,unix_time,hex_hash` records
//! exported from a real chain.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::atomic::{AtomicI64, AtomicU64, Ordering};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::encoding::FieldWriter;

/// Length of a beacon output in bytes.
pub const SEED_BYTES: usize = 32;

/// Environment variable naming the default source: `mock` or `file:<path>`.
pub const BEACON_ENV: &str = "KDPOS_BEACON";

pub const DEFAULT_EPOCH_SECS: i64 = 600;
pub const DEFAULT_GENESIS: Timestamp = Timestamp(1_600_000_000);
pub const DEFAULT_MOCK_SEED: &str = "kdpos-mock-chain";

/// Seconds since the Unix epoch.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Timestamp(pub i64);

impl Timestamp {
    pub fn now() -> Self {
        let secs = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs() as i64)
            .unwrap_or(0);
        Timestamp(secs)
    }

    pub fn plus(self, secs: i64) -> Self {
        Timestamp(self.0 + secs)
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct BeaconOutput {
    pub str_t: [u8; SEED_BYTES],
    pub block_height: u64,
    pub block_time: Timestamp,
}

impl fmt::Debug for BeaconOutput {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BeaconOutput")
            .field("str_t", &hex::encode(self.str_t))
            .field("block_height", &self.block_height)
            .field("block_time", &self.block_time)
            .finish()
    }
}

#[derive(Debug, Error)]
pub enum BeaconError {
    #[error("randomness source unavailable: {0}")]
    Unavailable(String),
    #[error("malformed chain record at line {line}: {reason}")]
    BadRecord { line: usize, reason: String },
    #[error("unknown beacon source {0:?} (expected `mock` or `file:<path>`)")]
    UnknownSource(String),
}

/// A public, time-dependent randomness source.
pub trait RandomnessSource: Send + Sync {
    /// The source's notion of the current time (`cur`).
    fn current_time(&self) -> Result<Timestamp, BeaconError>;

    /// `Ok(None)` is the "not yet" answer: no block after `t` is available.
    fn get_randomness(&self, t: Timestamp) -> Result<Option<BeaconOutput>, BeaconError>;

    /// Time of the newest block, if any block exists.
    fn latest_block_time(&self) -> Result<Option<Timestamp>, BeaconError>;

    fn verify_randomness(&self, t: Timestamp, out: &BeaconOutput) -> Result<bool, BeaconError> {
        Ok(self.get_randomness(t)?.as_ref() == Some(out))
    }

    /// A timestamp whose beacon output already exists: one second before the
    /// newest block.
    fn recent_timestamp(&self) -> Result<Timestamp, BeaconError> {
        self.latest_block_time()?
            .map(|t| t.plus(-1))
            .ok_or_else(|| BeaconError::Unavailable("no block has been produced yet".into()))
    }
}

/// Deterministic append-only chain with one block per epoch.
///
/// Block `k` has time `genesis + k * epoch` and hash
/// `SHA-256(field-tagged("kdpos/mock-block", seed, k))`. A block is
/// appended once the clock reaches its time.
#[derive(Debug)]
pub struct MockChain {
    seed: Vec<u8>,
    epoch_secs: i64,
    genesis: Timestamp,
    current: AtomicI64,
    // Never behind the system clock when set.
    follow_wall_clock: bool,
    // Highest block height ever revealed; u64::MAX means none.
    highest_revealed: AtomicU64,
}

impl MockChain {
    pub fn new(seed: &[u8], epoch_secs: i64, genesis: Timestamp, current: Timestamp) -> Self {
        assert!(epoch_secs > 0, "epoch length must be positive");
        MockChain {
            seed: seed.to_vec(),
            epoch_secs,
            genesis,
            current: AtomicI64::new(current.0),
            follow_wall_clock: false,
            highest_revealed: AtomicU64::new(u64::MAX),
        }
    }

    /// A chain whose clock tracks the system time, so separate processes
    /// built from the same seed agree on which blocks exist.
    pub fn following_wall_clock(seed: &[u8], epoch_secs: i64, genesis: Timestamp) -> Self {
        MockChain {
            follow_wall_clock: true,
            ..MockChain::new(seed, epoch_secs, genesis, Timestamp::now())
        }
    }

    fn now(&self) -> i64 {
        let t = self.current.load(Ordering::SeqCst);
        if self.follow_wall_clock {
            t.max(Timestamp::now().0)
        } else {
            t
        }
    }

    pub fn epoch_secs(&self) -> i64 {
        self.epoch_secs
    }

    pub fn genesis(&self) -> Timestamp {
        self.genesis
    }

    /// Moves the clock forward by `secs`.
    pub fn advance(&self, secs: i64) {
        assert!(secs >= 0, "the mock clock only moves forward");
        self.current.fetch_add(secs, Ordering::SeqCst);
    }

    pub fn set_time(&self, t: Timestamp) {
        let prev = self.current.swap(t.0, Ordering::SeqCst);
        assert!(t.0 >= prev, "the mock clock only moves forward");
    }

    pub fn block_time(&self, height: u64) -> Timestamp {
        Timestamp(self.genesis.0 + height as i64 * self.epoch_secs)
    }

    /// Height of the newest block appended at or before `now`.
    pub fn tip_height(&self) -> Option<u64> {
        let now = self.now();
        if now < self.genesis.0 {
            None
        } else {
            Some(((now - self.genesis.0) / self.epoch_secs) as u64)
        }
    }

    /// Highest block height this chain has ever handed out.
    pub fn highest_revealed(&self) -> Option<u64> {
        match self.highest_revealed.load(Ordering::SeqCst) {
            u64::MAX => None,
            h => Some(h),
        }
    }

    fn block_hash(&self, height: u64) -> [u8; SEED_BYTES] {
        let mut w = FieldWriter::new("kdpos/mock-block");
        w.bytes(&self.seed).u64(height);
        Sha256::digest(w.finish()).into()
    }

    fn first_height_after(&self, t: Timestamp) -> u64 {
        if t.0 < self.genesis.0 {
            0
        } else {
            ((t.0 - self.genesis.0) / self.epoch_secs) as u64 + 1
        }
    }
}

impl RandomnessSource for MockChain {
    fn current_time(&self) -> Result<Timestamp, BeaconError> {
        Ok(Timestamp(self.now()))
    }

    fn latest_block_time(&self) -> Result<Option<Timestamp>, BeaconError> {
        Ok(self.tip_height().map(|h| self.block_time(h)))
    }

    fn get_randomness(&self, t: Timestamp) -> Result<Option<BeaconOutput>, BeaconError> {
        let height = self.first_height_after(t);
        match self.tip_height() {
            Some(tip) if height <= tip => {}
            _ => return Ok(None),
        }
        let prev = self.highest_revealed.load(Ordering::SeqCst);
        if prev == u64::MAX || height > prev {
            self.highest_revealed.store(height, Ordering::SeqCst);
        }
        Ok(Some(BeaconOutput {
            str_t: self.block_hash(height),
            block_height: height,
            block_time: self.block_time(height),
        }))
    }
}

/// One exported block header summary.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BlockRecord {
    pub height: u64,
    pub time: Timestamp,
    pub hash: [u8; SEED_BYTES],
}

/// Chain replayed from a local record file; the tip's time is `cur`.
#[derive(Clone, Debug)]
pub struct ChainFile {
    records: Vec<BlockRecord>,
}

impl ChainFile {
    pub fn open(path: &Path) -> Result<Self, BeaconError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| BeaconError::Unavailable(format!("{}: {e}", path.display())))?;
        text.parse()
    }

    pub fn records(&self) -> &[BlockRecord] {
        &self.records
    }
}

impl FromStr for ChainFile {
    type Err = BeaconError;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let mut records = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |reason: &str| BeaconError::BadRecord {
                line: i + 1,
                reason: reason.to_string(),
            };
            let mut parts = line.split(',');
            let (Some(h), Some(t), Some(x), None) =
                (parts.next(), parts.next(), parts.next(), parts.next())
            else {
                return Err(bad("expected height,unix_time,hex_hash"));
            };
            let height = h.trim().parse::<u64>().map_err(|_| bad("bad height"))?;
            let time = t.trim().parse::<i64>().map_err(|_| bad("bad time"))?;
            let raw = hex::decode(x.trim()).map_err(|_| bad("bad hex hash"))?;
            let hash: [u8; SEED_BYTES] =
                raw.try_into().map_err(|_| bad("hash must be 32 bytes"))?;
            if let Some(prev) = records.last() {
                let prev: &BlockRecord = prev;
                if height <= prev.height || time < prev.time.0 {
                    return Err(bad("records must be ordered by height and time"));
                }
            }
            records.push(BlockRecord {
                height,
                time: Timestamp(time),
                hash,
            });
        }
        Ok(ChainFile { records })
    }
}

impl RandomnessSource for ChainFile {
    fn current_time(&self) -> Result<Timestamp, BeaconError> {
        self.records
            .last()
            .map(|r| r.time)
            .ok_or_else(|| BeaconError::Unavailable("chain file has no records".into()))
    }

    fn latest_block_time(&self) -> Result<Option<Timestamp>, BeaconError> {
        Ok(self.records.last().map(|r| r.time))
    }

    fn get_randomness(&self, t: Timestamp) -> Result<Option<BeaconOutput>, BeaconError> {
        if self.records.is_empty() {
            return Err(BeaconError::Unavailable("chain file has no records".into()));
        }
        let idx = self.records.partition_point(|r| r.time <= t);
        Ok(self.records.get(idx).map(|r| BeaconOutput {
            str_t: r.hash,
            block_height: r.height,
            block_time: r.time,
        }))
    }
}

/// Which randomness source a role should use.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum BeaconConfig {
    Mock,
    File(PathBuf),
}

impl BeaconConfig {
    /// Reads [`BEACON_ENV`], defaulting to the mock chain.
    pub fn from_env() -> Result<Self, BeaconError> {
        match std::env::var(BEACON_ENV) {
            Ok(v) => v.parse(),
            Err(_) => Ok(BeaconConfig::Mock),
        }
    }
}

impl FromStr for BeaconConfig {
    type Err = BeaconError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "mock" {
            Ok(BeaconConfig::Mock)
        } else if let Some(path) = s.strip_prefix("file:") {
            Ok(BeaconConfig::File(PathBuf::from(path)))
        } else {
            Err(BeaconError::UnknownSource(s.to_string()))
        }
    }
}

impl fmt::Display for BeaconConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BeaconConfig::Mock => write!(f, "mock"),
            BeaconConfig::File(p) => write!(f, "file:{}", p.display()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain(now_offset: i64) -> MockChain {
        MockChain::new(
            b"seed",
            600,
            DEFAULT_GENESIS,
            DEFAULT_GENESIS.plus(now_offset),
        )
    }

    #[test]
    fn first_block_after_t_by_enumeration() {
        let c = chain(3600);
        let t = DEFAULT_GENESIS.plus(650);
        // Enumerate appended blocks and pick the first strictly after t.
        let expected = (0..=c.tip_height().unwrap())
            .find(|&k| c.block_time(k) > t)
            .unwrap();
        assert_eq!(expected, 2);
        let out = c.get_randomness(t).unwrap().unwrap();
        assert_eq!(out.block_height, 2);
        assert_eq!(out.block_time, DEFAULT_GENESIS.plus(1200));
        assert_eq!(out.str_t, c.block_hash(2));
    }

    #[test]
    fn wall_clock_chain_is_never_behind_system_time() {
        let c = MockChain::following_wall_clock(b"w", 60, DEFAULT_GENESIS);
        let before = Timestamp::now();
        let now = c.current_time().unwrap();
        assert!(now >= before && now <= Timestamp::now());
        assert!(c
            .get_randomness(c.recent_timestamp().unwrap())
            .unwrap()
            .is_some());
        assert!(c.get_randomness(now.plus(120)).unwrap().is_none());
    }

    #[test]
    fn recent_timestamp_has_output() {
        for offset in [0, 1, 599, 600, 601, 5000] {
            let c = chain(offset);
            let t = c.recent_timestamp().unwrap();
            let out = c.get_randomness(t).unwrap().unwrap();
            assert_eq!(Some(out.block_height), c.tip_height());
        }
        assert!(chain(-5).recent_timestamp().is_err());
        let file: ChainFile =
            "1,100,00000000000000000000000000000000000000000000000000000000000000aa"
                .parse()
                .unwrap();
        assert_eq!(
            file.get_randomness(file.recent_timestamp().unwrap())
                .unwrap()
                .unwrap()
                .block_height,
            1
        );
    }

    #[test]
    fn future_timestamp_is_bottom() {
        let c = chain(3600);
        let cur = c.current_time().unwrap();
        assert_eq!(c.get_randomness(cur.plus(1)).unwrap(), None);
    }

    #[test]
    fn block_on_boundary_and_pending_block() {
        let c = chain(3600);
        // t exactly at a block time: the answer is the next block.
        let out = c
            .get_randomness(DEFAULT_GENESIS.plus(600))
            .unwrap()
            .unwrap();
        assert_eq!(out.block_height, 2);
        // t <= cur but the following block is not appended yet.
        assert_eq!(c.get_randomness(DEFAULT_GENESIS.plus(3600)).unwrap(), None);
        c.advance(600);
        assert_eq!(
            c.get_randomness(DEFAULT_GENESIS.plus(3600))
                .unwrap()
                .unwrap()
                .block_height,
            7
        );
    }

    #[test]
    fn deterministic_and_verifiable() {
        let c = chain(3600);
        let t = DEFAULT_GENESIS.plus(100);
        let a = c.get_randomness(t).unwrap().unwrap();
        assert_eq!(Some(a), c.get_randomness(t).unwrap());
        assert!(c.verify_randomness(t, &a).unwrap());

        let mut flipped = a;
        flipped.str_t[5] ^= 1;
        assert!(!c.verify_randomness(t, &flipped).unwrap());

        let mut wrong_height = a;
        wrong_height.block_height += 1;
        assert!(!c.verify_randomness(t, &wrong_height).unwrap());
    }

    #[test]
    fn never_reveals_beyond_the_clock() {
        let c = chain(1800);
        for off in (-1000..5000).step_by(97) {
            let _ = c.get_randomness(DEFAULT_GENESIS.plus(off)).unwrap();
        }
        assert!(c.highest_revealed().unwrap() <= c.tip_height().unwrap());
        assert_eq!(c.highest_revealed(), Some(3));
    }

    #[test]
    fn answers_change_across_block_boundaries() {
        let c = chain(6000);
        let a = c
            .get_randomness(DEFAULT_GENESIS.plus(100))
            .unwrap()
            .unwrap();
        let b = c
            .get_randomness(DEFAULT_GENESIS.plus(700))
            .unwrap()
            .unwrap();
        let same_epoch = c
            .get_randomness(DEFAULT_GENESIS.plus(500))
            .unwrap()
            .unwrap();
        assert_ne!(a.str_t, b.str_t);
        assert_eq!(a, same_epoch);
    }

    #[test]
    fn chain_file_lookup() {
        let h = |b: u8| hex::encode([b; 32]);
        let text = format!(
            "# exported\n10,1000,{}\n11,1600,{}\n12,2200,{}\n",
            h(1),
            h(2),
            h(3)
        );
        let chain: ChainFile = text.parse().unwrap();
        assert_eq!(chain.current_time().unwrap(), Timestamp(2200));
        assert_eq!(
            chain
                .get_randomness(Timestamp(999))
                .unwrap()
                .unwrap()
                .block_height,
            10
        );
        assert_eq!(
            chain
                .get_randomness(Timestamp(1000))
                .unwrap()
                .unwrap()
                .block_height,
            11
        );
        assert_eq!(chain.get_randomness(Timestamp(2200)).unwrap(), None);
        assert!("1,2".parse::<ChainFile>().is_err());
        assert!(format!("2,10,{}\n1,20,{}", h(1), h(2))
            .parse::<ChainFile>()
            .is_err());
    }

    #[test]
    fn source_name_parsing() {
        assert_eq!("mock".parse::<BeaconConfig>().unwrap(), BeaconConfig::Mock);
        assert_eq!(
            "file:/tmp/c.csv".parse::<BeaconConfig>().unwrap(),
            BeaconConfig::File("/tmp/c.csv".into())
        );
        assert!("bitcoin".parse::<BeaconConfig>().is_err());
    }
}
