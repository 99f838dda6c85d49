//! `kdpos`: client, server and auditor roles on the command line.
//!
//! Exit status: 0 on success or a passing audit, 2 when an audit fails,
//! 3 when the beacon has not yet produced the audit's randomness, and 1 for
//! usage and operational errors.

use std::error::Error;
use std::fs::{self, OpenOptions};
use std::io::{self, Write};
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use kdpos::beacon::{
    BeaconConfig, ChainFile, MockChain, RandomnessSource, Timestamp, DEFAULT_EPOCH_SECS,
    DEFAULT_GENESIS, DEFAULT_MOCK_SEED,
};
use kdpos::erasure::Rate;
use kdpos::harness::{Adversary, StrategyConfig};
use kdpos::keyword_index::{FileId, Keyword};
use kdpos::roles::{
    AuditMode, AuditReport, AuditorState, ClientState, MetadataFile, Outcome, Server, ServerStore,
};
use kdpos::scheme::{setup, DEFAULT_CHALLENGE_SIZE, SECURITY_BITS};
use kdpos::transport::{serve, Endpoint, Handler, TcpEndpoint};
use kdpos::wire::Message;

const EXIT_ERROR: u8 = 1;
const EXIT_AUDIT_FAILED: u8 = 2;
const EXIT_DEFERRED: u8 = 3;

type CliResult = Result<ExitCode, Box<dyn Error>>;

#[derive(Parser)]
#[command(
    name = "kdpos",
    version,
    about = "Outsource files and audit their storage by keyword"
)]
struct Cli {
    #[command(subcommand)]
    role: Role,
}

#[derive(Subcommand)]
enum Role {
    /// Data owner: keys, uploads and reads.
    #[command(subcommand)]
    Client(ClientCmd),
    /// Storage server.
    #[command(subcommand)]
    Server(ServerCmd),
    /// Third-party auditor.
    #[command(subcommand)]
    Auditor(AuditorCmd),
}

#[derive(Subcommand)]
enum ClientCmd {
    /// Create a key pair and an empty client state file.
    Keygen {
        #[arg(long, default_value = "client.kds")]
        state: PathBuf,
        /// Erasure code rate, `num/den` with 0 < rate <= 1.
        #[arg(long, default_value = "1/2")]
        rate: Rate,
        /// Replace an existing state file.
        #[arg(long)]
        force: bool,
    },
    /// Encode, tag and upload files, then write the auditor metadata file.
    Outsource {
        #[arg(long, default_value = "client.kds")]
        state: PathBuf,
        #[arg(long)]
        server: String,
        #[arg(long, default_value = "metadata.kdm")]
        metadata: PathBuf,
        #[arg(required = true)]
        files: Vec<PathBuf>,
    },
    /// Fetch a file back, verifying every segment.
    Read {
        #[arg(long, default_value = "client.kds")]
        state: PathBuf,
        #[arg(long)]
        server: String,
        /// Name the file was outsourced under.
        #[arg(long, conflicts_with = "fid", required_unless_present = "fid")]
        name: Option<String>,
        #[arg(long)]
        fid: Option<FileId>,
        /// Output path; standard output when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum ServerCmd {
    /// Serve a store over TCP. Prints `listening <addr>` once bound.
    Serve {
        #[arg(long, default_value = "127.0.0.1:7878")]
        listen: String,
        #[arg(long)]
        store: PathBuf,
        /// Misbehave for testing, e.g. `strategy=delete-fraction delta=0.1`.
        #[arg(long)]
        strategy: Option<StrategyConfig>,
        #[command(flatten)]
        beacon: BeaconArgs,
    },
    /// Load a store from disk and print a summary.
    Load {
        #[arg(long)]
        store: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Interactive,
    Beacon,
}

#[derive(Args)]
struct AuditArgs {
    /// Metadata file exported by the client.
    #[arg(long, default_value = "metadata.kdm")]
    metadata: PathBuf,
    #[arg(long)]
    server: String,
    /// Segments challenged per file.
    #[arg(long, default_value_t = DEFAULT_CHALLENGE_SIZE)]
    challenge_size: usize,
    /// Ask for one aggregated proof instead of one per file.
    #[arg(long)]
    batch: bool,
    /// Unix time whose beacon output fixes the challenge; defaults to
    /// just before the newest block.
    #[arg(long)]
    timestamp: Option<i64>,
    /// Also append the JSON report line to this file.
    #[arg(long)]
    report: Option<PathBuf>,
    #[command(flatten)]
    beacon: BeaconArgs,
}

#[derive(Subcommand)]
enum AuditorCmd {
    /// Audit explicit files (all files in the metadata by default).
    AuditFids {
        #[command(flatten)]
        audit: AuditArgs,
        #[arg(long = "fid")]
        fids: Vec<FileId>,
        #[arg(long, value_enum, default_value = "beacon")]
        mode: ModeArg,
    },
    /// Audit every file containing a keyword.
    AuditKeyword {
        #[command(flatten)]
        audit: AuditArgs,
        #[arg(long)]
        keyword: String,
    },
}

#[derive(Args)]
struct BeaconArgs {
    /// `mock` or `file:<path>`; defaults to $KDPOS_BEACON, then `mock`.
    #[arg(long)]
    beacon: Option<BeaconConfig>,
    #[arg(long, default_value = DEFAULT_MOCK_SEED)]
    mock_seed: String,
    /// Seconds between mock blocks.
    #[arg(long, default_value_t = DEFAULT_EPOCH_SECS, value_parser = clap::value_parser!(i64).range(1..))]
    epoch_length: i64,
    /// Freeze the mock clock at this Unix time instead of following the
    /// system clock.
    #[arg(long)]
    mock_now: Option<i64>,
}

impl BeaconArgs {
    fn source(&self) -> Result<Arc<dyn RandomnessSource>, Box<dyn Error>> {
        let config = match &self.beacon {
            Some(c) => c.clone(),
            None => BeaconConfig::from_env()?,
        };
        Ok(match config {
            BeaconConfig::Mock => {
                let seed = self.mock_seed.as_bytes();
                match self.mock_now {
                    Some(t) => Arc::new(MockChain::new(
                        seed,
                        self.epoch_length,
                        DEFAULT_GENESIS,
                        Timestamp(t),
                    )),
                    None => Arc::new(MockChain::following_wall_clock(
                        seed,
                        self.epoch_length,
                        DEFAULT_GENESIS,
                    )),
                }
            }
            BeaconConfig::File(path) => Arc::new(ChainFile::open(&path)?),
        })
    }
}

fn read(path: &Path) -> Result<Vec<u8>, Box<dyn Error>> {
    fs::read(path).map_err(|e| format!("{}: {e}", path.display()).into())
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), Box<dyn Error>> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes).map_err(|e| format!("{}: {e}", tmp.display()))?;
    fs::rename(&tmp, path).map_err(|e| format!("{}: {e}", path.display()))?;
    Ok(())
}

fn endpoint(addr: &str) -> Result<TcpEndpoint, Box<dyn Error>> {
    TcpEndpoint::new(addr).map_err(|e| format!("{addr}: {e}").into())
}

fn client(cmd: ClientCmd) -> CliResult {
    match cmd {
        ClientCmd::Keygen { state, rate, force } => {
            if state.exists() && !force {
                return Err(
                    format!("{} exists; pass --force to replace it", state.display()).into(),
                );
            }
            let keys = setup(SECURITY_BITS, &mut rand::thread_rng())?;
            let fingerprint = hex::encode(keys.pk.fingerprint());
            write(&state, &ClientState::new(keys, rate).to_bytes())?;
            println!(
                "{}",
                serde_json::json!({ "state": state, "rate": rate.to_string(), "pk_fingerprint": fingerprint })
            );
        }
        ClientCmd::Outsource {
            state,
            server,
            metadata,
            files,
        } => {
            let mut client = ClientState::from_bytes(&read(&state)?)?;
            let mut inputs = Vec::with_capacity(files.len());
            for path in &files {
                let name = path
                    .file_name()
                    .ok_or_else(|| format!("{}: not a file", path.display()))?
                    .to_string_lossy()
                    .into_owned();
                inputs.push((name, read(path)?));
            }
            let (package, summary) = client.outsource(&inputs, &mut rand::thread_rng())?;
            match endpoint(&server)?.call(&Message::Upload(package))? {
                Message::Ack(_) => {}
                Message::Error(e) => return Err(format!("server refused the upload: {e}").into()),
                other => return Err(format!("unexpected {} reply", other.kind()).into()),
            }
            write(&state, &client.to_bytes())?;
            write(&metadata, &client.metadata_file().to_bytes())?;
            for s in summary {
                println!("{}", serde_json::to_string(&s)?);
            }
        }
        ClientCmd::Read {
            state,
            server,
            name,
            fid,
            out,
        } => {
            let client = ClientState::from_bytes(&read(&state)?)?;
            let fid = match (fid, name) {
                (Some(f), _) => f,
                (None, Some(n)) => client
                    .find(&n)
                    .ok_or_else(|| format!("no outsourced file named {n:?}"))?,
                (None, None) => unreachable!("clap requires one of --name and --fid"),
            };
            let bytes = client.read_file(&endpoint(&server)?, &fid)?;
            match out {
                Some(path) => write(&path, &bytes)?,
                None => io::stdout().write_all(&bytes)?,
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn server(cmd: ServerCmd) -> CliResult {
    match cmd {
        ServerCmd::Serve {
            listen,
            store,
            strategy,
            beacon,
        } => {
            let source = beacon.source()?;
            fs::create_dir_all(&store).map_err(|e| format!("{}: {e}", store.display()))?;
            let handler: Arc<dyn Handler> = match strategy {
                None => Arc::new(Server::open(&store, source)?),
                Some(config) => {
                    Arc::new(Adversary::new(ServerStore::load(&store)?, source, config))
                }
            };
            let listener = TcpListener::bind(&listen).map_err(|e| format!("{listen}: {e}"))?;
            println!("listening {}", listener.local_addr()?);
            io::stdout().flush()?;
            serve(listener, handler)?;
        }
        ServerCmd::Load { store } => {
            let s = ServerStore::load(&store)?;
            let segments: u64 = s.records.values().map(|r| r.segment_count()).sum();
            println!(
                "{}",
                serde_json::json!({
                    "store": store,
                    "pk_fingerprint": s.pk.map(|pk| hex::encode(pk.fingerprint())),
                    "files": s.records.len(),
                    "segments": segments,
                    "keywords": s.table.len(),
                })
            );
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn finish(report: &AuditReport, path: Option<&Path>) -> CliResult {
    let line = report.to_json();
    println!("{line}");
    if let Some(path) = path {
        let mut f = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| format!("{}: {e}", path.display()))?;
        writeln!(f, "{line}")?;
    }
    let files = report.challenged_fids.len();
    Ok(match report.outcome {
        Outcome::Pass => {
            eprintln!("audit passed: {files} file(s), l={}", report.challenge_size);
            ExitCode::SUCCESS
        }
        Outcome::Fail => {
            eprintln!(
                "audit FAILED at {}: {}",
                report.failed_check.as_deref().unwrap_or("?"),
                report.reason.as_deref().unwrap_or("")
            );
            ExitCode::from(EXIT_AUDIT_FAILED)
        }
        Outcome::Deferred => {
            eprintln!(
                "audit deferred: {}",
                report.reason.as_deref().unwrap_or("no beacon output yet")
            );
            ExitCode::from(EXIT_DEFERRED)
        }
    })
}

fn auditor_state(args: &AuditArgs) -> Result<AuditorState, Box<dyn Error>> {
    let meta = MetadataFile::from_bytes(&read(&args.metadata)?)?;
    Ok(
        AuditorState::new(meta.pk, meta.metadata, args.beacon.source()?)
            .with_challenge_size(args.challenge_size),
    )
}

fn auditor(cmd: AuditorCmd) -> CliResult {
    let mut rng = rand::thread_rng();
    match cmd {
        AuditorCmd::AuditFids { audit, fids, mode } => {
            let state = auditor_state(&audit)?;
            let fids = if fids.is_empty() {
                state.metadata.fids()
            } else {
                fids
            };
            let mode = match mode {
                ModeArg::Interactive => AuditMode::Interactive,
                ModeArg::Beacon => AuditMode::Beacon,
            };
            let report = state.audit_by_fids(
                &endpoint(&audit.server)?,
                &fids,
                mode,
                audit.batch,
                audit.timestamp.map(Timestamp),
                &mut rng,
            )?;
            finish(&report, audit.report.as_deref())
        }
        AuditorCmd::AuditKeyword { audit, keyword } => {
            let state = auditor_state(&audit)?;
            let kw = Keyword::parse(&keyword)
                .ok_or_else(|| format!("{keyword:?} is not a single keyword"))?;
            let report = state.audit_by_keyword(
                &endpoint(&audit.server)?,
                &kw,
                audit.timestamp.map(Timestamp),
                audit.batch,
                &mut rng,
            )?;
            finish(&report, audit.report.as_deref())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(EXIT_ERROR),
            };
        }
    };
    let result = match cli.role {
        Role::Client(cmd) => client(cmd),
        Role::Server(cmd) => server(cmd),
        Role::Auditor(cmd) => auditor(cmd),
    };
    result.unwrap_or_else(|e| {
        eprintln!("kdpos: {e}");
        ExitCode::from(EXIT_ERROR)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn grammar_is_consistent() {
        Cli::command().debug_assert();
    }
}
