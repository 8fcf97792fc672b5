use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use lcws::bench::{run_sweep, BenchConfig, BenchError};
use lcws::executor::{encrypt_and_send, receive_and_decrypt, LinkModel, Mode, Stage, StageFailure};
use lcws::keys;
use lcws::store::{FileStore, ObjectId, StoreError};
use lcws::wire::{MessageId, WireCtb};
use lcws::DecodeError;
use lcws_core::policy::{parse_policy, AttributeSet, PolicyError};
use lcws_core::scheme::{
    keygen, make_challenge, setup, verify_message, AttributePoints, EncryptionContext, SchemeError,
};
use rand::rngs::OsRng;

const MIB: f64 = 1024.0 * 1024.0;

#[derive(Parser)]
#[command(name = "lcws", version, about = "Level-partitioned CP-ABE data outsourcing")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the public key, master key and encryption context.
    TaSetup {
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Issue a secret key for a comma-separated attribute list.
    TaKeygen {
        #[arg(long)]
        attrs: String,
        #[arg(long)]
        pk: PathBuf,
        #[arg(long)]
        mk: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build the verification tuple for a stored message.
    TaChallenge {
        #[arg(long)]
        message_id: MessageId,
        #[arg(long)]
        store: PathBuf,
        #[arg(long)]
        mk: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Encrypt a file under a policy and upload its blocks; prints the message id.
    DoEncrypt {
        #[arg(long)]
        message: PathBuf,
        #[arg(long)]
        policy: String,
        #[arg(long)]
        pk: PathBuf,
        #[arg(long)]
        context: PathBuf,
        #[arg(long)]
        store: PathBuf,
        #[command(flatten)]
        link: LinkArgs,
    },
    /// Download and decrypt a message.
    DrDecrypt {
        #[arg(long)]
        message_id: MessageId,
        #[arg(long)]
        sk: PathBuf,
        #[arg(long)]
        store: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        link: LinkArgs,
    },
    /// Check a decrypted file against its verification tuple; prints True or False.
    DrVerify {
        #[arg(long)]
        message: PathBuf,
        #[arg(long)]
        v: PathBuf,
        #[arg(long)]
        pk: PathBuf,
    },
    /// Sweep message sizes comparing sequential and pipelined totals.
    Bench {
        /// Message sizes in MiB.
        #[arg(long, value_delimiter = ',', default_value = "1,2,4,8,16")]
        sizes: Vec<f64>,
        #[arg(long, default_value_t = 10)]
        levels: u32,
        #[arg(long, default_value_t = 100)]
        leaves: u32,
        /// Link bandwidth in MiB/s.
        #[arg(long, default_value_t = 64.0)]
        bandwidth: f64,
        /// Per-block link latency in milliseconds.
        #[arg(long, default_value_t = 50)]
        latency_ms: u64,
        #[arg(long, default_value_t = 5)]
        runs: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out_csv: PathBuf,
        /// Also write a gnuplot data file.
        #[arg(long)]
        gnuplot: Option<PathBuf>,
    },
}

#[derive(Args)]
struct LinkArgs {
    /// Simulated link bandwidth in MiB/s; unthrottled when absent.
    #[arg(long)]
    bandwidth: Option<f64>,
    /// Simulated per-block latency in milliseconds.
    #[arg(long, default_value_t = 0)]
    latency_ms: u64,
}

impl LinkArgs {
    fn model(&self) -> Result<LinkModel, Failure> {
        let latency = Duration::from_millis(self.latency_ms);
        match self.bandwidth {
            None if latency.is_zero() => Ok(LinkModel::unthrottled()),
            None => Ok(LinkModel::new(f64::MAX, latency).expect("finite bandwidth")),
            Some(b) => LinkModel::new(b * MIB, latency).ok_or_else(|| Failure::usage("bandwidth must be positive")),
        }
    }
}

/// An error with its exit status.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    const USAGE: u8 = 1;
    const POLICY: u8 = 2;
    const IO: u8 = 3;
    const FORMAT: u8 = 4;

    fn usage(message: impl Into<String>) -> Self {
        Failure {
            code: Self::USAGE,
            message: message.into(),
        }
    }

    fn policy(message: impl Into<String>) -> Self {
        Failure {
            code: Self::POLICY,
            message: message.into(),
        }
    }

    fn format(message: impl Into<String>) -> Self {
        Failure {
            code: Self::FORMAT,
            message: message.into(),
        }
    }

    fn io(path: &Path, e: io::Error) -> Self {
        Failure {
            code: Self::IO,
            message: format!("{}: {e}", path.display()),
        }
    }
}

impl From<StoreError> for Failure {
    fn from(e: StoreError) -> Self {
        Failure {
            code: Failure::IO,
            message: e.to_string(),
        }
    }
}

impl From<PolicyError> for Failure {
    fn from(e: PolicyError) -> Self {
        Failure::format(e.to_string())
    }
}

impl From<SchemeError> for Failure {
    fn from(e: SchemeError) -> Self {
        Failure::format(e.to_string())
    }
}

/// Store traffic fails as I/O, block processing as format.
fn stage_failure(e: StageFailure) -> Failure {
    Failure {
        code: match e.stage {
            Stage::Transmit => Failure::IO,
            Stage::Encrypt | Stage::Decrypt => Failure::FORMAT,
        },
        message: e.to_string(),
    }
}

fn read(path: &Path) -> Result<Vec<u8>, Failure> {
    fs::read(path).map_err(|e| Failure::io(path, e))
}

fn load<T>(path: &Path, decode: fn(&[u8]) -> Result<T, DecodeError>) -> Result<T, Failure> {
    decode(&read(path)?).map_err(|e| Failure::format(format!("{}: {e}", path.display())))
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    fs::write(path, bytes).map_err(|e| Failure::io(path, e))
}

fn write_private(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    keys::write_private(path, bytes).map_err(|e| Failure::io(path, e))
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::TaSetup { out_dir } => {
            fs::create_dir_all(&out_dir).map_err(|e| Failure::io(&out_dir, e))?;
            let (pk, mk) = setup(&mut OsRng);
            write(&out_dir.join("pk.lcwk"), &keys::encode_public(&pk))?;
            write_private(&out_dir.join("mk.lcwk"), &keys::encode_master(&mk))?;
            let ctx = EncryptionContext::from_master(&mk);
            write_private(&out_dir.join("context.lcwk"), &keys::encode_context(&ctx))?;
        }
        Command::TaKeygen { attrs, pk, mk, out } => {
            let attrs = AttributeSet::parse_list(&attrs);
            if attrs.is_empty() {
                return Err(Failure::usage("attribute list is empty"));
            }
            let pk = load(&pk, keys::decode_public)?;
            let mk = load(&mk, keys::decode_master)?;
            let sk = keygen(&pk, &mk, &attrs, &mut OsRng)?;
            write_private(&out, &keys::encode_secret(&sk))?;
        }
        Command::TaChallenge {
            message_id,
            store,
            mk,
            out,
        } => {
            let mk = load(&mk, keys::decode_master)?;
            let store = FileStore::open(store)?;
            let bytes = store.get(ObjectId {
                message: message_id,
                index: 1,
            })?;
            let ctb = WireCtb::from_bytes(&bytes).map_err(|e| Failure::format(e.to_string()))?;
            let commitment = ctb
                .block
                .commitment
                .ok_or_else(|| Failure::format("first block carries no commitment"))?;
            let v = make_challenge(&commitment, &mk, &mut OsRng);
            write(&out, &keys::encode_verification(&v))?;
        }
        Command::DoEncrypt {
            message,
            policy,
            pk,
            context,
            store,
            link,
        } => {
            let link = link.model()?;
            let data = read(&message)?;
            if data.is_empty() {
                return Err(Failure::usage("empty message"));
            }
            let tree = parse_policy(&policy)?;
            let pk = load(&pk, keys::decode_public)?;
            let ctx = load(&context, keys::decode_context)?;
            let store = FileStore::open(store)?;
            let id = MessageId::random(&mut OsRng);
            let points = AttributePoints::for_tree(&tree);
            let mut sink = |index: u32, bytes: Vec<u8>| {
                store
                    .put(ObjectId { message: id, index }, &bytes)
                    .map_err(|e| e.to_string())
            };
            encrypt_and_send(&pk, &ctx, &tree, &points, &data, id, &link, Mode::Overlap, &mut OsRng, &mut sink)
                    .map_err(stage_failure)?;
            println!("{id}");
        }
        Command::DrDecrypt {
            message_id,
            sk,
            store,
            out,
            link,
        } => {
            let link = link.model()?;
            let sk = load(&sk, keys::decode_secret)?;
            let store = FileStore::open(store)?;
            let ids = store.list(message_id)?;
            let n = ids.len() as u32;
            if n == 0 || ids.iter().zip(1..).any(|(id, i)| id.index != i) {
                return Err(Failure::format(format!("message {message_id} has missing blocks")));
            }
            let mut source = |index: u32| {
                store
                    .get(ObjectId {
                        message: message_id,
                        index,
                    })
                    .map_err(|e| e.to_string())
            };
            let (_, message) = receive_and_decrypt(&sk, n, &link, Mode::Overlap, &mut source).map_err(stage_failure)?;
            let message = message.ok_or_else(|| Failure::policy("access policy not satisfied"))?;
            write(&out, &message)?;
        }
        Command::DrVerify { message, v, pk } => {
            let data = read(&message)?;
            let v = load(&v, keys::decode_verification)?;
            let pk = load(&pk, keys::decode_public)?;
            println!("{}", if verify_message(&data, &v, &pk) { "True" } else { "False" });
        }
        Command::Bench {
            sizes,
            levels,
            leaves,
            bandwidth,
            latency_ms,
            runs,
            seed,
            out_csv,
            gnuplot,
        } => {
            let link = LinkModel::new(bandwidth * MIB, Duration::from_millis(latency_ms))
                .ok_or_else(|| Failure::usage("bandwidth must be positive"))?;
            let cfg = BenchConfig {
                sizes: sizes.iter().map(|s| (s * MIB).round() as usize).collect(),
                levels,
                leaves,
                link,
                runs,
                seed,
            };
            let (report, _) = run_sweep(&cfg, &mut |row| {
                eprintln!(
                    "{:>10} B  enc seq {:.3}s pipe {:.3}s  dec seq {:.3}s pipe {:.3}s",
                    row.size, row.enc.sequential, row.enc.pipelined, row.dec.sequential, row.dec.pipelined
                )
            })
            .map_err(|e| match e {
                BenchError::Sizes | BenchError::Shape { .. } | BenchError::Runs => Failure::usage(e.to_string()),
                _ => Failure::format(e.to_string()),
            })?;
            let mut csv = Vec::new();
            report.write_csv(&mut csv).map_err(|e| Failure::format(e.to_string()))?;
            write(&out_csv, &csv)?;
            if let Some(path) = gnuplot {
                let mut dat = Vec::new();
                report.write_gnuplot(&mut dat).map_err(|e| Failure::io(&path, e))?;
                write(&path, &dat)?;
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { Failure::USAGE } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("lcws: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
