//! `crtsplit`: key generation, transfer and analysis from the command line.
//!
//! Exit codes: 0 success, 2 usage or parameters, 3 transport, 4 integrity.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::thread;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use sha2::{Digest, Sha256};

use crtsplit::analysis::{
    bandwidth_loss, channel_classifier, distinguishability, independence_check, render_bandwidth,
    render_distinguisher, render_independence, render_smax, render_verdicts, sig6,
};
use crtsplit::transfer::{capture_path, receive_stream, send_stream, Capture};
use crtsplit::transport::{memory_pair, tcp_connect, TcpBundleListener};
use crtsplit::{
    deserialize_config, serialize_config, setup, AssignmentMode, CipherId, Error, ModuliSet,
    Natural, Receiver, Sender, SetupConfig, SetupParams,
};

const EXIT_USAGE: u8 = 2;
const EXIT_TRANSPORT: u8 = 3;
const EXIT_INTEGRITY: u8 = 4;

#[derive(Parser)]
#[command(
    name = "crtsplit",
    version,
    about = "Split encrypted data into CRT residues across channels"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a key file.
    Keygen(KeygenArgs),
    /// Send a file over A channels.
    Send(SendArgs),
    /// Listen for a sender and write the reassembled file.
    Recv(RecvArgs),
    /// Print analysis tables.
    #[command(subcommand)]
    Analyze(AnalyzeCommand),
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Dynamic,
    Static,
}

#[derive(Clone, Copy, ValueEnum)]
enum CipherArg {
    Aes128,
}

#[derive(Clone, Copy, ValueEnum, PartialEq)]
enum BackendArg {
    Tcp,
    Memory,
}

#[derive(Args)]
struct KeygenArgs {
    /// Available channels (A).
    #[arg(long)]
    channels: u16,
    /// Channels carrying residues (S).
    #[arg(long)]
    used: u16,
    /// Cipher blocks per superblock (L).
    #[arg(long, default_value_t = 1)]
    multiplier: u16,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = ModeArg::Dynamic)]
    mode: ModeArg,
    #[arg(long, value_enum, default_value_t = CipherArg::Aes128)]
    cipher: CipherArg,
    /// Cipher key in hex; derived from the seed when absent.
    #[arg(long)]
    key: Option<String>,
    /// CBC initial vector in hex; derived from the seed when absent.
    #[arg(long)]
    iv: Option<String>,
    #[arg(long)]
    superblocks_per_session: Option<u32>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SendArgs {
    #[arg(long)]
    key: PathBuf,
    /// Input file, `-` for stdin.
    #[arg(long, default_value = "-")]
    input: String,
    #[arg(long, default_value = "127.0.0.1")]
    host: String,
    #[arg(long, default_value_t = 47000)]
    port_base: u16,
    #[arg(long, value_enum, default_value_t = BackendArg::Tcp)]
    backend: BackendArg,
    /// Receiver output for `--backend memory`, `-` for stdout.
    #[arg(long, default_value = "-")]
    output: String,
    /// Write each channel's raw cells to `<dir>/ch_<id>.bin`.
    #[arg(long)]
    capture: Option<PathBuf>,
    /// Seconds to keep retrying the receiver.
    #[arg(long, default_value_t = 30)]
    connect_timeout: u64,
}

#[derive(Args)]
struct RecvArgs {
    #[arg(long)]
    key: PathBuf,
    /// Output file, `-` for stdout.
    #[arg(long, default_value = "-")]
    output: String,
    #[arg(long, default_value = "127.0.0.1")]
    host: String,
    #[arg(long, default_value_t = 47000)]
    port_base: u16,
    /// Seconds to wait for the sender; waits forever when absent.
    #[arg(long)]
    accept_timeout: Option<u64>,
}

#[derive(Subcommand)]
enum AnalyzeCommand {
    /// Bandwidth lost to byte-aligned residues.
    Bandwidth {
        #[arg(long, default_value_t = 128)]
        nb: u64,
        #[arg(long)]
        channels: u64,
        /// `a..b` (inclusive) or a comma list.
        #[arg(long, default_value = "1..8")]
        multipliers: String,
    },
    /// Theoretical distinguishing probability.
    Pd {
        /// Superblock bits; taken from the key file when absent.
        #[arg(long)]
        n: Option<u64>,
        #[arg(long, conflicts_with = "key")]
        moduli: Option<String>,
        #[arg(long)]
        key: Option<PathBuf>,
    },
    /// Largest feasible channel count per superblock size.
    Smax {
        /// `a..b` (inclusive) or a comma list.
        #[arg(long)]
        n: String,
    },
    /// Joint residue table flatness for a coprime pair.
    Independence {
        #[arg(long)]
        p: u64,
        #[arg(long)]
        q: u64,
    },
    /// Flag decoy channels in a capture directory.
    Classify {
        #[arg(long)]
        transcript: PathBuf,
        #[arg(long, conflicts_with = "moduli")]
        key: Option<PathBuf>,
        /// One modulus for every channel, or one per channel.
        #[arg(long)]
        moduli: Option<String>,
        /// Cell width in bytes when classifying with `--moduli`.
        #[arg(long)]
        width: Option<usize>,
    },
}

struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = if e.is_integrity() {
            EXIT_INTEGRITY
        } else if e.is_transport() {
            EXIT_TRANSPORT
        } else {
            EXIT_USAGE
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_USAGE,
        message: message.into(),
    }
}

type CliResult<T = ()> = std::result::Result<T, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Keygen(args) => keygen(args),
        Command::Send(args) => send(args),
        Command::Recv(args) => recv(args),
        Command::Analyze(cmd) => analyze(cmd),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("crtsplit: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn derive_bytes(label: &str, seed: u64) -> [u8; 16] {
    let digest = Sha256::new()
        .chain_update(b"crtsplit ")
        .chain_update(label)
        .chain_update(seed.to_be_bytes())
        .finalize();
    digest[..16].try_into().expect("digest is 32 bytes")
}

fn hex_arg(name: &str, value: Option<&str>, seed: u64) -> CliResult<Vec<u8>> {
    match value {
        Some(v) => hex::decode(v).map_err(|e| usage(format!("--{name}: {e}"))),
        None => Ok(derive_bytes(name, seed).to_vec()),
    }
}

fn keygen(args: KeygenArgs) -> CliResult {
    let key = hex_arg("key", args.key.as_deref(), args.seed)?;
    let iv = hex_arg("iv", args.iv.as_deref(), args.seed)?;
    let mut cfg = setup(&SetupParams {
        cipher: match args.cipher {
            CipherArg::Aes128 => CipherId::Aes128,
        },
        key: &key,
        iv: &iv,
        available: args.channels,
        used: args.used,
        multiplier: args.multiplier,
        seed: args.seed,
        mode: match args.mode {
            ModeArg::Dynamic => AssignmentMode::Dynamic,
            ModeArg::Static => AssignmentMode::Static,
        },
    })
    .map_err(|e| usage(e.to_string()))?;
    if let Some(n) = args.superblocks_per_session {
        cfg = cfg
            .with_superblocks_per_session(n)
            .map_err(|e| usage(e.to_string()))?;
    }
    std::fs::write(&args.out, serialize_config(&cfg))
        .map_err(|e| usage(format!("{}: {e}", args.out.display())))?;
    print!("{}", summary(&cfg)?);
    Ok(())
}

fn summary(cfg: &SetupConfig) -> CliResult<String> {
    let bw = bandwidth_loss(
        cfg.cipher().block_bits(),
        u64::from(cfg.multiplier()),
        u64::from(cfg.used()),
    )?;
    let session = cfg.moduli().subset(0..usize::from(cfg.used()))?;
    let pd = distinguishability(cfg.superblock_bits(), &session)?;
    let mode = match cfg.mode() {
        AssignmentMode::Dynamic => "dynamic",
        AssignmentMode::Static => "static",
    };
    Ok(format!(
        "channels\t{}\nused\t{}\nmultiplier\t{}\nmode\t{mode}\nsuperblock_bits\t{}\n\
         moduli\t{}\nmodulus_bits\t{}\ncell_bytes\t{}\nbandwidth_loss_percent\t{}\np_d_theoretical\t{}\n",
        cfg.available(),
        cfg.used(),
        cfg.multiplier(),
        cfg.superblock_bits(),
        cfg.moduli().len(),
        cfg.moduli().bit_lengths().iter().max().copied().unwrap_or(0),
        bw.bytes_per_channel,
        sig6(bw.loss_fraction * 100.0),
        sig6(pd.p_d_theoretical),
    ))
}

fn load_key(path: &Path) -> CliResult<SetupConfig> {
    let bytes = std::fs::read(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    deserialize_config(&bytes).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn open_input(path: &str) -> CliResult<Box<dyn Read + Send>> {
    if path == "-" {
        return Ok(Box::new(io::stdin()));
    }
    let file = File::open(path).map_err(|e| usage(format!("{path}: {e}")))?;
    Ok(Box::new(BufReader::new(file)))
}

fn open_output(path: &str) -> CliResult<Box<dyn Write + Send>> {
    if path == "-" {
        return Ok(Box::new(io::stdout()));
    }
    let file = File::create(path).map_err(|e| usage(format!("{path}: {e}")))?;
    Ok(Box::new(BufWriter::new(file)))
}

fn send(args: SendArgs) -> CliResult {
    let cfg = load_key(&args.key)?;
    let mut input = open_input(&args.input)?;
    let mut capture = match &args.capture {
        Some(dir) => Some(
            Capture::create(dir, usize::from(cfg.available()))
                .map_err(|e| usage(format!("{}: {e}", dir.display())))?,
        ),
        None => None,
    };
    let mut sender = Sender::new(cfg.clone());
    let widths = cfg.cell_widths();

    match args.backend {
        BackendArg::Tcp => {
            let mut bundle = tcp_connect(
                &args.host,
                args.port_base,
                &widths,
                Duration::from_secs(args.connect_timeout),
            )?;
            send_stream(&mut sender, &mut input, &mut bundle, capture.as_mut())?;
        }
        BackendArg::Memory => {
            let mut output = open_output(&args.output)?;
            let (mut tx, mut rx) = memory_pair(&widths)?;
            let receiving = thread::spawn(move || {
                let mut receiver = Receiver::new(cfg);
                receive_stream(&mut receiver, &mut rx, &mut output)
            });
            let sent = send_stream(&mut sender, &mut input, &mut tx, capture.as_mut());
            let received = receiving
                .join()
                .map_err(|_| usage("receiver thread panicked"))?;
            received?;
            sent?;
        }
    }
    if let Some(capture) = capture {
        capture.finish()?;
    }
    Ok(())
}

fn recv(args: RecvArgs) -> CliResult {
    let cfg = load_key(&args.key)?;
    let listener = TcpBundleListener::bind(&args.host, args.port_base, &cfg.cell_widths())?;
    let mut bundle = listener.accept(args.accept_timeout.map(Duration::from_secs))?;
    let mut output = open_output(&args.output)?;
    receive_stream(&mut Receiver::new(cfg), &mut bundle, &mut output)?;
    Ok(())
}

/// `a..b` (inclusive) or `a,b,c`.
fn parse_list(text: &str) -> CliResult<Vec<u64>> {
    let bad = || usage(format!("bad range {text:?}"));
    let values: Vec<u64> = if let Some((lo, hi)) = text.split_once("..") {
        let lo: u64 = lo.trim().parse().map_err(|_| bad())?;
        let hi: u64 = hi
            .trim_start_matches('=')
            .trim()
            .parse()
            .map_err(|_| bad())?;
        (lo..=hi).collect()
    } else {
        text.split(',')
            .map(|v| v.trim().parse().map_err(|_| bad()))
            .collect::<CliResult<_>>()?
    };
    if values.is_empty() || values.contains(&0) {
        return Err(bad());
    }
    Ok(values)
}

fn parse_moduli(text: &str) -> CliResult<Vec<Natural>> {
    text.split(',')
        .map(|v| {
            v.trim()
                .parse::<Natural>()
                .map_err(|_| usage(format!("bad modulus {v:?}")))
        })
        .collect()
}

fn analyze(cmd: AnalyzeCommand) -> CliResult {
    let report = match cmd {
        AnalyzeCommand::Bandwidth {
            nb,
            channels,
            multipliers,
        } => render_bandwidth(nb, channels, &parse_list(&multipliers)?)?,
        AnalyzeCommand::Pd { n, moduli, key } => {
            let (n, set) = match (moduli, key) {
                (Some(m), None) => (
                    n.ok_or_else(|| usage("--n is required with --moduli"))?,
                    ModuliSet::new(parse_moduli(&m)?)?,
                ),
                (None, Some(path)) => {
                    let cfg = load_key(&path)?;
                    let set = cfg.moduli().subset(0..usize::from(cfg.used()))?;
                    (n.unwrap_or(cfg.superblock_bits()), set)
                }
                _ => return Err(usage("give one of --moduli or --key")),
            };
            render_distinguisher(&distinguishability(n, &set)?)
        }
        AnalyzeCommand::Smax { n } => render_smax(&parse_list(&n)?),
        AnalyzeCommand::Independence { p, q } => render_independence(&independence_check(p, q)?),
        AnalyzeCommand::Classify {
            transcript,
            key,
            moduli,
            width,
        } => classify(&transcript, key.as_deref(), moduli.as_deref(), width)?,
    };
    print!("{report}");
    Ok(())
}

fn classify(
    dir: &Path,
    key: Option<&Path>,
    moduli: Option<&str>,
    width: Option<usize>,
) -> CliResult<String> {
    let (widths, hypothesis) = match (key, moduli) {
        (Some(path), None) => {
            let cfg = load_key(path)?;
            let widths = cfg.cell_widths();
            let hypothesis = match cfg.mode() {
                AssignmentMode::Static => cfg.moduli().moduli().to_vec(),
                // any dynamic residue is below the largest modulus
                AssignmentMode::Dynamic => {
                    let max = cfg
                        .moduli()
                        .moduli()
                        .iter()
                        .max()
                        .cloned()
                        .unwrap_or_default();
                    vec![max; widths.len()]
                }
            };
            (widths, hypothesis)
        }
        (None, Some(list)) => {
            let mut moduli = parse_moduli(list)?;
            let channels = count_captures(dir);
            if moduli.len() == 1 {
                moduli = vec![moduli[0].clone(); channels];
            }
            if moduli.len() != channels {
                return Err(usage(format!(
                    "{} moduli for {channels} captured channels",
                    moduli.len()
                )));
            }
            let widths = match width {
                Some(w) => vec![w; channels],
                None => moduli
                    .iter()
                    .map(|q| q.bits().div_ceil(8) as usize)
                    .collect(),
            };
            (widths, moduli)
        }
        _ => return Err(usage("give one of --key or --moduli")),
    };
    let transcript = (0..widths.len())
        .map(|id| {
            let path = capture_path(dir, id);
            std::fs::read(&path).map_err(|e| usage(format!("{}: {e}", path.display())))
        })
        .collect::<CliResult<Vec<_>>>()?;
    let verdicts = channel_classifier(&transcript, &widths, &hypothesis)?;
    Ok(render_verdicts(
        &transcript,
        &widths,
        &hypothesis,
        &verdicts,
    )?)
}

fn count_captures(dir: &Path) -> usize {
    (0..)
        .take_while(|&id| capture_path(dir, id).exists())
        .count()
}
