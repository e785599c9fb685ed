//! Command-line front end: key generation, a registration server, a
//! registering client, an offline hasher and a communication-cost
//! benchmark.
//!
//! Passwords are read from the `ZKPPC_PASSWORD` environment variable
//! or an interactive prompt, never from the command line: argv is
//! visible to every process on the machine.

use std::io::Write as _;
use std::net::{TcpListener, TcpStream};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rand::RngCore;

use zkppc_core::ktx::StringCommitKey;
use zkppc_core::policy::Policy;
use zkppc_core::pwhash::{self, PublicParams};
use zkppc_core::stern::{rounds_for_soundness, WireMode, MAX_ROUNDS};
use zkppc_core::zkppc::{cost_report, prepare_registration};
use zkppc_wire::{loopback, register, Metered, RecordStore, Server, WireError};

#[derive(Parser)]
#[command(name = "zkppc", about = "zero-knowledge password policy checks", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModeArg {
    /// Packed vectors; masks that the verifier can re-expand travel as seeds.
    Standard,
    /// Standard plus a seeded shifted-witness opening.
    Seeded,
    /// Everything explicit; largest, useful as a baseline.
    Explicit,
}

impl From<ModeArg> for WireMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Standard => WireMode::Standard,
            ModeArg::Seeded => WireMode::Seeded,
            ModeArg::Explicit => WireMode::Explicit,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate public parameters and write their descriptor to a file.
    Keygen {
        /// 32-byte matrix seed as 64 hex digits; random when absent.
        #[arg(long)]
        seed: Option<String>,
        /// Shortest password the hash accepts.
        #[arg(long, default_value_t = 8)]
        nmin: usize,
        /// Longest password the hash accepts.
        #[arg(long, default_value_t = 16)]
        nmax: usize,
        /// Security level selector for the arithmetic profile.
        #[arg(long, default_value_t = 128)]
        lambda: u32,
        /// Output file for the parameter descriptor.
        #[arg(long)]
        out: PathBuf,
    },
    /// Accept registrations on a listening socket.
    Serve {
        /// Parameter descriptor written by keygen.
        #[arg(long)]
        pp: PathBuf,
        /// Policy as "digits,symbols,lower,upper,min_len,max_len".
        #[arg(long)]
        policy: String,
        /// Proof rounds demanded per registration.
        #[arg(long, default_value_t = 52)]
        rounds: usize,
        /// Listen address, e.g. 127.0.0.1:7878.
        #[arg(long)]
        listen: String,
        /// Append-only session record file.
        #[arg(long, default_value = "records.bin")]
        records: PathBuf,
        /// Exit after a single connection.
        #[arg(long)]
        once: bool,
    },
    /// Register a password with a server.
    Register {
        /// Server address, e.g. 127.0.0.1:7878.
        #[arg(long)]
        server: String,
        /// Policy the server is expected to announce.
        #[arg(long)]
        policy: String,
        /// Response encoding.
        #[arg(long, value_enum, default_value_t = ModeArg::Standard)]
        mode: ModeArg,
        /// Write the local secret record (shuffle and salt) here,
        /// mode 0600. Without it the secrets are discarded.
        #[arg(long)]
        secret_out: Option<PathBuf>,
    },
    /// Hash a password offline and print the public digest.
    Hash {
        /// Parameter descriptor written by keygen.
        #[arg(long)]
        pp: PathBuf,
        /// Write the local secret record (shuffle and salt) here,
        /// mode 0600. Without it the secrets are discarded.
        #[arg(long)]
        secret_out: Option<PathBuf>,
    },
    /// Measure communication cost per round and per session.
    Bench {
        /// Parameter descriptor written by keygen.
        #[arg(long)]
        pp: PathBuf,
        /// Policy as "digits,symbols,lower,upper,min_len,max_len".
        #[arg(long)]
        policy: String,
        /// Session length to measure.
        #[arg(long, default_value_t = 52)]
        rounds: usize,
    },
}

fn read_password() -> Result<Vec<u8>, WireError> {
    if let Ok(pw) = std::env::var("ZKPPC_PASSWORD") {
        return Ok(pw.into_bytes());
    }
    let pw = rpassword::prompt_password("password: ")?;
    Ok(pw.into_bytes())
}

fn load_params(path: &PathBuf) -> Result<PublicParams, WireError> {
    Ok(PublicParams::from_bytes(&std::fs::read(path)?)?)
}

fn parse_seed(seed: Option<String>) -> Result<[u8; 32], WireError> {
    let mut out = [0u8; 32];
    match seed {
        Some(s) => {
            let bytes = hex::decode(s.trim())
                .map_err(|_| WireError::Store("seed is not valid hex".into()))?;
            if bytes.len() != 32 {
                return Err(WireError::Store("seed must be exactly 32 bytes".into()));
            }
            out.copy_from_slice(&bytes);
        }
        None => rand::thread_rng().fill_bytes(&mut out),
    }
    Ok(out)
}

/// Shuffle images (16-bit little-endian) then packed salt bits,
/// written with owner-only permissions.
fn write_secret(path: &PathBuf, shuffle: &[u16], salt: &[u8]) -> Result<(), WireError> {
    let mut bytes = Vec::new();
    zkppc_core::serial::write_u16_slice_le(&mut bytes, shuffle);
    bytes.extend_from_slice(salt);
    let mut opts = std::fs::OpenOptions::new();
    opts.write(true).create_new(true);
    #[cfg(unix)]
    {
        use std::os::unix::fs::OpenOptionsExt;
        opts.mode(0o600);
    }
    opts.open(path)?.write_all(&bytes)?;
    Ok(())
}

fn run() -> Result<(), WireError> {
    match Cli::parse().command {
        Command::Keygen { seed, nmin, nmax, lambda, out } => {
            let seed = parse_seed(seed)?;
            let pp = PublicParams::setup(lambda, nmin, nmax, seed)?;
            std::fs::write(&out, pp.to_bytes())?;
            let p = pp.params();
            println!("wrote {}", out.display());
            println!("fingerprint  {}", hex::encode(pp.fingerprint()));
            println!(
                "profile      n={} q={} m={} lengths {}..={}",
                p.n,
                p.q,
                p.m,
                pp.n_min(),
                pp.n_max()
            );
            Ok(())
        }
        Command::Serve { pp, policy, rounds, listen, records, once } => {
            let pp = load_params(&pp)?;
            let policy = Policy::parse(&policy)?;
            let server = Server::new(pp, policy, rounds)?;
            let mut store = RecordStore::open(&records)?;
            let listener = TcpListener::bind(&listen)?;
            println!(
                "listening on {} (policy {}, {} rounds, fingerprint {})",
                listener.local_addr()?,
                server.policy(),
                server.rounds(),
                hex::encode(server.params().fingerprint())
            );
            let mut rng = rand::thread_rng();
            for conn in listener.incoming() {
                let mut stream = match conn {
                    Ok(s) => s,
                    Err(err) => {
                        eprintln!("accept failed: {err}");
                        continue;
                    }
                };
                let _ = stream.set_nodelay(true);
                let peer = stream
                    .peer_addr()
                    .map(|a| a.to_string())
                    .unwrap_or_else(|_| "unknown".into());
                match server.serve_connection(&mut stream, &mut rng) {
                    Ok(record) => {
                        store.append(&record)?;
                        let total: u32 = record.frames.iter().map(|&(_, l)| l).sum();
                        println!(
                            "{peer}: {} ({} rounds, {} bytes, digest {}…)",
                            if record.verdict { "accepted" } else { "rejected" },
                            record.rounds,
                            total,
                            hex::encode(&record.digest[..8.min(record.digest.len())])
                        );
                    }
                    Err(err) => eprintln!("{peer}: session failed: {err}"),
                }
                if once {
                    break;
                }
            }
            Ok(())
        }
        Command::Register { server, policy, mode, secret_out } => {
            let policy = Policy::parse(&policy)?;
            let password = read_password()?;
            let stream = TcpStream::connect(&server)?;
            let _ = stream.set_nodelay(true);
            let mut stream = Metered::new(stream);
            let outcome =
                register(&mut stream, &policy, mode.into(), &password, &mut rand::thread_rng())?;
            println!("{}", if outcome.accepted { "accepted" } else { "rejected" });
            println!("rounds       {}", outcome.rounds);
            println!("digest       {}", hex::encode(&outcome.digest));
            println!("proof bytes  {}", outcome.traffic.proof_bytes());
            println!("total bytes  {}", outcome.traffic.total_bytes());
            println!("elapsed      {:.3?}", outcome.elapsed);
            match secret_out {
                Some(path) => {
                    write_secret(&path, &outcome.shuffle, &outcome.salt)?;
                    println!("secrets      written to {} (keep them local)", path.display());
                }
                None => println!("secrets      discarded (pass --secret-out to keep them)"),
            }
            if outcome.accepted {
                Ok(())
            } else {
                Err(WireError::Peer("registration rejected".into()))
            }
        }
        Command::Hash { pp, secret_out } => {
            let pp = load_params(&pp)?;
            let password = read_password()?;
            let mut rng = rand::thread_rng();
            let chi = pwhash::pre_salt(&pp, &mut rng);
            let r = pwhash::salt(&pp, &mut rng);
            let shuffled = pwhash::pre_hash(&pp, &password, &chi)?;
            let digest = pwhash::hash(&pp, &shuffled, &chi, &r)?;
            println!("fingerprint  {}", hex::encode(pp.fingerprint()));
            println!("digest       {}", hex::encode(digest.to_bytes()));
            match secret_out {
                Some(path) => {
                    let salt = zkppc_core::serial::pack_bits(r.as_bits());
                    write_secret(&path, chi.images(), &salt)?;
                    println!("secrets      written to {} (keep them local)", path.display());
                }
                None => println!("secrets      discarded (pass --secret-out to keep them)"),
            }
            Ok(())
        }
        Command::Bench { pp, policy, rounds } => {
            let pp = load_params(&pp)?;
            let policy = Policy::parse(&policy)?;
            if rounds == 0 || rounds > MAX_ROUNDS {
                return Err(WireError::ParameterMismatch("round count out of range"));
            }
            bench(pp, policy, rounds)
        }
    }
}

fn bench(pp: PublicParams, policy: Policy, rounds: usize) -> Result<(), WireError> {
    let mut rng = rand::thread_rng();
    let password = policy.sample_compliant(&mut rng);
    let key = StringCommitKey::derive(pp.params());
    let reg = prepare_registration(&pp, &policy, password.as_bytes(), &mut rng)?;
    let statement =
        zkppc_core::zkppc::build_statement(&pp, &policy, &reg.claims, &reg.digest)?;

    let ell = statement.witness_len();
    let log_q = pp.params().log_q() as usize;
    let bound_bits = ell * log_q;
    println!("witness length       {ell}");
    println!(
        "per-round floor      {} bits = {} bytes (witness length x {} bits per entry)",
        bound_bits,
        bound_bits.div_ceil(8),
        log_q
    );
    println!(
        "soundness            one cheating round passes with probability 2/3; {} rounds push that below 2^-30",
        rounds_for_soundness(30)
    );
    println!();
    println!("{:<10} {:>12} {:>12} {:>12}", "mode", "resp ch1", "resp ch2", "resp ch3");
    for mode in [WireMode::Standard, WireMode::Seeded, WireMode::Explicit] {
        let report = cost_report(&pp, &policy, &statement, &key, mode)?;
        println!(
            "{:<10} {:>12} {:>12} {:>12}",
            mode_name(mode),
            report.response_bytes[0],
            report.response_bytes[1],
            report.response_bytes[2]
        );
    }

    println!();
    println!(
        "{:<10} {:>8} {:>14} {:>14} {:>12} {:>10}",
        "mode", "rounds", "proof bytes", "total bytes", "per round", "time"
    );
    for mode in [WireMode::Standard, WireMode::Seeded, WireMode::Explicit] {
        let (outcome, _record) = run_loopback_session(&pp, &policy, rounds, mode, &password)?;
        let per_round = outcome.traffic.proof_bytes() as f64 / rounds as f64;
        let ratio = 8.0 * per_round / bound_bits as f64;
        println!(
            "{:<10} {:>8} {:>14} {:>14} {:>9.0} B {:>10.2?}  ({ratio:.3}x floor)",
            mode_name(mode),
            rounds,
            outcome.traffic.proof_bytes(),
            outcome.traffic.total_bytes(),
            per_round,
            outcome.elapsed,
        );
    }
    Ok(())
}

fn mode_name(mode: WireMode) -> &'static str {
    match mode {
        WireMode::Standard => "standard",
        WireMode::Seeded => "seeded",
        WireMode::Explicit => "explicit",
    }
}

fn run_loopback_session(
    pp: &PublicParams,
    policy: &Policy,
    rounds: usize,
    mode: WireMode,
    password: &str,
) -> Result<(zkppc_wire::ClientOutcome, zkppc_wire::SessionRecord), WireError> {
    let server = Server::new(pp.clone(), *policy, rounds)?;
    let (mut client_end, mut server_end) = loopback();
    let handle = std::thread::spawn(move || {
        let mut rng = rand::thread_rng();
        server.serve_connection(&mut server_end, &mut rng)
    });
    let outcome = register(
        &mut client_end,
        policy,
        mode,
        password.as_bytes(),
        &mut rand::thread_rng(),
    )?;
    let record = handle.join().expect("server thread panicked")?;
    Ok((outcome, record))
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::FAILURE
        }
    }
}
