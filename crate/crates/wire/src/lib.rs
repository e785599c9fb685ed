//! Framed registration protocol for zero-knowledge password policy
//! checks: message schema, client and server session drivers, an
//! append-only record store and an in-process loopback transport.
//!
//! One registration session over any byte stream:
//!
//! ```text
//! server -> HELLO        protocol version, round count, parameter
//!                        descriptor, policy string
//! client -> PARAMS_ACK   parameter fingerprint echo, response encoding
//! client -> REGISTER     digest, slot claims
//! client -> COMMITMENTS  one commitment triple per round
//! server -> CHALLENGES   one challenge per round
//! client -> RESPONSES    one response per round
//! server -> RESULT       accept or reject
//! ```
//!
//! Either side may answer with ERROR instead and close. The client
//! checks the policy locally and aborts before its first frame if the
//! password does not comply, so a non-compliant password causes no
//! proof traffic at all. The server sees only public data: digest,
//! claims, commitments and responses. The pre-hash shuffle, the salt
//! and the password itself never enter any frame builder.

use std::fs::{File, OpenOptions};
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::sync::mpsc::{channel, Receiver, Sender};
use std::time::{Duration, Instant, SystemTime};

use rand::Rng;
use thiserror::Error;

use zkppc_core::ktx::{Commitment, StringCommitKey};
use zkppc_core::policy::Policy;
use zkppc_core::pwhash::PublicParams;
use zkppc_core::serial::{write_component, write_u32_le, Reader};
use zkppc_core::stern::{
    challenge_batch, decode_challenge_batch, decode_commitment_batch, decode_response_batch,
    encode_challenge_batch, encode_commitment_batch, encode_response_batch, Prover, WireMode,
    MAX_ROUNDS,
};
use zkppc_core::zkppc::{build_statement, check_window, prepare_registration, SlotClaims};

pub const PROTOCOL_VERSION: u8 = 1;

/// Upper bound on a single frame payload. Far above any honest session
/// at supported parameters; bounds per-frame memory against abuse.
pub const MAX_FRAME_LEN: usize = 1 << 26;

#[derive(Debug, Error)]
pub enum WireError {
    #[error("i/o: {0}")]
    Io(#[from] io::Error),
    #[error(transparent)]
    Core(#[from] zkppc_core::Error),
    #[error("frame of {0} bytes exceeds the size limit")]
    FrameTooLarge(usize),
    #[error("unknown message tag {0}")]
    UnknownTag(u8),
    #[error("malformed {0} message")]
    MalformedMessage(&'static str),
    #[error("out-of-order message: expected {want}, got {got}")]
    OutOfOrder { want: &'static str, got: &'static str },
    #[error("peer reported an error: {0}")]
    Peer(String),
    #[error("server parameters do not match: {0}")]
    ParameterMismatch(&'static str),
    #[error("record store: {0}")]
    Store(String),
}

pub type Result<T> = std::result::Result<T, WireError>;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u8)]
pub enum MsgTag {
    Hello = 1,
    ParamsAck = 2,
    Register = 3,
    Commitments = 4,
    Challenges = 5,
    Responses = 6,
    Result = 7,
    Error = 8,
}

impl MsgTag {
    pub fn from_byte(b: u8) -> Result<Self> {
        Ok(match b {
            1 => Self::Hello,
            2 => Self::ParamsAck,
            3 => Self::Register,
            4 => Self::Commitments,
            5 => Self::Challenges,
            6 => Self::Responses,
            7 => Self::Result,
            8 => Self::Error,
            other => return Err(WireError::UnknownTag(other)),
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Hello => "HELLO",
            Self::ParamsAck => "PARAMS_ACK",
            Self::Register => "REGISTER",
            Self::Commitments => "COMMITMENTS",
            Self::Challenges => "CHALLENGES",
            Self::Responses => "RESPONSES",
            Self::Result => "RESULT",
            Self::Error => "ERROR",
        }
    }
}

/// One protocol message on the wire: tag byte, 32-bit little-endian
/// payload length, payload.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Frame {
    pub tag: MsgTag,
    pub payload: Vec<u8>,
}

impl Frame {
    pub fn new(tag: MsgTag, payload: Vec<u8>) -> Self {
        Self { tag, payload }
    }

    /// Bytes this frame occupies on the wire.
    pub fn wire_len(&self) -> usize {
        5 + self.payload.len()
    }

    pub fn write_to<W: Write + ?Sized>(&self, w: &mut W) -> Result<()> {
        if self.payload.len() > MAX_FRAME_LEN {
            return Err(WireError::FrameTooLarge(self.payload.len()));
        }
        let mut header = [0u8; 5];
        header[0] = self.tag as u8;
        header[1..].copy_from_slice(&(self.payload.len() as u32).to_le_bytes());
        w.write_all(&header)?;
        w.write_all(&self.payload)?;
        w.flush()?;
        Ok(())
    }

    pub fn read_from<R: Read + ?Sized>(r: &mut R) -> Result<Self> {
        let mut header = [0u8; 5];
        r.read_exact(&mut header)?;
        let tag = MsgTag::from_byte(header[0])?;
        let len = u32::from_le_bytes(header[1..].try_into().expect("four bytes")) as usize;
        if len > MAX_FRAME_LEN {
            return Err(WireError::FrameTooLarge(len));
        }
        let mut payload = vec![0u8; len];
        r.read_exact(&mut payload)?;
        Ok(Self { tag, payload })
    }
}

pub fn mode_to_byte(mode: WireMode) -> u8 {
    match mode {
        WireMode::Standard => 0,
        WireMode::Seeded => 1,
        WireMode::Explicit => 2,
    }
}

pub fn mode_from_byte(b: u8) -> Result<WireMode> {
    Ok(match b {
        0 => WireMode::Standard,
        1 => WireMode::Seeded,
        2 => WireMode::Explicit,
        _ => return Err(WireError::MalformedMessage("PARAMS_ACK")),
    })
}

/// Per-frame traffic accounting for one session, in exchange order.
#[derive(Clone, Debug, Default)]
pub struct Traffic {
    pub frames: Vec<(MsgTag, usize)>,
}

impl Traffic {
    fn log(&mut self, frame: &Frame) {
        self.frames.push((frame.tag, frame.wire_len()));
    }

    /// Every byte of the session, headers included.
    pub fn total_bytes(&self) -> usize {
        self.frames.iter().map(|&(_, len)| len).sum()
    }

    /// Bytes spent on the proof itself: commitments, challenges and
    /// responses.
    pub fn proof_bytes(&self) -> usize {
        self.frames
            .iter()
            .filter(|(tag, _)| {
                matches!(tag, MsgTag::Commitments | MsgTag::Challenges | MsgTag::Responses)
            })
            .map(|&(_, len)| len)
            .sum()
    }

    pub fn bytes_for(&self, tag: MsgTag) -> usize {
        self.frames.iter().filter(|&&(t, _)| t == tag).map(|&(_, len)| len).sum()
    }
}

fn send(stream: &mut (impl Write + ?Sized), traffic: &mut Traffic, frame: Frame) -> Result<()> {
    frame.write_to(stream)?;
    traffic.log(&frame);
    Ok(())
}

fn recv(stream: &mut (impl Read + ?Sized), traffic: &mut Traffic) -> Result<Frame> {
    let frame = Frame::read_from(stream)?;
    traffic.log(&frame);
    Ok(frame)
}

/// Receive a frame that must carry `want`; an ERROR frame surfaces the
/// peer's message, anything else is an ordering violation.
fn expect(
    stream: &mut (impl Read + ?Sized),
    traffic: &mut Traffic,
    want: MsgTag,
) -> Result<Vec<u8>> {
    let frame = recv(stream, traffic)?;
    match frame.tag {
        tag if tag == want => Ok(frame.payload),
        MsgTag::Error => Err(WireError::Peer(String::from_utf8_lossy(&frame.payload).into())),
        got => Err(WireError::OutOfOrder { want: want.name(), got: got.name() }),
    }
}

fn hello_payload(pp: &PublicParams, policy: &Policy, rounds: usize) -> Vec<u8> {
    let mut out = vec![PROTOCOL_VERSION];
    write_u32_le(&mut out, rounds as u32);
    write_component(&mut out, &pp.to_bytes());
    write_component(&mut out, policy.to_string().as_bytes());
    out
}

fn parse_hello(payload: &[u8]) -> Result<(PublicParams, Policy, usize)> {
    let mut r = Reader::new(payload);
    let bad = || WireError::MalformedMessage("HELLO");
    let version = r.u8().map_err(|_| bad())?;
    if version != PROTOCOL_VERSION {
        return Err(WireError::ParameterMismatch("unsupported protocol version"));
    }
    let rounds = r.u32_le().map_err(|_| bad())? as usize;
    if rounds == 0 || rounds > MAX_ROUNDS {
        return Err(WireError::ParameterMismatch("round count out of range"));
    }
    let pp = PublicParams::from_bytes(r.component().map_err(|_| bad())?)?;
    let policy_str =
        String::from_utf8(r.component().map_err(|_| bad())?.to_vec()).map_err(|_| bad())?;
    r.finish().map_err(|_| bad())?;
    let policy = Policy::parse(&policy_str)?;
    Ok((pp, policy, rounds))
}

fn register_payload(digest: &Commitment, claims: &SlotClaims) -> Vec<u8> {
    let mut out = Vec::new();
    write_component(&mut out, &digest.to_bytes());
    write_component(&mut out, &claims.to_bytes());
    out
}

fn parse_register(payload: &[u8], pp: &PublicParams, policy: &Policy) -> Result<(Commitment, SlotClaims)> {
    let mut r = Reader::new(payload);
    let bad = || WireError::MalformedMessage("REGISTER");
    let digest_bytes = r.component().map_err(|_| bad())?.to_vec();
    let claims_bytes = r.component().map_err(|_| bad())?.to_vec();
    r.finish().map_err(|_| bad())?;
    let digest = Commitment::from_bytes(&digest_bytes, pp.params().n, pp.params().q)?;
    let claims = SlotClaims::from_bytes(&claims_bytes, policy, pp.n_max())?;
    Ok((digest, claims))
}

/// What the server keeps about one completed session. Holds only
/// public data: the digest and the claims are exactly what came over
/// the wire, and nothing here depends on the password, the pre-hash
/// shuffle or the salt beyond the digest that hides them.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SessionRecord {
    pub created_secs: u64,
    pub fingerprint: [u8; 32],
    pub policy: Policy,
    pub rounds: u32,
    pub mode: WireMode,
    pub digest: Vec<u8>,
    pub claims: Vec<u8>,
    pub verdict: bool,
    /// (tag, wire length) per frame, in exchange order.
    pub frames: Vec<(u8, u32)>,
}

impl SessionRecord {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = vec![1u8];
        out.extend_from_slice(&self.created_secs.to_le_bytes());
        out.extend_from_slice(&self.fingerprint);
        write_component(&mut out, self.policy.to_string().as_bytes());
        write_u32_le(&mut out, self.rounds);
        out.push(mode_to_byte(self.mode));
        write_component(&mut out, &self.digest);
        write_component(&mut out, &self.claims);
        out.push(self.verdict as u8);
        write_u32_le(&mut out, self.frames.len() as u32);
        for &(tag, len) in &self.frames {
            out.push(tag);
            write_u32_le(&mut out, len);
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |m: &'static str| WireError::Store(m.into());
        let mut r = Reader::new(bytes);
        let version = r.u8().map_err(|_| bad("truncated record"))?;
        if version != 1 {
            return Err(bad("unknown record version"));
        }
        let mut secs = [0u8; 8];
        secs.copy_from_slice(r.take(8).map_err(|_| bad("truncated record"))?);
        let created_secs = u64::from_le_bytes(secs);
        let mut fingerprint = [0u8; 32];
        fingerprint.copy_from_slice(r.take(32).map_err(|_| bad("truncated record"))?);
        let policy_str = String::from_utf8(
            r.component().map_err(|_| bad("truncated record"))?.to_vec(),
        )
        .map_err(|_| bad("policy is not utf-8"))?;
        let policy = Policy::parse(&policy_str)?;
        let rounds = r.u32_le().map_err(|_| bad("truncated record"))?;
        let mode = mode_from_byte(r.u8().map_err(|_| bad("truncated record"))?)
            .map_err(|_| bad("unknown encoding mode"))?;
        let digest = r.component().map_err(|_| bad("truncated record"))?.to_vec();
        let claims = r.component().map_err(|_| bad("truncated record"))?.to_vec();
        let verdict = match r.u8().map_err(|_| bad("truncated record"))? {
            0 => false,
            1 => true,
            _ => return Err(bad("verdict byte out of range")),
        };
        let count = r.u32_le().map_err(|_| bad("truncated record"))? as usize;
        if count > 64 {
            return Err(bad("frame log too long"));
        }
        let mut frames = Vec::with_capacity(count);
        for _ in 0..count {
            let tag = r.u8().map_err(|_| bad("truncated record"))?;
            let len = r.u32_le().map_err(|_| bad("truncated record"))?;
            frames.push((tag, len));
        }
        r.finish().map_err(|_| bad("trailing bytes in record"))?;
        Ok(Self {
            created_secs,
            fingerprint,
            policy,
            rounds,
            mode,
            digest,
            claims,
            verdict,
            frames,
        })
    }
}

/// Append-only file of length-prefixed session records.
pub struct RecordStore {
    file: File,
    path: PathBuf,
}

impl RecordStore {
    pub fn open<P: AsRef<Path>>(path: P) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let file = OpenOptions::new().append(true).create(true).open(&path)?;
        Ok(Self { file, path })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// One write call per record, so a record is either fully visible
    /// or absent.
    pub fn append(&mut self, record: &SessionRecord) -> Result<()> {
        let bytes = record.to_bytes();
        let mut out = Vec::with_capacity(4 + bytes.len());
        write_u32_le(&mut out, bytes.len() as u32);
        out.extend_from_slice(&bytes);
        self.file.write_all(&out)?;
        self.file.flush()?;
        Ok(())
    }

    pub fn load<P: AsRef<Path>>(path: P) -> Result<Vec<SessionRecord>> {
        let bytes = std::fs::read(path)?;
        let mut records = Vec::new();
        let mut rest = &bytes[..];
        while !rest.is_empty() {
            if rest.len() < 4 {
                return Err(WireError::Store("truncated record length".into()));
            }
            let len = u32::from_le_bytes(rest[..4].try_into().expect("four bytes")) as usize;
            rest = &rest[4..];
            if rest.len() < len {
                return Err(WireError::Store("truncated record".into()));
            }
            records.push(SessionRecord::from_bytes(&rest[..len])?);
            rest = &rest[len..];
        }
        Ok(records)
    }
}

/// Server side of the registration protocol.
pub struct Server {
    pp: PublicParams,
    policy: Policy,
    rounds: usize,
    key: StringCommitKey,
}

impl Server {
    pub fn new(pp: PublicParams, policy: Policy, rounds: usize) -> Result<Self> {
        check_window(&pp, &policy)?;
        if rounds == 0 || rounds > MAX_ROUNDS {
            return Err(WireError::ParameterMismatch("round count out of range"));
        }
        let key = StringCommitKey::derive(pp.params());
        Ok(Self { pp, policy, rounds, key })
    }

    pub fn params(&self) -> &PublicParams {
        &self.pp
    }

    pub fn policy(&self) -> &Policy {
        &self.policy
    }

    pub fn rounds(&self) -> usize {
        self.rounds
    }

    /// Drive one registration over `stream`. Protocol violations get
    /// an ERROR frame and an error return; a well-formed session that
    /// merely fails verification gets RESULT(reject) and a record with
    /// `verdict = false`.
    pub fn serve_connection<S, R>(&self, stream: &mut S, rng: &mut R) -> Result<SessionRecord>
    where
        S: Read + Write + ?Sized,
        R: Rng + ?Sized,
    {
        let mut traffic = Traffic::default();
        match self.run_session(stream, rng, &mut traffic) {
            Ok(record) => Ok(record),
            Err(err) => {
                // Best effort: the peer may already be gone.
                let msg = err.to_string();
                let _ = send(stream, &mut traffic, Frame::new(MsgTag::Error, msg.into_bytes()));
                Err(err)
            }
        }
    }

    fn run_session<S, R>(
        &self,
        stream: &mut S,
        rng: &mut R,
        traffic: &mut Traffic,
    ) -> Result<SessionRecord>
    where
        S: Read + Write + ?Sized,
        R: Rng + ?Sized,
    {
        send(
            stream,
            traffic,
            Frame::new(MsgTag::Hello, hello_payload(&self.pp, &self.policy, self.rounds)),
        )?;

        let ack = expect(stream, traffic, MsgTag::ParamsAck)?;
        if ack.len() != 33 || ack[..32] != self.pp.fingerprint() {
            return Err(WireError::MalformedMessage("PARAMS_ACK"));
        }
        let mode = mode_from_byte(ack[32])?;

        let register = expect(stream, traffic, MsgTag::Register)?;
        let (digest, claims) = parse_register(&register, &self.pp, &self.policy)?;
        let statement = build_statement(&self.pp, &self.policy, &claims, &digest)?;

        // From here on the registration is well formed; content
        // failures reject rather than error out.
        let commitments = expect(stream, traffic, MsgTag::Commitments)?;
        let verdict = match decode_commitment_batch(
            &commitments,
            self.pp.params().n,
            self.pp.params().q,
        ) {
            Ok(cmts) if cmts.len() == self.rounds => {
                let challenges = challenge_batch(rng, self.rounds);
                send(
                    stream,
                    traffic,
                    Frame::new(MsgTag::Challenges, encode_challenge_batch(&challenges)),
                )?;
                let responses = expect(stream, traffic, MsgTag::Responses)?;
                match decode_response_batch(&responses, &statement, &self.key) {
                    Ok(resps) if resps.len() == self.rounds => zkppc_core::stern::verify_batch(
                        &statement,
                        &self.key,
                        &cmts,
                        &challenges,
                        &resps,
                    )
                    .is_ok(),
                    _ => false,
                }
            }
            _ => false,
        };

        send(stream, traffic, Frame::new(MsgTag::Result, vec![verdict as u8]))?;

        let created_secs = SystemTime::now()
            .duration_since(SystemTime::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        Ok(SessionRecord {
            created_secs,
            fingerprint: self.pp.fingerprint(),
            policy: self.policy,
            rounds: self.rounds as u32,
            mode,
            digest: digest.to_bytes(),
            claims: claims.to_bytes(),
            verdict,
            frames: traffic.frames.iter().map(|&(t, l)| (t as u8, l as u32)).collect(),
        })
    }
}

/// What the client walks away with. `shuffle` and `salt` are the
/// local secrets needed to open the digest later; they never crossed
/// the wire. Deliberately not `Debug`: printing it would be the
/// easiest way to leak those secrets into a log.
pub struct ClientOutcome {
    pub accepted: bool,
    pub rounds: usize,
    pub traffic: Traffic,
    pub elapsed: Duration,
    pub digest: Vec<u8>,
    pub claims: Vec<u8>,
    pub shuffle: Vec<u16>,
    pub salt: Vec<u8>,
}

/// Run the client side of a registration. The password is checked
/// against the server's announced policy locally; on any mismatch the
/// client aborts before sending a single byte.
pub fn register<S, R>(
    stream: &mut S,
    expected_policy: &Policy,
    mode: WireMode,
    password: &[u8],
    rng: &mut R,
) -> Result<ClientOutcome>
where
    S: Read + Write + ?Sized,
    R: Rng + ?Sized,
{
    let start = Instant::now();
    let mut traffic = Traffic::default();

    let hello = expect(stream, &mut traffic, MsgTag::Hello)?;
    let (pp, policy, rounds) = parse_hello(&hello)?;
    if policy != *expected_policy {
        return Err(WireError::ParameterMismatch("announced policy differs from the expected one"));
    }
    check_window(&pp, &policy)?;
    policy.check(password)?;

    let mut ack = pp.fingerprint().to_vec();
    ack.push(mode_to_byte(mode));
    send(stream, &mut traffic, Frame::new(MsgTag::ParamsAck, ack))?;

    let reg = prepare_registration(&pp, &policy, password, rng)?;
    let statement = build_statement(&pp, &policy, &reg.claims, &reg.digest)?;
    let key = StringCommitKey::derive(pp.params());

    send(
        stream,
        &mut traffic,
        Frame::new(MsgTag::Register, register_payload(&reg.digest, &reg.claims)),
    )?;

    let prover = Prover::new(&statement, &key, &reg.witness)?;
    let (mut states, cmts) = prover.commit_batch(rng, rounds)?;
    send(
        stream,
        &mut traffic,
        Frame::new(MsgTag::Commitments, encode_commitment_batch(&cmts)),
    )?;

    let challenge_bytes = expect(stream, &mut traffic, MsgTag::Challenges)?;
    let challenges = decode_challenge_batch(&challenge_bytes)?;
    if challenges.len() != rounds {
        return Err(WireError::MalformedMessage("CHALLENGES"));
    }
    let responses = zkppc_core::stern::respond_batch(&mut states, &challenges)?;
    send(
        stream,
        &mut traffic,
        Frame::new(MsgTag::Responses, encode_response_batch(&responses, &statement, mode)),
    )?;

    let result = expect(stream, &mut traffic, MsgTag::Result)?;
    if result.len() != 1 || result[0] > 1 {
        return Err(WireError::MalformedMessage("RESULT"));
    }

    Ok(ClientOutcome {
        accepted: result[0] == 1,
        rounds,
        traffic,
        elapsed: start.elapsed(),
        digest: reg.digest.to_bytes(),
        claims: reg.claims.to_bytes(),
        shuffle: reg.chi.images().to_vec(),
        salt: zkppc_core::serial::pack_bits(reg.salt.as_bits()),
    })
}

/// Client that holds no witness and guesses each round's challenge,
/// answering honestly when the guess misses and with a doomed forced
/// response when it hits. Expected per-round acceptance is 2/3.
pub fn register_without_witness<S, R>(
    stream: &mut S,
    expected_policy: &Policy,
    digest_bytes: &[u8],
    claims_bytes: &[u8],
    rng: &mut R,
) -> Result<ClientOutcome>
where
    S: Read + Write + ?Sized,
    R: Rng + ?Sized,
{
    let start = Instant::now();
    let mut traffic = Traffic::default();

    let hello = expect(stream, &mut traffic, MsgTag::Hello)?;
    let (pp, policy, rounds) = parse_hello(&hello)?;
    if policy != *expected_policy {
        return Err(WireError::ParameterMismatch("announced policy differs from the expected one"));
    }
    let digest = Commitment::from_bytes(digest_bytes, pp.params().n, pp.params().q)?;
    let claims = SlotClaims::from_bytes(claims_bytes, &policy, pp.n_max())?;
    let statement = build_statement(&pp, &policy, &claims, &digest)?;
    let key = StringCommitKey::derive(pp.params());

    let mut ack = pp.fingerprint().to_vec();
    ack.push(mode_to_byte(WireMode::Standard));
    send(stream, &mut traffic, Frame::new(MsgTag::ParamsAck, ack))?;
    send(
        stream,
        &mut traffic,
        Frame::new(MsgTag::Register, register_payload(&digest, &claims)),
    )?;

    let mut rounds_state = Vec::with_capacity(rounds);
    let mut cmts = Vec::with_capacity(rounds);
    for _ in 0..rounds {
        let predicted = zkppc_core::stern::Challenge::sample(rng);
        let (sim, cmt) = zkppc_core::stern::simulate_round(&statement, &key, predicted, rng)?;
        cmts.push(cmt);
        rounds_state.push(sim);
    }
    send(
        stream,
        &mut traffic,
        Frame::new(MsgTag::Commitments, encode_commitment_batch(&cmts)),
    )?;

    let challenge_bytes = expect(stream, &mut traffic, MsgTag::Challenges)?;
    let challenges = decode_challenge_batch(&challenge_bytes)?;
    if challenges.len() != rounds {
        return Err(WireError::MalformedMessage("CHALLENGES"));
    }
    let mut responses = Vec::with_capacity(rounds);
    for (sim, &ch) in rounds_state.iter_mut().zip(&challenges) {
        responses.push(sim.respond_forced(ch)?);
    }
    send(
        stream,
        &mut traffic,
        Frame::new(
            MsgTag::Responses,
            encode_response_batch(&responses, &statement, WireMode::Standard),
        ),
    )?;

    let result = expect(stream, &mut traffic, MsgTag::Result)?;
    if result.len() != 1 || result[0] > 1 {
        return Err(WireError::MalformedMessage("RESULT"));
    }

    Ok(ClientOutcome {
        accepted: result[0] == 1,
        rounds,
        traffic,
        elapsed: start.elapsed(),
        digest: digest_bytes.to_vec(),
        claims: claims_bytes.to_vec(),
        shuffle: Vec::new(),
        salt: Vec::new(),
    })
}

/// One half of an in-process byte stream. Writes land in the peer's
/// read queue; dropping one half makes the peer's reads return EOF and
/// its writes fail with a broken pipe.
pub struct Loopback {
    tx: Sender<Vec<u8>>,
    rx: Receiver<Vec<u8>>,
    pending: Vec<u8>,
    pos: usize,
}

/// Connected pair of in-process streams with the same contract as a
/// socket.
pub fn loopback() -> (Loopback, Loopback) {
    let (tx_a, rx_a) = channel();
    let (tx_b, rx_b) = channel();
    (
        Loopback { tx: tx_a, rx: rx_b, pending: Vec::new(), pos: 0 },
        Loopback { tx: tx_b, rx: rx_a, pending: Vec::new(), pos: 0 },
    )
}

impl Read for Loopback {
    fn read(&mut self, buf: &mut [u8]) -> io::Result<usize> {
        if self.pos == self.pending.len() {
            match self.rx.recv() {
                Ok(chunk) => {
                    self.pending = chunk;
                    self.pos = 0;
                }
                Err(_) => return Ok(0),
            }
        }
        let n = buf.len().min(self.pending.len() - self.pos);
        buf[..n].copy_from_slice(&self.pending[self.pos..self.pos + n]);
        self.pos += n;
        Ok(n)
    }
}

impl Write for Loopback {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        if buf.is_empty() {
            return Ok(0);
        }
        self.tx
            .send(buf.to_vec())
            .map_err(|_| io::Error::new(io::ErrorKind::BrokenPipe, "peer closed"))?;
        Ok(buf.len())
    }

    fn flush(&mut self) -> io::Result<()> {
        Ok(())
    }
}

/// Byte-counting wrapper that optionally keeps a copy of everything
/// that passed through, for transcript inspection in tests and cost
/// measurement in benchmarks.
pub struct Metered<S> {
    inner: S,
    pub sent: u64,
    pub received: u64,
    pub capture_sent: Vec<u8>,
    pub capture_received: Vec<u8>,
    capture: bool,
}

impl<S> Metered<S> {
    pub fn new(inner: S) -> Self {
        Self {
            inner,
            sent: 0,
            received: 0,
            capture_sent: Vec::new(),
            capture_received: Vec::new(),
            capture: false,
        }
    }

    pub fn capturing(inner: S) -> Self {
        let mut m = Self::new(inner);
        m.capture = true;
        m
    }
}

impl<S: Read> Read for Metered<S> {
    fn read(&mut self, buf: &mut [u8]) -> io::Result<usize> {
        let n = self.inner.read(buf)?;
        self.received += n as u64;
        if self.capture {
            self.capture_received.extend_from_slice(&buf[..n]);
        }
        Ok(n)
    }
}

impl<S: Write> Write for Metered<S> {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        let n = self.inner.write(buf)?;
        self.sent += n as u64;
        if self.capture {
            self.capture_sent.extend_from_slice(&buf[..n]);
        }
        Ok(n)
    }

    fn flush(&mut self) -> io::Result<()> {
        self.inner.flush()
    }
}
