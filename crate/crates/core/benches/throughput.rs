//! Throughput of the arithmetic core at deployment scale.
//!
//! The `mat_vec` group pits the rayon row split against the
//! single-threaded loop head to head in one run. The round-level
//! groups exercise whichever path the crate was compiled with, so run
//! once as-is and once with `--no-default-features` to compare whole
//! protocol steps:
//!
//!   cargo bench -p zkppc-core
//!   cargo bench -p zkppc-core --no-default-features

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use zkppc_core::ktx::StringCommitKey;
use zkppc_core::policy::Policy;
use zkppc_core::pwhash::PublicParams;
use zkppc_core::ring::{BitVec, FieldMatrix};
use zkppc_core::stern::{verify_round, Challenge, Prover};
use zkppc_core::zkppc::{build_statement, prepare_registration};

fn deployment() -> (PublicParams, Policy) {
    let pp = PublicParams::setup(128, 8, 16, [41; 32]).unwrap();
    let policy = Policy::new(1, 1, 1, 1, 8, 16).unwrap();
    (pp, policy)
}

fn path_label() -> &'static str {
    if cfg!(feature = "parallel") {
        "parallel"
    } else {
        "serial"
    }
}

/// M * x at the statement's true shape, 256 x 14192 mod 1021.
fn bench_mat_vec(c: &mut Criterion) {
    let mut rng = ChaCha20Rng::seed_from_u64(1);
    let rows = 256;
    let cols = 14_192;
    let entries: Vec<u16> = (0..rows * cols).map(|_| rng.gen_range(0..1021)).collect();
    let matrix = FieldMatrix::from_entries(rows, cols, 1021, entries).unwrap();
    let x = BitVec::random(cols, &mut rng);
    let bits = x.as_bits().to_vec();

    let mut group = c.benchmark_group("mat_vec");
    group.throughput(Throughput::Elements((rows * cols) as u64));
    group.bench_function(BenchmarkId::new("dispatch", path_label()), |b| {
        b.iter(|| matrix.mul_vec(&bits[..]).unwrap())
    });
    group.bench_function("serial_direct", |b| {
        b.iter(|| matrix.mul_vec_serial(&bits[..]).unwrap())
    });
    group.finish();
}

/// One full commitment round: sample masks, shuffle, commit three
/// times. This is the client's dominant cost per round.
fn bench_commit_round(c: &mut Criterion) {
    let (pp, policy) = deployment();
    let mut rng = ChaCha20Rng::seed_from_u64(2);
    let reg = prepare_registration(&pp, &policy, b"Tr0ub4dor&3x", &mut rng).unwrap();
    let statement = build_statement(&pp, &policy, &reg.claims, &reg.digest).unwrap();
    let key = StringCommitKey::derive(pp.params());
    let prover = Prover::new(&statement, &key, &reg.witness).unwrap();

    let mut group = c.benchmark_group("round");
    group.sample_size(20);
    group.bench_function(BenchmarkId::new("commit", path_label()), |b| {
        b.iter(|| prover.commit_round(&mut rng).unwrap())
    });

    // Verification of each challenge, the server's per-round cost.
    for ch in Challenge::ALL {
        let (state, cmt) = prover.commit_round(&mut rng).unwrap();
        let [r1, r2, r3] = state.open_all().unwrap();
        let resp = match ch {
            Challenge::One => r1,
            Challenge::Two => r2,
            Challenge::Three => r3,
        };
        group.bench_function(
            BenchmarkId::new(format!("verify_ch{}", ch.as_byte()), path_label()),
            |b| b.iter(|| verify_round(&statement, &key, &cmt, ch, &resp).unwrap()),
        );
    }
    group.finish();
}

/// The hash the client computes once at registration.
fn bench_hash(c: &mut Criterion) {
    let (pp, _) = deployment();
    let mut rng = ChaCha20Rng::seed_from_u64(3);
    let chi = zkppc_core::pwhash::pre_salt(&pp, &mut rng);
    let r = zkppc_core::pwhash::salt(&pp, &mut rng);
    let shuffled = zkppc_core::pwhash::pre_hash(&pp, b"Tr0ub4dor&3x", &chi).unwrap();

    let mut group = c.benchmark_group("pwhash");
    group.bench_function(BenchmarkId::new("hash", path_label()), |b| {
        b.iter(|| zkppc_core::pwhash::hash(&pp, &shuffled, &chi, &r).unwrap())
    });
    group.finish();
}

criterion_group!(benches, bench_mat_vec, bench_commit_round, bench_hash);
criterion_main!(benches);
