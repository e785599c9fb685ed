//! Zero-knowledge password policy checks over lattice assumptions.
//!
//! A client proves to a server that a committed password satisfies a
//! composition policy (character-class minimums plus a length window)
//! without revealing anything else about it. The pieces:
//!
//! * [`ring`]: mod-q vectors, matrices, permutations, seeded uniform
//!   sampling and linear-system solving.
//! * [`encoding`]: ASCII character classes, 8-bit block encodings and the
//!   block-structured sets the argument system permutes.
//! * [`ktx`]: SIS-style bit and string commitments.
//! * [`pwhash`]: randomized password hashing with a secret position
//!   permutation and commitment randomness as salt.
//! * [`stern`]: a cut-and-choose argument of knowledge for `M*w = v` with
//!   `w` in a permutation-invariant set, with soundness error 2/3 per
//!   round, plus its simulator and extractor.
//! * [`policy`]: policy parsing and evaluation.
//! * [`zkppc`]: the reduction from "hashed password satisfies the policy"
//!   to the abstract relation the argument system proves.

pub mod encoding;
pub mod ktx;
pub mod policy;
pub mod pwhash;
pub mod ring;
pub mod serial;
pub mod stern;
pub mod zkppc;

use thiserror::Error;

/// Crate-wide error type. Variants are grouped by the layer that raises
/// them; everything is `Clone` so protocol drivers can replay failures.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("{what}: expected {expected}, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("value {value} does not fit in {width} bits")]
    ValueTooWide { value: u64, width: u32 },
    #[error("bit vector entry is not 0 or 1")]
    NonBinary,
    #[error("field entry {value} is not reduced mod {q}")]
    NotReduced { value: u16, q: u16 },
    #[error("modulus {q} is not prime")]
    NotPrime { q: u16 },
    #[error("linear system is inconsistent")]
    Inconsistent,
    #[error("index map is not a permutation")]
    InvalidPermutation,
    #[error("character at index {index} (code {code}) is not printable")]
    NonPrintable { index: usize, code: u8 },
    #[error("block {index} decodes to {code}, neither printable nor padding")]
    MalformedBlock { index: usize, code: u8 },
    #[error("cannot parse policy: {0}")]
    PolicyParse(String),
    #[error("policy is infeasible: class minimums exceed the length window")]
    PolicyInfeasible,
    #[error("password length {len} outside [{min}, {max}]")]
    LengthOutOfRange { len: usize, min: usize, max: usize },
    #[error("password is too short: {len} < {min}")]
    TooShort { len: usize, min: usize },
    #[error("password is too long: {len} > {max}")]
    TooLong { len: usize, max: usize },
    #[error("policy needs {need} {class:?} characters, password has {have}")]
    MissingClass { class: encoding::CharClass, need: usize, have: usize },
    #[error("witness rejected: {0}")]
    WitnessInvalid(&'static str),
    #[error("prover state already consumed")]
    StateReused,
    #[error("challenge byte {0} is not 1, 2 or 3")]
    BadChallenge(u8),
    #[error("response does not verify against the commitment")]
    VerifyFailed,
    #[error("extracted witness violates the relation: commitment binding broken")]
    BindingViolation,
    #[error("malformed message: {0}")]
    Malformed(&'static str),
    #[error("slot claims are inconsistent: {0}")]
    ClaimMismatch(&'static str),
}

pub type Result<T> = std::result::Result<T, Error>;
