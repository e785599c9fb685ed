//! Randomized password hashing built for zero-knowledge policy proofs.
//!
//! A password of length t in [n_min, n_max] is encoded as 8-bit blocks,
//! padded to n_max blocks with NUL, and the blocks are shuffled by a
//! secret uniform permutation chi (the pre-salt). The digest commits to
//! the shuffled blocks together with a positional encoding of chi:
//!
//! ```text
//! h = A * (blocks(chi) || shuffle(encode(pw) || padding)) + B * r
//! ```
//!
//! with r a uniform bit salt. Hiding the block positions is what later
//! lets a prover reveal *which shuffled slots* carry each policy class
//! without leaking where those characters sit in the actual password.
//!
//! The digest doubles as an SIS commitment, so the registration protocol
//! can prove statements about (pw, chi, r) without ever sending them.

use rand::Rng;
use sha2::{Digest, Sha256};

use crate::encoding::{encode_password, is_printable, perm_to_blocks, PAD_CHAR};
use crate::ktx::{commit_bits, BitCommitKey, Commitment};
use crate::ring::{ceil_log2, BitVec, Params, Perm};
use crate::serial::Reader;
use crate::{Error, Result};

/// Everything public both protocol ends need: system parameters, the
/// length window, and the expanded commitment key.
#[derive(Clone, Debug)]
pub struct PublicParams {
    params: Params,
    n_min: usize,
    n_max: usize,
    key: BitCommitKey,
}

/// Hard cap on n_max: keeps position blocks small and the key width sane.
pub const MAX_BLOCKS: usize = 64;

impl PublicParams {
    /// Standard-profile setup for a length window.
    pub fn setup(lambda: u32, n_min: usize, n_max: usize, matrix_seed: [u8; 32]) -> Result<Self> {
        Self::with_params(Params::standard(lambda, matrix_seed), n_min, n_max)
    }

    /// Same, over explicit (possibly toy) parameters.
    pub fn with_params(params: Params, n_min: usize, n_max: usize) -> Result<Self> {
        if n_min == 0 || n_min > n_max || n_max > MAX_BLOCKS {
            return Err(Error::LengthOutOfRange { len: n_min, min: 1, max: n_max.min(MAX_BLOCKS) });
        }
        let key = BitCommitKey::derive(&params, input_len(n_max));
        Ok(Self { params, n_min, n_max, key })
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn n_min(&self) -> usize {
        self.n_min
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn key(&self) -> &BitCommitKey {
        &self.key
    }

    /// Bits per position block: ceil(log2 n_max).
    pub fn block_width(&self) -> usize {
        ceil_log2(self.n_max as u16) as usize
    }

    /// Width of the positional prefix e0.
    pub fn position_bits(&self) -> usize {
        self.n_max * self.block_width()
    }

    /// Compact descriptor: everything except the matrices, which are
    /// re-expanded from the seed on load.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(54);
        out.extend_from_slice(b"zkpp");
        out.push(1); // format version
        out.extend_from_slice(&self.params.lambda.to_le_bytes());
        out.extend_from_slice(&(self.params.n as u32).to_le_bytes());
        out.extend_from_slice(&self.params.q.to_le_bytes());
        out.extend_from_slice(&(self.params.m as u32).to_le_bytes());
        out.extend_from_slice(&(self.n_min as u16).to_le_bytes());
        out.extend_from_slice(&(self.n_max as u16).to_le_bytes());
        out.extend_from_slice(&self.params.matrix_seed);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        if r.take(4)? != b"zkpp" || r.u8()? != 1 {
            return Err(Error::Malformed("parameter header"));
        }
        let lambda = r.u32_le()?;
        let n = r.u32_le()? as usize;
        let q = r.u16_le()?;
        let m = r.u32_le()? as usize;
        let n_min = r.u16_le()? as usize;
        let n_max = r.u16_le()? as usize;
        let mut matrix_seed = [0u8; 32];
        matrix_seed.copy_from_slice(r.take(32)?);
        r.finish()?;
        Self::with_params(Params::new(lambda, n, q, m, matrix_seed)?, n_min, n_max)
    }

    /// SHA-256 of the descriptor; both ends compare this before proving.
    pub fn fingerprint(&self) -> [u8; 32] {
        Sha256::digest(self.to_bytes()).into()
    }
}

/// Commitment key input width for a given block count.
pub fn input_len(n_max: usize) -> usize {
    n_max * ceil_log2(n_max as u16) as usize + 8 * n_max
}

/// Secret position permutation, uniform over all n_max! shuffles.
pub fn pre_salt<R: Rng + ?Sized>(pp: &PublicParams, rng: &mut R) -> Perm {
    Perm::random(pp.n_max, rng)
}

/// Encode, pad to n_max blocks, and shuffle block positions by chi.
pub fn pre_hash(pp: &PublicParams, pw: &[u8], chi: &Perm) -> Result<BitVec> {
    if pw.len() < pp.n_min || pw.len() > pp.n_max {
        return Err(Error::LengthOutOfRange { len: pw.len(), min: pp.n_min, max: pp.n_max });
    }
    if chi.len() != pp.n_max {
        return Err(Error::Dimension { what: "pre-salt width", expected: pp.n_max, got: chi.len() });
    }
    let mut bits = encode_password(pw)?.as_bits().to_vec();
    bits.resize(8 * pp.n_max, 0); // NUL blocks after the content
    let padded = BitVec::from_bits(bits)?;
    crate::encoding::apply_block_perm(chi, &padded, 8)
}

/// Uniform bit salt for the commitment.
pub fn salt<R: Rng + ?Sized>(pp: &PublicParams, rng: &mut R) -> BitVec {
    BitVec::random(pp.params.m, rng)
}

/// Commit to the shuffled blocks and the positional encoding of chi.
pub fn hash(pp: &PublicParams, pre_hashed: &BitVec, chi: &Perm, r: &BitVec) -> Result<Commitment> {
    if chi.len() != pp.n_max {
        return Err(Error::Dimension { what: "pre-salt width", expected: pp.n_max, got: chi.len() });
    }
    let e0 = perm_to_blocks(chi);
    let x = BitVec::concat(&[&e0, pre_hashed]);
    commit_bits(pp.key(), &x, r)
}

/// Undo the shuffle and strip padding; the diagnostic inverse of
/// [`pre_hash`]. Blocks must decode to printable characters or padding.
pub fn invert_pre_hash(pp: &PublicParams, pre_hashed: &BitVec, chi: &Perm) -> Result<Vec<u8>> {
    if chi.len() != pp.n_max {
        return Err(Error::Dimension { what: "pre-salt width", expected: pp.n_max, got: chi.len() });
    }
    let unshuffled = crate::encoding::apply_block_perm(&chi.inverse(), pre_hashed, 8)?;
    let mut pw = Vec::new();
    for (index, block) in unshuffled.as_bits().chunks_exact(8).enumerate() {
        let code = crate::encoding::decode_char(block)?;
        if is_printable(code) {
            pw.push(code);
        } else if code != PAD_CHAR {
            return Err(Error::MalformedBlock { index, code });
        }
    }
    Ok(pw)
}
