//! SIS-style commitments: c = A*x + B*r mod q with binary input x and
//! binary randomness r.
//!
//! Binding reduces to finding a short solution of a random inhomogeneous
//! lattice system; hiding is statistical once r carries
//! 2 * n * ceil(log2 q) bits. Two key shapes are used: a bit commitment
//! for fixed-width inputs (password hashing) and a string commitment
//! that first digests an arbitrary byte message down to 256 bits (the
//! argument system's random-looking commitments).

use sha2::{Digest, Sha256};

use crate::ring::{mat_vec_mul_add, sample_uniform_matrix, BitVec, FieldMatrix, FieldVec, Params};
use crate::serial::{write_u16_slice_le, Reader};
use crate::{Error, Result};

/// Digest width of the string commitment's input stage.
pub const STRING_INPUT_BITS: usize = 256;

/// Key for committing to a fixed-width bit vector.
#[derive(Clone, Debug)]
pub struct BitCommitKey {
    a: FieldMatrix,
    b: FieldMatrix,
}

impl BitCommitKey {
    /// Expand the key for t-bit inputs from the parameter seed. The two
    /// domain tags keep the input and randomness matrices independent.
    pub fn derive(params: &Params, t: usize) -> Self {
        let a = sample_uniform_matrix(&params.matrix_seed, "ktx-A", params.n, t, params.q);
        let b = sample_uniform_matrix(&params.matrix_seed, "ktx-B", params.n, params.m, params.q);
        Self { a, b }
    }

    pub fn input_len(&self) -> usize {
        self.a.cols()
    }

    pub fn rand_len(&self) -> usize {
        self.b.cols()
    }

    pub fn matrices(&self) -> (&FieldMatrix, &FieldMatrix) {
        (&self.a, &self.b)
    }
}

/// Key for committing to arbitrary byte strings.
#[derive(Clone, Debug)]
pub struct StringCommitKey {
    a: FieldMatrix,
    b: FieldMatrix,
}

impl StringCommitKey {
    pub fn derive(params: &Params) -> Self {
        let a = sample_uniform_matrix(&params.matrix_seed, "com-A", params.n, STRING_INPUT_BITS, params.q);
        let b = sample_uniform_matrix(&params.matrix_seed, "com-B", params.n, params.m, params.q);
        Self { a, b }
    }

    pub fn rand_len(&self) -> usize {
        self.b.cols()
    }

    pub fn output_len(&self) -> usize {
        self.a.rows()
    }

    pub fn q(&self) -> u16 {
        self.a.q()
    }
}

/// A commitment value in Z_q^n.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Commitment(FieldVec);

impl Commitment {
    pub fn value(&self) -> &FieldVec {
        &self.0
    }

    pub fn from_value(v: FieldVec) -> Self {
        Self(v)
    }

    /// n little-endian 16-bit values.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.0.len() * 2);
        write_u16_slice_le(&mut out, self.0.as_entries());
        out
    }

    pub fn from_bytes(bytes: &[u8], n: usize, q: u16) -> Result<Self> {
        let mut r = Reader::new(bytes);
        let entries = r.u16_slice_le(n)?;
        r.finish()?;
        Ok(Self(FieldVec::from_entries(entries, q)?))
    }
}

/// c = A*x + B*r mod q for a t-bit input.
pub fn commit_bits(key: &BitCommitKey, x: &BitVec, r: &BitVec) -> Result<Commitment> {
    if x.len() != key.input_len() {
        return Err(Error::Dimension { what: "commit input", expected: key.input_len(), got: x.len() });
    }
    if r.len() != key.rand_len() {
        return Err(Error::Dimension { what: "commit randomness", expected: key.rand_len(), got: r.len() });
    }
    Ok(Commitment(mat_vec_mul_add(&key.a, x.as_bits(), &key.b, r.as_bits())?))
}

/// Does (x, r) open c?
pub fn open_bits(key: &BitCommitKey, c: &Commitment, x: &BitVec, r: &BitVec) -> bool {
    commit_bits(key, x, r).is_ok_and(|recomputed| recomputed == *c)
}

/// SHA-256 digest bits of the message, MSB first within each byte.
fn digest_bits(msg: &[u8]) -> BitVec {
    let digest = Sha256::digest(msg);
    let mut bits = Vec::with_capacity(STRING_INPUT_BITS);
    for byte in digest {
        for k in 0..8 {
            bits.push((byte >> (7 - k)) & 1);
        }
    }
    BitVec::from_bits(bits).expect("digest bits are binary")
}

/// c = A*H(msg) + B*r mod q: commit to an arbitrary byte string by
/// digesting it to 256 bits first.
pub fn commit_string(key: &StringCommitKey, msg: &[u8], r: &BitVec) -> Result<Commitment> {
    if r.len() != key.rand_len() {
        return Err(Error::Dimension { what: "commit randomness", expected: key.rand_len(), got: r.len() });
    }
    let d = digest_bits(msg);
    Ok(Commitment(mat_vec_mul_add(&key.a, d.as_bits(), &key.b, r.as_bits())?))
}

/// Does (msg, r) open c?
pub fn open_string(key: &StringCommitKey, c: &Commitment, msg: &[u8], r: &BitVec) -> bool {
    commit_string(key, msg, r).is_ok_and(|recomputed| recomputed == *c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ring::add_mod;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;
    use std::collections::HashMap;

    fn toy() -> Params {
        Params::new(8, 4, 17, 16, [11; 32]).unwrap()
    }

    #[test]
    fn commitment_is_the_matrix_product() {
        let params = toy();
        let key = BitCommitKey::derive(&params, 8);
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        for _ in 0..100 {
            let x = BitVec::random(8, &mut rng);
            let r = BitVec::random(16, &mut rng);
            let c = commit_bits(&key, &x, &r).unwrap();
            let (a, b) = key.matrices();
            let manual = add_mod(
                &a.mul_vec(x.as_bits()).unwrap(),
                &b.mul_vec(r.as_bits()).unwrap(),
                params.q,
            )
            .unwrap();
            assert_eq!(c.value(), &manual);
            assert!(open_bits(&key, &c, &x, &r));
        }
        assert!(commit_bits(&key, &BitVec::zeros(7), &BitVec::zeros(16)).is_err());
        assert!(commit_bits(&key, &BitVec::zeros(8), &BitVec::zeros(15)).is_err());
    }

    #[test]
    fn serialization_round_trips() {
        let params = toy();
        let key = BitCommitKey::derive(&params, 8);
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let c = commit_bits(&key, &BitVec::random(8, &mut rng), &BitVec::random(16, &mut rng)).unwrap();
        let bytes = c.to_bytes();
        assert_eq!(bytes.len(), 2 * params.n);
        assert_eq!(Commitment::from_bytes(&bytes, params.n, params.q).unwrap(), c);
        assert!(Commitment::from_bytes(&bytes[1..], params.n, params.q).is_err());
    }

    #[test]
    fn no_binding_collision_in_random_search() {
        // 10^5 random (x, r) pairs, no two distinct inputs committing to
        // the same value. n = 8, q = 31 keeps the output space (31^8)
        // large enough that a birthday collision is not expected; smaller
        // toy shapes collide by pigeonhole alone.
        let params = Params::new(8, 8, 31, 16, [11; 32]).unwrap();
        let key = BitCommitKey::derive(&params, 8);
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let mut seen: HashMap<Vec<u8>, Vec<u8>> = HashMap::new();
        for _ in 0..100_000 {
            let x = BitVec::random(8, &mut rng);
            let r = BitVec::random(16, &mut rng);
            let c = commit_bits(&key, &x, &r).unwrap().to_bytes();
            if let Some(prev) = seen.get(&c) {
                assert_eq!(prev, &x.as_bits().to_vec(), "binding collision");
            } else {
                seen.insert(c, x.as_bits().to_vec());
            }
        }
    }

    #[test]
    #[allow(clippy::needless_range_loop)]
    fn commitments_hide_the_input() {
        // Two fixed inputs; over fresh randomness every output coordinate
        // has statistically matching histograms (4 sigma, 10^5 samples).
        // Randomness length follows the hiding bound 2 * n * ceil(log2 q).
        let params = Params::new(8, 4, 17, crate::ring::hiding_rand_bits(4, 17), [11; 32]).unwrap();
        let key = BitCommitKey::derive(&params, 8);
        let x0 = BitVec::zeros(8);
        let x1 = BitVec::ones(8);
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let n = 100_000usize;
        let mut counts = [[[0u32; 17]; 4]; 2];
        for (which, x) in [&x0, &x1].into_iter().enumerate() {
            for _ in 0..n {
                let r = BitVec::random(params.m, &mut rng);
                let c = commit_bits(&key, x, &r).unwrap();
                for (coord, &e) in c.value().as_entries().iter().enumerate() {
                    counts[which][coord][e as usize] += 1;
                }
            }
        }
        for coord in 0..4 {
            for residue in 0..17 {
                let a = counts[0][coord][residue] as f64;
                let b = counts[1][coord][residue] as f64;
                let pooled = (a + b) / (2.0 * n as f64);
                let sigma = (2.0 * n as f64 * pooled * (1.0 - pooled)).sqrt().max(1.0);
                assert!(
                    (a - b).abs() <= 4.0 * sigma,
                    "coordinate {coord} residue {residue}: {a} vs {b}"
                );
            }
        }
    }

    #[test]
    fn string_commitments_bind_the_message_bytes() {
        let params = toy();
        let key = StringCommitKey::derive(&params);
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let r = BitVec::random(16, &mut rng);
        let c = commit_string(&key, b"first message", &r).unwrap();
        assert_eq!(commit_string(&key, b"first message", &r).unwrap(), c);
        assert!(open_string(&key, &c, b"first message", &r));
        assert!(!open_string(&key, &c, b"second message", &r));
        let mut r_flip = r.as_bits().to_vec();
        r_flip[0] ^= 1;
        assert!(!open_string(&key, &c, b"first message", &BitVec::from_bits(r_flip).unwrap()));
    }

    #[test]
    fn digest_bits_are_msb_first() {
        // SHA-256 of the empty string starts 0xe3 = 1110 0011.
        let bits = digest_bits(b"");
        assert_eq!(&bits.as_bits()[..8], &[1, 1, 1, 0, 0, 0, 1, 1]);
        assert_eq!(bits.len(), 256);
    }

    #[test]
    fn keys_from_different_tags_differ() {
        let params = toy();
        let bit_key = BitCommitKey::derive(&params, 16);
        let (a, b) = bit_key.matrices();
        assert_ne!(a.row(0), &b.row(0)[..16]);
        let string_key = StringCommitKey::derive(&params);
        assert_ne!(&string_key.a.row(0)[..16], a.row(0));
    }
}
