//! Three-move cut-and-choose argument for linear relations with
//! structured binary witnesses.
//!
//! The prover knows w in {0,1}^l with M*w = v over Z_q, where w is
//! additionally drawn from a public validity set described segment by
//! segment (a permutation code, class arrangements, balanced runs). A
//! round commits to a shuffle of w under a random mask, the verifier
//! picks one of three challenges, and the response opens exactly two of
//! the three commitments:
//!
//! * challenge 1 checks the shuffled witness is in the validity set,
//! * challenge 2 checks the masked witness satisfies the equation,
//! * challenge 3 checks the mask itself was formed honestly.
//!
//! Each round leaks nothing about w (any single challenge can be
//! simulated) and catches a cheating prover with probability 1/3, so
//! kappa independent rounds give soundness error (2/3)^kappa.
//!
//! Everything here is pure computation; transports live elsewhere. The
//! wire encodings offer three sizes: `Explicit` (full 16-bit entries,
//! index-array shuffles), `Standard` (bit-packed vectors, 32-byte seeds
//! for shuffles and commitment randomness), and `Seeded` (`Standard`
//! plus a seeded mask in challenge-3 responses).

use rand::Rng;

use crate::encoding::{blocks_to_perm, encode_char, is_balanced, is_class_set, perm_to_blocks, CharClass};
use crate::ktx::{commit_string, open_string, Commitment, StringCommitKey};
use crate::ring::{
    add_mod, ceil_log2, expand_bits, expand_field_vec, solve_linear, sub_mod, BitVec, ByteStream,
    FieldMatrix, FieldVec, Perm,
};
use crate::serial::{pack_bits, pack_uints, unpack_bits, unpack_uints, write_component, write_u16_slice_le, Reader};
use crate::{Error, Result};

const PERM_TAG: &str = "stern-perm";
const MASK_TAG: &str = "stern-mask";
const RHO_TAG: &str = "stern-rho";

/// Ceiling of bits/8.
fn byte_len(bits: usize) -> usize {
    bits.div_ceil(8)
}

/// One contiguous run of witness bits with its own validity rule and
/// shuffle group. The group always permutes whole blocks, so it acts as
/// a coordinate permutation on Z_q^l and commutes with vector addition.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Segment {
    /// `items` blocks of ceil(log2 items) bits, decoding to a bijection.
    /// Shuffled by reordering the blocks.
    PermutationCode { items: usize },
    /// One 8-bit block per member of a character class; valid iff the
    /// blocks are exactly the class alphabet in some order.
    ClassArrangement { class: CharClass },
    /// `2 * half_len` single-bit blocks with exactly `half_len` ones.
    Balanced { half_len: usize },
}

impl Segment {
    pub fn block_count(&self) -> usize {
        match self {
            Segment::PermutationCode { items } => *items,
            Segment::ClassArrangement { class } => class.size(),
            Segment::Balanced { half_len } => 2 * half_len,
        }
    }

    pub fn block_width(&self) -> usize {
        match self {
            Segment::PermutationCode { items } => ceil_log2(*items as u16) as usize,
            Segment::ClassArrangement { .. } => 8,
            Segment::Balanced { .. } => 1,
        }
    }

    pub fn bit_len(&self) -> usize {
        self.block_count() * self.block_width()
    }

    pub fn contains(&self, bits: &BitVec) -> bool {
        match self {
            Segment::PermutationCode { items } => blocks_to_perm(bits, *items).is_ok(),
            Segment::ClassArrangement { class } => is_class_set(bits, *class).unwrap_or(false),
            Segment::Balanced { half_len } => is_balanced(bits, *half_len).unwrap_or(false),
        }
    }

    pub fn sample_member<R: Rng + ?Sized>(&self, rng: &mut R) -> BitVec {
        let base = match self {
            Segment::PermutationCode { items } => {
                return perm_to_blocks(&Perm::random(*items, rng));
            }
            Segment::ClassArrangement { class } => {
                let encoded: Vec<BitVec> = class.members().iter().map(|&c| encode_char(c)).collect();
                let refs: Vec<&BitVec> = encoded.iter().collect();
                BitVec::concat(&refs)
            }
            Segment::Balanced { half_len } => {
                BitVec::concat(&[&BitVec::ones(*half_len), &BitVec::zeros(*half_len)])
            }
        };
        let shuffled = Perm::random(self.block_count(), rng)
            .apply_blocks(base.as_bits(), self.block_width())
            .expect("segment geometry is internally consistent");
        BitVec::from_bits(shuffled).expect("shuffle preserves bits")
    }
}

/// The whole validity set: a concatenation of segments.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ValidityProfile {
    segments: Vec<Segment>,
}

impl ValidityProfile {
    pub fn new(segments: Vec<Segment>) -> Result<Self> {
        if segments.is_empty() {
            return Err(Error::Malformed("empty validity profile"));
        }
        for seg in &segments {
            match seg {
                Segment::PermutationCode { items } => {
                    if *items == 0 || *items > u16::MAX as usize {
                        return Err(Error::Malformed("permutation code size"));
                    }
                }
                Segment::ClassArrangement { class } => {
                    if class.size() == 0 {
                        return Err(Error::Malformed("empty character class"));
                    }
                }
                Segment::Balanced { half_len } => {
                    if *half_len == 0 {
                        return Err(Error::Malformed("empty balanced segment"));
                    }
                }
            }
        }
        Ok(Self { segments })
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn bit_len(&self) -> usize {
        self.segments.iter().map(Segment::bit_len).sum()
    }

    pub fn contains(&self, w: &BitVec) -> bool {
        if w.len() != self.bit_len() {
            return false;
        }
        let mut off = 0;
        for seg in &self.segments {
            let part = w.slice(off, off + seg.bit_len());
            if !seg.contains(&part) {
                return false;
            }
            off += seg.bit_len();
        }
        true
    }

    pub fn sample_member<R: Rng + ?Sized>(&self, rng: &mut R) -> BitVec {
        let parts: Vec<BitVec> = self.segments.iter().map(|s| s.sample_member(rng)).collect();
        let refs: Vec<&BitVec> = parts.iter().collect();
        BitVec::concat(&refs)
    }

    pub fn sample_shuffle<R: Rng + ?Sized>(&self, rng: &mut R) -> ShuffleElement {
        ShuffleElement {
            factors: self.segments.iter().map(|s| Perm::random(s.block_count(), rng)).collect(),
        }
    }

    pub fn shuffle_from_seed(&self, seed: &[u8; 32]) -> ShuffleElement {
        let mut stream = ByteStream::new(seed, PERM_TAG);
        ShuffleElement {
            factors: self
                .segments
                .iter()
                .map(|s| Perm::from_stream(&mut stream, s.block_count()))
                .collect(),
        }
    }
}

/// One element of the shuffle group: a block permutation per segment.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ShuffleElement {
    factors: Vec<Perm>,
}

impl ShuffleElement {
    pub fn from_factors(profile: &ValidityProfile, factors: Vec<Perm>) -> Result<Self> {
        let elem = Self { factors };
        if !elem.matches(profile) {
            return Err(Error::Dimension {
                what: "shuffle factors",
                expected: profile.segments().len(),
                got: elem.factors.len(),
            });
        }
        Ok(elem)
    }

    pub fn factors(&self) -> &[Perm] {
        &self.factors
    }

    pub fn matches(&self, profile: &ValidityProfile) -> bool {
        self.factors.len() == profile.segments().len()
            && self
                .factors
                .iter()
                .zip(profile.segments())
                .all(|(f, s)| f.len() == s.block_count())
    }

    pub fn inverse(&self) -> ShuffleElement {
        ShuffleElement { factors: self.factors.iter().map(Perm::inverse).collect() }
    }

    fn apply_slices<T: Copy>(&self, profile: &ValidityProfile, data: &[T]) -> Result<Vec<T>> {
        if !self.matches(profile) {
            return Err(Error::InvalidPermutation);
        }
        if data.len() != profile.bit_len() {
            return Err(Error::Dimension {
                what: "shuffle input",
                expected: profile.bit_len(),
                got: data.len(),
            });
        }
        let mut out = Vec::with_capacity(data.len());
        let mut off = 0;
        for (factor, seg) in self.factors.iter().zip(profile.segments()) {
            let len = seg.bit_len();
            out.extend(factor.apply_blocks(&data[off..off + len], seg.block_width())?);
            off += len;
        }
        Ok(out)
    }

    pub fn apply_bits(&self, profile: &ValidityProfile, w: &BitVec) -> Result<BitVec> {
        BitVec::from_bits(self.apply_slices(profile, w.as_bits())?)
    }

    pub fn apply_field(&self, profile: &ValidityProfile, v: &FieldVec) -> Result<FieldVec> {
        Ok(FieldVec::from_reduced(self.apply_slices(profile, v.as_entries())?))
    }
}

/// Public instance: matrix, target vector, and the validity set.
#[derive(Clone, Debug)]
pub struct Statement {
    matrix: FieldMatrix,
    target: FieldVec,
    profile: ValidityProfile,
}

impl Statement {
    pub fn new(matrix: FieldMatrix, target: FieldVec, profile: ValidityProfile) -> Result<Self> {
        if matrix.cols() != profile.bit_len() {
            return Err(Error::Dimension {
                what: "statement columns",
                expected: profile.bit_len(),
                got: matrix.cols(),
            });
        }
        if target.len() != matrix.rows() {
            return Err(Error::Dimension {
                what: "statement target",
                expected: matrix.rows(),
                got: target.len(),
            });
        }
        if let Some(&e) = target.as_entries().iter().find(|&&e| e >= matrix.q()) {
            return Err(Error::NotReduced { value: e, q: matrix.q() });
        }
        Ok(Self { matrix, target, profile })
    }

    pub fn matrix(&self) -> &FieldMatrix {
        &self.matrix
    }

    pub fn target(&self) -> &FieldVec {
        &self.target
    }

    pub fn profile(&self) -> &ValidityProfile {
        &self.profile
    }

    pub fn q(&self) -> u16 {
        self.matrix.q()
    }

    pub fn witness_len(&self) -> usize {
        self.matrix.cols()
    }

    /// Membership plus the linear equation.
    pub fn check_witness(&self, w: &BitVec) -> Result<()> {
        if w.len() != self.witness_len() {
            return Err(Error::Dimension {
                what: "witness length",
                expected: self.witness_len(),
                got: w.len(),
            });
        }
        if !self.profile.contains(w) {
            return Err(Error::WitnessInvalid("outside the validity set"));
        }
        if self.matrix.mul_vec(w.as_bits())? != self.target {
            return Err(Error::WitnessInvalid("linear equation does not hold"));
        }
        Ok(())
    }
}

/// Verifier challenge for one round.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Challenge {
    One,
    Two,
    Three,
}

impl Challenge {
    pub const ALL: [Challenge; 3] = [Challenge::One, Challenge::Two, Challenge::Three];

    pub fn as_byte(self) -> u8 {
        match self {
            Challenge::One => 1,
            Challenge::Two => 2,
            Challenge::Three => 3,
        }
    }

    pub fn from_byte(b: u8) -> Result<Self> {
        match b {
            1 => Ok(Challenge::One),
            2 => Ok(Challenge::Two),
            3 => Ok(Challenge::Three),
            other => Err(Error::BadChallenge(other)),
        }
    }

    pub fn sample<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Self::ALL[rng.gen_range(0..3)]
    }
}

/// A value plus, optionally, the 32-byte seed it was expanded from.
/// Seeds ride along so wire encodings can send 32 bytes instead of the
/// expanded object; the seed never changes what `value` contains.
#[derive(Clone, Debug)]
pub struct Seeded<T> {
    value: T,
    seed: Option<[u8; 32]>,
}

impl<T> Seeded<T> {
    pub fn explicit(value: T) -> Self {
        Self { value, seed: None }
    }

    pub fn from_seed(seed: [u8; 32], value: T) -> Self {
        Self { value, seed: Some(seed) }
    }

    pub fn value(&self) -> &T {
        &self.value
    }

    pub fn seed(&self) -> Option<&[u8; 32]> {
        self.seed.as_ref()
    }
}

fn expand_shuffle(profile: &ValidityProfile, seed: [u8; 32]) -> Seeded<ShuffleElement> {
    Seeded::from_seed(seed, profile.shuffle_from_seed(&seed))
}

fn expand_mask(len: usize, q: u16, seed: [u8; 32]) -> Seeded<FieldVec> {
    Seeded::from_seed(seed, expand_field_vec(&seed, MASK_TAG, len, q))
}

fn expand_rho(len: usize, seed: [u8; 32]) -> Seeded<BitVec> {
    Seeded::from_seed(seed, expand_bits(&seed, RHO_TAG, len))
}

/// The three commitments opening a round.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RoundCommitments {
    pub c1: Commitment,
    pub c2: Commitment,
    pub c3: Commitment,
}

impl RoundCommitments {
    pub fn byte_len(n: usize) -> usize {
        6 * n
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = self.c1.to_bytes();
        out.extend(self.c2.to_bytes());
        out.extend(self.c3.to_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8], n: usize, q: u16) -> Result<Self> {
        if bytes.len() != Self::byte_len(n) {
            return Err(Error::Malformed("commitment batch entry size"));
        }
        Ok(Self {
            c1: Commitment::from_bytes(&bytes[..2 * n], n, q)?,
            c2: Commitment::from_bytes(&bytes[2 * n..4 * n], n, q)?,
            c3: Commitment::from_bytes(&bytes[4 * n..], n, q)?,
        })
    }
}

/// Response to one challenge. Variant names follow what they disclose.
#[derive(Clone, Debug)]
pub enum Response {
    /// Challenge 1: the shuffled witness and shuffled mask.
    Reveal {
        witness_image: BitVec,
        mask_image: FieldVec,
        rho2: Seeded<BitVec>,
        rho3: Seeded<BitVec>,
    },
    /// Challenge 2: the shuffle and the mask-shifted witness.
    Shifted {
        shuffle: Seeded<ShuffleElement>,
        sum: FieldVec,
        rho1: Seeded<BitVec>,
        rho3: Seeded<BitVec>,
    },
    /// Challenge 3: the shuffle and the bare mask.
    Masked {
        shuffle: Seeded<ShuffleElement>,
        mask: Seeded<FieldVec>,
        rho1: Seeded<BitVec>,
        rho2: Seeded<BitVec>,
    },
}

impl Response {
    pub fn challenge(&self) -> Challenge {
        match self {
            Response::Reveal { .. } => Challenge::One,
            Response::Shifted { .. } => Challenge::Two,
            Response::Masked { .. } => Challenge::Three,
        }
    }
}

fn shuffle_message_bytes(shuffle: &ShuffleElement) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(&(shuffle.factors().len() as u32).to_le_bytes());
    for factor in shuffle.factors() {
        out.extend_from_slice(&(factor.len() as u32).to_le_bytes());
        write_u16_slice_le(&mut out, factor.images());
    }
    out
}

/// Canonical first-commitment message: the shuffle and a field vector.
fn com1_message(shuffle: &ShuffleElement, vec: &FieldVec) -> Vec<u8> {
    let mut out = vec![1u8];
    write_component(&mut out, &shuffle_message_bytes(shuffle));
    let mut v = Vec::new();
    write_u16_slice_le(&mut v, vec.as_entries());
    write_component(&mut out, &v);
    out
}

/// Canonical second or third commitment message: one field vector.
fn com_vec_message(tag: u8, vec: &FieldVec) -> Vec<u8> {
    debug_assert!(tag == 2 || tag == 3);
    let mut out = vec![tag];
    let mut v = Vec::new();
    write_u16_slice_le(&mut v, vec.as_entries());
    write_component(&mut out, &v);
    out
}

struct RoundSeeds {
    shuffle: [u8; 32],
    mask: [u8; 32],
    rho: [[u8; 32]; 3],
}

impl RoundSeeds {
    fn sample<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let draw = |rng: &mut R| {
            let mut s = [0u8; 32];
            rng.fill(&mut s[..]);
            s
        };
        Self { shuffle: draw(rng), mask: draw(rng), rho: [draw(rng), draw(rng), draw(rng)] }
    }
}

/// Honest prover bound to one statement and witness.
pub struct Prover<'a> {
    statement: &'a Statement,
    key: &'a StringCommitKey,
    witness: &'a BitVec,
}

impl<'a> Prover<'a> {
    pub fn new(statement: &'a Statement, key: &'a StringCommitKey, witness: &'a BitVec) -> Result<Self> {
        statement.check_witness(witness)?;
        Ok(Self { statement, key, witness })
    }

    pub fn commit_round<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
    ) -> Result<(RoundState<'a>, RoundCommitments)> {
        self.commit_with_seeds(&RoundSeeds::sample(rng))
    }

    fn commit_with_seeds(&self, seeds: &RoundSeeds) -> Result<(RoundState<'a>, RoundCommitments)> {
        let st = self.statement;
        let profile = st.profile();
        let q = st.q();
        let shuffle = expand_shuffle(profile, seeds.shuffle);
        let mask = expand_mask(st.witness_len(), q, seeds.mask);
        let rho = [
            expand_rho(self.key.rand_len(), seeds.rho[0]),
            expand_rho(self.key.rand_len(), seeds.rho[1]),
            expand_rho(self.key.rand_len(), seeds.rho[2]),
        ];

        let mask_product = st.matrix().mul_vec(mask.value().as_entries())?;
        let mask_image = shuffle.value().apply_field(profile, mask.value())?;
        let sum = add_mod(&FieldVec::from_bits(self.witness), mask.value(), q)?;
        let sum_image = shuffle.value().apply_field(profile, &sum)?;

        let c1 = commit_string(self.key, &com1_message(shuffle.value(), &mask_product), rho[0].value())?;
        let c2 = commit_string(self.key, &com_vec_message(2, &mask_image), rho[1].value())?;
        let c3 = commit_string(self.key, &com_vec_message(3, &sum_image), rho[2].value())?;

        let state = RoundState {
            statement: st,
            witness: self.witness,
            shuffle,
            mask,
            rho,
            used: false,
        };
        Ok((state, RoundCommitments { c1, c2, c3 }))
    }

    /// Commit `rounds` independent rounds; seed material is drawn from
    /// `rng` sequentially, the heavy arithmetic fans out when the
    /// `parallel` feature is on.
    pub fn commit_batch<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        rounds: usize,
    ) -> Result<(Vec<RoundState<'a>>, Vec<RoundCommitments>)> {
        let seeds: Vec<RoundSeeds> = (0..rounds).map(|_| RoundSeeds::sample(rng)).collect();
        #[cfg(feature = "parallel")]
        let pairs: Result<Vec<_>> = {
            use rayon::prelude::*;
            seeds.par_iter().map(|s| self.commit_with_seeds(s)).collect()
        };
        #[cfg(not(feature = "parallel"))]
        let pairs: Result<Vec<_>> = seeds.iter().map(|s| self.commit_with_seeds(s)).collect();
        Ok(pairs?.into_iter().unzip())
    }
}

/// Per-round prover state between commitment and response.
pub struct RoundState<'a> {
    statement: &'a Statement,
    witness: &'a BitVec,
    shuffle: Seeded<ShuffleElement>,
    mask: Seeded<FieldVec>,
    rho: [Seeded<BitVec>; 3],
    used: bool,
}

impl RoundState<'_> {
    /// Answer one challenge; a state answers exactly once.
    pub fn respond(&mut self, ch: Challenge) -> Result<Response> {
        if self.used {
            return Err(Error::StateReused);
        }
        self.used = true;
        self.build_response(ch)
    }

    /// Answer all three challenges from the same round state. This
    /// deliberately destroys the zero-knowledge property of the round;
    /// it exists to feed the witness extractor and its tests.
    pub fn open_all(mut self) -> Result<[Response; 3]> {
        self.used = true;
        Ok([
            self.build_response(Challenge::One)?,
            self.build_response(Challenge::Two)?,
            self.build_response(Challenge::Three)?,
        ])
    }

    fn build_response(&self, ch: Challenge) -> Result<Response> {
        let profile = self.statement.profile();
        let q = self.statement.q();
        match ch {
            Challenge::One => Ok(Response::Reveal {
                witness_image: self.shuffle.value().apply_bits(profile, self.witness)?,
                mask_image: self.shuffle.value().apply_field(profile, self.mask.value())?,
                rho2: self.rho[1].clone(),
                rho3: self.rho[2].clone(),
            }),
            Challenge::Two => Ok(Response::Shifted {
                shuffle: self.shuffle.clone(),
                sum: add_mod(&FieldVec::from_bits(self.witness), self.mask.value(), q)?,
                rho1: self.rho[0].clone(),
                rho3: self.rho[2].clone(),
            }),
            Challenge::Three => Ok(Response::Masked {
                shuffle: self.shuffle.clone(),
                mask: self.mask.clone(),
                rho1: self.rho[0].clone(),
                rho2: self.rho[1].clone(),
            }),
        }
    }
}

/// Check one (commitments, challenge, response) round. Any defect in
/// the response is a rejection, never a panic.
pub fn verify_round(
    statement: &Statement,
    key: &StringCommitKey,
    cmt: &RoundCommitments,
    ch: Challenge,
    resp: &Response,
) -> Result<()> {
    if resp.challenge() != ch {
        return Err(Error::Malformed("response answers a different challenge"));
    }
    let profile = statement.profile();
    let l = statement.witness_len();
    let q = statement.q();
    let rand_len = key.rand_len();
    let ok = |pass: bool| if pass { Ok(()) } else { Err(Error::VerifyFailed) };

    match resp {
        Response::Reveal { witness_image, mask_image, rho2, rho3 } => {
            ok(witness_image.len() == l && mask_image.len() == l)?;
            ok(rho2.value().len() == rand_len && rho3.value().len() == rand_len)?;
            ok(profile.contains(witness_image))?;
            let sum = add_mod(&FieldVec::from_bits(witness_image), mask_image, q)?;
            ok(open_string(key, &cmt.c2, &com_vec_message(2, mask_image), rho2.value()))?;
            ok(open_string(key, &cmt.c3, &com_vec_message(3, &sum), rho3.value()))
        }
        Response::Shifted { shuffle, sum, rho1, rho3 } => {
            ok(shuffle.value().matches(profile) && sum.len() == l)?;
            ok(rho1.value().len() == rand_len && rho3.value().len() == rand_len)?;
            let shifted_product = sub_mod(&statement.matrix().mul_vec(sum.as_entries())?, statement.target(), q)?;
            ok(open_string(key, &cmt.c1, &com1_message(shuffle.value(), &shifted_product), rho1.value()))?;
            let sum_image = shuffle.value().apply_field(profile, sum)?;
            ok(open_string(key, &cmt.c3, &com_vec_message(3, &sum_image), rho3.value()))
        }
        Response::Masked { shuffle, mask, rho1, rho2 } => {
            ok(shuffle.value().matches(profile) && mask.value().len() == l)?;
            ok(rho1.value().len() == rand_len && rho2.value().len() == rand_len)?;
            let mask_product = statement.matrix().mul_vec(mask.value().as_entries())?;
            ok(open_string(key, &cmt.c1, &com1_message(shuffle.value(), &mask_product), rho1.value()))?;
            let mask_image = shuffle.value().apply_field(profile, mask.value())?;
            ok(open_string(key, &cmt.c2, &com_vec_message(2, &mask_image), rho2.value()))
        }
    }
}

/// Draw `rounds` independent uniform challenges.
pub fn challenge_batch<R: Rng + ?Sized>(rng: &mut R, rounds: usize) -> Vec<Challenge> {
    (0..rounds).map(|_| Challenge::sample(rng)).collect()
}

/// Answer challenges round by round.
pub fn respond_batch(states: &mut [RoundState], challenges: &[Challenge]) -> Result<Vec<Response>> {
    if states.len() != challenges.len() {
        return Err(Error::Dimension {
            what: "challenge count",
            expected: states.len(),
            got: challenges.len(),
        });
    }
    states.iter_mut().zip(challenges).map(|(s, &ch)| s.respond(ch)).collect()
}

/// Verify a whole session; every round must pass.
pub fn verify_batch(
    statement: &Statement,
    key: &StringCommitKey,
    commitments: &[RoundCommitments],
    challenges: &[Challenge],
    responses: &[Response],
) -> Result<()> {
    if commitments.len() != challenges.len() || commitments.len() != responses.len() {
        return Err(Error::Dimension {
            what: "session round count",
            expected: commitments.len(),
            got: challenges.len().max(responses.len()),
        });
    }
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..commitments.len())
            .into_par_iter()
            .try_for_each(|i| verify_round(statement, key, &commitments[i], challenges[i], &responses[i]))
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..commitments.len())
            .try_for_each(|i| verify_round(statement, key, &commitments[i], challenges[i], &responses[i]))
    }
}

/// Smallest round count with (2/3)^rounds <= 2^-bits. Exact integer
/// arithmetic while 3^k fits in u128, floats (with ample margin) past
/// that; `bits` is capped at 64.
pub fn rounds_for_soundness(bits: u32) -> usize {
    assert!((1..=64).contains(&bits), "soundness bits out of range");
    let enough = |k: u32| -> bool {
        match (3u128.checked_pow(k), 1u128.checked_shl(bits + k)) {
            (Some(p3), Some(p2)) => p3 >= p2,
            _ => f64::from(k) * (3f64.log2() - 1.0) >= f64::from(bits),
        }
    };
    let mut k = (f64::from(bits) / (3f64.log2() - 1.0)).ceil() as u32;
    while !enough(k) {
        k += 1;
    }
    while k > 1 && enough(k - 1) {
        k -= 1;
    }
    k as usize
}

// ---------------------------------------------------------------------
// Simulation (zero-knowledge) and cheating (soundness) experiments.
// ---------------------------------------------------------------------

/// A prover with no witness. It guesses which challenge will NOT be
/// asked and prepares commitments it can open for the other two. Used
/// both as the zero-knowledge simulator (abort when the guess is hit)
/// and as the soundness cheater (answer anyway and get caught).
pub struct SimulatedRound<'a> {
    statement: &'a Statement,
    predicted: Challenge,
    shuffle: Seeded<ShuffleElement>,
    mask: Seeded<FieldVec>,
    rho: [Seeded<BitVec>; 3],
    stand_in: FieldVec,
    decoy: Option<BitVec>,
    used: bool,
}

/// Commit a simulated round that can answer everything except
/// `predicted`. Requires only that the statement is true-shaped (the
/// target lies in the column space for the `predicted == One` branch).
pub fn simulate_round<'a, R: Rng + ?Sized>(
    statement: &'a Statement,
    key: &StringCommitKey,
    predicted: Challenge,
    rng: &mut R,
) -> Result<(SimulatedRound<'a>, RoundCommitments)> {
    let profile = statement.profile();
    let q = statement.q();
    let seeds = RoundSeeds::sample(rng);
    let shuffle = expand_shuffle(profile, seeds.shuffle);
    let mask = expand_mask(statement.witness_len(), q, seeds.mask);
    let rho = [
        expand_rho(key.rand_len(), seeds.rho[0]),
        expand_rho(key.rand_len(), seeds.rho[1]),
        expand_rho(key.rand_len(), seeds.rho[2]),
    ];

    // Stand-in witness: for a predicted challenge 1 any solution of the
    // linear system works (validity is never checked); otherwise a
    // uniform member of the validity set (the equation is never
    // checked against it directly).
    let (stand_in, decoy) = match predicted {
        Challenge::One => (solve_linear(statement.matrix(), statement.target())?, Some(profile.sample_member(rng))),
        _ => (FieldVec::from_bits(&profile.sample_member(rng)), None),
    };

    let sum = add_mod(&stand_in, mask.value(), q)?;
    let sum_image = shuffle.value().apply_field(profile, &sum)?;
    let mask_image = shuffle.value().apply_field(profile, mask.value())?;

    // For predicted challenge 3 the first commitment is cooked so the
    // challenge-2 check passes without M * stand_in = target holding.
    let c1_vec = match predicted {
        Challenge::Three => sub_mod(&statement.matrix().mul_vec(sum.as_entries())?, statement.target(), q)?,
        _ => statement.matrix().mul_vec(mask.value().as_entries())?,
    };
    let c1 = commit_string(key, &com1_message(shuffle.value(), &c1_vec), rho[0].value())?;
    let c2 = commit_string(key, &com_vec_message(2, &mask_image), rho[1].value())?;
    let c3 = commit_string(key, &com_vec_message(3, &sum_image), rho[2].value())?;

    let state = SimulatedRound {
        statement,
        predicted,
        shuffle,
        mask,
        rho,
        stand_in,
        decoy,
        used: false,
    };
    Ok((state, RoundCommitments { c1, c2, c3 }))
}

impl SimulatedRound<'_> {
    pub fn predicted(&self) -> Challenge {
        self.predicted
    }

    /// Simulator semantics: `None` (abort) iff the guess was hit.
    pub fn respond(&mut self, ch: Challenge) -> Result<Option<Response>> {
        if self.used {
            return Err(Error::StateReused);
        }
        self.used = true;
        if ch == self.predicted {
            return Ok(None);
        }
        self.build_response(ch).map(Some)
    }

    /// Cheater semantics: always answer. On the predicted challenge the
    /// response is well-formed but fails verification.
    pub fn respond_forced(&mut self, ch: Challenge) -> Result<Response> {
        if self.used {
            return Err(Error::StateReused);
        }
        self.used = true;
        self.build_response(ch)
    }

    fn build_response(&self, ch: Challenge) -> Result<Response> {
        let profile = self.statement.profile();
        let q = self.statement.q();
        match ch {
            Challenge::One => {
                // Shuffled stand-in when it is a validity-set member;
                // otherwise (predicted == One, forced) a decoy member.
                let witness_image = match &self.decoy {
                    None => {
                        let bits: Vec<u8> = self.stand_in.as_entries().iter().map(|&e| e as u8).collect();
                        self.shuffle.value().apply_bits(profile, &BitVec::from_bits(bits)?)?
                    }
                    Some(decoy) => self.shuffle.value().apply_bits(profile, decoy)?,
                };
                Ok(Response::Reveal {
                    witness_image,
                    mask_image: self.shuffle.value().apply_field(profile, self.mask.value())?,
                    rho2: self.rho[1].clone(),
                    rho3: self.rho[2].clone(),
                })
            }
            Challenge::Two => Ok(Response::Shifted {
                shuffle: self.shuffle.clone(),
                sum: add_mod(&self.stand_in, self.mask.value(), q)?,
                rho1: self.rho[0].clone(),
                rho3: self.rho[2].clone(),
            }),
            Challenge::Three => Ok(Response::Masked {
                shuffle: self.shuffle.clone(),
                mask: self.mask.clone(),
                rho1: self.rho[0].clone(),
                rho2: self.rho[1].clone(),
            }),
        }
    }
}

/// Recover the witness from one round opened at all three challenges.
/// The three responses must verify against the same commitments; the
/// function re-derives the witness two independent ways and insists
/// they agree and satisfy the statement.
pub fn extract_witness(
    statement: &Statement,
    reveal: &Response,
    shifted: &Response,
    masked: &Response,
) -> Result<BitVec> {
    let profile = statement.profile();
    let q = statement.q();
    let Response::Reveal { witness_image, .. } = reveal else {
        return Err(Error::Malformed("first response must answer challenge 1"));
    };
    let Response::Shifted { shuffle, sum, .. } = shifted else {
        return Err(Error::Malformed("second response must answer challenge 2"));
    };
    let Response::Masked { mask, .. } = masked else {
        return Err(Error::Malformed("third response must answer challenge 3"));
    };

    let witness = shuffle.value().inverse().apply_bits(profile, witness_image)?;

    // Cross-check: sum minus mask must be the same witness.
    let difference = sub_mod(sum, mask.value(), q)?;
    if difference != FieldVec::from_bits(&witness) {
        return Err(Error::WitnessInvalid("transcript responses disagree"));
    }
    statement.check_witness(&witness)?;
    Ok(witness)
}

// ---------------------------------------------------------------------
// Wire encodings.
// ---------------------------------------------------------------------

/// Trade-off between payload size and self-containedness; see the
/// module docs. Commitment and challenge bytes are identical in all
/// modes, only responses change shape.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WireMode {
    Standard,
    Seeded,
    Explicit,
}

const ENC_EXPLICIT: u8 = 0;
const ENC_SEED: u8 = 1;
const ENC_PACKED: u8 = 2;

/// Hard cap on rounds per session, applied when decoding batches.
pub const MAX_ROUNDS: usize = 4096;

fn encode_witness_image(out: &mut Vec<u8>, bits: &BitVec, mode: WireMode) {
    match mode {
        WireMode::Explicit => {
            out.push(ENC_EXPLICIT);
            let lifted: Vec<u16> = bits.as_bits().iter().map(|&b| b as u16).collect();
            write_u16_slice_le(out, &lifted);
        }
        _ => {
            out.push(ENC_PACKED);
            out.extend(pack_bits(bits.as_bits()));
        }
    }
}

fn encode_field_vec(out: &mut Vec<u8>, vec: &FieldVec, seed: Option<&[u8; 32]>, q: u16, mode: WireMode) {
    match (mode, seed) {
        (WireMode::Seeded, Some(s)) => {
            out.push(ENC_SEED);
            out.extend_from_slice(s);
        }
        (WireMode::Explicit, _) => {
            out.push(ENC_EXPLICIT);
            write_u16_slice_le(out, vec.as_entries());
        }
        _ => {
            out.push(ENC_PACKED);
            out.extend(pack_uints(vec.as_entries(), ceil_log2(q)));
        }
    }
}

fn encode_shuffle(out: &mut Vec<u8>, shuffle: &Seeded<ShuffleElement>, mode: WireMode) {
    match (mode, shuffle.seed()) {
        (WireMode::Explicit, _) | (_, None) => {
            out.push(ENC_EXPLICIT);
            for factor in shuffle.value().factors() {
                write_u16_slice_le(out, factor.images());
            }
        }
        (_, Some(s)) => {
            out.push(ENC_SEED);
            out.extend_from_slice(s);
        }
    }
}

fn encode_rho(out: &mut Vec<u8>, rho: &Seeded<BitVec>, mode: WireMode) {
    match (mode, rho.seed()) {
        (WireMode::Explicit, _) | (_, None) => {
            out.push(ENC_EXPLICIT);
            out.extend(pack_bits(rho.value().as_bits()));
        }
        (_, Some(s)) => {
            out.push(ENC_SEED);
            out.extend_from_slice(s);
        }
    }
}

impl Response {
    pub fn encode(&self, statement: &Statement, mode: WireMode) -> Vec<u8> {
        let q = statement.q();
        let mut out = vec![self.challenge().as_byte()];
        match self {
            Response::Reveal { witness_image, mask_image, rho2, rho3 } => {
                encode_witness_image(&mut out, witness_image, mode);
                encode_field_vec(&mut out, mask_image, None, q, mode);
                encode_rho(&mut out, rho2, mode);
                encode_rho(&mut out, rho3, mode);
            }
            Response::Shifted { shuffle, sum, rho1, rho3 } => {
                encode_shuffle(&mut out, shuffle, mode);
                encode_field_vec(&mut out, sum, None, q, mode);
                encode_rho(&mut out, rho1, mode);
                encode_rho(&mut out, rho3, mode);
            }
            Response::Masked { shuffle, mask, rho1, rho2 } => {
                encode_shuffle(&mut out, shuffle, mode);
                encode_field_vec(&mut out, mask.value(), mask.seed(), q, mode);
                encode_rho(&mut out, rho1, mode);
                encode_rho(&mut out, rho2, mode);
            }
        }
        out
    }

    pub fn decode(bytes: &[u8], statement: &Statement, key: &StringCommitKey) -> Result<Response> {
        let mut r = Reader::new(bytes);
        let ch = Challenge::from_byte(r.u8()?)?;
        let resp = decode_response_body(&mut r, ch, statement, key)?;
        r.finish()?;
        Ok(resp)
    }
}

fn take_seed(r: &mut Reader) -> Result<[u8; 32]> {
    let mut seed = [0u8; 32];
    seed.copy_from_slice(r.take(32)?);
    Ok(seed)
}

fn decode_witness_image(r: &mut Reader, l: usize) -> Result<BitVec> {
    match r.u8()? {
        ENC_EXPLICIT => {
            let entries = r.u16_slice_le(l)?;
            if entries.iter().any(|&e| e > 1) {
                return Err(Error::NonBinary);
            }
            BitVec::from_bits(entries.into_iter().map(|e| e as u8).collect())
        }
        ENC_PACKED => BitVec::from_bits(unpack_bits(r.take(byte_len(l))?, l)?),
        _ => Err(Error::Malformed("witness image encoding tag")),
    }
}

fn decode_field_vec(r: &mut Reader, l: usize, q: u16, seedable: bool) -> Result<(FieldVec, Option<[u8; 32]>)> {
    match r.u8()? {
        ENC_EXPLICIT => Ok((FieldVec::from_entries(r.u16_slice_le(l)?, q)?, None)),
        ENC_PACKED => {
            let width = ceil_log2(q);
            let packed = r.take(byte_len(l * width as usize))?;
            Ok((FieldVec::from_entries(unpack_uints(packed, width, l)?, q)?, None))
        }
        ENC_SEED if seedable => {
            let seed = take_seed(r)?;
            Ok((expand_field_vec(&seed, MASK_TAG, l, q), Some(seed)))
        }
        _ => Err(Error::Malformed("field vector encoding tag")),
    }
}

fn decode_shuffle(r: &mut Reader, profile: &ValidityProfile) -> Result<Seeded<ShuffleElement>> {
    match r.u8()? {
        ENC_EXPLICIT => {
            let mut factors = Vec::with_capacity(profile.segments().len());
            for seg in profile.segments() {
                factors.push(Perm::from_images(r.u16_slice_le(seg.block_count())?)?);
            }
            Ok(Seeded::explicit(ShuffleElement { factors }))
        }
        ENC_SEED => {
            let seed = take_seed(r)?;
            Ok(expand_shuffle(profile, seed))
        }
        _ => Err(Error::Malformed("shuffle encoding tag")),
    }
}

fn decode_rho(r: &mut Reader, rand_len: usize) -> Result<Seeded<BitVec>> {
    match r.u8()? {
        ENC_EXPLICIT => Ok(Seeded::explicit(BitVec::from_bits(unpack_bits(
            r.take(byte_len(rand_len))?,
            rand_len,
        )?)?)),
        ENC_SEED => Ok(expand_rho(rand_len, take_seed(r)?)),
        _ => Err(Error::Malformed("randomness encoding tag")),
    }
}

fn decode_response_body(
    r: &mut Reader,
    ch: Challenge,
    statement: &Statement,
    key: &StringCommitKey,
) -> Result<Response> {
    let l = statement.witness_len();
    let q = statement.q();
    let rand_len = key.rand_len();
    match ch {
        Challenge::One => {
            let witness_image = decode_witness_image(r, l)?;
            let (mask_image, _) = decode_field_vec(r, l, q, false)?;
            Ok(Response::Reveal {
                witness_image,
                mask_image,
                rho2: decode_rho(r, rand_len)?,
                rho3: decode_rho(r, rand_len)?,
            })
        }
        Challenge::Two => {
            let shuffle = decode_shuffle(r, statement.profile())?;
            let (sum, _) = decode_field_vec(r, l, q, false)?;
            Ok(Response::Shifted {
                shuffle,
                sum,
                rho1: decode_rho(r, rand_len)?,
                rho3: decode_rho(r, rand_len)?,
            })
        }
        Challenge::Three => {
            let shuffle = decode_shuffle(r, statement.profile())?;
            let (mask, seed) = decode_field_vec(r, l, q, true)?;
            let mask = match seed {
                Some(s) => Seeded::from_seed(s, mask),
                None => Seeded::explicit(mask),
            };
            Ok(Response::Masked {
                shuffle,
                mask,
                rho1: decode_rho(r, rand_len)?,
                rho2: decode_rho(r, rand_len)?,
            })
        }
    }
}

/// Exact encoded size of an honest (seed-carrying) response.
pub fn response_byte_len(
    statement: &Statement,
    key: &StringCommitKey,
    mode: WireMode,
    ch: Challenge,
) -> usize {
    let l = statement.witness_len();
    let width = ceil_log2(statement.q()) as usize;
    let rho = match mode {
        WireMode::Explicit => 1 + byte_len(key.rand_len()),
        _ => 1 + 32,
    };
    let field = match mode {
        WireMode::Explicit => 1 + 2 * l,
        _ => 1 + byte_len(l * width),
    };
    let shuffle = match mode {
        WireMode::Explicit => {
            1 + statement.profile().segments().iter().map(|s| 2 * s.block_count()).sum::<usize>()
        }
        _ => 1 + 32,
    };
    match ch {
        Challenge::One => {
            let image = match mode {
                WireMode::Explicit => 1 + 2 * l,
                _ => 1 + byte_len(l),
            };
            1 + image + field + 2 * rho
        }
        Challenge::Two => 1 + shuffle + field + 2 * rho,
        Challenge::Three => {
            let mask = match mode {
                WireMode::Seeded => 1 + 32,
                _ => field,
            };
            1 + shuffle + mask + 2 * rho
        }
    }
}

pub fn encode_commitment_batch(cmts: &[RoundCommitments]) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(&(cmts.len() as u32).to_le_bytes());
    for c in cmts {
        out.extend(c.to_bytes());
    }
    out
}

pub fn decode_commitment_batch(bytes: &[u8], n: usize, q: u16) -> Result<Vec<RoundCommitments>> {
    let mut r = Reader::new(bytes);
    let count = r.u32_le()? as usize;
    if count > MAX_ROUNDS {
        return Err(Error::Malformed("round count over the cap"));
    }
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        out.push(RoundCommitments::from_bytes(r.take(RoundCommitments::byte_len(n))?, n, q)?);
    }
    r.finish()?;
    Ok(out)
}

pub fn encode_challenge_batch(challenges: &[Challenge]) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(&(challenges.len() as u32).to_le_bytes());
    out.extend(challenges.iter().map(|c| c.as_byte()));
    out
}

pub fn decode_challenge_batch(bytes: &[u8]) -> Result<Vec<Challenge>> {
    let mut r = Reader::new(bytes);
    let count = r.u32_le()? as usize;
    if count > MAX_ROUNDS {
        return Err(Error::Malformed("round count over the cap"));
    }
    let out: Result<Vec<Challenge>> =
        r.take(count)?.iter().map(|&b| Challenge::from_byte(b)).collect();
    let out = out?;
    r.finish()?;
    Ok(out)
}

pub fn encode_response_batch(responses: &[Response], statement: &Statement, mode: WireMode) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(&(responses.len() as u32).to_le_bytes());
    for resp in responses {
        write_component(&mut out, &resp.encode(statement, mode));
    }
    out
}

pub fn decode_response_batch(
    bytes: &[u8],
    statement: &Statement,
    key: &StringCommitKey,
) -> Result<Vec<Response>> {
    let mut r = Reader::new(bytes);
    let count = r.u32_le()? as usize;
    if count > MAX_ROUNDS {
        return Err(Error::Malformed("round count over the cap"));
    }
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        out.push(Response::decode(r.component()?, statement, key)?);
    }
    r.finish()?;
    Ok(out)
}
