//! Reduction from "the hashed password satisfies the policy" to the
//! linear relation the argument engine proves.
//!
//! The digest commits to `x = (positions(chi) || shuffled blocks)` and a
//! bit salt. To prove policy compliance the client publishes, per
//! required character class, which *shuffled* slots hold a character of
//! that class (the slot claims). Because the shuffle is secret and
//! uniform, claimed slot indices carry no information about where those
//! characters sit in the password.
//!
//! The witness is laid out as
//!
//! ```text
//! w = positions(chi)                        one permutation-code segment
//!     || one class arrangement per claim    claimed char in block 0
//!     || unclaimed blocks || salt || filler one balanced segment
//! ```
//!
//! and the matrix re-arranges the digest key columns to match: the
//! claimed slot's 8 key columns hit block 0 of its arrangement (zero
//! columns swallow the other blocks, which exist only to prove class
//! membership under shuffling), unclaimed slot columns and the salt
//! matrix hit the balanced segment, and the filler that pads the
//! segment to exact half weight meets zero columns. Multiplying out
//! gives exactly the digest equation, so the argument proves knowledge
//! of a preimage of `h` whose claimed slots hold the claimed classes.

use rand::Rng;

use crate::encoding::{classify_char, decode_char, encode_char, is_printable, perm_to_blocks, CharClass};
use crate::ktx::{Commitment, StringCommitKey};
use crate::policy::Policy;
use crate::pwhash::{pre_hash, pre_salt, salt, PublicParams};
use crate::ring::{BitVec, FieldMatrix, Perm};
use crate::serial::Reader;
use crate::stern::{Segment, Statement, ValidityProfile, WireMode};
use crate::{Error, Result};

/// Claim order is fixed: digits, symbols, lowercase, uppercase, then
/// free printable slots.
pub const CLAIM_CLASSES: [CharClass; 5] = [
    CharClass::Digit,
    CharClass::Symbol,
    CharClass::Lower,
    CharClass::Upper,
    CharClass::All,
];

/// Which shuffled slots hold each required character class.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SlotClaims {
    digit: Vec<u16>,
    symbol: Vec<u16>,
    lower: Vec<u16>,
    upper: Vec<u16>,
    any: Vec<u16>,
}

impl SlotClaims {
    pub fn new(
        digit: Vec<u16>,
        symbol: Vec<u16>,
        lower: Vec<u16>,
        upper: Vec<u16>,
        any: Vec<u16>,
    ) -> Self {
        Self { digit, symbol, lower, upper, any }
    }

    pub fn list(&self, class: CharClass) -> &[u16] {
        match class {
            CharClass::Digit => &self.digit,
            CharClass::Symbol => &self.symbol,
            CharClass::Lower => &self.lower,
            CharClass::Upper => &self.upper,
            _ => &self.any,
        }
    }

    /// (class, slot) pairs in canonical claim order.
    pub fn ordered(&self) -> Vec<(CharClass, u16)> {
        CLAIM_CLASSES
            .iter()
            .flat_map(|&class| self.list(class).iter().map(move |&s| (class, s)))
            .collect()
    }

    /// Counts match the policy, slots are in range and pairwise
    /// distinct.
    pub fn validate(&self, policy: &Policy, n_max: usize) -> Result<()> {
        for class in CLAIM_CLASSES {
            let list = self.list(class);
            if list.len() != policy.minimum(class) {
                return Err(Error::ClaimMismatch("claim count differs from the policy"));
            }
            if list.iter().any(|&s| s as usize >= n_max) {
                return Err(Error::ClaimMismatch("claimed slot out of range"));
            }
        }
        let mut seen = vec![false; n_max];
        for (_, slot) in self.ordered() {
            if std::mem::replace(&mut seen[slot as usize], true) {
                return Err(Error::ClaimMismatch("slot claimed twice"));
            }
        }
        Ok(())
    }

    /// Ascending unclaimed slots.
    pub fn free_slots(&self, n_max: usize) -> Vec<u16> {
        let mut seen = vec![false; n_max];
        for (_, slot) in self.ordered() {
            if (slot as usize) < n_max {
                seen[slot as usize] = true;
            }
        }
        (0..n_max as u16).filter(|&s| !seen[s as usize]).collect()
    }

    /// Slot lists back to back as 16-bit little-endian words; lengths
    /// are implied by the policy.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        for class in CLAIM_CLASSES {
            crate::serial::write_u16_slice_le(&mut out, self.list(class));
        }
        out
    }

    pub fn from_bytes(bytes: &[u8], policy: &Policy, n_max: usize) -> Result<Self> {
        let mut r = Reader::new(bytes);
        let mut lists: [Vec<u16>; 5] = Default::default();
        for (list, class) in lists.iter_mut().zip(CLAIM_CLASSES) {
            *list = r.u16_slice_le(policy.minimum(class))?;
        }
        r.finish()?;
        let [digit, symbol, lower, upper, any] = lists;
        let claims = Self { digit, symbol, lower, upper, any };
        claims.validate(policy, n_max)?;
        Ok(claims)
    }
}

/// Scan the password left to right and claim, per class in canonical
/// order, the first unclaimed positions of that class; free claims take
/// the first unclaimed printable leftovers. Positions map to slots
/// through the inverse shuffle.
pub fn derive_slot_claims(policy: &Policy, pw: &[u8], chi: &Perm) -> Result<SlotClaims> {
    policy.check(pw)?;
    if chi.len() < pw.len() {
        return Err(Error::Dimension { what: "pre-salt width", expected: pw.len(), got: chi.len() });
    }
    let inverse = chi.inverse();
    let mut claimed = vec![false; pw.len()];
    let mut lists: [Vec<u16>; 5] = Default::default();
    for (list, class) in lists.iter_mut().zip(CLAIM_CLASSES) {
        let mut need = policy.minimum(class);
        for (i, &c) in pw.iter().enumerate() {
            if need == 0 {
                break;
            }
            let fits = if class == CharClass::All { is_printable(c) } else { classify_char(c) == class };
            if !claimed[i] && fits {
                claimed[i] = true;
                list.push(inverse.image(i) as u16);
                need -= 1;
            }
        }
        if need > 0 {
            return Err(Error::ClaimMismatch("not enough characters of a required class"));
        }
    }
    let [digit, symbol, lower, upper, any] = lists;
    Ok(SlotClaims { digit, symbol, lower, upper, any })
}

/// A policy can be proven under these parameters only if it pins the
/// same maximum length (the digest shape depends on it) and does not
/// allow passwords shorter than the hash accepts.
pub fn check_window(pp: &PublicParams, policy: &Policy) -> Result<()> {
    if policy.n_max != pp.n_max() || policy.n_min < pp.n_min() {
        return Err(Error::Malformed("policy window incompatible with the parameters"));
    }
    Ok(())
}

/// Half-length of the balanced tail segment: unclaimed blocks plus the
/// salt.
fn tail_half_len(pp: &PublicParams, policy: &Policy) -> usize {
    8 * (policy.n_max - policy.n_min) + pp.params().m
}

/// Witness length for a policy under these parameters.
pub fn witness_len(pp: &PublicParams, policy: &Policy) -> usize {
    let class_bits: usize = CLAIM_CLASSES
        .iter()
        .map(|&c| policy.minimum(c) * 8 * c.size())
        .sum();
    pp.position_bits() + class_bits + 2 * tail_half_len(pp, policy)
}

/// Validity profile for a claim set (only the class sequence matters).
fn build_profile(pp: &PublicParams, policy: &Policy, claims: &SlotClaims) -> Result<ValidityProfile> {
    let mut segments = vec![Segment::PermutationCode { items: pp.n_max() }];
    segments.extend(
        claims.ordered().into_iter().map(|(class, _)| Segment::ClassArrangement { class }),
    );
    segments.push(Segment::Balanced { half_len: tail_half_len(pp, policy) });
    ValidityProfile::new(segments)
}

/// Assemble the public statement both sides derive independently from
/// `(parameters, policy, claims, digest)`.
pub fn build_statement(
    pp: &PublicParams,
    policy: &Policy,
    claims: &SlotClaims,
    digest: &Commitment,
) -> Result<Statement> {
    check_window(pp, policy)?;
    claims.validate(policy, pp.n_max())?;
    let n = pp.params().n;
    let q = pp.params().q;
    if digest.value().len() != n {
        return Err(Error::Dimension { what: "digest length", expected: n, got: digest.value().len() });
    }

    let (a, b) = pp.key().matrices();
    let pos_bits = pp.position_bits();
    let mut pieces: Vec<FieldMatrix> = vec![a.col_block(0, pos_bits)];
    for (class, slot) in claims.ordered() {
        pieces.push(a.col_block(pos_bits + 8 * slot as usize, 8));
        pieces.push(FieldMatrix::zeros(n, 8 * (class.size() - 1), q));
    }
    for free in claims.free_slots(pp.n_max()) {
        pieces.push(a.col_block(pos_bits + 8 * free as usize, 8));
    }
    pieces.push(b.clone());
    pieces.push(FieldMatrix::zeros(n, tail_half_len(pp, policy), q));

    let refs: Vec<&FieldMatrix> = pieces.iter().collect();
    let matrix = FieldMatrix::hcat(&refs)?;
    Statement::new(matrix, digest.value().clone(), build_profile(pp, policy, claims)?)
}

/// Arrange a class alphabet with `first` up front and the rest
/// ascending.
fn arrangement_with_first(class: CharClass, first: u8) -> Result<BitVec> {
    if !class.members().contains(&first) {
        return Err(Error::ClaimMismatch("claimed slot holds a different class"));
    }
    let mut blocks = vec![encode_char(first)];
    blocks.extend(class.members().iter().filter(|&&c| c != first).map(|&c| encode_char(c)));
    let refs: Vec<&BitVec> = blocks.iter().collect();
    Ok(BitVec::concat(&refs))
}

/// Assemble the private witness matching [`build_statement`].
pub fn build_witness(
    pp: &PublicParams,
    policy: &Policy,
    claims: &SlotClaims,
    pw: &[u8],
    chi: &Perm,
    salt_bits: &BitVec,
) -> Result<BitVec> {
    check_window(pp, policy)?;
    claims.validate(policy, pp.n_max())?;
    if salt_bits.len() != pp.params().m {
        return Err(Error::Dimension {
            what: "salt length",
            expected: pp.params().m,
            got: salt_bits.len(),
        });
    }
    let shuffled = pre_hash(pp, pw, chi)?;
    let block = |slot: u16| shuffled.slice(8 * slot as usize, 8 * slot as usize + 8);

    let mut parts = vec![perm_to_blocks(chi)];
    for (class, slot) in claims.ordered() {
        parts.push(arrangement_with_first(class, decode_char(block(slot).as_bits())?)?);
    }
    let free: Vec<BitVec> = claims.free_slots(pp.n_max()).into_iter().map(block).collect();
    let refs: Vec<&BitVec> = free.iter().collect();
    let unclaimed = BitVec::concat(&refs);

    let half = tail_half_len(pp, policy);
    let used = unclaimed.weight() + salt_bits.weight();
    parts.push(unclaimed);
    parts.push(salt_bits.clone());
    parts.push(BitVec::ones(half - used));
    parts.push(BitVec::zeros(used));

    let refs: Vec<&BitVec> = parts.iter().collect();
    Ok(BitVec::concat(&refs))
}

/// Read a password back out of an extracted witness: undo the shuffle
/// the witness itself encodes and keep the printable blocks. Claimed
/// slots are printable by construction; unclaimed blocks that decode to
/// padding or garbage are dropped.
pub fn extract_password(
    pp: &PublicParams,
    policy: &Policy,
    claims: &SlotClaims,
    witness: &BitVec,
) -> Result<Vec<u8>> {
    check_window(pp, policy)?;
    claims.validate(policy, pp.n_max())?;
    if witness.len() != witness_len(pp, policy) {
        return Err(Error::Dimension {
            what: "witness length",
            expected: witness_len(pp, policy),
            got: witness.len(),
        });
    }
    let n_max = pp.n_max();
    let chi = crate::encoding::blocks_to_perm(&witness.slice(0, pp.position_bits()), n_max)?;

    // Reassemble the shuffled blocks from claimed arrangement heads and
    // the unclaimed run.
    let mut blocks: Vec<Option<BitVec>> = vec![None; n_max];
    let mut off = pp.position_bits();
    for (class, slot) in claims.ordered() {
        blocks[slot as usize] = Some(witness.slice(off, off + 8));
        off += 8 * class.size();
    }
    for free in claims.free_slots(n_max) {
        blocks[free as usize] = Some(witness.slice(off, off + 8));
        off += 8;
    }
    let blocks: Vec<BitVec> = blocks.into_iter().map(|b| b.expect("every slot filled")).collect();
    let refs: Vec<&BitVec> = blocks.iter().collect();
    let shuffled = BitVec::concat(&refs);

    let plain = crate::encoding::apply_block_perm(&chi.inverse(), &shuffled, 8)?;
    let mut pw = Vec::new();
    for chunk in plain.as_bits().chunks_exact(8) {
        let code = decode_char(chunk)?;
        if is_printable(code) {
            pw.push(code);
        }
    }
    Ok(pw)
}

/// Everything the client creates at registration time. `chi` and
/// `salt` are witness material: they exist so callers can re-derive or
/// test, and must never leave the client.
pub struct Registration {
    pub digest: Commitment,
    pub claims: SlotClaims,
    pub witness: BitVec,
    pub chi: Perm,
    pub salt: BitVec,
}

/// Hash a password and prepare the compliance witness in one step.
pub fn prepare_registration<R: Rng + ?Sized>(
    pp: &PublicParams,
    policy: &Policy,
    pw: &[u8],
    rng: &mut R,
) -> Result<Registration> {
    check_window(pp, policy)?;
    policy.check(pw)?;
    let chi = pre_salt(pp, rng);
    let r = salt(pp, rng);
    let shuffled = pre_hash(pp, pw, &chi)?;
    let digest = crate::pwhash::hash(pp, &shuffled, &chi, &r)?;
    let claims = derive_slot_claims(policy, pw, &chi)?;
    let witness = build_witness(pp, policy, &claims, pw, &chi, &r)?;
    Ok(Registration { digest, claims, witness, chi, salt: r })
}

/// Per-round and per-session communication sizes, exact for honest
/// transcripts in the given wire mode. Sizes cover the batched proof
/// messages themselves, not outer framing.
#[derive(Clone, Copy, Debug)]
pub struct CostReport {
    pub witness_len: usize,
    /// All three commitments, per round.
    pub commitment_bytes: usize,
    /// Response sizes for challenges 1, 2, 3.
    pub response_bytes: [usize; 3],
    /// Commitment + challenge byte + smallest/largest response.
    pub round_bytes_min: usize,
    pub round_bytes_max: usize,
}

impl CostReport {
    /// Range of total proof bytes for a session: batch message headers
    /// plus per-round costs (4-byte counts, 4-byte response prefixes).
    pub fn session_bytes(&self, rounds: usize) -> (usize, usize) {
        let fixed = 12 + rounds * (self.commitment_bytes + 1 + 4);
        (fixed + rounds * (self.round_bytes_min - self.commitment_bytes - 1),
         fixed + rounds * (self.round_bytes_max - self.commitment_bytes - 1))
    }
}

pub fn cost_report(
    pp: &PublicParams,
    policy: &Policy,
    statement: &Statement,
    key: &StringCommitKey,
    mode: WireMode,
) -> Result<CostReport> {
    check_window(pp, policy)?;
    let commitment_bytes = crate::stern::RoundCommitments::byte_len(pp.params().n);
    let response_bytes = [
        crate::stern::response_byte_len(statement, key, mode, crate::stern::Challenge::One),
        crate::stern::response_byte_len(statement, key, mode, crate::stern::Challenge::Two),
        crate::stern::response_byte_len(statement, key, mode, crate::stern::Challenge::Three),
    ];
    let min = *response_bytes.iter().min().expect("three entries");
    let max = *response_bytes.iter().max().expect("three entries");
    Ok(CostReport {
        witness_len: statement.witness_len(),
        commitment_bytes,
        response_bytes,
        round_bytes_min: commitment_bytes + 1 + min,
        round_bytes_max: commitment_bytes + 1 + max,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ring::Params;
    use crate::stern::{
        challenge_batch, extract_witness, respond_batch, verify_batch, Prover,
    };
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn toy_pp(n_min: usize, n_max: usize) -> PublicParams {
        let params = Params::new(8, 6, 17, 24, [9; 32]).unwrap();
        PublicParams::with_params(params, n_min, n_max).unwrap()
    }

    #[test]
    fn witness_length_matches_the_assembled_statement() {
        let mut rng = ChaCha20Rng::seed_from_u64(0);
        let cases = [
            (Policy::new(1, 0, 1, 0, 2, 4).unwrap(), toy_pp(2, 4)),
            (Policy::new(0, 1, 0, 0, 1, 3).unwrap(), toy_pp(1, 3)),
            (Policy::new(1, 1, 1, 1, 5, 5).unwrap(), toy_pp(5, 5)),
            (Policy::new(0, 0, 0, 0, 2, 4).unwrap(), toy_pp(2, 4)),
        ];
        for (policy, pp) in cases {
            let pw = policy.sample_compliant(&mut rng);
            let reg = prepare_registration(&pp, &policy, pw.as_bytes(), &mut rng).unwrap();
            let statement = build_statement(&pp, &policy, &reg.claims, &reg.digest).unwrap();
            assert_eq!(statement.witness_len(), witness_len(&pp, &policy));
            assert_eq!(reg.witness.len(), statement.witness_len());
            statement.check_witness(&reg.witness).unwrap();
        }
    }

    #[test]
    fn standard_profile_witness_length_is_frozen() {
        // The deployment-scale instance: 256 rows, q = 1021, window
        // [8, 16], one of each class required.
        let pp = PublicParams::setup(128, 8, 16, [0; 32]).unwrap();
        let policy = Policy::new(1, 1, 1, 1, 8, 16).unwrap();
        assert_eq!(witness_len(&pp, &policy), 14192);
    }

    #[test]
    fn the_greedy_scan_claims_the_documented_slots() {
        let policy = Policy::new(1, 1, 1, 1, 5, 6).unwrap();
        let claims = derive_slot_claims(&policy, b"aA1!x", &Perm::identity(6)).unwrap();
        assert_eq!(claims.list(CharClass::Digit), [2]);
        assert_eq!(claims.list(CharClass::Symbol), [3]);
        assert_eq!(claims.list(CharClass::Lower), [0]);
        assert_eq!(claims.list(CharClass::Upper), [1]);
        assert_eq!(claims.list(CharClass::All), [4]);
        assert_eq!(claims.free_slots(6), [5]);

        // Slot indices go through the inverse shuffle: position p sits
        // at the slot chi maps onto p.
        let chi = Perm::from_images(vec![3, 0, 5, 1, 2, 4]).unwrap();
        let claims = derive_slot_claims(&policy, b"aA1!x", &chi).unwrap();
        assert_eq!(claims.list(CharClass::Lower), [1]); // chi(1) = 0
        assert_eq!(claims.list(CharClass::Upper), [3]); // chi(3) = 1
        assert_eq!(claims.list(CharClass::Digit), [4]); // chi(4) = 2
        assert_eq!(claims.list(CharClass::Symbol), [0]); // chi(0) = 3
        assert_eq!(claims.list(CharClass::All), [5]); // chi(5) = 4
        assert_eq!(claims.free_slots(6), [2]); // slot 2 holds the pad

        // Repeated classes claim left to right.
        let policy = Policy::new(2, 0, 0, 0, 2, 4).unwrap();
        let claims = derive_slot_claims(&policy, b"1a2", &Perm::identity(4)).unwrap();
        assert_eq!(claims.list(CharClass::Digit), [0, 2]);
    }

    #[test]
    fn claims_validate_counts_ranges_and_distinctness() {
        let policy = Policy::new(1, 0, 1, 0, 2, 4).unwrap();
        let ok = SlotClaims::new(vec![1], vec![], vec![3], vec![], vec![]);
        ok.validate(&policy, 4).unwrap();
        assert_eq!(ok.free_slots(4), [0, 2]);

        let wrong_count = SlotClaims::new(vec![1, 2], vec![], vec![3], vec![], vec![]);
        assert!(wrong_count.validate(&policy, 4).is_err());
        let out_of_range = SlotClaims::new(vec![4], vec![], vec![3], vec![], vec![]);
        assert!(out_of_range.validate(&policy, 4).is_err());
        let duplicate = SlotClaims::new(vec![3], vec![], vec![3], vec![], vec![]);
        assert!(duplicate.validate(&policy, 4).is_err());
    }

    #[test]
    fn claim_bytes_round_trip() {
        let policy = Policy::new(1, 1, 1, 1, 5, 6).unwrap();
        let claims = derive_slot_claims(&policy, b"aA1!x", &Perm::identity(6)).unwrap();
        let bytes = claims.to_bytes();
        assert_eq!(bytes.len(), 10);
        let back = SlotClaims::from_bytes(&bytes, &policy, 6).unwrap();
        assert_eq!(back, claims);
        assert!(SlotClaims::from_bytes(&bytes[..8], &policy, 6).is_err());
        let mut doubled = bytes.clone();
        doubled.extend_from_slice(&[0, 0]);
        assert!(SlotClaims::from_bytes(&doubled, &policy, 6).is_err());
        // Decoded claims are validated.
        let mut dup = bytes;
        dup.copy_within(0..2, 2);
        assert!(SlotClaims::from_bytes(&dup, &policy, 6).is_err());
    }

    #[test]
    fn registrations_round_trip_through_extraction() {
        let pp = toy_pp(2, 4);
        let policy = Policy::new(1, 0, 1, 0, 2, 4).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        for _ in 0..100 {
            let pw = policy.sample_compliant(&mut rng);
            let reg = prepare_registration(&pp, &policy, pw.as_bytes(), &mut rng).unwrap();
            let got = extract_password(&pp, &policy, &reg.claims, &reg.witness).unwrap();
            assert_eq!(got, pw.as_bytes());
        }
    }

    #[test]
    fn tampered_claimed_blocks_break_the_witness() {
        let pp = toy_pp(2, 4);
        let policy = Policy::new(1, 0, 1, 0, 2, 4).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let pw = policy.sample_compliant(&mut rng);
        let reg = prepare_registration(&pp, &policy, pw.as_bytes(), &mut rng).unwrap();
        let statement = build_statement(&pp, &policy, &reg.claims, &reg.digest).unwrap();
        statement.check_witness(&reg.witness).unwrap();

        // Flip one bit inside the first claimed arrangement head: the
        // linear equation no longer matches the digest.
        let mut bits = reg.witness.as_bits().to_vec();
        bits[pp.position_bits() + 7] ^= 1;
        let bad = BitVec::from_bits(bits).unwrap();
        assert!(statement.check_witness(&bad).is_err());

        // Flipping a one and a zero inside the filler keeps the witness
        // valid: the filler meets zero columns and only pads weight.
        let mut bits = reg.witness.as_bits().to_vec();
        let tail_start = statement.witness_len() - 2 * tail_half_len(&pp, &policy);
        let free_bits = 8 * (policy.n_max - policy.n_min) + pp.params().m;
        let filler = tail_start + free_bits;
        let one = (filler..statement.witness_len()).find(|&i| bits[i] == 1).unwrap();
        let zero = (filler..statement.witness_len()).find(|&i| bits[i] == 0).unwrap();
        bits[one] = 0;
        bits[zero] = 1;
        statement.check_witness(&BitVec::from_bits(bits).unwrap()).unwrap();
    }

    #[test]
    fn mismatched_windows_are_rejected() {
        let pp = toy_pp(2, 4);
        let narrow = Policy::new(1, 0, 1, 0, 2, 3).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        assert!(prepare_registration(&pp, &narrow, b"a1", &mut rng).is_err());
        let low = Policy::new(1, 0, 0, 0, 1, 4).unwrap();
        assert!(prepare_registration(&pp, &low, b"1", &mut rng).is_err());
    }

    #[test]
    fn full_toy_sessions_prove_and_extract() {
        let pp = toy_pp(2, 4);
        let policy = Policy::new(1, 0, 1, 0, 2, 4).unwrap();
        let key = StringCommitKey::derive(pp.params());
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let pw = b"z9x";
        let reg = prepare_registration(&pp, &policy, pw, &mut rng).unwrap();
        let statement = build_statement(&pp, &policy, &reg.claims, &reg.digest).unwrap();

        // The verifier rebuilds the statement from serialized claims
        // and digest; both sides agree bit for bit.
        let server_claims =
            SlotClaims::from_bytes(&reg.claims.to_bytes(), &policy, pp.n_max()).unwrap();
        let server_digest =
            Commitment::from_bytes(&reg.digest.to_bytes(), pp.params().n, pp.params().q).unwrap();
        let server_statement = build_statement(&pp, &policy, &server_claims, &server_digest).unwrap();
        assert_eq!(server_statement.matrix(), statement.matrix());
        assert_eq!(server_statement.target(), statement.target());

        let prover = Prover::new(&statement, &key, &reg.witness).unwrap();
        let rounds = 20;
        let (mut states, cmts) = prover.commit_batch(&mut rng, rounds).unwrap();
        let challenges = challenge_batch(&mut rng, rounds);
        let responses = respond_batch(&mut states, &challenges).unwrap();
        verify_batch(&server_statement, &key, &cmts, &challenges, &responses).unwrap();

        // A fully opened round extracts the witness, and the witness
        // decodes back to the password.
        let (state, _) = prover.commit_round(&mut rng).unwrap();
        let [r1, r2, r3] = state.open_all().unwrap();
        let witness = extract_witness(&statement, &r1, &r2, &r3).unwrap();
        assert_eq!(extract_password(&pp, &policy, &reg.claims, &witness).unwrap(), pw);
    }

    #[test]
    fn claimed_slots_are_uniform_over_the_shuffle() {
        // One lower-class claim in a 3-slot window: over uniform
        // shuffles the claimed slot must be uniform over {0, 1, 2}.
        let policy = Policy::new(0, 0, 1, 0, 1, 3).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let n = 30_000;
        let mut counts = [0u32; 3];
        for _ in 0..n {
            let chi = Perm::random(3, &mut rng);
            let claims = derive_slot_claims(&policy, b"a", &chi).unwrap();
            counts[claims.list(CharClass::Lower)[0] as usize] += 1;
        }
        let p = 1.0 / 3.0;
        let sigma = (n as f64 * p * (1.0 - p)).sqrt();
        for &c in &counts {
            assert!((c as f64 - n as f64 * p).abs() <= 4.0 * sigma);
        }

        // Two claims: the ordered pair is uniform over the 6 ordered
        // distinct pairs, regardless of where the characters sit.
        let policy = Policy::new(0, 0, 1, 1, 2, 3).unwrap();
        let mut counts = std::collections::HashMap::new();
        for _ in 0..n {
            let chi = Perm::random(3, &mut rng);
            let claims = derive_slot_claims(&policy, b"xaB", &chi).unwrap();
            let pair = (claims.list(CharClass::Lower)[0], claims.list(CharClass::Upper)[0]);
            *counts.entry(pair).or_insert(0u32) += 1;
        }
        assert_eq!(counts.len(), 6);
        let p = 1.0 / 6.0;
        let sigma = (n as f64 * p * (1.0 - p)).sqrt();
        for &c in counts.values() {
            assert!((c as f64 - n as f64 * p).abs() <= 4.0 * sigma);
        }
    }

    #[test]
    fn cost_reports_add_up() {
        let pp = toy_pp(2, 4);
        let policy = Policy::new(1, 0, 1, 0, 2, 4).unwrap();
        let key = StringCommitKey::derive(pp.params());
        let mut rng = ChaCha20Rng::seed_from_u64(6);
        let pw = policy.sample_compliant(&mut rng);
        let reg = prepare_registration(&pp, &policy, pw.as_bytes(), &mut rng).unwrap();
        let statement = build_statement(&pp, &policy, &reg.claims, &reg.digest).unwrap();
        for mode in [WireMode::Standard, WireMode::Seeded, WireMode::Explicit] {
            let report = cost_report(&pp, &policy, &statement, &key, mode).unwrap();
            assert_eq!(report.witness_len, statement.witness_len());
            assert_eq!(report.commitment_bytes, 6 * pp.params().n);
            let (min, max) = report.session_bytes(10);
            assert!(min <= max);
            assert_eq!(
                max - min,
                10 * (report.round_bytes_max - report.round_bytes_min)
            );
        }
    }
}
