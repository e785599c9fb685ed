//! ASCII character classes and the block encodings the argument system
//! permutes.
//!
//! Passwords use the 94 printable codes 33..=126. Space is deliberately
//! outside the alphabet: it doubles as a visual ambiguity and keeping it
//! out leaves exactly 94 printable codes splitting into 10 digits, 26
//! uppercase, 26 lowercase and 32 symbols.
//!
//! Three families of bit vectors recur everywhere. A vector is *balanced*
//! when exactly half its entries are ones; it is a *class set* when its
//! 8-bit blocks spell every member of one character class exactly once;
//! it is a *position set* when its blocks spell every block index exactly
//! once. All three are invariant under the matching block permutations,
//! which is what makes masking by a secret permutation leak nothing.

use crate::ring::{bin, ceil_log2, int_from_bits, BitVec, Perm};
use crate::{Error, Result};

/// Padding byte appended to short passwords before hashing. NUL is not
/// printable, so padding can never be confused with password content.
pub const PAD_CHAR: u8 = 0;

/// Character class of a single ASCII code.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CharClass {
    Digit,
    Symbol,
    Lower,
    Upper,
    /// Any printable character; the class used for free policy slots.
    All,
    /// Everything outside 33..=126, padding included.
    NonPrintable,
}

const fn range_table<const N: usize>(start: u8) -> [u8; N] {
    let mut out = [0u8; N];
    let mut i = 0;
    while i < N {
        out[i] = start + i as u8;
        i += 1;
    }
    out
}

const fn symbol_table() -> [u8; 32] {
    let mut out = [0u8; 32];
    let mut i = 0;
    let mut c = 33u8;
    while c <= 126 {
        let alnum = (c >= b'0' && c <= b'9') || (c >= b'A' && c <= b'Z') || (c >= b'a' && c <= b'z');
        if !alnum {
            out[i] = c;
            i += 1;
        }
        c += 1;
    }
    out
}

static DIGITS: [u8; 10] = range_table::<10>(b'0');
static UPPERS: [u8; 26] = range_table::<26>(b'A');
static LOWERS: [u8; 26] = range_table::<26>(b'a');
static SYMBOLS: [u8; 32] = symbol_table();
static PRINTABLE: [u8; 94] = range_table::<94>(33);

impl CharClass {
    /// Members in ascending ASCII order; empty for NonPrintable.
    pub fn members(self) -> &'static [u8] {
        match self {
            CharClass::Digit => &DIGITS,
            CharClass::Symbol => &SYMBOLS,
            CharClass::Lower => &LOWERS,
            CharClass::Upper => &UPPERS,
            CharClass::All => &PRINTABLE,
            CharClass::NonPrintable => &[],
        }
    }

    pub fn size(self) -> usize {
        self.members().len()
    }
}

/// Class of one code; never returns [`CharClass::All`].
pub fn classify_char(c: u8) -> CharClass {
    match c {
        b'0'..=b'9' => CharClass::Digit,
        b'A'..=b'Z' => CharClass::Upper,
        b'a'..=b'z' => CharClass::Lower,
        33..=126 => CharClass::Symbol,
        _ => CharClass::NonPrintable,
    }
}

pub fn is_printable(c: u8) -> bool {
    (33..=126).contains(&c)
}

/// 8-bit big-endian block for one code; total on all 256 codes.
pub fn encode_char(c: u8) -> BitVec {
    bin(c as u64, 8).expect("8 bits always fit a byte")
}

/// Inverse of [`encode_char`]; the block must be exactly 8 bits.
pub fn decode_char(bits: &[u8]) -> Result<u8> {
    if bits.len() != 8 {
        return Err(Error::Dimension { what: "character block", expected: 8, got: bits.len() });
    }
    Ok(int_from_bits(bits) as u8)
}

/// Concatenated blocks for a password; rejects the first non-printable
/// byte with its index.
pub fn encode_password(pw: &[u8]) -> Result<BitVec> {
    let mut bits = Vec::with_capacity(pw.len() * 8);
    for (index, &c) in pw.iter().enumerate() {
        if !is_printable(c) {
            return Err(Error::NonPrintable { index, code: c });
        }
        bits.extend_from_slice(encode_char(c).as_bits());
    }
    BitVec::from_bits(bits)
}

/// Move whole blocks of a bit vector: output block i is input block
/// psi(i).
pub fn apply_block_perm(psi: &Perm, bits: &BitVec, block: usize) -> Result<BitVec> {
    let moved = psi.apply_blocks(bits.as_bits(), block)?;
    BitVec::from_bits(moved)
}

/// Exactly half ones? The length must be 2 * half_len.
pub fn is_balanced(bits: &BitVec, half_len: usize) -> Result<bool> {
    if bits.len() != 2 * half_len {
        return Err(Error::Dimension { what: "balanced vector", expected: 2 * half_len, got: bits.len() });
    }
    Ok(bits.weight() == half_len)
}

/// Do the 8-bit blocks spell every member of `class` exactly once? The
/// length must be 8 * class.size(); NonPrintable has no finite set.
pub fn is_class_set(bits: &BitVec, class: CharClass) -> Result<bool> {
    let members = class.members();
    if members.is_empty() {
        return Err(Error::Malformed("character class has no encoding set"));
    }
    if bits.len() != 8 * members.len() {
        return Err(Error::Dimension {
            what: "class set blocks",
            expected: 8 * members.len(),
            got: bits.len(),
        });
    }
    let mut codes: Vec<u8> =
        bits.as_bits().chunks_exact(8).map(|b| int_from_bits(b) as u8).collect();
    codes.sort_unstable();
    Ok(codes == members)
}

/// Do the ceil(log2 count)-bit blocks spell every index in 0..count
/// exactly once?
pub fn is_position_set(bits: &BitVec, count: usize) -> Result<bool> {
    let width = ceil_log2(count as u16) as usize;
    if bits.len() != count * width {
        return Err(Error::Dimension {
            what: "position set blocks",
            expected: count * width,
            got: bits.len(),
        });
    }
    let mut values: Vec<u64> = bits.as_bits().chunks_exact(width).map(int_from_bits).collect();
    values.sort_unstable();
    Ok(values.iter().enumerate().all(|(i, &v)| v == i as u64))
}

/// Blocks bin(chi(i)) for i in order: the public encoding of a position
/// permutation. Block width is ceil(log2 len).
pub fn perm_to_blocks(chi: &Perm) -> BitVec {
    let width = ceil_log2(chi.len() as u16);
    let mut bits = Vec::with_capacity(chi.len() * width as usize);
    for &img in chi.images() {
        bits.extend_from_slice(bin(img as u64, width).expect("image fits width").as_bits());
    }
    BitVec::from_bits(bits).expect("bin emits bits")
}

/// Inverse of [`perm_to_blocks`]; rejects vectors whose blocks are not a
/// permutation of 0..count.
pub fn blocks_to_perm(bits: &BitVec, count: usize) -> Result<Perm> {
    let width = ceil_log2(count as u16) as usize;
    if bits.len() != count * width {
        return Err(Error::Dimension {
            what: "permutation blocks",
            expected: count * width,
            got: bits.len(),
        });
    }
    let images: Vec<u16> = bits
        .as_bits()
        .chunks_exact(width)
        .map(|b| {
            let v = int_from_bits(b);
            if v >= count as u64 {
                Err(Error::InvalidPermutation)
            } else {
                Ok(v as u16)
            }
        })
        .collect::<Result<_>>()?;
    Perm::from_images(images)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn classes_partition_the_printable_range() {
        assert_eq!(CharClass::Digit.size(), 10);
        assert_eq!(CharClass::Symbol.size(), 32);
        assert_eq!(CharClass::Lower.size(), 26);
        assert_eq!(CharClass::Upper.size(), 26);
        assert_eq!(CharClass::All.size(), 94);
        let mut union: Vec<u8> = Vec::new();
        for class in [CharClass::Digit, CharClass::Symbol, CharClass::Lower, CharClass::Upper] {
            union.extend_from_slice(class.members());
        }
        union.sort_unstable();
        assert_eq!(union, CharClass::All.members());
        for c in 0..=255u8 {
            let class = classify_char(c);
            assert_eq!(class == CharClass::NonPrintable, !is_printable(c));
            if is_printable(c) {
                assert!(class.members().contains(&c));
            }
        }
        assert_eq!(classify_char(b'A'), CharClass::Upper);
        assert_eq!(classify_char(b'0'), CharClass::Digit);
        assert_eq!(classify_char(b'~'), CharClass::Symbol);
        assert_eq!(classify_char(b' '), CharClass::NonPrintable);
        assert_eq!(classify_char(200), CharClass::NonPrintable);
        assert_eq!(classify_char(PAD_CHAR), CharClass::NonPrintable);
    }

    #[test]
    fn char_blocks_round_trip() {
        assert_eq!(encode_char(b'A').as_bits(), &[0, 1, 0, 0, 0, 0, 0, 1]);
        assert_eq!(encode_char(b'0').as_bits(), &[0, 0, 1, 1, 0, 0, 0, 0]);
        for c in 0..=255u8 {
            assert_eq!(decode_char(encode_char(c).as_bits()).unwrap(), c);
        }
        assert!(decode_char(&[0; 7]).is_err());
    }

    #[test]
    fn password_encoding_rejects_non_printables_with_position() {
        let e = encode_password(b"pAss word").unwrap_err();
        assert_eq!(e, Error::NonPrintable { index: 4, code: b' ' });
        let e = encode_password(&[b'a', 200]).unwrap_err();
        assert_eq!(e, Error::NonPrintable { index: 1, code: 200 });
        let bits = encode_password(b"A0").unwrap();
        assert_eq!(bits.len(), 16);
        assert_eq!(&bits.as_bits()[..8], encode_char(b'A').as_bits());
    }

    fn all_perms(k: usize) -> Vec<Perm> {
        fn heap(items: &mut Vec<u16>, k: usize, out: &mut Vec<Vec<u16>>) {
            if k <= 1 {
                out.push(items.clone());
                return;
            }
            for i in 0..k {
                heap(items, k - 1, out);
                if k.is_multiple_of(2) {
                    items.swap(i, k - 1);
                } else {
                    items.swap(0, k - 1);
                }
            }
        }
        let mut raw = Vec::new();
        heap(&mut (0..k as u16).collect::<Vec<u16>>(), k, &mut raw);
        raw.into_iter().map(|m| Perm::from_images(m).unwrap()).collect()
    }

    #[test]
    fn balance_is_invariant_under_every_coordinate_permutation() {
        // Exhaustive at half_len = 2: 16 vectors, 24 permutations, and
        // exactly 6 balanced members.
        let mut members = 0;
        for raw in 0..16u8 {
            let bits = BitVec::from_bits((0..4).map(|i| (raw >> i) & 1).collect()).unwrap();
            let balanced = is_balanced(&bits, 2).unwrap();
            members += balanced as usize;
            for psi in all_perms(4) {
                let moved = apply_block_perm(&psi, &bits, 1).unwrap();
                assert_eq!(is_balanced(&moved, 2).unwrap(), balanced);
            }
        }
        assert_eq!(members, 6);
        assert!(is_balanced(&BitVec::zeros(5), 2).is_err());
    }

    #[test]
    fn balanced_orbit_is_uniform_under_random_permutations() {
        // Uniformity half: a fixed balanced vector lands on each of the 6
        // members evenly under a uniform coordinate permutation.
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let start = BitVec::from_bits(vec![1, 1, 0, 0]).unwrap();
        let mut counts = std::collections::HashMap::new();
        let n = 100_000;
        for _ in 0..n {
            let psi = Perm::random(4, &mut rng);
            let moved = apply_block_perm(&psi, &start, 1).unwrap();
            *counts.entry(moved.as_bits().to_vec()).or_insert(0u32) += 1;
        }
        assert_eq!(counts.len(), 6);
        let p = 1.0 / 6.0;
        let sigma = (n as f64 * p * (1.0 - p)).sqrt();
        for &c in counts.values() {
            assert!((c as f64 - n as f64 * p).abs() <= 4.0 * sigma);
        }
    }

    #[test]
    fn class_sets_are_invariant_under_block_permutations() {
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        for class in [CharClass::Digit, CharClass::Symbol, CharClass::Lower, CharClass::Upper, CharClass::All] {
            let eta = class.size();
            // A member: all encodings in a random arrangement.
            let arrangement = Perm::random(eta, &mut rng);
            let mut bits = Vec::new();
            for i in 0..eta {
                bits.extend_from_slice(encode_char(class.members()[arrangement.image(i)]).as_bits());
            }
            let member = BitVec::from_bits(bits).unwrap();
            assert!(is_class_set(&member, class).unwrap());
            // A non-member: first block duplicated over the second.
            let mut dup = member.as_bits().to_vec();
            let (head, tail) = dup.split_at_mut(8);
            tail[..8].copy_from_slice(head);
            let non_member = BitVec::from_bits(dup).unwrap();
            assert!(!is_class_set(&non_member, class).unwrap());
            for _ in 0..1000 {
                let psi = Perm::random(eta, &mut rng);
                let m = apply_block_perm(&psi, &member, 8).unwrap();
                assert!(is_class_set(&m, class).unwrap());
                let nm = apply_block_perm(&psi, &non_member, 8).unwrap();
                assert!(!is_class_set(&nm, class).unwrap());
            }
        }
        assert!(is_class_set(&BitVec::zeros(8), CharClass::Digit).is_err());
        assert!(is_class_set(&BitVec::zeros(8), CharClass::NonPrintable).is_err());
    }

    #[test]
    fn class_set_orbit_has_uniform_first_block() {
        // Projected uniformity at eta = 10: the first block of a permuted
        // digit set is each digit equally often.
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let mut bits = Vec::new();
        for &c in CharClass::Digit.members() {
            bits.extend_from_slice(encode_char(c).as_bits());
        }
        let member = BitVec::from_bits(bits).unwrap();
        let mut counts = [0u32; 10];
        let n = 100_000;
        for _ in 0..n {
            let psi = Perm::random(10, &mut rng);
            let moved = apply_block_perm(&psi, &member, 8).unwrap();
            let first = decode_char(&moved.as_bits()[..8]).unwrap();
            counts[(first - b'0') as usize] += 1;
        }
        let p = 0.1;
        let sigma = (n as f64 * p * (1.0 - p)).sqrt();
        for &c in &counts {
            assert!((c as f64 - n as f64 * p).abs() <= 4.0 * sigma);
        }
    }

    #[test]
    fn position_sets_are_invariant_under_block_permutations() {
        // Exhaustive at count = 3 (width 2, 64 vectors) and count = 4
        // (width 2, 256 vectors), over every block permutation.
        for count in [3usize, 4] {
            let width = ceil_log2(count as u16) as usize;
            let len = count * width;
            let mut members = 0;
            for raw in 0..1u32 << len {
                let bits =
                    BitVec::from_bits((0..len).map(|i| ((raw >> i) & 1) as u8).collect()).unwrap();
                let member = is_position_set(&bits, count).unwrap();
                members += member as usize;
                for psi in all_perms(count) {
                    let moved = apply_block_perm(&psi, &bits, width).unwrap();
                    assert_eq!(is_position_set(&moved, count).unwrap(), member);
                }
            }
            assert_eq!(members, (1..=count).product::<usize>());
        }
        assert!(is_position_set(&BitVec::zeros(5), 3).is_err());
    }

    #[test]
    fn position_set_orbit_is_uniform() {
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let start = perm_to_blocks(&Perm::identity(3));
        let mut counts = std::collections::HashMap::new();
        let n = 100_000;
        for _ in 0..n {
            let psi = Perm::random(3, &mut rng);
            let moved = apply_block_perm(&psi, &start, 2).unwrap();
            *counts.entry(moved.as_bits().to_vec()).or_insert(0u32) += 1;
        }
        assert_eq!(counts.len(), 6);
        let p = 1.0 / 6.0;
        let sigma = (n as f64 * p * (1.0 - p)).sqrt();
        for &c in counts.values() {
            assert!((c as f64 - n as f64 * p).abs() <= 4.0 * sigma);
        }
    }

    #[test]
    fn permutation_blocks_round_trip() {
        let chi = Perm::from_images(vec![2, 0, 1]).unwrap();
        let blocks = perm_to_blocks(&chi);
        assert_eq!(blocks.as_bits(), &[1, 0, 0, 0, 0, 1]);
        assert_eq!(blocks_to_perm(&blocks, 3).unwrap(), chi);
        for k in 1..=6usize {
            let mut rng = ChaCha20Rng::seed_from_u64(k as u64);
            for _ in 0..50 {
                let chi = Perm::random(k, &mut rng);
                assert_eq!(blocks_to_perm(&perm_to_blocks(&chi), k).unwrap(), chi);
            }
        }
        // Duplicate indices are not a permutation.
        let bad = BitVec::from_bits(vec![0, 0, 0, 0, 0, 1]).unwrap();
        assert!(blocks_to_perm(&bad, 3).is_err());
        // Out-of-range index (3 needs two bits but only 0..=2 are valid).
        let bad = BitVec::from_bits(vec![1, 1, 0, 0, 0, 1]).unwrap();
        assert!(blocks_to_perm(&bad, 3).is_err());
    }

    #[test]
    fn position_blocks_match_the_permutation_images() {
        let mut rng = ChaCha20Rng::seed_from_u64(9);
        for _ in 0..100 {
            let k = rng.gen_range(1..=16);
            let chi = Perm::random(k, &mut rng);
            let blocks = perm_to_blocks(&chi);
            assert!(is_position_set(&blocks, k).unwrap());
            let width = ceil_log2(k as u16) as usize;
            for i in 0..k {
                let v = int_from_bits(&blocks.as_bits()[i * width..(i + 1) * width]);
                assert_eq!(v as usize, chi.image(i));
            }
        }
    }
}
