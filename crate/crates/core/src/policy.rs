//! Password composition policies: per-class minimum counts plus a length
//! window.
//!
//! A policy is written `kD,kS,kL,kU,nmin,nmax`: at least kD digits, kS
//! symbols, kL lowercase, kU uppercase, and a total length in
//! [nmin, nmax]. Characters beyond the class minimums may be any
//! printable ASCII.

use std::fmt;

use rand::Rng;

use crate::encoding::{classify_char, is_printable, CharClass};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Policy {
    pub k_digit: usize,
    pub k_symbol: usize,
    pub k_lower: usize,
    pub k_upper: usize,
    pub n_min: usize,
    pub n_max: usize,
}

impl Policy {
    /// Validates feasibility: the class minimums must fit inside the
    /// length window and the window must be non-empty.
    pub fn new(
        k_digit: usize,
        k_symbol: usize,
        k_lower: usize,
        k_upper: usize,
        n_min: usize,
        n_max: usize,
    ) -> Result<Self> {
        let f = Self { k_digit, k_symbol, k_lower, k_upper, n_min, n_max };
        if n_min == 0 || n_min > n_max || f.class_total() > n_min {
            return Err(Error::PolicyInfeasible);
        }
        Ok(f)
    }

    /// Sum of the four class minimums.
    pub fn class_total(&self) -> usize {
        self.k_digit + self.k_symbol + self.k_lower + self.k_upper
    }

    /// Free slots: positions the policy pins to "any printable".
    pub fn k_all(&self) -> usize {
        self.n_min - self.class_total()
    }

    /// Minimum count for one class; All returns the free-slot count.
    pub fn minimum(&self, class: CharClass) -> usize {
        match class {
            CharClass::Digit => self.k_digit,
            CharClass::Symbol => self.k_symbol,
            CharClass::Lower => self.k_lower,
            CharClass::Upper => self.k_upper,
            CharClass::All => self.k_all(),
            CharClass::NonPrintable => 0,
        }
    }

    /// `kD,kS,kL,kU,nmin,nmax`.
    pub fn parse(text: &str) -> Result<Self> {
        let fields: Vec<&str> = text.split(',').map(str::trim).collect();
        if fields.len() != 6 {
            return Err(Error::PolicyParse(format!("expected 6 comma-separated fields, got {}", fields.len())));
        }
        let mut values = [0usize; 6];
        for (slot, field) in values.iter_mut().zip(&fields) {
            *slot = field
                .parse()
                .map_err(|_| Error::PolicyParse(format!("field '{field}' is not a count")))?;
        }
        Self::new(values[0], values[1], values[2], values[3], values[4], values[5])
    }

    /// Does the password satisfy the policy? Non-printable bytes never
    /// satisfy any policy.
    pub fn evaluate(&self, pw: &[u8]) -> bool {
        self.check(pw).is_ok()
    }

    /// Like [`Policy::evaluate`] but says what failed first.
    pub fn check(&self, pw: &[u8]) -> Result<()> {
        for (index, &c) in pw.iter().enumerate() {
            if !is_printable(c) {
                return Err(Error::NonPrintable { index, code: c });
            }
        }
        if pw.len() < self.n_min {
            return Err(Error::TooShort { len: pw.len(), min: self.n_min });
        }
        if pw.len() > self.n_max {
            return Err(Error::TooLong { len: pw.len(), max: self.n_max });
        }
        for class in [CharClass::Digit, CharClass::Symbol, CharClass::Lower, CharClass::Upper] {
            let have = pw.iter().filter(|&&c| classify_char(c) == class).count();
            let need = self.minimum(class);
            if have < need {
                return Err(Error::MissingClass { class, need, have });
            }
        }
        Ok(())
    }

    /// A uniform-ish compliant password: the class minimums plus random
    /// printable filler, shuffled. Handy for tests and benches.
    pub fn sample_compliant<R: Rng + ?Sized>(&self, rng: &mut R) -> String {
        let len = rng.gen_range(self.n_min..=self.n_max);
        let mut chars: Vec<u8> = Vec::with_capacity(len);
        for class in [CharClass::Digit, CharClass::Symbol, CharClass::Lower, CharClass::Upper] {
            for _ in 0..self.minimum(class) {
                chars.push(class.members()[rng.gen_range(0..class.size())]);
            }
        }
        while chars.len() < len {
            chars.push(CharClass::All.members()[rng.gen_range(0..94)]);
        }
        for i in (1..chars.len()).rev() {
            chars.swap(i, rng.gen_range(0..=i));
        }
        String::from_utf8(chars).expect("printable ASCII is valid UTF-8")
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{},{},{},{},{},{}",
            self.k_digit, self.k_symbol, self.k_lower, self.k_upper, self.n_min, self.n_max
        )
    }
}
