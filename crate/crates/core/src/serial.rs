//! Byte-level encoding shared by commitment inputs, transcripts and the
//! wire protocol: MSB-first bit packing, fixed-width packed integers,
//! little-endian scalars and length-prefixed components.
//!
//! Encodings are canonical: padding bits must be zero and every length
//! prefix is checked, so a byte string decodes to at most one value.

use crate::{Error, Result};

/// Pack 0/1 entries eight per byte, MSB first. The final byte is
/// zero-padded.
pub fn pack_bits(bits: &[u8]) -> Vec<u8> {
    let mut out = vec![0u8; bits.len().div_ceil(8)];
    for (i, &b) in bits.iter().enumerate() {
        debug_assert!(b <= 1);
        out[i / 8] |= b << (7 - i % 8);
    }
    out
}

/// Inverse of [`pack_bits`] for an expected bit count; rejects length
/// mismatches and nonzero padding.
pub fn unpack_bits(bytes: &[u8], len: usize) -> Result<Vec<u8>> {
    if bytes.len() != len.div_ceil(8) {
        return Err(Error::Malformed("packed bit length"));
    }
    let mut bits = Vec::with_capacity(len);
    for i in 0..len {
        bits.push((bytes[i / 8] >> (7 - i % 8)) & 1);
    }
    for i in len..bytes.len() * 8 {
        if (bytes[i / 8] >> (7 - i % 8)) & 1 != 0 {
            return Err(Error::Malformed("nonzero bit padding"));
        }
    }
    Ok(bits)
}

/// Pack fixed-width unsigned values (width <= 16 bits each) into a
/// continuous MSB-first bit stream.
pub fn pack_uints(values: &[u16], width: u32) -> Vec<u8> {
    assert!((1..=16).contains(&width));
    let total = values.len() * width as usize;
    let mut out = vec![0u8; total.div_ceil(8)];
    let mut pos = 0usize;
    for &v in values {
        debug_assert!(width == 16 || v < 1 << width);
        for k in 0..width {
            let bit = (v >> (width - 1 - k)) & 1;
            out[pos / 8] |= (bit as u8) << (7 - pos % 8);
            pos += 1;
        }
    }
    out
}

/// Inverse of [`pack_uints`]; rejects length mismatches and nonzero
/// padding.
pub fn unpack_uints(bytes: &[u8], width: u32, count: usize) -> Result<Vec<u16>> {
    assert!((1..=16).contains(&width));
    let total = count * width as usize;
    if bytes.len() != total.div_ceil(8) {
        return Err(Error::Malformed("packed uint length"));
    }
    let bit = |pos: usize| (bytes[pos / 8] >> (7 - pos % 8)) & 1;
    let mut values = Vec::with_capacity(count);
    let mut pos = 0usize;
    for _ in 0..count {
        let mut v = 0u16;
        for _ in 0..width {
            v = (v << 1) | bit(pos) as u16;
            pos += 1;
        }
        values.push(v);
    }
    for p in total..bytes.len() * 8 {
        if bit(p) != 0 {
            return Err(Error::Malformed("nonzero uint padding"));
        }
    }
    Ok(values)
}

pub fn write_u16_le(out: &mut Vec<u8>, v: u16) {
    out.extend_from_slice(&v.to_le_bytes());
}

pub fn write_u32_le(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

/// Every u16 little-endian, in order.
pub fn write_u16_slice_le(out: &mut Vec<u8>, values: &[u16]) {
    out.reserve(values.len() * 2);
    for &v in values {
        write_u16_le(out, v);
    }
}

/// Length-prefixed component: u32 little-endian byte count, then payload.
pub fn write_component(out: &mut Vec<u8>, payload: &[u8]) {
    write_u32_le(out, payload.len() as u32);
    out.extend_from_slice(payload);
}

/// Cursor over a byte buffer with checked reads.
pub struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    pub fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    pub fn is_done(&self) -> bool {
        self.remaining() == 0
    }

    /// The whole buffer must have been consumed; guards against trailing
    /// garbage in canonical encodings.
    pub fn finish(self) -> Result<()> {
        if self.is_done() {
            Ok(())
        } else {
            Err(Error::Malformed("trailing bytes"))
        }
    }

    pub fn take(&mut self, len: usize) -> Result<&'a [u8]> {
        if self.remaining() < len {
            return Err(Error::Malformed("truncated message"));
        }
        let out = &self.buf[self.pos..self.pos + len];
        self.pos += len;
        Ok(out)
    }

    pub fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub fn u16_le(&mut self) -> Result<u16> {
        let b = self.take(2)?;
        Ok(u16::from_le_bytes([b[0], b[1]]))
    }

    pub fn u32_le(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    pub fn u16_slice_le(&mut self, count: usize) -> Result<Vec<u16>> {
        let b = self.take(count * 2)?;
        Ok(b.chunks_exact(2).map(|c| u16::from_le_bytes([c[0], c[1]])).collect())
    }

    /// Read one length-prefixed component.
    pub fn component(&mut self) -> Result<&'a [u8]> {
        let len = self.u32_le()? as usize;
        self.take(len)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bit_packing_round_trips() {
        for len in 0..40usize {
            let bits: Vec<u8> = (0..len).map(|i| ((i * 7 + 3) % 5 == 0) as u8).collect();
            let packed = pack_bits(&bits);
            assert_eq!(packed.len(), len.div_ceil(8));
            assert_eq!(unpack_bits(&packed, len).unwrap(), bits);
        }
        // A nonzero padding bit is not canonical.
        assert!(unpack_bits(&[0b0000_0001], 7).is_err());
        assert!(unpack_bits(&[0, 0], 7).is_err());
    }

    #[test]
    fn uint_packing_round_trips() {
        let values: Vec<u16> = (0..100).map(|i| (i * 37) % 1021).collect();
        for width in [10u32, 11, 16] {
            let packed = pack_uints(&values, width);
            assert_eq!(packed.len(), (100 * width as usize).div_ceil(8));
            assert_eq!(unpack_uints(&packed, width, 100).unwrap(), values);
        }
        assert!(unpack_uints(&[0xFF], 10, 0).is_err());
        assert!(unpack_uints(&[0x00, 0x01], 10, 1).is_err());
    }

    #[test]
    fn reader_checks_bounds_and_trailing_bytes() {
        let mut buf = Vec::new();
        write_u16_le(&mut buf, 0x0102);
        write_component(&mut buf, b"abc");
        let mut r = Reader::new(&buf);
        assert_eq!(r.u16_le().unwrap(), 0x0102);
        assert_eq!(r.component().unwrap(), b"abc");
        assert!(r.finish().is_ok());
        let mut r = Reader::new(&buf);
        let _ = r.u8().unwrap();
        assert!(r.finish().is_err());
        let mut r = Reader::new(&buf[..3]);
        assert!(r.u32_le().is_err());
        assert!(Reader::new(&buf[..1]).u16_le().is_err());
    }
}
