//! Minimal BER subset: definite lengths, single-byte tags, primitive
//! INTEGER / OCTET STRING / OBJECT IDENTIFIER and constructed SEQUENCE-like
//! containers. Nothing else is needed for the discovery exchange.

use alloc::vec::Vec;

pub const TAG_INTEGER: u8 = 0x02;
pub const TAG_OCTET_STRING: u8 = 0x04;
pub const TAG_NULL: u8 = 0x05;
pub const TAG_OID: u8 = 0x06;
pub const TAG_SEQUENCE: u8 = 0x30;
pub const TAG_COUNTER32: u8 = 0x41;

/// Why a BER read failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum BerError {
    #[error("truncated input at offset {0}")]
    Truncated(usize),
    #[error("indefinite length at offset {0}")]
    IndefiniteLength(usize),
    #[error("length field too long at offset {0}")]
    LengthTooLong(usize),
    #[error("multi-byte tag at offset {0}")]
    UnsupportedTag(usize),
    #[error("expected tag {expected:#04x}, found {found:#04x} at offset {offset}")]
    UnexpectedTag { expected: u8, found: u8, offset: usize },
    #[error("invalid integer encoding at offset {0}")]
    BadInteger(usize),
    #[error("invalid object identifier at offset {0}")]
    BadOid(usize),
    #[error("{0} trailing bytes")]
    TrailingData(usize),
}

/// One decoded tag-length-value element borrowed from the input.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Tlv<'a> {
    pub tag: u8,
    pub content: &'a [u8],
    /// The whole element, header included.
    pub raw: &'a [u8],
    pub offset: usize,
}

/// Cursor over a byte slice. Reads never go past the slice end.
#[derive(Debug, Clone)]
pub struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
    base: usize,
}

impl<'a> Reader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0, base: 0 }
    }

    fn nested(buf: &'a [u8], base: usize) -> Self {
        Self { buf, pos: 0, base }
    }

    pub fn offset(&self) -> usize {
        self.base + self.pos
    }

    pub fn is_empty(&self) -> bool {
        self.pos >= self.buf.len()
    }

    pub fn remaining(&self) -> usize {
        self.buf.len().saturating_sub(self.pos)
    }

    pub fn finish(&self) -> Result<(), BerError> {
        match self.remaining() {
            0 => Ok(()),
            n => Err(BerError::TrailingData(n)),
        }
    }

    fn byte(&mut self) -> Result<u8, BerError> {
        let b = *self.buf.get(self.pos).ok_or(BerError::Truncated(self.offset()))?;
        self.pos += 1;
        Ok(b)
    }

    pub fn read_tlv(&mut self) -> Result<Tlv<'a>, BerError> {
        let start = self.pos;
        let offset = self.offset();
        let tag = self.byte()?;
        if tag & 0x1f == 0x1f {
            return Err(BerError::UnsupportedTag(offset));
        }
        let first = self.byte()?;
        let len = if first < 0x80 {
            first as usize
        } else if first == 0x80 {
            return Err(BerError::IndefiniteLength(offset));
        } else {
            let n = (first & 0x7f) as usize;
            if n > 4 {
                return Err(BerError::LengthTooLong(offset));
            }
            let mut len = 0usize;
            for _ in 0..n {
                len = (len << 8) | self.byte()? as usize;
            }
            len
        };
        if len > self.remaining() {
            return Err(BerError::Truncated(self.offset()));
        }
        let content_start = self.pos;
        self.pos += len;
        Ok(Tlv { tag, content: &self.buf[content_start..self.pos], raw: &self.buf[start..self.pos], offset })
    }

    pub fn expect(&mut self, tag: u8) -> Result<Tlv<'a>, BerError> {
        let tlv = self.read_tlv()?;
        if tlv.tag != tag {
            return Err(BerError::UnexpectedTag { expected: tag, found: tlv.tag, offset: tlv.offset });
        }
        Ok(tlv)
    }

    /// Reads a constructed element with the given tag and returns a reader
    /// over its content.
    pub fn enter(&mut self, tag: u8) -> Result<Reader<'a>, BerError> {
        let tlv = self.expect(tag)?;
        Ok(Reader::nested(tlv.content, tlv.offset + (tlv.raw.len() - tlv.content.len())))
    }

    pub fn read_integer(&mut self) -> Result<i64, BerError> {
        let tlv = self.expect(TAG_INTEGER)?;
        decode_integer(tlv.content).ok_or(BerError::BadInteger(tlv.offset))
    }

    pub fn read_octets(&mut self) -> Result<&'a [u8], BerError> {
        Ok(self.expect(TAG_OCTET_STRING)?.content)
    }

    pub fn read_oid(&mut self) -> Result<Vec<u32>, BerError> {
        let tlv = self.expect(TAG_OID)?;
        decode_oid(tlv.content).ok_or(BerError::BadOid(tlv.offset))
    }
}

/// Two's-complement big-endian integer of up to 8 bytes.
pub fn decode_integer(content: &[u8]) -> Option<i64> {
    if content.is_empty() || content.len() > 8 {
        return None;
    }
    let mut v: i64 = if content[0] & 0x80 != 0 { -1 } else { 0 };
    for &b in content {
        v = (v << 8) | b as i64;
    }
    Some(v)
}

pub fn decode_oid(content: &[u8]) -> Option<Vec<u32>> {
    if content.is_empty() {
        return None;
    }
    let mut arcs = Vec::new();
    let mut acc: u64 = 0;
    let mut in_arc = false;
    for &b in content {
        if !in_arc && b == 0x80 {
            return None;
        }
        acc = (acc << 7) | (b & 0x7f) as u64;
        if acc > u32::MAX as u64 + 80 {
            return None;
        }
        in_arc = b & 0x80 != 0;
        if !in_arc {
            if arcs.is_empty() {
                let first = (acc / 40).min(2);
                arcs.push(first as u32);
                arcs.push(u32::try_from(acc - first * 40).ok()?);
            } else {
                arcs.push(u32::try_from(acc).ok()?);
            }
            acc = 0;
        }
    }
    if in_arc {
        return None;
    }
    Some(arcs)
}

/// Appends a definite-length header for `len` content bytes.
pub fn write_header(out: &mut Vec<u8>, tag: u8, len: usize) {
    out.push(tag);
    if len < 0x80 {
        out.push(len as u8);
    } else {
        let bytes = (len as u32).to_be_bytes();
        let skip = bytes.iter().take_while(|&&b| b == 0).count();
        out.push(0x80 | (4 - skip) as u8);
        out.extend_from_slice(&bytes[skip..]);
    }
}

pub fn write_tlv(out: &mut Vec<u8>, tag: u8, content: &[u8]) {
    write_header(out, tag, content.len());
    out.extend_from_slice(content);
}

/// Writes a constructed element whose content is produced by `f`.
pub fn write_constructed(out: &mut Vec<u8>, tag: u8, f: impl FnOnce(&mut Vec<u8>)) {
    let mut content = Vec::new();
    f(&mut content);
    write_tlv(out, tag, &content);
}

/// Minimal two's-complement content bytes for `v`.
pub fn integer_content(v: i64) -> Vec<u8> {
    let bytes = v.to_be_bytes();
    let mut start = 0;
    while start < 7 {
        let (b, next) = (bytes[start], bytes[start + 1]);
        if (b == 0x00 && next & 0x80 == 0) || (b == 0xff && next & 0x80 != 0) {
            start += 1;
        } else {
            break;
        }
    }
    bytes[start..].to_vec()
}

pub fn write_integer_tagged(out: &mut Vec<u8>, tag: u8, v: i64) {
    write_tlv(out, tag, &integer_content(v));
}

pub fn write_integer(out: &mut Vec<u8>, v: i64) {
    write_integer_tagged(out, TAG_INTEGER, v);
}

pub fn write_octets(out: &mut Vec<u8>, v: &[u8]) {
    write_tlv(out, TAG_OCTET_STRING, v);
}

/// Unsigned application integer (Counter32 and friends).
pub fn write_unsigned(out: &mut Vec<u8>, tag: u8, v: u32) {
    write_integer_tagged(out, tag, v as i64);
}

pub fn write_oid(out: &mut Vec<u8>, arcs: &[u32]) {
    let mut content = Vec::new();
    let mut push_arc = |mut v: u64| {
        let mut tmp = [0u8; 10];
        let mut i = tmp.len();
        loop {
            i -= 1;
            tmp[i] = (v & 0x7f) as u8;
            v >>= 7;
            if v == 0 {
                break;
            }
        }
        let last = tmp.len() - 1;
        for (j, b) in tmp.iter().enumerate().skip(i) {
            content.push(if j < last { b | 0x80 } else { *b });
        }
    };
    match arcs {
        [] => push_arc(0),
        [a] => push_arc(*a as u64 * 40),
        [a, b, rest @ ..] => {
            push_arc(*a as u64 * 40 + *b as u64);
            for &arc in rest {
                push_arc(arc as u64);
            }
        }
    }
    write_tlv(out, TAG_OID, &content);
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn integer_minimal_encoding() {
        assert_eq!(integer_content(0), vec![0x00]);
        assert_eq!(integer_content(127), vec![0x7f]);
        assert_eq!(integer_content(128), vec![0x00, 0x80]);
        assert_eq!(integer_content(-1), vec![0xff]);
        assert_eq!(integer_content(-129), vec![0xff, 0x7f]);
        assert_eq!(integer_content(65507), vec![0x00, 0xff, 0xe3]);
        assert_eq!(integer_content(148), vec![0x00, 0x94]);
    }

    #[test]
    fn integer_decode_sign() {
        assert_eq!(decode_integer(&[0xff]), Some(-1));
        assert_eq!(decode_integer(&[0x00, 0x99, 0x41, 0xa4]), Some(10043812));
        assert_eq!(decode_integer(&[]), None);
        assert_eq!(decode_integer(&[0; 9]), None);
    }

    #[test]
    fn long_form_length() {
        let mut out = Vec::new();
        write_tlv(&mut out, TAG_OCTET_STRING, &[7u8; 300]);
        assert_eq!(&out[..4], &[0x04, 0x82, 0x01, 0x2c]);
        let mut r = Reader::new(&out);
        assert_eq!(r.read_octets().unwrap().len(), 300);
        assert!(r.finish().is_ok());
    }

    #[test]
    fn rejects_indefinite_and_overlong() {
        assert_eq!(Reader::new(&[0x30, 0x80, 0, 0]).read_tlv(), Err(BerError::IndefiniteLength(0)));
        assert_eq!(Reader::new(&[0x04, 0x05, 1, 2]).read_tlv(), Err(BerError::Truncated(2)));
        assert_eq!(Reader::new(&[0x04, 0x85, 1, 1, 1, 1, 1]).read_tlv(), Err(BerError::LengthTooLong(0)));
        assert_eq!(Reader::new(&[0x1f, 0x01]).read_tlv(), Err(BerError::UnsupportedTag(0)));
    }

    #[test]
    fn oid_round_trip() {
        let arcs = [1u32, 3, 6, 1, 6, 3, 15, 1, 1, 4, 0];
        let mut out = Vec::new();
        write_oid(&mut out, &arcs);
        assert_eq!(out, [0x06, 0x0a, 0x2b, 6, 1, 6, 3, 15, 1, 1, 4, 0]);
        assert_eq!(Reader::new(&out).read_oid().unwrap(), arcs);
        let mut big = Vec::new();
        write_oid(&mut big, &[1, 3, 6, 1, 4, 1, 8072, 4294967295]);
        assert_eq!(Reader::new(&big).read_oid().unwrap(), [1, 3, 6, 1, 4, 1, 8072, 4294967295]);
    }
}
