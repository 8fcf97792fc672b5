//! Big-endian primitives shared by the wire and key formats.

use lcws_core::algebra::{AlgebraError, G0Element, GtElement, Scalar, G0_LEN, GT_LEN, SCALAR_LEN};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DecodeError {
    #[error("input ends early: needed {needed} more bytes at offset {offset}")]
    Truncated { offset: usize, needed: usize },
    #[error("bad magic")]
    BadMagic,
    #[error("unsupported format version {0}")]
    UnsupportedVersion(u8),
    #[error("unknown suite id {0:#04x}")]
    UnknownSuite(u8),
    #[error("{0}")]
    Malformed(&'static str),
    #[error("{0} trailing bytes")]
    Trailing(usize),
    #[error("encoding is not canonical")]
    NonCanonical,
    #[error("invalid group element: {0}")]
    Algebra(#[from] AlgebraError),
}

#[derive(Default)]
pub(crate) struct Writer {
    pub buf: Vec<u8>,
}

impl Writer {
    pub fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    pub fn u16(&mut self, v: u16) {
        self.buf.extend_from_slice(&v.to_be_bytes());
    }

    pub fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_be_bytes());
    }

    pub fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_be_bytes());
    }

    pub fn bytes(&mut self, b: &[u8]) {
        self.buf.extend_from_slice(b);
    }

    pub fn scalar(&mut self, s: &Scalar) {
        self.bytes(&s.to_bytes());
    }

    pub fn g0(&mut self, p: &G0Element) {
        self.bytes(&p.to_bytes());
    }

    pub fn gt(&mut self, t: &GtElement) {
        self.bytes(&t.to_bytes());
    }

    /// Writes a 4-byte length followed by whatever `body` appends.
    pub fn section(&mut self, body: impl FnOnce(&mut Writer)) {
        let at = self.buf.len();
        self.u32(0);
        body(self);
        let len = (self.buf.len() - at - 4) as u32;
        self.buf[at..at + 4].copy_from_slice(&len.to_be_bytes());
    }
}

pub(crate) struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub fn new(data: &'a [u8]) -> Self {
        Reader { data, pos: 0 }
    }

    pub fn take(&mut self, n: usize) -> Result<&'a [u8], DecodeError> {
        let rest = self.data.len() - self.pos;
        if rest < n {
            return Err(DecodeError::Truncated {
                offset: self.pos,
                needed: n - rest,
            });
        }
        let out = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    pub fn u8(&mut self) -> Result<u8, DecodeError> {
        Ok(self.take(1)?[0])
    }

    pub fn u16(&mut self) -> Result<u16, DecodeError> {
        Ok(u16::from_be_bytes(self.take(2)?.try_into().unwrap()))
    }

    pub fn u32(&mut self) -> Result<u32, DecodeError> {
        Ok(u32::from_be_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub fn u64(&mut self) -> Result<u64, DecodeError> {
        Ok(u64::from_be_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn scalar(&mut self) -> Result<Scalar, DecodeError> {
        Ok(Scalar::from_bytes(self.take(SCALAR_LEN)?)?)
    }

    pub fn g0(&mut self) -> Result<G0Element, DecodeError> {
        Ok(G0Element::from_bytes(self.take(G0_LEN)?)?)
    }

    pub fn gt(&mut self) -> Result<GtElement, DecodeError> {
        Ok(GtElement::from_bytes(self.take(GT_LEN)?)?)
    }

    /// A length-prefixed section as its own reader.
    pub fn section(&mut self) -> Result<Reader<'a>, DecodeError> {
        let len = self.u32()? as usize;
        Ok(Reader::new(self.take(len)?))
    }

    pub fn rest(&self) -> &'a [u8] {
        &self.data[self.pos..]
    }

    pub fn remaining(&self) -> usize {
        self.data.len() - self.pos
    }

    pub fn finish(&self) -> Result<(), DecodeError> {
        match self.remaining() {
            0 => Ok(()),
            n => Err(DecodeError::Trailing(n)),
        }
    }
}
