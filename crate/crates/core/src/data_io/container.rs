//! Framing shared by the binary formats: 4-byte magic, little-endian `u32`
//! version, payload, CRC32 of the payload.

use crate::architecture::IndexSet;
use crate::error::{Error, Result};

pub(crate) fn magic_u32(magic: &[u8; 4]) -> u32 {
    u32::from_be_bytes(*magic)
}

pub(crate) fn frame(magic: &[u8; 4], version: u32, payload: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(payload.len() + 12);
    out.extend_from_slice(magic);
    out.extend_from_slice(&version.to_le_bytes());
    out.extend_from_slice(payload);
    out.extend_from_slice(&crc32fast::hash(payload).to_le_bytes());
    out
}

/// Checks magic, version and checksum; returns the payload.
pub(crate) fn unframe<'a>(bytes: &'a [u8], magic: &[u8; 4], version: u32) -> Result<&'a [u8]> {
    if bytes.len() < 4 {
        return Err(Error::TruncatedFile(format!("{} bytes, no magic", bytes.len())));
    }
    let found: [u8; 4] = bytes[..4].try_into().expect("four bytes");
    if &found != magic {
        return Err(Error::BadMagic {
            expected: magic_u32(magic),
            found: magic_u32(&found),
        });
    }
    if bytes.len() < 12 {
        return Err(Error::TruncatedFile(format!("{} bytes, header incomplete", bytes.len())));
    }
    let v = u32::from_le_bytes(bytes[4..8].try_into().expect("four bytes"));
    if v != version {
        return Err(Error::VersionUnsupported {
            found: v,
            supported: version,
        });
    }
    let (payload, trailer) = bytes[8..].split_at(bytes.len() - 12);
    let stored = u32::from_le_bytes(trailer.try_into().expect("four bytes"));
    let computed = crc32fast::hash(payload);
    if stored != computed {
        return Err(Error::ChecksumMismatch { stored, computed });
    }
    Ok(payload)
}

#[derive(Default)]
pub(crate) struct Encoder {
    pub buf: Vec<u8>,
}

impl Encoder {
    pub fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    pub fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn usize(&mut self, v: usize) {
        self.u64(v as u64);
    }

    pub fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn str(&mut self, s: &str) {
        self.usize(s.len());
        self.buf.extend_from_slice(s.as_bytes());
    }

    pub fn set(&mut self, s: &IndexSet) {
        self.usize(s.len());
        for k in s.iter() {
            self.usize(k);
        }
    }
}

pub(crate) struct Decoder<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Decoder<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::TruncatedFile(format!(
                "needed {n} bytes at offset {}, {} left",
                self.pos,
                self.buf.len() - self.pos
            )));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("eight bytes")))
    }

    /// A length or index; bounded by the remaining payload to reject garbage early.
    pub fn usize(&mut self) -> Result<usize> {
        let v = self.u64()?;
        usize::try_from(v).map_err(|_| Error::TruncatedFile(format!("length {v} does not fit in memory")))
    }

    pub fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("eight bytes")))
    }

    pub fn str(&mut self) -> Result<String> {
        let n = self.usize()?;
        let bytes = self.take(n)?;
        String::from_utf8(bytes.to_vec()).map_err(|e| Error::Config(format!("invalid UTF-8 in header: {e}")))
    }

    pub fn set(&mut self) -> Result<IndexSet> {
        let n = self.usize()?;
        if n > (self.buf.len() - self.pos) / 8 {
            return Err(Error::TruncatedFile(format!("index set of {n} entries exceeds payload")));
        }
        (0..n).map(|_| self.usize()).collect()
    }

    pub fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        if n > (self.buf.len() - self.pos) / 8 {
            return Err(Error::TruncatedFile(format!("{n} floats exceed payload")));
        }
        (0..n).map(|_| self.f64()).collect()
    }

    pub fn finish(&self) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(Error::CountMismatch(format!(
                "{} trailing bytes after payload",
                self.buf.len() - self.pos
            )));
        }
        Ok(())
    }
}
