//! Little-endian byte helpers shared by model files and dataset caches.

use crate::error::Error;

pub(crate) struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    /// Added to reported offsets when `bytes` is a slice of a larger file.
    base: u64,
    error: fn(u64, String) -> Error,
}

impl<'a> Reader<'a> {
    pub fn new(bytes: &'a [u8], error: fn(u64, String) -> Error) -> Self {
        Self::at(bytes, 0, error)
    }

    pub fn at(bytes: &'a [u8], base: u64, error: fn(u64, String) -> Error) -> Self {
        Reader {
            bytes,
            pos: 0,
            base,
            error,
        }
    }

    pub fn offset(&self) -> usize {
        self.pos
    }

    pub fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }

    pub fn fail(&self, reason: impl Into<String>) -> Error {
        (self.error)(self.base + self.pos as u64, reason.into())
    }

    pub fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8], Error> {
        if self.bytes.len() - self.pos < n {
            return Err(self.fail(format!(
                "truncated: need {n} bytes for {what}, {} left",
                self.bytes.len() - self.pos
            )));
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    pub fn u32(&mut self, what: &str) -> Result<u32, Error> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    pub fn u64(&mut self, what: &str) -> Result<u64, Error> {
        let b = self.take(8, what)?;
        let mut a = [0u8; 8];
        a.copy_from_slice(b);
        Ok(u64::from_le_bytes(a))
    }

    pub fn f32s(&mut self, n: usize, what: &str) -> Result<Vec<f32>, Error> {
        let len = n
            .checked_mul(4)
            .ok_or_else(|| self.fail(format!("{what}: element count overflows")))?;
        let b = self.take(len, what)?;
        Ok(b.chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect())
    }

    pub fn string(&mut self, what: &str) -> Result<String, Error> {
        let len = self.u32(what)? as usize;
        let start = self.pos;
        let b = self.take(len, what)?;
        String::from_utf8(b.to_vec())
            .map_err(|_| (self.error)(self.base + start as u64, format!("{what} is not valid UTF-8")))
    }

    pub fn finish(&self) -> Result<(), Error> {
        if self.pos != self.bytes.len() {
            return Err(self.fail(format!(
                "{} unexpected trailing bytes",
                self.bytes.len() - self.pos
            )));
        }
        Ok(())
    }
}

pub(crate) fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

pub(crate) fn put_u64(out: &mut Vec<u8>, v: u64) {
    out.extend_from_slice(&v.to_le_bytes());
}

pub(crate) fn put_f32(out: &mut Vec<u8>, v: f32) {
    out.extend_from_slice(&v.to_le_bytes());
}

pub(crate) fn put_string(out: &mut Vec<u8>, s: &str) {
    put_u32(out, s.len() as u32);
    out.extend_from_slice(s.as_bytes());
}
