//! Little-endian binary container helpers shared by the corpus, knowledge
//! base, and checkpoint file formats. Each file starts with a 4-byte magic
//! and a `u16` version; payloads are length-prefixed so corrupt files fail
//! loudly instead of misparsing.

use crate::error::{Error, Result};

pub struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    pub fn new(magic: &[u8; 4], version: u16) -> Self {
        let mut buf = Vec::new();
        buf.extend_from_slice(magic);
        buf.extend_from_slice(&version.to_le_bytes());
        Writer { buf }
    }

    pub fn u16(&mut self, v: u16) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
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

    pub fn f64_slice(&mut self, v: &[f64]) {
        self.usize(v.len());
        for &x in v {
            self.f64(x);
        }
    }

    /// Raw bytes without a length prefix; pair with `Reader::take_bytes`.
    pub fn bytes(&mut self, v: &[u8]) {
        self.buf.extend_from_slice(v);
    }

    pub fn usize_slice(&mut self, v: &[usize]) {
        self.usize(v.len());
        for &x in v {
            self.u64(x as u64);
        }
    }

    pub fn finish(self) -> Vec<u8> {
        self.buf
    }
}

pub struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    /// Opens a container, checking magic and version.
    pub fn open(buf: &'a [u8], magic: &[u8; 4], expect_version: u16) -> Result<Self> {
        if buf.len() < 6 {
            return Err(Error::decode("file too short for header"));
        }
        if &buf[0..4] != magic {
            return Err(Error::Decode(format!(
                "bad magic {:?}, expected {:?}",
                &buf[0..4],
                magic
            )));
        }
        let version = u16::from_le_bytes([buf[4], buf[5]]);
        if version != expect_version {
            return Err(Error::Decode(format!(
                "unsupported version {version}, expected {expect_version}"
            )));
        }
        Ok(Reader { buf, pos: 6 })
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::decode("unexpected end of file"));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    /// Raw byte run of known length.
    pub fn take_bytes(&mut self, n: usize) -> Result<&'a [u8]> {
        self.take(n)
    }

    pub fn u16(&mut self) -> Result<u16> {
        let s = self.take(2)?;
        Ok(u16::from_le_bytes([s[0], s[1]]))
    }

    pub fn u32(&mut self) -> Result<u32> {
        let s = self.take(4)?;
        Ok(u32::from_le_bytes(s.try_into().unwrap()))
    }

    pub fn u64(&mut self) -> Result<u64> {
        let s = self.take(8)?;
        Ok(u64::from_le_bytes(s.try_into().unwrap()))
    }

    pub fn usize(&mut self) -> Result<usize> {
        Ok(self.u64()? as usize)
    }

    pub fn f64(&mut self) -> Result<f64> {
        let s = self.take(8)?;
        Ok(f64::from_le_bytes(s.try_into().unwrap()))
    }

    pub fn f64_vec(&mut self) -> Result<Vec<f64>> {
        let n = self.usize()?;
        if n > self.buf.len() / 8 + 1 {
            return Err(Error::decode("implausible vector length"));
        }
        let mut v = Vec::with_capacity(n);
        for _ in 0..n {
            v.push(self.f64()?);
        }
        Ok(v)
    }

    pub fn usize_vec(&mut self) -> Result<Vec<usize>> {
        let n = self.usize()?;
        if n > self.buf.len() / 8 + 1 {
            return Err(Error::decode("implausible vector length"));
        }
        let mut v = Vec::with_capacity(n);
        for _ in 0..n {
            v.push(self.u64()? as usize);
        }
        Ok(v)
    }

    pub fn done(&self) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(Error::decode("trailing bytes after payload"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let mut w = Writer::new(b"TEST", 3);
        w.u32(7);
        w.f64_slice(&[1.5, -2.25]);
        w.usize_slice(&[4, 5, 6]);
        let bytes = w.finish();

        let mut r = Reader::open(&bytes, b"TEST", 3).unwrap();
        assert_eq!(r.u32().unwrap(), 7);
        assert_eq!(r.f64_vec().unwrap(), vec![1.5, -2.25]);
        assert_eq!(r.usize_vec().unwrap(), vec![4, 5, 6]);
        r.done().unwrap();
    }

    #[test]
    fn bad_magic_rejected() {
        let w = Writer::new(b"GOOD", 1);
        let bytes = w.finish();
        assert!(Reader::open(&bytes, b"WANT", 1).is_err());
    }

    #[test]
    fn bad_version_rejected() {
        let w = Writer::new(b"GOOD", 2);
        let bytes = w.finish();
        assert!(Reader::open(&bytes, b"GOOD", 1).is_err());
    }
}
