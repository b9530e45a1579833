//! Framing shared by the binary formats: 4-byte magic, little-endian `u32`
//! header length, JSON header, then raw little-endian numeric blocks.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};

pub(crate) struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    pub fn new<H: Serialize>(magic: &[u8; 4], header: &H) -> Self {
        let json = serde_json::to_vec(header).expect("headers serialise");
        let mut buf = Vec::with_capacity(8 + json.len());
        buf.extend_from_slice(magic);
        buf.extend_from_slice(&(json.len() as u32).to_le_bytes());
        buf.extend_from_slice(&json);
        Self { buf }
    }

    pub fn f64s(&mut self, xs: &[f64]) {
        self.buf.reserve(xs.len() * 8);
        for x in xs {
            self.buf.extend_from_slice(&x.to_le_bytes());
        }
    }

    pub fn f32s(&mut self, xs: &[f64]) {
        self.buf.reserve(xs.len() * 4);
        for &x in xs {
            self.buf.extend_from_slice(&(x as f32).to_le_bytes());
        }
    }

    pub fn finish(self) -> Vec<u8> {
        self.buf
    }
}

pub(crate) struct Reader<'a> {
    path: PathBuf,
    rest: &'a [u8],
}

impl<'a> Reader<'a> {
    pub fn open<H: DeserializeOwned>(path: &Path, bytes: &'a [u8], magic: &[u8; 4]) -> Result<(H, Self)> {
        if bytes.len() < 8 || &bytes[..4] != magic {
            return Err(Error::format(path, format!("not a {} file", String::from_utf8_lossy(magic))));
        }
        let len = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
        let json = bytes.get(8..8 + len).ok_or_else(|| Error::format(path, "truncated header"))?;
        let header = serde_json::from_slice(json).map_err(|e| Error::json(path, e))?;
        Ok((header, Self { path: path.to_path_buf(), rest: &bytes[8 + len..] }))
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.rest.len() < n {
            return Err(Error::format(&self.path, "truncated data block"));
        }
        let (head, tail) = self.rest.split_at(n);
        self.rest = tail;
        Ok(head)
    }

    pub fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        Ok(self.take(n * 8)?.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
    }

    pub fn f32s(&mut self, n: usize) -> Result<Vec<f64>> {
        Ok(self.take(n * 4)?.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64).collect())
    }

    pub fn finish(self) -> Result<()> {
        if self.rest.is_empty() {
            Ok(())
        } else {
            Err(Error::format(&self.path, format!("{} trailing bytes", self.rest.len())))
        }
    }
}
