//! File formats and run configuration.

mod config;
mod depth;
mod image;
mod tensor;

use std::path::Path;

pub use config::{ExternalFeatures, ProviderKind, RunConfig};
pub use depth::{
    decode_pfm, decode_pgm, decode_raw, encode_pfm, encode_pgm, encode_raw, read_depth, write_depth, RAW_MAGIC,
    RAW_VERSION,
};
pub use image::{
    colormap, decode_ppm, encode_ppm, error_heatmap, read_color, write_color, write_error_heatmap, Rgb8Image,
};
pub use tensor::{
    decode_tensors, encode_tensors, read_tensors, weights_from_tensors, weights_to_tensors, write_tensors, Tensor,
    TENSOR_MAGIC,
};

use crate::error::{Error, Result};

/// Largest accepted pixel count for any decoded image.
pub const MAX_PIXELS: usize = 1 << 28;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Raw,
    Pfm,
    Pgm,
    Ppm,
}

impl Format {
    pub fn from_path(path: &Path) -> Result<Self> {
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase)
            .unwrap_or_default();
        match ext.as_str() {
            "raw" => Ok(Format::Raw),
            "pfm" => Ok(Format::Pfm),
            "pgm" => Ok(Format::Pgm),
            "ppm" => Ok(Format::Ppm),
            _ => Err(Error::UnknownFormat(path.display().to_string())),
        }
    }
}

pub(crate) fn read_file(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

pub(crate) fn check_pixels(h: usize, w: usize) -> Result<usize> {
    if h == 0 || w == 0 {
        return Err(Error::Malformed(format!("empty image {h}x{w}")));
    }
    match h.checked_mul(w) {
        Some(n) if n <= MAX_PIXELS => Ok(n),
        _ => Err(Error::DimensionOverflow(format!("{h}x{w}"))),
    }
}

/// Byte reader shared by the decoders.
pub(crate) struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
    what: &'static str,
}

impl<'a> Cursor<'a> {
    pub fn new(bytes: &'a [u8], what: &'static str) -> Self {
        Self { bytes, pos: 0, what }
    }

    pub fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Truncated(format!("{} needs {n} more bytes at offset {}", self.what, self.pos)))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    pub fn u32_le(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    pub fn u64_le(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    /// Netpbm-style header token; skips whitespace and `#` comments.
    pub fn token(&mut self) -> Result<String> {
        loop {
            match self.bytes.get(self.pos) {
                Some(b) if b.is_ascii_whitespace() => self.pos += 1,
                Some(b'#') => {
                    while let Some(&b) = self.bytes.get(self.pos) {
                        self.pos += 1;
                        if b == b'\n' {
                            break;
                        }
                    }
                }
                Some(_) => break,
                None => return Err(Error::Truncated(format!("{} header", self.what))),
            }
        }
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(|b| !b.is_ascii_whitespace()) {
            self.pos += 1;
        }
        Ok(String::from_utf8_lossy(&self.bytes[start..self.pos]).into_owned())
    }

    pub fn number(&mut self) -> Result<usize> {
        let tok = self.token()?;
        tok.parse()
            .map_err(|_| Error::Malformed(format!("{} header field {tok:?} is not a number", self.what)))
    }

    /// The single whitespace byte ending a Netpbm header.
    pub fn single_whitespace(&mut self) -> Result<()> {
        match self.take(1)?[0] {
            b if b.is_ascii_whitespace() => Ok(()),
            _ => Err(Error::Malformed(format!("{} header not terminated", self.what))),
        }
    }

    pub fn finish(&self) -> Result<()> {
        if self.pos == self.bytes.len() {
            Ok(())
        } else {
            Err(Error::Malformed(format!(
                "{} has {} trailing bytes",
                self.what,
                self.bytes.len() - self.pos
            )))
        }
    }
}
