//! Binary Netpbm: P6 (RGB) read/write, P5 (gray) read.

use super::RawImage;
use crate::error::{Error, Result};

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn skip_whitespace_and_comments(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while let Some(&c) = self.bytes.get(self.pos) {
                    self.pos += 1;
                    if c == b'\n' || c == b'\r' {
                        break;
                    }
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        self.skip_whitespace_and_comments();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::CorruptImage(format!("bad PPM header field `{what}`")))
    }
}

pub fn decode_ppm(bytes: &[u8]) -> Result<RawImage> {
    let channels = match bytes.get(..2) {
        Some(b"P6") => 3,
        Some(b"P5") => 1,
        _ => return Err(Error::UnsupportedFormat("not a binary PPM/PGM file".into())),
    };
    let mut cur = Cursor { bytes, pos: 2 };
    let width = cur.number("width")?;
    let height = cur.number("height")?;
    let maxval = cur.number("maxval")?;
    if maxval != 255 {
        return Err(Error::UnsupportedFormat(format!("PPM maxval {maxval} (only 255 is supported)")));
    }
    if width == 0 || height == 0 {
        return Err(Error::CorruptImage(format!("zero-sized PPM {width}x{height}")));
    }
    // exactly one whitespace byte separates the header from the raster
    match bytes.get(cur.pos) {
        Some(b) if b.is_ascii_whitespace() => cur.pos += 1,
        _ => return Err(Error::CorruptImage("missing raster separator".into())),
    }
    let body = &bytes[cur.pos..];
    let needed = width * height * channels;
    if body.len() < needed {
        return Err(Error::CorruptImage(format!(
            "truncated raster: expected {needed} bytes, found {}",
            body.len()
        )));
    }
    let pixels = if channels == 3 {
        body[..needed].chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect()
    } else {
        body[..needed].iter().map(|&g| [g, g, g]).collect()
    };
    RawImage::new(width, height, pixels)
}

pub fn encode_ppm(img: &RawImage) -> Vec<u8> {
    let header = format!("P6\n{} {}\n255\n", img.width(), img.height());
    let mut out = Vec::with_capacity(header.len() + img.pixels().len() * 3);
    out.extend_from_slice(header.as_bytes());
    for p in img.pixels() {
        out.extend_from_slice(p);
    }
    out
}
