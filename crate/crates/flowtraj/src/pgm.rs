//! Minimal 8-bit binary PGM (P5) reader/writer. Used for foreground masks
//! (nonzero = foreground) and emitted label maps.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum PgmError {
    #[error("not a P5 pgm file")]
    BadSignature,
    #[error("malformed header: {0}")]
    BadHeader(&'static str),
    #[error("maxval {0} unsupported (only 8-bit)")]
    BadMaxval(u32),
    #[error("truncated pixel data: need {expected}, have {actual}")]
    Truncated { expected: usize, actual: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize) -> GrayImage {
        GrayImage {
            width,
            height,
            pixels: vec![0; width * height],
        }
    }

    pub fn at(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: u8) {
        self.pixels[y * self.width + x] = v;
    }

    /// Foreground test for mask usage: any nonzero pixel is foreground.
    pub fn is_foreground(&self, x: usize, y: usize) -> bool {
        self.at(x, y) != 0
    }
}

struct Tokens<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Tokens<'a> {
    // Whitespace-delimited header fields, with `#` comments to end of line.
    fn next(&mut self) -> Option<&'a [u8]> {
        loop {
            while self.pos < self.data.len() && self.data[self.pos].is_ascii_whitespace() {
                self.pos += 1;
            }
            if self.pos < self.data.len() && self.data[self.pos] == b'#' {
                while self.pos < self.data.len() && self.data[self.pos] != b'\n' {
                    self.pos += 1;
                }
                continue;
            }
            break;
        }
        if self.pos >= self.data.len() {
            return None;
        }
        let start = self.pos;
        while self.pos < self.data.len() && !self.data[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        Some(&self.data[start..self.pos])
    }

    fn next_u32(&mut self, what: &'static str) -> Result<u32, PgmError> {
        let tok = self.next().ok_or(PgmError::BadHeader(what))?;
        std::str::from_utf8(tok)
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or(PgmError::BadHeader(what))
    }
}

pub fn parse_pgm(bytes: &[u8]) -> Result<GrayImage, PgmError> {
    let mut toks = Tokens {
        data: bytes,
        pos: 0,
    };
    match toks.next() {
        Some(b"P5") => {}
        _ => return Err(PgmError::BadSignature),
    }
    let width = toks.next_u32("width")? as usize;
    let height = toks.next_u32("height")? as usize;
    let maxval = toks.next_u32("maxval")?;
    if width == 0 || height == 0 {
        return Err(PgmError::BadHeader("zero dimension"));
    }
    if maxval == 0 || maxval > 255 {
        return Err(PgmError::BadMaxval(maxval));
    }
    // Exactly one whitespace byte separates the header from the raster.
    let start = toks.pos + 1;
    let expected = width
        .checked_mul(height)
        .ok_or(PgmError::BadHeader("dimension overflow"))?;
    let avail = bytes.len().saturating_sub(start);
    if avail < expected {
        return Err(PgmError::Truncated {
            expected,
            actual: avail,
        });
    }
    Ok(GrayImage {
        width,
        height,
        pixels: bytes[start..start + expected].to_vec(),
    })
}

pub fn write_pgm(img: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend_from_slice(&img.pixels);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let mut img = GrayImage::new(3, 2);
        img.set(0, 0, 255);
        img.set(2, 1, 7);
        let bytes = write_pgm(&img);
        let back = parse_pgm(&bytes).unwrap();
        assert_eq!(back, img);
        assert!(back.is_foreground(0, 0));
        assert!(!back.is_foreground(1, 0));
    }

    #[test]
    fn rejects_garbage() {
        assert!(parse_pgm(b"P6\n1 1\n255\nx").is_err());
        assert!(parse_pgm(b"P5\n4 4\n255\nxy").is_err());
        assert!(parse_pgm(b"P5\n0 1\n255\n").is_err());
        assert!(parse_pgm(b"").is_err());
    }

    #[test]
    fn comments_in_header() {
        let bytes = b"P5\n# a comment\n2 1\n255\n\x01\x00";
        let img = parse_pgm(bytes).unwrap();
        assert_eq!(img.at(0, 0), 1);
    }
}
