//! Binary 8-bit PGM (`P5`) and PPM (`P6`) images.
//!
//! Samples map to `[0, 1]` as `byte / 255`; writing rounds back, so a read
//! followed by a write reproduces the original bytes.

use std::path::Path;

use crate::error::{Error, Result};
use crate::image::dims;
use crate::tensor::Tensor;

fn format_error(offset: usize, detail: impl Into<String>) -> Error {
    Error::Format {
        what: "PNM image",
        offset: offset as u64,
        detail: detail.into(),
    }
}

struct Header<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Header<'_> {
    fn skip_space(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while self.bytes.get(self.pos).is_some_and(|&b| b != b'\n') {
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        self.skip_space();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| format_error(start, format!("expected {what}")))
    }
}

pub fn parse_pnm(bytes: &[u8]) -> Result<Tensor> {
    let channels = match bytes.get(..2) {
        Some(b"P5") => 1,
        Some(b"P6") => 3,
        _ => return Err(format_error(0, "expected P5 or P6 magic")),
    };
    let mut h = Header { bytes, pos: 2 };
    let width = h.number("width")?;
    let height = h.number("height")?;
    h.skip_space();
    let maxval_at = h.pos;
    let maxval = h.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(format_error(2, format!("zero image size {width}x{height}")));
    }
    if maxval != 255 {
        return Err(format_error(
            maxval_at,
            format!("only 8-bit images (maxval 255) are supported, got {maxval}"),
        ));
    }
    match bytes.get(h.pos) {
        Some(b) if b.is_ascii_whitespace() => h.pos += 1,
        _ => return Err(format_error(h.pos, "missing whitespace after header")),
    }
    let n = width * height * channels;
    let data = &bytes[h.pos..];
    if data.len() < n {
        return Err(format_error(
            bytes.len(),
            format!("pixel data truncated: {} of {n} bytes", data.len()),
        ));
    }
    if data.len() > n {
        return Err(format_error(h.pos + n, format!("{} trailing bytes", data.len() - n)));
    }
    Tensor::new(
        vec![height, width, channels],
        data.iter().map(|&b| b as f64 / 255.0).collect(),
    )
}

pub fn to_byte(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Encodes a 1- or 3-channel image; values are clamped to `[0, 1]`.
pub fn encode_pnm(image: &Tensor) -> Result<Vec<u8>> {
    let (h, w, c) = dims(image)?;
    let magic = match c {
        1 => "P5",
        3 => "P6",
        _ => return Err(Error::shape("PNM image", format!("{c} channels; need 1 or 3"))),
    };
    let mut out = format!("{magic}\n{w} {h}\n255\n").into_bytes();
    out.extend(image.data().iter().map(|&v| to_byte(v)));
    Ok(out)
}

pub fn load_pnm(path: impl AsRef<Path>) -> Result<Tensor> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::file(path, e))?;
    parse_pnm(&bytes).map_err(|e| match e {
        Error::Format { what, offset, detail } => Error::Format {
            what,
            offset,
            detail: format!("{}: {detail}", path.display()),
        },
        other => other,
    })
}

pub fn save_pnm(path: impl AsRef<Path>, image: &Tensor) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_pnm(image)?).map_err(|e| Error::file(path, e))
}
