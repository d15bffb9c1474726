//! Portable float map I/O.
//!
//! `Pf` carries one channel, `PF` three; samples are 32-bit IEEE-754
//! scanlines ordered bottom-to-top, endianness encoded in the sign of the
//! scale line. Values written from f64 tensors are rounded to f32 once; a
//! read therefore reproduces a written file bit-exactly.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub fn write_pfm(path: &Path, t: &Tensor) -> Result<()> {
    let channels = t.channels();
    let header = match channels {
        1 => "Pf",
        3 => "PF",
        n => {
            return Err(Error::contract(format!(
                "pfm supports 1 or 3 channels, got {n}"
            )))
        }
    };
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    // scale -1.0 = little-endian samples
    write!(out, "{header}\n{} {}\n-1.0\n", t.width(), t.height())
        .map_err(|e| Error::io(path, e))?;
    let w = t.width();
    let mut scanline = Vec::with_capacity(w * channels * 4);
    for row in (0..t.height()).rev() {
        scanline.clear();
        for col in 0..w {
            for ch in 0..channels {
                scanline.extend_from_slice(&(t.at(row, col, ch) as f32).to_le_bytes());
            }
        }
        out.write_all(&scanline).map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

pub fn read_pfm(path: &Path) -> Result<Tensor> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = BufReader::new(file);
    let mut bytes = Vec::new();
    reader
        .read_to_end(&mut bytes)
        .map_err(|e| Error::io(path, e))?;

    let bad = |reason: &str| Error::format(path, reason);
    let mut pos = 0usize;
    let token = |pos: &mut usize| -> Result<String> {
        while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        let start = *pos;
        while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if start == *pos {
            return Err(bad("truncated header"));
        }
        let tok = std::str::from_utf8(&bytes[start..*pos])
            .map_err(|_| bad("non-ascii header"))?
            .to_string();
        // consume the single whitespace terminating the token
        *pos += 1;
        Ok(tok)
    };

    let magic = token(&mut pos)?;
    let channels = match magic.as_str() {
        "Pf" => 1usize,
        "PF" => 3usize,
        _ => return Err(bad("expected Pf or PF magic")),
    };
    let width: usize = token(&mut pos)?
        .parse()
        .map_err(|_| bad("bad width"))?;
    let height: usize = token(&mut pos)?
        .parse()
        .map_err(|_| bad("bad height"))?;
    let scale: f64 = token(&mut pos)?
        .parse()
        .map_err(|_| bad("bad scale"))?;
    if width == 0 || height == 0 {
        return Err(bad("zero dimensions"));
    }
    let little_endian = scale < 0.0;

    let need = width * height * channels * 4;
    if bytes.len() < pos + need {
        return Err(bad(&format!(
            "expected {need} sample bytes, found {}",
            bytes.len().saturating_sub(pos)
        )));
    }
    let mut data = vec![0.0f64; width * height * channels];
    for row_from_bottom in 0..height {
        let row = height - 1 - row_from_bottom;
        for col in 0..width {
            for ch in 0..channels {
                let off = pos + ((row_from_bottom * width + col) * channels + ch) * 4;
                let raw: [u8; 4] = bytes[off..off + 4].try_into().unwrap();
                let v = if little_endian {
                    f32::from_le_bytes(raw)
                } else {
                    f32::from_be_bytes(raw)
                };
                if !v.is_finite() {
                    return Err(bad("non-finite sample"));
                }
                data[(row * width + col) * channels + ch] = v as f64;
            }
        }
    }
    Tensor::new(height, width, channels, data)
}
