//! 8-bit PNG previews and frame ingestion.
//!
//! PNG is the lossy preview/exchange format; PFM stays authoritative.

use std::path::Path;

use image::{DynamicImage, GrayImage, ImageReader, RgbImage};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Write a 1- or 3-channel tensor as 8-bit PNG, clamping to [0,1].
pub fn write_png(path: &Path, t: &Tensor) -> Result<()> {
    let quant = |v: f64| (v.clamp(0.0, 1.0) * 255.0).round() as u8;
    let (h, w) = (t.height() as u32, t.width() as u32);
    let result = match t.channels() {
        1 => {
            let mut img = GrayImage::new(w, h);
            for (r, c, px) in img.enumerate_pixels_mut().map(|(x, y, p)| (y, x, p)) {
                px.0 = [quant(t.at(r as usize, c as usize, 0))];
            }
            img.save(path)
        }
        3 => {
            let mut img = RgbImage::new(w, h);
            for (r, c, px) in img.enumerate_pixels_mut().map(|(x, y, p)| (y, x, p)) {
                px.0 = [
                    quant(t.at(r as usize, c as usize, 0)),
                    quant(t.at(r as usize, c as usize, 1)),
                    quant(t.at(r as usize, c as usize, 2)),
                ];
            }
            img.save(path)
        }
        n => {
            return Err(Error::contract(format!(
                "png preview supports 1 or 3 channels, got {n}"
            )))
        }
    };
    result.map_err(|e| Error::format(path, format!("png encode failed: {e}")))
}

/// Read a PNG into a [0,1] tensor (grayscale stays 1-channel, everything
/// else becomes RGB).
pub fn read_png(path: &Path) -> Result<Tensor> {
    let img = ImageReader::open(path)
        .map_err(|e| Error::io(path, e))?
        .decode()
        .map_err(|e| Error::format(path, format!("png decode failed: {e}")))?;
    let t = match img {
        DynamicImage::ImageLuma8(g) => {
            let (w, h) = (g.width() as usize, g.height() as usize);
            Tensor::from_fn(h, w, 1, |r, c, _| {
                g.get_pixel(c as u32, r as u32).0[0] as f64 / 255.0
            })
        }
        other => {
            let rgb = other.to_rgb8();
            let (w, h) = (rgb.width() as usize, rgb.height() as usize);
            Tensor::from_fn(h, w, 3, |r, c, ch| {
                rgb.get_pixel(c as u32, r as u32).0[ch] as f64 / 255.0
            })
        }
    };
    Ok(t)
}
