//! Image file I/O: grayscale PNG ingestion and a raw float64 format.
//!
//! The raw format ("IMGF") is the bit-exact interchange format for
//! intermediate results: a 16-byte little-endian header (magic `IMGF`,
//! format version, height, width as u32) followed by height*width f64
//! values in row-major order.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{CoreError, Result};
use crate::image::Image;

const MAGIC: &[u8; 4] = b"IMGF";
const VERSION: u32 = 1;

/// Writes an image in the raw float64 format.
pub fn write_raw(img: &Image, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(img.height() as u32).to_le_bytes())?;
    w.write_all(&(img.width() as u32).to_le_bytes())?;
    for v in img.as_slice() {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

/// Reads an image in the raw float64 format.
pub fn read_raw(path: &Path) -> Result<Image> {
    let mut r = BufReader::new(File::open(path)?);
    let mut header = [0u8; 16];
    r.read_exact(&mut header)?;
    if &header[0..4] != MAGIC {
        return Err(CoreError::Format(format!(
            "{}: bad magic, not an IMGF file",
            path.display()
        )));
    }
    let version = u32::from_le_bytes(header[4..8].try_into().unwrap());
    if version != VERSION {
        return Err(CoreError::Format(format!(
            "{}: unsupported IMGF version {version}",
            path.display()
        )));
    }
    let height = u32::from_le_bytes(header[8..12].try_into().unwrap()) as usize;
    let width = u32::from_le_bytes(header[12..16].try_into().unwrap()) as usize;
    let mut bytes = vec![0u8; height * width * 8];
    r.read_exact(&mut bytes)?;
    let data = bytes
        .chunks_exact(8)
        .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
        .collect();
    Image::from_vec(height, width, data)
}

/// Loads an 8- or 16-bit grayscale PNG and rescales it linearly so the
/// brightest pixel equals `photon_max`.
pub fn read_png_scaled(path: &Path, photon_max: f64) -> Result<Image> {
    let dyn_img = ::image::open(path)
        .map_err(|e| CoreError::Format(format!("{}: {e}", path.display())))?;
    let gray = dyn_img.into_luma16();
    let (w, h) = gray.dimensions();
    let img = Image::from_fn(h as usize, w as usize, |r, c| {
        gray.get_pixel(c as u32, r as u32).0[0] as f64
    });
    let max = img.max_value();
    if max <= 0.0 {
        return Err(CoreError::Format(format!(
            "{}: image has no positive pixels to rescale",
            path.display()
        )));
    }
    let mut out = img;
    out.scale_in_place(photon_max / max);
    Ok(out)
}

/// Writes an image as 16-bit grayscale PNG, mapping `[0, photon_max]` to the
/// full sample range (values clamped).
pub fn write_png(img: &Image, path: &Path, photon_max: f64) -> Result<()> {
    let mut buf = ::image::ImageBuffer::<::image::Luma<u16>, Vec<u16>>::new(
        img.width() as u32,
        img.height() as u32,
    );
    for r in 0..img.height() {
        for c in 0..img.width() {
            let v = (img.get(r, c) / photon_max).clamp(0.0, 1.0);
            buf.put_pixel(c as u32, r as u32, ::image::Luma([(v * 65535.0).round() as u16]));
        }
    }
    buf.save(path)
        .map_err(|e| CoreError::Format(format!("{}: {e}", path.display())))
}
