//! PNG input/output. 8-bit channels map to `[0, 1]` by `/255`.

use std::path::Path;

use image::{ImageBuffer, Luma, Rgb};

use super::{BinaryMask, ColorImage, GrayImage, RasterError};

fn io_err(e: impl std::fmt::Display) -> RasterError {
    RasterError::Io(e.to_string())
}

pub fn read_color(path: &Path) -> Result<ColorImage, RasterError> {
    let img = image::open(path).map_err(io_err)?.to_rgb8();
    let (w, h) = (img.width() as usize, img.height() as usize);
    let data = img
        .pixels()
        .map(|p| p.0.map(|v| f32::from(v) / 255.0))
        .collect();
    ColorImage::new(w, h, data)
}

pub fn write_color(path: &Path, img: &ColorImage) -> Result<(), RasterError> {
    let buf: ImageBuffer<Rgb<u8>, Vec<u8>> =
        ImageBuffer::from_fn(img.width() as u32, img.height() as u32, |x, y| {
            Rgb(img.get(x as usize, y as usize).map(quantize))
        });
    buf.save(path).map_err(io_err)
}

pub fn write_gray(path: &Path, img: &GrayImage) -> Result<(), RasterError> {
    let buf: ImageBuffer<Luma<u8>, Vec<u8>> =
        ImageBuffer::from_fn(img.width() as u32, img.height() as u32, |x, y| {
            Luma([quantize(img.get(x as usize, y as usize))])
        });
    buf.save(path).map_err(io_err)
}

/// Binary mask as 0/255 grayscale.
pub fn write_mask(path: &Path, m: &BinaryMask) -> Result<(), RasterError> {
    let buf: ImageBuffer<Luma<u8>, Vec<u8>> =
        ImageBuffer::from_fn(m.width() as u32, m.height() as u32, |x, y| {
            Luma([if m.get(x as usize, y as usize) { 255 } else { 0 }])
        });
    buf.save(path).map_err(io_err)
}

/// Any non-zero pixel is foreground.
pub fn read_mask(path: &Path) -> Result<BinaryMask, RasterError> {
    let img = image::open(path).map_err(io_err)?.to_luma16();
    let (w, h) = (img.width() as usize, img.height() as usize);
    BinaryMask::new(w, h, img.pixels().map(|p| p.0[0] != 0).collect())
}

/// 16-bit label image: 0 is background, `k` is instance `k`.
pub fn write_labels(path: &Path, width: usize, height: usize, labels: &[u16]) -> Result<(), RasterError> {
    if labels.len() != width * height {
        return Err(RasterError::BufferSize { expected: width * height, got: labels.len() });
    }
    let buf: ImageBuffer<Luma<u16>, Vec<u16>> =
        ImageBuffer::from_raw(width as u32, height as u32, labels.to_vec())
            .ok_or(RasterError::ZeroSize)?;
    buf.save(path).map_err(io_err)
}

/// Reads a label image; 8-bit inputs keep their raw values rather than being rescaled.
pub fn read_labels(path: &Path) -> Result<(usize, usize, Vec<u16>), RasterError> {
    let img = image::open(path).map_err(io_err)?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let raw = match img {
        image::DynamicImage::ImageLuma16(b) => b.into_raw(),
        other => other.to_luma8().into_raw().into_iter().map(u16::from).collect(),
    };
    Ok((w, h, raw))
}

fn quantize(v: f32) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}
