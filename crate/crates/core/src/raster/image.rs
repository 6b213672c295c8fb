use serde::{Deserialize, Serialize};

use super::RasterError;

/// Three-plane color raster with intensities in `[0, 1]`, stored interleaved row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ColorImage {
    width: usize,
    height: usize,
    data: Vec<[f32; 3]>,
}

impl ColorImage {
    pub fn new(width: usize, height: usize, data: Vec<[f32; 3]>) -> Result<Self, RasterError> {
        check_dims(width, height, data.len())?;
        if data.iter().flatten().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(RasterError::IntensityOutOfRange);
        }
        Ok(Self { width, height, data })
    }

    pub fn filled(width: usize, height: usize, rgb: [f32; 3]) -> Self {
        assert!(width >= 1 && height >= 1, "image must be at least 1x1");
        Self { width, height, data: vec![rgb; width * height] }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[[f32; 3]] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize) -> [f32; 3] {
        self.data[y * self.width + x]
    }

    /// Writes a pixel, clamping each channel into `[0, 1]`.
    pub fn set(&mut self, x: usize, y: usize, rgb: [f32; 3]) {
        self.data[y * self.width + x] = rgb.map(|v| v.clamp(0.0, 1.0));
    }

    /// Copies a `w`×`h` window starting at `(x0, y0)`; pixels outside the source are `fill`.
    pub fn crop_padded(&self, x0: usize, y0: usize, w: usize, h: usize, fill: [f32; 3]) -> Self {
        let mut out = Self::filled(w, h, fill);
        for y in 0..h.min(self.height.saturating_sub(y0)) {
            let src = (y0 + y) * self.width + x0;
            let n = w.min(self.width.saturating_sub(x0));
            out.data[y * w..y * w + n].copy_from_slice(&self.data[src..src + n]);
        }
        out
    }
}

/// Single-plane intensity raster in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<f32>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<f32>) -> Result<Self, RasterError> {
        check_dims(width, height, data.len())?;
        if data.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(RasterError::IntensityOutOfRange);
        }
        Ok(Self { width, height, data })
    }

    pub fn filled(width: usize, height: usize, value: f32) -> Self {
        assert!(width >= 1 && height >= 1, "image must be at least 1x1");
        Self { width, height, data: vec![value.clamp(0.0, 1.0); width * height] }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[f32] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.data[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: f32) {
        self.data[y * self.width + x] = v.clamp(0.0, 1.0);
    }
}

/// Binary raster; `true` marks foreground.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    data: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize, data: Vec<bool>) -> Result<Self, RasterError> {
        check_dims(width, height, data.len())?;
        Ok(Self { width, height, data })
    }

    pub fn empty(width: usize, height: usize) -> Self {
        Self { width, height, data: vec![false; width * height] }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self { width, height, data }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x]
    }

    /// Out-of-frame coordinates read as background.
    pub fn get_signed(&self, x: i64, y: i64) -> bool {
        x >= 0
            && y >= 0
            && (x as usize) < self.width
            && (y as usize) < self.height
            && self.data[y as usize * self.width + x as usize]
    }

    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.data[y * self.width + x] = v;
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&v| v).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.data.iter().any(|&v| v)
    }

    /// Foreground coordinates in row-major order.
    pub fn foreground(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.data
            .iter()
            .enumerate()
            .filter(|(_, &v)| v)
            .map(move |(i, _)| (i % self.width, i / self.width))
    }
}

fn check_dims(width: usize, height: usize, len: usize) -> Result<(), RasterError> {
    if width == 0 || height == 0 {
        return Err(RasterError::ZeroSize);
    }
    if len != width * height {
        return Err(RasterError::BufferSize { expected: width * height, got: len });
    }
    Ok(())
}

/// How color is collapsed to a single intensity plane.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GrayscaleMode {
    /// Rec.601 luma weights (0.299, 0.587, 0.114).
    #[default]
    Rec601,
    /// Unweighted channel mean.
    Mean,
}

pub const REC601: [f32; 3] = [0.299, 0.587, 0.114];

pub fn to_grayscale(img: &ColorImage) -> GrayImage {
    to_grayscale_with(img, GrayscaleMode::Rec601)
}

pub fn to_grayscale_with(img: &ColorImage, mode: GrayscaleMode) -> GrayImage {
    let w = match mode {
        GrayscaleMode::Rec601 => REC601,
        GrayscaleMode::Mean => [1.0 / 3.0; 3],
    };
    let data = img
        .data
        .iter()
        .map(|p| (w[0] * p[0] + w[1] * p[1] + w[2] * p[2]).clamp(0.0, 1.0))
        .collect();
    GrayImage { width: img.width, height: img.height, data }
}
