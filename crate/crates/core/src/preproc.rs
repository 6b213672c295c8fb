//! Binarization, background exclusion, region labelling and solidity-based
//! classification into isolated droplets and overlapped candidates.

use serde::{Deserialize, Serialize};

use crate::raster::{
    compute_shape_features, label_components, to_grayscale_with, BinaryMask, ColorImage,
    Connectivity, GrayImage, GrayscaleMode, InstanceMask, PixelBox, RasterError, ShapeFeatures,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PreprocError {
    #[error("otsu threshold needs at least two distinct intensity levels")]
    ConstantImage,
    #[error(transparent)]
    Raster(#[from] RasterError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BinarizeMethod {
    Otsu,
    /// Foreground is intensity `>= t`.
    Fixed(f64),
    /// Foreground is histogram bin `>= t`, e.g. an Otsu bin chosen elsewhere.
    Bin(usize),
}

/// A binarization decision, possibly made once for a larger image.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Threshold {
    Method(BinarizeMethod),
    /// Uniform or low-contrast input.
    NoForeground,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodKind {
    #[default]
    Otsu,
    Fixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BinarizeConfig {
    pub method: MethodKind,
    /// Used when `method` is `fixed`.
    pub threshold: f64,
    pub grayscale: GrayscaleMode,
    /// With otsu, an image whose two class means differ by less than this
    /// has no foreground.
    pub min_contrast: f64,
}

impl Default for BinarizeConfig {
    fn default() -> Self {
        Self { method: MethodKind::Otsu, threshold: 0.5, grayscale: GrayscaleMode::Rec601, min_contrast: 0.1 }
    }
}

impl BinarizeConfig {
    pub fn method(&self) -> BinarizeMethod {
        match self.method {
            MethodKind::Otsu => BinarizeMethod::Otsu,
            MethodKind::Fixed => BinarizeMethod::Fixed(self.threshold),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackgroundConfig {
    /// Border-touching components larger than this fraction of the image are glass.
    pub min_area_frac: f64,
}

impl Default for BackgroundConfig {
    fn default() -> Self {
        Self { min_area_frac: 0.05 }
    }
}

/// Histogram bin of an intensity: `round(v · 255)`.
pub fn intensity_bin(v: f32) -> usize {
    ((v.clamp(0.0, 1.0) * 255.0).round() as usize).min(255)
}

pub fn histogram(g: &GrayImage) -> [u64; 256] {
    let mut h = [0u64; 256];
    for &v in g.pixels() {
        h[intensity_bin(v)] += 1;
    }
    h
}

/// Otsu threshold bin `t` in `1..=255`: foreground is `bin >= t`. Maximizes
/// the between-class variance; the lowest maximizing `t` wins ties.
pub fn otsu_bin(hist: &[u64; 256]) -> Option<usize> {
    let total: u64 = hist.iter().sum();
    if hist.iter().filter(|&&c| c > 0).count() < 2 {
        return None;
    }
    let total_f = total as f64;
    let sum_all: f64 = hist.iter().enumerate().map(|(i, &c)| i as f64 * c as f64).sum();
    let (mut w0, mut sum0) = (0.0f64, 0.0f64);
    let mut best = (f64::NEG_INFINITY, 0usize);
    for t in 1..256 {
        w0 += hist[t - 1] as f64;
        sum0 += (t - 1) as f64 * hist[t - 1] as f64;
        let w1 = total_f - w0;
        if w0 == 0.0 || w1 == 0.0 {
            continue;
        }
        let mu0 = sum0 / w0;
        let mu1 = (sum_all - sum0) / w1;
        let between = w0 * w1 * (mu0 - mu1) * (mu0 - mu1) / (total_f * total_f);
        if between > best.0 {
            best = (between, t);
        }
    }
    Some(best.1)
}

/// Mean intensities of the classes below and at-or-above bin `t`.
pub fn class_means(hist: &[u64; 256], t: usize) -> Option<(f64, f64)> {
    let (mut n0, mut s0, mut n1, mut s1) = (0u64, 0.0f64, 0u64, 0.0f64);
    for (i, &c) in hist.iter().enumerate() {
        if i < t {
            n0 += c;
            s0 += i as f64 * c as f64;
        } else {
            n1 += c;
            s1 += i as f64 * c as f64;
        }
    }
    (n0 > 0 && n1 > 0).then(|| (s0 / n0 as f64 / 255.0, s1 / n1 as f64 / 255.0))
}

/// Otsu threshold as an intensity in `(0, 1]`.
pub fn otsu_threshold(g: &GrayImage) -> Result<f64, PreprocError> {
    otsu_bin(&histogram(g)).map(|t| t as f64 / 255.0).ok_or(PreprocError::ConstantImage)
}

/// Bright pixels are foreground: droplets are unstained.
pub fn binarize(g: &GrayImage, method: BinarizeMethod) -> Result<BinaryMask, PreprocError> {
    let fg: Vec<bool> = match method {
        BinarizeMethod::Otsu => {
            let t = otsu_bin(&histogram(g)).ok_or(PreprocError::ConstantImage)?;
            g.pixels().iter().map(|&v| intensity_bin(v) >= t).collect()
        }
        BinarizeMethod::Fixed(t) => g.pixels().iter().map(|&v| f64::from(v) >= t).collect(),
        BinarizeMethod::Bin(t) => g.pixels().iter().map(|&v| intensity_bin(v) >= t).collect(),
    };
    Ok(BinaryMask::new(g.width(), g.height(), fg)?)
}

/// Removes foreground components that touch the image border and cover more
/// than `min_area_frac` of the image (bare glass around the tissue).
pub fn exclude_background(b: &BinaryMask, g: &GrayImage, min_area_frac: f64) -> BinaryMask {
    debug_assert_eq!((b.width(), b.height()), (g.width(), g.height()));
    background_components(b, min_area_frac).0
}

/// Returns the pruned mask and the removed pixels.
fn background_components(b: &BinaryMask, min_area_frac: f64) -> (BinaryMask, BinaryMask) {
    let (w, h) = (b.width(), b.height());
    let labels = label_components(b, Connectivity::Eight);
    let n = labels.count as usize;
    let mut area = vec![0usize; n + 1];
    let mut border = vec![false; n + 1];
    for y in 0..h {
        for x in 0..w {
            let l = labels.get(x, y) as usize;
            if l > 0 {
                area[l] += 1;
                if x == 0 || y == 0 || x + 1 == w || y + 1 == h {
                    border[l] = true;
                }
            }
        }
    }
    let limit = min_area_frac * (w * h) as f64;
    let drop: Vec<bool> = (0..=n).map(|l| l > 0 && border[l] && area[l] as f64 > limit).collect();
    let mut kept = b.clone();
    let mut removed = BinaryMask::empty(w, h);
    for y in 0..h {
        for x in 0..w {
            if drop[labels.get(x, y) as usize] {
                kept.set(x, y, false);
                removed.set(x, y, true);
            }
        }
    }
    (kept, removed)
}

/// A labelled foreground region with its shape features.
#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    pub mask: InstanceMask,
    pub features: ShapeFeatures,
}

impl Region {
    pub fn new(mask: InstanceMask) -> Result<Self, RasterError> {
        let features = compute_shape_features(&mask)?;
        Ok(Self { mask, features })
    }

    pub fn bbox(&self) -> PixelBox {
        self.mask.bbox()
    }
}

/// 8-connected regions, ordered by their first pixel in row-major order and
/// numbered from 1.
pub fn connected_components(b: &BinaryMask) -> Vec<Region> {
    let (w, h) = (b.width(), b.height());
    let labels = label_components(b, Connectivity::Eight);
    let n = labels.count as usize;
    let mut boxes = vec![(usize::MAX, usize::MAX, 0usize, 0usize); n + 1];
    for y in 0..h {
        for x in 0..w {
            let l = labels.get(x, y) as usize;
            if l > 0 {
                let bx = &mut boxes[l];
                bx.0 = bx.0.min(x);
                bx.1 = bx.1.min(y);
                bx.2 = bx.2.max(x);
                bx.3 = bx.3.max(y);
            }
        }
    }
    (1..=n)
        .map(|l| {
            let (x0, y0, x1, y1) = boxes[l];
            let local = BinaryMask::from_fn(x1 - x0 + 1, y1 - y0 + 1, |x, y| {
                labels.get(x + x0, y + y0) as usize == l
            });
            let mask = InstanceMask::from_local_unchecked(l as u32, x0, y0, &local, (w, h))
                .expect("labelled component is non-empty and in frame");
            Region::new(mask).expect("labelled component is non-empty")
        })
        .collect()
}

/// Drops regions below the noise floor.
pub fn drop_small(regions: Vec<Region>, min_px: usize) -> Vec<Region> {
    regions.into_iter().filter(|r| r.features.area >= min_px).collect()
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CandidateSet {
    pub isolated: Vec<Region>,
    pub overlapped: Vec<Region>,
    /// Pixels not excluded as background, when produced by [`preprocess`].
    pub tissue_mask: Option<BinaryMask>,
}

/// Regions with solidity above the threshold are isolated droplets; the rest
/// are overlapped candidates for splitting.
pub fn classify_candidates(regions: Vec<Region>, solidity_threshold: f64) -> CandidateSet {
    let (isolated, overlapped) =
        regions.into_iter().partition(|r| r.features.solidity > solidity_threshold);
    CandidateSet { isolated, overlapped, tissue_mask: None }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PreprocConfig {
    pub binarize: BinarizeConfig,
    pub background: BackgroundConfig,
    pub min_region_px: usize,
    pub solidity_threshold: f64,
}

impl Default for PreprocConfig {
    fn default() -> Self {
        Self {
            binarize: BinarizeConfig::default(),
            background: BackgroundConfig::default(),
            min_region_px: 10,
            solidity_threshold: 0.95,
        }
    }
}

/// Resolves the configured method on `gray`. With otsu, a uniform image or
/// one whose class means differ by less than `min_contrast` has no foreground.
pub fn choose_threshold(gray: &GrayImage, cfg: &BinarizeConfig) -> Threshold {
    match cfg.method() {
        BinarizeMethod::Otsu => {
            let hist = histogram(gray);
            match otsu_bin(&hist) {
                Some(t) if class_means(&hist, t).is_some_and(|(m0, m1)| m1 - m0 >= cfg.min_contrast) => {
                    Threshold::Method(BinarizeMethod::Bin(t))
                }
                _ => Threshold::NoForeground,
            }
        }
        m => Threshold::Method(m),
    }
}

/// Gray-scale, binarize, drop background, label and classify one image.
/// Returns the candidates together with the gray image used.
pub fn preprocess(img: &ColorImage, cfg: &PreprocConfig) -> Result<(CandidateSet, GrayImage), PreprocError> {
    preprocess_with(img, cfg, None)
}

/// Like [`preprocess`], binarizing with `threshold` when given instead of
/// choosing one from this image.
pub fn preprocess_with(
    img: &ColorImage,
    cfg: &PreprocConfig,
    threshold: Option<Threshold>,
) -> Result<(CandidateSet, GrayImage), PreprocError> {
    let gray = to_grayscale_with(img, cfg.binarize.grayscale);
    let bin = match threshold.unwrap_or_else(|| choose_threshold(&gray, &cfg.binarize)) {
        Threshold::Method(m) => binarize(&gray, m)?,
        Threshold::NoForeground => BinaryMask::empty(gray.width(), gray.height()),
    };
    let (kept, removed) = background_components(&bin, cfg.background.min_area_frac);
    let regions = drop_small(connected_components(&kept), cfg.min_region_px);
    let mut set = classify_candidates(regions, cfg.solidity_threshold);
    let tissue = BinaryMask::new(
        gray.width(),
        gray.height(),
        removed.as_slice().iter().map(|&r| !r).collect(),
    )?;
    set.tissue_mask = Some(tissue);
    Ok((set, gray))
}
