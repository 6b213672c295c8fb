//! Geometric and photometric augmentation applied jointly to image and masks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::TrainingSample;
use crate::raster::{label_components, BinaryMask, ColorImage, Connectivity, InstanceMask};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum AugmentOp {
    FlipHorizontal,
    FlipVertical,
    /// Rotation and isotropic scale about the image center, then a shift in pixels.
    Affine { rotation_deg: f64, scale: f64, tx: f64, ty: f64 },
    /// Gaussian blur of the image only.
    Blur { sigma: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AugmentFamily {
    Affine,
    Flip,
    Blur,
}

pub const MAX_ROTATION_DEG: f64 = 30.0;
pub const SCALE_RANGE: (f64, f64) = (0.8, 1.25);
pub const MAX_SHIFT_FRAC: f64 = 0.1;
pub const BLUR_SIGMA_RANGE: (f64, f64) = (0.5, 2.0);

/// Draws concrete ops for the requested families.
pub fn sample_ops(families: &[AugmentFamily], width: usize, height: usize, seed: u64) -> Vec<AugmentOp> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ops = Vec::new();
    for f in families {
        match f {
            AugmentFamily::Flip => {
                if rng.gen_bool(0.5) {
                    ops.push(AugmentOp::FlipHorizontal);
                }
                if rng.gen_bool(0.5) {
                    ops.push(AugmentOp::FlipVertical);
                }
            }
            AugmentFamily::Affine => ops.push(AugmentOp::Affine {
                rotation_deg: rng.gen_range(-MAX_ROTATION_DEG..=MAX_ROTATION_DEG),
                scale: rng.gen_range(SCALE_RANGE.0..=SCALE_RANGE.1),
                tx: rng.gen_range(-MAX_SHIFT_FRAC..=MAX_SHIFT_FRAC) * width as f64,
                ty: rng.gen_range(-MAX_SHIFT_FRAC..=MAX_SHIFT_FRAC) * height as f64,
            }),
            AugmentFamily::Blur => ops.push(AugmentOp::Blur { sigma: rng.gen_range(BLUR_SIGMA_RANGE.0..=BLUR_SIGMA_RANGE.1) }),
        }
    }
    ops
}

/// Random augmentation, deterministic in `seed`.
pub fn augment(sample: &TrainingSample, families: &[AugmentFamily], seed: u64) -> TrainingSample {
    let ops = sample_ops(families, sample.image.width(), sample.image.height(), seed);
    apply_ops(sample, &ops)
}

/// Applies ops in order. Masks use nearest-neighbour sampling; a mask that
/// leaves the frame entirely is dropped and a fragmented one keeps its
/// largest piece.
pub fn apply_ops(sample: &TrainingSample, ops: &[AugmentOp]) -> TrainingSample {
    let mut image = sample.image.clone();
    let mut masks: Vec<(BinaryMask, u32, bool)> = sample
        .masks
        .iter()
        .zip(&sample.accepted)
        .map(|(m, &a)| (m.to_frame_mask(), m.id(), a))
        .collect();
    for op in ops {
        match *op {
            AugmentOp::Blur { sigma } => image = gaussian_blur(&image, sigma),
            _ => {
                let map = PixelMap::new(op, image.width(), image.height());
                image = map.warp_image(&image);
                for m in &mut masks {
                    m.0 = map.warp_mask(&m.0);
                }
            }
        }
    }
    let frame = (image.width(), image.height());
    let mut out_masks = Vec::new();
    let mut accepted = Vec::new();
    for (m, id, a) in masks {
        if let Some(largest) = largest_component(&m) {
            out_masks.push(InstanceMask::from_local_unchecked(id, 0, 0, &largest, frame).expect("non-empty in frame"));
            accepted.push(a);
        }
    }
    TrainingSample { name: sample.name.clone(), image, masks: out_masks, accepted }
}

fn largest_component(m: &BinaryMask) -> Option<BinaryMask> {
    let labels = label_components(m, Connectivity::Eight);
    if labels.count == 0 {
        return None;
    }
    if labels.count == 1 {
        return Some(m.clone());
    }
    let mut sizes = vec![0usize; labels.count as usize + 1];
    for &l in &labels.labels {
        sizes[l as usize] += 1;
    }
    let best = (1..sizes.len()).max_by(|&a, &b| sizes[a].cmp(&sizes[b]).then(b.cmp(&a))).expect("count > 0") as u32;
    Some(BinaryMask::from_fn(m.width(), m.height(), |x, y| labels.get(x, y) == best))
}

/// Inverse map from destination pixel centers to source coordinates.
struct PixelMap {
    w: usize,
    h: usize,
    // src = m · (dst − c − t) + c
    m: [[f64; 2]; 2],
    t: (f64, f64),
}

fn snapped_sin_cos(deg: f64) -> (f64, f64) {
    let quarter = deg / 90.0;
    if (quarter - quarter.round()).abs() < 1e-12 {
        match (quarter.round() as i64).rem_euclid(4) {
            0 => (0.0, 1.0),
            1 => (1.0, 0.0),
            2 => (0.0, -1.0),
            _ => (-1.0, 0.0),
        }
    } else {
        deg.to_radians().sin_cos()
    }
}

impl PixelMap {
    fn new(op: &AugmentOp, w: usize, h: usize) -> Self {
        match *op {
            AugmentOp::FlipHorizontal => Self { w, h, m: [[-1.0, 0.0], [0.0, 1.0]], t: (0.0, 0.0) },
            AugmentOp::FlipVertical => Self { w, h, m: [[1.0, 0.0], [0.0, -1.0]], t: (0.0, 0.0) },
            AugmentOp::Affine { rotation_deg, scale, tx, ty } => {
                let (s, c) = snapped_sin_cos(rotation_deg);
                // inverse of scale·R(θ) is R(−θ)/scale
                let k = 1.0 / scale;
                Self { w, h, m: [[c * k, s * k], [-s * k, c * k]], t: (tx, ty) }
            }
            AugmentOp::Blur { .. } => Self { w, h, m: [[1.0, 0.0], [0.0, 1.0]], t: (0.0, 0.0) },
        }
    }

    fn source(&self, x: usize, y: usize) -> (f64, f64) {
        let (cx, cy) = (self.w as f64 / 2.0, self.h as f64 / 2.0);
        let dx = x as f64 + 0.5 - cx - self.t.0;
        let dy = y as f64 + 0.5 - cy - self.t.1;
        (self.m[0][0] * dx + self.m[0][1] * dy + cx, self.m[1][0] * dx + self.m[1][1] * dy + cy)
    }

    fn nearest(&self, x: usize, y: usize) -> Option<(usize, usize)> {
        let (sx, sy) = self.source(x, y);
        let (fx, fy) = (sx.floor(), sy.floor());
        (fx >= 0.0 && fy >= 0.0 && fx < self.w as f64 && fy < self.h as f64).then_some((fx as usize, fy as usize))
    }

    fn warp_mask(&self, m: &BinaryMask) -> BinaryMask {
        BinaryMask::from_fn(self.w, self.h, |x, y| self.nearest(x, y).is_some_and(|(sx, sy)| m.get(sx, sy)))
    }

    /// Bilinear resampling with edge clamping.
    fn warp_image(&self, img: &ColorImage) -> ColorImage {
        let mut out = img.clone();
        let clamp = |v: i64, hi: usize| v.clamp(0, hi as i64 - 1) as usize;
        for y in 0..self.h {
            for x in 0..self.w {
                let (sx, sy) = self.source(x, y);
                let (u, v) = (sx - 0.5, sy - 0.5);
                let (x0, y0) = (u.floor(), v.floor());
                let (ax, ay) = ((u - x0) as f32, (v - y0) as f32);
                let (x0, y0) = (x0 as i64, y0 as i64);
                let p = |xx: i64, yy: i64| img.get(clamp(xx, self.w), clamp(yy, self.h));
                let (p00, p10, p01, p11) = (p(x0, y0), p(x0 + 1, y0), p(x0, y0 + 1), p(x0 + 1, y0 + 1));
                let mut rgb = [0.0f32; 3];
                for c in 0..3 {
                    let top = p00[c] * (1.0 - ax) + p10[c] * ax;
                    let bottom = p01[c] * (1.0 - ax) + p11[c] * ax;
                    rgb[c] = top * (1.0 - ay) + bottom * ay;
                }
                out.set(x, y, rgb);
            }
        }
        out
    }
}

fn gaussian_kernel(sigma: f64) -> Vec<f32> {
    let r = (3.0 * sigma).ceil().max(1.0) as i64;
    let k: Vec<f64> = (-r..=r).map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp()).collect();
    let s: f64 = k.iter().sum();
    k.iter().map(|v| (v / s) as f32).collect()
}

/// Separable Gaussian blur with edge clamping.
pub fn gaussian_blur(img: &ColorImage, sigma: f64) -> ColorImage {
    if !(sigma > 0.0) {
        return img.clone();
    }
    let k = gaussian_kernel(sigma);
    let r = (k.len() / 2) as i64;
    let (w, h) = (img.width(), img.height());
    let pass = |src: &ColorImage, horizontal: bool| {
        let mut out = src.clone();
        for y in 0..h {
            for x in 0..w {
                let mut acc = [0.0f32; 3];
                for (i, &kv) in k.iter().enumerate() {
                    let d = i as i64 - r;
                    let (sx, sy) = if horizontal {
                        ((x as i64 + d).clamp(0, w as i64 - 1) as usize, y)
                    } else {
                        (x, (y as i64 + d).clamp(0, h as i64 - 1) as usize)
                    };
                    let p = src.get(sx, sy);
                    for c in 0..3 {
                        acc[c] += kv * p[c];
                    }
                }
                out.set(x, y, acc);
            }
        }
        out
    };
    pass(&pass(img, true), false)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> TrainingSample {
        let mut img = ColorImage::filled(16, 16, [0.2, 0.3, 0.4]);
        for x in 3..9 {
            img.set(x, 4, [0.9, 0.9, 0.9]);
        }
        let px: Vec<_> = (2..7).flat_map(|y| (3..9).map(move |x| (x, y))).filter(|&(x, y)| x + y < 12).collect();
        let m = InstanceMask::from_pixels(0, &px, (16, 16)).unwrap();
        TrainingSample::new("a", img, vec![m]).unwrap()
    }

    #[test]
    fn flip_twice_is_identity() {
        let s = sample();
        let out = apply_ops(&s, &[AugmentOp::FlipHorizontal, AugmentOp::FlipHorizontal]);
        assert_eq!(out, s);
        let out = apply_ops(&s, &[AugmentOp::FlipVertical, AugmentOp::FlipVertical]);
        assert_eq!(out, s);
    }

    #[test]
    fn quarter_turn_preserves_area() {
        let s = sample();
        let op = AugmentOp::Affine { rotation_deg: 90.0, scale: 1.0, tx: 0.0, ty: 0.0 };
        let out = apply_ops(&s, &[op]);
        assert_eq!(out.masks[0].area(), s.masks[0].area());
        let back = apply_ops(&out, &[AugmentOp::Affine { rotation_deg: -90.0, scale: 1.0, tx: 0.0, ty: 0.0 }]);
        assert_eq!(back.masks[0].to_frame_mask(), s.masks[0].to_frame_mask());
    }

    #[test]
    fn blur_leaves_masks_alone() {
        let s = sample();
        let out = apply_ops(&s, &[AugmentOp::Blur { sigma: 2.0 }]);
        assert_eq!(out.masks, s.masks);
        assert_ne!(out.image, s.image);
    }

    #[test]
    fn shifted_out_mask_is_dropped() {
        let s = sample();
        let out = apply_ops(&s, &[AugmentOp::Affine { rotation_deg: 0.0, scale: 1.0, tx: 20.0, ty: 0.0 }]);
        assert!(out.masks.is_empty());
    }

    #[test]
    fn sampled_ops_are_deterministic_and_in_range() {
        let a = sample_ops(&[AugmentFamily::Affine, AugmentFamily::Flip, AugmentFamily::Blur], 100, 50, 9);
        assert_eq!(a, sample_ops(&[AugmentFamily::Affine, AugmentFamily::Flip, AugmentFamily::Blur], 100, 50, 9));
        for op in a {
            if let AugmentOp::Affine { rotation_deg, scale, tx, ty } = op {
                assert!(rotation_deg.abs() <= 30.0 && (0.8..=1.25).contains(&scale));
                assert!(tx.abs() <= 10.0 && ty.abs() <= 5.0);
            }
        }
    }
}
