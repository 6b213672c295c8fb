//! Synthetic droplet scenes with exact instance ground truth.
//!
//! Droplets are hard-edged ellipses. Clumps grow as trees: each new member
//! overlaps exactly one earlier member and keeps a gap to everything else.
//! Inside a clump every pixel belongs to the droplet with the smallest
//! normalized elliptical radius, and pixels bordering another droplet are
//! darkened to form a seam. Placement uses only integer draws and IEEE
//! arithmetic with `sqrt`, so scenes are identical across platforms.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{DatasetError, TrainingSample};
use crate::raster::{is_connected, BinaryMask, ColorImage, Connectivity, InstanceMask};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SynthError {
    #[error("invalid scene spec: {0}")]
    InvalidSpec(&'static str),
    #[error("could not place droplets after bounded retries")]
    PlacementFailure,
}

pub const BACKGROUND_RGB: [f32; 3] = [0.55, 0.40, 0.50];
pub const DROPLET_LEVEL: f32 = 0.9;
pub const TINT: f32 = 0.03;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneSpec {
    pub seed: u64,
    pub width: usize,
    pub height: usize,
    /// Total number of droplets.
    pub count: usize,
    /// Semi-major axis range in pixels, inclusive.
    pub radius_range: [u32; 2],
    /// Overlap fraction range for touching pairs, `1 − d / (ρ₁ + ρ₂)` along
    /// the center line.
    pub overlap_range: [f64; 2],
    /// Droplets per clump, inclusive range; `[1, 1]` gives isolated droplets.
    pub clump_size: [usize; 2],
    /// Peak-to-peak amplitude of the background texture.
    pub texture_amplitude: f64,
    /// Fractional darkening of seam pixels between touching droplets.
    pub seam_depth: f64,
    /// Minimum clearance between non-touching droplets, in pixels.
    pub gap: u32,
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            seed: 0,
            width: 256,
            height: 256,
            count: 4,
            radius_range: [12, 24],
            overlap_range: [0.1, 0.4],
            clump_size: [1, 1],
            texture_amplitude: 0.04,
            seam_depth: 0.15,
            gap: 4,
        }
    }
}

impl SceneSpec {
    pub fn validate(&self) -> Result<(), SynthError> {
        if self.width == 0 || self.height == 0 {
            return Err(SynthError::InvalidSpec("canvas must be non-empty"));
        }
        if self.radius_range[0] < 2 || self.radius_range[0] > self.radius_range[1] {
            return Err(SynthError::InvalidSpec("radius range must satisfy 2 <= lo <= hi"));
        }
        let [olo, ohi] = self.overlap_range;
        if !(0.0..=0.6).contains(&olo) || !(0.0..=0.6).contains(&ohi) || olo > ohi {
            return Err(SynthError::InvalidSpec("overlap range must lie in [0, 0.6]"));
        }
        if self.clump_size[0] == 0 || self.clump_size[0] > self.clump_size[1] {
            return Err(SynthError::InvalidSpec("clump size range must satisfy 1 <= lo <= hi"));
        }
        if !(0.0..=1.0).contains(&self.seam_depth) {
            return Err(SynthError::InvalidSpec("seam depth must lie in [0, 1]"));
        }
        if !(0.0..=0.4).contains(&self.texture_amplitude) {
            return Err(SynthError::InvalidSpec("texture amplitude must lie in [0, 0.4]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ellipse {
    pub cx: f64,
    pub cy: f64,
    pub a: f64,
    pub b: f64,
    /// Unit major-axis direction.
    pub dir: (f64, f64),
}

impl Ellipse {
    /// Squared normalized radius; `<= 1` inside.
    pub fn q(&self, x: f64, y: f64) -> f64 {
        let (dx, dy) = (x - self.cx, y - self.cy);
        let u = dx * self.dir.0 + dy * self.dir.1;
        let v = -dx * self.dir.1 + dy * self.dir.0;
        (u / self.a).powi(2) + (v / self.b).powi(2)
    }

    /// Distance from the center to the boundary along unit direction `d`.
    pub fn radius_along(&self, d: (f64, f64)) -> f64 {
        let u = d.0 * self.dir.0 + d.1 * self.dir.1;
        let v = -d.0 * self.dir.1 + d.1 * self.dir.0;
        1.0 / ((u / self.a).powi(2) + (v / self.b).powi(2)).sqrt()
    }

    /// Pixel bounds `[x0, x1) × [y0, y1)` clipped to the canvas.
    fn pixel_bounds(&self, w: usize, h: usize) -> (usize, usize, usize, usize) {
        let r = self.a.ceil() + 1.0;
        let lo = |c: f64| (c - r).floor().max(0.0) as usize;
        let x1 = ((self.cx + r).ceil().max(0.0) as usize).min(w);
        let y1 = ((self.cy + r).ceil().max(0.0) as usize).min(h);
        (lo(self.cx).min(x1), lo(self.cy).min(y1), x1, y1)
    }
}

/// Rendered scene with ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthScene {
    pub image: ColorImage,
    /// Ground-truth masks, ids from 1.
    pub masks: Vec<InstanceMask>,
    pub ellipses: Vec<Ellipse>,
    /// Indices into `masks` for each clump.
    pub clumps: Vec<Vec<usize>>,
}

fn unit_direction(rng: &mut ChaCha8Rng) -> (f64, f64) {
    loop {
        let u: i32 = rng.gen_range(-16..=16);
        let v: i32 = rng.gen_range(-16..=16);
        if u != 0 || v != 0 {
            let n = ((u * u + v * v) as f64).sqrt();
            return (u as f64 / n, v as f64 / n);
        }
    }
}

/// Uniform draw on `[lo, hi]` at 1/10000 resolution.
fn fraction(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    let (a, b) = ((lo * 10_000.0).round() as i64, (hi * 10_000.0).round() as i64);
    rng.gen_range(a..=b) as f64 / 10_000.0
}

fn random_shape(rng: &mut ChaCha8Rng, spec: &SceneSpec) -> (f64, f64, (f64, f64)) {
    let a = rng.gen_range(spec.radius_range[0]..=spec.radius_range[1]) as f64;
    // axis ratio in [0.7, 1.0]
    let ratio = rng.gen_range(700..=1000) as f64 / 1000.0;
    (a, a * ratio, unit_direction(rng))
}

fn clear_of(e: &Ellipse, others: &[Ellipse], skip: Option<usize>, gap: f64) -> bool {
    others.iter().enumerate().all(|(i, o)| {
        Some(i) == skip || ((e.cx - o.cx).powi(2) + (e.cy - o.cy).powi(2)).sqrt() >= e.a + o.a + gap
    })
}

fn in_canvas(e: &Ellipse, spec: &SceneSpec) -> bool {
    let m = e.a + 2.0;
    e.cx - m >= 0.0 && e.cy - m >= 0.0 && e.cx + m <= spec.width as f64 && e.cy + m <= spec.height as f64
}

fn place_clump(rng: &mut ChaCha8Rng, spec: &SceneSpec, placed: &[Ellipse], size: usize) -> Option<Vec<Ellipse>> {
    const TRIES: usize = 200;
    let gap = spec.gap as f64;
    let mut clump: Vec<Ellipse> = Vec::with_capacity(size);
    for _ in 0..TRIES {
        let (a, b, dir) = random_shape(rng, spec);
        let m = a as i64 + 2;
        if 2 * m >= spec.width as i64 || 2 * m >= spec.height as i64 {
            return None;
        }
        let cx = rng.gen_range(m..=spec.width as i64 - m) as f64;
        let cy = rng.gen_range(m..=spec.height as i64 - m) as f64;
        let e = Ellipse { cx, cy, a, b, dir };
        if clear_of(&e, placed, None, gap) {
            clump.push(e);
            break;
        }
    }
    if clump.is_empty() {
        return None;
    }
    while clump.len() < size {
        let mut added = false;
        for _ in 0..TRIES {
            let parent = rng.gen_range(0..clump.len());
            let (a, b, dir) = random_shape(rng, spec);
            let d = unit_direction(rng);
            let omega = fraction(rng, spec.overlap_range[0], spec.overlap_range[1]);
            let p = clump[parent];
            let mut child = Ellipse { cx: 0.0, cy: 0.0, a, b, dir };
            let dist = (1.0 - omega) * (p.radius_along(d) + child.radius_along((-d.0, -d.1)));
            child.cx = p.cx + dist * d.0;
            child.cy = p.cy + dist * d.1;
            if in_canvas(&child, spec) && clear_of(&child, &clump, Some(parent), gap) && clear_of(&child, placed, None, gap) {
                clump.push(child);
                added = true;
                break;
            }
        }
        if !added {
            return None;
        }
    }
    Some(clump)
}

/// Labels of one clump over its bounding box: local masks in clump order.
fn rasterize_clump(clump: &[Ellipse], w: usize, h: usize) -> Option<(usize, usize, usize, usize, Vec<u8>)> {
    let (mut x0, mut y0, mut x1, mut y1) = (w, h, 0, 0);
    for e in clump {
        let b = e.pixel_bounds(w, h);
        x0 = x0.min(b.0);
        y0 = y0.min(b.1);
        x1 = x1.max(b.2);
        y1 = y1.max(b.3);
    }
    if x0 >= x1 || y0 >= y1 {
        return None;
    }
    let (bw, bh) = (x1 - x0, y1 - y0);
    let mut labels = vec![0u8; bw * bh];
    for ly in 0..bh {
        for lx in 0..bw {
            let (px, py) = ((x0 + lx) as f64 + 0.5, (y0 + ly) as f64 + 0.5);
            let mut best = (f64::INFINITY, 0u8);
            for (i, e) in clump.iter().enumerate() {
                let q = e.q(px, py);
                if q <= 1.0 && q < best.0 {
                    best = (q, i as u8 + 1);
                }
            }
            labels[ly * bw + lx] = best.1;
        }
    }
    Some((x0, y0, bw, bh, labels))
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Per-pixel texture value in `[-0.5, 0.5)`.
fn texture(seed: u64, x: usize, y: usize) -> f32 {
    let h = splitmix(seed ^ splitmix(((y as u64) << 32) | x as u64));
    ((h >> 40) as f32 / (1u64 << 24) as f32) - 0.5
}

fn background(seed: u64, w: usize, h: usize, amplitude: f64) -> ColorImage {
    let amp = amplitude as f32;
    let data = (0..w * h)
        .map(|i| {
            let t = amp * texture(seed, i % w, i / w);
            BACKGROUND_RGB.map(|c| (c + t).clamp(0.0, 1.0))
        })
        .collect();
    ColorImage::new(w, h, data).expect("sized buffer")
}

/// Places, rasterizes and renders a scene.
pub fn generate_scene(spec: &SceneSpec) -> Result<SynthScene, SynthError> {
    spec.validate()?;
    const CLUMP_RETRIES: usize = 50;
    let (w, h) = (spec.width, spec.height);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut image = background(spec.seed, w, h, spec.texture_amplitude);
    let mut ellipses: Vec<Ellipse> = Vec::with_capacity(spec.count);
    let mut masks = Vec::with_capacity(spec.count);
    let mut clumps = Vec::new();

    let mut remaining = spec.count;
    while remaining > 0 {
        let size = rng.gen_range(spec.clump_size[0]..=spec.clump_size[1]).min(remaining);
        let mut done = false;
        for _ in 0..CLUMP_RETRIES {
            let Some(clump) = place_clump(&mut rng, spec, &ellipses, size) else { continue };
            let Some((x0, y0, bw, bh, labels)) = rasterize_clump(&clump, w, h) else { continue };
            let locals: Vec<BinaryMask> = (1..=clump.len() as u8)
                .map(|l| BinaryMask::from_fn(bw, bh, |x, y| labels[y * bw + x] == l))
                .collect();
            if locals.iter().any(|m| m.is_empty() || !is_connected(m, Connectivity::Eight)) {
                continue;
            }
            let base = masks.len();
            for (k, m) in locals.iter().enumerate() {
                let id = (base + k + 1) as u32;
                masks.push(InstanceMask::from_local(id, x0, y0, m, (w, h)).expect("connected, in frame"));
            }
            paint_clump(&mut image, &mut rng, x0, y0, bw, bh, &labels, spec.seam_depth);
            clumps.push((base..base + clump.len()).collect());
            ellipses.extend(clump);
            done = true;
            break;
        }
        if !done {
            return Err(SynthError::PlacementFailure);
        }
        remaining -= size;
    }
    Ok(SynthScene { image, masks, ellipses, clumps })
}

#[allow(clippy::too_many_arguments)]
fn paint_clump(
    image: &mut ColorImage,
    rng: &mut ChaCha8Rng,
    x0: usize,
    y0: usize,
    bw: usize,
    bh: usize,
    labels: &[u8],
    seam_depth: f64,
) {
    let n = labels.iter().copied().max().unwrap_or(0) as usize;
    let colors: Vec<[f32; 3]> = (0..n)
        .map(|_| {
            let t = [0; 3].map(|_| rng.gen_range(-300..=300) as f32 / 10_000.0);
            [DROPLET_LEVEL + t[0], DROPLET_LEVEL + t[1], DROPLET_LEVEL + t[2]]
        })
        .collect();
    let dark = 1.0 - seam_depth as f32;
    let at = |x: i64, y: i64| {
        if x < 0 || y < 0 || x >= bw as i64 || y >= bh as i64 { 0 } else { labels[y as usize * bw + x as usize] }
    };
    for ly in 0..bh {
        for lx in 0..bw {
            let l = labels[ly * bw + lx];
            if l == 0 {
                continue;
            }
            let (xi, yi) = (lx as i64, ly as i64);
            let seam = [(1, 0), (-1, 0), (0, 1), (0, -1)].iter().any(|&(dx, dy)| {
                let o = at(xi + dx, yi + dy);
                o != 0 && o != l
            });
            let c = colors[l as usize - 1];
            let c = if seam { c.map(|v| v * dark) } else { c };
            image.set(x0 + lx, y0 + ly, c.map(|v| v.clamp(0.0, 1.0)));
        }
    }
}

/// Renders each spec into a training sample named `scene_NNNN`.
pub fn scene_to_dataset(specs: &[SceneSpec]) -> Result<Vec<TrainingSample>, SynthDatasetError> {
    specs
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let scene = generate_scene(s)?;
            Ok(TrainingSample::new(format!("scene_{i:04}"), scene.image, scene.masks)?)
        })
        .collect()
}

#[derive(Debug, thiserror::Error)]
pub enum SynthDatasetError {
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}

/// A whole-slide-sized scene: mostly isolated droplets with some small clumps.
pub fn slide_spec(seed: u64, width: usize, height: usize, count: usize) -> SceneSpec {
    SceneSpec {
        seed,
        width,
        height,
        count,
        radius_range: [8, 30],
        overlap_range: [0.1, 0.4],
        clump_size: [1, 3],
        texture_amplitude: 0.04,
        seam_depth: 0.15,
        gap: 6,
    }
}

/// A single clump of `size` droplets on a canvas sized to hold it.
pub fn clump_spec(seed: u64, size: usize) -> SceneSpec {
    SceneSpec {
        seed,
        width: 160,
        height: 160,
        count: size,
        radius_range: [14, 24],
        overlap_range: [0.1, 0.4],
        clump_size: [size, size],
        texture_amplitude: 0.04,
        seam_depth: 0.15,
        gap: 4,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::{compute_shape_features, to_grayscale};

    #[test]
    fn single_droplet_is_convex() {
        let s = generate_scene(&SceneSpec { count: 1, seed: 5, ..SceneSpec::default() }).unwrap();
        assert_eq!(s.masks.len(), 1);
        assert!(compute_shape_features(&s.masks[0]).unwrap().solidity > 0.95);
    }

    #[test]
    fn overlapping_pair_is_not_convex() {
        let spec = SceneSpec { count: 2, clump_size: [2, 2], overlap_range: [0.2, 0.2], seed: 11, ..SceneSpec::default() };
        let s = generate_scene(&spec).unwrap();
        let mut px: Vec<_> = s.masks.iter().flat_map(|m| m.pixels()).collect();
        px.sort();
        let merged = InstanceMask::from_pixels(0, &px, (256, 256)).unwrap();
        assert!(compute_shape_features(&merged).unwrap().solidity < 0.95);
    }

    #[test]
    fn deterministic_and_disjoint() {
        let spec = SceneSpec { count: 9, clump_size: [1, 4], seed: 3, ..SceneSpec::default() };
        let a = generate_scene(&spec).unwrap();
        assert_eq!(a, generate_scene(&spec).unwrap());
        let mut seen = BinaryMask::empty(256, 256);
        for m in &a.masks {
            for (x, y) in m.pixels() {
                assert!(!seen.get(x, y));
                seen.set(x, y, true);
            }
        }
    }

    #[test]
    fn rendering_levels() {
        let spec = SceneSpec { count: 2, clump_size: [2, 2], seed: 2, ..SceneSpec::default() };
        let s = generate_scene(&spec).unwrap();
        let g = to_grayscale(&s.image);
        let fg = s.masks[0].pixels().next().unwrap();
        assert!(g.get(fg.0, fg.1) > 0.7);
        assert!((g.get(0, 0) - 0.456).abs() < 0.03);
        // a seam pixel is darker than the droplet but above the background
        let b = &s.masks[1];
        let seam = s.masks[0]
            .pixels()
            .find(|&(x, y)| b.contains(x + 1, y) || (x > 0 && b.contains(x - 1, y)) || b.contains(x, y + 1) || (y > 0 && b.contains(x, y - 1)))
            .unwrap();
        let v = g.get(seam.0, seam.1);
        assert!(v > 0.7 && v < 0.8, "{v}");
    }

    #[test]
    fn invalid_specs() {
        assert!(generate_scene(&SceneSpec { overlap_range: [0.5, 0.7], ..SceneSpec::default() }).is_err());
        assert!(generate_scene(&SceneSpec { radius_range: [10, 5], ..SceneSpec::default() }).is_err());
        let crowded = SceneSpec { width: 40, height: 40, count: 20, ..SceneSpec::default() };
        assert_eq!(generate_scene(&crowded), Err(SynthError::PlacementFailure));
    }

    #[test]
    fn dataset_from_specs() {
        let specs: Vec<_> = (0..3).map(|i| SceneSpec { seed: i, ..SceneSpec::default() }).collect();
        let d = scene_to_dataset(&specs).unwrap();
        assert_eq!(d.len(), 3);
        assert!(d.iter().all(|s| s.masks.len() == 4));
        assert!(scene_to_dataset(&[]).unwrap().is_empty());
    }
}
