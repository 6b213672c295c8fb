//! Splitting overlapped droplet regions along concave points.

mod concave;
mod curvature;
mod dividing;
mod ellipse;
mod scoring;
mod split;

use serde::{Deserialize, Serialize};

use crate::preproc::Region;
use crate::raster::{extract_contour, BinaryMask, GrayImage, InstanceMask, RasterError};

pub use self::concave::{detect_concave_points, local_concave_minima, ConcaveConfig, ConcavePoint};
pub use self::curvature::{curvature_profile, CurvatureProfile, MIN_CONTOUR_LEN};
pub use self::dividing::{recover_dividing_curve, shortest_sector_path, CurveParams, DividingCurve};
pub use self::ellipse::{fit_ellipse, sample_ellipse, EllipseModel};
pub use self::scoring::{
    line_pixels, score_all_pairs, score_pair, segments_intersect, select_pairs, PairScore, RegionGeometry,
    ScoreWeights,
};
pub use self::split::{cut_pixels, four_connect, split_region};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SplitError {
    #[error("contour has {0} vertices, too short for curvature")]
    ContourTooShort(usize),
    #[error("invalid parameter: {0}")]
    InvalidParameter(&'static str),
    #[error("too few or collinear points for an ellipse fit")]
    DegenerateInput,
    #[error("conic fit has no ellipse solution")]
    NoEllipseSolution,
    #[error("contour arc between endpoints is too short")]
    ArcTooShort,
    #[error("inward normals at the endpoints do not face each other")]
    NormalsNotFacing,
    #[error("chord between endpoints lies outside the region")]
    ChordOutsideRegion,
    #[error("no path between endpoints inside the search sectors")]
    NoPathInSector,
    #[error(transparent)]
    Raster(#[from] RasterError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitterConfig {
    pub concave: ConcaveConfig,
    pub weights: ScoreWeights,
    /// Pairs below this total score are never cut.
    pub score_min: f64,
    pub sector_half_angle_deg: f64,
    /// Largest angle between an endpoint's inward normal and the chord.
    pub max_normal_angle_deg: f64,
    pub path_lambda: f64,
    /// Minimum contour vertices on each side of a pair.
    pub min_arc_len: usize,
    /// Regions with more concave points are passed through unsplit.
    pub max_concave_points: usize,
    /// Pieces smaller than this are merged into a neighbour.
    pub min_piece_px: usize,
    /// Scale supplying normals and point locations.
    pub reference_scale: f64,
}

impl Default for SplitterConfig {
    fn default() -> Self {
        Self {
            concave: ConcaveConfig::default(),
            weights: ScoreWeights::default(),
            score_min: 0.5,
            sector_half_angle_deg: 30.0,
            max_normal_angle_deg: 60.0,
            path_lambda: 0.5,
            min_arc_len: 8,
            max_concave_points: 20,
            min_piece_px: 30,
            reference_scale: 3.0,
        }
    }
}

impl SplitterConfig {
    pub fn validate(&self) -> Result<(), SplitError> {
        self.weights.validate()?;
        if self.concave.scales.is_empty() || self.concave.scales.iter().any(|s| !(*s > 0.0)) {
            return Err(SplitError::InvalidParameter("scales must be positive"));
        }
        if self.concave.min_votes == 0 || self.concave.min_votes > self.concave.scales.len() {
            return Err(SplitError::InvalidParameter("min_votes must be between 1 and the number of scales"));
        }
        if !(self.reference_scale > 0.0) {
            return Err(SplitError::InvalidParameter("reference_scale must be positive"));
        }
        if !(self.sector_half_angle_deg > 0.0 && self.sector_half_angle_deg < 90.0) {
            return Err(SplitError::InvalidParameter("sector half-angle must be in (0, 90)"));
        }
        if !(self.max_normal_angle_deg > 0.0 && self.max_normal_angle_deg <= 180.0) {
            return Err(SplitError::InvalidParameter("max_normal_angle_deg must be in (0, 180]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitFlag {
    /// Too many concave points; region returned unsplit.
    TooManyConcavePoints,
    /// At least one cut used the straight chord.
    ChordFallback,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitOutcome {
    pub masks: Vec<InstanceMask>,
    pub pairs: Vec<PairScore>,
    pub flags: Vec<SplitFlag>,
}

/// Splits one overlapped region. Work happens in the region's bounding box;
/// returned masks are in the frame of the input region, numbered from 0.
/// Regions that cannot be split come back as a single mask.
pub fn split_overlapped(region: &Region, gray: &GrayImage, cfg: &SplitterConfig) -> Result<SplitOutcome, SplitError> {
    cfg.validate()?;
    let frame = region.mask.frame();
    if gray.width() != frame.0 || gray.height() != frame.1 {
        return Err(SplitError::InvalidParameter("gray image does not match region frame"));
    }
    let bb = region.bbox();
    let unsplit = |flags: Vec<SplitFlag>| SplitOutcome { masks: vec![region.mask.clone().with_id(0)], pairs: Vec::new(), flags };

    let local_inst = region.mask.translated(-(bb.x as i64), -(bb.y as i64), (bb.w, bb.h))?;
    let local_mask = local_inst.to_frame_mask();
    let local_gray = GrayImage::new(
        bb.w,
        bb.h,
        (0..bb.h).flat_map(|y| (0..bb.w).map(move |x| (x, y))).map(|(x, y)| gray.get(x + bb.x, y + bb.y)).collect(),
    )?;
    let mut features = region.features.clone();
    features.centroid = (features.centroid.0 - bb.x as f64, features.centroid.1 - bb.y as f64);
    let local = Region { mask: local_inst, features };

    let contour = extract_contour(&local.mask)?;
    let reference = match curvature_profile(&contour, cfg.reference_scale) {
        Ok(p) => p,
        Err(SplitError::ContourTooShort(_)) => return Ok(unsplit(Vec::new())),
        Err(e) => return Err(e),
    };
    let points = detect_concave_points(&contour, &reference, &cfg.concave)?;
    if points.len() > cfg.max_concave_points {
        return Ok(unsplit(vec![SplitFlag::TooManyConcavePoints]));
    }
    if points.len() < 2 {
        return Ok(unsplit(Vec::new()));
    }
    let geo = RegionGeometry::new(&local, &contour, &points, cfg.min_arc_len, cfg.max_normal_angle_deg);
    let scores = score_all_pairs(&geo, &points, &cfg.weights);
    let pairs = select_pairs(&scores, cfg.score_min);
    if pairs.is_empty() {
        return Ok(unsplit(Vec::new()));
    }

    let params = CurveParams { sector_half_angle_deg: cfg.sector_half_angle_deg, path_lambda: cfg.path_lambda };
    let mut flags = Vec::new();
    let mut curves = Vec::new();
    for pair in &pairs {
        let curve = recover_dividing_curve(&local_mask, &local_gray, pair.p_pixel, pair.q_pixel, &params)?;
        if curve.fallback && !flags.contains(&SplitFlag::ChordFallback) {
            flags.push(SplitFlag::ChordFallback);
        }
        curves.push(curve.pixels);
    }
    let pieces = split_region(&local_mask, &curves, cfg.min_piece_px);
    if pieces.len() < 2 {
        return Ok(SplitOutcome { masks: unsplit(Vec::new()).masks, pairs, flags });
    }
    let masks = pieces
        .iter()
        .enumerate()
        .map(|(i, p)| {
            InstanceMask::from_local(i as u32, bb.x, bb.y, p, frame).map_err(SplitError::from)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(SplitOutcome { masks, pairs, flags })
}

/// Convenience wrapper over a binary mask holding one region.
pub fn split_mask(mask: &BinaryMask, gray: &GrayImage, cfg: &SplitterConfig) -> Result<SplitOutcome, SplitError> {
    let inst = InstanceMask::from_frame_mask(0, mask)?;
    let region = Region::new(inst)?;
    split_overlapped(&region, gray, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn disks(centers: &[(f64, f64)], r: f64, w: usize, h: usize) -> (BinaryMask, GrayImage) {
        let inside = |x: usize, y: usize, c: &(f64, f64)| {
            (x as f64 + 0.5 - c.0).powi(2) + (y as f64 + 0.5 - c.1).powi(2) <= r * r
        };
        let m = BinaryMask::from_fn(w, h, |x, y| centers.iter().any(|c| inside(x, y, c)));
        let mut g = GrayImage::filled(w, h, 0.45);
        for (x, y) in m.foreground() {
            g.set(x, y, 0.9);
        }
        (m, g)
    }

    #[test]
    fn peanut_splits_into_two() {
        let (m, g) = disks(&[(30.0, 30.0), (58.0, 30.0)], 18.0, 90, 60);
        let out = split_mask(&m, &g, &SplitterConfig::default()).unwrap();
        assert_eq!(out.masks.len(), 2, "{:?}", out.pairs);
        let total: usize = out.masks.iter().map(|m| m.area()).sum();
        assert_eq!(total, m.count());
        let mut areas: Vec<usize> = out.masks.iter().map(|m| m.area()).collect();
        areas.sort();
        assert!(areas[0] as f64 > 0.8 * areas[1] as f64);
    }

    #[test]
    fn convex_region_is_not_split() {
        let (m, g) = disks(&[(30.0, 30.0)], 20.0, 60, 60);
        let out = split_mask(&m, &g, &SplitterConfig::default()).unwrap();
        assert_eq!(out.masks.len(), 1);
        assert_eq!(out.masks[0].area(), m.count());
    }

    #[test]
    fn config_rejects_bad_weights() {
        let mut cfg = SplitterConfig::default();
        cfg.weights.proximity = 0.9;
        assert!(cfg.validate().is_err());
    }
}
