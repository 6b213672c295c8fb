//! Pair scoring of concave points and greedy selection of dividing chords.

use serde::{Deserialize, Serialize};

use crate::preproc::Region;
use crate::raster::{convex_hull, Contour};

use super::concave::ConcavePoint;
use super::ellipse::fit_ellipse;
use super::SplitError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScoreWeights {
    pub ellipse_fit: f64,
    pub proximity: f64,
    pub convexity: f64,
    pub curvature: f64,
}

impl Default for ScoreWeights {
    fn default() -> Self {
        Self { ellipse_fit: 0.4, proximity: 0.3, convexity: 0.15, curvature: 0.15 }
    }
}

impl ScoreWeights {
    pub fn validate(&self) -> Result<(), SplitError> {
        let all = [self.ellipse_fit, self.proximity, self.convexity, self.curvature];
        if all.iter().any(|w| !(*w >= 0.0)) || (all.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(SplitError::InvalidParameter("score weights must be non-negative and sum to 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairScore {
    pub p: ConcavePoint,
    pub q: ConcavePoint,
    /// Region pixel each endpoint is anchored to.
    pub p_pixel: (usize, usize),
    pub q_pixel: (usize, usize),
    pub ellipse_fit: f64,
    pub proximity: f64,
    pub convexity: f64,
    pub curvature: f64,
    pub total: f64,
}

/// Per-region quantities shared by every pair evaluation.
#[derive(Debug, Clone)]
pub struct RegionGeometry<'a> {
    pub region: &'a Region,
    pub contour: &'a Contour,
    /// Longest chord of the region.
    pub diameter: f64,
    /// Largest |κ| among the region's concave points.
    pub kappa_scale: f64,
    pub min_arc_len: usize,
    /// Cosine of the largest allowed angle between an inward normal and the chord.
    pub min_facing_cos: f64,
}

impl<'a> RegionGeometry<'a> {
    pub fn new(
        region: &'a Region,
        contour: &'a Contour,
        points: &[ConcavePoint],
        min_arc_len: usize,
        max_normal_angle_deg: f64,
    ) -> Self {
        let pts: Vec<(f64, f64)> = contour.points().iter().map(|&(x, y)| (x as f64, y as f64)).collect();
        let hull = convex_hull(&pts).unwrap_or(pts);
        let mut diameter: f64 = 0.0;
        for (i, a) in hull.iter().enumerate() {
            for b in &hull[i + 1..] {
                diameter = diameter.max(((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt());
            }
        }
        let kappa_scale = points.iter().map(|p| p.curvature.abs()).fold(0.0, f64::max);
        let min_facing_cos = max_normal_angle_deg.to_radians().cos();
        Self { region, contour, diameter, kappa_scale, min_arc_len, min_facing_cos }
    }

    /// Region pixel adjacent to a contour vertex, preferring the one deepest along the inward normal.
    pub fn anchor_pixel(&self, p: &ConcavePoint) -> Option<(usize, usize)> {
        let (vx, vy) = (p.position.0 as i64, p.position.1 as i64);
        let mask = &self.region.mask;
        [(vx - 1, vy - 1), (vx, vy - 1), (vx - 1, vy), (vx, vy)]
            .into_iter()
            .filter(|&(x, y)| x >= 0 && y >= 0 && mask.contains(x as usize, y as usize))
            .map(|(x, y)| {
                let d = (x as f64 + 0.5 - p.position.0) * p.inward_normal.0
                    + (y as f64 + 0.5 - p.position.1) * p.inward_normal.1;
                ((x as usize, y as usize), d)
            })
            .fold(None, |best: Option<((usize, usize), f64)>, cur| match best {
                Some(b) if b.1 >= cur.1 => Some(b),
                _ => Some(cur),
            })
            .map(|b| b.0)
    }

    /// The two contour arcs separated by vertices `i` and `j`, endpoints included.
    fn arcs(&self, i: usize, j: usize) -> (Vec<(f64, f64)>, Vec<(f64, f64)>) {
        let pts = self.contour.points();
        let n = pts.len();
        let walk = |from: usize, to: usize| {
            let len = (to + n - from) % n;
            (0..=len)
                .map(|k| {
                    let (x, y) = pts[(from + k) % n];
                    (x as f64, y as f64)
                })
                .collect::<Vec<_>>()
        };
        (walk(i, j), walk(j, i))
    }
}

/// Pixels of the 8-connected digital segment from `a` to `b`, endpoints included.
pub fn line_pixels(a: (usize, usize), b: (usize, usize)) -> Vec<(usize, usize)> {
    let (x0, y0) = (a.0 as i64, a.1 as i64);
    let (x1, y1) = (b.0 as i64, b.1 as i64);
    let steps = (x1 - x0).abs().max((y1 - y0).abs());
    if steps == 0 {
        return vec![a];
    }
    (0..=steps)
        .map(|k| {
            // exact rational rounding, halves away from the start point
            let x = x0 + div_round(k * (x1 - x0), steps);
            let y = y0 + div_round(k * (y1 - y0), steps);
            (x as usize, y as usize)
        })
        .collect()
}

fn div_round(num: i64, den: i64) -> i64 {
    let q = (2 * num.abs() + den) / (2 * den);
    if num < 0 { -q } else { q }
}

/// Scores one candidate pair. Pairs whose arcs are shorter than the minimum
/// arc length on either side are rejected with `ArcTooShort`, pairs whose
/// inward normals do not both point along the chord with `NormalsNotFacing`.
pub fn score_pair(
    geo: &RegionGeometry<'_>,
    p: &ConcavePoint,
    q: &ConcavePoint,
    weights: &ScoreWeights,
) -> Result<PairScore, SplitError> {
    if p.index == q.index {
        return Err(SplitError::InvalidParameter("pair endpoints must differ"));
    }
    let n = geo.contour.len();
    let fwd = (q.index + n - p.index) % n;
    if fwd < geo.min_arc_len || n - fwd < geo.min_arc_len {
        return Err(SplitError::ArcTooShort);
    }
    let d = ((p.position.0 - q.position.0).powi(2) + (p.position.1 - q.position.1).powi(2)).sqrt();
    if d > 0.0 {
        let u = ((q.position.0 - p.position.0) / d, (q.position.1 - p.position.1) / d);
        let at_p = p.inward_normal.0 * u.0 + p.inward_normal.1 * u.1;
        let at_q = -(q.inward_normal.0 * u.0 + q.inward_normal.1 * u.1);
        if at_p < geo.min_facing_cos || at_q < geo.min_facing_cos {
            return Err(SplitError::NormalsNotFacing);
        }
    }
    let p_pixel = geo.anchor_pixel(p).ok_or(SplitError::ChordOutsideRegion)?;
    let q_pixel = geo.anchor_pixel(q).ok_or(SplitError::ChordOutsideRegion)?;

    let line = line_pixels(p_pixel, q_pixel);
    let interior = &line[1..line.len().saturating_sub(1).max(1)];
    let convexity = if line.len() <= 2 {
        1.0
    } else {
        let inside = interior.iter().filter(|&&(x, y)| geo.region.mask.contains(x, y)).count();
        inside as f64 / interior.len() as f64
    };
    if convexity == 0.0 {
        return Err(SplitError::ChordOutsideRegion);
    }

    let (arc1, arc2) = geo.arcs(p.index, q.index);
    // arcs too straight to define an ellipse count as a unit residual
    let arc_residual = |arc: &[(f64, f64)]| fit_ellipse(arc).map(|e| e.residual).unwrap_or(1.0);
    let ellipse_fit = 1.0 / (1.0 + arc_residual(&arc1) + arc_residual(&arc2));

    let proximity = if geo.diameter > 0.0 { (1.0 - d / geo.diameter).clamp(0.0, 1.0) } else { 0.0 };
    let curvature = if geo.kappa_scale > 0.0 {
        (0.5 * (p.curvature.abs() + q.curvature.abs()) / geo.kappa_scale).min(1.0)
    } else {
        0.0
    };
    let total = weights.ellipse_fit * ellipse_fit
        + weights.proximity * proximity
        + weights.convexity * convexity
        + weights.curvature * curvature;
    Ok(PairScore { p: *p, q: *q, p_pixel, q_pixel, ellipse_fit, proximity, convexity, curvature, total })
}

/// Scores every unordered pair that passes the arc-length and chord guards.
pub fn score_all_pairs(
    geo: &RegionGeometry<'_>,
    points: &[ConcavePoint],
    weights: &ScoreWeights,
) -> Vec<PairScore> {
    let mut out = Vec::new();
    for (i, p) in points.iter().enumerate() {
        for q in &points[i + 1..] {
            if let Ok(s) = score_pair(geo, p, q, weights) {
                out.push(s);
            }
        }
    }
    out
}

fn orient(a: (f64, f64), b: (f64, f64), c: (f64, f64)) -> f64 {
    (b.0 - a.0) * (c.1 - a.1) - (b.1 - a.1) * (c.0 - a.0)
}

fn on_segment(a: (f64, f64), b: (f64, f64), c: (f64, f64)) -> bool {
    c.0 >= a.0.min(b.0) && c.0 <= a.0.max(b.0) && c.1 >= a.1.min(b.1) && c.1 <= a.1.max(b.1)
}

/// Closed-segment intersection test.
pub fn segments_intersect(a: (f64, f64), b: (f64, f64), c: (f64, f64), d: (f64, f64)) -> bool {
    let (o1, o2, o3, o4) = (orient(a, b, c), orient(a, b, d), orient(c, d, a), orient(c, d, b));
    if ((o1 > 0.0 && o2 < 0.0) || (o1 < 0.0 && o2 > 0.0)) && ((o3 > 0.0 && o4 < 0.0) || (o3 < 0.0 && o4 > 0.0)) {
        return true;
    }
    (o1 == 0.0 && on_segment(a, b, c))
        || (o2 == 0.0 && on_segment(a, b, d))
        || (o3 == 0.0 && on_segment(c, d, a))
        || (o4 == 0.0 && on_segment(c, d, b))
}

/// Greedy selection by descending total score: a pair is accepted when it
/// reaches `score_min`, neither endpoint is already used and its chord does
/// not cross an accepted chord.
pub fn select_pairs(scores: &[PairScore], score_min: f64) -> Vec<PairScore> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| {
        let (sa, sb) = (&scores[a], &scores[b]);
        sb.total
            .total_cmp(&sa.total)
            .then((sa.p.index, sa.q.index).cmp(&(sb.p.index, sb.q.index)))
    });
    let mut used: Vec<usize> = Vec::new();
    let mut accepted: Vec<PairScore> = Vec::new();
    for i in order {
        let s = &scores[i];
        if s.total < score_min || used.contains(&s.p.index) || used.contains(&s.q.index) {
            continue;
        }
        let crosses = accepted
            .iter()
            .any(|a| segments_intersect(a.p.position, a.q.position, s.p.position, s.q.position));
        if crosses {
            continue;
        }
        used.extend([s.p.index, s.q.index]);
        accepted.push(*s);
    }
    accepted
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_pixels_are_eight_connected() {
        let l = line_pixels((0, 0), (5, 2));
        assert_eq!(l.len(), 6);
        assert_eq!(l[0], (0, 0));
        assert_eq!(l[5], (5, 2));
        for w in l.windows(2) {
            assert!(w[0].0.abs_diff(w[1].0) <= 1 && w[0].1.abs_diff(w[1].1) <= 1);
        }
        assert_eq!(line_pixels((3, 3), (3, 3)), vec![(3, 3)]);
    }

    #[test]
    fn segment_intersection_cases() {
        assert!(segments_intersect((0.0, 0.0), (2.0, 2.0), (0.0, 2.0), (2.0, 0.0)));
        assert!(!segments_intersect((0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (1.0, 1.0)));
        assert!(segments_intersect((0.0, 0.0), (2.0, 0.0), (1.0, 0.0), (1.0, 1.0)));
    }

    #[test]
    fn weights_must_sum_to_one() {
        assert!(ScoreWeights::default().validate().is_ok());
        let w = ScoreWeights { ellipse_fit: 0.5, ..ScoreWeights::default() };
        assert!(w.validate().is_err());
    }

    fn point(index: usize, x: f64, y: f64) -> ConcavePoint {
        ConcavePoint { index, position: (x, y), curvature: -0.2, sigma: 3.0, inward_normal: (0.0, 1.0) }
    }

    fn pair(p: ConcavePoint, q: ConcavePoint, total: f64) -> PairScore {
        PairScore {
            p,
            q,
            p_pixel: (0, 0),
            q_pixel: (0, 0),
            ellipse_fit: 0.0,
            proximity: 0.0,
            convexity: 0.0,
            curvature: 0.0,
            total,
        }
    }

    #[test]
    fn selection_is_greedy_and_exclusive() {
        let (a, b, c, d) = (point(0, 0.0, 0.0), point(10, 0.0, 10.0), point(20, 5.0, 0.0), point(30, 5.0, 10.0));
        let scores = vec![pair(a, b, 0.9), pair(a, c, 0.95), pair(c, d, 0.8), pair(b, d, 0.4)];
        let sel = select_pairs(&scores, 0.5);
        // (a,c) first, then (a,b) blocked by a, (c,d) blocked by c; (b,d) below threshold
        assert_eq!(sel.len(), 1);
        assert_eq!((sel[0].p.index, sel[0].q.index), (0, 20));
        assert!(select_pairs(&scores, 0.99).is_empty());
    }

    #[test]
    fn crossing_chords_are_skipped() {
        let (a, b, c, d) = (point(0, 0.0, 0.0), point(10, 10.0, 10.0), point(20, 0.0, 10.0), point(30, 10.0, 0.0));
        let sel = select_pairs(&[pair(a, b, 0.9), pair(c, d, 0.8)], 0.5);
        assert_eq!(sel.len(), 1);
    }

    #[test]
    fn endpoints_must_face_each_other() {
        use crate::raster::{extract_contour, BinaryMask, InstanceMask};
        let m = BinaryMask::from_fn(60, 40, |x, y| {
            let (x, y) = (x as f64 + 0.5, y as f64 + 0.5);
            (x - 20.0).powi(2) + (y - 20.0).powi(2) <= 144.0 || (x - 40.0).powi(2) + (y - 20.0).powi(2) <= 144.0
        });
        let region = Region::new(InstanceMask::from_frame_mask(1, &m).unwrap()).unwrap();
        let contour = extract_contour(&region.mask).unwrap();
        let n = contour.len();
        let top = ConcavePoint { index: 0, position: (30.0, 13.0), curvature: -0.2, sigma: 3.0, inward_normal: (0.0, 1.0) };
        let bottom = ConcavePoint { index: n / 2, position: (30.0, 27.0), curvature: -0.2, sigma: 3.0, inward_normal: (0.0, -1.0) };
        let geo = RegionGeometry::new(&region, &contour, &[top, bottom], 8, 60.0);
        let w = ScoreWeights::default();
        assert!(score_pair(&geo, &top, &bottom, &w).is_ok());
        let parallel = ConcavePoint { inward_normal: (0.0, 1.0), ..bottom };
        assert_eq!(score_pair(&geo, &top, &parallel, &w), Err(SplitError::NormalsNotFacing));
    }
}
