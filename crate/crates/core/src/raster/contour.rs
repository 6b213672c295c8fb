//! Outer-boundary tracing along pixel edges ("crack" contours).
//!
//! Vertices sit on pixel corners: pixel `(x, y)` spans `[x, x+1) × [y, y+1)`.
//! Traversal keeps the foreground on the left, which in raw `(x, y)`
//! coordinates means a positive shoelace area. Foreground is 8-connected and
//! background 4-connected, so diagonal pixel pairs are traced as one boundary
//! that passes through the shared corner twice.

use super::{BinaryMask, InstanceMask, RasterError};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Contour {
    points: Vec<(i64, i64)>,
}

impl Contour {
    /// Validates closure, unit steps and minimum length.
    pub fn new(points: Vec<(i64, i64)>) -> Result<Self, RasterError> {
        if points.len() < 4 {
            return Err(RasterError::InvalidContour("fewer than 4 vertices"));
        }
        let n = points.len();
        for i in 0..n {
            let (a, b) = (points[i], points[(i + 1) % n]);
            if (a.0 - b.0).abs() + (a.1 - b.1).abs() != 1 {
                return Err(RasterError::InvalidContour("vertices must be unit steps apart"));
            }
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[(i64, i64)] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Exposed pixel-edge count; every step is one edge.
    pub fn perimeter(&self) -> usize {
        self.points.len()
    }

    /// Twice the signed shoelace area; positive for foreground-on-the-left.
    pub fn signed_area2(&self) -> i64 {
        let n = self.points.len();
        (0..n)
            .map(|i| {
                let (a, b) = (self.points[i], self.points[(i + 1) % n]);
                a.0 * b.1 - b.0 * a.1
            })
            .sum()
    }

    /// Euclidean length of the vertex polygon after circular Gaussian
    /// smoothing of the coordinates; approximates the length of the
    /// underlying smooth boundary rather than the staircase.
    pub fn smoothed_length(&self, sigma: f64) -> f64 {
        let pts: Vec<(f64, f64)> = self.points.iter().map(|&(x, y)| (x as f64, y as f64)).collect();
        let s = smooth_closed(&pts, sigma);
        let n = s.len();
        (0..n)
            .map(|i| {
                let (a, b) = (s[i], s[(i + 1) % n]);
                ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt()
            })
            .sum()
    }

    /// Rasterizes the enclosed pixels (even-odd rule on pixel centers) into
    /// a `width`×`height` mask.
    pub fn fill(&self, width: usize, height: usize) -> BinaryMask {
        let mut rows: Vec<Vec<i64>> = vec![Vec::new(); height];
        let n = self.points.len();
        for i in 0..n {
            let (a, b) = (self.points[i], self.points[(i + 1) % n]);
            if a.0 == b.0 {
                let y = a.1.min(b.1);
                if y >= 0 && (y as usize) < height {
                    rows[y as usize].push(a.0);
                }
            }
        }
        let mut m = BinaryMask::empty(width, height);
        for (y, xs) in rows.iter_mut().enumerate() {
            xs.sort_unstable();
            for pair in xs.chunks_exact(2) {
                for x in pair[0].max(0)..pair[1].min(width as i64) {
                    m.set(x as usize, y, true);
                }
            }
        }
        m
    }
}

/// Circular Gaussian smoothing of a closed polyline; `sigma` in vertices.
pub(crate) fn smooth_closed(pts: &[(f64, f64)], sigma: f64) -> Vec<(f64, f64)> {
    let n = pts.len();
    if sigma <= 0.0 || n == 0 {
        return pts.to_vec();
    }
    let radius = (3.0 * sigma).ceil() as i64;
    let kernel: Vec<f64> = (-radius..=radius)
        .map(|k| (-(k * k) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let norm: f64 = kernel.iter().sum();
    (0..n as i64)
        .map(|i| {
            let (mut sx, mut sy) = (0.0, 0.0);
            for (k, w) in (-radius..=radius).zip(&kernel) {
                let j = (i + k).rem_euclid(n as i64) as usize;
                sx += w * pts[j].0;
                sy += w * pts[j].1;
            }
            (sx / norm, sy / norm)
        })
        .collect()
}

/// Traces the outer boundary of the instance in frame coordinates. Holes are ignored.
pub fn extract_contour(m: &InstanceMask) -> Result<Contour, RasterError> {
    let b = m.bbox();
    let local = trace_outer(m.local())?;
    let pts = local
        .into_iter()
        .map(|(x, y)| (x + b.x as i64, y + b.y as i64))
        .collect();
    Ok(Contour { points: pts })
}

/// Traces the outer boundary of the component containing the first
/// foreground pixel (row-major) of `mask`, in the mask's own coordinates.
pub fn trace_outer(mask: &BinaryMask) -> Result<Vec<(i64, i64)>, RasterError> {
    let (sx, sy) = mask.foreground().next().ok_or(RasterError::EmptyMask)?;
    let start = (sx as i64, sy as i64);
    let start_dir = (1i64, 0i64);
    let mut v = start;
    let mut d = start_dir;
    let mut pts = Vec::new();
    loop {
        pts.push(v);
        v = (v.0 + d.0, v.1 + d.1);
        let (al, ar) = ahead_pixels(v, d);
        d = if mask.get_signed(ar.0, ar.1) {
            (d.1, -d.0) // right turn
        } else if mask.get_signed(al.0, al.1) {
            d
        } else {
            (-d.1, d.0) // left turn
        };
        if v == start && d == start_dir {
            break;
        }
    }
    Ok(pts)
}

/// Pixels to the left and right of the edge leaving vertex `v` along `d`.
fn ahead_pixels(v: (i64, i64), d: (i64, i64)) -> ((i64, i64), (i64, i64)) {
    let n = (-d.1, d.0);
    let left = (
        (2 * v.0 + d.0 + n.0 - 1).div_euclid(2),
        (2 * v.1 + d.1 + n.1 - 1).div_euclid(2),
    );
    let right = (
        (2 * v.0 + d.0 - n.0 - 1).div_euclid(2),
        (2 * v.1 + d.1 - n.1 - 1).div_euclid(2),
    );
    (left, right)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inst(mask: &BinaryMask) -> InstanceMask {
        InstanceMask::from_frame_mask(1, mask).unwrap()
    }

    #[test]
    fn single_pixel_gives_four_corners() {
        let m = BinaryMask::from_fn(3, 3, |x, y| x == 1 && y == 1);
        let c = extract_contour(&inst(&m)).unwrap();
        assert_eq!(c.points(), &[(1, 1), (2, 1), (2, 2), (1, 2)]);
        assert!(c.signed_area2() > 0);
    }

    #[test]
    fn square_3x3_has_twelve_edges() {
        let m = BinaryMask::from_fn(5, 5, |x, y| (1..4).contains(&x) && (1..4).contains(&y));
        let c = extract_contour(&inst(&m)).unwrap();
        assert_eq!(c.perimeter(), 12);
        assert_eq!(c.signed_area2(), 18);
    }

    #[test]
    fn diagonal_pair_traced_as_one_boundary() {
        let m = BinaryMask::from_fn(2, 2, |x, y| x == y);
        let c = extract_contour(&inst(&m)).unwrap();
        assert_eq!(c.perimeter(), 8);
        assert_eq!(c.fill(2, 2), m);
    }

    #[test]
    fn holes_are_ignored() {
        let m = BinaryMask::from_fn(5, 5, |x, y| !(x == 2 && y == 2));
        let c = extract_contour(&inst(&m)).unwrap();
        assert_eq!(c.perimeter(), 20);
    }

    #[test]
    fn empty_mask_is_an_error() {
        assert_eq!(trace_outer(&BinaryMask::empty(2, 2)), Err(RasterError::EmptyMask));
    }

    #[test]
    fn new_validates_steps() {
        assert!(Contour::new(vec![(0, 0), (1, 0), (1, 1), (0, 1)]).is_ok());
        assert!(Contour::new(vec![(0, 0), (2, 0), (2, 1), (0, 1)]).is_err());
        assert!(Contour::new(vec![(0, 0), (1, 0)]).is_err());
    }
}
