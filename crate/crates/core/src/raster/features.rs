use serde::{Deserialize, Serialize};

use super::contour::extract_contour;
use super::hull::{convex_hull, count_lattice_in_convex};
use super::{InstanceMask, RasterError};

/// Eccentricity reported when the second-moment matrix is singular.
pub const DEGENERATE_ECCENTRICITY: f64 = 0.9999;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShapeFeatures {
    /// Foreground pixel count.
    pub area: usize,
    /// Exposed pixel edges along the outer contour.
    pub perimeter: usize,
    /// Area over the rasterized convex hull of pixel centers.
    pub solidity: f64,
    /// Ellipse-of-inertia eccentricity.
    pub eccentricity: f64,
    /// Mean pixel center, pixel `(x, y)` centered at `(x + 0.5, y + 0.5)`.
    pub centroid: (f64, f64),
}

pub fn compute_shape_features(m: &InstanceMask) -> Result<ShapeFeatures, RasterError> {
    let area = m.area();
    if area == 0 {
        return Err(RasterError::EmptyMask);
    }
    let perimeter = extract_contour(m)?.perimeter();
    let (cx, cy, eccentricity) = moments(m);
    let solidity = solidity(m, area);
    Ok(ShapeFeatures { area, perimeter, solidity, eccentricity, centroid: (cx, cy) })
}

fn moments(m: &InstanceMask) -> (f64, f64, f64) {
    let n = m.area() as f64;
    let (mut sx, mut sy) = (0.0, 0.0);
    for (x, y) in m.pixels() {
        sx += x as f64 + 0.5;
        sy += y as f64 + 0.5;
    }
    let (cx, cy) = (sx / n, sy / n);
    let (mut m20, mut m02, mut m11) = (0.0, 0.0, 0.0);
    for (x, y) in m.pixels() {
        let dx = x as f64 + 0.5 - cx;
        let dy = y as f64 + 0.5 - cy;
        m20 += dx * dx;
        m02 += dy * dy;
        m11 += dx * dy;
    }
    (cx, cy, eccentricity_from_moments(m20 / n, m02 / n, m11 / n))
}

/// `sqrt(1 - λmin / λmax)` of the central second-moment matrix.
pub fn eccentricity_from_moments(mu20: f64, mu02: f64, mu11: f64) -> f64 {
    let mean = 0.5 * (mu20 + mu02);
    let disc = (0.25 * (mu20 - mu02).powi(2) + mu11 * mu11).sqrt();
    let (lmax, lmin) = (mean + disc, mean - disc);
    if lmax <= 0.0 || lmin <= 1e-12 * lmax {
        return DEGENERATE_ECCENTRICITY;
    }
    (1.0 - lmin / lmax).max(0.0).sqrt()
}

fn solidity(m: &InstanceMask, area: usize) -> f64 {
    // only the extreme pixels of each row can be hull vertices
    let b = m.bbox();
    let local = m.local();
    let mut pts = Vec::with_capacity(2 * b.h);
    for y in 0..b.h {
        let mut row = (0..b.w).filter(|&x| local.get(x, y));
        if let Some(first) = row.next() {
            let last = row.last().unwrap_or(first);
            let yc = (b.y + y) as f64 + 0.5;
            pts.push(((b.x + first) as f64 + 0.5, yc));
            pts.push(((b.x + last) as f64 + 0.5, yc));
        }
    }
    match convex_hull(&pts) {
        Ok(hull) => {
            let hull_area = count_lattice_in_convex(&hull).max(area);
            area as f64 / hull_area as f64
        }
        // a single row or column of pixels is its own hull
        Err(_) => 1.0,
    }
}
