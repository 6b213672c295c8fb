use crate::raster::{smooth_closed, Contour};

use super::SplitError;

/// Signed curvature at every contour vertex after Gaussian smoothing.
/// Positive values are convex (the boundary bends away from the interior).
#[derive(Debug, Clone, PartialEq)]
pub struct CurvatureProfile {
    pub sigma: f64,
    pub kappa: Vec<f64>,
    /// Smoothed vertex positions the curvature was measured on.
    pub smoothed: Vec<(f64, f64)>,
}

impl CurvatureProfile {
    pub fn len(&self) -> usize {
        self.kappa.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kappa.is_empty()
    }

    /// Unit tangent at vertex `i` by central difference.
    pub fn tangent(&self, i: usize) -> (f64, f64) {
        let n = self.smoothed.len();
        let (a, b) = (self.smoothed[(i + n - 1) % n], self.smoothed[(i + 1) % n]);
        let (tx, ty) = (b.0 - a.0, b.1 - a.1);
        let len = (tx * tx + ty * ty).sqrt().max(f64::MIN_POSITIVE);
        (tx / len, ty / len)
    }

    /// Unit normal pointing into the region (left of the traversal).
    pub fn inward_normal(&self, i: usize) -> (f64, f64) {
        let (tx, ty) = self.tangent(i);
        (-ty, tx)
    }
}

pub const MIN_CONTOUR_LEN: usize = 8;

/// `κ = (x'y'' − y'x'') / (x'² + y'²)^{3/2}` on the smoothed contour with
/// circular central differences; `sigma` is measured in vertices.
pub fn curvature_profile(c: &Contour, sigma: f64) -> Result<CurvatureProfile, SplitError> {
    if c.len() < MIN_CONTOUR_LEN {
        return Err(SplitError::ContourTooShort(c.len()));
    }
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(SplitError::InvalidParameter("sigma must be positive"));
    }
    let pts: Vec<(f64, f64)> = c.points().iter().map(|&(x, y)| (x as f64, y as f64)).collect();
    let s = smooth_closed(&pts, sigma);
    let n = s.len();
    let kappa = (0..n)
        .map(|i| {
            let (prev, cur, next) = (s[(i + n - 1) % n], s[i], s[(i + 1) % n]);
            let dx = 0.5 * (next.0 - prev.0);
            let dy = 0.5 * (next.1 - prev.1);
            let ddx = next.0 - 2.0 * cur.0 + prev.0;
            let ddy = next.1 - 2.0 * cur.1 + prev.1;
            let speed2 = dx * dx + dy * dy;
            if speed2 <= 1e-18 {
                0.0
            } else {
                (dx * ddy - dy * ddx) / speed2.powf(1.5)
            }
        })
        .collect();
    Ok(CurvatureProfile { sigma, kappa, smoothed: s })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::{extract_contour, BinaryMask, InstanceMask};

    #[test]
    fn too_short_contour_is_rejected() {
        let m = BinaryMask::from_fn(1, 1, |_, _| true);
        let c = extract_contour(&InstanceMask::from_frame_mask(0, &m).unwrap()).unwrap();
        assert_eq!(curvature_profile(&c, 3.0), Err(SplitError::ContourTooShort(4)));
    }

    #[test]
    fn straight_edges_have_zero_curvature() {
        let m = BinaryMask::from_fn(80, 80, |x, y| (5..75).contains(&x) && (5..75).contains(&y));
        let c = extract_contour(&InstanceMask::from_frame_mask(0, &m).unwrap()).unwrap();
        let p = curvature_profile(&c, 3.0).unwrap();
        // middle of the top edge: vertices 20..50 run along y = 5
        for i in 20..50 {
            assert_eq!(c.points()[i].1, 5);
            assert!(p.kappa[i].abs() < 0.01, "kappa[{i}] = {}", p.kappa[i]);
        }
        // corners are convex
        assert!(p.kappa.iter().cloned().fold(f64::MIN, f64::max) > 0.05);
    }
}
