//! Direct least-squares ellipse fitting (Fitzgibbon, Pilu & Fisher), in the
//! numerically stable block form of Halíř & Flusser.
//!
//! Points are centered on their mean and scaled to unit RMS radius before
//! fitting. The reported residual is measured in that normalized frame, which
//! makes it invariant to translation, rotation and scale of the input:
//!
//! ```text
//! residual = mean_i (aᵀ v_i)² / ‖Q(a)‖²_F
//! ```
//!
//! where `v_i = [x², xy, y², x, y, 1]` and `Q(a)` is the symmetric 3×3 conic matrix.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::SplitError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EllipseModel {
    pub center: (f64, f64),
    /// Semi-major axis.
    pub a: f64,
    /// Semi-minor axis.
    pub b: f64,
    /// Major-axis orientation in `[0, π)`.
    pub theta: f64,
    pub residual: f64,
    /// Set when the conic fit was not an ellipse and the moment-based
    /// bounding ellipse was substituted.
    pub fallback: bool,
}

type Conic = [f64; 6];

fn conic_matrix_norm2(c: &Conic) -> f64 {
    let [a, b, cc, d, e, f] = *c;
    a * a + cc * cc + f * f + 0.5 * (b * b + d * d + e * e)
}

fn algebraic(c: &Conic, x: f64, y: f64) -> f64 {
    c[0] * x * x + c[1] * x * y + c[2] * y * y + c[3] * x + c[4] * y + c[5]
}

fn residual(c: &Conic, pts: &[(f64, f64)]) -> f64 {
    let norm2 = conic_matrix_norm2(c);
    if norm2 <= 0.0 {
        return f64::INFINITY;
    }
    let s: f64 = pts.iter().map(|&(x, y)| algebraic(c, x, y).powi(2)).sum();
    s / pts.len() as f64 / norm2
}

struct Normalized {
    pts: Vec<(f64, f64)>,
    mean: (f64, f64),
    scale: f64,
    /// Covariance eigenvalues (max, min) and major-axis direction in the normalized frame.
    cov: (f64, f64, f64),
}

fn normalize(points: &[(f64, f64)]) -> Normalized {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for &(x, y) in points {
        let (dx, dy) = (x - mx, y - my);
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    let (sxx, syy, sxy) = (sxx / n, syy / n, sxy / n);
    let rms = (sxx + syy).sqrt();
    let scale = if rms > 0.0 { 1.0 / rms } else { 1.0 };
    let pts = points.iter().map(|&(x, y)| ((x - mx) * scale, (y - my) * scale)).collect();
    let mean_ev = 0.5 * (sxx + syy);
    let disc = (0.25 * (sxx - syy).powi(2) + sxy * sxy).sqrt();
    let s2 = scale * scale;
    let angle = 0.5 * (2.0 * sxy).atan2(sxx - syy);
    Normalized { pts, mean: (mx, my), scale, cov: ((mean_ev + disc) * s2, (mean_ev - disc) * s2, angle) }
}

/// Geometric parameters of an elliptic conic, or `None` if it is not a real ellipse.
fn conic_to_params(c: &Conic) -> Option<((f64, f64), f64, f64, f64)> {
    let [a, b, cc, d, e, _] = *c;
    let det = 4.0 * a * cc - b * b;
    if det <= 0.0 {
        return None;
    }
    let x0 = (b * e - 2.0 * cc * d) / det;
    let y0 = (b * d - 2.0 * a * e) / det;
    let f0 = algebraic(c, x0, y0);
    let mean = 0.5 * (a + cc);
    let disc = (0.25 * (a - cc).powi(2) + 0.25 * b * b).sqrt();
    let (l1, l2) = (mean - disc, mean + disc); // l1 <= l2
    // a point (the center) must lie on the opposite side of the curve from infinity
    if f0 == 0.0 || l1 == 0.0 || -f0 / l1 <= 0.0 || -f0 / l2 <= 0.0 {
        return None;
    }
    let major = (-f0 / l1).sqrt();
    let minor = (-f0 / l2).sqrt();
    // major axis is the eigenvector of the quadratic form with the smaller eigenvalue
    let theta = if b.abs() < 1e-300 && (a - cc).abs() < 1e-300 {
        0.0
    } else {
        0.5 * b.atan2(a - cc) + std::f64::consts::FRAC_PI_2
    };
    Some(((x0, y0), major, minor, wrap_angle(theta)))
}

fn wrap_angle(t: f64) -> f64 {
    let pi = std::f64::consts::PI;
    let w = t.rem_euclid(pi);
    if w >= pi { 0.0 } else { w }
}

fn params_to_conic(center: (f64, f64), a: f64, b: f64, theta: f64) -> Conic {
    let (s, c) = theta.sin_cos();
    let (a2, b2) = (a * a, b * b);
    let qa = c * c / a2 + s * s / b2;
    let qb = 2.0 * c * s * (1.0 / a2 - 1.0 / b2);
    let qc = s * s / a2 + c * c / b2;
    let (x0, y0) = center;
    [
        qa,
        qb,
        qc,
        -2.0 * qa * x0 - qb * y0,
        -qb * x0 - 2.0 * qc * y0,
        qa * x0 * x0 + qb * x0 * y0 + qc * y0 * y0 - 1.0,
    ]
}

/// Null vector of a rank-2 3×3 matrix: the largest cross product of its rows.
fn null_vector(m: &Matrix3<f64>) -> Option<Vector3<f64>> {
    let r: [Vector3<f64>; 3] = [m.row(0).transpose(), m.row(1).transpose(), m.row(2).transpose()];
    [r[0].cross(&r[1]), r[0].cross(&r[2]), r[1].cross(&r[2])]
        .into_iter()
        .max_by(|a, b| a.norm_squared().total_cmp(&b.norm_squared()))
        .filter(|v| v.norm_squared() > 1e-300)
}

/// Ellipse-constrained conic on normalized points, scaled to `4AC − B² = 1`.
fn direct_fit(pts: &[(f64, f64)]) -> Result<Conic, SplitError> {
    let mut s1 = Matrix3::<f64>::zeros();
    let mut s2 = Matrix3::<f64>::zeros();
    let mut s3 = Matrix3::<f64>::zeros();
    for &(x, y) in pts {
        let d1 = Vector3::new(x * x, x * y, y * y);
        let d2 = Vector3::new(x, y, 1.0);
        s1 += d1 * d1.transpose();
        s2 += d1 * d2.transpose();
        s3 += d2 * d2.transpose();
    }
    let s3_inv = s3.try_inverse().ok_or(SplitError::DegenerateInput)?;
    let t = -s3_inv * s2.transpose();
    let reduced = s1 + s2 * t;
    // C1⁻¹ for C1 = [[0, 0, 2], [0, -1, 0], [2, 0, 0]]
    let c1_inv = Matrix3::new(0.0, 0.0, 0.5, 0.0, -1.0, 0.0, 0.5, 0.0, 0.0);
    let m = c1_inv * reduced;

    let mut best: Option<(f64, Vector3<f64>)> = None;
    for ev in m.complex_eigenvalues().iter() {
        if ev.im.abs() > 1e-9 * (1.0 + ev.re.abs()) {
            continue;
        }
        let shifted = m - Matrix3::identity() * ev.re;
        let Some(v) = null_vector(&shifted) else { continue };
        let cons = 4.0 * v[0] * v[2] - v[1] * v[1];
        if cons > 0.0 && best.map_or(true, |(c, _)| ev.re.abs() < c) {
            best = Some((ev.re.abs(), v / cons.sqrt()));
        }
    }
    let (_, a1) = best.ok_or(SplitError::NoEllipseSolution)?;
    let a2 = t * a1;
    Ok([a1[0], a1[1], a1[2], a2[0], a2[1], a2[2]])
}

/// Fits an ellipse to at least six non-collinear points. When the
/// least-squares conic is not a real ellipse, the moment-based bounding
/// ellipse of the points is returned with `fallback` set.
pub fn fit_ellipse(points: &[(f64, f64)]) -> Result<EllipseModel, SplitError> {
    if points.len() < 6 {
        return Err(SplitError::DegenerateInput);
    }
    let norm = normalize(points);
    let (lmax, lmin, angle) = norm.cov;
    if !(lmax > 0.0) || lmin <= 1e-10 * lmax {
        return Err(SplitError::DegenerateInput);
    }
    let fitted = direct_fit(&norm.pts).ok().and_then(|c| conic_to_params(&c).map(|p| (c, p)));
    let (conic, (center, a, b, theta), fallback) = match fitted {
        Some((c, p)) => (c, p, false),
        None => {
            // scale the covariance ellipse until it encloses every point
            let (s, c) = angle.sin_cos();
            let k2 = norm
                .pts
                .iter()
                .map(|&(x, y)| {
                    let u = c * x + s * y;
                    let v = -s * x + c * y;
                    u * u / lmax + v * v / lmin
                })
                .fold(0.0, f64::max);
            let k = k2.sqrt().max(1e-12);
            let (a, b) = (k * lmax.sqrt(), k * lmin.sqrt());
            let theta = wrap_angle(angle);
            (params_to_conic((0.0, 0.0), a, b, theta), ((0.0, 0.0), a, b, theta), true)
        }
    };
    let res = residual(&conic, &norm.pts);
    Ok(EllipseModel {
        center: (center.0 / norm.scale + norm.mean.0, center.1 / norm.scale + norm.mean.1),
        a: a / norm.scale,
        b: b / norm.scale,
        theta,
        residual: res,
        fallback,
    })
}

/// Points on an ellipse, for tests and scene generation.
pub fn sample_ellipse(center: (f64, f64), a: f64, b: f64, theta: f64, n: usize) -> Vec<(f64, f64)> {
    let (s, c) = theta.sin_cos();
    (0..n)
        .map(|i| {
            let t = std::f64::consts::TAU * i as f64 / n as f64;
            let (u, v) = (a * t.cos(), b * t.sin());
            (center.0 + c * u - s * v, center.1 + s * u + c * v)
        })
        .collect()
}
