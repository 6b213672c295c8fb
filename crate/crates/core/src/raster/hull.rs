use super::RasterError;

fn cross(o: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

/// Convex hull by Andrew's monotone chain. Vertices are returned
/// counter-clockwise (positive signed area in raw coordinates) with
/// collinear boundary points dropped.
pub fn convex_hull(points: &[(f64, f64)]) -> Result<Vec<(f64, f64)>, RasterError> {
    let mut pts: Vec<(f64, f64)> = points.to_vec();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    pts.dedup();
    if pts.len() < 3 {
        return Err(RasterError::CollinearInput);
    }
    let mut lower: Vec<(f64, f64)> = Vec::with_capacity(pts.len());
    for &p in &pts {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0.0 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<(f64, f64)> = Vec::with_capacity(pts.len());
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0.0 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    if lower.len() < 3 {
        return Err(RasterError::CollinearInput);
    }
    Ok(lower)
}

/// Twice the signed area of a polygon.
pub fn polygon_area2(poly: &[(f64, f64)]) -> f64 {
    let n = poly.len();
    (0..n)
        .map(|i| {
            let (a, b) = (poly[i], poly[(i + 1) % n]);
            a.0 * b.1 - b.0 * a.1
        })
        .sum()
}

/// Counts integer lattice points `(x + 0.5, y + 0.5)` lying inside or on a
/// counter-clockwise convex polygon.
pub fn count_lattice_in_convex(poly: &[(f64, f64)]) -> usize {
    const EPS: f64 = 1e-9;
    let ymin = poly.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let ymax = poly.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    let n = poly.len();
    let mut total = 0usize;
    let mut row = (ymin - 0.5 - EPS).ceil() as i64;
    while (row as f64) + 0.5 <= ymax + EPS {
        let yc = row as f64 + 0.5;
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for i in 0..n {
            let (a, b) = (poly[i], poly[(i + 1) % n]);
            let (y0, y1) = (a.1.min(b.1), a.1.max(b.1));
            if yc < y0 - EPS || yc > y1 + EPS {
                continue;
            }
            if (b.1 - a.1).abs() < EPS {
                lo = lo.min(a.0.min(b.0));
                hi = hi.max(a.0.max(b.0));
            } else {
                let t = ((yc - a.1) / (b.1 - a.1)).clamp(0.0, 1.0);
                let x = a.0 + t * (b.0 - a.0);
                lo = lo.min(x);
                hi = hi.max(x);
            }
        }
        if lo <= hi {
            let first = (lo - 0.5 - EPS).ceil() as i64;
            let last = (hi - 0.5 + EPS).floor() as i64;
            if last >= first {
                total += (last - first + 1) as usize;
            }
        }
        row += 1;
    }
    total
}
