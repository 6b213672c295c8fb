//! Minimum-cost dividing curve between two concave endpoints.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::raster::{BinaryMask, GrayImage};

use super::scoring::line_pixels;
use super::SplitError;

#[derive(Debug, Clone, PartialEq)]
pub struct DividingCurve {
    /// 8-connected pixel path from the first endpoint to the second.
    pub pixels: Vec<(usize, usize)>,
    /// True when no path existed inside the search sectors and the straight
    /// chord, clipped to the region, was used instead.
    pub fallback: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct CurveParams {
    pub sector_half_angle_deg: f64,
    /// Weight of the distance-from-chord penalty.
    pub path_lambda: f64,
}

impl Default for CurveParams {
    fn default() -> Self {
        Self { sector_half_angle_deg: 30.0, path_lambda: 0.5 }
    }
}

#[derive(Copy, Clone, PartialEq)]
struct Node {
    cost: f64,
    idx: usize,
}

impl Eq for Node {}

impl Ord for Node {
    fn cmp(&self, other: &Self) -> Ordering {
        other.cost.total_cmp(&self.cost).then_with(|| other.idx.cmp(&self.idx))
    }
}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn in_sector(c: (f64, f64), apex: (f64, f64), dir: (f64, f64), radius: f64, cos_half: f64) -> bool {
    let v = (c.0 - apex.0, c.1 - apex.1);
    let r = (v.0 * v.0 + v.1 * v.1).sqrt();
    if r <= 1.5 {
        return true;
    }
    r <= radius && (v.0 * dir.0 + v.1 * dir.1) >= cos_half * r
}

/// Cheapest 8-connected path through `region` from `p` to `q`, restricted to
/// two sectors opening from each endpoint toward the other. Pixel cost is the
/// gray intensity plus `path_lambda` times the distance from the chord over the
/// chord length, so dark seams close to the chord are preferred.
pub fn shortest_sector_path(
    region: &BinaryMask,
    gray: &GrayImage,
    p: (usize, usize),
    q: (usize, usize),
    params: &CurveParams,
) -> Result<Vec<(usize, usize)>, SplitError> {
    let (w, h) = (region.width(), region.height());
    if gray.width() != w || gray.height() != h {
        return Err(SplitError::InvalidParameter("gray image does not match region"));
    }
    if !region.get(p.0, p.1) || !region.get(q.0, q.1) {
        return Err(SplitError::NoPathInSector);
    }
    if p == q {
        return Ok(vec![p]);
    }
    let pc = (p.0 as f64 + 0.5, p.1 as f64 + 0.5);
    let qc = (q.0 as f64 + 0.5, q.1 as f64 + 0.5);
    let len = ((qc.0 - pc.0).powi(2) + (qc.1 - pc.1).powi(2)).sqrt();
    let dir = ((qc.0 - pc.0) / len, (qc.1 - pc.1) / len);
    let cos_half = params.sector_half_angle_deg.to_radians().cos();
    let allowed = |x: usize, y: usize| {
        let c = (x as f64 + 0.5, y as f64 + 0.5);
        region.get(x, y)
            && (in_sector(c, pc, dir, len, cos_half) || in_sector(c, qc, (-dir.0, -dir.1), len, cos_half))
    };
    let pixel_cost = |x: usize, y: usize| {
        let c = (x as f64 + 0.5 - pc.0, y as f64 + 0.5 - pc.1);
        let perp = (c.0 * dir.1 - c.1 * dir.0).abs();
        gray.get(x, y) as f64 + params.path_lambda * perp / len + 1e-9
    };

    let mut dist = vec![f64::INFINITY; w * h];
    let mut prev = vec![usize::MAX; w * h];
    let start = p.1 * w + p.0;
    let goal = q.1 * w + q.0;
    dist[start] = 0.0;
    let mut heap = BinaryHeap::new();
    heap.push(Node { cost: 0.0, idx: start });
    while let Some(Node { cost, idx }) = heap.pop() {
        if idx == goal {
            break;
        }
        if cost > dist[idx] {
            continue;
        }
        let (x, y) = ((idx % w) as i64, (idx / w) as i64);
        for dy in -1..=1i64 {
            for dx in -1..=1i64 {
                if dx == 0 && dy == 0 {
                    continue;
                }
                let (nx, ny) = (x + dx, y + dy);
                if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                    continue;
                }
                let (nx, ny) = (nx as usize, ny as usize);
                if !allowed(nx, ny) {
                    continue;
                }
                let step = if dx != 0 && dy != 0 { std::f64::consts::SQRT_2 } else { 1.0 };
                let nc = cost + step * pixel_cost(nx, ny);
                let ni = ny * w + nx;
                if nc < dist[ni] {
                    dist[ni] = nc;
                    prev[ni] = idx;
                    heap.push(Node { cost: nc, idx: ni });
                }
            }
        }
    }
    if !dist[goal].is_finite() {
        return Err(SplitError::NoPathInSector);
    }
    let mut path = vec![q];
    let mut cur = goal;
    while cur != start {
        cur = prev[cur];
        path.push((cur % w, cur / w));
    }
    path.reverse();
    Ok(path)
}

/// Dividing curve between two endpoint pixels, falling back to the straight
/// chord clipped to the region when the sector search finds no path.
pub fn recover_dividing_curve(
    region: &BinaryMask,
    gray: &GrayImage,
    p: (usize, usize),
    q: (usize, usize),
    params: &CurveParams,
) -> Result<DividingCurve, SplitError> {
    match shortest_sector_path(region, gray, p, q, params) {
        Ok(pixels) => Ok(DividingCurve { pixels, fallback: false }),
        Err(SplitError::NoPathInSector) => {
            let pixels: Vec<_> = line_pixels(p, q)
                .into_iter()
                .filter(|&(x, y)| x < region.width() && y < region.height() && region.get(x, y))
                .collect();
            if pixels.is_empty() {
                return Err(SplitError::ChordOutsideRegion);
            }
            Ok(DividingCurve { pixels, fallback: true })
        }
        Err(e) => Err(e),
    }
}
