//! Cutting a region along dividing curves into disjoint connected pieces.

use std::collections::HashSet;

use crate::raster::{label_components, BinaryMask, Connectivity};

const N4: [(i64, i64); 4] = [(1, 0), (-1, 0), (0, 1), (0, -1)];

fn inside(region: &BinaryMask, x: i64, y: i64) -> bool {
    region.get_signed(x, y)
}

fn touches_outside(region: &BinaryMask, x: usize, y: usize) -> bool {
    N4.iter().any(|&(dx, dy)| !inside(region, x as i64 + dx, y as i64 + dy))
}

/// Makes an 8-connected path 4-connected by inserting a region pixel at each
/// diagonal step.
pub fn four_connect(region: &BinaryMask, path: &[(usize, usize)]) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(path.len() * 2);
    for (i, &p) in path.iter().enumerate() {
        if i > 0 {
            let a = path[i - 1];
            if a.0 != p.0 && a.1 != p.1 {
                if region.get(p.0, a.1) {
                    out.push((p.0, a.1));
                } else if region.get(a.0, p.1) {
                    out.push((a.0, p.1));
                }
            }
        }
        out.push(p);
    }
    out
}

/// Shortest 4-connected path inside the region from `start` to the nearest
/// pixel 4-adjacent to the outside, `start` excluded.
fn path_to_boundary(region: &BinaryMask, start: (usize, usize)) -> Vec<(usize, usize)> {
    let (w, h) = (region.width(), region.height());
    if touches_outside(region, start.0, start.1) {
        return Vec::new();
    }
    let mut prev = vec![usize::MAX; w * h];
    let s = start.1 * w + start.0;
    prev[s] = s;
    let mut queue = std::collections::VecDeque::from([s]);
    while let Some(i) = queue.pop_front() {
        let (x, y) = (i % w, i / w);
        if touches_outside(region, x, y) {
            let mut path = Vec::new();
            let mut cur = i;
            while cur != s {
                path.push((cur % w, cur / w));
                cur = prev[cur];
            }
            path.reverse();
            return path;
        }
        for (dx, dy) in N4 {
            let (nx, ny) = (x as i64 + dx, y as i64 + dy);
            if inside(region, nx, ny) {
                let ni = ny as usize * w + nx as usize;
                if prev[ni] == usize::MAX {
                    prev[ni] = i;
                    queue.push_back(ni);
                }
            }
        }
    }
    Vec::new()
}

/// All pixels removed by a set of dividing curves: each curve made
/// 4-connected and extended at both ends to the region boundary.
pub fn cut_pixels(region: &BinaryMask, curves: &[Vec<(usize, usize)>]) -> HashSet<(usize, usize)> {
    let mut cut = HashSet::new();
    for c in curves {
        if c.is_empty() {
            continue;
        }
        cut.extend(four_connect(region, c));
        cut.extend(path_to_boundary(region, c[0]));
        cut.extend(path_to_boundary(region, c[c.len() - 1]));
    }
    cut.retain(|&(x, y)| region.get(x, y));
    cut
}

/// Splits `region` along the curves. Pieces smaller than `min_piece_px` are
/// dissolved; removed pixels go to the adjacent piece with the nearest
/// centroid, layer by layer. The returned masks are disjoint, 8-connected and
/// together cover the region exactly. A single mask means no split happened.
pub fn split_region(region: &BinaryMask, curves: &[Vec<(usize, usize)>], min_piece_px: usize) -> Vec<BinaryMask> {
    let (w, h) = (region.width(), region.height());
    let cut = cut_pixels(region, curves);
    if cut.is_empty() {
        return vec![region.clone()];
    }
    let rest = BinaryMask::from_fn(w, h, |x, y| region.get(x, y) && !cut.contains(&(x, y)));
    let labels = label_components(&rest, Connectivity::Eight);
    let n = labels.count as usize;
    let mut sizes = vec![0usize; n + 1];
    for &l in &labels.labels {
        sizes[l as usize] += 1;
    }
    // surviving pieces get ids 1..=k
    let mut remap = vec![0u32; n + 1];
    let mut k = 0u32;
    for l in 1..=n {
        if sizes[l] >= min_piece_px.max(1) {
            k += 1;
            remap[l] = k;
        }
    }
    if k < 2 {
        return vec![region.clone()];
    }
    let mut owner: Vec<u32> = labels.labels.iter().map(|&l| remap[l as usize]).collect();
    let mut sums = vec![(0.0f64, 0.0f64, 0usize); k as usize + 1];
    for (i, &o) in owner.iter().enumerate() {
        if o > 0 {
            let s = &mut sums[o as usize];
            s.0 += (i % w) as f64;
            s.1 += (i / w) as f64;
            s.2 += 1;
        }
    }
    let centroids: Vec<(f64, f64)> =
        sums.iter().map(|s| if s.2 > 0 { (s.0 / s.2 as f64, s.1 / s.2 as f64) } else { (0.0, 0.0) }).collect();

    let mut pending: Vec<usize> =
        (0..w * h).filter(|&i| owner[i] == 0 && region.get(i % w, i / w)).collect();
    while !pending.is_empty() {
        let mut assigned = Vec::new();
        for &i in &pending {
            let (x, y) = ((i % w) as i64, (i / w) as i64);
            let mut best: Option<(f64, u32)> = None;
            for &(dx, dy) in Connectivity::Eight.offsets() {
                let (nx, ny) = (x + dx, y + dy);
                if !inside(region, nx, ny) {
                    continue;
                }
                let o = owner[ny as usize * w + nx as usize];
                if o == 0 {
                    continue;
                }
                let c = centroids[o as usize];
                let d = (x as f64 - c.0).powi(2) + (y as f64 - c.1).powi(2);
                if best.is_none_or(|b| d < b.0 || (d == b.0 && o < b.1)) {
                    best = Some((d, o));
                }
            }
            if let Some((_, o)) = best {
                assigned.push((i, o));
            }
        }
        if assigned.is_empty() {
            // unreachable pixels cannot occur in a connected region; keep them with piece 1
            for &i in &pending {
                owner[i] = 1;
            }
            break;
        }
        for &(i, o) in &assigned {
            owner[i] = o;
        }
        pending.retain(|&i| owner[i] == 0);
    }
    (1..=k)
        .map(|o| BinaryMask::from_fn(w, h, |x, y| owner[y * w + x] == o))
        .collect()
}
