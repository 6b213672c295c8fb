//! Deduplication and merging of per-tile instances.

use std::collections::HashMap;

use super::{TileGrid, TileResult};
use crate::metrics::mask_iou;
use crate::raster::{BinaryMask, InstanceMask, PixelBox};
use crate::scene::InstanceFlag;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StitchParams {
    /// Candidates at or above this IoU with a kept instance are duplicates.
    pub dedup_iou: f64,
    /// Edge fragments this much covered by kept whole instances are dropped.
    pub cover_frac: f64,
    /// Side of the square buckets of the spatial index, in pixels.
    pub bucket: usize,
}

impl Default for StitchParams {
    fn default() -> Self {
        Self { dedup_iou: 0.5, cover_frac: 0.5, bucket: 256 }
    }
}

struct Candidate {
    mask: InstanceMask,
    tile: usize,
    flags: Vec<InstanceFlag>,
    edge: bool,
}

/// Bucketed bounding boxes for neighbour queries.
struct SpatialIndex {
    bucket: usize,
    cells: HashMap<(usize, usize), Vec<usize>>,
}

impl SpatialIndex {
    fn new(bucket: usize) -> Self {
        Self { bucket: bucket.max(1), cells: HashMap::new() }
    }

    fn cells_of(&self, b: &PixelBox, pad: usize) -> impl Iterator<Item = (usize, usize)> {
        let s = self.bucket;
        let (x0, y0) = (b.x.saturating_sub(pad) / s, b.y.saturating_sub(pad) / s);
        let (x1, y1) = ((b.x_end() + pad) / s, (b.y_end() + pad) / s);
        (y0..=y1).flat_map(move |y| (x0..=x1).map(move |x| (x, y)))
    }

    fn insert(&mut self, i: usize, b: &PixelBox) {
        let cells: Vec<_> = self.cells_of(b, 0).collect();
        for c in cells {
            self.cells.entry(c).or_default().push(i);
        }
    }

    /// Indices whose boxes might touch `b` (including diagonal contact), sorted.
    fn near(&self, b: &PixelBox) -> Vec<usize> {
        let mut v: Vec<usize> =
            self.cells_of(b, 1).filter_map(|c| self.cells.get(&c)).flatten().copied().collect();
        v.sort_unstable();
        v.dedup();
        v
    }
}

fn covered_fraction(c: &InstanceMask, kept: &[&InstanceMask]) -> f64 {
    let b = c.bbox();
    let mut hit = BinaryMask::empty(b.w, b.h);
    for k in kept {
        let Some(ib) = b.intersect(&k.bbox()) else { continue };
        for y in ib.y..ib.y_end() {
            for x in ib.x..ib.x_end() {
                if c.contains(x, y) && k.contains(x, y) {
                    hit.set(x - b.x, y - b.y, true);
                }
            }
        }
    }
    hit.count() as f64 / c.area() as f64
}

/// Whether two masks overlap or touch through an 8-neighbourhood.
fn touching(a: &InstanceMask, b: &InstanceMask) -> bool {
    if !a.bbox().touches(&b.bbox()) {
        return false;
    }
    a.pixels().any(|(x, y)| {
        (-1i64..=1).any(|dy| {
            (-1i64..=1).any(|dx| {
                let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                nx >= 0 && ny >= 0 && b.contains(nx as usize, ny as usize)
            })
        })
    })
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

/// Orders instances top-to-bottom, left-to-right, then by tile.
pub(crate) fn sort_spatially(v: &mut [(InstanceMask, usize, Vec<InstanceFlag>)]) {
    v.sort_by_key(|(m, t, _)| (m.bbox().y, m.bbox().x, *t, m.area()));
}

/// Combines tile results into slide instances. Candidates are visited whole
/// instances first, then by decreasing area, tile id and position. A candidate
/// is dropped when its IoU with a kept whole instance reaches `dedup_iou`, or when
/// it is an edge fragment mostly covered by kept whole instances. Kept edge
/// fragments from different tiles that overlap or touch are merged.
pub fn stitch(
    results: &[TileResult],
    grid: &TileGrid,
    params: &StitchParams,
) -> Vec<(InstanceMask, usize, Vec<InstanceFlag>)> {
    let mut ordered: Vec<&TileResult> = results.iter().collect();
    ordered.sort_by_key(|r| r.tile);
    let mut cands: Vec<Candidate> = ordered
        .iter()
        .flat_map(|r| {
            r.instances.iter().map(|i| Candidate {
                mask: i.mask.clone(),
                tile: r.tile,
                edge: i.flags.contains(&InstanceFlag::Edge),
                flags: i.flags.clone(),
            })
        })
        .collect();
    cands.sort_by(|a, b| {
        a.edge
            .cmp(&b.edge)
            .then(b.mask.area().cmp(&a.mask.area()))
            .then(a.tile.cmp(&b.tile))
            .then((a.mask.bbox().y, a.mask.bbox().x).cmp(&(b.mask.bbox().y, b.mask.bbox().x)))
    });

    let mut kept: Vec<Candidate> = Vec::new();
    let mut index = SpatialIndex::new(params.bucket);
    for c in cands {
        let near = index.near(&c.mask.bbox());
        // edge fragments overlapping each other are merged below, not deduplicated
        let dup = near.iter().any(|&k| {
            !kept[k].edge
                && kept[k].mask.bbox().intersect(&c.mask.bbox()).is_some()
                && mask_iou(&kept[k].mask, &c.mask).is_ok_and(|v| v >= params.dedup_iou)
        });
        if dup {
            continue;
        }
        if c.edge {
            let whole: Vec<&InstanceMask> = near.iter().filter(|&&k| !kept[k].edge).map(|&k| &kept[k].mask).collect();
            if covered_fraction(&c.mask, &whole) >= params.cover_frac {
                continue;
            }
        }
        index.insert(kept.len(), &c.mask.bbox());
        kept.push(c);
    }

    // merge edge fragments across tiles
    let mut parent: Vec<usize> = (0..kept.len()).collect();
    for i in 0..kept.len() {
        if !kept[i].edge {
            continue;
        }
        for j in index.near(&kept[i].mask.bbox()) {
            if j <= i || !kept[j].edge || kept[j].tile == kept[i].tile {
                continue;
            }
            if touching(&kept[i].mask, &kept[j].mask) {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    parent[ri.max(rj)] = ri.min(rj);
                }
            }
        }
    }
    let mut groups: HashMap<usize, Vec<usize>> = HashMap::new();
    for i in 0..kept.len() {
        let r = find(&mut parent, i);
        groups.entry(r).or_default().push(i);
    }
    let frame = (grid.width, grid.height);
    let mut out: Vec<(InstanceMask, usize, Vec<InstanceFlag>)> = Vec::with_capacity(groups.len());
    for (_, members) in groups {
        if members.len() == 1 {
            let c = &kept[members[0]];
            out.push((c.mask.clone(), c.tile, c.flags.clone()));
            continue;
        }
        let mut px: Vec<(usize, usize)> = members.iter().flat_map(|&i| kept[i].mask.pixels()).collect();
        px.sort_unstable();
        px.dedup();
        let mask = InstanceMask::from_pixels_unchecked(0, &px, frame).expect("non-empty union");
        let tile = members.iter().map(|&i| kept[i].tile).min().expect("non-empty group");
        let mut flags: Vec<InstanceFlag> = members
            .iter()
            .flat_map(|&i| kept[i].flags.iter().copied())
            .filter(|&f| f != InstanceFlag::Edge)
            .collect();
        flags.push(InstanceFlag::Merged);
        flags.sort();
        flags.dedup();
        out.push((mask, tile, flags));
    }
    sort_spatially(&mut out);
    out
}
