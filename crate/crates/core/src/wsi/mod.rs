//! Whole-slide processing: tiling, per-tile segmentation and stitching.

mod stitch;

use std::collections::HashSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::PipelineConfig;
use crate::preproc::{choose_threshold, preprocess_with, PreprocConfig, PreprocError, Region, Threshold};
use crate::raster::{to_grayscale_with, ColorImage, InstanceMask};
use crate::scene::{InstanceFlag, SceneError, SceneResult};
use crate::splitter::{split_overlapped, SplitFlag, SplitterConfig};

pub use self::stitch::{stitch, StitchParams};

#[derive(Debug, thiserror::Error)]
pub enum WsiError {
    #[error("tile size must exceed the overlap")]
    InvalidTiling,
    #[error(transparent)]
    Preproc(#[from] PreprocError),
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error("worker pool: {0}")]
    Pool(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tile {
    pub id: usize,
    pub x: usize,
    pub y: usize,
    pub w: usize,
    pub h: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TileGrid {
    pub width: usize,
    pub height: usize,
    pub tile_size: usize,
    pub overlap: usize,
    /// Row-major; `id` is the index.
    pub tiles: Vec<Tile>,
    /// The image is smaller than a tile in some dimension; the padding is
    /// treated as background.
    pub padded: bool,
}

/// Tile origins along one axis: stride `tile − overlap`, the last tile
/// shifted inward to end at the image edge. When the shifted tile would
/// overlap the one two places back, the tile between them is dropped, so no
/// pixel lies in more than two tiles per axis while `overlap ≤ tile / 2`.
pub fn tile_origins(len: usize, tile: usize, overlap: usize) -> Vec<usize> {
    let stride = tile - overlap;
    let mut v = vec![0];
    while v[v.len() - 1] + tile < len {
        let last = v[v.len() - 1];
        let next = (last + stride).min(len - tile);
        if next < last + stride && v.len() >= 2 && next < v[v.len() - 2] + tile {
            v.pop();
        }
        v.push(next);
    }
    v
}

impl TileGrid {
    pub fn new(width: usize, height: usize, tile_size: usize, overlap: usize) -> Result<Self, WsiError> {
        if tile_size == 0 || overlap >= tile_size {
            return Err(WsiError::InvalidTiling);
        }
        let xs = tile_origins(width, tile_size, overlap);
        let ys = tile_origins(height, tile_size, overlap);
        let mut tiles = Vec::with_capacity(xs.len() * ys.len());
        for &y in &ys {
            for &x in &xs {
                tiles.push(Tile { id: tiles.len(), x, y, w: tile_size, h: tile_size });
            }
        }
        Ok(Self { width, height, tile_size, overlap, tiles, padded: width < tile_size || height < tile_size })
    }

    /// Number of tiles containing pixel `(x, y)`.
    pub fn coverage(&self, x: usize, y: usize) -> usize {
        self.tiles.iter().filter(|t| x >= t.x && x < t.x + t.w && y >= t.y && y < t.y + t.h).count()
    }
}

/// One instance found in a tile, in slide coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct TileInstance {
    pub mask: InstanceMask,
    pub flags: Vec<InstanceFlag>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TileResult {
    pub tile: usize,
    pub instances: Vec<TileInstance>,
}

fn split_flag(f: SplitFlag) -> InstanceFlag {
    match f {
        SplitFlag::TooManyConcavePoints => InstanceFlag::TooManyConcavePoints,
        SplitFlag::ChordFallback => InstanceFlag::ChordFallback,
    }
}

/// Segments one tile image, binarizing with `threshold` when given. Isolated
/// regions pass through, overlapped ones are split; a region the splitter
/// rejects is kept whole. Every instance from a region touching a tile edge
/// that is not a slide edge is flagged `edge`.
pub fn run_tile(
    img: &ColorImage,
    tile: &Tile,
    slide: (usize, usize),
    cfg: &PipelineConfig,
    threshold: Option<Threshold>,
) -> Result<TileResult, WsiError> {
    segment_tile(img, tile, slide, &cfg.preproc(), &cfg.splitter, threshold)
}

fn segment_tile(
    img: &ColorImage,
    tile: &Tile,
    slide: (usize, usize),
    pre: &PreprocConfig,
    splitter: &SplitterConfig,
    threshold: Option<Threshold>,
) -> Result<TileResult, WsiError> {
    let (set, gray) = preprocess_with(img, pre, threshold)?;
    let (tw, th) = (img.width(), img.height());
    let (interior_left, interior_top) = (tile.x > 0, tile.y > 0);
    let interior_right = tile.x + tw < slide.0;
    let interior_bottom = tile.y + th < slide.1;
    // pieces of a region cut by the tile are all unreliable, not just those on the cut
    let cut = |r: &Region| {
        let b = r.bbox();
        (interior_left && b.x == 0)
            || (interior_top && b.y == 0)
            || (interior_right && b.x_end() == tw)
            || (interior_bottom && b.y_end() == th)
    };
    let mut found: Vec<(InstanceMask, Vec<InstanceFlag>)> = Vec::new();
    for r in &set.isolated {
        found.push((r.mask.clone(), if cut(r) { vec![InstanceFlag::Edge] } else { Vec::new() }));
    }
    for r in &set.overlapped {
        let mut flags = if cut(r) { vec![InstanceFlag::Edge] } else { Vec::new() };
        match split_overlapped(r, &gray, splitter) {
            Ok(out) => {
                flags.extend(out.flags.iter().map(|&f| split_flag(f)));
                found.extend(out.masks.into_iter().map(|m| (m, flags.clone())));
            }
            Err(_) => found.push((r.mask.clone(), flags)),
        }
    }
    let mut instances = Vec::with_capacity(found.len());
    for (m, mut flags) in found {
        // instances in the padding beyond the slide cannot be placed
        if let Ok(mask) = m.translated(tile.x as i64, tile.y as i64, slide) {
            flags.sort();
            flags.dedup();
            instances.push(TileInstance { mask, flags });
        }
    }
    Ok(TileResult { tile: tile.id, instances })
}

/// The threshold of the whole slide.
pub fn slide_threshold(img: &ColorImage, cfg: &PipelineConfig) -> Threshold {
    choose_threshold(&to_grayscale_with(img, cfg.binarize.grayscale), &cfg.binarize)
}

type Stitched = Vec<(InstanceMask, usize, Vec<InstanceFlag>)>;

fn run_grid(img: &ColorImage, grid: &TileGrid, cfg: &PipelineConfig, threshold: Option<Threshold>) -> Result<Vec<TileResult>, WsiError> {
    let slide = (img.width(), img.height());
    grid.tiles
        .par_iter()
        .map(|t| {
            // a tile larger than the slide only sees the slide; the padding
            // is background and must not enter the threshold statistics
            let (w, h) = (t.w.min(slide.0 - t.x), t.h.min(slide.1 - t.y));
            let crop = img.crop_padded(t.x, t.y, w, h, [0.0; 3]);
            run_tile(&crop, t, slide, cfg, threshold)
        })
        .collect()
}

/// Assemblies of edge fragments belong to regions no single tile holds. Each
/// is segmented again from a slide crop around it, so its split sees the
/// whole region.
fn resegment_merged(img: &ColorImage, found: Stitched, cfg: &PipelineConfig, threshold: Threshold) -> Result<Stitched, WsiError> {
    let slide = (img.width(), img.height());
    let mut pre = cfg.preproc();
    // the crop is mostly the region itself; nothing in it is glass
    pre.background.min_area_frac = 1.0;
    let mut out = Vec::with_capacity(found.len());
    // two assemblies of one region give the same pieces
    let mut seen: HashSet<InstanceMask> = HashSet::new();
    for (m, tile, flags) in found {
        if !flags.contains(&InstanceFlag::Merged) {
            out.push((m, tile, flags));
            continue;
        }
        let b = m.bbox();
        let (x0, y0) = (b.x.saturating_sub(1), b.y.saturating_sub(1));
        let (x1, y1) = ((b.x_end() + 1).min(slide.0), (b.y_end() + 1).min(slide.1));
        let t = Tile { id: tile, x: x0, y: y0, w: x1 - x0, h: y1 - y0 };
        let crop = img.crop_padded(x0, y0, t.w, t.h, [0.0; 3]);
        let pieces: Vec<TileInstance> = segment_tile(&crop, &t, slide, &pre, &cfg.splitter, Some(threshold))?
            .instances
            .into_iter()
            .filter(|i| i.mask.intersection(&m) > 0)
            .collect();
        if pieces.is_empty() {
            out.push((m, tile, flags));
            continue;
        }
        for p in pieces {
            if !seen.insert(p.mask.clone().with_id(0)) {
                continue;
            }
            let mut f: Vec<InstanceFlag> = p.flags.into_iter().filter(|&f| f != InstanceFlag::Edge).collect();
            f.push(InstanceFlag::Merged);
            f.sort();
            f.dedup();
            out.push((p.mask, tile, f));
        }
    }
    stitch::sort_spatially(&mut out);
    Ok(out)
}

/// Tiles, segments and stitches a slide. Tile work runs on the current rayon
/// pool, or on a dedicated pool when `tiling.workers` is set.
pub fn segment_slide(img: &ColorImage, cfg: &PipelineConfig) -> Result<SceneResult, WsiError> {
    let grid = TileGrid::new(img.width(), img.height(), cfg.tiling.tile_size, cfg.tiling.overlap)?;
    let global = slide_threshold(img, cfg);
    let per_tile = cfg.tiling.shared_threshold.then_some(global);
    let results = match cfg.tiling.workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| WsiError::Pool(e.to_string()))?
            .install(|| run_grid(img, &grid, cfg, per_tile))?,
        None => run_grid(img, &grid, cfg, per_tile)?,
    };
    let merged = resegment_merged(img, stitch(&results, &grid, &StitchParams::default()), cfg, global)?;
    Ok(SceneResult::from_masks(grid.width, grid.height, merged, cfg.to_value())?)
}

/// Segments the whole image as a single tile.
pub fn segment_unsliced(img: &ColorImage, cfg: &PipelineConfig) -> Result<SceneResult, WsiError> {
    let (w, h) = (img.width(), img.height());
    let tile = Tile { id: 0, x: 0, y: 0, w, h };
    let result = run_tile(img, &tile, (w, h), cfg, None)?;
    let mut masks: Vec<_> = result.instances.into_iter().map(|i| (i.mask, 0, i.flags)).collect();
    stitch::sort_spatially(&mut masks);
    Ok(SceneResult::from_masks(w, h, masks, cfg.to_value())?)
}
