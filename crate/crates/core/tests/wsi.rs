mod common;

use proptest::prelude::*;

use common::*;
use dropletforge::config::PipelineConfig;
use dropletforge::raster::{BinaryMask, ColorImage, InstanceMask};
use dropletforge::wsi::{segment_slide, segment_unsliced, tile_origins, TileGrid};

fn cfg(tile: usize, overlap: usize) -> PipelineConfig {
    let mut c = PipelineConfig::default();
    c.tiling.tile_size = tile;
    c.tiling.overlap = overlap;
    c
}

fn frames(ms: &[InstanceMask]) -> Vec<BinaryMask> {
    let mut v: Vec<BinaryMask> = ms.iter().map(InstanceMask::to_frame_mask).collect();
    v.sort_by_key(|m| m.foreground().next());
    v
}

#[test]
fn origin_examples() {
    assert_eq!(tile_origins(2048, 1024, 0), vec![0, 1024]);
    assert_eq!(tile_origins(1024, 1024, 128), vec![0]);
    assert_eq!(tile_origins(1920, 1024, 128), vec![0, 896]);
    assert_eq!(tile_origins(1080, 1024, 128), vec![0, 56]);

    assert_eq!(TileGrid::new(2048, 2048, 1024, 0).unwrap().tiles.len(), 4);
    let g = TileGrid::new(1920, 1080, 1024, 128).unwrap();
    let xy: Vec<(usize, usize)> = g.tiles.iter().map(|t| (t.x, t.y)).collect();
    assert_eq!(xy, vec![(0, 0), (896, 0), (0, 56), (896, 56)]);
    assert!(!g.padded);
    assert!(TileGrid::new(500, 300, 1024, 128).unwrap().padded);
    assert!(TileGrid::new(100, 100, 64, 64).is_err());
    assert!(TileGrid::new(100, 100, 0, 0).is_err());
}

#[test]
fn blank_slide_is_empty() {
    let img = ColorImage::filled(300, 200, [0.45, 0.3, 0.5]);
    let s = segment_slide(&img, &cfg(128, 32)).unwrap();
    assert!(s.instances.is_empty());
    assert_eq!((s.width, s.height), (300, 200));
}

#[test]
fn single_tile_cases() {
    let three = disks(200, 150, &[(40.5, 40.5), (120.5, 60.5), (80.5, 115.5)], 14.0);
    let s = segment_slide(&color_of(&three, 0.9, 0.35), &PipelineConfig::default()).unwrap();
    assert_eq!(s.instances.len(), 3);
    s.validate().unwrap();

    let s = segment_slide(&color_of(&peanut(), 0.9, 0.35), &PipelineConfig::default()).unwrap();
    assert_eq!(s.instances.len(), 2, "{:?}", s.instances.iter().map(|i| i.features.area_px).collect::<Vec<_>>());
}

#[test]
fn overlap_duplicate_is_kept_once() {
    // droplet fully inside the shared strip of two tiles
    let img = color_of(&disks(192, 128, &[(96.5, 64.5)], 15.0), 0.9, 0.35);
    let c = cfg(128, 64);
    assert_eq!(TileGrid::new(192, 128, 128, 64).unwrap().coverage(96, 64), 2);
    let s = segment_slide(&img, &c).unwrap();
    assert_eq!(s.instances.len(), 1);
    assert_eq!(s.instances[0].features.area_px, disks(192, 128, &[(96.5, 64.5)], 15.0).count());
}

fn scatter(seed: u64, n: usize) -> Vec<(f64, f64)> {
    // deterministic jittered grid, spacing well above the droplet diameter
    let mut v = Vec::new();
    let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
    let mut next = || {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (state >> 33) as f64 / f64::from(1u32 << 31)
    };
    for i in 0..n {
        let (gx, gy) = ((i % 7) as f64, (i / 7) as f64);
        v.push((20.0 + gx * 55.0 + next() * 15.0, 20.0 + gy * 55.0 + next() * 15.0));
    }
    v
}

#[test]
fn tiling_matches_unsliced() {
    let centers = scatter(3, 28);
    let truth = disks(410, 240, &centers, 11.0);
    let img = color_of(&truth, 0.88, 0.38);
    let whole = segment_unsliced(&img, &cfg(128, 48)).unwrap();
    assert_eq!(whole.instances.len(), 28);
    for c in [cfg(128, 48), cfg(160, 40), cfg(100, 30)] {
        let s = segment_slide(&img, &c).unwrap();
        s.validate().unwrap();
        assert_eq!(s.instances.len(), whole.instances.len(), "{:?}", c.tiling);
        assert_eq!(frames(&s.masks().unwrap()), frames(&whole.masks().unwrap()));
        assert_eq!(segment_slide(&img, &c).unwrap(), s);
    }
}

#[test]
fn worker_count_does_not_change_result() {
    let img = color_of(&disks(300, 200, &scatter(9, 18), 10.0), 0.9, 0.4);
    let mut a = cfg(96, 32);
    let base = segment_slide(&img, &a).unwrap();
    for n in [1, 3] {
        a.tiling.workers = Some(n);
        let s = segment_slide(&img, &a).unwrap();
        assert_eq!(s.instances, base.instances);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn grid_covers_every_pixel(w in 1usize..700, h in 1usize..700, tile in 16usize..300, frac in 0.0..=0.5f64) {
        let overlap = (tile as f64 * frac) as usize;
        let g = TileGrid::new(w, h, tile, overlap).unwrap();
        let xs = tile_origins(w, tile, overlap);
        prop_assert_eq!(xs[0], 0);
        let n = xs.len();
        prop_assert!(xs.windows(2).all(|p| p[0] < p[1] && p[1] - p[0] <= tile));
        prop_assert!(xs[..n.saturating_sub(1)].windows(2).all(|p| p[1] - p[0] == tile - overlap));
        if w >= tile {
            prop_assert_eq!(*xs.last().unwrap() + tile, w);
        }
        // sample a lattice of pixels plus the corners
        let px: Vec<usize> = (0..w).step_by(7).chain([w - 1]).collect();
        let py: Vec<usize> = (0..h).step_by(7).chain([h - 1]).collect();
        for &y in &py {
            for &x in &px {
                let c = g.coverage(x, y);
                prop_assert!((1..=4).contains(&c), "({}, {}) covered {} times", x, y, c);
            }
        }
    }
}
