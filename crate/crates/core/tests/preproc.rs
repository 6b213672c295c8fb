mod common;

use proptest::prelude::*;

use common::*;
use dropletforge::preproc::{
    binarize, classify_candidates, connected_components, exclude_background, histogram, intensity_bin, otsu_bin,
    otsu_threshold, preprocess, BinarizeMethod, PreprocConfig, PreprocError, Region,
};
use dropletforge::raster::{BinaryMask, GrayImage, InstanceMask};

/// Between-class variance of splitting at `t`, times `n²`, as an exact
/// fraction `(num, den)` computed straight from the pixels.
fn between(pixels: &[usize], t: usize) -> Option<(u128, u128)> {
    let (lo, hi): (Vec<usize>, Vec<usize>) = pixels.iter().partition(|&&b| b < t);
    if lo.is_empty() || hi.is_empty() {
        return None;
    }
    let (n0, n1) = (lo.len() as i128, hi.len() as i128);
    let (s0, s1) = (lo.iter().sum::<usize>() as i128, hi.iter().sum::<usize>() as i128);
    // n0 n1 (s0/n0 - s1/n1)² = (s0 n1 - s1 n0)² / (n0 n1)
    let d = s0 * n1 - s1 * n0;
    Some(((d * d) as u128, (n0 * n1) as u128))
}

/// Every threshold bin attaining the maximum.
fn brute_otsu(g: &GrayImage) -> Vec<usize> {
    let px: Vec<usize> = g.pixels().iter().map(|&v| intensity_bin(v)).collect();
    let vals: Vec<(usize, (u128, u128))> = (1..256).filter_map(|t| between(&px, t).map(|v| (t, v))).collect();
    let best = vals.iter().map(|v| v.1).fold((0u128, 1u128), |a, b| if b.0 * a.1 > a.0 * b.1 { b } else { a });
    vals.iter().filter(|v| v.1 .0 * best.1 == best.0 * v.1 .1).map(|v| v.0).collect()
}

#[test]
fn two_level_otsu() {
    let g = GrayImage::new(10, 10, (0..100).map(|i| if i % 2 == 0 { 0.2 } else { 0.8 }).collect()).unwrap();
    let t = otsu_threshold(&g).unwrap();
    assert!(t > 0.2 && t <= 0.8, "{t}");
    let bin = otsu_bin(&histogram(&g)).unwrap();
    assert_eq!(brute_otsu(&g).first(), Some(&bin));
    let m = binarize(&g, BinarizeMethod::Otsu).unwrap();
    assert!(m.as_slice().iter().zip(g.pixels()).all(|(&b, &v)| b == (v > 0.5)));
}

#[test]
fn fixed_threshold_and_constant_input() {
    let g = GrayImage::new(2, 2, vec![0.4, 0.6, 0.6, 0.4]).unwrap();
    assert_eq!(binarize(&g, BinarizeMethod::Fixed(0.5)).unwrap().as_slice(), &[false, true, true, false]);
    assert!(binarize(&GrayImage::filled(3, 3, 0.0), BinarizeMethod::Fixed(0.5)).unwrap().is_empty());
    assert_eq!(binarize(&GrayImage::filled(3, 3, 0.7), BinarizeMethod::Otsu), Err(PreprocError::ConstantImage));
}

#[test]
fn glass_frame_is_excluded() {
    // an 8 px frame is ~30% of a 100×100 image
    let frame = BinaryMask::from_fn(100, 100, |x, y| x < 8 || y < 8 || x >= 92 || y >= 92);
    let frac = frame.count() as f64 / 1e4;
    assert!((frac - 0.3).abs() < 0.02, "{frac}");
    let drop = disks(100, 100, &[(50.5, 50.5)], 10.0);
    let b = BinaryMask::from_fn(100, 100, |x, y| frame.get(x, y) || drop.get(x, y));
    let g = gray_of(&b, 0.9, 0.3);
    let kept = exclude_background(&b, &g, 0.05);
    assert_eq!(kept, drop);
    // brute force: exactly one kept component, not touching the border
    let (lab, n) = bfs_labels(&kept, true);
    assert_eq!(n, 1);
    assert!((0..100).all(|i| lab[i] == 0 && lab[99 * 100 + i] == 0 && lab[i * 100] == 0 && lab[i * 100 + 99] == 0));
}

#[test]
fn small_border_droplet_is_kept() {
    let b = BinaryMask::from_fn(100, 100, |x, y| x < 5 && (40..42).contains(&y));
    assert_eq!(b.count(), 10);
    let g = gray_of(&b, 0.9, 0.3);
    assert_eq!(exclude_background(&b, &g, 0.05), b);
    let interior = disks(100, 100, &[(50.5, 50.5)], 30.0);
    assert_eq!(exclude_background(&interior, &gray_of(&interior, 0.9, 0.3), 0.05), interior);
}

#[test]
fn component_examples() {
    let two = BinaryMask::from_fn(8, 8, |x, y| (x < 2 && y < 2) || ((5..7).contains(&x) && (5..7).contains(&y)));
    let r = connected_components(&two);
    assert_eq!(r.iter().map(|r| r.features.area).collect::<Vec<_>>(), [4, 4]);
    let diag = BinaryMask::from_fn(4, 4, |x, y| (x, y) == (1, 1) || (x, y) == (2, 2));
    assert_eq!(connected_components(&diag).len(), 1);
    assert!(connected_components(&BinaryMask::empty(5, 5)).is_empty());
}

#[test]
fn disk_is_isolated_peanut_is_overlapped() {
    let disk = Region::new(instance(&disks(60, 60, &[(30.5, 30.5)], 20.0))).unwrap();
    let pea = Region::new(instance(&peanut())).unwrap();
    let set = classify_candidates(vec![disk.clone(), pea.clone()], 0.95);
    assert_eq!(set.isolated, vec![disk]);
    assert_eq!(set.overlapped, vec![pea]);
    let empty = classify_candidates(Vec::new(), 0.95);
    assert!(empty.isolated.is_empty() && empty.overlapped.is_empty());
}

#[test]
fn preprocess_scene() {
    let single = disks(140, 80, &[(18.5, 40.5)], 12.0);
    let pair = disks(140, 80, &[(65.5, 40.5), (95.5, 40.5)], 20.0);
    let fg = BinaryMask::from_fn(140, 80, |x, y| single.get(x, y) || pair.get(x, y));
    let img = color_of(&fg, 0.9, 0.35);
    let (set, gray) = preprocess(&img, &PreprocConfig::default()).unwrap();
    assert_eq!((gray.width(), gray.height()), (140, 80));
    let all: Vec<&Region> = set.isolated.iter().chain(&set.overlapped).collect();
    let total: usize = all.iter().map(|r| r.features.area).sum();
    assert_eq!(total, fg.count());
    for (i, a) in all.iter().enumerate() {
        for b in &all[i + 1..] {
            assert_eq!(a.mask.intersection(&b.mask), 0);
        }
    }
    assert_eq!(set.isolated.len(), 1);
    assert_eq!(set.overlapped.len(), 1);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn otsu_is_a_brute_force_maximizer(rows in 8usize..50, bits in prop::collection::vec(any::<u8>(), 400)) {
        let g = GrayImage::new(8, rows, bits[..8 * rows].iter().map(|&b| f32::from(b) / 255.0).collect()).unwrap();
        match otsu_bin(&histogram(&g)) {
            Some(t) => prop_assert!(brute_otsu(&g).contains(&t)),
            None => prop_assert!(brute_otsu(&g).is_empty()),
        }
    }

    #[test]
    fn components_partition_the_foreground(bits in prop::collection::vec(any::<bool>(), 256)) {
        let m = BinaryMask::new(16, 16, bits).unwrap();
        let regions = connected_components(&m);
        let (_, n) = bfs_labels(&m, true);
        prop_assert_eq!(regions.len() as u32, n);
        let mut cover = vec![0u8; 256];
        let mut firsts = Vec::new();
        for r in &regions {
            prop_assert!(is_connected8(&r.mask.to_frame_mask()));
            for (x, y) in r.mask.pixels() {
                cover[y * 16 + x] += 1;
            }
            firsts.push(r.mask.pixels().map(|(x, y)| (y, x)).min().unwrap());
        }
        prop_assert!(cover.iter().zip(m.as_slice()).all(|(&c, &f)| c == u8::from(f)));
        prop_assert!(firsts.windows(2).all(|w| w[0] < w[1]));

        let total = regions.len();
        let set = classify_candidates(regions, 0.95);
        prop_assert_eq!(set.isolated.len() + set.overlapped.len(), total);
        prop_assert!(set.isolated.iter().all(|r| r.features.solidity > 0.95));
        prop_assert!(set.overlapped.iter().all(|r| r.features.solidity <= 0.95));
    }

    #[test]
    fn background_exclusion_only_removes_large_border_components(bits in prop::collection::vec(any::<bool>(), 400), frac in 0.0..0.3f64) {
        let m = BinaryMask::new(20, 20, bits).unwrap();
        let kept = exclude_background(&m, &gray_of(&m, 0.9, 0.1), frac);
        let (lab, n) = bfs_labels(&m, true);
        for l in 1..=n {
            let px: Vec<usize> = (0..400).filter(|&i| lab[i] == l).collect();
            let border = px.iter().any(|&i| i % 20 == 0 || i % 20 == 19 || i / 20 == 0 || i / 20 == 19);
            let gone = border && px.len() as f64 > frac * 400.0;
            prop_assert!(px.iter().all(|&i| kept.as_slice()[i] != gone));
        }
        prop_assert!(kept.as_slice().iter().zip(m.as_slice()).all(|(&k, &f)| !k || f));
    }
}

#[test]
fn regions_match_instance_masks() {
    let m = peanut();
    let r = connected_components(&m);
    assert_eq!(r.len(), 1);
    assert_eq!(r[0].mask, InstanceMask::from_frame_mask(1, &m).unwrap());
}
