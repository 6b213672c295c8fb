mod common;

use std::f64::consts::PI;

use proptest::prelude::*;

use common::*;
use dropletforge::preproc::Region;
use dropletforge::raster::{extract_contour, BinaryMask, GrayImage, InstanceMask};
use dropletforge::splitter::{
    curvature_profile, detect_concave_points, fit_ellipse, line_pixels, recover_dividing_curve, sample_ellipse,
    score_all_pairs, select_pairs, split_mask, split_region, ConcaveConfig, ConcavePoint, CurveParams,
    RegionGeometry, SplitterConfig,
};

fn split(m: &BinaryMask) -> Vec<InstanceMask> {
    split_mask(m, &gray_of(m, 0.9, 0.45), &SplitterConfig::default()).unwrap().masks
}

fn concave(m: &BinaryMask) -> Vec<ConcavePoint> {
    let c = extract_contour(&instance(m)).unwrap();
    let cfg = SplitterConfig::default();
    let reference = curvature_profile(&c, cfg.reference_scale).unwrap();
    detect_concave_points(&c, &reference, &cfg.concave).unwrap()
}

fn dist(a: (f64, f64), b: (f64, f64)) -> f64 {
    ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt()
}

fn chain() -> BinaryMask {
    disks(130, 70, &[(35.5, 35.5), (65.5, 35.5), (95.5, 35.5)], 20.0)
}

#[test]
fn circle_curvature() {
    let m = disks(80, 80, &[(40.0, 40.0)], 30.0);
    let c = extract_contour(&instance(&m)).unwrap();
    let prof = curvature_profile(&c, 3.0).unwrap();
    assert_eq!(prof.len(), c.len());
    let mean = prof.kappa.iter().sum::<f64>() / prof.len() as f64;
    assert!((mean * 30.0 - 1.0).abs() < 0.15, "{mean}");
    assert!(concave(&m).is_empty());
}

#[test]
fn curvature_sign_flips_at_the_neck() {
    let m = peanut();
    let c = extract_contour(&instance(&m)).unwrap();
    let prof = curvature_profile(&c, 3.0).unwrap();
    let near = |p: (f64, f64)| {
        c.points().iter().enumerate().min_by(|a, b| {
            let da = dist((a.1 .0 as f64, a.1 .1 as f64), p);
            let db = dist((b.1 .0 as f64, b.1 .1 as f64), p);
            da.total_cmp(&db)
        })
        .unwrap()
        .0
    };
    // far side of the left disk, and the upper neck
    assert!(prof.kappa[near((15.5, 35.5))] > 0.0);
    assert!(prof.kappa[near((50.5, 22.27))] < 0.0);
}

#[test]
fn peanut_neck_points_and_split() {
    let m = peanut();
    let pts = concave(&m);
    assert_eq!(pts.len(), 2, "{pts:?}");
    // circle intersections at x = 50.5, y = 35.5 ± sqrt(20² − 15²)
    let h = (400.0f64 - 225.0).sqrt();
    let targets = [(50.5, 35.5 - h), (50.5, 35.5 + h)];
    for t in targets {
        let d = pts.iter().map(|p| dist(p.position, t)).fold(f64::INFINITY, f64::min);
        assert!(d <= 3.0, "{t:?} {d}");
    }
    for p in &pts {
        assert!(p.curvature < -0.08);
        assert!((p.inward_normal.0.hypot(p.inward_normal.1) - 1.0).abs() < 1e-9);
    }

    let masks = split(&m);
    assert_eq!(masks.len(), 2);
    let disk = disks(100, 70, &[(35.5, 35.5)], 20.0).count() as f64;
    for k in &masks {
        assert!((k.area() as f64 / disk - 1.0).abs() < 0.15, "{} vs {disk}", k.area());
    }
    assert_eq!(masks.iter().map(InstanceMask::area).sum::<usize>(), m.count());
}

#[test]
fn three_disk_chain() {
    let m = chain();
    let pts = concave(&m);
    assert_eq!(pts.len(), 4, "{pts:?}");

    let region = Region::new(instance(&m)).unwrap();
    let c = extract_contour(&region.mask).unwrap();
    let cfg = SplitterConfig::default();
    let geo = RegionGeometry::new(&region, &c, &pts, cfg.min_arc_len, cfg.max_normal_angle_deg);
    let scores = score_all_pairs(&geo, &pts, &cfg.weights);
    let chosen = select_pairs(&scores, cfg.score_min);
    assert_eq!(chosen.len(), 2);
    // each accepted pair spans one neck: x = 50.5 or x = 80.5
    for s in &chosen {
        assert!((s.p.position.0 - s.q.position.0).abs() <= 4.0, "{s:?}");
    }
    // brute force: the best non-crossing matching of the scored pairs picks the same necks
    let best = scores
        .iter()
        .enumerate()
        .flat_map(|(i, a)| scores[i + 1..].iter().map(move |b| (a, b)))
        .filter(|(a, b)| {
            let ends = [a.p.index, a.q.index, b.p.index, b.q.index];
            ends.iter().enumerate().all(|(i, e)| !ends[i + 1..].contains(e))
                && !dropletforge::splitter::segments_intersect(a.p.position, a.q.position, b.p.position, b.q.position)
        })
        .max_by(|x, y| (x.0.total + x.1.total).total_cmp(&(y.0.total + y.1.total)))
        .unwrap();
    let mut want = [(best.0.p.index, best.0.q.index), (best.1.p.index, best.1.q.index)];
    let mut got = [(chosen[0].p.index, chosen[0].q.index), (chosen[1].p.index, chosen[1].q.index)];
    want.sort();
    got.sort();
    assert_eq!(got, want);

    assert_eq!(split(&m).len(), 3);
}

#[test]
fn neck_pair_outscores_other_pairings() {
    let m = chain();
    let pts = concave(&m);
    let region = Region::new(instance(&m)).unwrap();
    let c = extract_contour(&region.mask).unwrap();
    let cfg = SplitterConfig::default();
    let geo = RegionGeometry::new(&region, &c, &pts, cfg.min_arc_len, cfg.max_normal_angle_deg);
    let scores = score_all_pairs(&geo, &pts, &cfg.weights);
    let same_neck = |s: &&dropletforge::splitter::PairScore| (s.p.position.0 - s.q.position.0).abs() <= 4.0;
    let worst_neck = scores.iter().filter(same_neck).map(|s| s.total).fold(f64::INFINITY, f64::min);
    let best_other = scores.iter().filter(|s| !same_neck(s)).map(|s| s.total).fold(0.0, f64::max);
    assert!(worst_neck > best_other, "{worst_neck} vs {best_other}");
    for s in &scores {
        let parts = [s.ellipse_fit, s.proximity, s.convexity, s.curvature];
        assert!(parts.iter().all(|v| (0.0..=1.0).contains(v)));
        let w = &cfg.weights;
        let total = w.ellipse_fit * s.ellipse_fit + w.proximity * s.proximity + w.convexity * s.convexity + w.curvature * s.curvature;
        assert!((total - s.total).abs() < 1e-12);
    }
}

#[test]
fn ellipse_recovery() {
    let pts = sample_ellipse((5.0, -3.0), 40.0, 20.0, 30f64.to_radians(), 20);
    let e = fit_ellipse(&pts).unwrap();
    assert!((e.a / 40.0 - 1.0).abs() < 0.01 && (e.b / 20.0 - 1.0).abs() < 0.01, "{e:?}");
    assert!((e.theta.to_degrees() - 30.0).abs() < 1.0);
    assert!(e.residual < 1e-6);
    assert!(!e.fallback);

    // deterministic noise on every fifth point
    let noisy: Vec<(f64, f64)> =
        pts.iter().enumerate().map(|(i, &(x, y))| if i % 5 == 0 { (x + 2.0, y - 2.0) } else { (x, y) }).collect();
    assert!(fit_ellipse(&noisy).unwrap().residual > e.residual);
}

#[test]
fn uniform_region_cut_is_the_chord() {
    let m = BinaryMask::from_fn(40, 20, |x, y| (2..38).contains(&x) && (2..18).contains(&y));
    let g = GrayImage::filled(40, 20, 0.9);
    for (p, q) in [((3, 10), (36, 10)), ((5, 3), (5, 16)), ((10, 3), (24, 17))] {
        let c = recover_dividing_curve(&m, &g, p, q, &CurveParams::default()).unwrap();
        assert!(!c.fallback);
        assert_eq!(c.pixels, line_pixels(p, q));
    }
}

#[test]
fn no_curves_leaves_region_whole() {
    let m = peanut();
    assert_eq!(split_region(&m, &[], 30), vec![m]);
}

#[test]
fn three_necks_from_cuts() {
    let m = chain();
    let cut = |x: usize| (0..70).filter(|&y| m.get(x, y)).map(|y| (x, y)).collect::<Vec<_>>();
    let pieces = split_region(&m, &[cut(50), cut(80)], 30);
    assert_eq!(pieces.len(), 3);
    assert_eq!(pieces.iter().map(BinaryMask::count).sum::<usize>(), m.count());
}

#[test]
fn curvature_scales_are_configurable() {
    let cfg = ConcaveConfig { scales: vec![3.0], min_votes: 1, ..ConcaveConfig::default() };
    let m = peanut();
    let c = extract_contour(&instance(&m)).unwrap();
    let prof = curvature_profile(&c, 3.0).unwrap();
    assert_eq!(detect_concave_points(&c, &prof, &cfg).unwrap().len(), 2);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn split_conserves_pixels(
        n in 2usize..4,
        seeds in prop::collection::vec((0.0..1.0f64, 0.0..1.0f64), 3),
        r in 12.0..22.0f64,
    ) {
        // chain of disks, each overlapping the previous one
        let mut centers = vec![(40.0, 60.0)];
        for &(a, s) in seeds.iter().take(n - 1) {
            let last = *centers.last().unwrap();
            let ang = (a - 0.5) * PI / 2.0;
            let d = r * (1.0 + 0.6 * s);
            centers.push((last.0 + d * ang.cos(), last.1 + d * ang.sin()));
        }
        let m = disks(170, 120, &centers, r);
        prop_assume!(is_connected8(&m));
        let out = split(&m);
        prop_assert!(!out.is_empty());
        let mut cover = BinaryMask::empty(170, 120);
        for k in &out {
            prop_assert!(is_connected8(&k.to_frame_mask()));
            for (x, y) in k.pixels() {
                prop_assert!(!cover.get(x, y));
                cover.set(x, y, true);
            }
        }
        prop_assert_eq!(&cover, &m);
        prop_assert_eq!(split(&m), out);
    }

    #[test]
    fn forced_ellipse_stays_whole(a in 10.0..30.0f64, ratio in 0.4..1.0f64, theta in 0.0..PI) {
        let e = ellipse(70, 70, (35.0, 35.0), a, a * ratio, theta);
        prop_assume!(e.count() >= 200);
        let out = split(&e);
        prop_assert_eq!(out.len(), 1);
        prop_assert_eq!(out[0].to_frame_mask(), e);
    }

    #[test]
    fn ellipse_residual_invariance(
        a in 5.0..50.0f64, ratio in 0.2..1.0f64, theta in 0.0..PI,
        jitter in prop::collection::vec(-0.3..0.3f64, 40),
        shift in (-100.0..100.0f64, -100.0..100.0f64), turn in 0.0..2.0 * PI,
    ) {
        let base: Vec<(f64, f64)> = sample_ellipse((0.0, 0.0), a, a * ratio, theta, 20)
            .into_iter()
            .zip(jitter.chunks(2))
            .map(|((x, y), j)| (x + j[0], y + j[1]))
            .collect();
        let r0 = fit_ellipse(&base).unwrap().residual;
        let moved: Vec<_> = base.iter().map(|&(x, y)| (x + shift.0, y + shift.1)).collect();
        let r1 = fit_ellipse(&moved).unwrap().residual;
        prop_assert!((r1 - r0).abs() <= 1e-9 * r0.max(1e-12), "{} {}", r0, r1);
        let (s, c) = turn.sin_cos();
        let rotated: Vec<_> = base.iter().map(|&(x, y)| (c * x - s * y, s * x + c * y)).collect();
        let r2 = fit_ellipse(&rotated).unwrap().residual;
        prop_assert!((r2 - r0).abs() <= 1e-6 * r0.max(1e-12), "{} {}", r0, r2);
    }
}
