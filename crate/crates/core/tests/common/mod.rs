#![allow(dead_code)]

use std::collections::VecDeque;

use dropletforge::raster::{BinaryMask, ColorImage, GrayImage, InstanceMask};

pub fn mask_from(w: usize, h: usize, f: impl Fn(f64, f64) -> bool) -> BinaryMask {
    BinaryMask::from_fn(w, h, |x, y| f(x as f64 + 0.5, y as f64 + 0.5))
}

/// Filled ellipse with semi-axes `a`, `b`, rotated by `theta` radians.
pub fn ellipse(w: usize, h: usize, c: (f64, f64), a: f64, b: f64, theta: f64) -> BinaryMask {
    let (s, co) = theta.sin_cos();
    mask_from(w, h, |x, y| {
        let (dx, dy) = (x - c.0, y - c.1);
        let u = dx * co + dy * s;
        let v = -dx * s + dy * co;
        (u / a).powi(2) + (v / b).powi(2) <= 1.0
    })
}

pub fn disks(w: usize, h: usize, centers: &[(f64, f64)], r: f64) -> BinaryMask {
    mask_from(w, h, |x, y| centers.iter().any(|c| (x - c.0).powi(2) + (y - c.1).powi(2) <= r * r))
}

/// Two disks of radius 20 centered on pixels (35, 35) and (65, 35).
pub fn peanut() -> BinaryMask {
    disks(100, 70, &[(35.5, 35.5), (65.5, 35.5)], 20.0)
}

pub fn instance(m: &BinaryMask) -> InstanceMask {
    InstanceMask::from_frame_mask(1, m).unwrap()
}

/// Gray rendering: `fg` on `bg`.
pub fn gray_of(m: &BinaryMask, fg: f32, bg: f32) -> GrayImage {
    let data = m.as_slice().iter().map(|&v| if v { fg } else { bg }).collect();
    GrayImage::new(m.width(), m.height(), data).unwrap()
}

pub fn color_of(m: &BinaryMask, fg: f32, bg: f32) -> ColorImage {
    let data = m.as_slice().iter().map(|&v| [if v { fg } else { bg }; 3]).collect();
    ColorImage::new(m.width(), m.height(), data).unwrap()
}

/// Flood-fill component labels (0 = background), numbered in row-major order
/// of first pixel.
pub fn bfs_labels(m: &BinaryMask, eight: bool) -> (Vec<u32>, u32) {
    let (w, h) = (m.width(), m.height());
    let mut lab = vec![0u32; w * h];
    let mut n = 0;
    for y in 0..h {
        for x in 0..w {
            if !m.get(x, y) || lab[y * w + x] != 0 {
                continue;
            }
            n += 1;
            lab[y * w + x] = n;
            let mut q = VecDeque::from([(x, y)]);
            while let Some((cx, cy)) = q.pop_front() {
                for dy in -1i64..=1 {
                    for dx in -1i64..=1 {
                        if (dx == 0 && dy == 0) || (!eight && dx != 0 && dy != 0) {
                            continue;
                        }
                        let (nx, ny) = (cx as i64 + dx, cy as i64 + dy);
                        if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                            continue;
                        }
                        let (nx, ny) = (nx as usize, ny as usize);
                        if m.get(nx, ny) && lab[ny * w + nx] == 0 {
                            lab[ny * w + nx] = n;
                            q.push_back((nx, ny));
                        }
                    }
                }
            }
        }
    }
    (lab, n)
}

pub fn is_connected8(m: &BinaryMask) -> bool {
    bfs_labels(m, true).1 == 1
}

/// Fills background pockets not 4-connected to the frame border.
pub fn fill_holes(m: &BinaryMask) -> BinaryMask {
    let inv = BinaryMask::from_fn(m.width(), m.height(), |x, y| !m.get(x, y));
    let (lab, _) = bfs_labels(&inv, false);
    let (w, h) = (m.width(), m.height());
    let mut outside = vec![false; lab.len() + 1];
    for y in 0..h {
        for x in 0..w {
            if (x == 0 || y == 0 || x + 1 == w || y + 1 == h) && lab[y * w + x] > 0 {
                outside[lab[y * w + x] as usize] = true;
            }
        }
    }
    BinaryMask::from_fn(w, h, |x, y| m.get(x, y) || !outside[lab[y * w + x] as usize])
}

/// Pixel edges between foreground and background or the frame.
pub fn exposed_edges(m: &BinaryMask) -> usize {
    let mut n = 0;
    for (x, y) in m.foreground() {
        for (dx, dy) in [(-1i64, 0i64), (1, 0), (0, -1), (0, 1)] {
            if !m.get_signed(x as i64 + dx, y as i64 + dy) {
                n += 1;
            }
        }
    }
    n
}

/// A random walk blob from the frame center; each step moves by `(dx, dy)`
/// in `-1..=1`, so the blob is 8-connected.
pub fn random_walk(w: usize, h: usize, steps: &[(i8, i8)]) -> BinaryMask {
    let mut m = BinaryMask::empty(w, h);
    let (mut x, mut y) = (w as i64 / 2, h as i64 / 2);
    m.set(x as usize, y as usize, true);
    for &(dx, dy) in steps {
        x = (x + dx.clamp(-1, 1) as i64).clamp(0, w as i64 - 1);
        y = (y + dy.clamp(-1, 1) as i64).clamp(0, h as i64 - 1);
        m.set(x as usize, y as usize, true);
    }
    m
}
