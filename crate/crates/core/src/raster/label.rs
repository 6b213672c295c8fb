//! Connected-component labelling by breadth-first flood fill.

use std::collections::VecDeque;

use super::BinaryMask;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Connectivity {
    Four,
    Eight,
}

impl Connectivity {
    pub fn offsets(self) -> &'static [(i64, i64)] {
        const FOUR: [(i64, i64); 4] = [(1, 0), (-1, 0), (0, 1), (0, -1)];
        const EIGHT: [(i64, i64); 8] =
            [(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1), (-1, 1), (-1, -1)];
        match self {
            Connectivity::Four => &FOUR,
            Connectivity::Eight => &EIGHT,
        }
    }
}

/// Label image: 0 is background, components are numbered from 1 in row-major
/// order of their first pixel.
#[derive(Debug, Clone)]
pub struct Labels {
    pub width: usize,
    pub height: usize,
    pub labels: Vec<u32>,
    pub count: u32,
}

impl Labels {
    pub fn get(&self, x: usize, y: usize) -> u32 {
        self.labels[y * self.width + x]
    }
}

pub fn label_components(mask: &BinaryMask, conn: Connectivity) -> Labels {
    let (w, h) = (mask.width(), mask.height());
    let src = mask.as_slice();
    let mut labels = vec![0u32; w * h];
    let mut next = 0u32;
    let mut queue = VecDeque::new();
    for start in 0..w * h {
        if !src[start] || labels[start] != 0 {
            continue;
        }
        next += 1;
        labels[start] = next;
        queue.push_back(start);
        while let Some(i) = queue.pop_front() {
            let (x, y) = ((i % w) as i64, (i / w) as i64);
            for &(dx, dy) in conn.offsets() {
                let (nx, ny) = (x + dx, y + dy);
                if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                    continue;
                }
                let j = ny as usize * w + nx as usize;
                if src[j] && labels[j] == 0 {
                    labels[j] = next;
                    queue.push_back(j);
                }
            }
        }
    }
    Labels { width: w, height: h, labels, count: next }
}

/// True when the foreground is non-empty and forms a single component.
pub fn is_connected(mask: &BinaryMask, conn: Connectivity) -> bool {
    label_components(mask, conn).count == 1
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_pixels_join_under_eight_only() {
        let m = BinaryMask::from_fn(2, 2, |x, y| x == y);
        assert_eq!(label_components(&m, Connectivity::Eight).count, 1);
        assert_eq!(label_components(&m, Connectivity::Four).count, 2);
    }

    #[test]
    fn labels_follow_row_major_first_pixel() {
        // second component starts earlier in row 0 than the first component's bulk
        let m = BinaryMask::from_fn(6, 3, |x, y| (x == 4 && y == 0) || (x == 0 && y == 2));
        let l = label_components(&m, Connectivity::Eight);
        assert_eq!(l.get(4, 0), 1);
        assert_eq!(l.get(0, 2), 2);
    }
}
