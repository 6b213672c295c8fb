use serde::{Deserialize, Serialize};

use super::label::{is_connected, Connectivity};
use super::{BinaryMask, RasterError};

/// Axis-aligned pixel rectangle `[x, x + w) × [y, y + h)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PixelBox {
    pub x: usize,
    pub y: usize,
    pub w: usize,
    pub h: usize,
}

impl PixelBox {
    pub fn x_end(&self) -> usize {
        self.x + self.w
    }

    pub fn y_end(&self) -> usize {
        self.y + self.h
    }

    pub fn intersect(&self, other: &PixelBox) -> Option<PixelBox> {
        let x0 = self.x.max(other.x);
        let y0 = self.y.max(other.y);
        let x1 = self.x_end().min(other.x_end());
        let y1 = self.y_end().min(other.y_end());
        (x0 < x1 && y0 < y1).then(|| PixelBox { x: x0, y: y0, w: x1 - x0, h: y1 - y0 })
    }

    /// Boxes that overlap or touch, including diagonally.
    pub fn touches(&self, other: &PixelBox) -> bool {
        self.x <= other.x_end()
            && other.x <= self.x_end()
            && self.y <= other.y_end()
            && other.y <= self.y_end()
    }

    pub fn as_array(&self) -> [usize; 4] {
        [self.x, self.y, self.w, self.h]
    }
}

/// One droplet: a non-empty, 8-connected foreground stored as a tight
/// bounding box plus a local mask, positioned inside a `frame_w`×`frame_h` raster.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct InstanceMask {
    id: u32,
    bbox: PixelBox,
    local: BinaryMask,
    frame: (usize, usize),
}

impl InstanceMask {
    /// Builds an instance from a local mask placed at `(x0, y0)`. The box is
    /// trimmed to the foreground; the foreground must be non-empty and 8-connected.
    pub fn from_local(
        id: u32,
        x0: usize,
        y0: usize,
        local: &BinaryMask,
        frame: (usize, usize),
    ) -> Result<Self, RasterError> {
        let m = Self::from_local_unchecked(id, x0, y0, local, frame)?;
        if !is_connected(&m.local, Connectivity::Eight) {
            return Err(RasterError::Disconnected);
        }
        Ok(m)
    }

    /// Like [`InstanceMask::from_local`] but does not verify connectivity.
    pub fn from_local_unchecked(
        id: u32,
        x0: usize,
        y0: usize,
        local: &BinaryMask,
        frame: (usize, usize),
    ) -> Result<Self, RasterError> {
        let (mut xmin, mut ymin, mut xmax, mut ymax) = (usize::MAX, usize::MAX, 0, 0);
        for (x, y) in local.foreground() {
            xmin = xmin.min(x);
            ymin = ymin.min(y);
            xmax = xmax.max(x);
            ymax = ymax.max(y);
        }
        if xmin == usize::MAX {
            return Err(RasterError::EmptyMask);
        }
        if x0 + xmax >= frame.0 || y0 + ymax >= frame.1 {
            return Err(RasterError::OutOfFrame);
        }
        let (w, h) = (xmax - xmin + 1, ymax - ymin + 1);
        let trimmed = BinaryMask::from_fn(w, h, |x, y| local.get(x + xmin, y + ymin));
        Ok(Self {
            id,
            bbox: PixelBox { x: x0 + xmin, y: y0 + ymin, w, h },
            local: trimmed,
            frame,
        })
    }

    /// Builds an instance from frame coordinates.
    pub fn from_pixels(
        id: u32,
        pixels: &[(usize, usize)],
        frame: (usize, usize),
    ) -> Result<Self, RasterError> {
        let (xmin, ymin, local) = pixels_to_local(pixels)?;
        Self::from_local(id, xmin, ymin, &local, frame)
    }

    pub fn from_pixels_unchecked(
        id: u32,
        pixels: &[(usize, usize)],
        frame: (usize, usize),
    ) -> Result<Self, RasterError> {
        let (xmin, ymin, local) = pixels_to_local(pixels)?;
        Self::from_local_unchecked(id, xmin, ymin, &local, frame)
    }

    /// The whole foreground of a frame-sized mask as one instance.
    pub fn from_frame_mask(id: u32, mask: &BinaryMask) -> Result<Self, RasterError> {
        Self::from_local(id, 0, 0, mask, (mask.width(), mask.height()))
    }

    pub fn id(&self) -> u32 {
        self.id
    }

    pub fn with_id(mut self, id: u32) -> Self {
        self.id = id;
        self
    }

    pub fn bbox(&self) -> PixelBox {
        self.bbox
    }

    pub fn frame(&self) -> (usize, usize) {
        self.frame
    }

    /// Tight local mask, `bbox.w`×`bbox.h`.
    pub fn local(&self) -> &BinaryMask {
        &self.local
    }

    pub fn area(&self) -> usize {
        self.local.count()
    }

    pub fn contains(&self, x: usize, y: usize) -> bool {
        x >= self.bbox.x
            && y >= self.bbox.y
            && x < self.bbox.x_end()
            && y < self.bbox.y_end()
            && self.local.get(x - self.bbox.x, y - self.bbox.y)
    }

    /// Foreground pixels in frame coordinates, row-major.
    pub fn pixels(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let (bx, by) = (self.bbox.x, self.bbox.y);
        self.local.foreground().map(move |(x, y)| (x + bx, y + by))
    }

    pub fn to_frame_mask(&self) -> BinaryMask {
        let mut m = BinaryMask::empty(self.frame.0, self.frame.1);
        for (x, y) in self.pixels() {
            m.set(x, y, true);
        }
        m
    }

    /// Moves the instance by `(dx, dy)` into a new frame.
    pub fn translated(&self, dx: i64, dy: i64, frame: (usize, usize)) -> Result<Self, RasterError> {
        let nx = self.bbox.x as i64 + dx;
        let ny = self.bbox.y as i64 + dy;
        if nx < 0 || ny < 0 || nx as usize + self.bbox.w > frame.0 || ny as usize + self.bbox.h > frame.1 {
            return Err(RasterError::OutOfFrame);
        }
        Ok(Self {
            id: self.id,
            bbox: PixelBox { x: nx as usize, y: ny as usize, ..self.bbox },
            local: self.local.clone(),
            frame,
        })
    }

    /// Number of shared foreground pixels.
    pub fn intersection(&self, other: &InstanceMask) -> usize {
        let Some(b) = self.bbox.intersect(&other.bbox) else {
            return 0;
        };
        let mut n = 0;
        for y in b.y..b.y_end() {
            for x in b.x..b.x_end() {
                if self.local.get(x - self.bbox.x, y - self.bbox.y)
                    && other.local.get(x - other.bbox.x, y - other.bbox.y)
                {
                    n += 1;
                }
            }
        }
        n
    }
}

fn pixels_to_local(pixels: &[(usize, usize)]) -> Result<(usize, usize, BinaryMask), RasterError> {
    if pixels.is_empty() {
        return Err(RasterError::EmptyMask);
    }
    let xmin = pixels.iter().map(|p| p.0).min().unwrap_or(0);
    let ymin = pixels.iter().map(|p| p.1).min().unwrap_or(0);
    let xmax = pixels.iter().map(|p| p.0).max().unwrap_or(0);
    let ymax = pixels.iter().map(|p| p.1).max().unwrap_or(0);
    let mut local = BinaryMask::empty(xmax - xmin + 1, ymax - ymin + 1);
    for &(x, y) in pixels {
        local.set(x - xmin, y - ymin, true);
    }
    Ok((xmin, ymin, local))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trims_to_tight_box() {
        let local = BinaryMask::from_fn(5, 5, |x, y| (1..3).contains(&x) && (2..4).contains(&y));
        let m = InstanceMask::from_local(7, 10, 20, &local, (100, 100)).unwrap();
        assert_eq!(m.bbox(), PixelBox { x: 11, y: 22, w: 2, h: 2 });
        assert_eq!(m.area(), 4);
        assert!(m.contains(12, 23));
        assert!(!m.contains(13, 23));
    }

    #[test]
    fn rejects_empty_and_disconnected() {
        assert_eq!(
            InstanceMask::from_local(0, 0, 0, &BinaryMask::empty(3, 3), (3, 3)),
            Err(RasterError::EmptyMask)
        );
        let two = BinaryMask::from_fn(4, 1, |x, _| x == 0 || x == 3);
        assert_eq!(InstanceMask::from_frame_mask(0, &two), Err(RasterError::Disconnected));
        assert!(InstanceMask::from_pixels(0, &[(0, 0), (1, 1)], (2, 2)).is_ok());
    }

    #[test]
    fn intersection_counts_shared_pixels() {
        let a = InstanceMask::from_pixels(0, &[(0, 0), (1, 0)], (3, 1)).unwrap();
        let b = InstanceMask::from_pixels(1, &[(1, 0), (2, 0)], (3, 1)).unwrap();
        assert_eq!(a.intersection(&b), 1);
    }
}
