//! Run-length mask codec.
//!
//! Counts alternate background and foreground runs, starting with
//! background, so a mask whose first pixel is foreground starts with 0.

use serde::{Deserialize, Serialize};

use crate::raster::{BinaryMask, InstanceMask};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RleError {
    #[error("runs sum to {got}, expected {expected}")]
    RunSumMismatch { expected: usize, got: usize },
    #[error("decoded mask has no foreground")]
    EmptyMask,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RleMask {
    pub width: usize,
    pub height: usize,
    pub counts: Vec<u32>,
}

fn runs(values: impl Iterator<Item = bool>) -> Vec<u32> {
    let mut counts = Vec::new();
    let mut current = false;
    let mut n = 0u32;
    for v in values {
        if v != current {
            counts.push(n);
            n = 0;
            current = v;
        }
        n += 1;
    }
    counts.push(n);
    counts
}

fn check_sum(counts: &[u32], expected: usize) -> Result<(), RleError> {
    let got: usize = counts.iter().map(|&c| c as usize).sum();
    if got != expected {
        return Err(RleError::RunSumMismatch { expected, got });
    }
    Ok(())
}

/// Row-major runs of a binary mask.
pub fn encode_runs(m: &BinaryMask) -> Vec<u32> {
    runs(m.as_slice().iter().copied())
}

pub fn decode_runs(width: usize, height: usize, counts: &[u32]) -> Result<BinaryMask, RleError> {
    check_sum(counts, width * height)?;
    let mut data = Vec::with_capacity(width * height);
    for (i, &c) in counts.iter().enumerate() {
        data.extend(std::iter::repeat_n(i % 2 == 1, c as usize));
    }
    Ok(BinaryMask::new(width, height, data).expect("run sum checked"))
}

/// Column-major runs, the order used by COCO tooling.
pub fn encode_runs_column_major(m: &BinaryMask) -> Vec<u32> {
    let (w, h) = (m.width(), m.height());
    runs((0..w).flat_map(|x| (0..h).map(move |y| (x, y))).map(|(x, y)| m.get(x, y)))
}

pub fn decode_runs_column_major(width: usize, height: usize, counts: &[u32]) -> Result<BinaryMask, RleError> {
    check_sum(counts, width * height)?;
    let mut m = BinaryMask::empty(width, height);
    let mut k = 0usize;
    for (i, &c) in counts.iter().enumerate() {
        if i % 2 == 1 {
            for j in k..k + c as usize {
                m.set(j / height, j % height, true);
            }
        }
        k += c as usize;
    }
    Ok(m)
}

/// Full-frame row-major encoding of an instance.
pub fn encode_rle(m: &InstanceMask) -> RleMask {
    let (width, height) = m.frame();
    RleMask { width, height, counts: encode_runs(&m.to_frame_mask()) }
}

/// Inverse of [`encode_rle`]. The foreground is taken as-is; connectivity is
/// not re-checked.
pub fn decode_rle(r: &RleMask, id: u32) -> Result<InstanceMask, RleError> {
    let m = decode_runs(r.width, r.height, &r.counts)?;
    InstanceMask::from_local_unchecked(id, 0, 0, &m, (r.width, r.height)).map_err(|_| RleError::EmptyMask)
}
