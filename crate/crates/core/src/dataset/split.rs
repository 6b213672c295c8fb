//! Seeded train/validation/test partition.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::DatasetError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitRatios {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    /// 387 / 45 / 19 out of 451.
    fn default() -> Self {
        Self { train: 387.0 / 451.0, val: 45.0 / 451.0, test: 19.0 / 451.0 }
    }
}

impl SplitRatios {
    pub fn validate(&self) -> Result<(), DatasetError> {
        let r = [self.train, self.val, self.test];
        if r.iter().any(|v| !(*v >= 0.0)) || (r.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(DatasetError::InvalidRatios);
        }
        Ok(())
    }
}

/// Part sizes by largest-remainder rounding; ties go to the earlier part.
pub fn part_sizes(n: usize, ratios: &SplitRatios) -> [usize; 3] {
    let quotas = [ratios.train, ratios.val, ratios.test].map(|r| r * n as f64);
    let mut sizes = quotas.map(|q| q.floor() as usize);
    let mut left = n.saturating_sub(sizes.iter().sum());
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| (quotas[b] - quotas[b].floor()).total_cmp(&(quotas[a] - quotas[a].floor())));
    for &i in order.iter().cycle() {
        if left == 0 {
            break;
        }
        sizes[i] += 1;
        left -= 1;
    }
    sizes
}

/// Shuffles with `seed` and cuts into (train, val, test).
pub fn split_dataset<T: Clone>(
    samples: &[T],
    ratios: &SplitRatios,
    seed: u64,
) -> Result<(Vec<T>, Vec<T>, Vec<T>), DatasetError> {
    ratios.validate()?;
    let sizes = part_sizes(samples.len(), ratios);
    for (s, name) in sizes.iter().zip(["train", "val", "test"]) {
        if *s == 0 {
            return Err(DatasetError::TooFewSamples(name));
        }
    }
    let mut idx: Vec<usize> = (0..samples.len()).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let take = |r: std::ops::Range<usize>| idx[r].iter().map(|&i| samples[i].clone()).collect::<Vec<_>>();
    Ok((take(0..sizes[0]), take(sizes[0]..sizes[0] + sizes[1]), take(sizes[0] + sizes[1]..samples.len())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_ratios_on_451() {
        assert_eq!(part_sizes(451, &SplitRatios::default()), [387, 45, 19]);
    }

    #[test]
    fn ten_samples() {
        let r = SplitRatios { train: 0.8, val: 0.1, test: 0.1 };
        let v: Vec<u32> = (0..10).collect();
        let (a, b, c) = split_dataset(&v, &r, 3).unwrap();
        assert_eq!((a.len(), b.len(), c.len()), (8, 1, 1));
        let mut all: Vec<u32> = a.iter().chain(&b).chain(&c).copied().collect();
        all.sort();
        assert_eq!(all, v);
        assert_eq!(split_dataset(&v, &r, 3).unwrap(), (a, b, c));
    }

    #[test]
    fn errors() {
        let r = SplitRatios { train: 0.8, val: 0.1, test: 0.1 };
        assert!(matches!(split_dataset(&[1, 2], &r, 0), Err(DatasetError::TooFewSamples(_))));
        let bad = SplitRatios { train: 0.8, val: 0.1, test: 0.2 };
        assert!(matches!(split_dataset(&[1, 2, 3], &bad, 0), Err(DatasetError::InvalidRatios)));
    }
}
