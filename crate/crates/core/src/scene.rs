//! Slide-level result: instances in slide coordinates with features and provenance.

use serde::{Deserialize, Serialize};

use crate::dataset::rle::{decode_runs, encode_runs, RleError};
use crate::filter::{cohort_averages, CohortAverages};
use crate::metrics::ScoredInstance;
use crate::raster::{compute_shape_features, InstanceMask, PixelBox, RasterError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InstanceFlag {
    /// Touches a tile edge that is not a slide edge.
    Edge,
    /// Built from fragments in several tiles.
    Merged,
    /// Its region had too many concave points to split.
    TooManyConcavePoints,
    /// A cut used the straight chord instead of a dividing path.
    ChordFallback,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InstanceFeatures {
    pub area_px: usize,
    pub perimeter_px: usize,
    pub eccentricity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneInstance {
    pub id: u32,
    /// `[x, y, w, h]`
    pub bbox: [usize; 4],
    /// Row-major runs over the bounding box, background first.
    pub rle: Vec<u32>,
    pub score: f64,
    pub features: InstanceFeatures,
    pub tile: usize,
    pub flags: Vec<InstanceFlag>,
}

#[derive(Debug, thiserror::Error)]
pub enum SceneError {
    #[error(transparent)]
    Rle(#[from] RleError),
    #[error(transparent)]
    Raster(#[from] RasterError),
    #[error("instance ids are not unique")]
    DuplicateId,
    #[error("score outside [0, 1]")]
    InvalidScore,
}

impl SceneInstance {
    /// Describes a mask; the score is the instance's solidity.
    pub fn from_mask(m: &InstanceMask, tile: usize, mut flags: Vec<InstanceFlag>) -> Result<Self, SceneError> {
        let f = compute_shape_features(m)?;
        flags.sort();
        flags.dedup();
        Ok(Self {
            id: m.id(),
            bbox: m.bbox().as_array(),
            rle: encode_runs(m.local()),
            score: f.solidity.clamp(0.0, 1.0),
            features: InstanceFeatures { area_px: f.area, perimeter_px: f.perimeter, eccentricity: f.eccentricity },
            tile,
            flags,
        })
    }

    pub fn pixel_box(&self) -> PixelBox {
        let [x, y, w, h] = self.bbox;
        PixelBox { x, y, w, h }
    }

    pub fn has_flag(&self, f: InstanceFlag) -> bool {
        self.flags.contains(&f)
    }

    pub fn to_mask(&self, frame: (usize, usize)) -> Result<InstanceMask, SceneError> {
        let b = self.pixel_box();
        let local = decode_runs(b.w, b.h, &self.rle)?;
        Ok(InstanceMask::from_local_unchecked(self.id, b.x, b.y, &local, frame)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneResult {
    pub width: usize,
    pub height: usize,
    pub instances: Vec<SceneInstance>,
    /// Resolved configuration that produced the result.
    pub config: serde_json::Value,
    /// Feature averages over all instances, used for filtering.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cohort: Option<CohortAverages>,
}

impl SceneResult {
    /// Builds a result from masks in slide coordinates, numbering ids from 1
    /// in the given order.
    pub fn from_masks(
        width: usize,
        height: usize,
        masks: Vec<(InstanceMask, usize, Vec<InstanceFlag>)>,
        config: serde_json::Value,
    ) -> Result<Self, SceneError> {
        let instances = masks
            .into_iter()
            .enumerate()
            .map(|(i, (m, tile, flags))| SceneInstance::from_mask(&m.with_id(i as u32 + 1), tile, flags))
            .collect::<Result<Vec<_>, _>>()?;
        let cohort = cohort_averages(&instances).ok();
        Ok(Self { width, height, instances, config, cohort })
    }

    pub fn validate(&self) -> Result<(), SceneError> {
        let mut ids: Vec<u32> = self.instances.iter().map(|i| i.id).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(SceneError::DuplicateId);
        }
        for inst in &self.instances {
            if !(0.0..=1.0).contains(&inst.score) {
                return Err(SceneError::InvalidScore);
            }
            inst.to_mask((self.width, self.height))?;
        }
        Ok(())
    }

    pub fn masks(&self) -> Result<Vec<InstanceMask>, SceneError> {
        self.instances.iter().map(|i| i.to_mask((self.width, self.height))).collect()
    }

    pub fn scored(&self) -> Result<Vec<ScoredInstance>, SceneError> {
        self.instances
            .iter()
            .map(|i| Ok(ScoredInstance { mask: i.to_mask((self.width, self.height))?, score: i.score }))
            .collect()
    }
}
