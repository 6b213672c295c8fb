//! COCO-style annotation export and import with RLE segmentations.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::rle::{decode_runs_column_major, encode_runs_column_major};
use super::{DatasetError, TrainingSample};
use crate::raster::InstanceMask;

pub const CATEGORY_NAME: &str = "steatosis";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CocoImage {
    pub id: u64,
    pub file_name: String,
    pub width: usize,
    pub height: usize,
}

/// Uncompressed RLE: `size` is `[height, width]`, counts run column-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CocoRle {
    pub size: [usize; 2],
    pub counts: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CocoAnnotation {
    pub id: u64,
    pub image_id: u64,
    pub category_id: u64,
    pub segmentation: CocoRle,
    pub area: usize,
    pub bbox: [usize; 4],
    pub iscrowd: u8,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CocoCategory {
    pub id: u64,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CocoDataset {
    pub images: Vec<CocoImage>,
    pub annotations: Vec<CocoAnnotation>,
    pub categories: Vec<CocoCategory>,
}

/// Image ids follow sample order from 1; annotation ids run from 1 over
/// accepted masks in order, so repeated exports are identical.
pub fn build_coco(samples: &[TrainingSample]) -> CocoDataset {
    let mut images = Vec::new();
    let mut annotations = Vec::new();
    for (i, s) in samples.iter().enumerate() {
        let image_id = i as u64 + 1;
        let (w, h) = (s.image.width(), s.image.height());
        images.push(CocoImage { id: image_id, file_name: format!("{}.png", s.name), width: w, height: h });
        for m in s.accepted_masks() {
            annotations.push(CocoAnnotation {
                id: annotations.len() as u64 + 1,
                image_id,
                category_id: 1,
                segmentation: CocoRle { size: [h, w], counts: encode_runs_column_major(&m.to_frame_mask()) },
                area: m.area(),
                bbox: m.bbox().as_array(),
                iscrowd: 0,
                score: None,
            });
        }
    }
    CocoDataset { images, annotations, categories: vec![CocoCategory { id: 1, name: CATEGORY_NAME.into() }] }
}

pub fn export_coco(samples: &[TrainingSample], path: &Path) -> Result<(), DatasetError> {
    let json = serde_json::to_string_pretty(&build_coco(samples))?;
    fs::write(path, json)?;
    Ok(())
}

/// Decoded annotations of one image.
#[derive(Debug, Clone, PartialEq)]
pub struct CocoEntry {
    pub frame: (usize, usize),
    pub masks: Vec<InstanceMask>,
    pub scores: Vec<f64>,
}

/// Decodes a COCO dataset into masks keyed by file name. Mask ids are the
/// annotation ids.
pub fn decode_coco(c: &CocoDataset) -> Result<BTreeMap<String, CocoEntry>, DatasetError> {
    let mut by_id = BTreeMap::new();
    let mut out = BTreeMap::new();
    for im in &c.images {
        by_id.insert(im.id, im.file_name.clone());
        out.insert(
            im.file_name.clone(),
            CocoEntry { frame: (im.width, im.height), masks: Vec::new(), scores: Vec::new() },
        );
    }
    for a in &c.annotations {
        let name = by_id
            .get(&a.image_id)
            .ok_or_else(|| DatasetError::Format(format!("annotation {} has unknown image {}", a.id, a.image_id)))?;
        let entry = out.get_mut(name).expect("image registered");
        let (w, h) = entry.frame;
        if a.segmentation.size != [h, w] {
            return Err(DatasetError::Format(format!("annotation {} size does not match its image", a.id)));
        }
        let m = decode_runs_column_major(w, h, &a.segmentation.counts)?;
        let id = u32::try_from(a.id).map_err(|_| DatasetError::Format("annotation id too large".into()))?;
        entry.masks.push(InstanceMask::from_local_unchecked(id, 0, 0, &m, (w, h))?);
        entry.scores.push(a.score.unwrap_or(1.0));
    }
    Ok(out)
}

pub fn import_coco(path: &Path) -> Result<BTreeMap<String, CocoEntry>, DatasetError> {
    let c: CocoDataset = serde_json::from_str(&fs::read_to_string(path)?)?;
    decode_coco(&c)
}
