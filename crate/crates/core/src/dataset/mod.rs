//! Image–mask training pairs: screening, splitting, augmentation, export.

pub mod augment;
pub mod coco;
pub mod rle;
pub mod split;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use crate::raster::png::{read_color, read_labels, read_mask, write_color, write_mask};
use crate::raster::{BinaryMask, ColorImage, InstanceMask, RasterError};
use crate::scene::SceneResult;

pub use self::augment::{augment, apply_ops, sample_ops, AugmentFamily, AugmentOp};
pub use self::coco::{build_coco, export_coco, import_coco, CocoDataset};
pub use self::rle::{decode_rle, encode_rle, RleError, RleMask};
pub use self::split::{split_dataset, SplitRatios};

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("no mask with id {0}")]
    UnknownMaskId(u32),
    #[error("split part {0} would be empty")]
    TooFewSamples(&'static str),
    #[error("split ratios must be non-negative and sum to 1")]
    InvalidRatios,
    #[error("mask {0} lies outside its image")]
    MaskOutOfBounds(u32),
    #[error("{0}")]
    Io(String),
    #[error("malformed annotations: {0}")]
    Format(String),
    #[error(transparent)]
    Rle(#[from] RleError),
    #[error(transparent)]
    Raster(#[from] RasterError),
}

impl From<std::io::Error> for DatasetError {
    fn from(e: std::io::Error) -> Self {
        DatasetError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for DatasetError {
    fn from(e: serde_json::Error) -> Self {
        DatasetError::Format(e.to_string())
    }
}

/// One image with its instance masks and their screening status.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSample {
    pub name: String,
    pub image: ColorImage,
    pub masks: Vec<InstanceMask>,
    /// Parallel to `masks`; rejected masks are never exported.
    pub accepted: Vec<bool>,
}

impl TrainingSample {
    pub fn new(name: impl Into<String>, image: ColorImage, masks: Vec<InstanceMask>) -> Result<Self, DatasetError> {
        let frame = (image.width(), image.height());
        if let Some(m) = masks.iter().find(|m| m.frame() != frame) {
            return Err(DatasetError::MaskOutOfBounds(m.id()));
        }
        let accepted = vec![true; masks.len()];
        Ok(Self { name: name.into(), image, masks, accepted })
    }

    pub fn accepted_masks(&self) -> impl Iterator<Item = &InstanceMask> {
        self.masks.iter().zip(&self.accepted).filter(|(_, a)| **a).map(|(m, _)| m)
    }
}

/// Marks the listed masks rejected. The image is kept even when every mask
/// is rejected.
pub fn screen_masks(sample: &TrainingSample, rejected_ids: &[u32]) -> Result<TrainingSample, DatasetError> {
    let mut out = sample.clone();
    for &id in rejected_ids {
        let i = sample.masks.iter().position(|m| m.id() == id).ok_or(DatasetError::UnknownMaskId(id))?;
        out.accepted[i] = false;
    }
    Ok(out)
}

/// Writes `images/<name>.png` and `masks/<name>/<k>.png` for accepted masks.
pub fn write_dataset_dir(dir: &Path, samples: &[TrainingSample]) -> Result<(), DatasetError> {
    fs::create_dir_all(dir.join("images"))?;
    for s in samples {
        write_color(&dir.join("images").join(format!("{}.png", s.name)), &s.image)?;
        let mdir = dir.join("masks").join(&s.name);
        fs::create_dir_all(&mdir)?;
        for (k, m) in s.accepted_masks().enumerate() {
            write_mask(&mdir.join(format!("{k}.png")), &m.to_frame_mask())?;
        }
    }
    Ok(())
}

fn sorted_entries(dir: &Path, ext: &str) -> Result<Vec<PathBuf>, DatasetError> {
    let mut v: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == ext))
        .collect();
    v.sort();
    Ok(v)
}

fn stem(p: &Path) -> String {
    p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

/// Mask files in numeric order of their stem (`0.png`, `1.png`, ..., `10.png`).
fn mask_files(dir: &Path) -> Result<Vec<PathBuf>, DatasetError> {
    let mut v = sorted_entries(dir, "png")?;
    v.sort_by_key(|p| (stem(p).parse::<u64>().unwrap_or(u64::MAX), stem(p)));
    Ok(v)
}

/// Reads a dataset directory: `images/*.png` with either `masks/<image>/*.png`
/// or a COCO `annotations.json`.
pub fn read_dataset_dir(dir: &Path) -> Result<Vec<TrainingSample>, DatasetError> {
    let coco_path = dir.join("annotations.json");
    let from_coco = if coco_path.exists() { Some(import_coco(&coco_path)?) } else { None };
    let mut out = Vec::new();
    for img_path in sorted_entries(&dir.join("images"), "png")? {
        let name = stem(&img_path);
        let image = read_color(&img_path)?;
        let frame = (image.width(), image.height());
        let masks = match &from_coco {
            Some(c) => c.get(&format!("{name}.png")).map(|e| e.masks.clone()).unwrap_or_default(),
            None => {
                let mdir = dir.join("masks").join(&name);
                let mut masks = Vec::new();
                if mdir.is_dir() {
                    for (k, p) in mask_files(&mdir)?.iter().enumerate() {
                        let m = read_mask(p)?;
                        if m.width() != frame.0 || m.height() != frame.1 {
                            return Err(DatasetError::MaskOutOfBounds(k as u32));
                        }
                        if !m.is_empty() {
                            masks.push(InstanceMask::from_local_unchecked(k as u32, 0, 0, &m, frame)?);
                        }
                    }
                }
                masks
            }
        };
        out.push(TrainingSample::new(name, image, masks)?);
    }
    Ok(out)
}

/// Instances of one image, with scores (1.0 when the source has none).
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceSet {
    pub frame: (usize, usize),
    pub masks: Vec<InstanceMask>,
    pub scores: Vec<f64>,
}

/// Instances from a label image: every non-zero label is one instance.
pub fn instances_from_labels(width: usize, height: usize, labels: &[u16]) -> Result<Vec<InstanceMask>, DatasetError> {
    let mut by_label: BTreeMap<u16, Vec<(usize, usize)>> = BTreeMap::new();
    for (i, &l) in labels.iter().enumerate() {
        if l > 0 {
            by_label.entry(l).or_default().push((i % width, i / width));
        }
    }
    by_label
        .into_iter()
        .map(|(l, px)| Ok(InstanceMask::from_pixels_unchecked(l as u32, &px, (width, height))?))
        .collect()
}

/// Loads instance sets keyed by image name from any supported layout:
/// a COCO `annotations.json`, a `masks/` tree, label PNGs, or scene JSON files.
pub fn load_instance_sets(dir: &Path) -> Result<BTreeMap<String, InstanceSet>, DatasetError> {
    let mut out = BTreeMap::new();
    let coco_path = dir.join("annotations.json");
    if coco_path.exists() {
        for (file, e) in import_coco(&coco_path)? {
            out.insert(stem(Path::new(&file)), InstanceSet { frame: e.frame, masks: e.masks, scores: e.scores });
        }
        return Ok(out);
    }
    if dir.join("masks").is_dir() {
        for s in read_dataset_dir(dir)? {
            let n = s.masks.len();
            out.insert(s.name, InstanceSet { frame: (s.image.width(), s.image.height()), masks: s.masks, scores: vec![1.0; n] });
        }
        return Ok(out);
    }
    for p in sorted_entries(dir, "png")? {
        let (w, h, labels) = read_labels(&p)?;
        let masks = instances_from_labels(w, h, &labels)?;
        let n = masks.len();
        out.insert(stem(&p), InstanceSet { frame: (w, h), masks, scores: vec![1.0; n] });
    }
    for p in sorted_entries(dir, "json")? {
        let scene: SceneResult = serde_json::from_str(&fs::read_to_string(&p)?)?;
        let masks = scene.masks().map_err(|e| DatasetError::Format(e.to_string()))?;
        let scores = scene.instances.iter().map(|i| i.score).collect();
        out.insert(stem(&p), InstanceSet { frame: (scene.width, scene.height), masks, scores });
    }
    Ok(out)
}

/// Union of accepted masks as one frame-sized mask.
pub fn foreground(sample: &TrainingSample) -> BinaryMask {
    let mut m = BinaryMask::empty(sample.image.width(), sample.image.height());
    for inst in sample.accepted_masks() {
        for (x, y) in inst.pixels() {
            m.set(x, y, true);
        }
    }
    m
}
