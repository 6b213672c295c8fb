//! Closed-form Mask R-CNN multi-task loss for a single instance.

use serde::{Deserialize, Serialize};

pub const CLS_EPS: f64 = 1e-12;
pub const MASK_EPS: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LossError {
    #[error("mask sizes differ: {pred} vs {gt}")]
    DimensionMismatch { pred: usize, gt: usize },
    #[error("mask must be a non-empty square grid")]
    NotSquare,
    #[error("mask value outside its allowed range")]
    OutOfRange,
    #[error("box width and height must be positive")]
    InvalidBox,
    #[error("loss components must be non-negative")]
    NegativeComponent,
}

/// Box by center, width and height, in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BoundingBox {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Result<Self, LossError> {
        let b = Self { x, y, w, h };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<(), LossError> {
        if !(self.w > 0.0 && self.h > 0.0) || !self.x.is_finite() || !self.y.is_finite() {
            return Err(LossError::InvalidBox);
        }
        Ok(())
    }
}

/// N×N predicted probabilities, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftMask {
    n: usize,
    p: Vec<f64>,
}

impl SoftMask {
    pub fn new(n: usize, p: Vec<f64>) -> Result<Self, LossError> {
        if n == 0 || p.len() != n * n {
            return Err(LossError::NotSquare);
        }
        if p.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(LossError::OutOfRange);
        }
        Ok(Self { n, p })
    }

    pub fn uniform(n: usize, v: f64) -> Result<Self, LossError> {
        Self::new(n, vec![v; n * n])
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, LossError> {
        if rows.iter().any(|r| r.len() != rows.len()) {
            return Err(LossError::NotSquare);
        }
        Self::new(rows.len(), rows.concat())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn values(&self) -> &[f64] {
        &self.p
    }
}

/// N×N ground-truth labels in {0, 1}, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct HardMask {
    n: usize,
    labels: Vec<bool>,
}

impl HardMask {
    pub fn new(n: usize, labels: Vec<bool>) -> Result<Self, LossError> {
        if n == 0 || labels.len() != n * n {
            return Err(LossError::NotSquare);
        }
        Ok(Self { n, labels })
    }

    pub fn from_rows(rows: &[Vec<u8>]) -> Result<Self, LossError> {
        if rows.iter().any(|r| r.len() != rows.len()) {
            return Err(LossError::NotSquare);
        }
        if rows.iter().flatten().any(|&v| v > 1) {
            return Err(LossError::OutOfRange);
        }
        Self::new(rows.len(), rows.iter().flatten().map(|&v| v == 1).collect())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn labels(&self) -> &[bool] {
        &self.labels
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub cls: f64,
    pub bbx: f64,
    pub mask: f64,
    pub total: f64,
}

/// `−ln p` with `p` clamped to `[1e-12, 1]`.
pub fn classification_loss(p: f64) -> f64 {
    let p = if p.is_nan() { CLS_EPS } else { p.clamp(CLS_EPS, 1.0) };
    0.0 - p.ln()
}

pub fn smooth_l1(x: f64) -> f64 {
    if x.abs() < 1.0 {
        0.5 * x * x
    } else {
        x.abs() - 0.5
    }
}

/// Derivative of [`smooth_l1`].
pub fn smooth_l1_grad(x: f64) -> f64 {
    if x.abs() < 1.0 {
        x
    } else {
        x.signum()
    }
}

/// How box differences are scaled before the robust penalty.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoxNormalization {
    /// Raw pixel differences.
    #[default]
    Raw,
    /// x and w differences divided by `sx`, y and h by `sy`.
    Scaled { sx: f64, sy: f64 },
}

pub fn bbox_loss(pred: &BoundingBox, gt: &BoundingBox) -> f64 {
    bbox_loss_with(pred, gt, BoxNormalization::Raw)
}

pub fn bbox_loss_with(pred: &BoundingBox, gt: &BoundingBox, norm: BoxNormalization) -> f64 {
    let (sx, sy) = match norm {
        BoxNormalization::Raw => (1.0, 1.0),
        BoxNormalization::Scaled { sx, sy } => (sx, sy),
    };
    smooth_l1((pred.x - gt.x) / sx)
        + smooth_l1((pred.y - gt.y) / sy)
        + smooth_l1((pred.w - gt.w) / sx)
        + smooth_l1((pred.h - gt.h) / sy)
}

/// Mean binary cross-entropy over the full N×N grid. The probability of the
/// true label is clamped to `[1e-7, 1]` before the logarithm.
pub fn mask_loss(pred: &SoftMask, gt: &HardMask) -> Result<f64, LossError> {
    if pred.n != gt.n {
        return Err(LossError::DimensionMismatch { pred: pred.n, gt: gt.n });
    }
    let sum: f64 = pred
        .p
        .iter()
        .zip(&gt.labels)
        .map(|(&p, &l)| {
            // only the logged probability is clamped, so an exact match costs 0
            let q = if l { p } else { 1.0 - p };
            q.clamp(MASK_EPS, 1.0).ln()
        })
        .sum();
    Ok(0.0 - sum / (pred.n * pred.n) as f64)
}

pub fn total_loss(cls: f64, bbx: f64, mask: f64) -> Result<LossBreakdown, LossError> {
    if !(cls >= 0.0 && bbx >= 0.0 && mask >= 0.0) {
        return Err(LossError::NegativeComponent);
    }
    Ok(LossBreakdown { cls, bbx, mask, total: cls + bbx + mask })
}

/// One instance's inputs as read by the `losses` command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossRecord {
    pub p: f64,
    pub pred_box: BoundingBox,
    pub gt_box: BoundingBox,
    pub pred_mask: Vec<Vec<f64>>,
    pub gt_mask: Vec<Vec<u8>>,
    #[serde(default)]
    pub box_normalization: BoxNormalization,
}

impl LossRecord {
    pub fn evaluate(&self) -> Result<LossBreakdown, LossError> {
        if !(0.0..=1.0).contains(&self.p) {
            return Err(LossError::OutOfRange);
        }
        self.pred_box.validate()?;
        self.gt_box.validate()?;
        let pred = SoftMask::from_rows(&self.pred_mask)?;
        let gt = HardMask::from_rows(&self.gt_mask)?;
        total_loss(
            classification_loss(self.p),
            bbox_loss_with(&self.pred_box, &self.gt_box, self.box_normalization),
            mask_loss(&pred, &gt)?,
        )
    }
}
