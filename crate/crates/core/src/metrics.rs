//! Instance matching and the evaluation measures: AP, recall, F1 and Jaccard.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::raster::{BinaryMask, InstanceMask};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricsError {
    #[error("both masks are empty")]
    BothEmpty,
    #[error("masks live in different frames")]
    FrameMismatch,
    #[error("score {0} outside [0, 1]")]
    InvalidScore(f64),
    #[error("iou threshold must be in (0, 1]")]
    InvalidThreshold,
}

/// A predicted instance with its confidence.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredInstance {
    pub mask: InstanceMask,
    pub score: f64,
}

impl ScoredInstance {
    pub fn new(mask: InstanceMask, score: f64) -> Result<Self, MetricsError> {
        if !(0.0..=1.0).contains(&score) {
            return Err(MetricsError::InvalidScore(score));
        }
        Ok(Self { mask, score })
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Matching {
    /// (pred index, gt index, IoU)
    pub pairs: Vec<(usize, usize, f64)>,
    pub unmatched_preds: Vec<usize>,
    pub unmatched_gts: Vec<usize>,
}

impl Matching {
    pub fn tp(&self) -> usize {
        self.pairs.len()
    }

    pub fn fp(&self) -> usize {
        self.unmatched_preds.len()
    }

    pub fn fn_(&self) -> usize {
        self.unmatched_gts.len()
    }

    /// Whether prediction `i` was matched.
    pub fn is_matched(&self, i: usize) -> bool {
        self.pairs.iter().any(|p| p.0 == i)
    }
}

pub fn mask_iou(a: &InstanceMask, b: &InstanceMask) -> Result<f64, MetricsError> {
    if a.frame() != b.frame() {
        return Err(MetricsError::FrameMismatch);
    }
    let inter = a.intersection(b);
    Ok(inter as f64 / (a.area() + b.area() - inter) as f64)
}

/// IoU of two binary masks of the same size.
pub fn binary_iou(a: &BinaryMask, b: &BinaryMask) -> Result<f64, MetricsError> {
    let (inter, union) = inter_union(a, b)?;
    if union == 0 {
        return Err(MetricsError::BothEmpty);
    }
    Ok(inter as f64 / union as f64)
}

fn inter_union(a: &BinaryMask, b: &BinaryMask) -> Result<(usize, usize), MetricsError> {
    if a.width() != b.width() || a.height() != b.height() {
        return Err(MetricsError::FrameMismatch);
    }
    let (mut i, mut u) = (0, 0);
    for (&x, &y) in a.as_slice().iter().zip(b.as_slice()) {
        i += (x && y) as usize;
        u += (x || y) as usize;
    }
    Ok((i, u))
}

/// Prediction indices by descending score; equal scores keep input order.
pub fn score_order(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    order
}

/// Greedy matching over a precomputed IoU table `iou[pred][gt]`.
pub fn match_by_iou(scores: &[f64], iou: &[Vec<f64>], n_gts: usize, iou_min: f64) -> Matching {
    let mut taken = vec![false; n_gts];
    let mut m = Matching::default();
    for p in score_order(scores) {
        let mut best: Option<(usize, f64)> = None;
        for (g, &v) in iou[p].iter().enumerate() {
            if !taken[g] && v >= iou_min && best.is_none_or(|b| v > b.1) {
                best = Some((g, v));
            }
        }
        match best {
            Some((g, v)) => {
                taken[g] = true;
                m.pairs.push((p, g, v));
            }
            None => m.unmatched_preds.push(p),
        }
    }
    m.unmatched_preds.sort_unstable();
    m.unmatched_gts = (0..n_gts).filter(|&g| !taken[g]).collect();
    m
}

pub fn iou_table(preds: &[ScoredInstance], gts: &[InstanceMask]) -> Result<Vec<Vec<f64>>, MetricsError> {
    preds
        .iter()
        .map(|p| gts.iter().map(|g| mask_iou(&p.mask, g)).collect::<Result<Vec<_>, _>>())
        .collect()
}

/// Greedy score-ordered matching: each prediction, highest score first, takes
/// the unmatched ground truth with the highest IoU at or above `iou_min`.
pub fn match_instances(
    preds: &[ScoredInstance],
    gts: &[InstanceMask],
    iou_min: f64,
) -> Result<Matching, MetricsError> {
    check_threshold(iou_min)?;
    let table = iou_table(preds, gts)?;
    let scores: Vec<f64> = preds.iter().map(|p| p.score).collect();
    Ok(match_by_iou(&scores, &table, gts.len(), iou_min))
}

fn check_threshold(iou_min: f64) -> Result<(), MetricsError> {
    if !(iou_min > 0.0 && iou_min <= 1.0) {
        return Err(MetricsError::InvalidThreshold);
    }
    Ok(())
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 { 0.0 } else { num as f64 / den as f64 }
}

/// (precision, recall, F1) from counts; zero wherever a denominator is zero.
pub fn precision_recall_f1(tp: usize, fp: usize, fn_: usize) -> (f64, f64, f64) {
    let p = ratio(tp, tp + fp);
    let r = ratio(tp, tp + fn_);
    let f = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
    (p, r, f)
}

/// All-point interpolated AP from per-prediction scores and match flags,
/// swept in descending score order over the whole set.
pub fn average_precision_from_flags(scored: &[(f64, bool)], n_gts: usize) -> f64 {
    if n_gts == 0 {
        return 0.0;
    }
    let scores: Vec<f64> = scored.iter().map(|s| s.0).collect();
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut curve = Vec::with_capacity(scored.len());
    for i in score_order(&scores) {
        if scored[i].1 {
            tp += 1;
        } else {
            fp += 1;
        }
        curve.push((tp as f64 / n_gts as f64, tp as f64 / (tp + fp) as f64));
    }
    // monotone precision envelope, right to left
    for i in (0..curve.len().saturating_sub(1)).rev() {
        curve[i].1 = curve[i].1.max(curve[i + 1].1);
    }
    let mut ap = 0.0;
    let mut prev_r = 0.0;
    for &(r, p) in &curve {
        ap += (r - prev_r) * p;
        prev_r = r;
    }
    ap
}

/// One image's predictions and ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageEval {
    pub preds: Vec<ScoredInstance>,
    pub gts: Vec<InstanceMask>,
}

pub fn average_precision(images: &[ImageEval], iou_min: f64) -> Result<f64, MetricsError> {
    let matchings = match_all(images, iou_min)?;
    Ok(ap_from_matchings(images, &matchings))
}

fn match_all(images: &[ImageEval], iou_min: f64) -> Result<Vec<Matching>, MetricsError> {
    check_threshold(iou_min)?;
    images.par_iter().map(|im| match_instances(&im.preds, &im.gts, iou_min)).collect()
}

fn ap_from_matchings(images: &[ImageEval], matchings: &[Matching]) -> f64 {
    let n_gts: usize = images.iter().map(|im| im.gts.len()).sum();
    let flags: Vec<(f64, bool)> = images
        .iter()
        .zip(matchings)
        .flat_map(|(im, m)| {
            let mut matched = vec![false; im.preds.len()];
            for p in &m.pairs {
                matched[p.0] = true;
            }
            im.preds.iter().zip(matched).map(|(p, hit)| (p.score, hit))
        })
        .collect();
    average_precision_from_flags(&flags, n_gts)
}

fn union_mask<'a>(frame: (usize, usize), masks: impl Iterator<Item = &'a InstanceMask>) -> BinaryMask {
    let mut m = BinaryMask::empty(frame.0, frame.1);
    for inst in masks {
        for (x, y) in inst.pixels() {
            m.set(x, y, true);
        }
    }
    m
}

/// Dataset-level pixel Jaccard: summed intersections over summed unions of
/// the per-image foreground unions. An empty union everywhere counts as 1.
pub fn aggregate_jaccard(pairs: &[(BinaryMask, BinaryMask)]) -> Result<f64, MetricsError> {
    let (mut i, mut u) = (0, 0);
    for (p, g) in pairs {
        let (a, b) = inter_union(p, g)?;
        i += a;
        u += b;
    }
    Ok(if u == 0 { 1.0 } else { i as f64 / u as f64 })
}

/// Mean IoU over matched pairs; 0 with no matches.
pub fn mean_matched_iou(matchings: &[Matching]) -> f64 {
    let ious: Vec<f64> = matchings.iter().flat_map(|m| m.pairs.iter().map(|p| p.2)).collect();
    if ious.is_empty() { 0.0 } else { ious.iter().sum::<f64>() / ious.len() as f64 }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JaccardMode {
    #[default]
    Pixel,
    MeanMatchedIou,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub ap: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub jaccard: f64,
    pub jaccard_mode: JaccardMode,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub iou_min: f64,
    pub images: usize,
}

/// All measures over a set of images.
pub fn evaluate(images: &[ImageEval], iou_min: f64, mode: JaccardMode) -> Result<MetricsReport, MetricsError> {
    let matchings = match_all(images, iou_min)?;
    let (tp, fp, fn_) = matchings
        .iter()
        .fold((0, 0, 0), |acc, m| (acc.0 + m.tp(), acc.1 + m.fp(), acc.2 + m.fn_()));
    let (precision, recall, f1) = precision_recall_f1(tp, fp, fn_);
    let jaccard = match mode {
        JaccardMode::MeanMatchedIou => mean_matched_iou(&matchings),
        JaccardMode::Pixel => {
            let pairs = images
                .par_iter()
                .map(|im| {
                    let frame = im
                        .preds
                        .first()
                        .map(|p| p.mask.frame())
                        .or_else(|| im.gts.first().map(|g| g.frame()))
                        .unwrap_or((1, 1));
                    if im.preds.iter().map(|p| p.mask.frame()).chain(im.gts.iter().map(|g| g.frame())).any(|f| f != frame) {
                        return Err(MetricsError::FrameMismatch);
                    }
                    Ok((
                        union_mask(frame, im.preds.iter().map(|p| &p.mask)),
                        union_mask(frame, im.gts.iter()),
                    ))
                })
                .collect::<Result<Vec<_>, _>>()?;
            aggregate_jaccard(&pairs)?
        }
    };
    Ok(MetricsReport {
        ap: ap_from_matchings(images, &matchings),
        precision,
        recall,
        f1,
        jaccard,
        jaccard_mode: mode,
        tp,
        fp,
        fn_,
        iou_min,
        images: images.len(),
    })
}
