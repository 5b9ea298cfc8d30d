//! Detection matching and precision/recall metrics for rotated boxes.
//!
//! Detections are matched greedily in descending confidence; each ground
//! truth absorbs at most one detection. Average precision integrates the
//! monotone precision envelope over all recall points.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rbox::{rbox_iou, RBox};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("dataset contains no ground truth")]
    NoGroundTruth,
    #[error("invalid criterion: {0}")]
    InvalidCriterion(String),
}

pub type Result<T, E = EvalError> = std::result::Result<T, E>;

/// Recorded in reports: precision when no detection passes the threshold.
pub const EMPTY_PRECISION_CONVENTION: &str = "precision is 1 when there are no detections";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Detection {
    pub rbox: RBox,
    pub confidence: f64,
    pub frame: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CriterionKind {
    /// Rotated-box IoU at least `threshold`.
    Iou,
    /// Center distance at most `threshold` times the ground-truth length.
    CenterDistance,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchCriterion {
    pub kind: CriterionKind,
    pub threshold: f64,
}

impl MatchCriterion {
    pub fn new(kind: CriterionKind, threshold: f64) -> Result<Self> {
        if !(threshold > 0.0) || !threshold.is_finite() {
            return Err(EvalError::InvalidCriterion(format!(
                "threshold must be positive, got {threshold}"
            )));
        }
        Ok(Self { kind, threshold })
    }

    pub fn iou(threshold: f64) -> Result<Self> {
        if threshold > 1.0 {
            return Err(EvalError::InvalidCriterion(format!(
                "IoU threshold must not exceed 1, got {threshold}"
            )));
        }
        Self::new(CriterionKind::Iou, threshold)
    }

    pub fn center(threshold: f64) -> Result<Self> {
        Self::new(CriterionKind::CenterDistance, threshold)
    }

    /// Match quality if `det` may match `gt`; larger is better.
    fn score(&self, det: &RBox, gt: &RBox) -> Option<f64> {
        match self.kind {
            CriterionKind::Iou => {
                let iou = rbox_iou(det, gt);
                (iou >= self.threshold).then_some(iou)
            }
            CriterionKind::CenterDistance => {
                let d = det.center().distance(&gt.center());
                (d <= self.threshold * gt.l()).then_some(-d)
            }
        }
    }
}

impl fmt::Display for MatchCriterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.kind {
            CriterionKind::Iou => "iou",
            CriterionKind::CenterDistance => "center",
        };
        write!(f, "{kind}:{}", self.threshold)
    }
}

impl FromStr for MatchCriterion {
    type Err = EvalError;

    /// `iou:0.5` or `center:0.5`.
    fn from_str(s: &str) -> Result<Self> {
        let (kind, value) = s
            .split_once(':')
            .ok_or_else(|| EvalError::InvalidCriterion(format!("expected kind:value, got {s:?}")))?;
        let threshold: f64 = value
            .parse()
            .map_err(|_| EvalError::InvalidCriterion(format!("bad threshold {value:?}")))?;
        match kind {
            "iou" => Self::iou(threshold),
            "center" => Self::center(threshold),
            other => Err(EvalError::InvalidCriterion(format!(
                "unknown kind {other:?} (iou|center)"
            ))),
        }
    }
}

/// Detection indices in processing order: descending confidence, then index.
fn confidence_order(dets: &[Detection]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&i, &j| {
        dets[j]
            .confidence
            .total_cmp(&dets[i].confidence)
            .then(i.cmp(&j))
    });
    order
}

/// Greedy single-frame matching; returns `(det index, matched gt)` in
/// processing order.
pub fn match_frame(
    dets: &[Detection],
    gts: &[RBox],
    crit: &MatchCriterion,
) -> Vec<(usize, Option<usize>)> {
    let mut taken = vec![false; gts.len()];
    confidence_order(dets)
        .into_iter()
        .map(|di| {
            let mut best: Option<(usize, f64)> = None;
            for (gi, gt) in gts.iter().enumerate() {
                if taken[gi] {
                    continue;
                }
                if let Some(s) = crit.score(&dets[di].rbox, gt) {
                    if best.is_none_or(|(_, b)| s > b) {
                        best = Some((gi, s));
                    }
                }
            }
            let gt = best.map(|(gi, _)| gi);
            if let Some(gi) = gt {
                taken[gi] = true;
            }
            (di, gt)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchedDetection {
    pub det_index: usize,
    pub confidence: f64,
    pub gt: Option<usize>,
}

/// Matching outcome of one frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameMatches {
    pub frame: u64,
    pub num_gt: usize,
    pub detections: Vec<MatchedDetection>,
}

impl FrameMatches {
    pub fn true_positives(&self) -> usize {
        self.detections.iter().filter(|d| d.gt.is_some()).count()
    }

    pub fn false_positives(&self) -> usize {
        self.detections.len() - self.true_positives()
    }

    pub fn false_negatives(&self) -> usize {
        self.num_gt - self.true_positives()
    }
}

pub fn evaluate_frame(
    frame: u64,
    dets: &[Detection],
    gts: &[RBox],
    crit: &MatchCriterion,
) -> FrameMatches {
    let detections = match_frame(dets, gts, crit)
        .into_iter()
        .map(|(di, gt)| MatchedDetection {
            det_index: di,
            confidence: dets[di].confidence,
            gt,
        })
        .collect();
    FrameMatches {
        frame,
        num_gt: gts.len(),
        detections,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrPoint {
    pub recall: f64,
    pub precision: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApResult {
    pub ap: f64,
    /// One raw point per detection, in ranking order.
    pub curve: Vec<PrPoint>,
}

impl ApResult {
    /// Upper envelope of the curve: precision at recall `r` is the best
    /// precision reached at any recall `>= r`.
    pub fn envelope(&self) -> Vec<PrPoint> {
        let mut env = self.curve.clone();
        for i in (0..env.len().saturating_sub(1)).rev() {
            env[i].precision = env[i].precision.max(env[i + 1].precision);
        }
        env
    }

    /// Envelope precision at `n + 1` evenly spaced recall levels; zero past
    /// the highest recall reached.
    pub fn sample(&self, n: usize) -> Vec<PrPoint> {
        let env = self.envelope();
        (0..=n)
            .map(|i| {
                let recall = i as f64 / n as f64;
                let precision = env
                    .iter()
                    .find(|p| p.recall >= recall)
                    .map_or(0.0, |p| p.precision);
                PrPoint { recall, precision }
            })
            .collect()
    }
}

/// All detections of the dataset in ranking order, with their TP flag.
fn ranked(frames: &[FrameMatches]) -> Vec<(f64, u64, usize, bool)> {
    let mut all: Vec<(f64, u64, usize, bool)> = frames
        .iter()
        .flat_map(|f| {
            f.detections
                .iter()
                .map(move |d| (d.confidence, f.frame, d.det_index, d.gt.is_some()))
        })
        .collect();
    all.sort_by(|a, b| {
        b.0.total_cmp(&a.0)
            .then(a.1.cmp(&b.1))
            .then(a.2.cmp(&b.2))
    });
    all
}

fn total_gt(frames: &[FrameMatches]) -> Result<usize> {
    let n: usize = frames.iter().map(|f| f.num_gt).sum();
    if n == 0 {
        return Err(EvalError::NoGroundTruth);
    }
    Ok(n)
}

/// All-point interpolated average precision.
pub fn average_precision(frames: &[FrameMatches]) -> Result<ApResult> {
    let n_gt = total_gt(frames)? as f64;
    let mut curve = Vec::new();
    let (mut tp, mut fp) = (0usize, 0usize);
    for (_, _, _, is_tp) in ranked(frames) {
        if is_tp {
            tp += 1;
        } else {
            fp += 1;
        }
        curve.push(PrPoint {
            recall: tp as f64 / n_gt,
            precision: tp as f64 / (tp + fp) as f64,
        });
    }
    let mut result = ApResult { ap: 0.0, curve };
    let env = result.envelope();
    let mut prev_recall = 0.0;
    let mut ap = 0.0;
    for p in &env {
        if p.recall > prev_recall {
            ap += (p.recall - prev_recall) * p.precision;
            prev_recall = p.recall;
        }
    }
    result.ap = ap;
    Ok(result)
}

/// Precision and recall over detections with confidence `>= threshold`.
pub fn precision_recall_at(frames: &[FrameMatches], threshold: f64) -> Result<(f64, f64)> {
    let n_gt = total_gt(frames)?;
    let (mut tp, mut det) = (0usize, 0usize);
    for f in frames {
        for d in f.detections.iter().filter(|d| d.confidence >= threshold) {
            det += 1;
            if d.gt.is_some() {
                tp += 1;
            }
        }
    }
    let precision = if det == 0 {
        1.0
    } else {
        tp as f64 / det as f64
    };
    Ok((precision, tp as f64 / n_gt as f64))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameCounts {
    pub frame: u64,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

/// Report written by `eval`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub criterion: String,
    pub ap: f64,
    pub num_gt: usize,
    pub num_detections: usize,
    /// Envelope precision at recall 0, 0.01, ..., 1.
    pub pr_curve: Vec<PrPoint>,
    pub frames: Vec<FrameCounts>,
    pub precision_convention: String,
}

pub const REPORT_CURVE_SAMPLES: usize = 100;

/// Builds the report; frames are listed in ascending frame id.
pub fn build_report(crit: &MatchCriterion, frames: &[FrameMatches]) -> Result<EvalReport> {
    let ap = average_precision(frames)?;
    let mut counts: Vec<FrameCounts> = frames
        .iter()
        .map(|f| FrameCounts {
            frame: f.frame,
            tp: f.true_positives(),
            fp: f.false_positives(),
            fn_: f.false_negatives(),
        })
        .collect();
    counts.sort_by_key(|c| c.frame);
    Ok(EvalReport {
        criterion: crit.to_string(),
        ap: ap.ap,
        num_gt: total_gt(frames)?,
        num_detections: frames.iter().map(|f| f.detections.len()).sum(),
        pr_curve: ap.sample(REPORT_CURVE_SAMPLES),
        frames: counts,
        precision_convention: EMPTY_PRECISION_CONVENTION.to_string(),
    })
}

/// Matches every frame of a dataset given as `(frame, detections, ground truth)`.
pub fn evaluate_dataset<'a, I>(frames: I, crit: &MatchCriterion) -> Vec<FrameMatches>
where
    I: IntoIterator<Item = (u64, &'a [Detection], &'a [RBox])>,
{
    let mut out: Vec<FrameMatches> = frames
        .into_iter()
        .map(|(frame, dets, gts)| evaluate_frame(frame, dets, gts, crit))
        .collect();
    out.sort_by_key(|f| f.frame);
    out
}
