//! Segmentation metrics at pixel and cell level.
//!
//! Mean IoU averages per-class IoU over the classes `{0, 1}` plus any other
//! label present in either input. A class absent from both prediction and
//! ground truth counts as IoU 1.

use std::fmt::Write as _;

use crate::assembly::{
    backproject, backproject_scores, max_iou_on, rasterize_labels_on, CellLabelGrid, Sigrid, EMPTY,
};
use crate::error::{Error, Result};
use crate::imaging::Mask;

/// Default `beta` of the F-measure.
pub const DEFAULT_BETA: f64 = 0.3;

/// Number of evenly spaced thresholds in the MaxF sweep (`0, 1/255, ..., 1`).
pub const THRESHOLDS: usize = 256;

fn check_dims(pred: &Mask, gt: &Mask) -> Result<()> {
    if pred.dims() != gt.dims() {
        return Err(Error::DimensionMismatch {
            expected: gt.dims(),
            found: pred.dims(),
        });
    }
    Ok(())
}

fn label_class_iou(pred: &[u8], gt: &[u8], class: u8) -> Option<f64> {
    let (mut inter, mut union) = (0usize, 0usize);
    for (&p, &g) in pred.iter().zip(gt) {
        let (a, b) = (p == class, g == class);
        inter += usize::from(a && b);
        union += usize::from(a || b);
    }
    (union > 0).then(|| inter as f64 / union as f64)
}

pub(crate) fn label_mean_iou(pred: &[u8], gt: &[u8]) -> f64 {
    let mut present = [false; 256];
    present[0] = true;
    present[1] = true;
    pred.iter().chain(gt).for_each(|&l| present[l as usize] = true);
    let classes: Vec<u8> = (0..=255u8).filter(|&c| present[c as usize]).collect();
    let total: f64 = classes
        .iter()
        .map(|&c| label_class_iou(pred, gt, c).unwrap_or(1.0))
        .sum();
    total / classes.len() as f64
}

pub(crate) fn label_accuracy(pred: &[u8], gt: &[u8]) -> f64 {
    if gt.is_empty() {
        return 1.0;
    }
    let hits = pred.iter().zip(gt).filter(|(p, g)| p == g).count();
    hits as f64 / gt.len() as f64
}

/// IoU of a single class, `None` when the class occurs in neither mask.
pub fn class_iou(pred: &Mask, gt: &Mask, class: u8) -> Result<Option<f64>> {
    check_dims(pred, gt)?;
    Ok(label_class_iou(pred.labels(), gt.labels(), class))
}

/// Mean IoU over classes.
pub fn iou(pred: &Mask, gt: &Mask) -> Result<f64> {
    check_dims(pred, gt)?;
    Ok(label_mean_iou(pred.labels(), gt.labels()))
}

/// Fraction of pixels whose labels agree.
pub fn accuracy(pred: &Mask, gt: &Mask) -> Result<f64> {
    check_dims(pred, gt)?;
    Ok(label_accuracy(pred.labels(), gt.labels()))
}

/// Index of the highest threshold `i/255` that `score` reaches.
#[inline]
fn threshold_bucket(score: f64) -> usize {
    let last = THRESHOLDS - 1;
    let mut i = ((score * last as f64).floor().max(0.0) as usize).min(last);
    while i < last && ((i + 1) as f64) / (last as f64) <= score {
        i += 1;
    }
    while i > 0 && (i as f64) / (last as f64) > score {
        i -= 1;
    }
    i
}

/// `F_beta = (1 + beta^2) P R / (beta^2 P + R)`, 0 when undefined.
pub fn f_beta(precision: f64, recall: f64, beta: f64) -> f64 {
    let b2 = beta * beta;
    let denom = b2 * precision + recall;
    if denom > 0.0 {
        (1.0 + b2) * precision * recall / denom
    } else {
        0.0
    }
}

pub(crate) fn max_f_beta_labels(scores: &[f64], gt: &[u8], beta: f64) -> Result<f64> {
    if scores.len() != gt.len() {
        return Err(Error::InvalidData(format!(
            "{} scores for {} ground-truth labels",
            scores.len(),
            gt.len()
        )));
    }
    let mut fg = [0usize; THRESHOLDS];
    let mut bg = [0usize; THRESHOLDS];
    for (&s, &g) in scores.iter().zip(gt) {
        if !(0.0..=1.0).contains(&s) {
            return Err(Error::InvalidData(format!("score {s} outside [0, 1]")));
        }
        let bucket = threshold_bucket(s);
        match g {
            0 => bg[bucket] += 1,
            1 => fg[bucket] += 1,
            other => {
                return Err(Error::InvalidData(format!(
                    "ground truth must be binary, found label {other}"
                )))
            }
        }
    }
    let positives: usize = fg.iter().sum();
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut best = 0.0f64;
    for i in (0..THRESHOLDS).rev() {
        tp += fg[i];
        fp += bg[i];
        if tp + fp == 0 || positives == 0 {
            continue;
        }
        let precision = tp as f64 / (tp + fp) as f64;
        let recall = tp as f64 / positives as f64;
        best = best.max(f_beta(precision, recall, beta));
    }
    Ok(best)
}

/// Maximum F-measure over 256 thresholds `t = i/255`, predicting foreground
/// where `score >= t`. Thresholds where precision or recall is undefined
/// score 0.
pub fn max_f_beta(scores: &[f64], gt: &Mask, beta: f64) -> Result<f64> {
    if scores.len() != gt.labels().len() {
        return Err(Error::DimensionMismatch {
            expected: gt.dims(),
            found: (scores.len(), 1),
        });
    }
    max_f_beta_labels(scores, gt.labels(), beta)
}

/// Cell-level prediction for one image.
#[derive(Clone, Debug)]
pub enum CellPrediction {
    /// Hard labels only; scores are taken as the labels themselves.
    Labels(CellLabelGrid),
    /// Row-major per-cell foreground scores plus their hard labels.
    Scores { scores: Vec<f32>, labels: CellLabelGrid },
}

impl CellPrediction {
    pub fn labels(&self) -> &CellLabelGrid {
        match self {
            CellPrediction::Labels(l) => l,
            CellPrediction::Scores { labels, .. } => labels,
        }
    }

    fn scores(&self) -> Vec<f32> {
        match self {
            CellPrediction::Labels(l) => l
                .labels()
                .iter()
                .map(|&v| if v == EMPTY { 0.0 } else { v as f32 })
                .collect(),
            CellPrediction::Scores { scores, .. } => scores.clone(),
        }
    }
}

/// Per-image (or corpus-mean) metrics.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricsReport {
    pub pixel_accuracy: f64,
    pub pixel_iou: f64,
    pub pixel_max_f_beta: f64,
    pub cell_accuracy: f64,
    pub cell_iou: f64,
    pub cell_max_f_beta: f64,
    pub max_iou: f64,
    pub beta: f64,
}

impl MetricsReport {
    fn values(&self) -> [f64; 7] {
        [
            self.pixel_accuracy,
            self.pixel_iou,
            self.pixel_max_f_beta,
            self.cell_accuracy,
            self.cell_iou,
            self.cell_max_f_beta,
            self.max_iou,
        ]
    }

    /// Whether pixel IoU stays within the superpixelation's upper bound.
    pub fn within_bound(&self) -> bool {
        self.pixel_iou <= self.max_iou
    }
}

fn cell_metrics(
    pred_labels: &CellLabelGrid,
    pred_scores: &[f32],
    gt_cells: &CellLabelGrid,
    sg: &Sigrid,
    beta: f64,
) -> Result<(f64, f64, f64)> {
    let gw = sg.spec().grid_width;
    let mut pred = Vec::with_capacity(sg.retained_count());
    let mut gt = Vec::with_capacity(sg.retained_count());
    let mut scores = Vec::with_capacity(sg.retained_count());
    for c in sg.cells() {
        let label = pred_labels.get(c.cell);
        if label == EMPTY {
            return Err(Error::InvalidData(format!(
                "prediction leaves populated cell {:?} empty",
                c.cell
            )));
        }
        pred.push(label);
        gt.push(gt_cells.get(c.cell));
        scores.push(pred_scores[c.cell.row * gw + c.cell.col] as f64);
    }
    Ok((
        label_accuracy(&pred, &gt),
        label_mean_iou(&pred, &gt),
        max_f_beta_labels(&scores, &gt, beta)?,
    ))
}

/// Scores a cell prediction against a pixel ground truth: cell metrics over
/// populated cells only, pixel metrics after back-projection.
pub fn evaluate(pred: &CellPrediction, gt: &Mask, sg: &Sigrid, beta: f64) -> Result<MetricsReport> {
    if gt.dims() != sg.source_dims() {
        return Err(Error::DimensionMismatch {
            expected: sg.source_dims(),
            found: gt.dims(),
        });
    }
    crate::assembly::check_spec(pred.labels().spec(), sg.spec())?;
    let scores = pred.scores();
    let gt_cells = rasterize_labels_on(gt, sg)?;
    let (cell_accuracy, cell_iou, cell_max_f_beta) =
        cell_metrics(pred.labels(), &scores, &gt_cells, sg, beta)?;

    let pixel_pred = backproject(pred.labels(), sg)?;
    let pixel_scores: Vec<f64> = backproject_scores(&scores, sg)?
        .into_iter()
        .map(f64::from)
        .collect();
    let report = MetricsReport {
        pixel_accuracy: accuracy(&pixel_pred, gt)?,
        pixel_iou: iou(&pixel_pred, gt)?,
        pixel_max_f_beta: max_f_beta(&pixel_scores, gt, beta)?,
        cell_accuracy,
        cell_iou,
        cell_max_f_beta,
        max_iou: max_iou_on(gt, sg)?,
        beta,
    };
    if !report.within_bound() {
        log::warn!(
            "pixel IoU {:.6} exceeds MaxIoU {:.6}",
            report.pixel_iou,
            report.max_iou
        );
    }
    Ok(report)
}

/// Scores a pixel-level prediction mask. Cell metrics use the majority
/// label of the prediction on each populated cell.
pub fn evaluate_mask(pred: &Mask, gt: &Mask, sg: &Sigrid, beta: f64) -> Result<MetricsReport> {
    check_dims(pred, gt)?;
    if gt.dims() != sg.source_dims() {
        return Err(Error::DimensionMismatch {
            expected: sg.source_dims(),
            found: gt.dims(),
        });
    }
    let pred_cells = rasterize_labels_on(pred, sg)?;
    let gt_cells = rasterize_labels_on(gt, sg)?;
    let cell_scores: Vec<f32> = pred_cells
        .labels()
        .iter()
        .map(|&v| if v == EMPTY { 0.0 } else { v as f32 })
        .collect();
    let (cell_accuracy, cell_iou, cell_max_f_beta) =
        cell_metrics(&pred_cells, &cell_scores, &gt_cells, sg, beta)?;
    let pixel_scores: Vec<f64> = pred.labels().iter().map(|&v| f64::from(v)).collect();
    Ok(MetricsReport {
        pixel_accuracy: accuracy(pred, gt)?,
        pixel_iou: iou(pred, gt)?,
        pixel_max_f_beta: max_f_beta(&pixel_scores, gt, beta)?,
        cell_accuracy,
        cell_iou,
        cell_max_f_beta,
        max_iou: max_iou_on(gt, sg)?,
        beta,
    })
}

/// Unweighted mean of per-image reports, `None` for an empty slice.
pub fn corpus_mean(reports: &[MetricsReport]) -> Option<MetricsReport> {
    let first = reports.first()?;
    let n = reports.len() as f64;
    let mut sums = [0.0f64; 7];
    for r in reports {
        for (s, v) in sums.iter_mut().zip(r.values()) {
            *s += v;
        }
    }
    let m = sums.map(|s| s / n);
    Some(MetricsReport {
        pixel_accuracy: m[0],
        pixel_iou: m[1],
        pixel_max_f_beta: m[2],
        cell_accuracy: m[3],
        cell_iou: m[4],
        cell_max_f_beta: m[5],
        max_iou: m[6],
        beta: first.beta,
    })
}

const COLUMNS: [&str; 8] = [
    "image_id",
    "pixel_acc",
    "pixel_iou",
    "pixel_maxf",
    "cell_acc",
    "cell_iou",
    "cell_maxf",
    "max_iou",
];

/// Comma-separated rows, one per image followed by a `MEAN` row.
pub fn to_csv(rows: &[(String, MetricsReport)]) -> String {
    let mut out = COLUMNS.join(",");
    out.push('\n');
    let mean = corpus_mean(&rows.iter().map(|r| r.1).collect::<Vec<_>>());
    let all = rows
        .iter()
        .map(|(id, r)| (id.as_str(), *r))
        .chain(mean.map(|m| ("MEAN", m)));
    for (id, r) in all {
        out.push_str(id);
        for v in r.values() {
            let _ = write!(out, ",{v:.6}");
        }
        out.push('\n');
    }
    out
}

/// Aligned plain-text table with the same columns and `MEAN` row.
pub fn to_table(rows: &[(String, MetricsReport)]) -> String {
    let mean = corpus_mean(&rows.iter().map(|r| r.1).collect::<Vec<_>>());
    let all: Vec<(&str, MetricsReport)> = rows
        .iter()
        .map(|(id, r)| (id.as_str(), *r))
        .chain(mean.map(|m| ("MEAN", m)))
        .collect();
    let id_width = all
        .iter()
        .map(|(id, _)| id.len())
        .chain([COLUMNS[0].len()])
        .max()
        .unwrap_or(8);
    let mut out = format!("{:<id_width$}", COLUMNS[0]);
    for c in &COLUMNS[1..] {
        let _ = write!(out, "  {c:>10}");
    }
    out.push('\n');
    for (id, r) in all {
        let _ = write!(out, "{id:<id_width$}");
        for v in r.values() {
            let _ = write!(out, "  {v:>10.4}");
        }
        out.push('\n');
    }
    out
}
