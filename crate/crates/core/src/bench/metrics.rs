//! One-pass-evaluation metrics: center-error precision and overlap success
//! curves. Frames with invalid (NaN) ground truth are excluded from both.

use crate::imaging::BBox;

/// Precision thresholds: 0..=50 px, 1 px steps.
pub const PRECISION_THRESHOLDS: usize = 51;
/// Success thresholds: 0..=1 overlap, 0.02 steps.
pub const SUCCESS_THRESHOLDS: usize = 51;
/// Ranking threshold for the precision score.
pub const PRECISION_RANK_PX: usize = 20;

/// Per-frame center errors and overlaps for the valid ground-truth frames.
pub fn per_frame_scores(predicted: &[BBox], groundtruth: &[BBox]) -> (Vec<f64>, Vec<f64>) {
    assert_eq!(predicted.len(), groundtruth.len());
    let mut cle = Vec::new();
    let mut iou = Vec::new();
    for (p, g) in predicted.iter().zip(groundtruth.iter()) {
        if !g.is_valid() {
            continue;
        }
        cle.push(p.center_distance(g));
        iou.push(p.iou(g));
    }
    (cle, iou)
}

/// Fraction of frames whose center error is within each pixel threshold.
pub fn precision_curve(center_errors: &[f64]) -> Vec<f64> {
    let n = center_errors.len().max(1) as f64;
    (0..PRECISION_THRESHOLDS)
        .map(|t| {
            let thr = t as f64;
            center_errors.iter().filter(|&&e| e <= thr).count() as f64 / n
        })
        .collect()
}

/// Fraction of frames whose overlap exceeds each threshold. The final
/// threshold (1.0) is treated half-open so a perfect overlap still counts.
pub fn success_curve(overlaps: &[f64]) -> Vec<f64> {
    let n = overlaps.len().max(1) as f64;
    (0..SUCCESS_THRESHOLDS)
        .map(|t| {
            let thr = t as f64 * 0.02;
            let count = overlaps
                .iter()
                .filter(|&&o| o > thr || (thr >= 1.0 && o >= 1.0))
                .count();
            count as f64 / n
        })
        .collect()
}

/// Mean of the success-curve samples.
pub fn auc(success: &[f64]) -> f64 {
    if success.is_empty() {
        return 0.0;
    }
    success.iter().sum::<f64>() / success.len() as f64
}
