//! Split conformal prediction over the boosted classifier.
//!
//! Calibration scores are s_i = 1 - p(true class); the threshold is the
//! ceil((n+1)(1-alpha))/n empirical quantile of those scores (higher
//! quantile convention, capped at the maximum score). A class enters the
//! prediction set when 1 - p(class) stays at or below the threshold, which
//! keeps the usual 1-alpha marginal coverage guarantee.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::FeatureMatrix;
use crate::gbdt::{GbdtError, GbdtModel};
use crate::math::ceil;

#[derive(Debug, Error, PartialEq)]
pub enum ConformalError {
    #[error("calibration set is empty")]
    EmptyCalibrationSet,
    #[error("alpha must be in (0, 1), got {0}")]
    InvalidAlpha(f64),
    #[error("labels must be 0 or 1, found {0}")]
    NonBinaryLabel(u8),
    #[error("feature matrix and labels disagree: {rows} rows vs {labels} labels")]
    LengthMismatch { rows: usize, labels: usize },
    #[error(transparent)]
    Model(#[from] GbdtError),
}

/// Calibrated score threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConformalCalibrator {
    pub qhat_threshold: f64,
    pub alpha: f64,
    pub n_calib: usize,
}

/// Which classes the set contains. Four shapes: {}, {0}, {1}, {0,1}.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictionSet {
    pub contains0: bool,
    pub contains1: bool,
}

impl ConformalCalibrator {
    /// Rebuild from persisted fields.
    pub fn from_parts(qhat_threshold: f64, alpha: f64, n_calib: usize) -> Self {
        Self { qhat_threshold, alpha, n_calib }
    }
}

/// Calibrate on held-out data. The calibration set must be disjoint from
/// the rows the model was fit on; that is the caller's contract.
pub fn calibrate(
    model: &GbdtModel,
    calib_x: &FeatureMatrix,
    calib_y: &[u8],
    alpha: f64,
) -> Result<ConformalCalibrator, ConformalError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(ConformalError::InvalidAlpha(alpha));
    }
    let n = calib_x.n_rows();
    if n == 0 {
        return Err(ConformalError::EmptyCalibrationSet);
    }
    if n != calib_y.len() {
        return Err(ConformalError::LengthMismatch { rows: n, labels: calib_y.len() });
    }

    let mut scores = Vec::with_capacity(n);
    for (row, &label) in calib_x.rows().zip(calib_y) {
        if label > 1 {
            return Err(ConformalError::NonBinaryLabel(label));
        }
        let (p0, p1) = model.predict_proba(row)?;
        let p_true = if label == 1 { p1 } else { p0 };
        scores.push(1.0 - p_true);
    }
    scores.sort_unstable_by(f64::total_cmp);

    // rank of the quantile, capped at n (level min(1, ceil((n+1)(1-a))/n))
    let rank = (ceil((n as f64 + 1.0) * (1.0 - alpha)) as usize).min(n).max(1);
    let qhat = scores[rank - 1];

    Ok(ConformalCalibrator { qhat_threshold: qhat, alpha, n_calib: n })
}

/// Prediction set for one feature vector.
pub fn prediction_set(
    calibrator: &ConformalCalibrator,
    model: &GbdtModel,
    x: &[f64],
) -> Result<PredictionSet, ConformalError> {
    let (p0, p1) = model.predict_proba(x)?;
    Ok(PredictionSet {
        contains0: 1.0 - p0 <= calibrator.qhat_threshold,
        contains1: 1.0 - p1 <= calibrator.qhat_threshold,
    })
}

/// Ternary confidence encoding of a set: certain-negative 0, certain-positive 1,
/// uncertain (empty or both) 0.5.
pub fn rho(set: PredictionSet) -> f64 {
    match (set.contains0, set.contains1) {
        (true, false) => 0.0,
        (false, true) => 1.0,
        _ => 0.5,
    }
}
