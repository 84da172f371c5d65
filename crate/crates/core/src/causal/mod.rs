//! Causal forest: grouped subsamples of honest trees with
//! bootstrap-of-little-bags confidence intervals.

mod tree;

pub use tree::{fit_causal_tree, CausalTree, CtNode, TreeConfig};

use alloc::vec::Vec;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::FeatureMatrix;
use crate::math::{sqrt, z_for_level};
use crate::rng;

#[derive(Debug, Error, PartialEq)]
pub enum CausalError {
    #[error("{half} half contains only one treatment arm")]
    MissingArm { half: &'static str },
    #[error("split or estimation half is empty")]
    EmptyHalf,
    #[error("subsample of {got} rows is too small (need at least {need})")]
    SubsampleTooSmall { got: usize, need: usize },
    #[error("variance estimation needs at least two tree groups")]
    NeedTwoGroups,
    #[error("feature dimension mismatch: forest expects {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("feature matrix has {rows} rows but arm/outcome vectors have {labels}")]
    LengthMismatch { rows: usize, labels: usize },
    #[error("confidence level must be in (0, 1), got {0}")]
    InvalidLevel(f64),
    #[error("invalid config: {0}")]
    InvalidConfig(&'static str),
}

/// Forest-fitting hyperparameters. `n_groups` little bags of `group_size`
/// trees each; all trees of a group share one subsample.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ForestConfig {
    pub n_groups: usize,
    pub group_size: usize,
    pub subsample_fraction: f64,
    pub honesty_fraction: f64,
    pub min_leaf_per_arm: usize,
    pub max_depth: usize,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            n_groups: 50,
            group_size: 4,
            subsample_fraction: 0.5,
            honesty_fraction: 0.5,
            min_leaf_per_arm: 10,
            max_depth: 8,
            seed: 0,
        }
    }
}

impl ForestConfig {
    fn validate(&self) -> Result<(), CausalError> {
        if self.n_groups == 0 || self.group_size == 0 {
            return Err(CausalError::InvalidConfig("n_groups and group_size must be >= 1"));
        }
        if !(self.subsample_fraction > 0.0 && self.subsample_fraction <= 1.0) {
            return Err(CausalError::InvalidConfig("subsample_fraction must be in (0, 1]"));
        }
        if !(self.honesty_fraction > 0.0 && self.honesty_fraction < 1.0) {
            return Err(CausalError::InvalidConfig("honesty_fraction must be in (0, 1)"));
        }
        if self.min_leaf_per_arm == 0 || self.max_depth == 0 {
            return Err(CausalError::InvalidConfig("min_leaf_per_arm and max_depth must be >= 1"));
        }
        Ok(())
    }
}

/// Confidence interval around a CATE point estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CateInterval {
    pub theta_l: f64,
    pub theta_point: f64,
    pub theta_u: f64,
    pub level: f64,
}

/// Uplift segment a case falls into given its interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CaseGroup {
    Persuadable,
    DoNotDisturb,
    Uncertain,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CausalForest {
    pub groups: Vec<Vec<CausalTree>>,
    pub feature_count: usize,
    /// Outcomes were all 0/1 at fit time; intervals then stay in [-1, 1].
    pub binary_outcome: bool,
    pub config: ForestConfig,
}

/// Fit the forest. Trees inside one group share a subsample drawn without
/// replacement; each tree splits its subsample into honesty halves.
/// Deterministic for a fixed seed.
pub fn fit_forest(
    x: &FeatureMatrix,
    t: &[u8],
    y: &[f64],
    cfg: &ForestConfig,
) -> Result<CausalForest, CausalError> {
    cfg.validate()?;
    let n = x.n_rows();
    if t.len() != n || y.len() != n {
        return Err(CausalError::LengthMismatch { rows: n, labels: t.len().min(y.len()) });
    }
    let m = ((n as f64 * cfg.subsample_fraction) as usize).min(n);
    if m < 4 {
        return Err(CausalError::SubsampleTooSmall { got: m, need: 4 });
    }

    let tree_cfg = TreeConfig { min_leaf_per_arm: cfg.min_leaf_per_arm, max_depth: cfg.max_depth };
    let all: Vec<usize> = (0..n).collect();
    let mut groups = Vec::with_capacity(cfg.n_groups);

    for b in 0..cfg.n_groups {
        let mut subsample = all.clone();
        subsample.shuffle(&mut rng::keyed(cfg.seed, &[0x666f_7265_7374, b as u64]));
        subsample.truncate(m);

        let mut trees = Vec::with_capacity(cfg.group_size);
        for g in 0..cfg.group_size {
            let mut rows = subsample.clone();
            rows.shuffle(&mut rng::keyed(cfg.seed, &[0x666f_7265_7374, b as u64, g as u64]));
            let n_split = ((m as f64 * cfg.honesty_fraction) as usize).clamp(1, m - 1);
            let (split_rows, est_rows) = rows.split_at(n_split);
            trees.push(fit_causal_tree(x, t, y, split_rows, est_rows, tree_cfg)?);
        }
        groups.push(trees);
    }

    Ok(CausalForest {
        groups,
        feature_count: x.n_cols(),
        binary_outcome: y.iter().all(|&v| v == 0.0 || v == 1.0),
        config: cfg.clone(),
    })
}

impl CausalForest {
    pub fn n_trees(&self) -> usize {
        self.groups.iter().map(Vec::len).sum()
    }

    /// Mean leaf effect over all trees.
    pub fn predict(&self, x: &[f64]) -> Result<f64, CausalError> {
        self.check_dim(x)?;
        let mut sum = 0.0;
        for tree in self.groups.iter().flatten() {
            sum += tree.predict(x);
        }
        Ok(sum / self.n_trees() as f64)
    }

    fn check_dim(&self, x: &[f64]) -> Result<(), CausalError> {
        if x.len() != self.feature_count {
            return Err(CausalError::DimensionMismatch {
                expected: self.feature_count,
                got: x.len(),
            });
        }
        Ok(())
    }

    /// Point estimate with a bootstrap-of-little-bags confidence interval:
    /// Var = max(0, between-group variance - within-group variance / G),
    /// interval = point +/- z * sqrt(Var). Negative variance collapses the
    /// interval onto the point; binary-outcome forests clamp to [-1, 1].
    pub fn estimate_cate(&self, x: &[f64], level: f64) -> Result<CateInterval, CausalError> {
        self.check_dim(x)?;
        if !(level > 0.0 && level < 1.0) {
            return Err(CausalError::InvalidLevel(level));
        }
        let n_groups = self.groups.len();
        if n_groups < 2 {
            return Err(CausalError::NeedTwoGroups);
        }

        let mut group_means = Vec::with_capacity(n_groups);
        let mut within_acc = 0.0;
        let mut within_groups = 0usize;
        let mut total = 0.0;
        let mut total_n = 0usize;
        for trees in &self.groups {
            let taus: Vec<f64> = trees.iter().map(|t| t.predict(x)).collect();
            let mean = taus.iter().sum::<f64>() / taus.len() as f64;
            group_means.push(mean);
            total += taus.iter().sum::<f64>();
            total_n += taus.len();
            if taus.len() >= 2 {
                let v = taus.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
                    / (taus.len() - 1) as f64;
                within_acc += v;
                within_groups += 1;
            }
        }
        let point = total / total_n as f64;
        let var_between = group_means.iter().map(|m| (m - point) * (m - point)).sum::<f64>()
            / (n_groups - 1) as f64;
        let var_within = if within_groups > 0 { within_acc / within_groups as f64 } else { 0.0 };
        let g = self.config.group_size as f64;
        let var = (var_between - var_within / g).max(0.0);

        let half = z_for_level(level) * sqrt(var);
        let (mut lo, mut hi) = (point - half, point + half);
        if self.binary_outcome {
            lo = lo.max(-1.0);
            hi = hi.min(1.0);
        }
        Ok(CateInterval { theta_l: lo, theta_point: point, theta_u: hi, level })
    }
}

/// Sign-based segmentation: interval entirely above zero means treating
/// helps, entirely below means it hurts, straddling zero is unresolved.
pub fn classify_case(interval: &CateInterval) -> CaseGroup {
    if interval.theta_l > 0.0 {
        CaseGroup::Persuadable
    } else if interval.theta_u < 0.0 {
        CaseGroup::DoNotDisturb
    } else {
        CaseGroup::Uncertain
    }
}
