//! Honest causal trees.
//!
//! A tree is grown in two phases on disjoint halves of its data: the split
//! half drives recursive partitioning (maximizing the n-weighted squared
//! effect criterion), the estimation half supplies the leaf effects. Leaf
//! estimation never reads split-half outcomes, which is what makes the
//! tree honest.

use alloc::boxed::Box;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::data::FeatureMatrix;

use super::CausalError;

#[derive(Debug, Clone, Copy)]
pub struct TreeConfig {
    /// Minimum treated and minimum control samples a child must keep on
    /// both halves for a split to be admissible.
    pub min_leaf_per_arm: usize,
    pub max_depth: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CtNode {
    Split {
        feature: usize,
        threshold: f64,
        left: Box<CtNode>,
        right: Box<CtNode>,
    },
    Leaf {
        n_treated: usize,
        n_control: usize,
        tau_hat: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CausalTree {
    pub root: CtNode,
}

/// Running difference-in-means accumulator.
#[derive(Clone, Copy, Default)]
struct ArmSums {
    n1: usize,
    s1: f64,
    n0: usize,
    s0: f64,
}

impl ArmSums {
    fn add(&mut self, treated: bool, y: f64) {
        if treated {
            self.n1 += 1;
            self.s1 += y;
        } else {
            self.n0 += 1;
            self.s0 += y;
        }
    }

    fn n(&self) -> usize {
        self.n1 + self.n0
    }

    fn tau(&self) -> f64 {
        self.s1 / self.n1 as f64 - self.s0 / self.n0 as f64
    }

    /// n * tau^2, the per-node term of the heterogeneity criterion.
    fn score(&self) -> f64 {
        let tau = self.tau();
        self.n() as f64 * tau * tau
    }
}

struct GrowCtx<'a> {
    x: &'a FeatureMatrix,
    t: &'a [u8],
    y: &'a [f64],
    cfg: TreeConfig,
}

fn arm_sums(ctx: &GrowCtx, rows: &[usize]) -> ArmSums {
    let mut s = ArmSums::default();
    for &i in rows {
        s.add(ctx.t[i] == 1, ctx.y[i]);
    }
    s
}

struct BestSplit {
    score: f64,
    feature: usize,
    threshold: f64,
}

/// Exhaustive scan over all (feature, threshold) candidates; thresholds are
/// midpoints between consecutive distinct split-half values. A candidate is
/// admissible only if every child keeps `min_leaf_per_arm` of each arm on
/// both halves. Strictly-greater comparison keeps the lowest feature index
/// and lowest threshold on ties.
fn best_split(ctx: &GrowCtx, split_rows: &[usize], est_rows: &[usize]) -> Option<BestSplit> {
    let total_split = arm_sums(ctx, split_rows);
    let total_est = arm_sums(ctx, est_rows);
    let min = ctx.cfg.min_leaf_per_arm;
    let mut best: Option<BestSplit> = None;

    for f in 0..ctx.x.n_cols() {
        let mut sv: Vec<(f64, bool, f64)> =
            split_rows.iter().map(|&i| (ctx.x.row(i)[f], ctx.t[i] == 1, ctx.y[i])).collect();
        sv.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
        let mut ev: Vec<(f64, bool)> =
            est_rows.iter().map(|&i| (ctx.x.row(i)[f], ctx.t[i] == 1)).collect();
        ev.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));

        let mut left = ArmSums::default();
        let mut eleft = ArmSums::default();
        let mut e_ptr = 0usize;

        for w in 0..sv.len() - 1 {
            let (v, treated, yv) = sv[w];
            left.add(treated, yv);
            if v >= sv[w + 1].0 {
                continue; // not a boundary between distinct values
            }
            let threshold = 0.5 * (v + sv[w + 1].0);
            while e_ptr < ev.len() && ev[e_ptr].0 <= threshold {
                eleft.add(ev[e_ptr].1, 0.0);
                e_ptr += 1;
            }

            let sl = left;
            let sr = ArmSums {
                n1: total_split.n1 - sl.n1,
                s1: total_split.s1 - sl.s1,
                n0: total_split.n0 - sl.n0,
                s0: total_split.s0 - sl.s0,
            };
            let el = eleft;
            let er_n1 = total_est.n1 - el.n1;
            let er_n0 = total_est.n0 - el.n0;
            if sl.n1 < min || sl.n0 < min || sr.n1 < min || sr.n0 < min {
                continue;
            }
            if el.n1 < min || el.n0 < min || er_n1 < min || er_n0 < min {
                continue;
            }

            let score = sl.score() + sr.score();
            if best.as_ref().is_none_or(|b| score > b.score) {
                best = Some(BestSplit { score, feature: f, threshold });
            }
        }
    }
    best
}

fn grow(
    ctx: &GrowCtx,
    split_rows: Vec<usize>,
    est_rows: Vec<usize>,
    depth: usize,
) -> Result<CtNode, CausalError> {
    let est = arm_sums(ctx, &est_rows);
    let make_leaf = |est: ArmSums| CtNode::Leaf {
        n_treated: est.n1,
        n_control: est.n0,
        tau_hat: est.tau(),
    };

    if depth >= ctx.cfg.max_depth {
        return Ok(make_leaf(est));
    }
    let parent_score = arm_sums(ctx, &split_rows).score();
    let Some(split) = best_split(ctx, &split_rows, &est_rows) else {
        return Ok(make_leaf(est));
    };
    if split.score <= parent_score {
        return Ok(make_leaf(est));
    }

    let part = |rows: Vec<usize>| -> (Vec<usize>, Vec<usize>) {
        rows.into_iter().partition(|&i| ctx.x.row(i)[split.feature] <= split.threshold)
    };
    let (sl, sr) = part(split_rows);
    let (el, er) = part(est_rows);

    Ok(CtNode::Split {
        feature: split.feature,
        threshold: split.threshold,
        left: Box::new(grow(ctx, sl, el, depth + 1)?),
        right: Box::new(grow(ctx, sr, er, depth + 1)?),
    })
}

fn check_both_arms(t: &[u8], rows: &[usize], half: &'static str) -> Result<(), CausalError> {
    let treated = rows.iter().filter(|&&i| t[i] == 1).count();
    if treated == 0 || treated == rows.len() {
        return Err(CausalError::MissingArm { half });
    }
    Ok(())
}

/// Fit one honest tree: structure from `split_rows`, effects from `est_rows`.
pub fn fit_causal_tree(
    x: &FeatureMatrix,
    t: &[u8],
    y: &[f64],
    split_rows: &[usize],
    est_rows: &[usize],
    cfg: TreeConfig,
) -> Result<CausalTree, CausalError> {
    if t.len() != x.n_rows() || y.len() != x.n_rows() {
        return Err(CausalError::LengthMismatch {
            rows: x.n_rows(),
            labels: t.len().min(y.len()),
        });
    }
    if split_rows.is_empty() || est_rows.is_empty() {
        return Err(CausalError::EmptyHalf);
    }
    check_both_arms(t, split_rows, "split")?;
    check_both_arms(t, est_rows, "estimation")?;

    let ctx = GrowCtx { x, t, y, cfg };
    let root = grow(&ctx, split_rows.to_vec(), est_rows.to_vec(), 0)?;
    Ok(CausalTree { root })
}

impl CausalTree {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut node = &self.root;
        loop {
            match node {
                CtNode::Leaf { tau_hat, .. } => return *tau_hat,
                CtNode::Split { feature, threshold, left, right } => {
                    node = if x[*feature] <= *threshold { left } else { right };
                }
            }
        }
    }

    /// Recompute leaf effects for a fixed structure from a fresh estimation
    /// set. Split-half data plays no part here.
    pub fn reestimate(
        &self,
        x: &FeatureMatrix,
        t: &[u8],
        y: &[f64],
        est_rows: &[usize],
    ) -> Result<CausalTree, CausalError> {
        fn rec(
            node: &CtNode,
            x: &FeatureMatrix,
            t: &[u8],
            y: &[f64],
            rows: Vec<usize>,
        ) -> Result<CtNode, CausalError> {
            match node {
                CtNode::Leaf { .. } => {
                    let mut s = ArmSums::default();
                    for &i in &rows {
                        s.add(t[i] == 1, y[i]);
                    }
                    if s.n1 == 0 || s.n0 == 0 {
                        return Err(CausalError::MissingArm { half: "estimation" });
                    }
                    Ok(CtNode::Leaf { n_treated: s.n1, n_control: s.n0, tau_hat: s.tau() })
                }
                CtNode::Split { feature, threshold, left, right } => {
                    let (l, r): (Vec<usize>, Vec<usize>) =
                        rows.into_iter().partition(|&i| x.row(i)[*feature] <= *threshold);
                    Ok(CtNode::Split {
                        feature: *feature,
                        threshold: *threshold,
                        left: Box::new(rec(left, x, t, y, l)?),
                        right: Box::new(rec(right, x, t, y, r)?),
                    })
                }
            }
        }
        let root = rec(&self.root, x, t, y, est_rows.to_vec())?;
        Ok(CausalTree { root })
    }

    /// Structure equality ignoring leaf statistics.
    pub fn same_structure(&self, other: &CausalTree) -> bool {
        fn rec(a: &CtNode, b: &CtNode) -> bool {
            match (a, b) {
                (CtNode::Leaf { .. }, CtNode::Leaf { .. }) => true,
                (
                    CtNode::Split { feature: fa, threshold: ta, left: la, right: ra },
                    CtNode::Split { feature: fb, threshold: tb, left: lb, right: rb },
                ) => fa == fb && ta == tb && rec(la, lb) && rec(ra, rb),
                _ => false,
            }
        }
        rec(&self.root, &other.root)
    }
}
