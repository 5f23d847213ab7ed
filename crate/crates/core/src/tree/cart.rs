//! Greedy least-squares regression trees.

use serde::{Deserialize, Serialize};

use crate::data::ObservationTable;
use crate::error::{Error, Result};

/// Named predictor columns of equal length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Features {
    pub names: Vec<String>,
    pub columns: Vec<Vec<f64>>,
}

impl Features {
    pub fn new(names: Vec<String>, columns: Vec<Vec<f64>>) -> Result<Self> {
        if names.len() != columns.len() {
            return Err(Error::Dimension(format!(
                "{} names for {} columns",
                names.len(),
                columns.len()
            )));
        }
        let n = columns.first().map_or(0, Vec::len);
        if columns.iter().any(|c| c.len() != n) {
            return Err(Error::Dimension("feature columns differ in length".into()));
        }
        if columns.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("feature matrix".into()));
        }
        Ok(Self { names, columns })
    }

    /// The named covariates of `table`, optionally followed by the `u` and
    /// `v` coordinates.
    pub fn from_table(table: &ObservationTable, names: &[String], with_coordinates: bool) -> Result<Self> {
        let mut out_names = names.to_vec();
        let mut columns = names
            .iter()
            .map(|n| table.column(n).map(<[f64]>::to_vec))
            .collect::<Result<Vec<_>>>()?;
        if with_coordinates {
            out_names.extend(["u".to_owned(), "v".to_owned()]);
            columns.push(table.coords.iter().map(|c| c.u).collect());
            columns.push(table.coords.iter().map(|c| c.v).collect());
        }
        Self::new(out_names, columns)
    }

    pub fn nrows(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    pub fn ncols(&self) -> usize {
        self.columns.len()
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.columns.iter().map(|c| c[i]).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_leaf: usize,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self {
            max_depth: 3,
            min_leaf: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "kebab-case")]
pub enum TreeNode {
    Leaf {
        value: f64,
        samples: usize,
    },
    Split {
        feature: usize,
        /// Records with `x <= threshold` go left.
        threshold: f64,
        /// Drop in squared error achieved by this split.
        reduction: f64,
        /// Mean response at the node.
        value: f64,
        samples: usize,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
}

impl TreeNode {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut node = self;
        loop {
            match node {
                TreeNode::Leaf { value, .. } => return *value,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => node = if x[*feature] <= *threshold { left } else { right },
            }
        }
    }

    pub fn predict_features(&self, f: &Features) -> Vec<f64> {
        (0..f.nrows()).map(|i| self.predict(&f.row(i))).collect()
    }

    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    pub fn leaves(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 1,
            TreeNode::Split { left, right, .. } => left.leaves() + right.leaves(),
        }
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self, TreeNode::Leaf { .. })
    }

    /// Add each split's reduction to `acc[feature]`.
    pub fn accumulate_reductions(&self, acc: &mut [f64]) {
        if let TreeNode::Split {
            feature,
            reduction,
            left,
            right,
            ..
        } = self
        {
            acc[*feature] += reduction;
            left.accumulate_reductions(acc);
            right.accumulate_reductions(acc);
        }
    }

    pub fn total_reduction(&self) -> f64 {
        match self {
            TreeNode::Leaf { .. } => 0.0,
            TreeNode::Split {
                reduction, left, right, ..
            } => reduction + left.total_reduction() + right.total_reduction(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct BestSplit {
    feature: usize,
    threshold: f64,
    reduction: f64,
    /// Records in the left child.
    left: usize,
}

pub fn fit_tree(features: &Features, y: &[f64], params: TreeParams) -> Result<TreeNode> {
    let n = y.len();
    if features.nrows() != n {
        return Err(Error::Dimension(format!(
            "{} feature rows for {n} responses",
            features.nrows()
        )));
    }
    if params.min_leaf == 0 {
        return Err(Error::Parameter("min_leaf must be at least 1".into()));
    }
    if n < 2 * params.min_leaf {
        return Err(Error::Parameter(format!(
            "need at least {} records for min_leaf {}, got {n}",
            2 * params.min_leaf,
            params.min_leaf
        )));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("response".into()));
    }
    let idx: Vec<usize> = (0..n).collect();
    Ok(grow(features, y, idx, params, 0))
}

fn mean_of(y: &[f64], idx: &[usize]) -> f64 {
    idx.iter().map(|&i| y[i]).sum::<f64>() / idx.len() as f64
}

fn grow(f: &Features, y: &[f64], idx: Vec<usize>, params: TreeParams, depth: usize) -> TreeNode {
    let value = mean_of(y, &idx);
    let samples = idx.len();
    if depth >= params.max_depth || samples < 2 * params.min_leaf {
        return TreeNode::Leaf { value, samples };
    }
    let Some(best) = best_split(f, y, &idx, value, params.min_leaf) else {
        return TreeNode::Leaf { value, samples };
    };
    let col = &f.columns[best.feature];
    let (left, right): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| col[i] <= best.threshold);
    debug_assert_eq!(left.len(), best.left);
    TreeNode::Split {
        feature: best.feature,
        threshold: best.threshold,
        reduction: best.reduction,
        value,
        samples,
        left: Box::new(grow(f, y, left, params, depth + 1)),
        right: Box::new(grow(f, y, right, params, depth + 1)),
    }
}

/// Exhaustive search over features and midpoints between consecutive
/// distinct values. With centered responses the reduction of a split is
/// `S_L^2 (1/n_L + 1/n_R)`, where `S_L` sums the left child's centered values.
/// Ties keep the first feature, then the lowest threshold.
fn best_split(f: &Features, y: &[f64], idx: &[usize], mean: f64, min_leaf: usize) -> Option<BestSplit> {
    let n = idx.len();
    let mut best: Option<BestSplit> = None;
    let mut order = idx.to_vec();
    for (feature, col) in f.columns.iter().enumerate() {
        order.sort_by(|&a, &b| col[a].total_cmp(&col[b]).then(a.cmp(&b)));
        let mut sum_left = 0.0;
        for k in 1..n {
            sum_left += y[order[k - 1]] - mean;
            let (lo, hi) = (col[order[k - 1]], col[order[k]]);
            if k < min_leaf || n - k < min_leaf || lo == hi {
                continue;
            }
            let reduction = sum_left * sum_left * (1.0 / k as f64 + 1.0 / (n - k) as f64);
            if reduction > best.map_or(0.0, |b| b.reduction) {
                best = Some(BestSplit {
                    feature,
                    threshold: lo + 0.5 * (hi - lo),
                    reduction,
                    left: k,
                });
            }
        }
    }
    best
}
