//! Least-squares boosting of regression trees.

use serde::{Deserialize, Serialize};

use super::cart::{fit_tree, Features, TreeNode, TreeParams};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoostParams {
    pub stages: usize,
    pub shrinkage: f64,
    pub max_depth: usize,
    pub min_leaf: usize,
}

impl Default for BoostParams {
    fn default() -> Self {
        Self {
            stages: 100,
            shrinkage: 0.1,
            max_depth: 3,
            min_leaf: 5,
        }
    }
}

impl BoostParams {
    fn tree(&self) -> TreeParams {
        TreeParams {
            max_depth: self.max_depth,
            min_leaf: self.min_leaf,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostStage {
    pub tree: TreeNode,
    /// `SSE(r) - SSE(r - tree(x))` on the residuals this tree was fit to.
    pub sse_reduction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostedEnsemble {
    pub feature_names: Vec<String>,
    pub initial: f64,
    pub params: BoostParams,
    pub stages: Vec<BoostStage>,
    /// Training MSE of the initial constant followed by one entry per stage.
    pub train_mse: Vec<f64>,
}

impl BoostedEnsemble {
    /// `F_0 + sum_m nu * tree_m(x)`.
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.stages
            .iter()
            .fold(self.initial, |acc, s| acc + self.params.shrinkage * s.tree.predict(x))
    }

    pub fn predict_features(&self, f: &Features) -> Result<Vec<f64>> {
        if f.names != self.feature_names {
            return Err(Error::Dimension(format!(
                "ensemble expects features {:?}, got {:?}",
                self.feature_names, f.names
            )));
        }
        Ok((0..f.nrows()).map(|i| self.predict(&f.row(i))).collect())
    }
}

fn mse(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum::<f64>() / r.len() as f64
}

/// Each stage fits a tree to the current residuals and adds `nu` times its
/// output. A stage whose update would not lower the training loss (only
/// possible through rounding once residuals are essentially zero) is stored
/// as a zero leaf, so the loss sequence never increases.
pub fn fit_lsboost(features: &Features, y: &[f64], params: BoostParams) -> Result<BoostedEnsemble> {
    if params.stages == 0 {
        return Err(Error::Parameter("at least one boosting stage is required".into()));
    }
    if !(params.shrinkage > 0.0 && params.shrinkage <= 1.0) {
        return Err(Error::Parameter(format!(
            "shrinkage must lie in (0, 1], got {}",
            params.shrinkage
        )));
    }
    if y.is_empty() {
        return Err(Error::Input("no training records".into()));
    }
    let n = y.len();
    let initial = y.iter().sum::<f64>() / n as f64;
    let mut fitted = vec![initial; n];
    let mut residual: Vec<f64> = y.iter().map(|v| v - initial).collect();
    let mut train_mse = vec![mse(&residual)];
    let mut stages = Vec::with_capacity(params.stages);
    let mut next_fitted = vec![0.0; n];
    let mut next_residual = vec![0.0; n];

    for _ in 0..params.stages {
        let tree = fit_tree(features, &residual, params.tree())?;
        let out = tree.predict_features(features);
        for i in 0..n {
            next_fitted[i] = fitted[i] + params.shrinkage * out[i];
            next_residual[i] = y[i] - next_fitted[i];
        }
        let next_mse = mse(&next_residual);
        let current = *train_mse.last().expect("initial entry");
        if next_mse <= current {
            let sse_reduction = residual
                .iter()
                .zip(&out)
                .map(|(r, t)| r * r - (r - t) * (r - t))
                .sum();
            stages.push(BoostStage { tree, sse_reduction });
            std::mem::swap(&mut fitted, &mut next_fitted);
            std::mem::swap(&mut residual, &mut next_residual);
            train_mse.push(next_mse);
        } else {
            stages.push(BoostStage {
                tree: TreeNode::Leaf { value: 0.0, samples: n },
                sse_reduction: 0.0,
            });
            train_mse.push(current);
        }
    }
    Ok(BoostedEnsemble {
        feature_names: features.names.clone(),
        initial,
        params,
        stages,
        train_mse,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn feats(cols: Vec<Vec<f64>>) -> Features {
        let names = (0..cols.len()).map(|i| format!("x{i}")).collect();
        Features::new(names, cols).unwrap()
    }

    #[test]
    fn one_full_step_on_separable_data() {
        let f = feats(vec![vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0]]);
        let y = [5.0, 5.0, 1.0, 1.0, 9.0, 9.0, 3.0, 3.0];
        let p = BoostParams {
            stages: 1,
            shrinkage: 1.0,
            max_depth: 3,
            min_leaf: 1,
        };
        let e = fit_lsboost(&f, &y, p).unwrap();
        assert_eq!(*e.train_mse.last().unwrap(), 0.0);
    }

    #[test]
    fn constant_response_stays_constant() {
        let f = feats(vec![(0..12).map(f64::from).collect()]);
        let y = [0.1; 12];
        let e = fit_lsboost(&f, &y, BoostParams::default()).unwrap();
        for s in &e.stages {
            assert!(s.tree.is_leaf());
        }
        for i in 0..12 {
            assert!((e.predict(&[i as f64]) - 0.1).abs() < 1e-15);
        }
    }

    /// Hand simulation of the recursion: F <- F + nu * T(y - F), where each
    /// depth-1 stump is found by scanning every midpoint of the single feature.
    #[test]
    fn ten_stages_match_hand_simulation() {
        let x: Vec<f64> = (0..16).map(|i| i as f64 * 0.5).collect();
        let y: Vec<f64> = x.iter().map(|v| (v * 1.3).sin() * 4.0 + v).collect();
        let f = feats(vec![x.clone()]);
        let p = BoostParams {
            stages: 10,
            shrinkage: 0.1,
            max_depth: 1,
            min_leaf: 2,
        };
        let e = fit_lsboost(&f, &y, p).unwrap();

        let n = y.len();
        let mut fcur = vec![y.iter().sum::<f64>() / n as f64; n];
        let mut want = vec![y.iter().zip(&fcur).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / n as f64];
        for _ in 0..10 {
            let r: Vec<f64> = y.iter().zip(&fcur).map(|(a, b)| a - b).collect();
            let mut best = (f64::NEG_INFINITY, 0usize);
            for k in 2..=n - 2 {
                let lm = r[..k].iter().sum::<f64>() / k as f64;
                let rm = r[k..].iter().sum::<f64>() / (n - k) as f64;
                let sse: f64 = r[..k].iter().map(|v| (v - lm).powi(2)).sum::<f64>()
                    + r[k..].iter().map(|v| (v - rm).powi(2)).sum::<f64>();
                if -sse > best.0 + 1e-12 {
                    best = (-sse, k);
                }
            }
            let k = best.1;
            let lm = r[..k].iter().sum::<f64>() / k as f64;
            let rm = r[k..].iter().sum::<f64>() / (n - k) as f64;
            for i in 0..n {
                fcur[i] += 0.1 * if i < k { lm } else { rm };
            }
            want.push(y.iter().zip(&fcur).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / n as f64);
        }
        assert_eq!(e.train_mse.len(), 11);
        for (got, w) in e.train_mse.iter().zip(&want) {
            assert!((got - w).abs() <= 1e-10 * w.max(1.0), "{got} vs {w}");
        }
    }

    #[test]
    fn parameter_checks() {
        let f = feats(vec![(0..10).map(f64::from).collect()]);
        let y = [1.0; 10];
        let bad = |p: BoostParams| fit_lsboost(&f, &y, p).unwrap_err().kind();
        assert_eq!(bad(BoostParams { stages: 0, ..Default::default() }), "parameter");
        assert_eq!(bad(BoostParams { shrinkage: 0.0, ..Default::default() }), "parameter");
        assert_eq!(bad(BoostParams { shrinkage: 1.5, ..Default::default() }), "parameter");
    }

    #[test]
    fn stage_reductions_sum_to_split_reductions() {
        let x1: Vec<f64> = (0..40).map(|i| ((i * 7919) % 97) as f64).collect();
        let x2: Vec<f64> = (0..40).map(|i| ((i * 104_729) % 89) as f64).collect();
        let y: Vec<f64> = x1.iter().zip(&x2).map(|(a, b)| a * 0.5 + (b * 0.1).sin() * 10.0).collect();
        let e = fit_lsboost(&feats(vec![x1, x2]), &y, BoostParams { stages: 20, ..Default::default() }).unwrap();
        for s in &e.stages {
            let split_sum = s.tree.total_reduction();
            assert!((split_sum - s.sse_reduction).abs() <= 1e-8 * s.sse_reduction.abs().max(1e-300));
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn training_loss_never_increases(
            rows in prop::collection::vec((-50.0..50.0f64, -5.0..5.0f64, -100.0..100.0f64), 10..60),
            nu in 0.01..1.0f64,
        ) {
            let f = feats(vec![rows.iter().map(|r| r.0).collect(), rows.iter().map(|r| r.1).collect()]);
            let y: Vec<f64> = rows.iter().map(|r| r.2).collect();
            let e = fit_lsboost(&f, &y, BoostParams { stages: 30, shrinkage: nu, max_depth: 3, min_leaf: 2 }).unwrap();
            for w in e.train_mse.windows(2) {
                prop_assert!(w[1] <= w[0]);
            }
        }
    }
}
