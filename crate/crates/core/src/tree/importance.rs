use std::io::Write;

use serde::{Deserialize, Serialize};

use super::boost::BoostedEnsemble;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceEntry {
    pub predictor: String,
    pub raw_reduction: f64,
    pub normalized: f64,
    /// 1 is most important.
    pub rank: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ImportanceStatus {
    Ok,
    /// No tree in the ensemble split, so every score is zero.
    Uninformative,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceReport {
    pub status: ImportanceStatus,
    pub total_reduction: f64,
    /// Sorted by rank.
    pub entries: Vec<ImportanceEntry>,
}

impl ImportanceReport {
    /// Rank predictors by summed reduction, highest first; equal scores keep
    /// predictor order.
    pub fn from_reductions(names: &[String], raw: &[f64]) -> Self {
        let total: f64 = raw.iter().sum();
        let informative = total > 0.0;
        let mut order: Vec<usize> = (0..names.len()).collect();
        order.sort_by(|&a, &b| raw[b].total_cmp(&raw[a]));
        let entries = order
            .iter()
            .enumerate()
            .map(|(k, &j)| ImportanceEntry {
                predictor: names[j].clone(),
                raw_reduction: raw[j],
                normalized: if informative { raw[j] / total } else { 0.0 },
                rank: k + 1,
            })
            .collect();
        Self {
            status: if informative {
                ImportanceStatus::Ok
            } else {
                ImportanceStatus::Uninformative
            },
            total_reduction: total,
            entries,
        }
    }

    pub fn ranked_names(&self) -> Vec<String> {
        self.entries.iter().map(|e| e.predictor.clone()).collect()
    }

    pub fn get(&self, predictor: &str) -> Option<&ImportanceEntry> {
        self.entries.iter().find(|e| e.predictor == predictor)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(["predictor", "raw_reduction", "normalized", "rank"])?;
        for e in &self.entries {
            wtr.write_record([
                e.predictor.clone(),
                e.raw_reduction.to_string(),
                e.normalized.to_string(),
                e.rank.to_string(),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Per-predictor squared-error reduction summed over every split of every
/// tree in the ensemble.
pub fn predictor_importance(ensemble: &BoostedEnsemble) -> ImportanceReport {
    let mut raw = vec![0.0; ensemble.feature_names.len()];
    for stage in &ensemble.stages {
        stage.tree.accumulate_reductions(&mut raw);
    }
    ImportanceReport::from_reductions(&ensemble.feature_names, &raw)
}

/// Names of the `top_k` most important predictors.
pub fn select_factors(report: &ImportanceReport, top_k: usize) -> Result<Vec<String>> {
    if top_k == 0 || top_k > report.entries.len() {
        return Err(Error::Parameter(format!(
            "top_k must lie in 1..={}, got {top_k}",
            report.entries.len()
        )));
    }
    Ok(report.entries[..top_k].iter().map(|e| e.predictor.clone()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::boost::{fit_lsboost, BoostParams};
    use crate::tree::cart::Features;

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("x{i}")).collect()
    }

    #[test]
    fn single_stump_gets_all_importance() {
        let f = Features::new(names(2), vec![vec![1.0, 2.0, 3.0, 4.0], vec![2.0, 2.0, 2.0, 2.0]]).unwrap();
        let e = fit_lsboost(&f, &[0.0, 0.0, 1.0, 1.0], BoostParams { stages: 1, shrinkage: 1.0, max_depth: 1, min_leaf: 1 }).unwrap();
        let r = predictor_importance(&e);
        assert_eq!(r.status, ImportanceStatus::Ok);
        assert_eq!(r.entries[0].predictor, "x0");
        assert_eq!(r.entries[0].normalized, 1.0);
        assert_eq!(r.entries[1].normalized, 0.0);
        assert_eq!(select_factors(&r, 1).unwrap(), vec!["x0"]);
        assert_eq!(select_factors(&r, 2).unwrap(), vec!["x0", "x1"]);
        assert_eq!(select_factors(&r, 3).unwrap_err().kind(), "parameter");
        assert_eq!(select_factors(&r, 0).unwrap_err().kind(), "parameter");
    }

    #[test]
    fn no_splits_is_uninformative() {
        let f = Features::new(names(1), vec![vec![1.0, 2.0, 3.0, 4.0]]).unwrap();
        let e = fit_lsboost(&f, &[3.0; 4], BoostParams { stages: 3, shrinkage: 0.5, max_depth: 2, min_leaf: 1 }).unwrap();
        let r = predictor_importance(&e);
        assert_eq!(r.status, ImportanceStatus::Uninformative);
        assert!(r.entries.iter().all(|e| e.normalized == 0.0 && e.raw_reduction == 0.0));
    }

    #[test]
    fn stable_ranking_and_csv() {
        let r = ImportanceReport::from_reductions(&names(4), &[1.0, 3.0, 1.0, 0.0]);
        let order: Vec<_> = r.entries.iter().map(|e| (e.predictor.as_str(), e.rank)).collect();
        assert_eq!(order, vec![("x1", 1), ("x0", 2), ("x2", 3), ("x3", 4)]);
        let total: f64 = r.entries.iter().map(|e| e.normalized).sum();
        assert!((total - 1.0).abs() < 1e-15);
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next().unwrap(), "predictor,raw_reduction,normalized,rank");
        assert_eq!(text.lines().nth(1).unwrap(), "x1,3,0.6,1");
    }
}
