//! End-to-end comparison: optional factor selection, split, per-model
//! train and predict, RMSE table and pairwise improvements.

use std::collections::BTreeMap;
use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{improvement_pct, rmse};
use super::model::{fit_model, FittedModel, ModelConfig, ModelKind};
use crate::data::{split, ObservationTable, SplitSpec, SPLIT_ALGORITHM};
use crate::error::{Error, Result};
use crate::local::HyperSearchTrace;
use crate::tree::{fit_lsboost, predictor_importance, select_factors, BoostParams, Features, ImportanceReport};

pub const REPORT_FORMAT: &str = "cwr-comparison";
pub const REPORT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FactorSelection {
    pub top_k: usize,
    /// Candidate predictors; every covariate when absent.
    pub candidates: Option<Vec<String>>,
    pub boost: BoostParams,
}

impl Default for FactorSelection {
    fn default() -> Self {
        Self {
            top_k: 2,
            candidates: None,
            boost: BoostParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ComparisonConfig {
    pub models: Vec<ModelKind>,
    pub seed: u64,
    pub train_fraction: f64,
    /// Explicit regression covariates. Takes precedence over factor
    /// selection; every covariate is used when neither is given.
    pub covariates: Option<Vec<String>>,
    pub factor_selection: Option<FactorSelection>,
    #[serde(flatten)]
    pub model: ModelConfig,
    /// Record wall-clock fit times. Off by default so reports stay
    /// byte-identical between runs.
    pub record_timings: bool,
}

impl Default for ComparisonConfig {
    fn default() -> Self {
        Self {
            models: ModelKind::ALL.to_vec(),
            seed: 0,
            train_fraction: 0.8,
            covariates: None,
            factor_selection: None,
            model: ModelConfig::default(),
            record_timings: false,
        }
    }
}

impl ComparisonConfig {
    pub fn split_spec(&self) -> SplitSpec {
        SplitSpec {
            train_fraction: self.train_fraction,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitInfo {
    pub algorithm: String,
    pub seed: u64,
    pub train_fraction: f64,
    pub train_records: usize,
    pub test_records: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorInfo {
    pub kind: String,
    pub message: String,
}

impl From<&Error> for ErrorInfo {
    fn from(e: &Error) -> Self {
        Self {
            kind: e.kind().into(),
            message: e.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelOutcome {
    pub model: ModelKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_rmse: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train_rmse: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bandwidth: Option<f64>,
    /// Local fits that needed the ridge fallback.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub regularized_locations: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub runtime_ms: Option<f64>,
    /// Scores of every candidate ratio when the ratio was searched.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate_search: Option<HyperSearchTrace>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<ErrorInfo>,
}

impl ModelOutcome {
    pub fn is_ok(&self) -> bool {
        self.error.is_none()
    }
}

/// Percentage by which `model` improves on `baseline`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Improvement {
    pub model: ModelKind,
    pub baseline: ModelKind,
    /// Absent when the baseline RMSE is zero.
    pub percent: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordPrediction {
    pub id: String,
    pub u: f64,
    pub v: f64,
    pub actual: f64,
    pub predicted: BTreeMap<ModelKind, f64>,
    pub residual: BTreeMap<ModelKind, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub format: String,
    pub version: u32,
    pub records: usize,
    pub split: SplitInfo,
    pub covariates: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub factor_selection: Option<ImportanceReport>,
    pub models: Vec<ModelOutcome>,
    pub improvements: Vec<Improvement>,
    /// Test-set predictions and residuals of every successful model.
    pub predictions: Vec<RecordPrediction>,
}

impl ComparisonReport {
    pub fn outcome(&self, kind: ModelKind) -> Option<&ModelOutcome> {
        self.models.iter().find(|m| m.model == kind)
    }

    pub fn test_rmse(&self, kind: ModelKind) -> Option<f64> {
        self.outcome(kind).and_then(|m| m.test_rmse)
    }

    pub fn improvement(&self, model: ModelKind, baseline: ModelKind) -> Option<f64> {
        self.improvements
            .iter()
            .find(|i| i.model == model && i.baseline == baseline)
            .and_then(|i| i.percent)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// `id,u,v,actual,predicted,residual` for one model's test predictions.
    pub fn write_residual_csv<W: Write>(&self, kind: ModelKind, writer: W) -> Result<()> {
        if !self.outcome(kind).is_some_and(ModelOutcome::is_ok) {
            return Err(Error::Input(format!("no successful {kind} run in this report")));
        }
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(["id", "u", "v", "actual", "predicted", "residual"])?;
        for p in &self.predictions {
            wtr.serialize((&p.id, p.u, p.v, p.actual, p.predicted[&kind], p.residual[&kind]))?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Rank candidate predictors by boosted-tree importance on `table`.
pub fn rank_factors(table: &ObservationTable, selection: &FactorSelection) -> Result<ImportanceReport> {
    let names = selection.candidates.clone().unwrap_or_else(|| table.covariate_names());
    let features = Features::from_table(table, &names, false)?;
    let ensemble = fit_lsboost(&features, &table.response, selection.boost)?;
    Ok(predictor_importance(&ensemble))
}

struct ModelRun {
    outcome: ModelOutcome,
    predictions: Option<Vec<f64>>,
}

fn run_one(kind: ModelKind, train: &ObservationTable, test: &ObservationTable, covariates: &[String], config: &ComparisonConfig) -> ModelRun {
    let start = Instant::now();
    let result = fit_model(kind, train, covariates, &config.model).and_then(|m| {
        let on_train = m.predict(train)?;
        let on_test = m.predict(test)?;
        Ok((m, on_train, on_test))
    });
    let elapsed = start.elapsed().as_secs_f64() * 1e3;
    let runtime_ms = config.record_timings.then_some(elapsed);
    let mut outcome = ModelOutcome {
        model: kind,
        test_rmse: None,
        train_rmse: None,
        rate: None,
        bandwidth: None,
        regularized_locations: None,
        runtime_ms,
        rate_search: None,
        error: None,
    };
    let scored = result.and_then(|(m, on_train, on_test)| {
        Ok((m, rmse(&train.response, &on_train)?, rmse(&test.response, &on_test)?, on_test))
    });
    match scored {
        Ok((m, train_rmse, test_rmse, on_test)) => {
            outcome.train_rmse = Some(train_rmse);
            outcome.test_rmse = Some(test_rmse);
            outcome.rate = m.rate();
            outcome.bandwidth = m.bandwidth();
            if let FittedModel::Gwr(l) | FittedModel::Cwr(l) = &m {
                outcome.regularized_locations = Some(l.fit.regularized_count());
                outcome.rate_search = l.rate_search.clone();
            }
            ModelRun {
                outcome,
                predictions: Some(on_test),
            }
        }
        Err(e) => {
            outcome.error = Some(ErrorInfo::from(&e));
            ModelRun {
                outcome,
                predictions: None,
            }
        }
    }
}

/// Regression covariates for a run, with the importance report when factor
/// selection chose them.
pub fn resolve_covariates(table: &ObservationTable, config: &ComparisonConfig) -> Result<(Vec<String>, Option<ImportanceReport>)> {
    if let Some(c) = &config.covariates {
        if c.is_empty() {
            return Err(Error::Parameter("covariate list is empty".into()));
        }
        for name in c {
            table.column(name)?;
        }
        return Ok((c.clone(), None));
    }
    match &config.factor_selection {
        Some(sel) => {
            let report = rank_factors(table, sel)?;
            Ok((select_factors(&report, sel.top_k)?, Some(report)))
        }
        None => Ok((table.covariate_names(), None)),
    }
}

/// Full comparison on one dataset. Model failures are recorded in the
/// report; only configuration, selection and split problems are errors.
pub fn run_comparison(table: &ObservationTable, config: &ComparisonConfig) -> Result<ComparisonReport> {
    if config.models.is_empty() {
        return Err(Error::Parameter("no models requested".into()));
    }
    let mut models = config.models.clone();
    models.sort();
    models.dedup();
    let (covariates, importance) = resolve_covariates(table, config)?;
    let (train, test) = split(table, &config.split_spec())?;

    let runs: Vec<ModelRun> = models
        .par_iter()
        .map(|&k| run_one(k, &train, &test, &covariates, config))
        .collect();

    let mut improvements = Vec::new();
    for a in &runs {
        for b in &runs {
            if a.outcome.model == b.outcome.model {
                continue;
            }
            if let (Some(ra), Some(rb)) = (a.outcome.test_rmse, b.outcome.test_rmse) {
                improvements.push(Improvement {
                    model: a.outcome.model,
                    baseline: b.outcome.model,
                    percent: improvement_pct(rb, ra).ok(),
                });
            }
        }
    }

    let predictions = (0..test.len())
        .map(|i| {
            let mut predicted = BTreeMap::new();
            let mut residual = BTreeMap::new();
            for run in &runs {
                if let Some(p) = &run.predictions {
                    predicted.insert(run.outcome.model, p[i]);
                    residual.insert(run.outcome.model, test.response[i] - p[i]);
                }
            }
            RecordPrediction {
                id: test.ids[i].clone(),
                u: test.coords[i].u,
                v: test.coords[i].v,
                actual: test.response[i],
                predicted,
                residual,
            }
        })
        .collect();

    Ok(ComparisonReport {
        format: REPORT_FORMAT.into(),
        version: REPORT_VERSION,
        records: table.len(),
        split: SplitInfo {
            algorithm: SPLIT_ALGORITHM.into(),
            seed: config.seed,
            train_fraction: config.train_fraction,
            train_records: train.len(),
            test_records: test.len(),
        },
        covariates,
        factor_selection: importance,
        models: runs.into_iter().map(|r| r.outcome).collect(),
        improvements,
        predictions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_synthetic, Regime, SyntheticConfig};

    fn data(n: usize) -> ObservationTable {
        let mut cfg = SyntheticConfig::new(Regime::Geo, n, 50.0, 3);
        cfg.poi_count = 2;
        generate_synthetic(&cfg).unwrap().table
    }

    fn quick() -> ComparisonConfig {
        ComparisonConfig {
            covariates: Some(vec!["floor_area".into(), "house_age".into()]),
            model: ModelConfig {
                rate: Some(0.7),
                bandwidth: Some(0.2),
                boost: BoostParams {
                    stages: 20,
                    ..BoostParams::default()
                },
                ..ModelConfig::default()
            },
            ..ComparisonConfig::default()
        }
    }

    #[test]
    fn improvements_recompute_from_rmse() {
        let r = run_comparison(&data(80), &quick()).unwrap();
        assert_eq!(r.models.len(), 4);
        assert_eq!(r.improvements.len(), 12);
        for imp in &r.improvements {
            let a = r.test_rmse(imp.model).unwrap();
            let b = r.test_rmse(imp.baseline).unwrap();
            assert_eq!(imp.percent.unwrap(), (b - a) / b * 100.0);
        }
    }

    #[test]
    fn residuals_link_to_predictions() {
        let r = run_comparison(&data(80), &quick()).unwrap();
        assert_eq!(r.predictions.len(), r.split.test_records);
        for p in &r.predictions {
            for (k, pred) in &p.predicted {
                assert_eq!(p.actual - pred, p.residual[k]);
            }
        }
    }

    #[test]
    fn failing_model_is_isolated() {
        let t = data(80);
        let mut cfg = quick();
        let clean = run_comparison(&t, &cfg).unwrap();
        // Only the local models read the bandwidth.
        cfg.model.bandwidth = Some(-1.0);
        let r = run_comparison(&t, &cfg).unwrap();
        assert!(r.outcome(ModelKind::Ols).unwrap().is_ok());
        assert_eq!(r.test_rmse(ModelKind::Ols), clean.test_rmse(ModelKind::Ols));
        assert_eq!(r.test_rmse(ModelKind::Lsboost), clean.test_rmse(ModelKind::Lsboost));
        assert!(!r.outcome(ModelKind::Gwr).unwrap().is_ok());
        assert!(r.improvements.iter().all(|i| i.model != ModelKind::Gwr && i.baseline != ModelKind::Gwr));
    }

    #[test]
    fn factor_selection_feeds_covariates() {
        let t = data(80);
        let cfg = ComparisonConfig {
            covariates: None,
            factor_selection: Some(FactorSelection::default()),
            models: vec![ModelKind::Ols],
            ..quick()
        };
        let r = run_comparison(&t, &cfg).unwrap();
        let imp = r.factor_selection.as_ref().unwrap();
        assert_eq!(r.covariates, imp.ranked_names()[..2].to_vec());
    }

    #[test]
    fn residual_csv_rows() {
        let r = run_comparison(&data(60), &quick()).unwrap();
        let mut buf = Vec::new();
        r.write_residual_csv(ModelKind::Cwr, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("id,u,v,actual,predicted,residual\n"));
        assert_eq!(text.lines().count(), r.split.test_records + 1);
    }
}
