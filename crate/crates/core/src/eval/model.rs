//! The four comparison models behind one interface, and their versioned
//! JSON form.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::ObservationTable;
use crate::distance::{Coordinate, DistanceSpec, Normalization};
use crate::error::{Error, Result};
use crate::local::{
    default_rate_grid, fit_searched, predict_query, BandwidthGrid, BandwidthStrategy, HyperSearchTrace, LocalFit,
    PredictMode, QueryPoint, RateScoring, TrainingContext,
};
use crate::tree::{fit_lsboost, BoostParams, BoostedEnsemble, Features};
use crate::wls::{fit_ols, Coefficients, DesignMatrix};

pub const MODEL_FORMAT: &str = "cwr-model";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Ols,
    Gwr,
    Cwr,
    Lsboost,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [ModelKind::Ols, ModelKind::Gwr, ModelKind::Cwr, ModelKind::Lsboost];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Ols => "ols",
            ModelKind::Gwr => "gwr",
            ModelKind::Cwr => "cwr",
            ModelKind::Lsboost => "lsboost",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.name() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::Parameter(format!("unknown model `{s}` (expected ols, gwr, cwr or lsboost)")))
    }
}

/// Hyperparameters shared by the model fits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    /// Fixed blend ratio for CWR; searched when absent.
    pub rate: Option<f64>,
    /// Fixed kernel bandwidth (in normalized distance units); chosen by
    /// leave-one-out CV when absent.
    pub bandwidth: Option<f64>,
    pub scoring: RateScoring,
    pub predict_mode: PredictMode,
    /// Columns entering the attribute distance. Defaults to the continuous
    /// regression covariates.
    pub attribute_columns: Option<Vec<String>>,
    pub boost: BoostParams,
    /// Give the boosted trees the coordinates as extra features.
    pub boost_coordinates: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            rate: None,
            bandwidth: None,
            scoring: RateScoring::LeaveOneOut,
            predict_mode: PredictMode::default(),
            attribute_columns: None,
            boost: BoostParams::default(),
            boost_coordinates: true,
        }
    }
}

impl ModelConfig {
    fn strategy(&self) -> BandwidthStrategy {
        match self.bandwidth {
            Some(h) => BandwidthStrategy::Fixed(h),
            None => BandwidthStrategy::Joint(BandwidthGrid::Auto),
        }
    }

    fn attributes_for(&self, table: &ObservationTable) -> Result<Vec<String>> {
        let cols = match &self.attribute_columns {
            Some(c) => c.clone(),
            None => table.continuous_names(),
        };
        if cols.is_empty() {
            return Err(Error::Parameter(
                "CWR needs at least one continuous covariate for the attribute distance".into(),
            ));
        }
        Ok(cols)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalModel {
    pub fit: LocalFit,
    pub predict_mode: PredictMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate_search: Option<HyperSearchTrace>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bandwidth_search: Option<HyperSearchTrace>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FittedModel {
    Ols {
        covariates: Vec<String>,
        coefficients: Coefficients,
    },
    Gwr(LocalModel),
    Cwr(LocalModel),
    Lsboost {
        covariates: Vec<String>,
        with_coordinates: bool,
        ensemble: BoostedEnsemble,
    },
}

#[derive(Serialize, Deserialize)]
struct ModelDocument {
    format: String,
    version: u32,
    model: FittedModel,
}

/// Train one model on `train` using the named regression covariates.
pub fn fit_model(kind: ModelKind, train: &ObservationTable, covariates: &[String], config: &ModelConfig) -> Result<FittedModel> {
    let table = train.select_covariates(covariates)?;
    match kind {
        ModelKind::Ols => {
            let x = DesignMatrix::from_covariate_rows(&table.covariate_rows())?;
            Ok(FittedModel::Ols {
                covariates: covariates.to_vec(),
                coefficients: fit_ols(&x, &table.response)?,
            })
        }
        ModelKind::Gwr => {
            let ctx = TrainingContext::new(&table, &DistanceSpec::geographic(Normalization::MaxScale))?;
            let (h, trace) = match config.bandwidth {
                Some(h) => (h, None),
                None => {
                    let (h, t) = ctx.select_bandwidth(1.0, &BandwidthGrid::Auto)?;
                    (h, Some(t))
                }
            };
            Ok(FittedModel::Gwr(LocalModel {
                fit: ctx.fit(1.0, h)?,
                predict_mode: config.predict_mode,
                rate_search: None,
                bandwidth_search: trace,
            }))
        }
        ModelKind::Cwr => {
            let spec = DistanceSpec::new(1.0, config.attributes_for(&table)?, Normalization::MaxScale)?;
            let ctx = TrainingContext::new(&table, &spec)?;
            let model = match config.rate {
                None => {
                    let (fit, sel) = fit_searched(&ctx, &default_rate_grid(), &config.strategy(), config.scoring)?;
                    LocalModel {
                        fit,
                        predict_mode: config.predict_mode,
                        rate_search: Some(sel.trace),
                        bandwidth_search: sel.bandwidth_trace,
                    }
                }
                Some(r) => {
                    let (h, trace) = match config.bandwidth {
                        Some(h) => (h, None),
                        None => {
                            let (h, t) = ctx.select_bandwidth(r, &BandwidthGrid::Auto)?;
                            (h, Some(t))
                        }
                    };
                    LocalModel {
                        fit: ctx.fit(r, h)?,
                        predict_mode: config.predict_mode,
                        rate_search: None,
                        bandwidth_search: trace,
                    }
                }
            };
            Ok(FittedModel::Cwr(model))
        }
        ModelKind::Lsboost => {
            let features = Features::from_table(&table, covariates, config.boost_coordinates)?;
            Ok(FittedModel::Lsboost {
                covariates: covariates.to_vec(),
                with_coordinates: config.boost_coordinates,
                ensemble: fit_lsboost(&features, &table.response, config.boost)?,
            })
        }
    }
}

impl FittedModel {
    pub fn kind(&self) -> ModelKind {
        match self {
            FittedModel::Ols { .. } => ModelKind::Ols,
            FittedModel::Gwr(_) => ModelKind::Gwr,
            FittedModel::Cwr(_) => ModelKind::Cwr,
            FittedModel::Lsboost { .. } => ModelKind::Lsboost,
        }
    }

    /// Regression covariates, in the order predictions expect them.
    pub fn covariates(&self) -> &[String] {
        match self {
            FittedModel::Ols { covariates, .. } | FittedModel::Lsboost { covariates, .. } => covariates,
            FittedModel::Gwr(m) | FittedModel::Cwr(m) => &m.fit.covariate_names,
        }
    }

    pub fn local(&self) -> Option<&LocalModel> {
        match self {
            FittedModel::Gwr(m) | FittedModel::Cwr(m) => Some(m),
            _ => None,
        }
    }

    pub fn rate(&self) -> Option<f64> {
        self.local().map(|m| m.fit.spec.rate)
    }

    pub fn bandwidth(&self) -> Option<f64> {
        self.local().map(|m| m.fit.bandwidth)
    }

    /// Predict at arbitrary locations; `rows` holds covariates in the order
    /// of [`Self::covariates`].
    pub fn predict_points(&self, coords: &[Coordinate], rows: &[Vec<f64>]) -> Result<Vec<f64>> {
        if coords.len() != rows.len() {
            return Err(Error::Dimension(format!(
                "{} coordinates but {} covariate rows",
                coords.len(),
                rows.len()
            )));
        }
        let width = self.covariates().len();
        if let Some(bad) = rows.iter().find(|r| r.len() != width) {
            return Err(Error::Dimension(format!(
                "query has {} covariates, model expects {width}",
                bad.len()
            )));
        }
        match self {
            FittedModel::Ols { coefficients, .. } => {
                Ok(rows.iter().map(|r| coefficients.predict_covariates(r)).collect())
            }
            FittedModel::Gwr(m) | FittedModel::Cwr(m) => coords
                .iter()
                .zip(rows)
                .enumerate()
                .map(|(i, (c, r))| {
                    predict_query(&m.fit, &QueryPoint::new(*c, r.clone()), m.predict_mode)
                        .map_err(|e| e.in_context(format!("query {i}")))
                })
                .collect(),
            FittedModel::Lsboost {
                with_coordinates,
                ensemble,
                ..
            } => Ok(coords
                .iter()
                .zip(rows)
                .map(|(c, r)| {
                    let mut x = r.clone();
                    if *with_coordinates {
                        x.extend([c.u, c.v]);
                    }
                    ensemble.predict(&x)
                })
                .collect()),
        }
    }

    /// Predict every record of `table`, reading covariates by name.
    pub fn predict(&self, table: &ObservationTable) -> Result<Vec<f64>> {
        let names = self.covariates();
        let rows = (0..table.len())
            .map(|i| table.values_of(names, i))
            .collect::<Result<Vec<_>>>()?;
        self.predict_points(&table.coords, &rows)
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = serde_json::json!({
            "format": MODEL_FORMAT,
            "version": MODEL_VERSION,
            "model": self,
        });
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        let format = value.get("format").and_then(|f| f.as_str());
        if format != Some(MODEL_FORMAT) {
            return Err(Error::Input(format!("not a model file (format {format:?})")));
        }
        let version = value.get("version").and_then(|v| v.as_u64());
        if version != Some(MODEL_VERSION as u64) {
            return Err(Error::Input(format!("unsupported model version {version:?}")));
        }
        let doc: ModelDocument = serde_json::from_value(value)?;
        Ok(doc.model)
    }

    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        Ok(std::fs::write(path, self.to_json()?)?)
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
