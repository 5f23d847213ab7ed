//! Python module `cwr`: tables, model fitting and the comparison harness.

use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;

use cwr_core::data::{generate_synthetic, load_csv, split, ObservationTable, Regime, Schema, SplitSpec, SyntheticConfig};
use cwr_core::distance::Coordinate;
use cwr_core::eval::{self, ComparisonConfig, FactorSelection, FittedModel, ModelConfig, ModelKind};

create_exception!(cwr, CwrError, PyException);

fn err(e: cwr_core::Error) -> PyErr {
    CwrError::new_err(format!("{}: {e}", e.kind()))
}

fn json_err(e: serde_json::Error) -> PyErr {
    CwrError::new_err(format!("json: {e}"))
}

/// Records with coordinates, response and covariates.
#[pyclass(name = "Table", module = "cwr")]
struct PyTable {
    inner: ObservationTable,
}

#[pymethods]
impl PyTable {
    /// Load a CSV file described by a schema JSON file.
    #[staticmethod]
    fn load(data: &str, schema: &str) -> PyResult<Self> {
        let schema = Schema::load(schema).map_err(err)?;
        let (inner, _) = load_csv(data, &schema).map_err(err)?;
        Ok(Self { inner })
    }

    /// Generate a synthetic dataset (`geo`, `attr` or `mixed`).
    #[staticmethod]
    #[pyo3(signature = (regime, n, sigma, seed, poi_count=10, land_use=true))]
    fn synthetic(regime: &str, n: usize, sigma: f64, seed: u64, poi_count: usize, land_use: bool) -> PyResult<Self> {
        let regime: Regime = regime.parse().map_err(err)?;
        let mut cfg = SyntheticConfig::new(regime, n, sigma, seed);
        cfg.poi_count = poi_count;
        cfg.land_use = land_use;
        Ok(Self {
            inner: generate_synthetic(&cfg).map_err(err)?.table,
        })
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    #[getter]
    fn ids(&self) -> Vec<String> {
        self.inner.ids.clone()
    }

    #[getter]
    fn response(&self) -> Vec<f64> {
        self.inner.response.clone()
    }

    #[getter]
    fn coordinates(&self) -> Vec<(f64, f64)> {
        self.inner.coords.iter().map(|c| (c.u, c.v)).collect()
    }

    #[getter]
    fn covariate_names(&self) -> Vec<String> {
        self.inner.covariate_names()
    }

    fn column(&self, name: &str) -> PyResult<Vec<f64>> {
        self.inner.column(name).map(<[f64]>::to_vec).map_err(err)
    }

    /// Keep only the named covariates.
    fn select(&self, covariates: Vec<String>) -> PyResult<Self> {
        Ok(Self {
            inner: self.inner.select_covariates(&covariates).map_err(err)?,
        })
    }

    /// Seeded train/test partition.
    #[pyo3(signature = (seed=0, train_fraction=0.8))]
    fn split(&self, seed: u64, train_fraction: f64) -> PyResult<(Self, Self)> {
        let (a, b) = split(&self.inner, &SplitSpec { train_fraction, seed }).map_err(err)?;
        Ok((Self { inner: a }, Self { inner: b }))
    }

    fn __repr__(&self) -> String {
        format!("Table(records={}, covariates={:?})", self.inner.len(), self.inner.covariate_names())
    }
}

/// A fitted OLS, GWR, CWR or LSBoost model.
#[pyclass(name = "Model", module = "cwr")]
struct PyModel {
    inner: FittedModel,
}

#[pymethods]
impl PyModel {
    /// Fit `kind` on `table`. `config` is a JSON object with the model
    /// settings (rate, bandwidth, scoring, predict_mode, ...).
    #[staticmethod]
    #[pyo3(signature = (kind, table, covariates, config=None))]
    fn fit(kind: &str, table: &PyTable, covariates: Vec<String>, config: Option<&str>) -> PyResult<Self> {
        let kind: ModelKind = kind.parse().map_err(err)?;
        let cfg: ModelConfig = match config {
            Some(text) => serde_json::from_str(text).map_err(json_err)?,
            None => ModelConfig::default(),
        };
        Ok(Self {
            inner: eval::fit_model(kind, &table.inner, &covariates, &cfg).map_err(err)?,
        })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: FittedModel::from_json(text).map_err(err)?,
        })
    }

    fn to_json(&self) -> PyResult<String> {
        self.inner.to_json().map_err(err)
    }

    fn predict(&self, table: &PyTable) -> PyResult<Vec<f64>> {
        self.inner.predict(&table.inner).map_err(err)
    }

    /// Predict at `(u, v)` locations with covariate rows in model order.
    fn predict_points(&self, coordinates: Vec<(f64, f64)>, rows: Vec<Vec<f64>>) -> PyResult<Vec<f64>> {
        let coords: Vec<Coordinate> = coordinates.into_iter().map(|(u, v)| Coordinate::new(u, v)).collect();
        self.inner.predict_points(&coords, &rows).map_err(err)
    }

    #[getter]
    fn kind(&self) -> &'static str {
        self.inner.kind().name()
    }

    #[getter]
    fn covariates(&self) -> Vec<String> {
        self.inner.covariates().to_vec()
    }

    #[getter]
    fn rate(&self) -> Option<f64> {
        self.inner.rate()
    }

    #[getter]
    fn bandwidth(&self) -> Option<f64> {
        self.inner.bandwidth()
    }

    fn __repr__(&self) -> String {
        format!("Model(kind={}, covariates={:?})", self.inner.kind(), self.inner.covariates())
    }
}

/// Run the model comparison; returns the report as JSON text.
#[pyfunction]
#[pyo3(signature = (table, config=None))]
fn compare(table: &PyTable, config: Option<&str>) -> PyResult<String> {
    let cfg: ComparisonConfig = match config {
        Some(text) => serde_json::from_str(text).map_err(json_err)?,
        None => ComparisonConfig::default(),
    };
    eval::run_comparison(&table.inner, &cfg).map_err(err)?.to_json().map_err(err)
}

/// Boosted-tree importance of the candidate predictors as JSON text.
#[pyfunction]
#[pyo3(signature = (table, candidates=None))]
fn importance(table: &PyTable, candidates: Option<Vec<String>>) -> PyResult<String> {
    let sel = FactorSelection {
        candidates,
        ..FactorSelection::default()
    };
    let report = eval::rank_factors(&table.inner, &sel).map_err(err)?;
    serde_json::to_string_pretty(&report).map_err(json_err)
}

#[pyfunction]
fn rmse(actual: Vec<f64>, predicted: Vec<f64>) -> PyResult<f64> {
    eval::rmse(&actual, &predicted).map_err(err)
}

#[pyfunction]
fn improvement_pct(baseline_rmse: f64, model_rmse: f64) -> PyResult<f64> {
    eval::improvement_pct(baseline_rmse, model_rmse).map_err(err)
}

#[pyfunction]
fn gaussian_kernel(distance: f64, bandwidth: f64) -> f64 {
    cwr_core::distance::gaussian_kernel(distance, bandwidth)
}

#[pymodule]
fn cwr(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("CwrError", m.py().get_type::<CwrError>())?;
    m.add_class::<PyTable>()?;
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(compare, m)?)?;
    m.add_function(wrap_pyfunction!(importance, m)?)?;
    m.add_function(wrap_pyfunction!(rmse, m)?)?;
    m.add_function(wrap_pyfunction!(improvement_pct, m)?)?;
    m.add_function(wrap_pyfunction!(gaussian_kernel, m)?)?;
    Ok(())
}
