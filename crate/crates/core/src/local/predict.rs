use serde::{Deserialize, Serialize};

use super::fit::LocalFit;
use crate::data::ObservationTable;
use crate::distance::{blend, check_bandwidth, euclidean, gaussian_kernel, Coordinate};
use crate::error::{Error, Result};
use crate::wls::{solve_wls_with_fallback, Coefficients, DesignMatrix};

pub const DEFAULT_NEIGHBORS: usize = 3;

/// How a local model predicts at a location that is not a training record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum PredictMode {
    /// Average the stored coefficients of the `k` nearest training records
    /// under the blended distance and apply them to the query covariates.
    KnnCoef { k: usize },
    /// Solve a fresh weighted fit centered on the query.
    LocalFit,
}

impl Default for PredictMode {
    fn default() -> Self {
        PredictMode::KnnCoef {
            k: DEFAULT_NEIGHBORS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryPoint {
    pub coord: Coordinate,
    /// Covariates in the order of the fit's covariate names.
    pub covariates: Vec<f64>,
}

impl QueryPoint {
    pub fn new(coord: Coordinate, covariates: Vec<f64>) -> Self {
        Self { coord, covariates }
    }
}

fn check_query(fit: &LocalFit, q: &QueryPoint) -> Result<()> {
    if q.covariates.len() != fit.covariate_names.len() {
        return Err(Error::Dimension(format!(
            "query has {} covariates, model expects {}",
            q.covariates.len(),
            fit.covariate_names.len()
        )));
    }
    if !q.coord.is_finite() || q.covariates.iter().any(|x| !x.is_finite()) {
        return Err(Error::Input("query values must be finite".into()));
    }
    Ok(())
}

/// Normalized blended distance from the query to every training record.
pub fn query_distances(fit: &LocalFit, q: &QueryPoint) -> Result<Vec<f64>> {
    check_query(fit, q)?;
    let raw: Vec<f64> = fit.attribute_positions().iter().map(|&k| q.covariates[k]).collect();
    let z = fit.transform.apply_values(&raw)?;
    let rate = fit.spec.rate;
    Ok(fit
        .training
        .coords
        .iter()
        .zip(&fit.training.attributes)
        .map(|(c, a)| {
            let g = q.coord.distance(c) / fit.scales.geographic;
            let d = if rate == 1.0 {
                0.0
            } else {
                euclidean(&z, a) / fit.scales.attribute
            };
            blend(rate, g, d)
        })
        .collect())
}

/// Indices of the `k` nearest training records; ties go to the lower index.
pub fn nearest_neighbors(fit: &LocalFit, q: &QueryPoint, k: usize) -> Result<Vec<usize>> {
    if k == 0 || k > fit.len() {
        return Err(Error::Parameter(format!(
            "neighbor count must lie in 1..={}, got {k}",
            fit.len()
        )));
    }
    let d = query_distances(fit, q)?;
    let mut order: Vec<usize> = (0..d.len()).collect();
    order.sort_by(|&a, &b| d[a].total_cmp(&d[b]).then(a.cmp(&b)));
    order.truncate(k);
    Ok(order)
}

pub fn predict_query(fit: &LocalFit, q: &QueryPoint, mode: PredictMode) -> Result<f64> {
    match mode {
        PredictMode::KnnCoef { k } => {
            let idx = nearest_neighbors(fit, q, k)?;
            let beta = Coefficients::mean(idx.iter().map(|&i| &fit.coefficients[i]))
                .expect("at least one neighbor");
            Ok(beta.predict_covariates(&q.covariates))
        }
        PredictMode::LocalFit => {
            check_bandwidth(fit.bandwidth)?;
            let d = query_distances(fit, q)?;
            let w: Vec<f64> = d.iter().map(|x| gaussian_kernel(*x, fit.bandwidth)).collect();
            let x = DesignMatrix::from_covariate_rows(&fit.training.covariates)?;
            let sol = solve_wls_with_fallback(&x, &fit.training.response, &w)
                .map_err(|e| e.in_context("local fit at query"))?;
            Ok(sol.beta.predict_covariates(&q.covariates))
        }
    }
}

/// Predict every record of `table`, reading the fit's covariates by name.
pub fn predict_table(fit: &LocalFit, table: &ObservationTable, mode: PredictMode) -> Result<Vec<f64>> {
    (0..table.len())
        .map(|i| {
            let q = QueryPoint::new(table.coords[i], table.values_of(&fit.covariate_names, i)?);
            predict_query(fit, &q, mode).map_err(|e| e.in_context(format_args!("record `{}`", table.ids[i])))
        })
        .collect()
}
