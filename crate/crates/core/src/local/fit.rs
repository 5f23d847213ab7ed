use serde::{Deserialize, Serialize};

use crate::data::{ObservationTable, StandardizationTransform};
use crate::distance::{
    attribute_distances, blend, check_bandwidth, geographic_distances, root_gaussian_kernel,
    Coordinate, DistanceMatrix, DistanceScales, DistanceSpec, PairwiseMatrix,
};
use crate::error::{Error, Result};
use crate::wls::{dot, Coefficients, DesignMatrix, LocalSolution, WlsWorkspace};

/// Training records embedded in a fit so it can predict on its own.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingPoints {
    pub coords: Vec<Coordinate>,
    /// Raw covariate rows, in the order of the fit's covariate names.
    pub covariates: Vec<Vec<f64>>,
    pub response: Vec<f64>,
    /// Standardized attribute vectors used by the attribute distance.
    pub attributes: Vec<Vec<f64>>,
}

/// Per-location coefficients from a kernel-weighted regression.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalFit {
    pub spec: DistanceSpec,
    pub bandwidth: f64,
    pub scales: DistanceScales,
    pub transform: StandardizationTransform,
    pub covariate_names: Vec<String>,
    /// One coefficient vector per training record.
    pub coefficients: Vec<Coefficients>,
    /// Locations whose fit needed the fallback ridge.
    pub regularized: Vec<bool>,
    pub training: TrainingPoints,
}

impl LocalFit {
    pub fn len(&self) -> usize {
        self.coefficients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coefficients.is_empty()
    }

    /// `[1, X_i] . beta_i` for every training record.
    pub fn fitted_values(&self) -> Vec<f64> {
        self.coefficients
            .iter()
            .zip(&self.training.covariates)
            .map(|(b, x)| b.predict_covariates(x))
            .collect()
    }

    pub fn regularized_count(&self) -> usize {
        self.regularized.iter().filter(|r| **r).count()
    }

    /// Positions of the standardized attribute columns among the covariates.
    pub(crate) fn attribute_positions(&self) -> Vec<usize> {
        attribute_positions(&self.transform, &self.covariate_names)
    }
}

fn attribute_positions(transform: &StandardizationTransform, covariates: &[String]) -> Vec<usize> {
    transform
        .columns
        .iter()
        .map(|c| {
            covariates
                .iter()
                .position(|n| *n == c.name)
                .expect("attribute columns are validated to be covariates")
        })
        .collect()
}

/// Everything about a training table that does not depend on `r` or `h`:
/// design, standardized attributes and normalized distance matrices.
#[derive(Debug, Clone)]
pub struct TrainingContext {
    spec: DistanceSpec,
    design: DesignMatrix,
    covariate_names: Vec<String>,
    points: TrainingPoints,
    transform: StandardizationTransform,
    scales: DistanceScales,
    geo: DistanceMatrix,
    attr: DistanceMatrix,
}

impl TrainingContext {
    pub fn new(table: &ObservationTable, spec: &DistanceSpec) -> Result<Self> {
        spec.validate()?;
        table.validate()?;
        let covariate_names = table.covariate_names();
        let n = table.len();
        let p = covariate_names.len() + 1;
        if n < p + 1 {
            return Err(Error::Parameter(format!(
                "local fits need at least {} records for {} covariates, got {n}",
                p + 1,
                p - 1
            )));
        }
        if let Some(bad) = spec
            .attribute_columns
            .iter()
            .find(|c| !covariate_names.contains(c))
        {
            return Err(Error::Input(format!(
                "attribute column `{bad}` is not a regression covariate"
            )));
        }
        let columns: Vec<&[f64]> = table.covariates.iter().map(|c| c.values.as_slice()).collect();
        let design = DesignMatrix::from_covariate_columns(n, &columns)?;
        let transform = StandardizationTransform::fit(table, &spec.attribute_columns)?;
        let attributes = transform.apply(table)?;

        let geo_raw = geographic_distances(&table.coords, &table.coords)?;
        let attr_raw = attribute_distances(&attributes, &attributes)?;
        let scales = DistanceScales::from_training(&geo_raw, Some(&attr_raw), spec.normalization);
        Ok(Self {
            spec: spec.clone(),
            design,
            points: TrainingPoints {
                coords: table.coords.clone(),
                covariates: table.covariate_rows(),
                response: table.response.clone(),
                attributes,
            },
            covariate_names,
            transform,
            scales,
            geo: geo_raw.scaled(scales.geographic),
            attr: attr_raw.scaled(scales.attribute),
        })
    }

    pub fn len(&self) -> usize {
        self.points.response.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.response.is_empty()
    }

    pub fn spec(&self) -> &DistanceSpec {
        &self.spec
    }

    pub fn scales(&self) -> DistanceScales {
        self.scales
    }

    /// Normalized blended distances among training records for ratio `rate`.
    pub fn distances(&self, rate: f64) -> DistanceMatrix {
        let n = self.len();
        let g = self.geo.as_slice();
        let a = self.attr.as_slice();
        let data = (0..n * n).map(|k| blend(rate, g[k], a[k])).collect();
        PairwiseMatrix::from_vec(n, n, data).expect("square matrix")
    }

    /// `root` holds square roots of the kernel weights.
    fn solve_at(&self, ws: &mut WlsWorkspace, i: usize, root: &[f64]) -> Result<LocalSolution> {
        ws.solve_root_checked(&self.design, &self.points.response, root)
            .map_err(|e| e.in_context(format_args!("local fit at location {i}")))
    }

    /// Fit every training location with ratio `rate` and bandwidth `h`.
    pub fn fit(&self, rate: f64, bandwidth: f64) -> Result<LocalFit> {
        check_bandwidth(bandwidth)?;
        let spec = DistanceSpec::new(rate, self.spec.attribute_columns.clone(), self.spec.normalization)?;
        let d = self.distances(rate);
        let n = self.len();
        let mut w = vec![0.0; n];
        let mut ws = WlsWorkspace::new();
        let mut coefficients = Vec::with_capacity(n);
        let mut regularized = Vec::with_capacity(n);
        for i in 0..n {
            for (wj, dj) in w.iter_mut().zip(d.row(i)) {
                *wj = root_gaussian_kernel(*dj, bandwidth);
            }
            let sol = self.solve_at(&mut ws, i, &w)?;
            coefficients.push(sol.beta);
            regularized.push(sol.regularized);
        }
        Ok(LocalFit {
            spec,
            bandwidth,
            scales: self.scales,
            transform: self.transform.clone(),
            covariate_names: self.covariate_names.clone(),
            coefficients,
            regularized,
            training: self.points.clone(),
        })
    }

    /// Leave-one-out RMSE: record `i` is predicted from a fit at its own
    /// location with its own weight set to zero.
    pub fn loo_rmse(&self, d: &DistanceMatrix, bandwidth: f64) -> Result<f64> {
        check_bandwidth(bandwidth)?;
        let n = self.len();
        let mut w = vec![0.0; n];
        let mut ws = WlsWorkspace::new();
        let mut sse = 0.0;
        for i in 0..n {
            for (wj, dj) in w.iter_mut().zip(d.row(i)) {
                *wj = root_gaussian_kernel(*dj, bandwidth);
            }
            w[i] = 0.0;
            let sol = self.solve_at(&mut ws, i, &w)?;
            let e = self.points.response[i] - dot(self.design.row(i), sol.beta.as_slice());
            sse += e * e;
        }
        Ok((sse / n as f64).sqrt())
    }

    /// RMSE of the fitted values at the training locations.
    pub fn in_sample_rmse(&self, d: &DistanceMatrix, bandwidth: f64) -> Result<f64> {
        check_bandwidth(bandwidth)?;
        let n = self.len();
        let mut w = vec![0.0; n];
        let mut ws = WlsWorkspace::new();
        let mut sse = 0.0;
        for i in 0..n {
            for (wj, dj) in w.iter_mut().zip(d.row(i)) {
                *wj = root_gaussian_kernel(*dj, bandwidth);
            }
            let sol = self.solve_at(&mut ws, i, &w)?;
            let e = self.points.response[i] - dot(self.design.row(i), sol.beta.as_slice());
            sse += e * e;
        }
        Ok((sse / n as f64).sqrt())
    }
}

/// Kernel-weighted local regression at every record of `table`; the
/// regression uses all of the table's covariates.
pub fn fit_local(table: &ObservationTable, spec: &DistanceSpec, bandwidth: f64) -> Result<LocalFit> {
    TrainingContext::new(table, spec)?.fit(spec.rate, bandwidth)
}
