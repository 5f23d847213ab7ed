//! Prediction lattices and residual tables for external plotting.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::model::FittedModel;
use crate::data::table::median;
use crate::data::ObservationTable;
use crate::distance::Coordinate;
use crate::error::{Error, Result};

/// Lattice cell counts along each axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatticeSpec {
    pub nu: usize,
    pub nv: usize,
}

impl Default for LatticeSpec {
    fn default() -> Self {
        Self { nu: 50, nv: 50 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub u: f64,
    pub v: f64,
    pub covariates: Vec<f64>,
    pub predicted: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualRow {
    pub id: String,
    pub u: f64,
    pub v: f64,
    pub actual: f64,
    pub predicted: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridExport {
    pub covariate_names: Vec<String>,
    pub grid: Vec<GridRow>,
    pub residuals: Vec<ResidualRow>,
}

/// Evenly spaced points spanning the bounding box of `coords`, edges
/// included, `u` varying fastest. A single cell on an axis sits at the
/// midpoint.
pub fn lattice(coords: &[Coordinate], spec: LatticeSpec) -> Result<Vec<Coordinate>> {
    if spec.nu == 0 || spec.nv == 0 {
        return Err(Error::Parameter("lattice needs at least one cell per axis".into()));
    }
    if coords.is_empty() {
        return Err(Error::Input("no coordinates to cover".into()));
    }
    let span = |f: fn(&Coordinate) -> f64| {
        coords
            .iter()
            .map(f)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x), hi.max(x)))
    };
    let (u0, u1) = span(|c| c.u);
    let (v0, v1) = span(|c| c.v);
    let axis = |lo: f64, hi: f64, n: usize| -> Vec<f64> {
        if n == 1 {
            return vec![0.5 * (lo + hi)];
        }
        (0..n)
            .map(|k| if k == n - 1 { hi } else { lo + (hi - lo) * k as f64 / (n - 1) as f64 })
            .collect()
    };
    let us = axis(u0, u1, spec.nu);
    let vs = axis(v0, v1, spec.nv);
    Ok(vs
        .iter()
        .flat_map(|&v| us.iter().map(move |&u| Coordinate::new(u, v)))
        .collect())
}

pub fn residual_rows(table: &ObservationTable, predicted: &[f64]) -> Result<Vec<ResidualRow>> {
    if predicted.len() != table.len() {
        return Err(Error::Dimension(format!(
            "{} predictions for {} records",
            predicted.len(),
            table.len()
        )));
    }
    Ok((0..table.len())
        .map(|i| ResidualRow {
            id: table.ids[i].clone(),
            u: table.coords[i].u,
            v: table.coords[i].v,
            actual: table.response[i],
            predicted: predicted[i],
            residual: table.response[i] - predicted[i],
        })
        .collect())
}

/// Predict on a lattice over the training area and on every test record.
/// Lattice points take `query_covariates`, or the training medians of the
/// model's covariates when absent.
pub fn build_grid_export(
    model: &FittedModel,
    train: &ObservationTable,
    test: &ObservationTable,
    spec: LatticeSpec,
    query_covariates: Option<Vec<f64>>,
) -> Result<GridExport> {
    let names = model.covariates().to_vec();
    let query = match query_covariates {
        Some(q) => q,
        None => names
            .iter()
            .map(|n| train.column(n).map(median))
            .collect::<Result<Vec<_>>>()?,
    };
    let points = lattice(&train.coords, spec)?;
    let rows = vec![query.clone(); points.len()];
    let predicted = model.predict_points(&points, &rows)?;
    let grid = points
        .iter()
        .zip(predicted)
        .map(|(c, p)| GridRow {
            u: c.u,
            v: c.v,
            covariates: query.clone(),
            predicted: p,
        })
        .collect();
    let residuals = residual_rows(test, &model.predict(test)?)?;
    Ok(GridExport {
        covariate_names: names,
        grid,
        residuals,
    })
}

impl GridExport {
    /// `u,v,<covariates>,predicted`.
    pub fn write_grid_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        let mut header = vec!["u".to_string(), "v".to_string()];
        header.extend(self.covariate_names.iter().cloned());
        header.push("predicted".into());
        wtr.write_record(&header)?;
        for row in &self.grid {
            let mut rec = vec![row.u.to_string(), row.v.to_string()];
            rec.extend(row.covariates.iter().map(f64::to_string));
            rec.push(row.predicted.to_string());
            wtr.write_record(&rec)?;
        }
        wtr.flush()?;
        Ok(())
    }

    /// `id,u,v,actual,predicted,residual`.
    pub fn write_residual_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(["id", "u", "v", "actual", "predicted", "residual"])?;
        for r in &self.residuals {
            wtr.serialize((&r.id, r.u, r.v, r.actual, r.predicted, r.residual))?;
        }
        wtr.flush()?;
        Ok(())
    }

    /// Write `<prefix>grid.csv` and `<prefix>residuals.csv` into `dir`.
    pub fn write_files(&self, dir: impl AsRef<Path>, prefix: &str) -> Result<(PathBuf, PathBuf)> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        let grid = dir.join(format!("{prefix}grid.csv"));
        let residuals = dir.join(format!("{prefix}residuals.csv"));
        self.write_grid_csv(std::fs::File::create(&grid)?)?;
        self.write_residual_csv(std::fs::File::create(&residuals)?)?;
        Ok((grid, residuals))
    }
}

/// Build the export and write both CSV files into `out_dir`.
pub fn export_maps(
    model: &FittedModel,
    train: &ObservationTable,
    test: &ObservationTable,
    spec: LatticeSpec,
    out_dir: impl AsRef<Path>,
) -> Result<GridExport> {
    let export = build_grid_export(model, train, test, spec, None)?;
    export.write_files(out_dir, "")?;
    Ok(export)
}
