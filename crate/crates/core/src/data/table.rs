use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::distance::Coordinate;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ColumnKind {
    Continuous,
    /// One-hot indicator expanded from a categorical column.
    Dummy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Covariate {
    pub name: String,
    pub kind: ColumnKind,
    pub values: Vec<f64>,
}

/// Raw categorical column kept alongside its dummy expansion so the table
/// can be written back in its input layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoricalColumn {
    pub name: String,
    pub values: Vec<String>,
}

/// Georeferenced records: id, coordinate, response and named covariates.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ObservationTable {
    pub ids: Vec<String>,
    pub coords: Vec<Coordinate>,
    pub response: Vec<f64>,
    pub covariates: Vec<Covariate>,
    pub categorical: Vec<CategoricalColumn>,
}

impl ObservationTable {
    /// Assemble a table of continuous covariates and validate it.
    pub fn new(
        ids: Vec<String>,
        coords: Vec<Coordinate>,
        response: Vec<f64>,
        covariates: Vec<(String, Vec<f64>)>,
    ) -> Result<Self> {
        let table = Self {
            ids,
            coords,
            response,
            covariates: covariates
                .into_iter()
                .map(|(name, values)| Covariate {
                    name,
                    kind: ColumnKind::Continuous,
                    values,
                })
                .collect(),
            categorical: Vec::new(),
        };
        table.validate()?;
        Ok(table)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.ids.len();
        if n == 0 {
            return Err(Error::Input("table has no records".into()));
        }
        let lengths_ok = self.coords.len() == n
            && self.response.len() == n
            && self.covariates.iter().all(|c| c.values.len() == n)
            && self.categorical.iter().all(|c| c.values.len() == n);
        if !lengths_ok {
            return Err(Error::Dimension("table columns differ in length".into()));
        }
        let mut seen = HashSet::with_capacity(n);
        if let Some(dup) = self.ids.iter().find(|id| !seen.insert(id.as_str())) {
            return Err(Error::Input(format!("duplicate id `{dup}`")));
        }
        let mut names = HashSet::new();
        for c in &self.covariates {
            if !names.insert(c.name.as_str()) {
                return Err(Error::Input(format!("duplicate covariate `{}`", c.name)));
            }
            if c.values.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("covariate `{}`", c.name)));
            }
        }
        if self.coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("coordinates".into()));
        }
        if self.response.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("response".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn covariate_names(&self) -> Vec<String> {
        self.covariates.iter().map(|c| c.name.clone()).collect()
    }

    /// Names of covariates that are not dummy indicators.
    pub fn continuous_names(&self) -> Vec<String> {
        self.covariates
            .iter()
            .filter(|c| c.kind == ColumnKind::Continuous)
            .map(|c| c.name.clone())
            .collect()
    }

    pub fn covariate(&self, name: &str) -> Option<&Covariate> {
        self.covariates.iter().find(|c| c.name == name)
    }

    pub fn column(&self, name: &str) -> Result<&[f64]> {
        self.covariate(name)
            .map(|c| c.values.as_slice())
            .ok_or_else(|| Error::Input(format!("unknown covariate `{name}`")))
    }

    /// Covariate values of record `i`, in table order.
    pub fn covariate_row(&self, i: usize) -> Vec<f64> {
        self.covariates.iter().map(|c| c.values[i]).collect()
    }

    pub fn covariate_rows(&self) -> Vec<Vec<f64>> {
        (0..self.len()).map(|i| self.covariate_row(i)).collect()
    }

    /// Values of the named columns for record `i`.
    pub fn values_of(&self, names: &[String], i: usize) -> Result<Vec<f64>> {
        names
            .iter()
            .map(|n| self.column(n).map(|col| col[i]))
            .collect()
    }

    /// Keep only the listed covariates, in the listed order.
    pub fn select_covariates(&self, names: &[String]) -> Result<Self> {
        let covariates = names
            .iter()
            .map(|n| {
                self.covariate(n)
                    .cloned()
                    .ok_or_else(|| Error::Input(format!("unknown covariate `{n}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            covariates,
            ..self.clone()
        })
    }

    /// Records at the given positions, in that order.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        Self {
            ids: rows.iter().map(|&i| self.ids[i].clone()).collect(),
            coords: rows.iter().map(|&i| self.coords[i]).collect(),
            response: rows.iter().map(|&i| self.response[i]).collect(),
            covariates: self
                .covariates
                .iter()
                .map(|c| Covariate {
                    values: rows.iter().map(|&i| c.values[i]).collect(),
                    ..c.clone()
                })
                .collect(),
            categorical: self
                .categorical
                .iter()
                .map(|c| CategoricalColumn {
                    name: c.name.clone(),
                    values: rows.iter().map(|&i| c.values[i].clone()).collect(),
                })
                .collect(),
        }
    }

    /// Per-covariate medians, in table order.
    pub fn covariate_medians(&self) -> Vec<f64> {
        self.covariates.iter().map(|c| median(&c.values)).collect()
    }
}

pub(crate) fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Expand a categorical column into indicator covariates named
/// `column=level`, one per level except the first in sorted order.
pub fn dummy_encode(column: &CategoricalColumn) -> Vec<Covariate> {
    let mut levels: Vec<&str> = column.values.iter().map(String::as_str).collect();
    levels.sort_unstable();
    levels.dedup();
    levels
        .iter()
        .skip(1)
        .map(|level| Covariate {
            name: format!("{}={level}", column.name),
            kind: ColumnKind::Dummy,
            values: column
                .values
                .iter()
                .map(|v| if v == level { 1.0 } else { 0.0 })
                .collect(),
        })
        .collect()
}
