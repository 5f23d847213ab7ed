use serde::{Deserialize, Serialize};

use super::table::ObservationTable;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnStats {
    pub name: String,
    pub mean: f64,
    /// Standard deviation (n - 1 denominator) on the training rows; always > 0.
    pub std: f64,
}

/// Per-column z-score parameters fitted on training data.
///
/// Applying the transform is a fixed affine map; applying it to already
/// standardized values standardizes them again.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct StandardizationTransform {
    pub columns: Vec<ColumnStats>,
    /// Requested columns dropped for having zero variance.
    pub excluded: Vec<String>,
}

impl StandardizationTransform {
    pub fn fit(train: &ObservationTable, columns: &[String]) -> Result<Self> {
        let mut out = Self::default();
        for name in columns {
            let values = train.column(name)?;
            let n = values.len() as f64;
            let mean = values.iter().sum::<f64>() / n;
            let var = values.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
            let std = var.sqrt();
            if std > 0.0 && std.is_finite() {
                out.columns.push(ColumnStats {
                    name: name.clone(),
                    mean,
                    std,
                });
            } else {
                out.excluded.push(name.clone());
            }
        }
        Ok(out)
    }

    pub fn names(&self) -> Vec<String> {
        self.columns.iter().map(|c| c.name.clone()).collect()
    }

    pub fn dim(&self) -> usize {
        self.columns.len()
    }

    /// Standardize raw values given in the order of [`Self::names`].
    pub fn apply_values(&self, raw: &[f64]) -> Result<Vec<f64>> {
        if raw.len() != self.columns.len() {
            return Err(Error::Dimension(format!(
                "expected {} attribute values, got {}",
                self.columns.len(),
                raw.len()
            )));
        }
        if raw.iter().any(|x| !x.is_finite()) {
            return Err(Error::Input("attribute value is not finite".into()));
        }
        Ok(self
            .columns
            .iter()
            .zip(raw)
            .map(|(c, x)| (x - c.mean) / c.std)
            .collect())
    }

    /// Standardized attribute vector of every record in `table`.
    pub fn apply(&self, table: &ObservationTable) -> Result<Vec<Vec<f64>>> {
        let cols = self
            .columns
            .iter()
            .map(|c| table.column(&c.name))
            .collect::<Result<Vec<_>>>()?;
        Ok((0..table.len())
            .map(|i| {
                self.columns
                    .iter()
                    .zip(&cols)
                    .map(|(c, col)| (col[i] - c.mean) / c.std)
                    .collect()
            })
            .collect())
    }
}

/// Fit a transform on `train` and return it with the standardized rows.
pub fn standardize(
    train: &ObservationTable,
    columns: &[String],
) -> Result<(StandardizationTransform, Vec<Vec<f64>>)> {
    let transform = StandardizationTransform::fit(train, columns)?;
    let rows = transform.apply(train)?;
    Ok((transform, rows))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distance::Coordinate;

    fn table(cols: Vec<(&str, Vec<f64>)>) -> ObservationTable {
        let n = cols[0].1.len();
        ObservationTable::new(
            (0..n).map(|i| i.to_string()).collect(),
            vec![Coordinate::new(0.0, 0.0); n],
            vec![0.0; n],
            cols.into_iter().map(|(n, v)| (n.to_string(), v)).collect(),
        )
        .unwrap()
    }

    #[test]
    fn one_two_three() {
        let t = table(vec![("x", vec![1.0, 2.0, 3.0])]);
        let (tr, rows) = standardize(&t, &["x".into()]).unwrap();
        assert_eq!(tr.columns[0].mean, 2.0);
        assert_eq!(tr.columns[0].std, 1.0);
        assert_eq!(rows, vec![vec![-1.0], vec![0.0], vec![1.0]]);
    }

    #[test]
    fn training_mean_is_zero() {
        let t = table(vec![("a", vec![3.0, 9.5, -2.0, 7.25, 1.0]), ("b", vec![100.0, 250.0, 175.0, 80.0, 90.0])]);
        let (_, rows) = standardize(&t, &["a".into(), "b".into()]).unwrap();
        for c in 0..2 {
            let mean: f64 = rows.iter().map(|r| r[c]).sum::<f64>() / rows.len() as f64;
            assert!(mean.abs() < 1e-12);
            let var: f64 = rows.iter().map(|r| r[c] * r[c]).sum::<f64>() / (rows.len() - 1) as f64;
            assert!((var - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_column_excluded() {
        let t = table(vec![("a", vec![1.0, 2.0]), ("k", vec![5.0, 5.0])]);
        let (tr, rows) = standardize(&t, &["a".into(), "k".into()]).unwrap();
        assert_eq!(tr.excluded, vec!["k"]);
        assert_eq!(tr.dim(), 1);
        assert_eq!(rows[0].len(), 1);
    }

    #[test]
    fn single_row_cannot_be_standardized() {
        let t = table(vec![("a", vec![4.0])]);
        let tr = StandardizationTransform::fit(&t, &["a".into()]).unwrap();
        assert_eq!(tr.excluded, vec!["a"]);
    }

    #[test]
    fn reapplying_is_not_identity() {
        let t = table(vec![("a", vec![10.0, 20.0, 60.0])]);
        let tr = StandardizationTransform::fit(&t, &["a".into()]).unwrap();
        let once = tr.apply_values(&[20.0]).unwrap();
        let twice = tr.apply_values(&once).unwrap();
        assert_ne!(once, twice);
    }
}
