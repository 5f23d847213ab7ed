//! Geographic, attribute and blended distances plus the Gaussian kernel.
//!
//! Coordinates are projected easting/northing in meters. Attribute vectors
//! are expected to be standardized already (see [`crate::data::standardize`]).
//! Under [`Normalization::MaxScale`] both distance families are divided by
//! their maximum over training pairs before blending, so the blend ratio is a
//! unit-free trade-off. The training maxima are kept in [`DistanceScales`] and
//! reused for query-to-training distances.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coordinate {
    /// Easting in meters.
    pub u: f64,
    /// Northing in meters.
    pub v: f64,
}

impl Coordinate {
    pub fn new(u: f64, v: f64) -> Self {
        Self { u, v }
    }

    pub fn is_finite(&self) -> bool {
        self.u.is_finite() && self.v.is_finite()
    }

    pub fn distance(&self, other: &Coordinate) -> f64 {
        (self.u - other.u).hypot(self.v - other.v)
    }
}

/// Dense row-major matrix of pairwise values (distances or kernel weights).
#[derive(Debug, Clone, PartialEq)]
pub struct PairwiseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

pub type DistanceMatrix = PairwiseMatrix;
pub type WeightMatrix = PairwiseMatrix;

impl PairwiseMatrix {
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Largest entry, or 0 for an empty matrix.
    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(0.0, f64::max)
    }

    pub fn is_symmetric(&self) -> bool {
        self.rows == self.cols
            && (0..self.rows).all(|i| (0..i).all(|j| self.get(i, j) == self.get(j, i)))
    }

    /// Divide every entry by `scale` (which must be positive).
    pub fn scaled(&self, scale: f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|d| d / scale).collect(),
        }
    }

    /// Off-diagonal upper-triangle entries of a square matrix.
    pub fn upper_triangle(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.rows * self.rows.saturating_sub(1) / 2);
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                out.push(self.get(i, j));
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Normalization {
    #[default]
    MaxScale,
    None,
}

/// How the kernel distance is assembled from geography and attributes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceSpec {
    /// Blend ratio: 1 is purely geographic, 0 purely attribute-based.
    pub rate: f64,
    pub attribute_columns: Vec<String>,
    #[serde(default)]
    pub normalization: Normalization,
}

impl DistanceSpec {
    pub fn new(
        rate: f64,
        attribute_columns: Vec<String>,
        normalization: Normalization,
    ) -> Result<Self> {
        let spec = Self {
            rate,
            attribute_columns,
            normalization,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Plain geographic weighting (GWR).
    pub fn geographic(normalization: Normalization) -> Self {
        Self {
            rate: 1.0,
            attribute_columns: Vec::new(),
            normalization,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_rate(self.rate)?;
        if self.rate < 1.0 && self.attribute_columns.is_empty() {
            return Err(Error::Parameter(
                "attribute columns are required when the blend ratio is below 1".into(),
            ));
        }
        Ok(())
    }

    pub fn with_rate(&self, rate: f64) -> Self {
        Self {
            rate,
            ..self.clone()
        }
    }

    /// True when attribute distances never influence the kernel.
    pub fn is_geographic(&self) -> bool {
        self.rate == 1.0
    }
}

fn check_rate(rate: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&rate) {
        return Err(Error::Parameter(format!(
            "blend ratio must lie in [0, 1], got {rate}"
        )));
    }
    Ok(())
}

/// Training-pair maxima used to normalize distances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistanceScales {
    pub geographic: f64,
    pub attribute: f64,
}

impl Default for DistanceScales {
    fn default() -> Self {
        Self::unit()
    }
}

impl DistanceScales {
    pub fn unit() -> Self {
        Self {
            geographic: 1.0,
            attribute: 1.0,
        }
    }

    /// Maxima of the square training matrices; a zero maximum maps to 1.
    pub fn from_training(
        geo: &DistanceMatrix,
        attr: Option<&DistanceMatrix>,
        normalization: Normalization,
    ) -> Self {
        match normalization {
            Normalization::None => Self::unit(),
            Normalization::MaxScale => Self {
                geographic: positive_or_one(geo.max()),
                attribute: attr.map_or(1.0, |a| positive_or_one(a.max())),
            },
        }
    }
}

fn positive_or_one(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        1.0
    }
}

/// Euclidean distances in meters between two coordinate lists.
pub fn geographic_distances(a: &[Coordinate], b: &[Coordinate]) -> Result<DistanceMatrix> {
    if let Some(i) = a.iter().chain(b).position(|c| !c.is_finite()) {
        return Err(Error::NonFinite(format!("coordinate {i}")));
    }
    Ok(PairwiseMatrix::from_fn(a.len(), b.len(), |i, j| {
        a[i].distance(&b[j])
    }))
}

/// Euclidean distances between attribute vectors.
pub fn attribute_distances<A, B>(a: &[A], b: &[B]) -> Result<DistanceMatrix>
where
    A: AsRef<[f64]>,
    B: AsRef<[f64]>,
{
    let dim = a
        .first()
        .map(|x| x.as_ref().len())
        .or_else(|| b.first().map(|x| x.as_ref().len()))
        .unwrap_or(0);
    let all = a.iter().map(AsRef::as_ref).chain(b.iter().map(AsRef::as_ref));
    for (i, v) in all.enumerate() {
        if v.len() != dim {
            return Err(Error::Dimension(format!(
                "attribute vector {i} has length {}, expected {dim}",
                v.len()
            )));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite(format!("attribute vector {i}")));
        }
    }
    Ok(PairwiseMatrix::from_fn(a.len(), b.len(), |i, j| {
        euclidean(a[i].as_ref(), b[j].as_ref())
    }))
}

pub(crate) fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Entry-wise `rate * geo + (1 - rate) * attr`.
///
/// Both inputs must already be normalized per `spec.normalization`.
pub fn blend_distances(
    geo: &DistanceMatrix,
    attr: &DistanceMatrix,
    spec: &DistanceSpec,
) -> Result<DistanceMatrix> {
    check_rate(spec.rate)?;
    if geo.shape() != attr.shape() {
        return Err(Error::Dimension(format!(
            "geographic matrix is {:?} but attribute matrix is {:?}",
            geo.shape(),
            attr.shape()
        )));
    }
    let r = spec.rate;
    let data = if r == 1.0 {
        geo.data.clone()
    } else if r == 0.0 {
        attr.data.clone()
    } else {
        geo.data
            .iter()
            .zip(&attr.data)
            .map(|(g, a)| blend(r, *g, *a))
            .collect()
    };
    PairwiseMatrix::from_vec(geo.rows, geo.cols, data)
}

#[inline]
pub(crate) fn blend(rate: f64, geo: f64, attr: f64) -> f64 {
    if rate == 1.0 {
        geo
    } else if rate == 0.0 {
        attr
    } else {
        rate * geo + (1.0 - rate) * attr
    }
}

/// `exp(-d^2 / h^2)`.
#[inline]
pub fn gaussian_kernel(distance: f64, bandwidth: f64) -> f64 {
    let z = distance / bandwidth;
    let e = z * z;
    // exp underflows to exactly zero past this point; skip the call.
    if e > 746.0 {
        0.0
    } else {
        (-e).exp()
    }
}

/// Square root of [`gaussian_kernel`], `exp(-d^2 / (2 h^2))`.
#[inline]
pub(crate) fn root_gaussian_kernel(distance: f64, bandwidth: f64) -> f64 {
    let z = distance / bandwidth;
    let e = 0.5 * z * z;
    if e > 746.0 {
        0.0
    } else {
        (-e).exp()
    }
}

pub fn gaussian_weights(d: &DistanceMatrix, bandwidth: f64) -> Result<WeightMatrix> {
    check_bandwidth(bandwidth)?;
    Ok(PairwiseMatrix {
        rows: d.rows,
        cols: d.cols,
        data: d.data.iter().map(|x| gaussian_kernel(*x, bandwidth)).collect(),
    })
}

pub(crate) fn check_bandwidth(h: f64) -> Result<()> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::Parameter(format!(
            "bandwidth must be positive and finite, got {h}"
        )));
    }
    Ok(())
}
