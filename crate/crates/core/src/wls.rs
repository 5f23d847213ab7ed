//! Weighted least squares and the global linear baseline.
//!
//! Fits are computed from a Householder QR factorization of the weighted
//! design `W^{1/2} X` rather than by inverting `X^T W X`. Ridge penalties are
//! handled by appending `sqrt(ridge) * I` rows to the weighted design.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Condition-number estimate of `X^T W X` above which a fit counts as singular.
pub const CONDITION_LIMIT: f64 = 1e12;

/// Fallback ridge is this factor times `trace(X^T W X) / (B + 1)`.
pub const FALLBACK_RIDGE_FACTOR: f64 = 1e-8;

/// Row-major design matrix whose first column is the intercept.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DesignMatrix {
    /// Build from covariate rows, prepending the intercept column.
    pub fn from_covariate_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let width = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * (width + 1));
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != width {
                return Err(Error::Dimension(format!(
                    "covariate row {i} has {} values, expected {width}",
                    row.len()
                )));
            }
            data.push(1.0);
            data.extend_from_slice(row);
        }
        let design = Self {
            rows: rows.len(),
            cols: width + 1,
            data,
        };
        design.check_finite()?;
        Ok(design)
    }

    /// Build from covariate columns of equal length, prepending the intercept.
    pub fn from_covariate_columns<C: AsRef<[f64]>>(n: usize, columns: &[C]) -> Result<Self> {
        if let Some(bad) = columns.iter().position(|c| c.as_ref().len() != n) {
            return Err(Error::Dimension(format!(
                "covariate column {bad} has {} values, expected {n}",
                columns[bad].as_ref().len()
            )));
        }
        let cols = columns.len() + 1;
        let mut data = Vec::with_capacity(n * cols);
        for i in 0..n {
            data.push(1.0);
            data.extend(columns.iter().map(|c| c.as_ref()[i]));
        }
        let design = Self {
            rows: n,
            cols,
            data,
        };
        design.check_finite()?;
        Ok(design)
    }

    fn check_finite(&self) -> Result<()> {
        match self.data.iter().position(|x| !x.is_finite()) {
            Some(k) => Err(Error::NonFinite(format!(
                "design matrix row {}",
                k / self.cols
            ))),
            None => Ok(()),
        }
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }
}

/// Regression coefficients; entry 0 is the intercept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Coefficients(pub Vec<f64>);

impl Coefficients {
    pub fn intercept(&self) -> f64 {
        self.0[0]
    }

    pub fn slopes(&self) -> &[f64] {
        &self.0[1..]
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// `beta_0 + sum_b beta_b * x_b` for a covariate vector without intercept.
    pub fn predict_covariates(&self, covariates: &[f64]) -> f64 {
        self.intercept()
            + self
                .slopes()
                .iter()
                .zip(covariates)
                .map(|(b, x)| b * x)
                .sum::<f64>()
    }

    /// Entry-wise mean of several coefficient vectors of equal length.
    pub fn mean<'a>(items: impl IntoIterator<Item = &'a Coefficients>) -> Option<Coefficients> {
        let mut acc: Option<Vec<f64>> = None;
        let mut count = 0usize;
        for c in items {
            let sum = acc.get_or_insert_with(|| vec![0.0; c.len()]);
            for (s, x) in sum.iter_mut().zip(&c.0) {
                *s += x;
            }
            count += 1;
        }
        acc.map(|s| Coefficients(s.into_iter().map(|x| x / count as f64).collect()))
    }
}

/// Outcome of a fit that may have fallen back to a ridge penalty.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalSolution {
    pub beta: Coefficients,
    pub regularized: bool,
    pub ridge: f64,
}

/// `argmin_beta sum_i w_i (y_i - X_i beta)^2 + ridge * |beta|^2`.
pub fn solve_wls(x: &DesignMatrix, y: &[f64], w: &[f64], ridge: f64) -> Result<Coefficients> {
    check_inputs(x, y, w, ridge)?;
    let (beta, _) = factor_and_solve(x, y, w, ridge)?;
    Ok(beta)
}

/// Weighted fit that retries with a small ridge when `X^T W X` is
/// ill-conditioned, as happens in tight local neighborhoods.
pub fn solve_wls_with_fallback(x: &DesignMatrix, y: &[f64], w: &[f64]) -> Result<LocalSolution> {
    WlsWorkspace::default().solve_with_fallback(x, y, w)
}

/// Ordinary least squares with an intercept.
pub fn fit_ols(x: &DesignMatrix, y: &[f64]) -> Result<Coefficients> {
    solve_wls(x, y, &vec![1.0; x.nrows()], 0.0)
}

/// `y_hat = X beta`.
pub fn predict(x: &DesignMatrix, beta: &Coefficients) -> Result<Vec<f64>> {
    if x.ncols() != beta.len() {
        return Err(Error::Dimension(format!(
            "design has {} columns but there are {} coefficients",
            x.ncols(),
            beta.len()
        )));
    }
    Ok((0..x.nrows()).map(|i| dot(x.row(i), &beta.0)).collect())
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `1e-8 * trace(X^T W X) / (B + 1)`.
pub fn fallback_ridge(x: &DesignMatrix, w: &[f64]) -> f64 {
    let trace: f64 = (0..x.nrows())
        .map(|i| w[i] * x.row(i).iter().map(|v| v * v).sum::<f64>())
        .sum();
    FALLBACK_RIDGE_FACTOR * trace / x.ncols() as f64
}

fn check_inputs(x: &DesignMatrix, y: &[f64], w: &[f64], ridge: f64) -> Result<()> {
    if y.len() != x.nrows() || w.len() != x.nrows() {
        return Err(Error::Dimension(format!(
            "design has {} rows, response {}, weights {}",
            x.nrows(),
            y.len(),
            w.len()
        )));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("response".into()));
    }
    if w.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::Parameter(
            "weights must be finite and nonnegative".into(),
        ));
    }
    if !(ridge.is_finite() && ridge >= 0.0) {
        return Err(Error::Parameter(format!(
            "ridge must be finite and nonnegative, got {ridge}"
        )));
    }
    if w.iter().all(|v| *v == 0.0) {
        return Err(Error::DegenerateWeights("weighted fit".into()));
    }
    Ok(())
}

fn factor_and_solve(
    x: &DesignMatrix,
    y: &[f64],
    w: &[f64],
    ridge: f64,
) -> Result<(Coefficients, f64)> {
    let root: Vec<f64> = w.iter().map(|v| v.sqrt()).collect();
    WlsWorkspace::default().factor_and_solve(x, y, &root, ridge)
}

/// Scratch buffers for repeated weighted fits, so hyperparameter searches
/// do not allocate per location.
#[derive(Debug, Clone, Default)]
pub struct WlsWorkspace {
    /// Weighted design, column-major, overwritten by the factorization.
    a: Vec<f64>,
    b: Vec<f64>,
    root: Vec<f64>,
    r_inv: Vec<f64>,
}

impl WlsWorkspace {
    pub fn new() -> Self {
        Self::default()
    }

    /// Same contract as [`solve_wls_with_fallback`].
    pub fn solve_with_fallback(&mut self, x: &DesignMatrix, y: &[f64], w: &[f64]) -> Result<LocalSolution> {
        check_inputs(x, y, w, 0.0)?;
        self.solve_checked(x, y, w)
    }

    /// Fallback solve for callers that validated `y` and the weights.
    pub(crate) fn solve_checked(&mut self, x: &DesignMatrix, y: &[f64], w: &[f64]) -> Result<LocalSolution> {
        let mut root = std::mem::take(&mut self.root);
        root.clear();
        root.extend(w.iter().map(|v| v.sqrt()));
        let out = self.solve_root_checked(x, y, &root);
        self.root = root;
        out
    }

    /// As [`Self::solve_checked`] with square roots of the weights given,
    /// which kernel callers can produce without a `sqrt` per row.
    pub(crate) fn solve_root_checked(&mut self, x: &DesignMatrix, y: &[f64], root: &[f64]) -> Result<LocalSolution> {
        if root.iter().all(|v| *v == 0.0) {
            return Err(Error::DegenerateWeights("weighted fit".into()));
        }
        match self.factor_and_solve(x, y, root, 0.0) {
            Ok((beta, _)) => Ok(LocalSolution {
                beta,
                regularized: false,
                ridge: 0.0,
            }),
            Err(Error::Singular { .. }) => {
                let trace: f64 = (0..x.nrows())
                    .map(|i| root[i] * root[i] * x.row(i).iter().map(|v| v * v).sum::<f64>())
                    .sum();
                let ridge = FALLBACK_RIDGE_FACTOR * trace / x.ncols() as f64;
                if !(ridge > 0.0) {
                    return Err(Error::DegenerateWeights("weighted design is zero".into()));
                }
                let (beta, _) = self.factor_and_solve(x, y, root, ridge)?;
                Ok(LocalSolution {
                    beta,
                    regularized: true,
                    ridge,
                })
            }
            Err(e) => Err(e),
        }
    }

    fn factor_and_solve(
        &mut self,
        x: &DesignMatrix,
        y: &[f64],
        root: &[f64],
        ridge: f64,
    ) -> Result<(Coefficients, f64)> {
        let p = x.ncols();
        let active = root.iter().filter(|v| **v > 0.0).count();
        let extra = if ridge > 0.0 { p } else { 0 };
        let m = active + extra;
        if m < p {
            return Err(Error::Singular {
                context: format!("weighted fit with {active} positive weights"),
                condition: f64::INFINITY,
            });
        }

        // Every entry below is overwritten, so the buffers only grow.
        if self.a.len() < m * p {
            self.a.resize(m * p, 0.0);
        }
        if self.b.len() < m {
            self.b.resize(m, 0.0);
        }
        let (a, b) = (&mut self.a[..m * p], &mut self.b[..m]);
        let mut r = 0;
        for (i, &s) in root.iter().enumerate() {
            if s > 0.0 {
                for (c, v) in x.row(i).iter().enumerate() {
                    a[c * m + r] = s * v;
                }
                b[r] = s * y[i];
                r += 1;
            }
        }
        if extra > 0 {
            let root_ridge = ridge.sqrt();
            for k in 0..p {
                b[active + k] = 0.0;
                for c in 0..p {
                    a[c * m + active + k] = if c == k { root_ridge } else { 0.0 };
                }
            }
        }

        householder(a, b, m, p);
        let condition = self.normal_condition(m, p);
        if !(condition <= CONDITION_LIMIT) {
            return Err(Error::Singular {
                context: "weighted fit".into(),
                condition,
            });
        }
        let mut beta = vec![0.0; p];
        for k in (0..p).rev() {
            let mut s = self.b[k];
            for j in k + 1..p {
                s -= self.a[j * m + k] * beta[j];
            }
            beta[k] = s / self.a[k * m + k];
        }
        if beta.iter().any(|v| !v.is_finite()) {
            return Err(Error::Singular {
                context: "weighted fit".into(),
                condition: f64::INFINITY,
            });
        }
        Ok((Coefficients(beta), condition))
    }

    /// `cond_1(R)^2`, an estimate of the condition number of `X^T W X`
    /// within a factor `p^2` of the 2-norm value.
    fn normal_condition(&mut self, m: usize, p: usize) -> f64 {
        let a = &self.a;
        let rr = |i: usize, j: usize| a[j * m + i];
        if (0..p).any(|k| !(rr(k, k).abs() > 0.0)) {
            return f64::INFINITY;
        }
        self.r_inv.clear();
        self.r_inv.resize(p * p, 0.0);
        // Column j of R^-1 by back substitution; stored column-major.
        for j in 0..p {
            for i in (0..=j).rev() {
                let mut s = if i == j { 1.0 } else { 0.0 };
                for k in i + 1..=j {
                    s -= rr(i, k) * self.r_inv[j * p + k];
                }
                self.r_inv[j * p + i] = s / rr(i, i);
            }
        }
        let norm_r = (0..p)
            .map(|j| (0..=j).map(|i| rr(i, j).abs()).sum::<f64>())
            .fold(0.0, f64::max);
        let norm_inv = (0..p)
            .map(|j| (0..=j).map(|i| self.r_inv[j * p + i].abs()).sum::<f64>())
            .fold(0.0, f64::max);
        let c = norm_r * norm_inv;
        if c.is_finite() {
            c * c
        } else {
            f64::INFINITY
        }
    }
}

/// Dot product with four independent accumulators.
fn dot4(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0f64; 4];
    let mut ca = a.chunks_exact(4);
    let mut cb = b.chunks_exact(4);
    for (x, y) in (&mut ca).zip(&mut cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// In-place Householder QR of the column-major `m x p` matrix `a`, applying
/// the reflections to `b`. Afterwards the upper triangle of `a` holds `R`
/// and `b[..p]` holds the leading part of `Q^T b`.
fn householder(a: &mut [f64], b: &mut [f64], m: usize, p: usize) {
    for k in 0..p {
        let col = k * m;
        let v = &a[col + k..col + m];
        let norm = dot4(v, v).sqrt();
        if norm == 0.0 {
            continue;
        }
        let akk = a[col + k];
        let alpha = if akk > 0.0 { -norm } else { norm };
        a[col + k] = akk - alpha;
        let vnorm2 = norm * (norm + akk.abs()) * 2.0;
        for j in k + 1..p {
            let (head, tail) = a.split_at_mut(j * m);
            let v = &head[col + k..col + m];
            let target = &mut tail[k..m];
            let s = 2.0 * dot4(v, target) / vnorm2;
            for (t, vi) in target.iter_mut().zip(v) {
                *t -= s * vi;
            }
        }
        let v = &a[col + k..col + m];
        let s = 2.0 * dot4(v, &b[k..m]) / vnorm2;
        for (t, vi) in b[k..m].iter_mut().zip(v) {
            *t -= s * vi;
        }
        a[col + k] = alpha;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn design(rows: &[&[f64]]) -> DesignMatrix {
        DesignMatrix::from_covariate_rows(rows).unwrap()
    }

    #[test]
    fn intercept_only_is_weighted_mean() {
        let x = DesignMatrix::from_covariate_columns::<Vec<f64>>(3, &[]).unwrap();
        let beta = solve_wls(&x, &[2.0, 4.0, 6.0], &[1.0; 3], 0.0).unwrap();
        assert_relative_eq!(beta.0[0], 4.0, epsilon = 1e-14);
    }

    #[test]
    fn exact_line_recovered() {
        let x = design(&[&[0.0], &[1.0], &[2.0]]);
        let y = [1.0, 3.0, 5.0];
        let beta = fit_ols(&x, &y).unwrap();
        assert_relative_eq!(beta.0[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(beta.0[1], 2.0, epsilon = 1e-12);
        let fitted = predict(&x, &beta).unwrap();
        for (f, t) in fitted.iter().zip(&y) {
            assert!((f - t).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_response() {
        let x = design(&[&[0.5, 3.0], &[1.0, -1.0], &[2.0, 0.0], &[4.0, 2.5]]);
        let beta = fit_ols(&x, &[7.0; 4]).unwrap();
        assert_relative_eq!(beta.0[0], 7.0, epsilon = 1e-12);
        assert!(beta.0[1].abs() < 1e-12 && beta.0[2].abs() < 1e-12);
    }

    #[test]
    fn predict_examples() {
        let x = design(&[&[3.0], &[0.0]]);
        assert_eq!(predict(&x, &Coefficients(vec![1.0, 2.0])).unwrap(), vec![7.0, 1.0]);
        assert_eq!(predict(&x, &Coefficients(vec![0.0, 0.0])).unwrap(), vec![0.0, 0.0]);
        assert_eq!(predict(&x, &Coefficients(vec![5.0, 0.0])).unwrap(), vec![5.0, 5.0]);
        assert_eq!(
            predict(&x, &Coefficients(vec![1.0])).unwrap_err().kind(),
            "dimension"
        );
    }

    #[test]
    fn collinear_design_is_singular() {
        let x = design(&[&[1.0, 2.0], &[2.0, 4.0], &[3.0, 6.0], &[4.0, 8.0]]);
        let err = fit_ols(&x, &[1.0, 2.0, 3.0, 4.0]).unwrap_err();
        assert_eq!(err.kind(), "singular");
        let fallback = solve_wls_with_fallback(&x, &[1.0, 2.0, 3.0, 4.0], &[1.0; 4]).unwrap();
        assert!(fallback.regularized);
        assert!(fallback.ridge > 0.0);
        let ok = solve_wls(&x, &[1.0, 2.0, 3.0, 4.0], &[1.0; 4], 1e-3).unwrap();
        assert!(ok.0.iter().all(|b| b.is_finite()));
    }

    #[test]
    fn singular_error_carries_context() {
        let x = design(&[&[1.0], &[1.0], &[1.0]]);
        let err = fit_ols(&x, &[1.0, 2.0, 3.0])
            .unwrap_err()
            .in_context("local fit at location 4");
        assert!(err.to_string().contains("location 4"));
    }

    #[test]
    fn zero_weights_rejected() {
        let x = design(&[&[0.0], &[1.0]]);
        let err = solve_wls(&x, &[1.0, 2.0], &[0.0, 0.0], 0.0).unwrap_err();
        assert_eq!(err.kind(), "degenerate-weights");
        let err = solve_wls(&x, &[1.0, 2.0], &[1.0, -1.0], 0.0).unwrap_err();
        assert_eq!(err.kind(), "parameter");
    }

    #[test]
    fn too_few_active_rows_is_singular() {
        let x = design(&[&[0.0], &[1.0], &[2.0]]);
        let err = solve_wls(&x, &[1.0, 2.0, 3.0], &[1.0, 0.0, 0.0], 0.0).unwrap_err();
        assert_eq!(err.kind(), "singular");
    }

    /// Brute-force normal equations: explicit sums and Cramer's rule.
    fn oracle_2x2(x: &[f64], y: &[f64], w: &[f64]) -> (f64, f64) {
        let (mut s0, mut s1, mut s2, mut t0, mut t1) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for i in 0..x.len() {
            s0 += w[i];
            s1 += w[i] * x[i];
            s2 += w[i] * x[i] * x[i];
            t0 += w[i] * y[i];
            t1 += w[i] * x[i] * y[i];
        }
        let det = s0 * s2 - s1 * s1;
        ((s2 * t0 - s1 * t1) / det, (s0 * t1 - s1 * t0) / det)
    }

    #[test]
    fn four_point_weighted_system_matches_oracle() {
        let xs = [0.0, 1.0, 2.0, 4.0];
        let ys = [1.0, 2.5, 2.0, 6.0];
        let ws = [1.0, 2.0, 1.0, 0.5];
        let (b0, b1) = oracle_2x2(&xs, &ys, &ws);
        // Frozen from the oracle: det = 27, b0 = 28/27, b1 = 28.5/27.
        assert_relative_eq!(b0, 28.0 / 27.0, epsilon = 1e-14);
        assert_relative_eq!(b1, 28.5 / 27.0, epsilon = 1e-14);
        let x = DesignMatrix::from_covariate_columns(4, &[xs]).unwrap();
        let beta = solve_wls(&x, &ys, &ws, 0.0).unwrap();
        assert_relative_eq!(beta.0[0], b0, max_relative = 1e-12);
        assert_relative_eq!(beta.0[1], b1, max_relative = 1e-12);
    }

    #[test]
    fn ols_equals_unit_weight_wls() {
        // Fixed 10x3 system.
        let rows: Vec<Vec<f64>> = (0..10)
            .map(|i| {
                let t = i as f64;
                vec![(t * 0.7).sin() * 3.0, (t * 1.3).cos() + t * 0.1]
            })
            .collect();
        let y: Vec<f64> = (0..10).map(|i| (i as f64 * 0.37).sin() * 5.0 + 2.0).collect();
        let x = DesignMatrix::from_covariate_rows(&rows).unwrap();
        let a = fit_ols(&x, &y).unwrap();
        let b = solve_wls(&x, &y, &[1.0; 10], 0.0).unwrap();
        for (p, q) in a.0.iter().zip(&b.0) {
            assert!((p - q).abs() <= 1e-12 * (1.0 + q.abs()));
        }
    }

    #[test]
    fn ridge_limit_converges() {
        let x = design(&[&[0.0, 1.0], &[1.0, 0.5], &[2.0, 2.0], &[3.0, -1.0], &[4.0, 0.0]]);
        let y = [1.0, 2.0, 2.5, 5.0, 4.0];
        let w = [1.0, 0.5, 2.0, 1.0, 1.5];
        let exact = solve_wls(&x, &y, &w, 0.0).unwrap();
        let mut last = f64::INFINITY;
        for ridge in [1e-1, 1e-3, 1e-5, 1e-7, 1e-9] {
            let b = solve_wls(&x, &y, &w, ridge).unwrap();
            let err: f64 = b.0.iter().zip(&exact.0).map(|(p, q)| (p - q).abs()).sum();
            assert!(err <= last);
            last = err;
        }
        assert!(last < 1e-7);
    }

    fn system() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<f64>, Vec<f64>)> {
        (4usize..12).prop_flat_map(|n| {
            (
                prop::collection::vec(prop::collection::vec(-5.0..5.0f64, 2), n),
                prop::collection::vec(-10.0..10.0f64, n),
                prop::collection::vec(0.05..3.0f64, n),
            )
        })
    }

    proptest! {
        #[test]
        fn weighted_residuals_are_orthogonal((rows, y, w) in system()) {
            let x = DesignMatrix::from_covariate_rows(&rows).unwrap();
            let Ok(beta) = solve_wls(&x, &y, &w, 0.0) else { return Ok(()) };
            let fitted = predict(&x, &beta).unwrap();
            for c in 0..x.ncols() {
                let mut g = 0.0;
                let mut scale = 0.0;
                for i in 0..x.nrows() {
                    let term = x.row(i)[c] * w[i];
                    g += term * (y[i] - fitted[i]);
                    scale += (term * y[i]).abs();
                }
                prop_assert!(g.abs() <= 1e-8 * (1.0 + scale));
            }
        }

        #[test]
        fn weight_scaling_invariance((rows, y, w) in system(), c in 1e-3..1e3f64) {
            let x = DesignMatrix::from_covariate_rows(&rows).unwrap();
            let Ok(a) = solve_wls(&x, &y, &w, 0.0) else { return Ok(()) };
            let scaled: Vec<f64> = w.iter().map(|v| v * c).collect();
            let b = solve_wls(&x, &y, &scaled, 0.0).unwrap();
            for (p, q) in a.0.iter().zip(&b.0) {
                prop_assert!((p - q).abs() <= 1e-10 * (1.0 + p.abs()));
            }
        }
    }
}
