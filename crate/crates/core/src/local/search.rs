//! Leave-one-out bandwidth selection and the linear search over the blend
//! ratio.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::fit::{LocalFit, TrainingContext};
use crate::data::ObservationTable;
use crate::distance::{DistanceMatrix, DistanceSpec, Normalization};
use crate::error::{Error, Result};

/// Number of log-spaced candidates in an automatic bandwidth grid.
pub const AUTO_GRID_SIZE: usize = 20;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", content = "values", rename_all = "kebab-case")]
pub enum BandwidthGrid {
    /// Log-spaced between the 1st percentile and the maximum of the
    /// off-diagonal blended training distances.
    #[default]
    Auto,
    Explicit(Vec<f64>),
}

/// How the bandwidth is chosen for each candidate ratio.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "kebab-case")]
pub enum BandwidthStrategy {
    /// Re-select the bandwidth by cross-validation for every ratio.
    Joint(BandwidthGrid),
    Fixed(f64),
}

impl Default for BandwidthStrategy {
    fn default() -> Self {
        BandwidthStrategy::Joint(BandwidthGrid::Auto)
    }
}

/// Score used to compare ratios.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RateScoring {
    #[default]
    LeaveOneOut,
    /// RMSE of the fitted values on the training records. Tiny bandwidths
    /// win under this score.
    InSample,
}

impl RateScoring {
    fn criterion(self) -> &'static str {
        match self {
            RateScoring::LeaveOneOut => "loo-rmse",
            RateScoring::InSample => "in-sample-rmse",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchCandidate {
    pub value: f64,
    /// `None` when no valid fit exists for this candidate.
    pub score: Option<f64>,
    /// Bandwidth used when the candidate is a ratio.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bandwidth: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperSearchTrace {
    /// `bandwidth` or `rate`.
    pub parameter: String,
    pub criterion: String,
    pub candidates: Vec<SearchCandidate>,
    pub selected: f64,
    pub selected_score: f64,
}

impl HyperSearchTrace {
    pub fn score_at(&self, value: f64) -> Option<f64> {
        self.candidates
            .iter()
            .find(|c| c.value == value)
            .and_then(|c| c.score)
    }
}

/// `0, 0.01, ..., 1`, built from integers so 1 is exact.
pub fn default_rate_grid() -> Vec<f64> {
    (0..=100).map(|i| i as f64 / 100.0).collect()
}

/// Linear-interpolation percentile of a sorted slice, `q` in `[0, 1]`.
fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Automatic bandwidth grid for a square training distance matrix.
pub fn auto_bandwidth_grid(d: &DistanceMatrix) -> Result<Vec<f64>> {
    let mut off = d.upper_triangle();
    off.sort_by(f64::total_cmp);
    let max = off.last().copied().unwrap_or(0.0);
    if !(max > 0.0) {
        return Err(Error::SearchFailed("all training distances are zero".into()));
    }
    let mut lo = percentile(&off, 0.01);
    if !(lo > 0.0) {
        // Duplicate locations: start from the smallest positive distance.
        lo = off.iter().copied().find(|x| *x > 0.0).unwrap_or(max);
    }
    if lo >= max {
        return Ok(vec![max]);
    }
    let (a, b) = (lo.ln(), max.ln());
    let last = AUTO_GRID_SIZE - 1;
    Ok((0..AUTO_GRID_SIZE)
        .map(|k| match k {
            0 => lo,
            k if k == last => max,
            k => (a + (b - a) * k as f64 / last as f64).exp(),
        })
        .collect())
}

fn check_grid(grid: &[f64], what: &str) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::Parameter(format!("{what} grid is empty")));
    }
    Ok(())
}

/// Pick the candidate with the smallest score. `prefer_later` resolves ties
/// toward the later candidate instead of the first.
fn select(candidates: &[SearchCandidate], prefer_later: bool) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (k, c) in candidates.iter().enumerate() {
        let Some(s) = c.score else { continue };
        let better = match best {
            None => true,
            Some((_, b)) if prefer_later => s <= b,
            Some((_, b)) => s < b,
        };
        if better {
            best = Some((k, s));
        }
    }
    best
}

impl TrainingContext {
    /// Leave-one-out bandwidth selection at ratio `rate`.
    pub fn select_bandwidth(&self, rate: f64, grid: &BandwidthGrid) -> Result<(f64, HyperSearchTrace)> {
        let d = self.distances(rate);
        self.select_bandwidth_for(&d, grid)
    }

    fn select_bandwidth_for(&self, d: &DistanceMatrix, grid: &BandwidthGrid) -> Result<(f64, HyperSearchTrace)> {
        let values = match grid {
            BandwidthGrid::Auto => auto_bandwidth_grid(d)?,
            BandwidthGrid::Explicit(v) => {
                check_grid(v, "bandwidth")?;
                if let Some(bad) = v.iter().find(|h| !(**h > 0.0 && h.is_finite())) {
                    return Err(Error::Parameter(format!("bandwidth candidate {bad} is not positive")));
                }
                v.clone()
            }
        };
        let candidates: Vec<SearchCandidate> = values
            .iter()
            .map(|&h| match self.loo_rmse(d, h) {
                Ok(s) => SearchCandidate {
                    value: h,
                    score: Some(s),
                    bandwidth: None,
                    failure: None,
                },
                Err(e) => SearchCandidate {
                    value: h,
                    score: None,
                    bandwidth: None,
                    failure: Some(e.to_string()),
                },
            })
            .collect();
        let (k, score) = select(&candidates, false).ok_or_else(|| {
            Error::SearchFailed(format!(
                "no bandwidth candidate produced a valid fit; first failure: {}",
                candidates[0].failure.as_deref().unwrap_or("unknown")
            ))
        })?;
        Ok((
            values[k],
            HyperSearchTrace {
                parameter: "bandwidth".into(),
                criterion: "loo-rmse".into(),
                candidates,
                selected: values[k],
                selected_score: score,
            },
        ))
    }

    fn score_rate(&self, rate: f64, strategy: &BandwidthStrategy, scoring: RateScoring) -> Result<(f64, f64, Option<HyperSearchTrace>)> {
        let d = self.distances(rate);
        let (h, loo, trace) = match strategy {
            BandwidthStrategy::Joint(grid) => {
                let (h, trace) = self.select_bandwidth_for(&d, grid)?;
                (h, Some(trace.selected_score), Some(trace))
            }
            BandwidthStrategy::Fixed(h) => (*h, None, None),
        };
        let score = match (scoring, loo) {
            (RateScoring::LeaveOneOut, Some(s)) => s,
            (RateScoring::LeaveOneOut, None) => self.loo_rmse(&d, h)?,
            (RateScoring::InSample, _) => self.in_sample_rmse(&d, h)?,
        };
        Ok((h, score, trace))
    }

    /// Linear search over `rates`; ties go to the larger ratio.
    pub fn select_rate(&self, rates: &[f64], strategy: &BandwidthStrategy, scoring: RateScoring) -> Result<RateSelection> {
        check_grid(rates, "ratio")?;
        if let Some(bad) = rates.iter().find(|r| !(0.0..=1.0).contains(*r)) {
            return Err(Error::Parameter(format!("ratio candidate {bad} is outside [0, 1]")));
        }
        if rates.iter().any(|r| *r < 1.0) && self.spec().attribute_columns.is_empty() {
            return Err(Error::Parameter("ratio search needs attribute columns".into()));
        }
        let scored: Vec<_> = rates
            .par_iter()
            .map(|&r| match self.score_rate(r, strategy, scoring) {
                Ok((h, s, trace)) => (
                    SearchCandidate {
                        value: r,
                        score: Some(s),
                        bandwidth: Some(h),
                        failure: None,
                    },
                    trace,
                ),
                Err(e) => (
                    SearchCandidate {
                        value: r,
                        score: None,
                        bandwidth: None,
                        failure: Some(e.to_string()),
                    },
                    None,
                ),
            })
            .collect();
        let (candidates, mut traces): (Vec<_>, Vec<_>) = scored.into_iter().unzip();
        let (k, score) = select(&candidates, true).ok_or_else(|| {
            Error::SearchFailed(format!(
                "no ratio candidate produced a valid fit; first failure: {}",
                candidates[0].failure.as_deref().unwrap_or("unknown")
            ))
        })?;
        let bandwidth = candidates[k].bandwidth.expect("scored candidates carry a bandwidth");
        Ok(RateSelection {
            rate: rates[k],
            bandwidth,
            trace: HyperSearchTrace {
                parameter: "rate".into(),
                criterion: scoring.criterion().into(),
                candidates,
                selected: rates[k],
                selected_score: score,
            },
            bandwidth_trace: traces.swap_remove(k),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateSelection {
    pub rate: f64,
    pub bandwidth: f64,
    pub trace: HyperSearchTrace,
    /// Bandwidth search at the selected ratio (joint strategy only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bandwidth_trace: Option<HyperSearchTrace>,
}

pub fn select_bandwidth(
    table: &ObservationTable,
    spec: &DistanceSpec,
    grid: &BandwidthGrid,
) -> Result<(f64, HyperSearchTrace)> {
    TrainingContext::new(table, spec)?.select_bandwidth(spec.rate, grid)
}

pub fn select_rate(
    table: &ObservationTable,
    attribute_columns: &[String],
    strategy: &BandwidthStrategy,
    rates: &[f64],
    scoring: RateScoring,
) -> Result<RateSelection> {
    let spec = DistanceSpec {
        rate: 1.0,
        attribute_columns: attribute_columns.to_vec(),
        normalization: Normalization::MaxScale,
    };
    TrainingContext::new(table, &spec)?.select_rate(rates, strategy, scoring)
}

/// Search the ratio and refit at the selection.
pub fn fit_searched(
    ctx: &TrainingContext,
    rates: &[f64],
    strategy: &BandwidthStrategy,
    scoring: RateScoring,
) -> Result<(LocalFit, RateSelection)> {
    let sel = ctx.select_rate(rates, strategy, scoring)?;
    let fit = ctx.fit(sel.rate, sel.bandwidth)?;
    Ok((fit, sel))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distance::{Coordinate, PairwiseMatrix};

    fn cand(value: f64, score: Option<f64>) -> SearchCandidate {
        SearchCandidate {
            value,
            score,
            bandwidth: None,
            failure: None,
        }
    }

    #[test]
    fn rate_grid_is_exact() {
        let g = default_rate_grid();
        assert_eq!(g.len(), 101);
        assert_eq!(g[0], 0.0);
        assert_eq!(g[100], 1.0);
        assert_eq!(g[16], 0.16);
    }

    #[test]
    fn tie_rules() {
        let c = [cand(0.1, Some(2.0)), cand(0.2, Some(1.0)), cand(0.3, Some(1.0)), cand(0.4, None)];
        assert_eq!(select(&c, false), Some((1, 1.0)));
        assert_eq!(select(&c, true), Some((2, 1.0)));
        assert_eq!(select(&[cand(1.0, None)], true), None);
    }

    #[test]
    fn auto_grid_spans_percentile_to_max() {
        let n = 30;
        let pts: Vec<Coordinate> = (0..n).map(|i| Coordinate::new(i as f64, (i * i % 7) as f64)).collect();
        let d = crate::distance::geographic_distances(&pts, &pts).unwrap();
        let grid = auto_bandwidth_grid(&d).unwrap();
        assert_eq!(grid.len(), AUTO_GRID_SIZE);
        assert_eq!(*grid.last().unwrap(), d.max());
        assert!(grid.windows(2).all(|w| w[0] < w[1]));
        let ratios: Vec<f64> = grid.windows(2).map(|w| w[1] / w[0]).collect();
        for r in &ratios {
            assert!((r - ratios[0]).abs() < 1e-9);
        }
    }

    #[test]
    fn auto_grid_rejects_zero_distances() {
        let d = PairwiseMatrix::from_vec(2, 2, vec![0.0; 4]).unwrap();
        assert_eq!(auto_bandwidth_grid(&d).unwrap_err().kind(), "search-failed");
    }

    #[test]
    fn percentile_interpolates() {
        assert_eq!(percentile(&[0.0, 10.0], 0.25), 2.5);
        assert_eq!(percentile(&[3.0], 0.01), 3.0);
    }
}
