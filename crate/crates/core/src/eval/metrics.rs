use crate::error::{Error, Result};

fn check_pair(actual: &[f64], predicted: &[f64]) -> Result<()> {
    if actual.len() != predicted.len() {
        return Err(Error::Dimension(format!(
            "{} actual values but {} predictions",
            actual.len(),
            predicted.len()
        )));
    }
    if actual.is_empty() {
        return Err(Error::Input("no values to score".into()));
    }
    Ok(())
}

/// `sqrt(mean((actual - predicted)^2))`.
pub fn rmse(actual: &[f64], predicted: &[f64]) -> Result<f64> {
    check_pair(actual, predicted)?;
    let sse: f64 = actual.iter().zip(predicted).map(|(a, p)| (a - p) * (a - p)).sum();
    Ok((sse / actual.len() as f64).sqrt())
}

/// `(baseline - model) / baseline * 100`; negative when the model is worse.
pub fn improvement_pct(baseline_rmse: f64, model_rmse: f64) -> Result<f64> {
    if baseline_rmse == 0.0 {
        return Err(Error::UndefinedImprovement);
    }
    if !(baseline_rmse > 0.0 && baseline_rmse.is_finite() && model_rmse >= 0.0 && model_rmse.is_finite()) {
        return Err(Error::Parameter(format!(
            "RMSE values must be finite and nonnegative, got {baseline_rmse} and {model_rmse}"
        )));
    }
    Ok((baseline_rmse - model_rmse) / baseline_rmse * 100.0)
}

/// Coefficient of determination against the mean of `actual`.
pub fn r_squared(actual: &[f64], predicted: &[f64]) -> Result<f64> {
    check_pair(actual, predicted)?;
    let mean = actual.iter().sum::<f64>() / actual.len() as f64;
    let sst: f64 = actual.iter().map(|a| (a - mean) * (a - mean)).sum();
    let sse: f64 = actual.iter().zip(predicted).map(|(a, p)| (a - p) * (a - p)).sum();
    if sst == 0.0 {
        return Err(Error::Input("response is constant".into()));
    }
    Ok(1.0 - sse / sst)
}
