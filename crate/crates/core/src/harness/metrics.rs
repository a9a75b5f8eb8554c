use nalgebra::DVector;

use crate::error::{Error, Result};

fn check(predicted: &[DVector<f64>], actual: &[DVector<f64>]) -> Result<()> {
    if predicted.len() != actual.len() || predicted.iter().zip(actual).any(|(p, a)| p.len() != a.len()) {
        return Err(Error::ShapeError("predicted and actual sequences differ in shape".into()));
    }
    Ok(())
}

/// RMS error of one channel over the horizon, divided by the channel's range
/// in `actual`.
pub fn nrmse(predicted: &[DVector<f64>], actual: &[DVector<f64>], channel: usize) -> Result<f64> {
    check(predicted, actual)?;
    if actual.is_empty() {
        return Err(Error::InvalidInput("empty horizon".into()));
    }
    if actual.iter().any(|a| channel >= a.len()) {
        return Err(Error::ShapeError(format!("channel {channel} out of range")));
    }
    let (lo, hi) = actual
        .iter()
        .map(|a| a[channel])
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    let range = hi - lo;
    if !(range > 0.0) {
        return Err(Error::DegenerateRange);
    }
    let mse = predicted
        .iter()
        .zip(actual)
        .map(|(p, a)| (p[channel] - a[channel]).powi(2))
        .sum::<f64>()
        / actual.len() as f64;
    Ok(mse.sqrt() / range)
}

/// Mean of [`nrmse`] over channels with nonzero range; `None` when every
/// channel is constant over the horizon.
pub fn mean_nrmse(predicted: &[DVector<f64>], actual: &[DVector<f64>]) -> Result<Option<f64>> {
    check(predicted, actual)?;
    let n = actual.first().map_or(0, |a| a.len());
    let mut vals = Vec::with_capacity(n);
    for c in 0..n {
        match nrmse(predicted, actual, c) {
            Ok(v) => vals.push(v),
            Err(Error::DegenerateRange) => {}
            Err(e) => return Err(e),
        }
    }
    Ok((!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64))
}

/// Frobenius norm of the stacked horizon error.
pub fn frob_pred_error(predicted: &[DVector<f64>], actual: &[DVector<f64>]) -> Result<f64> {
    check(predicted, actual)?;
    Ok(predicted
        .iter()
        .zip(actual)
        .map(|(p, a)| (p - a).norm_squared())
        .sum::<f64>()
        .sqrt())
}
