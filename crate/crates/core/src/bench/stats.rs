//! Order statistics over repetition times.

use serde::{Deserialize, Serialize};

use crate::error::{FftError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub median: f64,
    pub min: f64,
    pub max: f64,
}

/// Median, with the mean of the two central values for an even count.
pub fn median(values: &[f64]) -> Result<f64> {
    Ok(summarize(values)?.median)
}

pub fn summarize(values: &[f64]) -> Result<Summary> {
    if values.is_empty() {
        return Err(FftError::Config("statistics of zero repetitions".into()));
    }
    if let Some(bad) = values.iter().find(|v| v.is_nan()) {
        return Err(FftError::Config(format!("repetition time {bad} is not a number")));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let median = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    };
    Ok(Summary {
        median,
        min: sorted[0],
        max: sorted[n - 1],
    })
}
