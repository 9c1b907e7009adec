use std::ops::Range;

use crate::error::{Error, Result};

/// An ordered series of finite values (episode returns or fitness).
#[derive(Clone, Debug, PartialEq)]
pub struct MetricsSeries(Vec<f64>);

impl MetricsSeries {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("entry {i} is not finite")));
        }
        Ok(MetricsSeries(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Trailing mean over `window` entries; the first entries average over
/// everything seen so far.
pub fn sliding_window_avg(series: &MetricsSeries, window: usize) -> Result<MetricsSeries> {
    if window == 0 {
        return Err(Error::invalid("window must be at least 1"));
    }
    let v = series.values();
    if v.is_empty() {
        return Err(Error::invalid("cannot smooth an empty series"));
    }
    let mut out = Vec::with_capacity(v.len());
    let mut sum = 0.0;
    for k in 0..v.len() {
        sum += v[k];
        if k >= window {
            sum -= v[k - window];
        }
        let n = (k + 1).min(window);
        out.push(sum / n as f64);
    }
    Ok(MetricsSeries(out))
}

#[derive(Clone, Debug, PartialEq)]
pub struct PhaseStats {
    pub label: String,
    pub mean: f64,
    /// Population variance.
    pub variance: f64,
    /// `std / mean`, `None` when the mean is zero.
    pub cv: Option<f64>,
}

pub fn phase_stats(series: &MetricsSeries, range: Range<usize>, label: &str) -> Result<PhaseStats> {
    if range.start >= range.end || range.end > series.len() {
        return Err(Error::invalid(format!(
            "range {range:?} outside series of length {}",
            series.len()
        )));
    }
    let v = &series.values()[range];
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let variance = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let cv = (mean != 0.0).then(|| variance.sqrt() / mean);
    Ok(PhaseStats {
        label: label.to_string(),
        mean,
        variance,
        cv,
    })
}

/// The first and last thirds of `len` entries, each at least one entry long.
pub fn early_late_ranges(len: usize) -> (Range<usize>, Range<usize>) {
    let third = (len / 3).max(1).min(len);
    (0..third, len - third..len)
}
