//! Crust-rupture detection from force time series.
//!
//! A brittle crust failing under a toe produces a sudden force drop. The
//! detector smooths the measured vertical force with a Savitzky–Golay
//! filter and flags every drawdown of the smoothed series — running peak
//! minus subsequent trough — that reaches a prominence threshold before
//! the force recovers.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RuptureError {
    #[error("series of {len} samples is shorter than the {window}-sample filter window")]
    SeriesTooShort { len: usize, window: usize },
    #[error("invalid detector configuration: {0}")]
    BadConfig(String),
}

/// Savitzky–Golay detector configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorConfig {
    /// Polynomial order of the smoothing filter.
    pub poly_order: usize,
    /// Nominal filter window, ms (rounded up to an odd sample count).
    pub window_ms: usize,
    /// Minimum smoothed force drop that counts as a rupture, N.
    pub prominence: f64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            poly_order: 4,
            window_ms: 60,
            prominence: 5.0,
        }
    }
}

impl DetectorConfig {
    /// Filter window in samples at `dt_ms` per sample, forced odd.
    pub fn window_samples(&self, dt_ms: usize) -> usize {
        let w = (self.window_ms / dt_ms.max(1)).max(self.poly_order + 1);
        if w % 2 == 0 {
            w + 1
        } else {
            w
        }
    }

    pub fn validate(&self, dt_ms: usize) -> Result<(), RuptureError> {
        if self.poly_order == 0 {
            return Err(RuptureError::BadConfig("poly_order must be >= 1".into()));
        }
        if self.window_samples(dt_ms) <= self.poly_order {
            return Err(RuptureError::BadConfig(
                "window must exceed the polynomial order".into(),
            ));
        }
        if self.prominence <= 0.0 {
            return Err(RuptureError::BadConfig("prominence must be > 0".into()));
        }
        Ok(())
    }
}

fn polyfit_value_at_zero(offsets: &[f64], values: &[f64], order: usize) -> f64 {
    let n = offsets.len();
    let a = DMatrix::from_fn(n, order + 1, |r, c| offsets[r].powi(c as i32));
    let y = DVector::from_column_slice(values);
    let coeffs = (a.transpose() * &a)
        .lu()
        .solve(&(a.transpose() * y))
        .expect("normal equations are invertible for distinct offsets");
    coeffs[0]
}

/// Savitzky–Golay smoothing with shrinking one-sided windows at both ends,
/// so the output has the same length as the input and stays causal-ish at
/// the edges rather than reflecting data.
pub fn savgol_smooth(
    series: &[f64],
    window: usize,
    order: usize,
) -> Result<Vec<f64>, RuptureError> {
    let n = series.len();
    if n < window {
        return Err(RuptureError::SeriesTooShort { len: n, window });
    }
    let h = window / 2;
    // Precompute central weights once; edge positions fit individually.
    let offsets: Vec<f64> = (0..window).map(|j| (j as f64 - h as f64) / h as f64).collect();
    let a = DMatrix::from_fn(window, order + 1, |r, c| offsets[r].powi(c as i32));
    let ata = a.transpose() * &a;
    let pinv_row = ata
        .lu()
        .solve(&a.transpose())
        .expect("normal equations are invertible");
    let central: Vec<f64> = pinv_row.row(0).iter().copied().collect();

    let mut out = vec![0.0; n];
    for i in 0..n {
        if i >= h && i + h < n {
            let mut acc = 0.0;
            for (j, w) in central.iter().enumerate() {
                acc += w * series[i + j - h];
            }
            out[i] = acc;
        } else {
            let lo = i.saturating_sub(h);
            let hi = (i + h + 1).min(n);
            let offs: Vec<f64> = (lo..hi).map(|j| (j as f64 - i as f64) / h as f64).collect();
            out[i] = polyfit_value_at_zero(&offs, &series[lo..hi], order.min(hi - lo - 1));
        }
    }
    Ok(out)
}

/// One detected force drop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RuptureEvent {
    /// Sample index of the smoothed-force trough.
    pub index: usize,
    /// Sample index of the preceding smoothed-force peak.
    pub peak_index: usize,
    /// Smoothed force drop from peak to trough, N.
    pub drop: f64,
    /// Steepest per-sample descent between peak and trough, N per sample.
    pub max_descent: f64,
}

/// Scans a smoothed series for drawdowns of at least `prominence`.
///
/// A drawdown is confirmed either when the series turns upward again or
/// at the end of the series; afterwards the running peak resets so that
/// post-rupture reloading can reveal further ruptures.
pub fn detect_ruptures(smoothed: &[f64], prominence: f64) -> Vec<RuptureEvent> {
    let n = smoothed.len();
    let mut events = Vec::new();
    if n < 2 {
        return events;
    }
    let mut peak = smoothed[0];
    let mut peak_i = 0usize;
    let mut trough = smoothed[0];
    let mut trough_i = 0usize;
    let mut emit = |peak: f64, peak_i: usize, trough: f64, trough_i: usize, s: &[f64]| {
        let mut max_descent = 0.0f64;
        for j in peak_i.max(1)..=trough_i {
            max_descent = max_descent.max(s[j - 1] - s[j]);
        }
        events.push(RuptureEvent {
            index: trough_i,
            peak_index: peak_i,
            drop: peak - trough,
            max_descent,
        });
    };
    for i in 1..n {
        let v = smoothed[i];
        if v < trough {
            trough = v;
            trough_i = i;
        } else if v > smoothed[i - 1] {
            // Turned upward: the pending trough is confirmed.
            if peak - trough >= prominence && trough_i > peak_i {
                emit(peak, peak_i, trough, trough_i, smoothed);
                peak = v;
                peak_i = i;
                trough = v;
                trough_i = i;
            } else if v > peak {
                // Shallow wiggle fully recovered: move the peak forward.
                peak = v;
                peak_i = i;
                trough = v;
                trough_i = i;
            }
        }
    }
    if peak - trough >= prominence && trough_i > peak_i {
        emit(peak, peak_i, trough, trough_i, smoothed);
    }
    events
}

/// Smooths one step's force series and reports `(ruptured, events)`.
pub fn classify_step(
    fz: &[f64],
    cfg: &DetectorConfig,
    dt_ms: usize,
) -> Result<(bool, Vec<RuptureEvent>), RuptureError> {
    cfg.validate(dt_ms)?;
    let window = cfg.window_samples(dt_ms);
    let smoothed = savgol_smooth(fz, window, cfg.poly_order)?;
    let events = detect_ruptures(&smoothed, cfg.prominence);
    Ok((!events.is_empty(), events))
}
