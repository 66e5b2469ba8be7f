//! Penetration-resistance estimation.
//!
//! The terrain strength index `k` is the slope of the force–depth curve
//! inside a fixed force band (by default 15–30 N), fitted by ordinary
//! least squares and reported in N/cm. The band avoids both the noisy
//! low-force touchdown transient and post-plateau solidification.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::terrain::NCM_TO_NM;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StrengthError {
    #[error("force never sustains the fit band")]
    IntervalNotFound,
    #[error("fit interval holds {have} samples, need at least {need}")]
    TooFewSamples { have: usize, need: usize },
}

/// Half-open sample range `[start, end)` of the force-band fit interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PenetrationInterval {
    pub start: usize,
    pub end: usize,
}

impl PenetrationInterval {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }
}

/// Smoothing window for the plateau-onset trim, samples.
const PLATEAU_MEAN_WINDOW: usize = 15;
/// Force margin below the interval maximum that marks plateau onset, N.
const PLATEAU_MARGIN: f64 = 0.6;

/// Finds the force-band interval of one penetration.
///
/// The interval opens at the first sample whose force stays in
/// `[band_lo, band_hi)` for `debounce` consecutive samples. It closes at
/// the first sample that reaches `band_hi` (that sample is included as
/// the plateau onset), drops below `band_lo` for `debounce` consecutive
/// samples, or shows depth decreasing for `debounce` consecutive samples
/// (unloading).
///
/// A sensor that under-reads can plateau just below `band_hi`, so the
/// probe keeps sinking while the force stays flat inside the band; those
/// samples carry no slope information and would drag the fit toward
/// zero. The interval is therefore trimmed back to where the smoothed
/// force first comes within [`PLATEAU_MARGIN`] of its maximum over the
/// interval.
pub fn find_penetration_interval(
    fz: &[f64],
    depth: &[f64],
    band_lo: f64,
    band_hi: f64,
    debounce: usize,
) -> Result<PenetrationInterval, StrengthError> {
    let n = fz.len().min(depth.len());
    let debounce = debounce.max(1);
    let mut start = None;
    let mut run = 0usize;
    for i in 0..n {
        if fz[i] >= band_lo && fz[i] < band_hi {
            run += 1;
            if run == debounce {
                start = Some(i + 1 - debounce);
                break;
            }
        } else {
            run = 0;
        }
    }
    let start = start.ok_or(StrengthError::IntervalNotFound)?;

    let mut below = 0usize;
    let mut receding = 0usize;
    let mut end = n;
    for i in start..n {
        if fz[i] >= band_hi {
            // Include the plateau-onset sample itself.
            end = i + 1;
            break;
        }
        below = if fz[i] < band_lo { below + 1 } else { 0 };
        receding = if i > start && depth[i] < depth[i - 1] {
            receding + 1
        } else {
            0
        };
        if below >= debounce || receding >= debounce {
            end = i + 1 - debounce;
            break;
        }
    }
    Ok(trim_plateau(fz, PenetrationInterval { start, end }))
}

/// Cuts the flat tail of a force trace that saturated inside the band.
fn trim_plateau(fz: &[f64], interval: PenetrationInterval) -> PenetrationInterval {
    let PenetrationInterval { start, end } = interval;
    if interval.is_empty() {
        return interval;
    }
    // Trailing mean over a short window tames per-sample sensor noise.
    let mut smoothed = Vec::with_capacity(end - start);
    let mut acc = 0.0;
    for i in start..end {
        acc += fz[i];
        if i - start >= PLATEAU_MEAN_WINDOW {
            acc -= fz[i - PLATEAU_MEAN_WINDOW];
        }
        let w = (i - start + 1).min(PLATEAU_MEAN_WINDOW);
        smoothed.push(acc / w as f64);
    }
    let max = smoothed.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let onset = smoothed
        .iter()
        .position(|&m| m >= max - PLATEAU_MARGIN)
        .unwrap_or(smoothed.len() - 1);
    PenetrationInterval {
        start,
        end: start + onset + 1,
    }
}

/// One fitted penetration-resistance estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenetrationEstimate {
    /// Force–depth slope, N/m.
    pub slope: f64,
    /// Strength index: the slope expressed in N/cm.
    pub k_ncm: f64,
    /// Fit intercept, N.
    pub intercept: f64,
    /// Coefficient of determination of the fit.
    pub r_squared: f64,
    /// Number of samples in the fit.
    pub n_samples: usize,
    /// Depth traversed inside the fit interval, m.
    pub depth_span: f64,
}

/// Ordinary-least-squares fit of force against depth over `interval`.
pub fn estimate_penetration_resistance(
    fz: &[f64],
    depth: &[f64],
    interval: PenetrationInterval,
    min_samples: usize,
) -> Result<PenetrationEstimate, StrengthError> {
    let n = interval.len();
    if n < min_samples.max(2) {
        return Err(StrengthError::TooFewSamples {
            have: n,
            need: min_samples.max(2),
        });
    }
    let d = &depth[interval.start..interval.end];
    let f = &fz[interval.start..interval.end];
    let nf = n as f64;
    let mean_d = d.iter().sum::<f64>() / nf;
    let mean_f = f.iter().sum::<f64>() / nf;
    let mut sdd = 0.0;
    let mut sdf = 0.0;
    let mut sff = 0.0;
    for i in 0..n {
        let dd = d[i] - mean_d;
        let df = f[i] - mean_f;
        sdd += dd * dd;
        sdf += dd * df;
        sff += df * df;
    }
    if sdd <= 0.0 {
        return Err(StrengthError::IntervalNotFound);
    }
    let slope = sdf / sdd;
    let intercept = mean_f - slope * mean_d;
    let r_squared = if sff > 0.0 {
        (sdf * sdf) / (sdd * sff)
    } else {
        1.0
    };
    let depth_span = d
        .iter()
        .fold(f64::NEG_INFINITY, |a, &b| a.max(b))
        - d.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    Ok(PenetrationEstimate {
        slope,
        k_ncm: slope / NCM_TO_NM,
        intercept,
        r_squared,
        n_samples: n,
        depth_span,
    })
}

/// Per-terrain-unit aggregate of strength estimates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitAggregate {
    pub tu_id: usize,
    pub mean_k_ncm: f64,
    /// Sample standard deviation; 0 when only one estimate exists.
    pub std_k_ncm: f64,
    pub n: usize,
}

/// Groups `(tu_id, k)` samples by terrain unit, ordered by unit id.
pub fn aggregate_by_unit(samples: &[(usize, f64)]) -> Vec<UnitAggregate> {
    use std::collections::BTreeMap;
    let mut groups: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for &(tu, k) in samples {
        groups.entry(tu).or_default().push(k);
    }
    groups
        .into_iter()
        .map(|(tu_id, ks)| {
            let n = ks.len();
            let mean = ks.iter().sum::<f64>() / n as f64;
            let std = if n > 1 {
                (ks.iter().map(|k| (k - mean) * (k - mean)).sum::<f64>() / (n as f64 - 1.0))
                    .sqrt()
            } else {
                0.0
            };
            UnitAggregate {
                tu_id,
                mean_k_ncm: mean,
                std_k_ncm: std,
                n,
            }
        })
        .collect()
}
