//! End-to-end log analysis: from per-tick proprioceptive records to
//! per-step strength estimates and rupture verdicts.
//!
//! The pipeline sees exactly what the robot logs — joint-space estimates
//! of toe position and vertical force — and never touches simulator
//! ground truth except to label each step for scoring. Crawl steps
//! estimate the local ground plane from the three support toes; trot
//! steps fall back to a drifting touchdown-history fit.

use nalgebra::Point3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::eval::{build_report, label_step, EvalError, GaitReport, StepOutcome};
use crate::ground::{
    detect_contact, estimate_frame_from_history, estimate_frame_from_stance,
    penetration_depth_series, ToeHistoryBuffer,
};
use crate::robot::{GaitKind, LegId};
use crate::rupture::{classify_step, RuptureError};
use crate::scenario::AnalysisConfig;
use crate::sim::{StepRecord, TrialLog};
use crate::strength::{estimate_penetration_resistance, find_penetration_interval};
use crate::terrain::{TerrainError, Transect};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("terrain: {0}")]
    Terrain(#[from] TerrainError),
    #[error("rupture detector: {0}")]
    Rupture(#[from] RuptureError),
    #[error("evaluation: {0}")]
    Eval(#[from] EvalError),
    #[error("log has no ticks")]
    EmptyLog,
}

fn analysis_rng(log: &TrialLog) -> ChaCha8Rng {
    // Independent of the simulation stream, deterministic per trial.
    let mixed = log.meta.seed
        ^ (log.meta.trial_index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ 0xA076_1D64_78BD_642F;
    ChaCha8Rng::seed_from_u64(mixed)
}

fn step_series(log: &TrialLog, step: &StepRecord) -> (Vec<f64>, Vec<Point3<f64>>) {
    let i = step.leg.index();
    let window = &log.ticks[step.start_tick..step.end_tick.min(log.ticks.len())];
    let fz = window.iter().map(|t| t.legs[i].fz_est).collect();
    let toe = window.iter().map(|t| t.legs[i].toe).collect();
    (fz, toe)
}

/// Logged positions of the three non-probing toes at one tick.
fn stance_toes(log: &TrialLog, tick: usize, probing: LegId) -> [Point3<f64>; 3] {
    let mut out = [Point3::origin(); 3];
    let mut j = 0;
    for leg in LegId::ALL {
        if leg != probing {
            out[j] = log.ticks[tick].legs[leg.index()].toe;
            j += 1;
        }
    }
    out
}

/// Analyzes every step of one trial into scored outcomes.
pub fn analyze_trial(
    log: &TrialLog,
    transect: &Transect,
    cfg: &AnalysisConfig,
) -> Result<Vec<StepOutcome>, PipelineError> {
    if log.ticks.is_empty() {
        return Err(PipelineError::EmptyLog);
    }
    let dt_ms = log.meta.dt_ms as usize;
    let mut rng = analysis_rng(log);
    let mut history = ToeHistoryBuffer::new(cfg.history_capacity);
    let mut outcomes = Vec::with_capacity(log.steps.len());

    for (step_idx, step) in log.steps.iter().enumerate() {
        let (fz, toe) = step_series(log, step);
        let x = step.x.clamp(transect.x_min(), transect.x_max());
        let unit = transect.material_at(x)?;
        let label = label_step(&unit.material, step.on_tile, step.true_rupture);

        let mut k_ncm = None;
        let mut detected = false;
        let mut load_duration_ms = None;

        if let Ok(contact) = detect_contact(
            &fz,
            &toe,
            cfg.contact_force_threshold,
            cfg.contact_debounce,
        ) {
            let fz_loaded = &fz[contact.index..];
            let toe_loaded = &toe[contact.index..];

            // Contact-to-peak duration of the loading transient.
            if let Some((peak, _)) = fz_loaded
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1))
            {
                load_duration_ms = Some((peak * dt_ms) as f64);
            }

            // Ground frame: support-triangle fit for the crawl, drifting
            // touchdown history for the trot.
            let frame = match log.meta.gait {
                GaitKind::Crawl => {
                    let tick = step.start_tick + contact.index;
                    let stance = stance_toes(log, tick, step.leg);
                    estimate_frame_from_stance(&stance, contact.position)
                }
                GaitKind::Trot => estimate_frame_from_history(&history, contact.position),
            };
            if let Ok(frame) = frame {
                let depth = penetration_depth_series(&frame, toe_loaded);
                if let Ok(interval) = find_penetration_interval(
                    fz_loaded,
                    &depth,
                    cfg.band_lo,
                    cfg.band_hi,
                    cfg.fit_debounce,
                ) {
                    if let Ok(est) = estimate_penetration_resistance(
                        fz_loaded,
                        &depth,
                        interval,
                        cfg.min_fit_samples,
                    ) {
                        k_ncm = Some(est.k_ncm);
                    }
                }
            }

            // Rupture verdict on the loaded portion only; a window shorter
            // than the smoother is treated as event-free.
            detected = classify_step(fz_loaded, &cfg.detector, dt_ms)
                .map(|(flag, _)| flag)
                .unwrap_or(false);

            if log.meta.gait == GaitKind::Trot {
                history.push_drifted(contact.position, cfg.history_drift_std, &mut rng);
            }
        }

        outcomes.push(StepOutcome {
            trial: log.meta.trial_index,
            step: step_idx,
            leg: step.leg.name().to_string(),
            tu_id: step.tu_id,
            x: step.x,
            label,
            k_ncm,
            detected,
            load_duration_ms,
        });
    }
    Ok(outcomes)
}

/// Analyzes a batch of trials and aggregates them into a gait report.
pub fn analyze_batch(
    logs: &[TrialLog],
    transect: &Transect,
    cfg: &AnalysisConfig,
) -> Result<(Vec<StepOutcome>, GaitReport), PipelineError> {
    let mut outcomes = Vec::new();
    for log in logs {
        outcomes.extend(analyze_trial(log, transect, cfg)?);
    }
    let gait = logs.first().map(|l| l.meta.gait).ok_or(PipelineError::EmptyLog)?;
    let report = build_report(gait, logs.len(), &outcomes)?;
    Ok((outcomes, report))
}
