//! On-disk trial log and estimate table formats.
//!
//! Each trial produces a flat CSV of per-tick, per-leg records plus a
//! JSON sidecar carrying the trial metadata and per-step ground truth
//! that a flat row cannot encode (tile coverage misses, step windows).
//! All values are SI; floats use Rust's shortest round-trip formatting so
//! a written log reloads bit-exactly.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{Point3, Vector3};
use regosense_core::eval::{StepLabel, StepOutcome};
use regosense_core::gait::PhaseLabel;
use regosense_core::robot::LegId;
use regosense_core::sim::{LegTick, StepRecord, TickRecord, TrialLog, TrialMeta};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Column header of a trial log CSV; one row per tick per leg.
pub const LOG_HEADER: &str = "t_ms,leg,phase,q0,q1,q2,dq0,dq1,dq2,tau0,tau1,tau2,toe_x,toe_y,toe_z,fz_est,tu_id,rupture_truth";

/// Column header of the per-step estimates table.
pub const ESTIMATES_HEADER: &str =
    "trial,step,leg,tu_id,x,label,k_ncm,detected,load_duration_ms";

/// Trial metadata and ground truth that accompanies each log CSV.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrialSidecar {
    pub meta: TrialMeta,
    pub steps: Vec<StepRecord>,
    pub min_margin: f64,
}

fn parse_leg(s: &str) -> Option<LegId> {
    LegId::ALL.into_iter().find(|l| l.name() == s)
}

fn parse_label(s: &str) -> Option<StepLabel> {
    [
        StepLabel::Rigid,
        StepLabel::Sand,
        StepLabel::CrustIntact,
        StepLabel::CrustRuptured,
    ]
    .into_iter()
    .find(|l| l.name() == s)
}

/// Renders a trial log as CSV text.
pub fn trial_to_csv(log: &TrialLog) -> String {
    // Preallocate roughly: ~160 bytes per row.
    let mut out = String::with_capacity(log.ticks.len() * 4 * 160 + 64);
    out.push_str(LOG_HEADER);
    out.push('\n');
    for rec in &log.ticks {
        for leg in LegId::ALL {
            let lt = &rec.legs[leg.index()];
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                rec.t_ms,
                leg.name(),
                lt.phase.name(),
                lt.q[0],
                lt.q[1],
                lt.q[2],
                lt.dq[0],
                lt.dq[1],
                lt.dq[2],
                lt.tau[0],
                lt.tau[1],
                lt.tau[2],
                lt.toe.x,
                lt.toe.y,
                lt.toe.z,
                lt.fz_est,
                lt.tu_id,
                u8::from(lt.rupture_truth),
            );
        }
    }
    out
}

fn malformed(path: &Path, what: impl std::fmt::Display) -> CliError {
    CliError::MalformedLog(format!("{}: {what}", path.display()))
}

/// Parses a trial log CSV plus its sidecar back into a [`TrialLog`].
pub fn trial_from_csv(csv_path: &Path, sidecar_path: &Path) -> Result<TrialLog, CliError> {
    let text = std::fs::read_to_string(csv_path).map_err(|e| malformed(csv_path, e))?;
    let sidecar_text =
        std::fs::read_to_string(sidecar_path).map_err(|e| malformed(sidecar_path, e))?;
    let sidecar: TrialSidecar =
        serde_json::from_str(&sidecar_text).map_err(|e| malformed(sidecar_path, e))?;

    let mut lines = text.lines();
    if lines.next() != Some(LOG_HEADER) {
        return Err(malformed(csv_path, "missing or wrong header row"));
    }
    let mut ticks: Vec<TickRecord> = Vec::new();
    let mut pending: Vec<(LegId, LegTick)> = Vec::with_capacity(4);
    let mut pending_t: u64 = 0;
    for (lineno, line) in lines.enumerate() {
        let row = lineno + 2;
        let mut f = line.split(',');
        let mut next = |name: &str| {
            f.next()
                .ok_or_else(|| malformed(csv_path, format!("row {row}: missing field {name}")))
        };
        let t_ms: u64 = next("t_ms")?
            .parse()
            .map_err(|e| malformed(csv_path, format!("row {row}: t_ms: {e}")))?;
        let leg = parse_leg(next("leg")?)
            .ok_or_else(|| malformed(csv_path, format!("row {row}: unknown leg")))?;
        let phase = PhaseLabel::parse(next("phase")?)
            .ok_or_else(|| malformed(csv_path, format!("row {row}: unknown phase")))?;
        let mut num = |name: &str| -> Result<f64, CliError> {
            next(name)?
                .parse::<f64>()
                .map_err(|e| malformed(csv_path, format!("row {row}: {name}: {e}")))
        };
        let q = Vector3::new(num("q0")?, num("q1")?, num("q2")?);
        let dq = Vector3::new(num("dq0")?, num("dq1")?, num("dq2")?);
        let tau = Vector3::new(num("tau0")?, num("tau1")?, num("tau2")?);
        let toe = Point3::new(num("toe_x")?, num("toe_y")?, num("toe_z")?);
        let fz_est = num("fz_est")?;
        let tu_id: usize = next("tu_id")?
            .parse()
            .map_err(|e| malformed(csv_path, format!("row {row}: tu_id: {e}")))?;
        let rupture_truth = match next("rupture_truth")? {
            "0" => false,
            "1" => true,
            other => {
                return Err(malformed(
                    csv_path,
                    format!("row {row}: rupture_truth '{other}'"),
                ))
            }
        };
        if f.next().is_some() {
            return Err(malformed(csv_path, format!("row {row}: too many fields")));
        }

        if pending.is_empty() {
            pending_t = t_ms;
        } else if t_ms != pending_t {
            return Err(malformed(
                csv_path,
                format!("row {row}: tick {pending_t} has fewer than 4 leg rows"),
            ));
        }
        let expected = LegId::ALL[pending.len()];
        if leg != expected {
            return Err(malformed(
                csv_path,
                format!("row {row}: expected leg {}, got {}", expected.name(), leg.name()),
            ));
        }
        pending.push((
            leg,
            LegTick {
                q,
                dq,
                tau,
                toe,
                fz_est,
                phase,
                tu_id,
                rupture_truth,
            },
        ));
        if pending.len() == 4 {
            let mut drained = pending.drain(..);
            let legs = [
                drained.next().unwrap().1,
                drained.next().unwrap().1,
                drained.next().unwrap().1,
                drained.next().unwrap().1,
            ];
            drop(drained);
            ticks.push(TickRecord { t_ms: pending_t, legs });
        }
    }
    if !pending.is_empty() {
        return Err(malformed(csv_path, "truncated final tick"));
    }
    if ticks.is_empty() {
        return Err(malformed(csv_path, "log holds no ticks"));
    }
    for s in &sidecar.steps {
        if s.end_tick > ticks.len() || s.start_tick >= s.end_tick {
            return Err(malformed(
                sidecar_path,
                format!("step window [{}, {}) outside log", s.start_tick, s.end_tick),
            ));
        }
    }
    Ok(TrialLog {
        meta: sidecar.meta,
        ticks,
        steps: sidecar.steps,
        min_margin: sidecar.min_margin,
    })
}

fn opt_f64(s: &str, what: &str, path: &Path, row: usize) -> Result<Option<f64>, CliError> {
    if s.is_empty() {
        return Ok(None);
    }
    s.parse::<f64>()
        .map(Some)
        .map_err(|e| malformed(path, format!("row {row}: {what}: {e}")))
}

/// Renders per-step outcomes as the estimates table CSV.
pub fn estimates_to_csv(outcomes: &[StepOutcome]) -> String {
    let mut out = String::with_capacity(outcomes.len() * 64 + 64);
    out.push_str(ESTIMATES_HEADER);
    out.push('\n');
    for o in outcomes {
        let k = o.k_ncm.map(|v| v.to_string()).unwrap_or_default();
        let ms = o.load_duration_ms.map(|v| v.to_string()).unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            o.trial,
            o.step,
            o.leg,
            o.tu_id,
            o.x,
            o.label.name(),
            k,
            u8::from(o.detected),
            ms,
        );
    }
    out
}

/// Parses an estimates table back into step outcomes. Errors use the
/// mismatched-inputs class: the table is an intermediate product, so a
/// bad one means evaluate was fed inconsistent inputs.
pub fn estimates_from_csv(path: &Path) -> Result<Vec<StepOutcome>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Mismatch(format!("{}: {e}", path.display())))?;
    let mut lines = text.lines();
    if lines.next() != Some(ESTIMATES_HEADER) {
        return Err(CliError::Mismatch(format!(
            "{}: missing or wrong header row",
            path.display()
        )));
    }
    let bad = |row: usize, what: &dyn std::fmt::Display| {
        CliError::Mismatch(format!("{}: row {row}: {what}", path.display()))
    };
    let mut outcomes = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let row = lineno + 2;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 9 {
            return Err(bad(row, &format_args!("expected 9 fields, got {}", fields.len())));
        }
        outcomes.push(StepOutcome {
            trial: fields[0].parse().map_err(|e| bad(row, &e))?,
            step: fields[1].parse().map_err(|e| bad(row, &e))?,
            leg: fields[2].to_string(),
            tu_id: fields[3].parse().map_err(|e| bad(row, &e))?,
            x: fields[4].parse().map_err(|e| bad(row, &e))?,
            label: parse_label(fields[5]).ok_or_else(|| bad(row, &"unknown label"))?,
            k_ncm: opt_f64(fields[6], "k_ncm", path, row)
                .map_err(|e| CliError::Mismatch(e.to_string()))?,
            detected: match fields[7] {
                "0" => false,
                "1" => true,
                other => return Err(bad(row, &format_args!("detected '{other}'"))),
            },
            load_duration_ms: opt_f64(fields[8], "load_duration_ms", path, row)
                .map_err(|e| CliError::Mismatch(e.to_string()))?,
        });
    }
    Ok(outcomes)
}
