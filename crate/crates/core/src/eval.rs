//! Ground-truth labeling and detector scoring.
//!
//! Each step is labeled from the simulated truth — what the toe actually
//! touched and whether the crust actually failed — and the rupture
//! detector's verdicts are scored against those labels with a standard
//! confusion matrix. A step on a crust unit whose toe landed in a gap
//! between crust tiles touched bare substrate and is labeled as such.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::robot::GaitKind;
use crate::strength::UnitAggregate;
use crate::terrain::MaterialModel;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EvalError {
    #[error("truth and detection series differ in length: {truth} vs {detected}")]
    LengthMismatch { truth: usize, detected: usize },
    #[error("no steps to report on")]
    EmptyReport,
}

/// Ground-truth class of one step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepLabel {
    Rigid,
    Sand,
    CrustIntact,
    CrustRuptured,
}

impl StepLabel {
    pub fn name(self) -> &'static str {
        match self {
            StepLabel::Rigid => "rigid",
            StepLabel::Sand => "sand",
            StepLabel::CrustIntact => "crust-intact",
            StepLabel::CrustRuptured => "crust-ruptured",
        }
    }

    /// Whether this label is a rupture positive for detector scoring.
    pub fn is_positive(self) -> bool {
        matches!(self, StepLabel::CrustRuptured)
    }
}

/// Labels one step from the material under the toe and the simulated
/// contact outcome.
pub fn label_step(material: &MaterialModel, on_tile: bool, ruptured: bool) -> StepLabel {
    match material {
        MaterialModel::Rigid { .. } => StepLabel::Rigid,
        MaterialModel::Granular(_) => StepLabel::Sand,
        MaterialModel::CrustOnGranular { .. } => {
            if !on_tile {
                StepLabel::Sand
            } else if ruptured {
                StepLabel::CrustRuptured
            } else {
                StepLabel::CrustIntact
            }
        }
    }
}

/// Rupture-detection confusion counts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl ConfusionMatrix {
    pub fn positives(&self) -> usize {
        self.tp + self.fn_
    }

    pub fn negatives(&self) -> usize {
        self.tn + self.fp
    }

    /// TP / (TP + FN); NaN when no positives exist.
    pub fn sensitivity(&self) -> f64 {
        self.tp as f64 / self.positives() as f64
    }

    /// TN / (TN + FP); NaN when no negatives exist.
    pub fn specificity(&self) -> f64 {
        self.tn as f64 / self.negatives() as f64
    }
}

/// Scores per-step detector verdicts against truth labels.
pub fn confusion(truth: &[bool], detected: &[bool]) -> Result<ConfusionMatrix, EvalError> {
    if truth.len() != detected.len() {
        return Err(EvalError::LengthMismatch {
            truth: truth.len(),
            detected: detected.len(),
        });
    }
    let mut m = ConfusionMatrix::default();
    for (&t, &d) in truth.iter().zip(detected) {
        match (t, d) {
            (true, true) => m.tp += 1,
            (true, false) => m.fn_ += 1,
            (false, true) => m.fp += 1,
            (false, false) => m.tn += 1,
        }
    }
    Ok(m)
}

/// One analyzed step, ready for reporting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepOutcome {
    pub trial: usize,
    pub step: usize,
    pub leg: String,
    pub tu_id: usize,
    /// Toe x position of the step, m.
    pub x: f64,
    pub label: StepLabel,
    /// Strength estimate, N/cm; absent when no valid fit interval exists.
    pub k_ncm: Option<f64>,
    pub detected: bool,
    /// Contact-to-peak duration of the loading transient, ms.
    pub load_duration_ms: Option<f64>,
}

/// Aggregated per-gait evaluation report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaitReport {
    pub gait: GaitKind,
    pub n_trials: usize,
    pub n_steps: usize,
    pub unit_stats: Vec<UnitAggregate>,
    pub confusion: ConfusionMatrix,
    pub sensitivity: f64,
    pub specificity: f64,
    pub label_counts: BTreeMap<String, usize>,
}

/// Builds the per-gait report from analyzed steps.
pub fn build_report(
    gait: GaitKind,
    n_trials: usize,
    outcomes: &[StepOutcome],
) -> Result<GaitReport, EvalError> {
    if outcomes.is_empty() {
        return Err(EvalError::EmptyReport);
    }
    let truth: Vec<bool> = outcomes.iter().map(|o| o.label.is_positive()).collect();
    let detected: Vec<bool> = outcomes.iter().map(|o| o.detected).collect();
    let m = confusion(&truth, &detected)?;
    let samples: Vec<(usize, f64)> = outcomes
        .iter()
        .filter_map(|o| o.k_ncm.map(|k| (o.tu_id, k)))
        .collect();
    let unit_stats = crate::strength::aggregate_by_unit(&samples);
    let mut label_counts = BTreeMap::new();
    for o in outcomes {
        *label_counts.entry(o.label.name().to_string()).or_insert(0) += 1;
    }
    Ok(GaitReport {
        gait,
        n_trials,
        n_steps: outcomes.len(),
        unit_stats,
        sensitivity: m.sensitivity(),
        specificity: m.specificity(),
        confusion: m,
        label_counts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::terrain::Granular;
    use approx::assert_relative_eq;

    fn crust() -> MaterialModel {
        MaterialModel::CrustOnGranular {
            crust_stiffness: 800.0,
            rupture_force: 25.0,
            post_rupture_drop: 8.0,
            substrate: Granular {
                k: 680.0,
                plateau_force: 30.0,
                inertial_coeff: 25.0,
            },
        }
    }

    #[test]
    fn labels_follow_material_and_outcome() {
        let rigid = MaterialModel::Rigid { stiffness: 5e4 };
        let sand = MaterialModel::Granular(Granular {
            k: 340.0,
            plateau_force: 30.0,
            inertial_coeff: 25.0,
        });
        assert_eq!(label_step(&rigid, true, false), StepLabel::Rigid);
        assert_eq!(label_step(&sand, true, false), StepLabel::Sand);
        assert_eq!(label_step(&crust(), true, false), StepLabel::CrustIntact);
        assert_eq!(label_step(&crust(), true, true), StepLabel::CrustRuptured);
        // Toe landed in a gap between crust tiles: bare substrate.
        assert_eq!(label_step(&crust(), false, false), StepLabel::Sand);
    }

    #[test]
    fn specificity_73_negatives_3_fp() {
        let m = ConfusionMatrix {
            tp: 0,
            fp: 3,
            tn: 70,
            fn_: 0,
        };
        assert_eq!(m.negatives(), 73);
        assert_relative_eq!(m.specificity(), 70.0 / 73.0, epsilon = 1e-12);
        assert_relative_eq!(m.specificity(), 0.9589, epsilon = 1e-4);
    }

    #[test]
    fn sensitivity_11_positives_4_fn() {
        let m = ConfusionMatrix {
            tp: 7,
            fp: 0,
            tn: 0,
            fn_: 4,
        };
        assert_eq!(m.positives(), 11);
        assert_relative_eq!(m.sensitivity(), 7.0 / 11.0, epsilon = 1e-12);
        assert_relative_eq!(m.sensitivity(), 0.6364, epsilon = 1e-4);
    }

    #[test]
    fn specificity_64_negatives_56_fp() {
        let m = ConfusionMatrix {
            tp: 0,
            fp: 56,
            tn: 8,
            fn_: 0,
        };
        assert_relative_eq!(m.specificity(), 0.125, epsilon = 1e-12);
    }

    #[test]
    fn confusion_counts_and_length_mismatch() {
        let truth = [true, true, false, false, true];
        let det = [true, false, true, false, true];
        let m = confusion(&truth, &det).unwrap();
        assert_eq!((m.tp, m.fn_, m.fp, m.tn), (2, 1, 1, 1));
        assert_eq!(
            confusion(&truth, &det[..4]),
            Err(EvalError::LengthMismatch {
                truth: 5,
                detected: 4
            })
        );
    }

    #[test]
    fn report_aggregates_by_unit_and_counts_labels() {
        let mk = |tu, label, k: Option<f64>, detected| StepOutcome {
            trial: 0,
            step: 0,
            leg: "LF".into(),
            tu_id: tu,
            x: 0.0,
            label,
            k_ncm: k,
            detected,
            load_duration_ms: None,
        };
        let outcomes = vec![
            mk(1, StepLabel::Sand, Some(6.8), false),
            mk(1, StepLabel::Sand, Some(7.0), false),
            mk(2, StepLabel::Sand, Some(3.4), true),
            mk(3, StepLabel::CrustRuptured, None, true),
            mk(3, StepLabel::CrustIntact, None, false),
        ];
        let r = build_report(GaitKind::Crawl, 1, &outcomes).unwrap();
        assert_eq!(r.n_steps, 5);
        assert_eq!(r.confusion.tp, 1);
        assert_eq!(r.confusion.fp, 1);
        assert_eq!(r.confusion.tn, 3);
        assert_eq!(r.confusion.fn_, 0);
        assert_eq!(r.unit_stats.len(), 2);
        assert_relative_eq!(r.unit_stats[0].mean_k_ncm, 6.9);
        assert_eq!(r.label_counts["sand"], 3);
        assert!(build_report(GaitKind::Crawl, 1, &[]).is_err());
    }
}
