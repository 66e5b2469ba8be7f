//! Trial scenario configuration.
//!
//! A [`Scenario`] bundles everything one seeded batch of trials needs:
//! gait selection and parameters, terrain, actuator error model, and the
//! analysis settings applied to the resulting logs. Scenarios serialize
//! to TOML for the command-line front end; the named constructors are the
//! calibrated configurations used by the built-in experiments.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gait::{CrawlParams, TrotParams};
use crate::robot::{ActuatorModel, GaitKind, LegGeometry};
use crate::rupture::DetectorConfig;
use crate::terrain::{preset, TerrainError, TerrainUnit, Transect};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScenarioError {
    #[error("terrain: {0}")]
    Terrain(#[from] TerrainError),
    #[error("invalid scenario: {0}")]
    Invalid(String),
}

/// Terrain selection: either a named preset or explicit units.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TerrainSpec {
    /// Preset name; ignored when `units` is non-empty.
    pub preset: Option<String>,
    pub units: Vec<TerrainUnit>,
    /// Compaction blend width at granular boundaries, m.
    pub blend_width: f64,
}

impl Default for TerrainSpec {
    fn default() -> Self {
        Self {
            preset: Some("exp1-compaction".into()),
            units: Vec::new(),
            blend_width: 0.0,
        }
    }
}

impl TerrainSpec {
    pub fn build(&self) -> Result<Transect, TerrainError> {
        if !self.units.is_empty() {
            return Transect::build(self.units.clone(), self.blend_width);
        }
        match &self.preset {
            Some(name) => preset(name, self.blend_width),
            None => Err(TerrainError::MalformedSpec(
                "neither preset nor units given".into(),
            )),
        }
    }
}

/// Crust tile layout and failure variability.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CrustSpec {
    /// Probability that a toe on a crust unit lands on a tile rather than
    /// in a gap between tiles.
    pub coverage: f64,
    /// Std of the per-step Gaussian jitter on the binding force, N.
    pub rupture_force_jitter_std: f64,
}

impl Default for CrustSpec {
    fn default() -> Self {
        Self {
            coverage: 0.85,
            rupture_force_jitter_std: 3.0,
        }
    }
}

/// Settings for the log-analysis pipeline.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    /// Vertical force that counts as toe contact, N.
    pub contact_force_threshold: f64,
    /// Consecutive samples above threshold required for contact.
    pub contact_debounce: usize,
    /// Force-band bounds of the strength fit, N.
    pub band_lo: f64,
    pub band_hi: f64,
    /// Consecutive-sample debounce for band entry/exit.
    pub fit_debounce: usize,
    /// Minimum samples for a valid strength fit.
    pub min_fit_samples: usize,
    pub detector: DetectorConfig,
    /// Touchdown history buffer size for trot ground estimation.
    pub history_capacity: usize,
    /// Odometry random-walk std per touchdown, m.
    pub history_drift_std: f64,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            contact_force_threshold: 5.0,
            contact_debounce: 5,
            band_lo: 15.0,
            band_hi: 30.0,
            fit_debounce: 3,
            min_fit_samples: 10,
            detector: DetectorConfig::default(),
            history_capacity: 6,
            history_drift_std: 0.002,
        }
    }
}

impl AnalysisConfig {
    /// Trot loading transients cross the fit band in a handful of
    /// milliseconds, so the trot pipeline cannot afford the crawl's
    /// debounce and sample minimums.
    pub fn for_trot() -> Self {
        Self {
            fit_debounce: 1,
            min_fit_samples: 2,
            ..Self::default()
        }
    }
}

/// Complete configuration of one seeded batch of trials.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub gait: GaitKind,
    pub seed: u64,
    /// Number of trials in a batch.
    pub trials: usize,
    /// Trial length in gait strides.
    pub strides: u32,
    /// Body start position along the transect, m.
    pub start_x: f64,
    pub terrain: TerrainSpec,
    pub crawl: CrawlParams,
    pub trot: TrotParams,
    pub actuator: ActuatorModel,
    pub leg_geometry: LegGeometry,
    /// Total robot mass, kg.
    pub mass: f64,
    /// Effective mass of one leg's links for inertial torque, kg.
    pub leg_link_mass: f64,
    pub crust: CrustSpec,
    pub analysis: AnalysisConfig,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            name: "exp1-crawl".into(),
            gait: GaitKind::Crawl,
            seed: 1,
            trials: 4,
            strides: 8,
            start_x: 0.30,
            terrain: TerrainSpec::default(),
            crawl: CrawlParams::default(),
            trot: TrotParams::default(),
            actuator: ActuatorModel::default(),
            leg_geometry: LegGeometry::default(),
            mass: 12.0,
            leg_link_mass: 0.6,
            crust: CrustSpec::default(),
            analysis: AnalysisConfig::default(),
        }
    }
}

impl Scenario {
    /// Experiment 1 analogue: sensing crawl over the three-unit
    /// compaction transect.
    pub fn exp1_crawl() -> Self {
        Self::default()
    }

    /// Experiment 1 analogue: locomotion trot over the same transect.
    pub fn exp1_trot() -> Self {
        Self {
            name: "exp1-trot".into(),
            gait: GaitKind::Trot,
            strides: 9,
            analysis: AnalysisConfig::for_trot(),
            ..Self::default()
        }
    }

    /// Experiment 2 analogue: sensing crawl over boards with a buried
    /// crust unit.
    pub fn exp2_crawl() -> Self {
        Self {
            name: "exp2-crawl".into(),
            strides: 12,
            terrain: TerrainSpec {
                preset: Some("exp2-crust".into()),
                ..TerrainSpec::default()
            },
            ..Self::default()
        }
    }

    /// Experiment 2 analogue: locomotion trot over the crust transect.
    pub fn exp2_trot() -> Self {
        Self {
            name: "exp2-trot".into(),
            gait: GaitKind::Trot,
            strides: 13,
            terrain: TerrainSpec {
                preset: Some("exp2-crust".into()),
                ..TerrainSpec::default()
            },
            analysis: AnalysisConfig::for_trot(),
            ..Self::default()
        }
    }

    /// Zero-noise single-unit calibration scenario for a given strength.
    /// Homogeneous footing keeps the stance plane parallel to the surface,
    /// so the recovered slope is free of cross-unit tilt bias.
    pub fn calibration(k_ncm: f64) -> Self {
        use crate::terrain::{Granular, MaterialModel, NCM_TO_NM};
        let unit = TerrainUnit {
            id: 1,
            x_start: 0.0,
            x_end: 2.0,
            material: MaterialModel::Granular(Granular {
                k: k_ncm * NCM_TO_NM,
                plateau_force: 30.0,
                inertial_coeff: 25.0,
            }),
        };
        Self {
            name: format!("calibration-{k_ncm}"),
            trials: 1,
            strides: 3,
            terrain: TerrainSpec {
                preset: None,
                units: vec![unit],
                blend_width: 0.0,
            },
            actuator: ActuatorModel::ideal(),
            ..Self::default()
        }
    }

    pub fn stride_period(&self) -> f64 {
        match self.gait {
            GaitKind::Crawl => self.crawl.stride_period(),
            GaitKind::Trot => self.trot.stride_period(),
        }
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.trials == 0 || self.strides == 0 {
            return Err(ScenarioError::Invalid(
                "trials and strides must be positive".into(),
            ));
        }
        if self.mass <= 0.0 || self.leg_link_mass < 0.0 {
            return Err(ScenarioError::Invalid("masses must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.crust.coverage) {
            return Err(ScenarioError::Invalid(
                "crust coverage must lie in [0, 1]".into(),
            ));
        }
        let c = &self.crawl;
        if c.transition_duration + c.recirculation_duration + c.penetration_budget
            > c.slot_duration()
        {
            return Err(ScenarioError::Invalid(
                "crawl phases exceed the slot duration".into(),
            ));
        }
        self.analysis
            .detector
            .validate(1)
            .map_err(|e| ScenarioError::Invalid(e.to_string()))?;
        let transect = self.terrain.build()?;
        if self.start_x <= transect.x_min() || self.start_x >= transect.x_max() {
            return Err(ScenarioError::Invalid(format!(
                "start_x {} outside transect [{}, {}]",
                self.start_x,
                transect.x_min(),
                transect.x_max()
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn built_in_scenarios_validate() {
        for sc in [
            Scenario::exp1_crawl(),
            Scenario::exp1_trot(),
            Scenario::exp2_crawl(),
            Scenario::exp2_trot(),
            Scenario::calibration(6.8),
            Scenario::calibration(3.4),
            Scenario::calibration(21.3),
        ] {
            sc.validate().unwrap_or_else(|e| panic!("{}: {e}", sc.name));
        }
    }

    #[test]
    fn toml_round_trip() {
        let sc = Scenario::exp2_trot();
        let text = toml::to_string_pretty(&sc).unwrap();
        let back: Scenario = toml::from_str(&text).unwrap();
        assert_eq!(back.name, sc.name);
        assert_eq!(back.seed, sc.seed);
        assert_eq!(back.strides, sc.strides);
    }

    #[test]
    fn unknown_fields_rejected() {
        let r: Result<Scenario, _> = toml::from_str("unknown_knob = 3\n");
        assert!(r.is_err());
    }

    #[test]
    fn bad_scenarios_rejected() {
        let mut sc = Scenario::default();
        sc.trials = 0;
        assert!(sc.validate().is_err());

        let mut sc = Scenario::default();
        sc.crust.coverage = 1.5;
        assert!(sc.validate().is_err());

        let mut sc = Scenario::default();
        sc.start_x = 5.0;
        assert!(sc.validate().is_err());

        let mut sc = Scenario::default();
        sc.crawl.penetration_budget = 10.0;
        assert!(sc.validate().is_err());
    }
}
