//! Phenomenological reaction-force models for rigid ground, homogeneous
//! granular media, and crust-over-sand, arranged along a 1-D transect.
//!
//! All quantities are SI internally (N, m, N/m). Human-facing reports
//! convert penetration resistance to N/cm.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Conversion factor: penetration resistance N/cm -> N/m.
pub const NCM_TO_NM: f64 = 100.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TerrainError {
    #[error("position {0} m is outside the transect")]
    OutOfTransect(f64),
    #[error("malformed transect spec: {0}")]
    MalformedSpec(String),
}

/// Homogeneous granular material parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Granular {
    /// Penetration resistance, N/m (slope of force vs depth).
    pub k: f64,
    /// Yield force at which the medium solidifies, N.
    pub plateau_force: f64,
    /// Quadratic impact-speed drag coefficient, N·s²/m².
    pub inertial_coeff: f64,
}

/// Reaction-force law of one terrain unit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum MaterialModel {
    /// Stiff spring proxy for wood/rock.
    Rigid { stiffness: f64 },
    Granular(Granular),
    /// Brittle stiff layer over loose granular substrate.
    CrustOnGranular {
        /// Intact crust stiffness, N/m.
        crust_stiffness: f64,
        /// Nominal binding force at which the crust fails, N.
        rupture_force: f64,
        /// Instantaneous force loss at rupture, N.
        post_rupture_drop: f64,
        substrate: Granular,
    },
}

impl MaterialModel {
    pub fn is_rigid(&self) -> bool {
        matches!(self, MaterialModel::Rigid { .. })
    }

    pub fn is_crust(&self) -> bool {
        matches!(self, MaterialModel::CrustOnGranular { .. })
    }

    /// Quasi-static sinkage under a sustained load (used to settle stance
    /// toes). Solidified granular supports any load without further sinkage.
    pub fn settle_depth(&self, load: f64) -> f64 {
        match self {
            MaterialModel::Rigid { stiffness } => load / stiffness,
            MaterialModel::Granular(g) => load.min(g.plateau_force) / g.k,
            MaterialModel::CrustOnGranular {
                crust_stiffness, ..
            } => load / crust_stiffness,
        }
    }
}

/// Per-step, per-leg contact history for hysteretic material response.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContactState {
    /// Deepest penetration reached so far, m.
    pub max_depth: f64,
    /// Whether a crust layer has failed during this step.
    pub ruptured: bool,
    /// Depth at which rupture occurred, m.
    pub rupture_depth: f64,
    /// Actual binding force used for this step (nominal plus jitter), N.
    pub rupture_force: f64,
    /// Whether the granular medium has solidified under this toe.
    pub solidified: bool,
}

impl ContactState {
    pub fn new(material: &MaterialModel) -> Self {
        let rupture_force = match material {
            MaterialModel::CrustOnGranular { rupture_force, .. } => *rupture_force,
            _ => f64::INFINITY,
        };
        Self {
            max_depth: 0.0,
            ruptured: false,
            rupture_depth: 0.0,
            rupture_force,
            solidified: false,
        }
    }

    /// Overrides the binding force for this step (per-tile jitter).
    pub fn with_rupture_force(mut self, f: f64) -> Self {
        self.rupture_force = f;
        self
    }
}

fn granular_force(g: &Granular, depth: f64, velocity: f64, state: &mut ContactState) -> f64 {
    if velocity < 0.0 {
        // Granular media do not pull back on a retracting toe.
        return 0.0;
    }
    if depth < state.max_depth - 1e-12 {
        // Re-entering an already formed crater: no resistance until the
        // toe reaches the previous frontier.
        return 0.0;
    }
    let static_part = (g.k * depth).min(g.plateau_force);
    if g.k * depth >= g.plateau_force {
        state.solidified = true;
    }
    static_part + g.inertial_coeff * velocity * velocity
}

/// Vertical reaction force on a toe at `depth` (m, positive below surface)
/// moving with `velocity` (m/s, downward positive). Updates the contact
/// history in place.
pub fn reaction_force(
    material: &MaterialModel,
    depth: f64,
    velocity: f64,
    state: &mut ContactState,
) -> f64 {
    if depth <= 0.0 {
        return 0.0;
    }
    let prev_max = state.max_depth;
    state.max_depth = state.max_depth.max(depth);
    match material {
        MaterialModel::Rigid { stiffness } => stiffness * depth,
        MaterialModel::Granular(g) => {
            let mut s = *state;
            s.max_depth = prev_max;
            let f = granular_force(g, depth, velocity, &mut s);
            state.solidified = s.solidified;
            f
        }
        MaterialModel::CrustOnGranular {
            crust_stiffness,
            post_rupture_drop,
            substrate,
            ..
        } => {
            if !state.ruptured {
                let f_static = crust_stiffness * depth;
                if f_static >= state.rupture_force {
                    // Brittle failure: the load drops instantly, then the
                    // loose substrate takes over, re-zeroed at this depth.
                    state.ruptured = true;
                    state.rupture_depth = depth;
                    return (state.rupture_force - post_rupture_drop).max(0.0);
                }
                f_static + substrate.inertial_coeff * velocity * velocity
            } else {
                if velocity < 0.0 {
                    return 0.0;
                }
                let base = (state.rupture_force - post_rupture_drop).max(0.0);
                let sub_depth = (depth - state.rupture_depth).max(0.0);
                let sub_frontier = (prev_max - state.rupture_depth).max(0.0);
                if sub_depth < sub_frontier - 1e-12 {
                    return 0.0;
                }
                let static_part = (substrate.k * sub_depth).min(substrate.plateau_force);
                if substrate.k * sub_depth >= substrate.plateau_force {
                    state.solidified = true;
                }
                base + static_part + substrate.inertial_coeff * velocity * velocity
            }
        }
    }
}

/// One contiguous transect segment with a single prepared substrate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TerrainUnit {
    /// 1-based unit id, in transect order.
    pub id: usize,
    pub x_start: f64,
    pub x_end: f64,
    pub material: MaterialModel,
}

/// Ordered 1-D sequence of terrain units along the direction of travel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transect {
    pub units: Vec<TerrainUnit>,
    /// Width of the linear compaction blend at unit boundaries, m.
    /// 0 gives piecewise-constant resistance.
    pub blend_width: f64,
}

impl Transect {
    /// Validates contiguity and builds the transect.
    pub fn build(units: Vec<TerrainUnit>, blend_width: f64) -> Result<Self, TerrainError> {
        if units.is_empty() {
            return Err(TerrainError::MalformedSpec("no terrain units".into()));
        }
        for u in &units {
            if u.x_end <= u.x_start {
                return Err(TerrainError::MalformedSpec(format!(
                    "unit {} has non-positive span",
                    u.id
                )));
            }
        }
        for w in units.windows(2) {
            let gap = w[1].x_start - w[0].x_end;
            if gap.abs() > 1e-9 {
                return Err(TerrainError::MalformedSpec(format!(
                    "units {} and {} are not contiguous ({} m apart)",
                    w[0].id, w[1].id, gap
                )));
            }
        }
        Ok(Self { units, blend_width })
    }

    pub fn x_min(&self) -> f64 {
        self.units.first().map(|u| u.x_start).unwrap_or(0.0)
    }

    pub fn x_max(&self) -> f64 {
        self.units.last().map(|u| u.x_end).unwrap_or(0.0)
    }

    /// The unique unit covering `x`; an exact boundary belongs to the
    /// right-hand unit.
    pub fn material_at(&self, x: f64) -> Result<&TerrainUnit, TerrainError> {
        if x < self.x_min() || x > self.x_max() {
            return Err(TerrainError::OutOfTransect(x));
        }
        for u in &self.units {
            if x >= u.x_start && x < u.x_end {
                return Ok(u);
            }
        }
        // x == x_max exactly.
        Ok(self.units.last().unwrap())
    }

    /// Material at `x` with the optional compaction blend applied: within
    /// `blend_width` of a granular-granular boundary, `k` ramps linearly
    /// between the two units.
    pub fn effective_material_at(&self, x: f64) -> Result<(usize, MaterialModel), TerrainError> {
        let unit = self.material_at(x)?;
        let mut material = unit.material;
        if self.blend_width > 0.0 {
            if let MaterialModel::Granular(g) = &mut material {
                let half = self.blend_width / 2.0;
                let idx = unit.id - 1;
                // Left boundary.
                if idx > 0 && x - unit.x_start < half {
                    if let MaterialModel::Granular(prev) = &self.units[idx - 1].material {
                        let t = 0.5 + (x - unit.x_start) / self.blend_width;
                        g.k = prev.k + t * (g.k - prev.k);
                    }
                } else if idx + 1 < self.units.len() && unit.x_end - x < half {
                    if let MaterialModel::Granular(next) = &self.units[idx + 1].material {
                        let t = 0.5 + (unit.x_end - x) / self.blend_width;
                        g.k = next.k + t * (g.k - next.k);
                    }
                }
            }
        }
        Ok((unit.id, material))
    }
}

fn sand(k_ncm: f64) -> MaterialModel {
    MaterialModel::Granular(Granular {
        k: k_ncm * NCM_TO_NM,
        plateau_force: 30.0,
        inertial_coeff: 25.0,
    })
}

fn rigid() -> MaterialModel {
    MaterialModel::Rigid { stiffness: 5.0e4 }
}

fn units_from(spans: &[(f64, MaterialModel)]) -> Vec<TerrainUnit> {
    let mut x = 0.0;
    spans
        .iter()
        .enumerate()
        .map(|(i, (len, m))| {
            let u = TerrainUnit {
                id: i + 1,
                x_start: x,
                x_end: x + len,
                material: *m,
            };
            x += len;
            u
        })
        .collect()
}

/// Named transect presets.
///
/// - `exp1-compaction`: three damp-sand units at medium (6.8 N/cm), low
///   (3.4 N/cm), and high (21.3 N/cm) compaction.
/// - `exp2-crust`: rigid boards with one crust-on-sand unit in the middle.
/// - `mt-hood-transect`: six granular units rising from 5 to 110 N/cm.
pub fn preset(name: &str, blend_width: f64) -> Result<Transect, TerrainError> {
    let spans: Vec<(f64, MaterialModel)> = match name {
        "exp1-compaction" => vec![(0.7, sand(6.8)), (0.3, sand(3.4)), (0.6, sand(21.3))],
        "exp2-crust" => vec![
            (0.7, rigid()),
            (0.3, rigid()),
            (
                0.3,
                MaterialModel::CrustOnGranular {
                    crust_stiffness: 8.0 * NCM_TO_NM,
                    rupture_force: 25.0,
                    post_rupture_drop: 8.0,
                    substrate: Granular {
                        k: 6.8 * NCM_TO_NM,
                        plateau_force: 30.0,
                        inertial_coeff: 25.0,
                    },
                },
            ),
            (0.3, rigid()),
            (0.5, rigid()),
        ],
        "mt-hood-transect" => vec![
            (0.7, sand(5.0)),
            (0.3, sand(12.0)),
            (0.3, sand(30.0)),
            (0.3, sand(55.0)),
            (0.3, sand(80.0)),
            (0.5, sand(110.0)),
        ],
        other => {
            return Err(TerrainError::MalformedSpec(format!(
                "unknown preset '{other}'"
            )))
        }
    };
    Transect::build(units_from(&spans), blend_width)
}
