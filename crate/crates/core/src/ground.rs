//! Ground-frame estimation from toe positions.
//!
//! The crawl estimates the local surface plane from the three stance toes
//! at the moment the probing toe first touches down; the trot has no such
//! luxury and fits a plane to a short, drifting history of recent
//! touchdown locations. In both cases the frame origin is snapped to the
//! probing toe's first-contact point so that depth starts at exactly zero.

use nalgebra::{Point3, Vector3};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::geometry::{
    apply_contact_correction, fit_plane_least_squares, fit_plane_three_points, signed_depth,
    GeometryError, GroundFrame,
};
use crate::robot::gaussian;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GroundError {
    #[error("no sustained contact found in the force series")]
    NoContact,
    #[error("toe history holds {have} positions, need at least {need}")]
    InsufficientHistory { have: usize, need: usize },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// First sustained contact of a probing toe.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContactEvent {
    /// Index into the force/position series where contact begins.
    pub index: usize,
    /// Toe position at that sample.
    pub position: Point3<f64>,
}

/// Finds the first sample where the vertical force stays at or above
/// `threshold` for `debounce` consecutive samples.
pub fn detect_contact(
    fz: &[f64],
    toe: &[Point3<f64>],
    threshold: f64,
    debounce: usize,
) -> Result<ContactEvent, GroundError> {
    let debounce = debounce.max(1);
    let mut run = 0usize;
    for (i, &f) in fz.iter().enumerate() {
        if f >= threshold {
            run += 1;
            if run == debounce {
                let start = i + 1 - debounce;
                return Ok(ContactEvent {
                    index: start,
                    position: toe[start],
                });
            }
        } else {
            run = 0;
        }
    }
    Err(GroundError::NoContact)
}

/// Crawl-style frame estimate: exact plane through the three stance toes,
/// origin corrected to the probing toe's contact point.
pub fn estimate_frame_from_stance(
    stance: &[Point3<f64>; 3],
    contact: Point3<f64>,
) -> Result<GroundFrame, GroundError> {
    let frame = fit_plane_three_points(stance[0], stance[1], stance[2])?;
    Ok(apply_contact_correction(frame, contact))
}

/// Rolling buffer of recent touchdown positions used by the trot's frame
/// estimator. Positions are integrated from odometry on the real robot,
/// so each insertion accumulates a random-walk drift error.
#[derive(Debug, Clone)]
pub struct ToeHistoryBuffer {
    capacity: usize,
    entries: Vec<Point3<f64>>,
    drift: Vector3<f64>,
}

impl ToeHistoryBuffer {
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity: capacity.max(3),
            entries: Vec::new(),
            drift: Vector3::zeros(),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn points(&self) -> &[Point3<f64>] {
        &self.entries
    }

    /// Inserts a touchdown position without drift (calibration use).
    pub fn push(&mut self, p: Point3<f64>) {
        if self.entries.len() == self.capacity {
            self.entries.remove(0);
        }
        self.entries.push(p);
    }

    /// Inserts a touchdown position through the drifting odometry model:
    /// the accumulated random walk grows by `N(0, drift_std)` per axis at
    /// every insertion and offsets the stored position.
    pub fn push_drifted(&mut self, p: Point3<f64>, drift_std: f64, rng: &mut ChaCha8Rng) {
        self.drift += Vector3::new(
            gaussian(rng) * drift_std,
            gaussian(rng) * drift_std,
            gaussian(rng) * drift_std,
        );
        self.push(p + self.drift);
    }
}

/// Trot-style frame estimate: total-least-squares plane through the
/// buffered touchdown history plus the current contact, origin corrected
/// to the contact point.
pub fn estimate_frame_from_history(
    buffer: &ToeHistoryBuffer,
    contact: Point3<f64>,
) -> Result<GroundFrame, GroundError> {
    if buffer.len() < 3 {
        return Err(GroundError::InsufficientHistory {
            have: buffer.len(),
            need: 3,
        });
    }
    let mut pts: Vec<Point3<f64>> = buffer.points().to_vec();
    pts.push(contact);
    let frame = fit_plane_least_squares(&pts)?;
    Ok(apply_contact_correction(frame, contact))
}

/// Perpendicular penetration depth of each toe sample below the frame.
pub fn penetration_depth_series(frame: &GroundFrame, toe: &[Point3<f64>]) -> Vec<f64> {
    toe.iter().map(|p| signed_depth(frame, *p)).collect()
}
