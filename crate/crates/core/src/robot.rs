//! Kinematics and actuator model of one 3-DOF leg (abduction, hip, knee)
//! and the four-legged body, including proprioceptive force estimation
//! from joint torques.
//!
//! Conventions: the leg frame sits at the hip with x forward, y left,
//! z up. Joint vector order is `(abduction, hip, knee)`. Abduction rolls
//! about x; hip and knee pitch about y. The zero configuration points the
//! leg straight down; the knee-backward branch keeps the knee angle in
//! `[0, pi]`.

use nalgebra::{Matrix3, Point3, Vector3};
use rand::Rng as _;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RobotError {
    #[error("leg is at or near a singular configuration (condition number {0:.3e})")]
    SingularConfiguration(f64),
    #[error("target toe position is outside the reachable workspace")]
    Unreachable,
}

/// Which gait produced a torque sample; the trot's onboard controller
/// partially compensates leg inertia, the crawl does not.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GaitKind {
    Crawl,
    Trot,
}

/// Leg identifiers. Indexing follows the declaration order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LegId {
    LF,
    RF,
    LR,
    RR,
}

impl LegId {
    pub const ALL: [LegId; 4] = [LegId::LF, LegId::RF, LegId::LR, LegId::RR];

    pub fn index(self) -> usize {
        match self {
            LegId::LF => 0,
            LegId::RF => 1,
            LegId::LR => 2,
            LegId::RR => 3,
        }
    }

    pub fn from_index(i: usize) -> LegId {
        Self::ALL[i]
    }

    pub fn name(self) -> &'static str {
        match self {
            LegId::LF => "LF",
            LegId::RF => "RF",
            LegId::LR => "LR",
            LegId::RR => "RR",
        }
    }
}

/// Link lengths and hip placement of the four identical legs.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LegGeometry {
    /// Upper link length, m.
    pub upper_link: f64,
    /// Lower link length, m.
    pub lower_link: f64,
    /// Toe radius, m.
    pub toe_radius: f64,
    /// Half body length: hip x offset, m.
    pub hip_x: f64,
    /// Hip y offset from the body midline, m.
    pub hip_y: f64,
    /// Hip joint angle range, rad.
    pub hip_limit: f64,
    /// Knee joint angle range `[knee_min, knee_max]`, rad.
    pub knee_min: f64,
    pub knee_max: f64,
}

impl Default for LegGeometry {
    fn default() -> Self {
        Self {
            upper_link: 0.20,
            lower_link: 0.20,
            toe_radius: 0.02,
            hip_x: 0.275,
            hip_y: 0.10,
            hip_limit: std::f64::consts::PI,
            knee_min: 0.0,
            knee_max: std::f64::consts::PI,
        }
    }
}

impl LegGeometry {
    /// Hip position in the body frame (body origin at geometric center).
    pub fn hip_offset(&self, leg: LegId) -> Vector3<f64> {
        let (sx, sy) = match leg {
            LegId::LF => (1.0, 1.0),
            LegId::RF => (1.0, -1.0),
            LegId::LR => (-1.0, 1.0),
            LegId::RR => (-1.0, -1.0),
        };
        Vector3::new(sx * self.hip_x, sy * self.hip_y, 0.0)
    }

    pub fn max_reach(&self) -> f64 {
        self.upper_link + self.lower_link
    }
}

/// Quasi-direct-drive actuator parameters and proprioceptive error model.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ActuatorModel {
    /// Gearbox reduction on the abduction and hip actuators.
    pub gear_ratio_ab_hip: f64,
    /// Gearbox reduction on the knee actuator.
    pub gear_ratio_knee: f64,
    /// Std of additive Gaussian torque measurement noise, N·m.
    pub torque_noise_std: f64,
    /// Max magnitude of the per-leg constant torque-constant bias, fraction.
    pub torque_constant_error: f64,
    /// Coulomb joint friction, N·m.
    pub coulomb_friction: f64,
    /// Fraction of the leg inertial torque removed by the trot's momentum
    /// observer. 1.0 means perfect compensation.
    pub compensation_factor: f64,
}

impl Default for ActuatorModel {
    fn default() -> Self {
        Self {
            gear_ratio_ab_hip: 6.0,
            gear_ratio_knee: 12.0,
            torque_noise_std: 0.05,
            torque_constant_error: 0.03,
            coulomb_friction: 0.1,
            compensation_factor: 0.7,
        }
    }
}

impl ActuatorModel {
    /// A noiseless, biasless, frictionless model for calibration scenarios.
    pub fn ideal() -> Self {
        Self {
            torque_noise_std: 0.0,
            torque_constant_error: 0.0,
            coulomb_friction: 0.0,
            ..Self::default()
        }
    }

    /// Draws the per-leg torque-constant biases for one trial.
    pub fn draw_leg_biases(&self, rng: &mut ChaCha8Rng) -> [f64; 4] {
        let mut biases = [0.0; 4];
        for b in &mut biases {
            *b = if self.torque_constant_error > 0.0 {
                rng.gen_range(-self.torque_constant_error..=self.torque_constant_error)
            } else {
                0.0
            };
        }
        biases
    }
}

/// Joint-space state of one leg: angles, velocities, torques.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct LegJointState {
    pub q: Vector3<f64>,
    pub dq: Vector3<f64>,
    pub tau: Vector3<f64>,
}

/// Rigid-body state of the robot trunk. Orientation is held level; the
/// simulation is quasi-static.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BodyState {
    /// Body center (= CoM) in the world frame, m.
    pub com: Point3<f64>,
    /// Total robot mass, kg.
    pub mass: f64,
    /// Body length, m.
    pub body_length: f64,
}

impl Default for BodyState {
    fn default() -> Self {
        Self {
            com: Point3::new(0.0, 0.0, 0.24),
            mass: 12.0,
            body_length: 0.55,
        }
    }
}

/// Toe position in the leg (hip) frame for joint angles `q`.
pub fn forward_kinematics(leg: &LegGeometry, q: Vector3<f64>) -> Point3<f64> {
    let (l1, l2) = (leg.upper_link, leg.lower_link);
    let (s1, c1) = q.y.sin_cos();
    let (s12, c12) = (q.y + q.z).sin_cos();
    let px = l1 * s1 + l2 * s12;
    let pz = -(l1 * c1 + l2 * c12);
    let (sa, ca) = q.x.sin_cos();
    Point3::new(px, -pz * sa, pz * ca)
}

/// 3x3 Jacobian of the toe position with respect to `(abduction, hip, knee)`.
pub fn leg_jacobian(leg: &LegGeometry, q: Vector3<f64>) -> Matrix3<f64> {
    let (l1, l2) = (leg.upper_link, leg.lower_link);
    let (s1, c1) = q.y.sin_cos();
    let (s12, c12) = (q.y + q.z).sin_cos();
    let (sa, ca) = q.x.sin_cos();
    let pz = -(l1 * c1 + l2 * c12);
    let dpx_dhip = l1 * c1 + l2 * c12;
    let dpz_dhip = l1 * s1 + l2 * s12;
    let dpx_dknee = l2 * c12;
    let dpz_dknee = l2 * s12;
    Matrix3::new(
        0.0,
        dpx_dhip,
        dpx_dknee,
        -pz * ca,
        -dpz_dhip * sa,
        -dpz_dknee * sa,
        -pz * sa,
        dpz_dhip * ca,
        dpz_dknee * ca,
    )
}

/// Estimates the external toe force from joint torques: `F = J(q)^-T tau`.
pub fn toe_force_from_torques(
    leg: &LegGeometry,
    q: Vector3<f64>,
    tau: Vector3<f64>,
) -> Result<Vector3<f64>, RobotError> {
    let j = leg_jacobian(leg, q);
    let svd = j.svd(false, false);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let cond = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if !cond.is_finite() || cond > 1e6 {
        return Err(RobotError::SingularConfiguration(cond));
    }
    let jt = j.transpose();
    jt.lu()
        .solve(&tau)
        .ok_or(RobotError::SingularConfiguration(cond))
}

/// Joint angles reaching `target` (leg frame), knee-backward branch.
pub fn inverse_kinematics(
    leg: &LegGeometry,
    target: Point3<f64>,
) -> Result<Vector3<f64>, RobotError> {
    let (l1, l2) = (leg.upper_link, leg.lower_link);
    let r = (target.y * target.y + target.z * target.z).sqrt();
    // Abduction rolls the sagittal plane so it contains the target.
    let q_ab = if r < 1e-12 {
        0.0
    } else {
        target.y.atan2(-target.z)
    };
    let (px, pz) = (target.x, -r);
    let l_sq = px * px + pz * pz;
    let d = (l_sq - l1 * l1 - l2 * l2) / (2.0 * l1 * l2);
    if d > 1.0 + 1e-9 || d < -1.0 - 1e-9 {
        return Err(RobotError::Unreachable);
    }
    let q_knee = d.clamp(-1.0, 1.0).acos();
    let phi = px.atan2(-pz);
    let beta = (l2 * q_knee.sin()).atan2(l1 + l2 * q_knee.cos());
    let q_hip = phi - beta;
    if q_hip.abs() > leg.hip_limit + 1e-9 {
        return Err(RobotError::Unreachable);
    }
    Ok(Vector3::new(q_ab, q_hip, q_knee))
}

/// Corrupts a true joint torque into a proprioceptive measurement.
///
/// `inertial_torque` is the torque due to leg-link acceleration. In the
/// trot the onboard momentum observer removes `compensation_factor` of it;
/// the crawl carries it in full (it is negligible at crawl speeds).
/// `leg_bias` is the per-leg torque-constant bias drawn once per trial.
pub fn proprioceptive_torque(
    true_torque: Vector3<f64>,
    model: &ActuatorModel,
    inertial_torque: Vector3<f64>,
    gait: GaitKind,
    velocity: Vector3<f64>,
    leg_bias: f64,
    rng: &mut ChaCha8Rng,
) -> Vector3<f64> {
    let residual_scale = match gait {
        GaitKind::Crawl => 1.0,
        GaitKind::Trot => 1.0 - model.compensation_factor,
    };
    let mut measured = Vector3::zeros();
    for i in 0..3 {
        let friction = model.coulomb_friction * sign(velocity[i]);
        let base = true_torque[i] + friction + residual_scale * inertial_torque[i];
        let noise = if model.torque_noise_std > 0.0 {
            gaussian(rng) * model.torque_noise_std
        } else {
            0.0
        };
        measured[i] = (1.0 + leg_bias) * base + noise;
    }
    measured
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Box-Muller standard normal draw; kept local so the per-trial stream
/// stays reproducible regardless of rand's distribution internals.
pub(crate) fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;

    fn leg() -> LegGeometry {
        LegGeometry::default()
    }

    #[test]
    fn fk_fully_extended_down() {
        let toe = forward_kinematics(&leg(), Vector3::zeros());
        assert_relative_eq!(toe, Point3::new(0.0, 0.0, -0.40), epsilon = 1e-12);
    }

    #[test]
    fn fk_knee_fully_folded() {
        let toe = forward_kinematics(&leg(), Vector3::new(0.0, 0.4, std::f64::consts::PI));
        assert_relative_eq!(toe.coords.norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn fk_planar_two_link_oracle() {
        // Hand trigonometry for q = (0, 45deg, 90deg).
        let q = Vector3::new(0.0, 45f64.to_radians(), 90f64.to_radians());
        let toe = forward_kinematics(&leg(), q);
        let (l1, l2) = (0.2, 0.2);
        let px = l1 * 45f64.to_radians().sin() + l2 * 135f64.to_radians().sin();
        let pz = -(l1 * 45f64.to_radians().cos() + l2 * 135f64.to_radians().cos());
        assert_relative_eq!(toe, Point3::new(px, 0.0, pz), epsilon = 1e-12);
        assert_relative_eq!(toe.x, 2.0 * 0.2 * 45f64.to_radians().sin(), epsilon = 1e-12);
        assert_relative_eq!(toe.z, 0.0, epsilon = 1e-12);
    }

    fn finite_difference_jacobian(q: Vector3<f64>) -> Matrix3<f64> {
        let h = 1e-7;
        let mut j = Matrix3::zeros();
        for col in 0..3 {
            let mut qp = q;
            let mut qm = q;
            qp[col] += h;
            qm[col] -= h;
            let d = (forward_kinematics(&leg(), qp) - forward_kinematics(&leg(), qm)) / (2.0 * h);
            j.set_column(col, &d);
        }
        j
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let q = Vector3::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.5..1.5),
                rng.gen_range(0.2..2.8),
            );
            let j = leg_jacobian(&leg(), q);
            let fd = finite_difference_jacobian(q);
            let scale = j.norm().max(1.0);
            assert!(
                (j - fd).norm() / scale < 1e-6,
                "q = {q:?}, err = {}",
                (j - fd).norm()
            );
        }
    }

    #[test]
    fn jacobian_singular_when_fully_extended() {
        let j = leg_jacobian(&leg(), Vector3::zeros());
        let rank = j.svd(false, false).rank(1e-9);
        assert_eq!(rank, 2);
    }

    #[test]
    fn jacobian_column_norms_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let q = Vector3::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.5..1.5),
                rng.gen_range(0.0..3.0),
            );
            let j = leg_jacobian(&leg(), q);
            for col in 0..3 {
                assert!(j.column(col).norm() <= leg().max_reach() + 1e-9);
            }
        }
    }

    #[test]
    fn toe_force_round_trip() {
        let q = Vector3::new(0.1, 0.4, 1.2);
        let f = Vector3::new(0.0, 0.0, -30.0);
        let tau = leg_jacobian(&leg(), q).transpose() * f;
        let est = toe_force_from_torques(&leg(), q, tau).unwrap();
        assert_relative_eq!(est, f, epsilon = 1e-9);
        let zero = toe_force_from_torques(&leg(), q, Vector3::zeros()).unwrap();
        assert_relative_eq!(zero.norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn knee_torque_statics_oracle() {
        // Upper link straight down, knee bent 90deg: lower link horizontal.
        // A vertical 10 N toe force acts on a 0.20 m moment arm at the knee.
        let q = Vector3::new(0.0, 0.0, 90f64.to_radians());
        let f = Vector3::new(0.0, 0.0, 10.0);
        let tau = leg_jacobian(&leg(), q).transpose() * f;
        assert_relative_eq!(tau.z.abs(), 2.0, epsilon = 1e-9);
    }

    #[test]
    fn toe_force_singular_rejected() {
        let err = toe_force_from_torques(&leg(), Vector3::zeros(), Vector3::new(0.0, 1.0, 0.0));
        assert!(matches!(err, Err(RobotError::SingularConfiguration(_))));
    }

    #[test]
    fn ik_round_trips_fk() {
        let q = Vector3::new(0.2, -0.3, 1.1);
        let toe = forward_kinematics(&leg(), q);
        let q_ik = inverse_kinematics(&leg(), toe).unwrap();
        assert_relative_eq!(q_ik, q, epsilon = 1e-9);
        let toe2 = forward_kinematics(&leg(), q_ik);
        assert!((toe2 - toe).norm() < 1e-6);
    }

    #[test]
    fn ik_fully_extended_and_unreachable() {
        let q = inverse_kinematics(&leg(), Point3::new(0.0, 0.0, -0.40)).unwrap();
        assert_relative_eq!(q, Vector3::zeros(), epsilon = 1e-6);
        assert_eq!(
            inverse_kinematics(&leg(), Point3::new(0.0, 0.0, -0.45)),
            Err(RobotError::Unreachable)
        );
    }

    #[test]
    fn proprioception_clean_crawl_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let model = ActuatorModel::ideal();
        let tau = Vector3::new(0.5, -1.0, 2.0);
        let m = proprioceptive_torque(
            tau,
            &model,
            Vector3::zeros(),
            GaitKind::Crawl,
            Vector3::zeros(),
            0.0,
            &mut rng,
        );
        assert_eq!(m, tau);
    }

    #[test]
    fn proprioception_is_deterministic() {
        let model = ActuatorModel::default();
        let run = || {
            let mut rng = ChaCha8Rng::seed_from_u64(99);
            (0..32)
                .map(|_| {
                    proprioceptive_torque(
                        Vector3::new(1.0, 2.0, 3.0),
                        &model,
                        Vector3::new(0.1, 0.1, 0.1),
                        GaitKind::Trot,
                        Vector3::new(0.5, -0.5, 0.0),
                        0.01,
                        &mut rng,
                    )
                })
                .collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn full_compensation_removes_trot_inertial_term() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let model = ActuatorModel {
            compensation_factor: 1.0,
            ..ActuatorModel::ideal()
        };
        let tau = Vector3::new(0.5, 0.5, 0.5);
        let m = proprioceptive_torque(
            tau,
            &model,
            Vector3::new(5.0, 5.0, 5.0),
            GaitKind::Trot,
            Vector3::zeros(),
            0.0,
            &mut rng,
        );
        assert_relative_eq!(m, tau, epsilon = 1e-12);
    }

    #[test]
    fn proprioceptive_noise_is_zero_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(1234);
        let model = ActuatorModel {
            coulomb_friction: 0.0,
            torque_constant_error: 0.0,
            ..ActuatorModel::default()
        };
        let tau = Vector3::new(1.0, 1.0, 1.0);
        let n = 10_000;
        let mut sum = Vector3::zeros();
        for _ in 0..n {
            sum += proprioceptive_torque(
                tau,
                &model,
                Vector3::zeros(),
                GaitKind::Crawl,
                Vector3::zeros(),
                0.0,
                &mut rng,
            );
        }
        let mean = sum / n as f64;
        let bound = 3.0 * model.torque_noise_std / (n as f64).sqrt();
        for i in 0..3 {
            assert!((mean[i] - tau[i]).abs() < bound, "axis {i}: {}", mean[i]);
        }
    }

    proptest! {
        #[test]
        fn force_round_trip_away_from_singularity(
            qa in -0.8..0.8f64, qh in -1.2..1.2f64, qk in 0.3..2.6f64,
            fx in -50.0..50.0f64, fy in -50.0..50.0f64, fz in -80.0..80.0f64,
        ) {
            let q = Vector3::new(qa, qh, qk);
            let f = Vector3::new(fx, fy, fz);
            let j = leg_jacobian(&leg(), q);
            let svd = j.svd(false, false);
            let cond = svd.singular_values.max() / svd.singular_values.min();
            prop_assume!(cond < 1e6);
            let tau = j.transpose() * f;
            let est = toe_force_from_torques(&leg(), q, tau).unwrap();
            prop_assert!((est - f).norm() < 1e-6 * (1.0 + f.norm()));
        }
    }
}
