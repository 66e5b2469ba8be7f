//! Deterministic desk-scale quadruped simulator and analysis toolkit for
//! proprioceptive terrain sensing.
//!
//! The crate simulates a 12 kg quadruped walking over phenomenological
//! deformable terrain and estimates, purely from joint kinematics and
//! torque measurements, the terrain's penetration resistance (N/cm) and
//! the presence of brittle crust ruptures. Two gaits are modeled: a slow
//! sensing crawl that probes the ground leg by leg, and a locomotion trot
//! whose fast, impulsive stance phases degrade the same estimates.

pub mod eval;
pub mod gait;
pub mod geometry;
pub mod ground;
pub mod pipeline;
pub mod robot;
pub mod rupture;
pub mod scenario;
pub mod sim;
pub mod strength;
pub mod terrain;
