//! Toe trajectory generation and phase scheduling for the two gaits.
//!
//! The crawl steps one leg at a time: the body first shifts its CoM over
//! the support triangle of the three remaining legs (transition), the
//! stepping leg then recirculates to its next foothold and probes
//! vertically downward at constant speed (penetration), and the slot is
//! padded with a support phase so a full stride takes exactly
//! `1/stride_frequency`. The trot alternates diagonal pairs at a fixed
//! cadence; stance-toe ground interaction is integrated by the simulator.

use nalgebra::{Point2, Point3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::robot::{LegGeometry, LegId};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GaitError {
    #[error("commanded CoM target cannot reach the required stability margin")]
    UnstablePlan,
    #[error("support polygon needs at least 3 contacts, got {0}")]
    TooFewContacts(usize),
}

/// Per-leg, per-tick phase label recorded in trial logs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PhaseLabel {
    Penetration,
    Support,
    Transition,
    Recirculation,
    Stance,
    Swing,
}

impl PhaseLabel {
    pub fn name(self) -> &'static str {
        match self {
            PhaseLabel::Penetration => "penetration",
            PhaseLabel::Support => "support",
            PhaseLabel::Transition => "transition",
            PhaseLabel::Recirculation => "recirculation",
            PhaseLabel::Stance => "stance",
            PhaseLabel::Swing => "swing",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "penetration" => PhaseLabel::Penetration,
            "support" => PhaseLabel::Support,
            "transition" => PhaseLabel::Transition,
            "recirculation" => PhaseLabel::Recirculation,
            "stance" => PhaseLabel::Stance,
            "swing" => PhaseLabel::Swing,
            _ => return None,
        })
    }
}

/// Sensing-oriented crawl parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CrawlParams {
    /// Stride-wise gait frequency, Hz (one stride = all four legs step).
    pub stride_frequency: f64,
    /// Forward advance of each foothold per stride, m.
    pub step_length: f64,
    /// Constant downward probing speed, m/s.
    pub penetration_speed: f64,
    /// Body (hip) height above the nominal surface, m.
    pub body_height: f64,
    /// Force at which a penetration ends, N.
    pub max_penetration_force: f64,
    /// Depth at which a penetration ends regardless of force, m.
    pub max_penetration_depth: f64,
    /// CoM shift duration at the start of each slot, s.
    pub transition_duration: f64,
    /// Swing duration of the stepping leg, s.
    pub recirculation_duration: f64,
    /// Time budget for the probing descent, s.
    pub penetration_budget: f64,
    /// Recirculation apex height above the chord, m.
    pub swing_apex: f64,
    /// Hover height above the nominal surface where penetration starts, m.
    pub hover_height: f64,
    /// Lateral toe offset outward from the hip, m.
    pub stance_lateral_offset: f64,
    /// CoM margin the transition aims for inside the next triangle, m.
    pub margin_target: f64,
    /// Minimum acceptable stability margin, m.
    pub stability_margin_min: f64,
}

impl Default for CrawlParams {
    fn default() -> Self {
        Self {
            stride_frequency: 0.05,
            step_length: 0.105,
            penetration_speed: 0.08,
            body_height: 0.24,
            max_penetration_force: 30.0,
            max_penetration_depth: 0.11,
            transition_duration: 1.2,
            recirculation_duration: 0.7,
            penetration_budget: 1.8,
            swing_apex: 0.06,
            hover_height: 0.02,
            stance_lateral_offset: 0.05,
            margin_target: 0.05,
            stability_margin_min: 0.02,
        }
    }
}

impl CrawlParams {
    pub fn stride_period(&self) -> f64 {
        1.0 / self.stride_frequency
    }

    pub fn slot_duration(&self) -> f64 {
        self.stride_period() / 4.0
    }
}

/// Locomotion-oriented trot parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrotParams {
    /// Stride frequency, Hz; the controller accepts `[1, 4]`.
    pub stride_frequency: f64,
    /// Downward toe speed at touchdown, m/s.
    pub touchdown_speed: f64,
    /// Fraction of the stride each pair spends in stance.
    pub duty_factor: f64,
    /// Forward advance per stride, m.
    pub step_length: f64,
    /// Body height above the nominal surface, m.
    pub body_height: f64,
    /// Amplitude of body oscillation injected on logged toe height, m.
    pub body_oscillation_amp: f64,
    /// Effective mass behind one stance toe in the impact model, kg.
    pub impact_mass: f64,
    /// Depth clamp for a stance toe, m.
    pub max_penetration_depth: f64,
    /// Lateral toe offset outward from the hip, m.
    pub stance_lateral_offset: f64,
}

impl Default for TrotParams {
    fn default() -> Self {
        Self {
            stride_frequency: 2.0,
            touchdown_speed: 1.0,
            duty_factor: 0.5,
            step_length: 0.10,
            body_height: 0.24,
            body_oscillation_amp: 0.005,
            impact_mass: 5.0,
            max_penetration_depth: 0.12,
            stance_lateral_offset: 0.05,
        }
    }
}

impl TrotParams {
    /// Parameters with the stride frequency and duty factor clamped to the
    /// controller's accepted ranges.
    pub fn clamped(&self) -> TrotParams {
        TrotParams {
            stride_frequency: self.stride_frequency.clamp(1.0, 4.0),
            duty_factor: self.duty_factor.clamp(0.25, 0.5),
            ..self.clone()
        }
    }

    pub fn stride_period(&self) -> f64 {
        1.0 / self.clamped().stride_frequency
    }
}

/// How the simulator should move one toe this tick.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LegMode {
    /// Track a commanded world-frame toe position (kinematic swing).
    Track(Point3<f64>),
    /// Hold the current contact position.
    Hold,
    /// Crawl probing: descend vertically at the given speed.
    Descend { speed: f64 },
    /// Trot stance: integrate impact dynamics; `touchdown_speed` applies
    /// when the toe enters stance this tick.
    Dynamic { touchdown_speed: f64 },
}

#[derive(Debug, Clone, Copy)]
pub struct LegPlan {
    pub mode: LegMode,
    pub phase: PhaseLabel,
}

/// One tick of gait output: CoM target plus per-leg plans.
#[derive(Debug, Clone)]
pub struct TickCommand {
    pub body_com: Point3<f64>,
    pub legs: [LegPlan; 4],
}

/// Measured state fed back into the gait engine each tick.
#[derive(Debug, Clone)]
pub struct Feedback {
    pub toe_world: [Point3<f64>; 4],
    pub fz: [f64; 4],
}

/// Convex hull (CCW) of the horizontal projections of stance toes.
pub fn support_polygon(points: &[Point3<f64>]) -> Result<Vec<Point2<f64>>, GaitError> {
    if points.len() < 3 {
        return Err(GaitError::TooFewContacts(points.len()));
    }
    let mut pts: Vec<Point2<f64>> = points.iter().map(|p| Point2::new(p.x, p.y)).collect();
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    let cross = |o: &Point2<f64>, a: &Point2<f64>, b: &Point2<f64>| {
        (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
    };
    let chain = |iter: &mut dyn Iterator<Item = &Point2<f64>>| {
        let mut hull: Vec<Point2<f64>> = Vec::new();
        for p in iter {
            while hull.len() >= 2 && cross(&hull[hull.len() - 2], &hull[hull.len() - 1], p) <= 0.0
            {
                hull.pop();
            }
            hull.push(*p);
        }
        hull.pop();
        hull
    };
    let mut hull = chain(&mut pts.iter());
    hull.extend(chain(&mut pts.iter().rev()));
    if hull.len() < 3 {
        return Err(GaitError::TooFewContacts(points.len()));
    }
    Ok(hull)
}

/// Signed distance (m) of the horizontal CoM projection to the polygon
/// boundary: positive strictly inside, negative outside.
pub fn com_margin(com: Point2<f64>, polygon: &[Point2<f64>]) -> f64 {
    let mut margin = f64::INFINITY;
    let n = polygon.len();
    for i in 0..n {
        let a = polygon[i];
        let b = polygon[(i + 1) % n];
        let edge = b - a;
        let len = edge.norm();
        if len < 1e-12 {
            continue;
        }
        let d = (edge.x * (com.y - a.y) - edge.y * (com.x - a.x)) / len;
        margin = margin.min(d);
    }
    margin
}

fn incenter(a: Point2<f64>, b: Point2<f64>, c: Point2<f64>) -> (Point2<f64>, f64) {
    let la = (b - c).norm();
    let lb = (a - c).norm();
    let lc = (a - b).norm();
    let s = la + lb + lc;
    let center = Point2::from((la * a.coords + lb * b.coords + lc * c.coords) / s);
    let area = 0.5 * ((b - a).x * (c - a).y - (b - a).y * (c - a).x).abs();
    (center, 2.0 * area / s)
}

fn cycloid_progress(s: f64) -> f64 {
    s - (std::f64::consts::TAU * s).sin() / std::f64::consts::TAU
}

const CRAWL_ORDER: [LegId; 4] = [LegId::LF, LegId::RR, LegId::RF, LegId::LR];

#[derive(Debug, Clone, Copy, PartialEq)]
enum SlotPhase {
    Transition,
    Recirculation,
    Penetration,
    Support,
}

/// Crawl gait state machine.
pub struct CrawlEngine {
    params: CrawlParams,
    geometry: LegGeometry,
    slot_tick: u64,
    step_in_stride: usize,
    strides_done: u32,
    phase: SlotPhase,
    body: Point2<f64>,
    body_from: Point2<f64>,
    body_to: Point2<f64>,
    nominal_x: f64,
    lift_start: Point3<f64>,
    foothold: Point3<f64>,
    pen_elapsed: f64,
    slot_ready: bool,
}

impl CrawlEngine {
    pub fn new(params: CrawlParams, geometry: LegGeometry, start_x: f64) -> Self {
        Self {
            params,
            geometry,
            slot_tick: 0,
            step_in_stride: 0,
            strides_done: 0,
            phase: SlotPhase::Transition,
            body: Point2::new(start_x, 0.0),
            body_from: Point2::new(start_x, 0.0),
            body_to: Point2::new(start_x, 0.0),
            nominal_x: start_x,
            lift_start: Point3::origin(),
            foothold: Point3::origin(),
            pen_elapsed: 0.0,
            slot_ready: false,
        }
    }

    pub fn stepping_leg(&self) -> LegId {
        CRAWL_ORDER[self.step_in_stride]
    }

    pub fn strides_done(&self) -> u32 {
        self.strides_done
    }

    /// World x of the foothold the next slot will command for `leg`.
    pub fn next_foothold_x(&self, toe_x: f64) -> f64 {
        toe_x + self.params.step_length
    }

    /// Nominal home y of a toe (hip line plus outward lateral offset).
    fn home_y(&self, leg: LegId) -> f64 {
        let hip = self.geometry.hip_offset(leg);
        hip.y + hip.y.signum() * self.params.stance_lateral_offset
    }

    fn setup_slot(&mut self, feedback: &Feedback) -> Result<(), GaitError> {
        let leg = self.stepping_leg();
        let others: Vec<Point2<f64>> = LegId::ALL
            .iter()
            .filter(|l| **l != leg)
            .map(|l| {
                let p = feedback.toe_world[l.index()];
                Point2::new(p.x, p.y)
            })
            .collect();
        let (center, inradius) = incenter(others[0], others[1], others[2]);
        if inradius < self.params.stability_margin_min {
            return Err(GaitError::UnstablePlan);
        }
        let tri = [others[0], others[1], others[2]];
        let margin_at = |p: Point2<f64>| {
            let poly = support_polygon(&[
                Point3::new(tri[0].x, tri[0].y, 0.0),
                Point3::new(tri[1].x, tri[1].y, 0.0),
                Point3::new(tri[2].x, tri[2].y, 0.0),
            ])
            .expect("non-degenerate triangle");
            com_margin(p, &poly)
        };
        self.nominal_x += self.params.step_length / 4.0;
        let nominal = Point2::new(self.nominal_x, 0.0);
        let target = self.params.margin_target.min(inradius * 0.9);
        let mut lo = 0.0;
        let mut hi = 1.0;
        let body_to = if margin_at(nominal) >= target {
            nominal
        } else {
            for _ in 0..48 {
                let mid = 0.5 * (lo + hi);
                let p = Point2::from(nominal.coords + mid * (center - nominal));
                if margin_at(p) >= target {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            Point2::from(nominal.coords + hi * (center - nominal))
        };
        if margin_at(body_to) <= 0.0 {
            return Err(GaitError::UnstablePlan);
        }
        self.body_from = self.body;
        self.body_to = body_to;
        let toe = feedback.toe_world[leg.index()];
        self.foothold = Point3::new(
            toe.x + self.params.step_length,
            self.home_y(leg),
            self.params.hover_height,
        );
        self.lift_start = toe;
        self.pen_elapsed = 0.0;
        self.phase = SlotPhase::Transition;
        self.slot_ready = true;
        Ok(())
    }

    /// Advances the state machine by `dt` and returns this tick's command.
    pub fn advance(&mut self, feedback: &Feedback, dt: f64) -> Result<TickCommand, GaitError> {
        if !self.slot_ready {
            self.setup_slot(feedback)?;
        }
        let p = &self.params;
        let leg = self.stepping_leg();
        let t_tr = p.transition_duration;
        let t_rc = p.recirculation_duration;
        // Tick-quantized slot clock: boundaries never drift from
        // floating-point time accumulation.
        let slot_ticks = (p.slot_duration() / dt).round().max(1.0) as u64;
        let slot_time = self.slot_tick as f64 * dt;

        // Phase transitions driven by slot time and force feedback.
        if slot_time < t_tr {
            self.phase = SlotPhase::Transition;
        } else if slot_time < t_tr + t_rc {
            if self.phase == SlotPhase::Transition {
                self.lift_start = feedback.toe_world[leg.index()];
            }
            self.phase = SlotPhase::Recirculation;
        } else if self.phase != SlotPhase::Support {
            self.phase = SlotPhase::Penetration;
            let depth = -feedback.toe_world[leg.index()].z;
            let done = feedback.fz[leg.index()] >= p.max_penetration_force
                || depth >= p.max_penetration_depth
                || self.pen_elapsed >= p.penetration_budget;
            if done {
                self.phase = SlotPhase::Support;
            }
        }

        let (body_xy, plans) = match self.phase {
            SlotPhase::Transition => {
                let s = (slot_time / t_tr).clamp(0.0, 1.0);
                let s = cycloid_progress(s);
                let xy = Point2::from(self.body_from.coords + s * (self.body_to - self.body_from));
                (xy, self.hold_all(leg, PhaseLabel::Transition))
            }
            SlotPhase::Recirculation => {
                let s = ((slot_time - t_tr) / t_rc).clamp(0.0, 1.0);
                let sp = cycloid_progress(s);
                let chord = self.foothold - self.lift_start;
                // The apex bump uses sin^2 so the vertical speed is zero at
                // both lift-off and the hover handoff to the probing descent.
                let bump = (std::f64::consts::PI * s).sin().powi(2);
                let pos = Point3::from(
                    self.lift_start.coords + sp * chord
                        + nalgebra::Vector3::new(0.0, 0.0, p.swing_apex * bump),
                );
                let mut plans = self.hold_all(leg, PhaseLabel::Recirculation);
                plans[leg.index()].mode = LegMode::Track(pos);
                (self.body_to, plans)
            }
            SlotPhase::Penetration => {
                self.pen_elapsed += dt;
                let mut plans = self.hold_all(leg, PhaseLabel::Penetration);
                plans[leg.index()].mode = LegMode::Descend {
                    speed: p.penetration_speed,
                };
                (self.body_to, plans)
            }
            SlotPhase::Support => (self.body_to, self.hold_all(leg, PhaseLabel::Support)),
        };

        self.body = body_xy;
        self.slot_tick += 1;
        if self.slot_tick >= slot_ticks {
            self.slot_tick = 0;
            self.slot_ready = false;
            self.step_in_stride += 1;
            if self.step_in_stride == 4 {
                self.step_in_stride = 0;
                self.strides_done += 1;
            }
        }

        Ok(TickCommand {
            body_com: Point3::new(body_xy.x, body_xy.y, p.body_height),
            legs: plans,
        })
    }

    fn hold_all(&self, stepping: LegId, stepping_phase: PhaseLabel) -> [LegPlan; 4] {
        let mut plans = [LegPlan {
            mode: LegMode::Hold,
            phase: PhaseLabel::Support,
        }; 4];
        plans[stepping.index()].phase = stepping_phase;
        plans
    }
}

/// Trot gait scheduler: diagonal pairs alternate at fixed cadence.
pub struct TrotEngine {
    params: TrotParams,
    geometry: LegGeometry,
    start_x: f64,
    tick: u64,
    lift_pos: [Point3<f64>; 4],
    lift_captured: [bool; 4],
}

impl TrotEngine {
    pub fn new(params: TrotParams, geometry: LegGeometry, start_x: f64) -> Self {
        Self {
            params: params.clamped(),
            geometry,
            start_x,
            tick: 0,
            lift_pos: [Point3::origin(); 4],
            lift_captured: [false; 4],
        }
    }

    pub fn params(&self) -> &TrotParams {
        &self.params
    }

    pub fn body_speed(&self) -> f64 {
        self.params.step_length * self.params.stride_frequency
    }

    /// Stride phase in [0, 1) for a leg; the RF/LR pair runs half a stride
    /// out of phase with LF/RR. Tick-quantized so stride boundaries never
    /// drift from floating-point time accumulation.
    fn leg_phase(&self, leg: LegId, period_ticks: u64) -> f64 {
        let offset = match leg {
            LegId::LF | LegId::RR => 0,
            LegId::RF | LegId::LR => period_ticks / 2,
        };
        ((self.tick + offset) % period_ticks) as f64 / period_ticks as f64
    }

    fn home_y(&self, leg: LegId) -> f64 {
        let hip = self.geometry.hip_offset(leg);
        hip.y + hip.y.signum() * self.params.stance_lateral_offset
    }

    pub fn advance(&mut self, feedback: &Feedback, dt: f64) -> TickCommand {
        let p = &self.params;
        let period = p.stride_period();
        let period_ticks = (period / dt).round().max(2.0) as u64;
        let duty = p.duty_factor;
        let v = self.body_speed();
        let t = self.tick as f64 * dt;
        let body_x = self.start_x + v * t;

        let mut plans = [LegPlan {
            mode: LegMode::Hold,
            phase: PhaseLabel::Stance,
        }; 4];
        for leg in LegId::ALL {
            let i = leg.index();
            let s = self.leg_phase(leg, period_ticks);
            if s < duty {
                plans[i] = LegPlan {
                    mode: LegMode::Dynamic {
                        touchdown_speed: p.touchdown_speed,
                    },
                    phase: PhaseLabel::Stance,
                };
                self.lift_captured[i] = false;
            } else {
                if !self.lift_captured[i] {
                    self.lift_pos[i] = feedback.toe_world[i];
                    self.lift_captured[i] = true;
                }
                let u = ((s - duty) / (1.0 - duty)).clamp(0.0, 1.0);
                let t_sw = (1.0 - duty) * period;
                let t_td = t + (1.0 - u) * t_sw;
                let hip = self.geometry.hip_offset(leg);
                // Foothold ahead of the hip by half the stance travel.
                let target = Point3::new(
                    self.start_x + v * t_td + hip.x + v * duty * period / 2.0,
                    self.home_y(leg),
                    0.0,
                );
                let lift = self.lift_pos[i];
                let sp = cycloid_progress(u);
                let apex = (p.touchdown_speed * t_sw - lift.z).max(0.01) / std::f64::consts::PI;
                let x = lift.x + sp * (target.x - lift.x);
                let y = lift.y + sp * (target.y - lift.y);
                let z = lift.z * (1.0 - u) + apex * (std::f64::consts::PI * u).sin();
                plans[i] = LegPlan {
                    mode: LegMode::Track(Point3::new(x, y, z)),
                    phase: PhaseLabel::Swing,
                };
            }
        }

        self.tick += 1;
        TickCommand {
            body_com: Point3::new(body_x, 0.0, p.body_height),
            legs: plans,
        }
    }
}
