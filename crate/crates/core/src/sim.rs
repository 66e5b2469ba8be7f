//! Quasi-static 1 kHz trial simulator.
//!
//! Each tick the gait engine commands a CoM position and per-leg toe
//! motions; the simulator resolves terrain reaction forces, distributes
//! body weight over the stance legs, runs inverse kinematics, corrupts
//! the resulting joint torques through the actuator error model, and logs
//! the proprioceptive view — exactly what the analysis pipeline gets on
//! the real robot. All randomness comes from one per-trial seeded stream,
//! so a trial is a pure function of scenario and trial index.

use nalgebra::{Matrix3, Matrix3x4, Point2, Point3, Vector3};
use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gait::{
    com_margin, support_polygon, CrawlEngine, Feedback, GaitError, LegMode, PhaseLabel,
    TickCommand, TrotEngine,
};
use crate::robot::{
    gaussian, inverse_kinematics, leg_jacobian, proprioceptive_torque, toe_force_from_torques,
    GaitKind, LegId, RobotError,
};
use crate::scenario::{Scenario, ScenarioError};
use crate::terrain::{reaction_force, ContactState, MaterialModel, TerrainError, Transect};

/// Standard gravity, m/s^2.
pub const GRAVITY: f64 = 9.81;
/// Simulation tick, s.
pub const DT: f64 = 1e-3;
/// Simulation tick, ms (log timestamps).
pub const DT_MS: u64 = 1;

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("gait: {0}")]
    Gait(#[from] GaitError),
    #[error("terrain: {0}")]
    Terrain(#[from] TerrainError),
    #[error("robot: {0}")]
    Robot(#[from] RobotError),
    #[error("CoM left the support polygon at t={t_ms} ms (margin {margin:.4} m)")]
    Instability { t_ms: u64, margin: f64 },
}

/// One leg's logged state at one tick.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LegTick {
    pub q: Vector3<f64>,
    pub dq: Vector3<f64>,
    /// Measured (corrupted) joint torques, N·m.
    pub tau: Vector3<f64>,
    /// Logged toe position in the world frame (trot entries carry the
    /// body-oscillation estimation error), m.
    pub toe: Point3<f64>,
    /// Proprioceptive vertical force estimate, N.
    pub fz_est: f64,
    pub phase: PhaseLabel,
    /// Terrain unit under the toe.
    pub tu_id: usize,
    /// Whether this leg's active contact has a ruptured crust.
    pub rupture_truth: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TickRecord {
    pub t_ms: u64,
    pub legs: [LegTick; 4],
}

/// Ground truth of one step (crawl penetration or trot stance).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub leg: LegId,
    /// Tick-index window `[start, end)` of the step in the trial log.
    pub start_tick: usize,
    pub end_tick: usize,
    pub tu_id: usize,
    /// Toe x position of the step, m.
    pub x: f64,
    /// False when the toe landed in a gap between crust tiles.
    pub on_tile: bool,
    pub true_rupture: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrialMeta {
    pub scenario: String,
    pub gait: GaitKind,
    pub seed: u64,
    pub trial_index: usize,
    pub dt_ms: u64,
    /// Per-leg torque-constant biases drawn for this trial.
    pub leg_biases: [f64; 4],
}

/// Complete log of one simulated trial.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrialLog {
    pub meta: TrialMeta,
    pub ticks: Vec<TickRecord>,
    pub steps: Vec<StepRecord>,
    /// Smallest CoM stability margin seen in any three-legged support
    /// phase (crawl only), m.
    pub min_margin: f64,
}

/// Active terrain contact of one toe.
struct ContactCtx {
    state: ContactState,
    material: MaterialModel,
    tu_id: usize,
    on_tile: bool,
    /// Trot impact model: penetration depth (m) and downward speed (m/s).
    depth: f64,
    speed: f64,
    frozen: bool,
}

struct LegSim {
    toe: Point3<f64>,
    prev_toe: Point3<f64>,
    vel: Vector3<f64>,
    prev_vel: Vector3<f64>,
    prev_q: Option<Vector3<f64>>,
    fz_true: f64,
    fz_est: f64,
    ctx: Option<ContactCtx>,
    /// Ground truth of the contact a lifting toe just left, kept until the
    /// step bookkeeping has consumed it: (tu_id, on_tile, ruptured).
    departed: Option<(usize, bool, bool)>,
    step_open: Option<usize>,
    prev_phase: Option<PhaseLabel>,
}

fn mix_seed(seed: u64, trial_index: usize) -> u64 {
    seed ^ (trial_index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Resolves the material a toe contacts at `x`, sampling crust tile
/// coverage and binding-force jitter from the trial stream.
fn open_contact(
    sc: &Scenario,
    transect: &Transect,
    x: f64,
    rng: &mut ChaCha8Rng,
) -> Result<ContactCtx, TerrainError> {
    let (tu_id, material) = transect.effective_material_at(clamp_x(transect, x))?;
    let (material, on_tile, state) = match material {
        MaterialModel::CrustOnGranular {
            rupture_force,
            post_rupture_drop,
            substrate,
            ..
        } => {
            let hit = rng.gen::<f64>() < sc.crust.coverage;
            if hit {
                let jitter = gaussian(rng) * sc.crust.rupture_force_jitter_std;
                let f_r = (rupture_force + jitter).max(post_rupture_drop + 1.0);
                let state = ContactState::new(&material).with_rupture_force(f_r);
                (material, true, state)
            } else {
                let m = MaterialModel::Granular(substrate);
                let state = ContactState::new(&m);
                (m, false, state)
            }
        }
        m => {
            let state = ContactState::new(&m);
            (m, true, state)
        }
    };
    Ok(ContactCtx {
        state,
        material,
        tu_id,
        on_tile,
        depth: 0.0,
        speed: 0.0,
        frozen: false,
    })
}

fn clamp_x(transect: &Transect, x: f64) -> f64 {
    x.clamp(transect.x_min(), transect.x_max())
}

/// Weight distribution over stance toes by quasi-static force/moment
/// balance about the CoM. For three toes the solution is exact; for four
/// it is the minimum-norm solution. `pen` is the (position, force) of a
/// penetrating toe whose reaction the stance legs must balance.
fn stance_forces(
    stance: &[(usize, Point3<f64>)],
    com: Point3<f64>,
    weight: f64,
    pen: Option<(Point3<f64>, f64)>,
) -> Vec<(usize, f64)> {
    let (fp, dxp, dyp) = match pen {
        Some((p, f)) => (f, p.x - com.x, p.y - com.y),
        None => (0.0, 0.0, 0.0),
    };
    let b = Vector3::new(weight - fp, -dxp * fp, -dyp * fp);
    let n = stance.len();
    let solved: Option<Vec<f64>> = match n {
        3 => {
            let a = Matrix3::from_fn(|r, c| {
                let (_, p) = stance[c];
                match r {
                    0 => 1.0,
                    1 => p.x - com.x,
                    _ => p.y - com.y,
                }
            });
            a.lu().solve(&b).map(|v| v.as_slice().to_vec())
        }
        4 => {
            let a = Matrix3x4::from_fn(|r, c| {
                let (_, p) = stance[c];
                match r {
                    0 => 1.0,
                    1 => p.x - com.x,
                    _ => p.y - com.y,
                }
            });
            (a * a.transpose())
                .lu()
                .solve(&b)
                .map(|lam| (a.transpose() * lam).as_slice().to_vec())
        }
        _ => None,
    };
    match solved {
        Some(f) => stance.iter().map(|(i, _)| *i).zip(f).collect(),
        None => {
            let share = (weight - fp) / n.max(1) as f64;
            stance.iter().map(|&(i, _)| (i, share)).collect()
        }
    }
}

/// Runs one seeded trial and returns its full log.
pub fn run_trial(sc: &Scenario, trial_index: usize) -> Result<TrialLog, SimError> {
    sc.validate()?;
    let transect = sc.terrain.build()?;
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(sc.seed, trial_index));
    let leg_biases = sc.actuator.draw_leg_biases(&mut rng);
    let geom = &sc.leg_geometry;
    let weight = sc.mass * GRAVITY;
    let trot = sc.trot.clamped();
    let lateral = match sc.gait {
        GaitKind::Crawl => sc.crawl.stance_lateral_offset,
        GaitKind::Trot => trot.stance_lateral_offset,
    };
    // Trot state estimation carries a body-height oscillation at stride
    // frequency with a random phase; it corrupts logged toe heights only.
    let osc_phase = match sc.gait {
        GaitKind::Trot => rng.gen::<f64>() * std::f64::consts::TAU,
        GaitKind::Crawl => 0.0,
    };

    // Initial stand: toes on their home grid, settled under a quarter of
    // the body weight each.
    let mut legs: Vec<LegSim> = Vec::with_capacity(4);
    for leg in LegId::ALL {
        let hip = geom.hip_offset(leg);
        let x = sc.start_x + hip.x;
        let y = hip.y + hip.y.signum() * lateral;
        let (_, material) = transect.effective_material_at(clamp_x(&transect, x))?;
        let settle = material.settle_depth(weight / 4.0);
        let toe = Point3::new(x, y, -settle);
        legs.push(LegSim {
            toe,
            prev_toe: toe,
            vel: Vector3::zeros(),
            prev_vel: Vector3::zeros(),
            prev_q: None,
            fz_true: weight / 4.0,
            fz_est: weight / 4.0,
            ctx: None,
            departed: None,
            step_open: None,
            prev_phase: None,
        });
    }

    enum Engine {
        Crawl(CrawlEngine),
        Trot(TrotEngine),
    }
    let mut engine = match sc.gait {
        GaitKind::Crawl => Engine::Crawl(CrawlEngine::new(
            sc.crawl.clone(),
            geom.clone(),
            sc.start_x,
        )),
        GaitKind::Trot => Engine::Trot(TrotEngine::new(trot.clone(), geom.clone(), sc.start_x)),
    };

    let period = sc.stride_period();
    let total_ticks = ((sc.strides as f64 * period) / DT).round() as u64;
    let mut ticks: Vec<TickRecord> = Vec::with_capacity(total_ticks as usize);
    let mut steps: Vec<StepRecord> = Vec::new();
    let mut min_margin = f64::INFINITY;
    let guard_x = transect.x_max() - 0.005;

    'trial: for tick in 0..total_ticks {
        let t = tick as f64 * DT;
        let feedback = Feedback {
            toe_world: [legs[0].toe, legs[1].toe, legs[2].toe, legs[3].toe],
            fz: [
                legs[0].fz_est,
                legs[1].fz_est,
                legs[2].fz_est,
                legs[3].fz_est,
            ],
        };
        let cmd: TickCommand = match &mut engine {
            Engine::Crawl(e) => e.advance(&feedback, DT)?,
            Engine::Trot(e) => e.advance(&feedback, DT),
        };
        // Stop cleanly before any commanded foothold leaves the transect.
        for plan in &cmd.legs {
            if let LegMode::Track(p) = plan.mode {
                if p.x > guard_x {
                    break 'trial;
                }
            }
        }
        let body = cmd.body_com;

        // --- Toe motion and terrain reaction -------------------------------
        for leg in LegId::ALL {
            let i = leg.index();
            let plan = cmd.legs[i];
            let l = &mut legs[i];
            l.prev_toe = l.toe;
            match plan.mode {
                LegMode::Track(p) => {
                    l.toe = p;
                    l.fz_true = 0.0;
                    if let Some(c) = l.ctx.take() {
                        l.departed = Some((c.tu_id, c.on_tile, c.state.ruptured));
                    }
                }
                LegMode::Hold => {
                    // Keeps its contact; the stance force is assigned by
                    // the statics solve below.
                }
                LegMode::Descend { speed } => {
                    l.toe.z -= speed * DT;
                    if l.toe.z < 0.0 {
                        if l.ctx.is_none() {
                            l.ctx = Some(open_contact(sc, &transect, l.toe.x, &mut rng)?);
                        }
                        let ctx = l.ctx.as_mut().unwrap();
                        l.fz_true =
                            reaction_force(&ctx.material, -l.toe.z, speed, &mut ctx.state);
                    } else {
                        l.fz_true = 0.0;
                    }
                }
                LegMode::Dynamic { touchdown_speed } => {
                    if l.ctx.is_none() {
                        let mut ctx = open_contact(sc, &transect, l.toe.x, &mut rng)?;
                        ctx.depth = (-l.toe.z).max(0.0);
                        ctx.speed = if tick == 0 { 0.0 } else { touchdown_speed };
                        l.ctx = Some(ctx);
                    }
                    let ctx = l.ctx.as_mut().unwrap();
                    if ctx.frozen {
                        l.fz_true =
                            reaction_force(&ctx.material, ctx.depth, 0.0, &mut ctx.state);
                    } else {
                        let f = if ctx.depth > 0.0 {
                            reaction_force(&ctx.material, ctx.depth, ctx.speed, &mut ctx.state)
                        } else {
                            0.0
                        };
                        l.fz_true = f;
                        let a = (weight / 2.0 - f) / trot.impact_mass;
                        ctx.speed += a * DT;
                        ctx.depth += ctx.speed * DT;
                        if ctx.state.solidified || ctx.depth >= trot.max_penetration_depth {
                            ctx.depth = ctx.depth.min(trot.max_penetration_depth);
                            ctx.speed = 0.0;
                            ctx.frozen = true;
                        }
                    }
                    l.toe.z = -l.ctx.as_ref().unwrap().depth;
                }
            }
            l.prev_vel = l.vel;
            l.vel = (l.toe - l.prev_toe) / DT;
        }

        // --- Crawl statics and stability -----------------------------------
        if sc.gait == GaitKind::Crawl {
            let mut stance: Vec<(usize, Point3<f64>)> = Vec::with_capacity(4);
            let mut pen: Option<(Point3<f64>, f64)> = None;
            for leg in LegId::ALL {
                let i = leg.index();
                match cmd.legs[i].mode {
                    LegMode::Hold => stance.push((i, legs[i].toe)),
                    LegMode::Descend { .. } => pen = Some((legs[i].toe, legs[i].fz_true)),
                    _ => {}
                }
            }
            for (i, f) in stance_forces(&stance, body, weight, pen) {
                legs[i].fz_true = f;
            }
            if stance.len() == 3 {
                let pts: Vec<Point3<f64>> = stance.iter().map(|&(_, p)| p).collect();
                let poly = support_polygon(&pts)?;
                let margin = com_margin(Point2::new(body.x, body.y), &poly);
                min_margin = min_margin.min(margin);
                if margin <= 0.0 {
                    return Err(SimError::Instability {
                        t_ms: tick * DT_MS,
                        margin,
                    });
                }
            }
        }

        // --- Proprioception -------------------------------------------------
        let mut leg_ticks: Vec<LegTick> = Vec::with_capacity(4);
        for leg in LegId::ALL {
            let i = leg.index();
            let l = &mut legs[i];
            let hip_world = body + geom.hip_offset(leg);
            let target = Point3::from(l.toe - hip_world);
            let q = inverse_kinematics(geom, target)?;
            let dq = match l.prev_q {
                Some(pq) => (q - pq) / DT,
                None => Vector3::zeros(),
            };
            l.prev_q = Some(q);
            let jac = leg_jacobian(geom, q);
            let tau_true = jac.transpose() * Vector3::new(0.0, 0.0, l.fz_true);
            let accel = (l.vel - l.prev_vel) / DT;
            let tau_inertial = jac.transpose() * (sc.leg_link_mass * accel);
            let tau = proprioceptive_torque(
                tau_true,
                &sc.actuator,
                tau_inertial,
                sc.gait,
                dq,
                leg_biases[i],
                &mut rng,
            );
            l.fz_est = toe_force_from_torques(geom, q, tau)
                .map(|f| f.z)
                .unwrap_or(0.0);

            let mut logged_toe = l.toe;
            if sc.gait == GaitKind::Trot {
                logged_toe.z += trot.body_oscillation_amp
                    * (std::f64::consts::TAU * trot.stride_frequency * t + osc_phase).sin();
            }
            let tu_id = transect.material_at(clamp_x(&transect, l.toe.x))?.id;
            let rupture_truth = l
                .ctx
                .as_ref()
                .map(|c| c.state.ruptured)
                .unwrap_or(false);
            leg_ticks.push(LegTick {
                q,
                dq,
                tau,
                toe: logged_toe,
                fz_est: l.fz_est,
                phase: plan_phase(&cmd, i),
                tu_id,
                rupture_truth,
            });
        }

        // --- Step bookkeeping -----------------------------------------------
        let tick_index = ticks.len();
        for leg in LegId::ALL {
            let i = leg.index();
            let phase = cmd.legs[i].phase;
            let in_step = match sc.gait {
                GaitKind::Crawl => phase == PhaseLabel::Penetration,
                GaitKind::Trot => phase == PhaseLabel::Stance,
            };
            let was_in_step = {
                let prev = legs[i].prev_phase;
                match sc.gait {
                    GaitKind::Crawl => prev == Some(PhaseLabel::Penetration),
                    GaitKind::Trot => prev == Some(PhaseLabel::Stance),
                }
            };
            if in_step && !was_in_step {
                legs[i].step_open = Some(tick_index);
            } else if !in_step && was_in_step {
                close_step(&mut steps, &mut legs[i], leg, tick_index, &transect)?;
            }
            legs[i].prev_phase = Some(phase);
        }

        ticks.push(TickRecord {
            t_ms: tick * DT_MS,
            legs: [
                leg_ticks[0].clone(),
                leg_ticks[1].clone(),
                leg_ticks[2].clone(),
                leg_ticks[3].clone(),
            ],
        });
    }

    // Close any step still open at trial end.
    let end = ticks.len();
    for leg in LegId::ALL {
        let i = leg.index();
        if legs[i].step_open.is_some() {
            close_step(&mut steps, &mut legs[i], leg, end, &transect)?;
        }
    }
    steps.sort_by_key(|s| (s.start_tick, s.leg.index()));

    Ok(TrialLog {
        meta: TrialMeta {
            scenario: sc.name.clone(),
            gait: sc.gait,
            seed: sc.seed,
            trial_index,
            dt_ms: DT_MS,
            leg_biases,
        },
        ticks,
        steps,
        min_margin,
    })
}

fn plan_phase(cmd: &TickCommand, i: usize) -> PhaseLabel {
    cmd.legs[i].phase
}

fn close_step(
    steps: &mut Vec<StepRecord>,
    l: &mut LegSim,
    leg: LegId,
    end_tick: usize,
    transect: &Transect,
) -> Result<(), SimError> {
    if let Some(start_tick) = l.step_open.take() {
        let (tu_id, on_tile, true_rupture) = match (&l.ctx, l.departed.take()) {
            (Some(c), _) => (c.tu_id, c.on_tile, c.state.ruptured),
            (None, Some(d)) => d,
            (None, None) => (
                transect.material_at(clamp_x(transect, l.toe.x))?.id,
                true,
                false,
            ),
        };
        steps.push(StepRecord {
            leg,
            start_tick,
            end_tick,
            tu_id,
            x: l.toe.x,
            on_tile,
            true_rupture,
        });
    }
    Ok(())
}

/// Runs the full seeded batch of a scenario.
pub fn run_batch(sc: &Scenario) -> Result<Vec<TrialLog>, SimError> {
    (0..sc.trials).map(|i| run_trial(sc, i)).collect()
}
