//! Acceptance suite: one test per release criterion, each printing a
//! `[acceptance]` verdict line. Shared simulation batches are computed
//! once and reused across criteria to keep the whole suite fast.

use std::sync::OnceLock;

use nalgebra::{Point3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use regosense_core::eval::{confusion, StepOutcome};
use regosense_core::gait::PhaseLabel;
use regosense_core::geometry::{
    apply_contact_correction, fit_plane_least_squares, fit_plane_three_points, signed_depth,
};
use regosense_core::ground::{detect_contact, estimate_frame_from_stance};
use regosense_core::pipeline::analyze_trial;
use regosense_core::robot::{GaitKind, LegId};
use regosense_core::rupture::{classify_step, savgol_smooth, DetectorConfig};
use regosense_core::scenario::Scenario;
use regosense_core::sim::{run_trial, SimError, TrialLog};

const EXP1_TRUTH: [f64; 3] = [6.8, 3.4, 21.3];
const BATCH_SEEDS: [u64; 10] = [1, 2, 3, 4, 5, 6, 7, 8, 9, 10];

/// One seeded batch of paired crawl/trot runs over the compaction transect.
struct Exp1Batch {
    crawl: Vec<StepOutcome>,
    trot: Vec<StepOutcome>,
    crawl_min_margins: Vec<f64>,
}

fn run_batch(mut sc: Scenario, seed: u64) -> (Vec<StepOutcome>, Vec<f64>) {
    sc.seed = seed;
    let transect = sc.terrain.build().expect("preset terrain builds");
    let mut outcomes = Vec::new();
    let mut margins = Vec::new();
    for trial in 0..sc.trials {
        // Trials are simulated and analyzed one at a time so only a single
        // full-resolution log is ever resident.
        let log = run_trial(&sc, trial).expect("trial completes");
        margins.push(log.min_margin);
        outcomes.extend(analyze_trial(&log, &transect, &sc.analysis).expect("analysis completes"));
    }
    (outcomes, margins)
}

fn exp1_batches() -> &'static Vec<Exp1Batch> {
    static BATCHES: OnceLock<Vec<Exp1Batch>> = OnceLock::new();
    BATCHES.get_or_init(|| {
        BATCH_SEEDS
            .iter()
            .map(|&seed| {
                let (crawl, crawl_min_margins) = run_batch(Scenario::exp1_crawl(), seed);
                let (trot, _) = run_batch(Scenario::exp1_trot(), seed);
                Exp1Batch {
                    crawl,
                    trot,
                    crawl_min_margins,
                }
            })
            .collect()
    })
}

/// Crust-transect batches at the default calibration (crawl, trot, and
/// the crawl trials' minimum stability margins).
fn exp2_outcomes() -> &'static (Vec<StepOutcome>, Vec<StepOutcome>, Vec<f64>) {
    static OUTCOMES: OnceLock<(Vec<StepOutcome>, Vec<StepOutcome>, Vec<f64>)> = OnceLock::new();
    OUTCOMES.get_or_init(|| {
        let sc = Scenario::exp2_crawl();
        let (crawl, margins) = run_batch(sc.clone(), sc.seed);
        let sc = Scenario::exp2_trot();
        let (trot, _) = run_batch(sc.clone(), sc.seed);
        (crawl, trot, margins)
    })
}

/// One short crawl trial per terrain preset, full logs retained.
fn preset_logs() -> &'static Vec<(String, TrialLog)> {
    static LOGS: OnceLock<Vec<(String, TrialLog)>> = OnceLock::new();
    LOGS.get_or_init(|| {
        let mut exp1 = Scenario::exp1_crawl();
        exp1.strides = 2;

        // Start deep enough into the crust transect that the probing toes
        // sample the buried crust unit, not just the boards.
        let mut exp2 = Scenario::exp2_crawl();
        exp2.strides = 3;
        exp2.start_x = 0.85;

        let mut hood = Scenario::exp1_crawl();
        hood.name = "mt-hood-crawl".into();
        hood.terrain.preset = Some("mt-hood-transect".into());
        hood.strides = 3;

        [exp1, exp2, hood]
            .into_iter()
            .map(|sc| {
                let name = sc.name.clone();
                (name, run_trial(&sc, 0).expect("preset trial completes"))
            })
            .collect()
    })
}

fn per_unit_stats(outcomes: &[StepOutcome], tu_id: usize) -> (f64, f64, usize) {
    let ks: Vec<f64> = outcomes
        .iter()
        .filter(|o| o.tu_id == tu_id)
        .filter_map(|o| o.k_ncm)
        .collect();
    let n = ks.len();
    assert!(n >= 2, "unit {tu_id} has only {n} strength estimates");
    let mean = ks.iter().sum::<f64>() / n as f64;
    let var = ks.iter().map(|k| (k - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, var, n)
}

#[test]
fn criterion_1_ground_plane_correctness() {
    // Noise-free plane recovery: random tilted planes, exact three-point
    // and least-squares fits.
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..200 {
        let nx = rng.gen_range(-0.4..0.4);
        let ny = rng.gen_range(-0.4..0.4);
        let truth = Vector3::new(nx, ny, 1.0).normalize();
        let origin = Point3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), 0.2);
        let on_plane = |u: f64, v: f64| {
            let p = Point3::new(origin.x + u, origin.y + v, 0.0);
            let z = origin.z - (truth.x * u + truth.y * v) / truth.z;
            Point3::new(p.x, p.y, z)
        };
        // The angular error is measured as |n_est x n_true| (= sin of the
        // angle), which stays precise where acos saturates.
        let tri = [on_plane(0.3, 0.0), on_plane(-0.2, 0.25), on_plane(0.0, -0.3)];
        let frame = fit_plane_three_points(tri[0], tri[1], tri[2]).unwrap();
        assert!(frame.normal.cross(&truth).norm() < 1e-9);

        let cloud: Vec<_> = (0..8)
            .map(|_| on_plane(rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5)))
            .collect();
        let frame = fit_plane_least_squares(&cloud).unwrap();
        assert!(frame.normal.cross(&truth).norm() < 1e-9);

        // Contact correction pins the touchdown point to depth zero.
        let contact = on_plane(0.1, 0.1) + Vector3::new(0.0, 0.0, -0.03);
        let corrected = apply_contact_correction(frame, contact);
        assert_eq!(signed_depth(&corrected, contact), 0.0);
    }

    // Every probing step in every preset: depth at the detected contact
    // sample is exactly zero after correction.
    let mut checked = 0usize;
    for (name, log) in preset_logs() {
        for step in &log.steps {
            let i = step.leg.index();
            let window = &log.ticks[step.start_tick..step.end_tick];
            let fz: Vec<f64> = window.iter().map(|t| t.legs[i].fz_est).collect();
            let toe: Vec<Point3<f64>> = window.iter().map(|t| t.legs[i].toe).collect();
            let contact =
                detect_contact(&fz, &toe, 5.0, 5).unwrap_or_else(|e| {
                    panic!("{name}: step on TU{} has no contact: {e}", step.tu_id)
                });
            let mut stance = [Point3::origin(); 3];
            let mut j = 0;
            for leg in LegId::ALL {
                if leg != step.leg {
                    stance[j] = log.ticks[step.start_tick + contact.index].legs[leg.index()].toe;
                    j += 1;
                }
            }
            let frame = estimate_frame_from_stance(&stance, contact.position).unwrap();
            assert_eq!(
                signed_depth(&frame, contact.position),
                0.0,
                "{name}: contact depth not zero"
            );
            checked += 1;
        }
    }
    assert!(checked >= 20, "only {checked} steps checked");
    println!("[acceptance] criterion 1 ground-plane correctness: PASS ({checked} preset steps)");
}

#[test]
fn criterion_2_crawl_strength_recovery() {
    // Zero sensor noise on homogeneous footing: mean k within 0.5% of the
    // configured strengths.
    for truth in EXP1_TRUTH {
        let sc = Scenario::calibration(truth);
        let (outcomes, _) = run_batch(sc.clone(), sc.seed);
        let (mean, _, n) = per_unit_stats(&outcomes, 1);
        assert!(
            (mean - truth).abs() / truth < 0.005,
            "zero-noise mean {mean:.4} vs {truth} ({n} steps)"
        );
    }

    // Default sensor noise over the compaction transect: per-unit mean
    // within 10% and strict strength ordering in every seeded batch.
    for (b, batch) in exp1_batches().iter().enumerate() {
        let means: Vec<f64> = (1..=3)
            .map(|tu| per_unit_stats(&batch.crawl, tu).0)
            .collect();
        for (tu, (&mean, &truth)) in means.iter().zip(&EXP1_TRUTH).enumerate() {
            assert!(
                (mean - truth).abs() / truth < 0.10,
                "batch {b} TU{}: mean {mean:.3} vs {truth}",
                tu + 1
            );
        }
        // medium (TU1, 6.8) > low (TU2, 3.4); high (TU3, 21.3) > medium.
        assert!(means[0] > means[1], "batch {b}: medium !> low");
        assert!(means[2] > means[0], "batch {b}: high !> medium");
    }
    println!(
        "[acceptance] criterion 2 crawl strength recovery (0.5% zero-noise, 10% noisy, {} batches): PASS",
        BATCH_SEEDS.len()
    );
}

#[test]
fn criterion_3_gait_contrast_strength() {
    // Same terrain, same seeds: the trot overestimates k on every granular
    // unit, and its spread dominates the crawl's in almost every batch.
    let mut variance_wins = 0usize;
    for (b, batch) in exp1_batches().iter().enumerate() {
        let mut batch_var_ok = true;
        for tu in 1..=3 {
            let (crawl_mean, crawl_var, _) = per_unit_stats(&batch.crawl, tu);
            let (trot_mean, trot_var, _) = per_unit_stats(&batch.trot, tu);
            assert!(
                trot_mean > crawl_mean,
                "batch {b} TU{tu}: trot mean {trot_mean:.3} !> crawl mean {crawl_mean:.3}"
            );
            batch_var_ok &= trot_var >= crawl_var;
        }
        variance_wins += usize::from(batch_var_ok);
    }
    assert!(
        variance_wins >= 9,
        "trot variance >= crawl variance in only {variance_wins}/10 batches"
    );
    println!(
        "[acceptance] criterion 3 trot overestimation and variance ({variance_wins}/10 batches): PASS"
    );
}

/// Crawl-like loading ramp with a sudden force drop of `drop` newtons.
fn ramp_with_drop(drop: f64) -> Vec<f64> {
    let slope = 0.0544; // N per 1 ms sample, an 8 cm/s probe in 6.8 N/cm sand
    let mut fz = Vec::with_capacity(900);
    let mut f = 0.0;
    for _ in 0..520 {
        f += slope;
        fz.push(f);
    }
    f -= drop;
    for _ in 0..150 {
        fz.push(f); // post-rupture dwell
    }
    for _ in 0..230 {
        f += slope;
        fz.push(f); // reloading into the substrate
    }
    fz
}

#[test]
fn criterion_4_rupture_detector_unit_behavior() {
    let cfg = DetectorConfig::default();
    let (hit, _) = classify_step(&ramp_with_drop(6.0), &cfg, 1).unwrap();
    assert!(hit, "6 N drop missed");
    let (hit, _) = classify_step(&ramp_with_drop(4.0), &cfg, 1).unwrap();
    assert!(!hit, "4 N drop falsely detected");

    // The degree-4 smoother is exact on polynomials up to degree 4.
    for coeffs in [
        [2.0, -1.0, 0.5, 0.0, 0.0],
        [10.0, 3.0, -0.8, 0.05, -0.002],
        [0.0, 0.0, 0.0, 0.0, 1e-3],
    ] {
        let series: Vec<f64> = (0..300)
            .map(|i| {
                let t = i as f64 / 50.0;
                coeffs
                    .iter()
                    .enumerate()
                    .map(|(p, c)| c * t.powi(p as i32))
                    .sum()
            })
            .collect();
        let smoothed = savgol_smooth(&series, cfg.window_samples(1), cfg.poly_order).unwrap();
        for (s, raw) in smoothed.iter().zip(&series) {
            assert!((s - raw).abs() < 1e-8, "filter not exact: {s} vs {raw}");
        }
    }

    // Detection is monotone in drop magnitude.
    let mut previous = false;
    for tenths in 0..=100 {
        let drop = tenths as f64 * 0.1;
        let (hit, _) = classify_step(&ramp_with_drop(drop), &cfg, 1).unwrap();
        assert!(
            hit || !previous,
            "detection not monotone: {drop:.1} N missed after a smaller drop hit"
        );
        previous = hit;
    }
    println!("[acceptance] criterion 4 rupture detector unit behavior: PASS");
}

#[test]
fn criterion_5_gait_contrast_rupture_rates() {
    let (crawl, trot, _) = exp2_outcomes();
    let crawl_report =
        regosense_core::eval::build_report(GaitKind::Crawl, 4, crawl).unwrap();
    let trot_report = regosense_core::eval::build_report(GaitKind::Trot, 4, trot).unwrap();
    assert!(
        crawl_report.specificity >= 0.90,
        "crawl specificity {:.3}",
        crawl_report.specificity
    );
    assert!(
        crawl_report.sensitivity >= 0.60,
        "crawl sensitivity {:.3}",
        crawl_report.sensitivity
    );
    assert!(
        trot_report.specificity <= 0.50,
        "trot specificity {:.3}",
        trot_report.specificity
    );
    assert_eq!(
        trot_report.sensitivity, 1.0,
        "trot sensitivity {:.3} over {} ruptured steps",
        trot_report.sensitivity,
        trot_report.confusion.positives()
    );
    println!(
        "[acceptance] criterion 5 rupture rates (crawl {:.3}/{:.3}, trot {:.3}/{:.3} sens/spec): PASS",
        crawl_report.sensitivity,
        crawl_report.specificity,
        trot_report.sensitivity,
        trot_report.specificity
    );
}

#[test]
fn criterion_6_timing_fidelity() {
    // Crawl stride period: successive probes of the same leg are one
    // 20-second stride apart.
    let (_, exp1_log) = &preset_logs()[0];
    for leg in LegId::ALL {
        let starts: Vec<usize> = exp1_log
            .steps
            .iter()
            .filter(|s| s.leg == leg)
            .map(|s| s.start_tick)
            .collect();
        assert!(starts.len() >= 2);
        for pair in starts.windows(2) {
            let period_s = (pair[1] - pair[0]) as f64 * 1e-3;
            assert!(
                (period_s - 20.0).abs() / 20.0 < 0.01,
                "{leg:?} stride period {period_s} s"
            );
        }
    }

    // Probing descent speed while the toe is still above the surface.
    let mut speed_ticks = 0usize;
    for (_, log) in preset_logs() {
        for pair in log.ticks.windows(2) {
            for i in 0..4 {
                let (a, b) = (&pair[0].legs[i], &pair[1].legs[i]);
                if a.phase == PhaseLabel::Penetration
                    && b.phase == PhaseLabel::Penetration
                    && a.toe.z > 0.003
                    && b.toe.z > 0.003
                {
                    let speed = (a.toe.z - b.toe.z) / 1e-3;
                    assert!((speed - 0.08).abs() < 1e-6, "descent speed {speed}");
                    speed_ticks += 1;
                }
            }
        }
    }
    assert!(speed_ticks > 100, "only {speed_ticks} unloaded descent ticks");

    // Trot contact-to-peak on the sand transect: every stance loads to its
    // force peak within 10-80 ms.
    let mut durations = 0usize;
    for batch in exp1_batches() {
        for o in &batch.trot {
            let ms = o
                .load_duration_ms
                .unwrap_or_else(|| panic!("trot step without a load duration: {o:?}"));
            assert!(
                (10.0..=80.0).contains(&ms),
                "contact-to-peak {ms} ms on TU{}",
                o.tu_id
            );
            durations += 1;
        }
    }
    println!(
        "[acceptance] criterion 6 timing fidelity ({durations} trot stances in [10, 80] ms): PASS"
    );
}

#[test]
fn criterion_7_static_stability() {
    // Positive CoM margin throughout every crawl trial on every preset.
    for (name, log) in preset_logs() {
        assert!(
            log.min_margin > 0.0,
            "{name}: min margin {}",
            log.min_margin
        );
    }
    for batch in exp1_batches() {
        for &margin in &batch.crawl_min_margins {
            assert!(margin > 0.0, "exp1 crawl margin {margin}");
        }
    }
    for &margin in &exp2_outcomes().2 {
        assert!(margin > 0.0, "exp2 crawl margin {margin}");
    }

    // A support polygon too thin to hold the required margin aborts the
    // trial instead of walking unstably: pulling the toes almost onto the
    // hip line collapses the support triangles.
    let mut sc = Scenario::exp1_crawl();
    sc.strides = 1;
    sc.leg_geometry.hip_y = 0.012;
    sc.crawl.stance_lateral_offset = 0.002;
    let err = run_trial(&sc, 0).expect_err("degenerate support must abort");
    assert!(
        matches!(err, SimError::Gait(_) | SimError::Instability { .. }),
        "unexpected abort error: {err}"
    );
    println!("[acceptance] criterion 7 static stability margin: PASS");
}

#[test]
fn criterion_9_confusion_arithmetic() {
    // 73 rupture-less steps, 3 false positives -> specificity 70/73.
    let truth: Vec<bool> = vec![false; 73];
    let detected: Vec<bool> = (0..73).map(|i| i < 3).collect();
    let m = confusion(&truth, &detected).unwrap();
    assert_eq!(m.specificity(), 70.0 / 73.0);
    assert_eq!((m.specificity() * 1000.0).round(), 959.0);

    // 11 ruptured steps, 4 misses -> sensitivity 7/11.
    let truth: Vec<bool> = vec![true; 11];
    let detected: Vec<bool> = (0..11).map(|i| i >= 4).collect();
    let m = confusion(&truth, &detected).unwrap();
    assert_eq!(m.sensitivity(), 7.0 / 11.0);
    assert_eq!((m.sensitivity() * 1000.0).round(), 636.0);

    // 64 rupture-less steps, 56 false positives -> specificity 8/64.
    let truth: Vec<bool> = vec![false; 64];
    let detected: Vec<bool> = (0..64).map(|i| i < 56).collect();
    let m = confusion(&truth, &detected).unwrap();
    assert_eq!(m.specificity(), 8.0 / 64.0);
    assert_eq!(m.specificity(), 0.125);
    println!("[acceptance] criterion 9 confusion arithmetic: PASS");
}
