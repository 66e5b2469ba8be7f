//! Implementations of the four subcommands.

use std::path::{Path, PathBuf};

use regosense_core::eval::StepOutcome;
use regosense_core::pipeline::analyze_batch;
use regosense_core::robot::GaitKind;
use regosense_core::scenario::Scenario;
use regosense_core::sim::{run_trial, TrialLog};

use crate::logfmt::{estimates_from_csv, estimates_to_csv, trial_from_csv, trial_to_csv, TrialSidecar};
use crate::manifest::{
    read_manifest, sha256_hex, verify_config_hash, Manifest, TrialEntry, CONFIG_FILE,
    ESTIMATES_FILE, MANIFEST_FILE,
};
use crate::CliError;

/// Environment variable naming the root directory all relative `--out`
/// paths are resolved against.
pub const OUT_ROOT_ENV: &str = "REGOSENSE_OUT_ROOT";

/// Resolves an output path against [`OUT_ROOT_ENV`] when it is relative.
pub fn resolve_out(path: &Path) -> PathBuf {
    if path.is_relative() {
        if let Ok(root) = std::env::var(OUT_ROOT_ENV) {
            if !root.is_empty() {
                return PathBuf::from(root).join(path);
            }
        }
    }
    path.to_path_buf()
}

const SCENARIO_NAMES: &[&str] = &["exp1-crawl", "exp1-trot", "exp2-crawl", "exp2-trot"];

fn scenario_by_name(name: &str) -> Result<Scenario, CliError> {
    match name {
        "exp1-crawl" => Ok(Scenario::exp1_crawl()),
        "exp1-trot" => Ok(Scenario::exp1_trot()),
        "exp2-crawl" => Ok(Scenario::exp2_crawl()),
        "exp2-trot" => Ok(Scenario::exp2_trot()),
        other => Err(CliError::Config(format!(
            "unknown scenario '{other}'; expected one of {}",
            SCENARIO_NAMES.join(", ")
        ))),
    }
}

/// `defaults`: the complete configuration of a built-in scenario as TOML.
pub fn cmd_defaults(scenario: Option<&str>) -> Result<String, CliError> {
    let sc = match scenario {
        Some(name) => scenario_by_name(name)?,
        None => Scenario::default(),
    };
    toml::to_string_pretty(&sc).map_err(|e| CliError::Config(e.to_string()))
}

/// Command-line overrides applied on top of the configuration file.
#[derive(Debug, Default, Clone)]
pub struct SimulateOverrides {
    pub seed: Option<u64>,
    pub trials: Option<usize>,
    pub preset: Option<String>,
}

/// `simulate`: runs the configured batch into a run directory containing
/// the canonical config echo, one CSV log plus JSON sidecar per trial,
/// and a manifest pinning everything by hash.
pub fn cmd_simulate(
    config_path: &Path,
    out: &Path,
    overrides: &SimulateOverrides,
) -> Result<Manifest, CliError> {
    let text = std::fs::read_to_string(config_path)
        .map_err(|e| CliError::Config(format!("{}: {e}", config_path.display())))?;
    let mut sc: Scenario = toml::from_str(&text)
        .map_err(|e| CliError::Config(format!("{}: {e}", config_path.display())))?;
    if let Some(seed) = overrides.seed {
        sc.seed = seed;
    }
    if let Some(trials) = overrides.trials {
        sc.trials = trials;
    }
    if let Some(preset) = &overrides.preset {
        sc.terrain.preset = Some(preset.clone());
        sc.terrain.units.clear();
    }
    sc.validate().map_err(|e| CliError::Config(e.to_string()))?;

    let out = resolve_out(out);
    std::fs::create_dir_all(&out)
        .map_err(|e| CliError::Sim(format!("{}: {e}", out.display())))?;
    let write = |name: &str, bytes: &[u8]| -> Result<(), CliError> {
        let path = out.join(name);
        std::fs::write(&path, bytes).map_err(|e| CliError::Sim(format!("{}: {e}", path.display())))
    };

    let canonical =
        toml::to_string_pretty(&sc).map_err(|e| CliError::Config(e.to_string()))?;
    write(CONFIG_FILE, canonical.as_bytes())?;

    let mut files = Vec::with_capacity(sc.trials);
    for trial in 0..sc.trials {
        let log = run_trial(&sc, trial).map_err(|e| CliError::Sim(e.to_string()))?;
        let csv = trial_to_csv(&log);
        let log_name = format!("trial_{trial:03}.csv");
        let sidecar_name = format!("trial_{trial:03}.steps.json");
        write(&log_name, csv.as_bytes())?;
        let sidecar = TrialSidecar {
            meta: log.meta.clone(),
            steps: log.steps.clone(),
            min_margin: log.min_margin,
        };
        let sidecar_json = serde_json::to_string_pretty(&sidecar)
            .map_err(|e| CliError::Sim(e.to_string()))?;
        write(&sidecar_name, sidecar_json.as_bytes())?;
        files.push(TrialEntry {
            index: trial,
            log: log_name,
            sidecar: sidecar_name,
            log_sha256: sha256_hex(csv.as_bytes()),
        });
    }

    let manifest = Manifest {
        scenario_name: sc.name.clone(),
        gait: sc.gait,
        seed: sc.seed,
        trials: sc.trials,
        config_sha256: sha256_hex(canonical.as_bytes()),
        files,
    };
    let manifest_json =
        serde_json::to_string_pretty(&manifest).map_err(|e| CliError::Sim(e.to_string()))?;
    write(MANIFEST_FILE, manifest_json.as_bytes())?;
    Ok(manifest)
}

fn load_run_scenario(run: &Path) -> Result<Scenario, CliError> {
    let path = run.join(CONFIG_FILE);
    let text = std::fs::read_to_string(&path)
        .map_err(|e| CliError::MalformedLog(format!("{}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| CliError::MalformedLog(format!("{}: {e}", path.display())))
}

fn load_run_logs(run: &Path, manifest: &Manifest) -> Result<Vec<TrialLog>, CliError> {
    manifest
        .files
        .iter()
        .map(|entry| trial_from_csv(&run.join(&entry.log), &run.join(&entry.sidecar)))
        .collect()
}

/// `analyze`: turns a run directory's logs into the per-step estimates
/// table (`estimates.csv`) and a decimated force–sinkage plot table
/// (`force_depth.csv`).
pub fn cmd_analyze(run: &Path) -> Result<Vec<StepOutcome>, CliError> {
    let run = resolve_out(run);
    let manifest = read_manifest(&run)?;
    let sc = load_run_scenario(&run)?;
    let transect = sc
        .terrain
        .build()
        .map_err(|e| CliError::MalformedLog(e.to_string()))?;
    let logs = load_run_logs(&run, &manifest)?;
    let (outcomes, _report) = analyze_batch(&logs, &transect, &sc.analysis)
        .map_err(|e| CliError::MalformedLog(e.to_string()))?;

    let est_path = run.join(ESTIMATES_FILE);
    std::fs::write(&est_path, estimates_to_csv(&outcomes))
        .map_err(|e| CliError::MalformedLog(format!("{}: {e}", est_path.display())))?;

    let fd_path = run.join("force_depth.csv");
    std::fs::write(&fd_path, force_depth_table(&logs))
        .map_err(|e| CliError::MalformedLog(format!("{}: {e}", fd_path.display())))?;
    Ok(outcomes)
}

/// Raw force–sinkage samples of every step window, decimated 5:1.
/// Depth here is raw toe sinkage below the nominal surface; the analyzed
/// estimates use the corrected ground frame instead.
fn force_depth_table(logs: &[TrialLog]) -> String {
    use std::fmt::Write as _;
    let mut out = String::from("trial,step,leg,tu_id,t_ms,depth_m,fz_n\n");
    for log in logs {
        for (step_idx, step) in log.steps.iter().enumerate() {
            let i = step.leg.index();
            let window = &log.ticks[step.start_tick..step.end_tick.min(log.ticks.len())];
            for rec in window.iter().step_by(5) {
                let lt = &rec.legs[i];
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{}",
                    log.meta.trial_index,
                    step_idx,
                    step.leg.name(),
                    step.tu_id,
                    rec.t_ms,
                    -lt.toe.z,
                    lt.fz_est,
                );
            }
        }
    }
    out
}

/// One run's section of the evaluation report.
#[derive(Debug, Clone, serde::Serialize)]
pub struct RunSection {
    pub run: String,
    pub config_sha256: String,
    /// Full configuration echo of the batch that produced this run.
    pub scenario: Scenario,
    pub report: regosense_core::eval::GaitReport,
}

/// Per-unit strength comparison between a crawl run and a trot run over
/// the same terrain.
#[derive(Debug, Clone, serde::Serialize)]
pub struct UnitComparison {
    pub crawl_run: String,
    pub trot_run: String,
    pub tu_id: usize,
    pub crawl_mean_k_ncm: f64,
    pub trot_mean_k_ncm: f64,
    /// Trot overestimation factor; > 1 means the trot reads the ground
    /// as stiffer than the crawl does.
    pub trot_over_crawl_ratio: f64,
}

/// Top-level evaluation report (`report.json`).
#[derive(Debug, Clone, serde::Serialize)]
pub struct EvalReport {
    pub runs: Vec<RunSection>,
    pub comparison: Vec<UnitComparison>,
    pub notes: Vec<String>,
}

/// `evaluate`: verifies each run's config hash, scores its estimates
/// table, and writes `report.json` plus plot tables to `out` (default:
/// the first run directory).
pub fn cmd_evaluate(runs: &[PathBuf], out: Option<&Path>) -> Result<EvalReport, CliError> {
    use std::fmt::Write as _;
    if runs.is_empty() {
        return Err(CliError::Mismatch("no run directories given".into()));
    }
    let runs: Vec<PathBuf> = runs.iter().map(|r| resolve_out(r)).collect();
    let mut sections = Vec::new();
    let mut notes = Vec::new();
    for run in &runs {
        let manifest = read_manifest(run).map_err(|e| CliError::Mismatch(e.to_string()))?;
        let hash = verify_config_hash(run, &manifest)?;
        let sc = load_run_scenario(run).map_err(|e| CliError::Mismatch(e.to_string()))?;
        let outcomes = estimates_from_csv(&run.join(ESTIMATES_FILE))?;
        if let Some(o) = outcomes.iter().find(|o| o.trial >= manifest.trials) {
            return Err(CliError::Mismatch(format!(
                "{}: estimates reference trial {} but the manifest lists {}",
                run.display(),
                o.trial,
                manifest.trials
            )));
        }
        let report =
            regosense_core::eval::build_report(manifest.gait, manifest.trials, &outcomes)
                .map_err(|e| CliError::Mismatch(e.to_string()))?;
        let name = run
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| run.display().to_string());
        sections.push(RunSection {
            run: name,
            config_sha256: hash,
            scenario: sc,
            report,
        });
    }

    // Crawl-vs-trot strength comparison for runs over identical terrain.
    let mut comparison = Vec::new();
    for c in sections.iter().filter(|s| s.scenario.gait == GaitKind::Crawl) {
        for t in sections.iter().filter(|s| s.scenario.gait == GaitKind::Trot) {
            let same_terrain = serde_json::to_string(&c.scenario.terrain).ok()
                == serde_json::to_string(&t.scenario.terrain).ok();
            if !same_terrain {
                continue;
            }
            for cu in &c.report.unit_stats {
                if let Some(tu) = t.report.unit_stats.iter().find(|u| u.tu_id == cu.tu_id) {
                    comparison.push(UnitComparison {
                        crawl_run: c.run.clone(),
                        trot_run: t.run.clone(),
                        tu_id: cu.tu_id,
                        crawl_mean_k_ncm: cu.mean_k_ncm,
                        trot_mean_k_ncm: tu.mean_k_ncm,
                        trot_over_crawl_ratio: tu.mean_k_ncm / cu.mean_k_ncm,
                    });
                }
            }
        }
    }
    if !sections.iter().any(|s| s.scenario.gait == GaitKind::Trot) {
        notes.push("no trot runs supplied; gait comparison omitted".to_string());
    }
    if !sections.iter().any(|s| s.scenario.gait == GaitKind::Crawl) {
        notes.push("no crawl runs supplied; gait comparison omitted".to_string());
    }

    let report = EvalReport {
        runs: sections,
        comparison,
        notes,
    };

    let out_dir = out
        .map(resolve_out)
        .unwrap_or_else(|| runs[0].clone());
    std::fs::create_dir_all(&out_dir)
        .map_err(|e| CliError::Mismatch(format!("{}: {e}", out_dir.display())))?;
    let report_json = serde_json::to_string_pretty(&report)
        .map_err(|e| CliError::Mismatch(e.to_string()))?;
    std::fs::write(out_dir.join("report.json"), report_json)
        .map_err(|e| CliError::Mismatch(e.to_string()))?;

    let mut unit_csv = String::from("run,tu_id,mean_k_ncm,std_k_ncm,n\n");
    let mut conf_csv = String::from("run,tp,fp,tn,fn,sensitivity,specificity\n");
    for s in &report.runs {
        for u in &s.report.unit_stats {
            let _ = writeln!(
                unit_csv,
                "{},{},{},{},{}",
                s.run, u.tu_id, u.mean_k_ncm, u.std_k_ncm, u.n
            );
        }
        let m = &s.report.confusion;
        let _ = writeln!(
            conf_csv,
            "{},{},{},{},{},{},{}",
            s.run,
            m.tp,
            m.fp,
            m.tn,
            m.fn_,
            s.report.sensitivity,
            s.report.specificity
        );
    }
    std::fs::write(out_dir.join("unit_stats.csv"), unit_csv)
        .map_err(|e| CliError::Mismatch(e.to_string()))?;
    std::fs::write(out_dir.join("confusion.csv"), conf_csv)
        .map_err(|e| CliError::Mismatch(e.to_string()))?;

    let mut k_csv = String::from("run,trial,step,leg,tu_id,x,k_ncm\n");
    for (run, s) in runs.iter().zip(&report.runs) {
        // Re-read the already verified estimates for the plot table.
        for o in estimates_from_csv(&run.join(ESTIMATES_FILE))? {
            if let Some(k) = o.k_ncm {
                let _ = writeln!(
                    k_csv,
                    "{},{},{},{},{},{},{}",
                    s.run, o.trial, o.step, o.leg, o.tu_id, o.x, k
                );
            }
        }
    }
    std::fs::write(out_dir.join("k_vs_position.csv"), k_csv)
        .map_err(|e| CliError::Mismatch(e.to_string()))?;

    Ok(report)
}
