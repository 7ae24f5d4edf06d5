//! The four subcommands.

use std::fs;
use std::io;
use std::path::Path;

use cvqkd_core::adversary::{assess_security, SecurityAssessment};
use cvqkd_core::detection::{
    self, expected_shift_attacked, expected_shift_clean, max_attack_discrepancy,
    min_detectable_attack_time, secure_transmission_bound, ShiftPrediction,
};
use cvqkd_core::numeric::grid;
use cvqkd_core::streams::derive_seed;
use cvqkd_core::{run_session, DecayModel, DetectionReport, Localization, Verdict};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::config::{ConfigError, ExperimentSpec, ThresholdSweep};
use crate::output::{write_csv, write_json, write_transcript, Provenance};

#[derive(Debug, Error)]
pub enum CommandError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("{0}")]
    Runtime(String),
}

impl CommandError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 1,
            Self::Io(_) | Self::Runtime(_) => 2,
        }
    }
}

fn runtime(e: cvqkd_core::Error) -> CommandError {
    CommandError::Runtime(e.to_string())
}

/// γ(t)/γ_M, Γ(t) and η(t) on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct RateCurve {
    pub t: Vec<f64>,
    pub normalized_rate: Vec<f64>,
    pub damping: Vec<f64>,
    pub transmissivity: Vec<f64>,
}

pub fn rate_curve(model: &DecayModel, t_max: f64, points: usize) -> cvqkd_core::Result<RateCurve> {
    let scale = match model.asymptotic_rate() {
        r if r > 0.0 => r,
        _ => 1.0,
    };
    let mut curve = RateCurve {
        t: Vec::with_capacity(points),
        normalized_rate: Vec::with_capacity(points),
        damping: Vec::with_capacity(points),
        transmissivity: Vec::with_capacity(points),
    };
    for t in grid(0.0, t_max, points) {
        let damping = model.accumulated_damping(t)?;
        curve.t.push(t);
        curve.normalized_rate.push(model.rate(t)? / scale);
        curve.damping.push(damping);
        curve.transmissivity.push((-damping).exp());
    }
    Ok(curve)
}

pub fn cmd_rates(spec: &ExperimentSpec, out: &Path) -> Result<RateCurve, CommandError> {
    fs::create_dir_all(out)?;
    let model = &spec.session.profile.model;
    let curve = rate_curve(model, spec.rates_t_max, spec.rates_points).map_err(runtime)?;
    let rows: Vec<Vec<f64>> = (0..curve.t.len())
        .map(|i| {
            vec![
                curve.t[i],
                curve.normalized_rate[i],
                curve.damping[i],
                curve.transmissivity[i],
            ]
        })
        .collect();
    let notes = vec![format!(
        "model: {}",
        serde_json::to_string(model).unwrap_or_default()
    )];
    write_csv(
        &out.join("rates.csv"),
        &Provenance::new(&spec.spec_hash, spec.seed()),
        &notes,
        &["t", "gamma_over_gamma_m", "damping", "transmissivity"],
        &rows,
    )?;
    Ok(curve)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct SessionReport<'a> {
    repetition: usize,
    seed: u64,
    report: &'a DetectionReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LocalizationSummary {
    pub located: usize,
    pub entire_window: usize,
    pub no_solution: usize,
    /// Median over sessions of the candidate nearest the window start.
    pub median_candidate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Aggregate {
    pub repetitions: usize,
    pub errors: usize,
    pub error_messages: Vec<String>,
    pub clean: usize,
    pub eve_present: usize,
    pub inconclusive: usize,
    pub detection_rate: f64,
    pub mean_observed_shift: f64,
    pub mean_standard_error: f64,
    pub expected_shift_clean: ShiftPrediction,
    pub expected_shift_attacked: Option<ShiftPrediction>,
    pub max_attack_discrepancy: f64,
    pub t_e_star: f64,
    pub threshold_transmission: f64,
    pub security: Option<SecurityAssessment>,
    pub localization: LocalizationSummary,
}

fn median(mut xs: Vec<f64>) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    Some(if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    })
}

fn reference_amplitude(spec: &ExperimentSpec) -> f64 {
    let a = spec.session.reference_amplitude;
    a.re.abs().max(a.im.abs())
}

/// Runs every repetition and summarizes. With `out` set, per-session files
/// are written according to the spec's output sinks.
pub fn run_batch(spec: &ExperimentSpec, out: Option<&Path>) -> Result<Aggregate, CommandError> {
    let session = &spec.session;
    let model = &session.profile.model;
    let tau = session.tau();
    let amplitude = reference_amplitude(spec);
    let resolution = spec.detection.resolution_for(model, tau);

    let expected_clean =
        expected_shift_clean(model, amplitude, tau, session.delta_t).map_err(runtime)?;
    let expected_attacked = spec
        .attack
        .map(|a| expected_shift_attacked(model, amplitude, a.t_e, session.delta_t))
        .transpose()
        .map_err(runtime)?;
    let max_disc = max_attack_discrepancy(model, amplitude, tau, session.delta_t, resolution)
        .map_err(runtime)?;
    let t_e_star = min_detectable_attack_time(
        model,
        amplitude,
        session.delta_t,
        spec.detection.epsilon,
        tau,
        resolution,
    )
    .map_err(runtime)?;
    let threshold_transmission = secure_transmission_bound(model, t_e_star).map_err(runtime)?;
    let security = spec
        .attack
        .map(|a| assess_security(model, a.t_e, tau, session.modulation_variance))
        .transpose()
        .map_err(runtime)?;

    if let Some(dir) = out {
        if spec.outputs.reports {
            fs::create_dir_all(dir.join("reports"))?;
        }
        if spec.outputs.transcripts {
            fs::create_dir_all(dir.join("transcripts"))?;
        }
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.threads)
        .build()
        .map_err(|e| CommandError::Runtime(e.to_string()))?;
    let results: Vec<Result<DetectionReport, String>> = pool.install(|| {
        (0..spec.repetitions)
            .into_par_iter()
            .map(|k| {
                let mut config = session.clone();
                config.seed = derive_seed(session.seed, k as u64);
                let transcript =
                    run_session(&config, spec.attack.as_ref()).map_err(|e| e.to_string())?;
                let report =
                    detection::analyze(&transcript, &spec.detection).map_err(|e| e.to_string())?;
                if let Some(dir) = out {
                    let prov = Provenance::new(&spec.spec_hash, config.seed);
                    if spec.outputs.transcripts {
                        write_transcript(
                            &dir.join(format!("transcripts/session_{k:05}.jsonl")),
                            &prov,
                            &transcript,
                        )
                        .map_err(|e| e.to_string())?;
                    }
                    if spec.outputs.reports {
                        let body = SessionReport {
                            repetition: k,
                            seed: config.seed,
                            report: &report,
                        };
                        write_json(
                            &dir.join(format!("reports/session_{k:05}.json")),
                            &prov,
                            &body,
                        )
                        .map_err(|e| e.to_string())?;
                    }
                }
                Ok(report)
            })
            .collect()
    });

    let mut agg = Aggregate {
        repetitions: spec.repetitions,
        errors: 0,
        error_messages: Vec::new(),
        clean: 0,
        eve_present: 0,
        inconclusive: 0,
        detection_rate: 0.0,
        mean_observed_shift: 0.0,
        mean_standard_error: 0.0,
        expected_shift_clean: expected_clean,
        expected_shift_attacked: expected_attacked,
        max_attack_discrepancy: max_disc,
        t_e_star,
        threshold_transmission,
        security,
        localization: LocalizationSummary {
            located: 0,
            entire_window: 0,
            no_solution: 0,
            median_candidate: None,
        },
    };
    let mut nearest = Vec::new();
    let mut ok = 0usize;
    for (k, r) in results.into_iter().enumerate() {
        let report = match r {
            Ok(report) => report,
            Err(msg) => {
                agg.errors += 1;
                agg.error_messages.push(format!("repetition {k}: {msg}"));
                continue;
            }
        };
        ok += 1;
        match report.verdict {
            Verdict::Clean => agg.clean += 1,
            Verdict::EvePresent => agg.eve_present += 1,
            Verdict::Inconclusive => agg.inconclusive += 1,
        }
        agg.mean_observed_shift += report.primary().observed.shift;
        agg.mean_standard_error += report.primary().observed.standard_error;
        match &report.localization {
            Localization::EntireWindow => agg.localization.entire_window += 1,
            Localization::NoSolution { .. } => agg.localization.no_solution += 1,
            Localization::Candidates { candidates } => {
                agg.localization.located += 1;
                nearest.push(candidates[0].t_e);
            }
        }
    }
    if ok > 0 {
        agg.detection_rate = agg.eve_present as f64 / ok as f64;
        agg.mean_observed_shift /= ok as f64;
        agg.mean_standard_error /= ok as f64;
    }
    agg.localization.median_candidate = median(nearest);
    Ok(agg)
}

pub fn cmd_simulate(spec: &ExperimentSpec, out: &Path) -> Result<Aggregate, CommandError> {
    fs::create_dir_all(out)?;
    let agg = run_batch(spec, Some(out))?;
    write_json(
        &out.join("aggregate.json"),
        &Provenance::new(&spec.spec_hash, spec.seed()),
        &agg,
    )?;
    Ok(agg)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThresholdRow {
    pub epsilon: f64,
    pub t_e_star: f64,
    pub damping_at_t_e_star: f64,
    pub eta_threshold: f64,
}

pub const FEASIBILITY_RATIO: f64 = 0.1;

pub fn threshold_table(
    spec: &ExperimentSpec,
) -> Result<(Vec<ThresholdRow>, Vec<String>), CommandError> {
    let session = &spec.session;
    let model = &session.profile.model;
    let tau = session.tau();
    let amp = reference_amplitude(spec);
    let dt = session.delta_t;
    let resolution = spec.detection.resolution_for(model, tau);
    let rate_tau = model.rate(tau).map_err(runtime)?;
    let gap =
        |s: f64| -> cvqkd_core::Result<f64> { Ok((amp * dt * (model.rate(s)? - rate_tau)).abs()) };

    let mut rows = Vec::with_capacity(spec.threshold_steps);
    match spec.threshold_sweep {
        ThresholdSweep::Epsilon => {
            let widest = grid(0.0, tau, resolution)
                .map(&gap)
                .try_fold(0.0f64, |m, g| g.map(|g| m.max(g)))
                .map_err(runtime)?;
            let max = spec.threshold_max.unwrap_or(1.1 * widest);
            for epsilon in grid(0.0, max, spec.threshold_steps) {
                let t_e_star = min_detectable_attack_time(model, amp, dt, epsilon, tau, resolution)
                    .map_err(runtime)?;
                let damping = model.accumulated_damping(t_e_star).map_err(runtime)?;
                rows.push(ThresholdRow {
                    epsilon,
                    t_e_star,
                    damping_at_t_e_star: damping,
                    eta_threshold: secure_transmission_bound(model, t_e_star).map_err(runtime)?,
                });
            }
        }
        ThresholdSweep::TeStar => {
            let max = spec.threshold_max.unwrap_or(tau);
            for t_e_star in grid(0.0, max, spec.threshold_steps) {
                rows.push(ThresholdRow {
                    epsilon: gap(t_e_star).map_err(runtime)?,
                    t_e_star,
                    damping_at_t_e_star: model.accumulated_damping(t_e_star).map_err(runtime)?,
                    eta_threshold: secure_transmission_bound(model, t_e_star).map_err(runtime)?,
                });
            }
        }
    }

    let mut notes = vec![
        format!("sweep: {}", spec.threshold_sweep),
        format!("tau: {tau:?}"),
    ];
    match model.reservoir_correlation_time() {
        Ok(tau_r) => {
            let ratio = tau_r / tau;
            notes.push(format!("tau_r_over_tau: {ratio:?}"));
            if ratio < FEASIBILITY_RATIO {
                notes.push(
                    "feasibility: tau_R << tau; losses before any hidden tap are negligible, so the threshold stays close to 0.5"
                        .into(),
                );
            }
        }
        Err(_) => {
            notes.push("tau_r_over_tau: n/a (no reservoir correlation time for this model)".into())
        }
    }
    Ok((rows, notes))
}

pub fn cmd_threshold(spec: &ExperimentSpec, out: &Path) -> Result<Vec<ThresholdRow>, CommandError> {
    fs::create_dir_all(out)?;
    let (rows, notes) = threshold_table(spec)?;
    let table: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| {
            vec![
                r.epsilon,
                r.t_e_star,
                r.damping_at_t_e_star,
                r.eta_threshold,
            ]
        })
        .collect();
    write_csv(
        &out.join("threshold.csv"),
        &Provenance::new(&spec.spec_hash, spec.seed()),
        &notes,
        &[
            "epsilon",
            "t_e_star",
            "damping_at_t_e_star",
            "eta_threshold",
        ],
        &table,
    )?;
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub values: Vec<f64>,
    pub aggregate: Aggregate,
}

/// Cartesian product over the spec's sweep axes; each point runs a batch
/// without per-session files.
pub fn cmd_sweep(spec: &ExperimentSpec, out: &Path) -> Result<Vec<SweepPoint>, CommandError> {
    if spec.sweep.is_empty() {
        return Err(ConfigError::Invalid {
            key: "sweep".into(),
            message: "no sweep axes given".into(),
        }
        .into());
    }
    fs::create_dir_all(out)?;
    let mut points: Vec<Vec<f64>> = vec![Vec::new()];
    for (_, values) in &spec.sweep {
        points = points
            .into_iter()
            .flat_map(|p| {
                values.iter().map(move |&v| {
                    let mut q = p.clone();
                    q.push(v);
                    q
                })
            })
            .collect();
    }
    let mut results = Vec::with_capacity(points.len());
    for values in points {
        let mut point = spec.clone();
        for ((key, _), &v) in spec.sweep.iter().zip(&values) {
            point = point.with_override(key, v)?;
        }
        let aggregate = run_batch(&point, None)?;
        results.push(SweepPoint { values, aggregate });
    }

    let mut columns: Vec<&str> = spec.sweep.iter().map(|(k, _)| k.as_str()).collect();
    columns.extend([
        "repetitions",
        "errors",
        "detection_rate",
        "mean_observed_shift",
        "mean_standard_error",
        "expected_shift_clean",
        "expected_shift_attacked",
        "t_e_star",
        "threshold_transmission",
    ]);
    let rows: Vec<Vec<f64>> = results
        .iter()
        .map(|p| {
            let a = &p.aggregate;
            let mut row = p.values.clone();
            row.extend([
                a.repetitions as f64,
                a.errors as f64,
                a.detection_rate,
                a.mean_observed_shift,
                a.mean_standard_error,
                a.expected_shift_clean.exact,
                a.expected_shift_attacked.map_or(f64::NAN, |s| s.exact),
                a.t_e_star,
                a.threshold_transmission,
            ]);
            row
        })
        .collect();
    write_csv(
        &out.join("sweep.csv"),
        &Provenance::new(&spec.spec_hash, spec.seed()),
        &[],
        &columns,
        &rows,
    )?;
    Ok(results)
}
