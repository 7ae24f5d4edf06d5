//! Post-session detection statistics.
//!
//! After the routes of the reference pulses are disclosed, Bob splits his
//! rescaled reference outcomes into the ordinary and delayed populations.
//! On a clean line their means differ by
//! `δx_NE = |α_0|(1 - e^{-(Γ(τ+Δt) - Γ(τ))/2})`; with Eve tapping at `t_E`
//! the delay moves her tap as well and the difference becomes
//! `δx_E = |α_0|(1 - e^{-(Γ(t_E+Δt) - Γ(t_E))/2})`. The two agree whenever the
//! loss is uniform, which is why the test can only work on structured
//! reservoirs.

use serde::Serialize;

use crate::adversary;
use crate::decay::{DecayModel, DEFAULT_GRID_RESOLUTION};
use crate::error::{ensure_domain, Error, Result};
use crate::gaussian::{CoherentAmplitude, QuadratureBasis};
use crate::numeric;
use crate::protocol::{PulseKind, Route, SessionTranscript};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DetectionConfig {
    /// Measurement precision in rescaled quadrature units; acts as a
    /// dead-band on the decision statistic.
    pub epsilon: f64,
    pub significance_sigmas: f64,
    pub grid_resolution: usize,
}

impl Default for DetectionConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.0,
            significance_sigmas: 3.0,
            grid_resolution: DEFAULT_GRID_RESOLUTION,
        }
    }
}

impl DetectionConfig {
    pub fn validate(&self) -> Result<()> {
        ensure_domain(
            self.epsilon >= 0.0 && self.epsilon.is_finite(),
            "epsilon",
            self.epsilon,
            "epsilon >= 0",
        )?;
        ensure_domain(
            self.significance_sigmas > 0.0 && self.significance_sigmas.is_finite(),
            "significance_sigmas",
            self.significance_sigmas,
            "significance_sigmas > 0",
        )?;
        if self.grid_resolution < 2 {
            return Err(Error::Usage("grid resolution must be at least 2"));
        }
        Ok(())
    }

    /// Configured resolution, raised to the model's per-period minimum on
    /// `[0, tau]`.
    pub fn resolution_for(&self, model: &DecayModel, tau: f64) -> usize {
        self.grid_resolution.max(model.min_resolution(0.0, tau))
    }
}

/// Exact and first-order forms of an expected mean shift.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ShiftPrediction {
    pub exact: f64,
    pub first_order: f64,
}

fn shift_at(model: &DecayModel, amplitude: f64, t: f64, delta_t: f64) -> Result<ShiftPrediction> {
    ensure_domain(delta_t > 0.0, "delta_t", delta_t, "delta_t > 0")?;
    let increment = model.accumulated_damping(t + delta_t)? - model.accumulated_damping(t)?;
    Ok(ShiftPrediction {
        exact: (amplitude * -(-0.5 * increment).exp_m1()).abs(),
        first_order: (amplitude * model.rate(t)? * delta_t).abs(),
    })
}

/// Mean shift between the two reference populations on a clean line.
pub fn expected_shift_clean(
    model: &DecayModel,
    amplitude: f64,
    tau: f64,
    delta_t: f64,
) -> Result<ShiftPrediction> {
    shift_at(model, amplitude, tau, delta_t)
}

/// Mean shift when Eve taps the line at `t_e`.
pub fn expected_shift_attacked(
    model: &DecayModel,
    amplitude: f64,
    t_e: f64,
    delta_t: f64,
) -> Result<ShiftPrediction> {
    shift_at(model, amplitude, t_e, delta_t)
}

/// Bases whose quadrature carries part of the reference amplitude.
pub fn informative_bases(alpha0: CoherentAmplitude) -> Vec<QuadratureBasis> {
    let bases: Vec<_> = QuadratureBasis::BOTH
        .into_iter()
        .filter(|&b| alpha0.component(b) != 0.0)
        .collect();
    if bases.is_empty() {
        vec![QuadratureBasis::X]
    } else {
        bases
    }
}

/// Sample statistics of the two disclosed reference populations in one
/// basis. `shift` is oriented so that a positive value means the delayed
/// population is pulled towards zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ObservedShift {
    pub basis: QuadratureBasis,
    pub n_ordinary: usize,
    pub n_delayed: usize,
    pub mean_ordinary: f64,
    pub mean_delayed: f64,
    pub var_ordinary: f64,
    pub var_delayed: f64,
    pub shift: f64,
    pub standard_error: f64,
}

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

pub fn split_and_compare(
    transcript: &SessionTranscript,
    basis: QuadratureBasis,
) -> Result<ObservedShift> {
    let mut ordinary = Vec::new();
    let mut delayed = Vec::new();
    for (pulse, route) in transcript.disclosed_references() {
        debug_assert_eq!(pulse.kind, PulseKind::Reference);
        if pulse.outcome.basis != basis {
            continue;
        }
        match route {
            Route::Ordinary => ordinary.push(pulse.outcome.value),
            Route::Delayed => delayed.push(pulse.outcome.value),
        }
    }
    for (population, xs) in [("ordinary", &ordinary), ("delayed", &delayed)] {
        if xs.len() < 2 {
            return Err(Error::InsufficientData {
                population,
                count: xs.len(),
                needed: 2,
            });
        }
    }
    let (mean_ordinary, var_ordinary) = mean_var(&ordinary);
    let (mean_delayed, var_delayed) = mean_var(&delayed);
    let orientation = if transcript.config.reference_amplitude.component(basis) < 0.0 {
        -1.0
    } else {
        1.0
    };
    Ok(ObservedShift {
        basis,
        n_ordinary: ordinary.len(),
        n_delayed: delayed.len(),
        mean_ordinary,
        mean_delayed,
        var_ordinary,
        var_delayed,
        shift: orientation * (mean_ordinary - mean_delayed),
        standard_error: (var_ordinary / ordinary.len() as f64 + var_delayed / delayed.len() as f64)
            .sqrt(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Clean,
    EvePresent,
    Inconclusive,
}

/// Why a non-alarm verdict cannot rule an attack out.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LimitingFactor {
    /// The statistical band is wider than any attack could shift the data.
    Statistics,
    /// The precision dead-band is wider than any attack could shift the data.
    Precision,
    /// Loss is uniform along the line: every tap position yields the clean
    /// shift, so the test has no power.
    UniformLoss,
}

/// Largest `|δx_E(t_E) - δx_NE|` over tap positions in `[0, τ]`.
pub fn max_attack_discrepancy(
    model: &DecayModel,
    amplitude: f64,
    tau: f64,
    delta_t: f64,
    resolution: usize,
) -> Result<f64> {
    let clean = expected_shift_clean(model, amplitude, tau, delta_t)?.exact;
    let mut worst: f64 = 0.0;
    for t in numeric::grid(0.0, tau, resolution) {
        let attacked = expected_shift_attacked(model, amplitude, t, delta_t)?.exact;
        worst = worst.max((attacked - clean).abs());
    }
    Ok(worst)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Decision {
    pub verdict: Verdict,
    pub deviation: f64,
    pub band: f64,
    pub limiting_factor: Option<LimitingFactor>,
}

/// Compares the observed shift with the clean-line prediction.
///
/// The alarm fires when `|observed - δx_NE| > max(k·SE, ε)`. A statistic
/// sitting exactly on the band edge is inconclusive. Below the band the
/// verdict is clean unless the band is so wide that even the most
/// conspicuous tap position would stay inside it.
pub fn decide(
    observed: &ObservedShift,
    expected_clean: &ShiftPrediction,
    max_discrepancy: f64,
    uniform_loss: bool,
    config: &DetectionConfig,
) -> Decision {
    let statistical = config.significance_sigmas * observed.standard_error;
    let band = statistical.max(config.epsilon);
    let deviation = (observed.shift - expected_clean.exact).abs();
    let dominant = if config.epsilon >= statistical {
        LimitingFactor::Precision
    } else {
        LimitingFactor::Statistics
    };
    let (verdict, limiting_factor) = if deviation > band {
        (Verdict::EvePresent, None)
    } else if deviation == band {
        (Verdict::Inconclusive, Some(dominant))
    } else if uniform_loss {
        (Verdict::Clean, Some(LimitingFactor::UniformLoss))
    } else if band >= max_discrepancy {
        (Verdict::Inconclusive, Some(dominant))
    } else {
        (Verdict::Clean, None)
    };
    Decision {
        verdict,
        deviation,
        band,
        limiting_factor,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Candidate {
    pub t_e: f64,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Localization {
    /// Uniform loss: every position is equally consistent.
    EntireWindow,
    Candidates {
        candidates: Vec<Candidate>,
    },
    /// The shift lies outside the range any tap position can produce.
    NoSolution {
        min_shift: f64,
        max_shift: f64,
    },
}

/// Tap positions consistent with an observed shift, with intervals from
/// `sigmas · standard_error` mapped through the local slope.
#[allow(clippy::too_many_arguments)]
pub fn localize(
    model: &DecayModel,
    observed_shift: f64,
    amplitude: f64,
    delta_t: f64,
    tau: f64,
    resolution: usize,
    standard_error: f64,
    sigmas: f64,
) -> Result<Localization> {
    ensure_domain(
        observed_shift >= 0.0,
        "observed_shift",
        observed_shift,
        ">= 0",
    )?;
    ensure_domain(delta_t > 0.0, "delta_t", delta_t, "delta_t > 0")?;
    if resolution < 2 {
        return Err(Error::Usage("grid resolution must be at least 2"));
    }
    if model.is_constant() {
        return Ok(Localization::EntireWindow);
    }
    let h = |t: f64| {
        shift_at(model, amplitude, t, delta_t)
            .map(|s| s.exact)
            .unwrap_or(f64::NAN)
    };
    let tol = 1e-12 * tau;
    let mut roots = numeric::grid_roots(|t| h(t) - observed_shift, 0.0, tau, resolution, tol);
    let band = sigmas * standard_error;
    if roots.is_empty() {
        let (mut lo, mut hi) = ((0.0, f64::INFINITY), (0.0, f64::NEG_INFINITY));
        for t in numeric::grid(0.0, tau, resolution) {
            let v = h(t);
            if v < lo.1 {
                lo = (t, v);
            }
            if v > hi.1 {
                hi = (t, v);
            }
        }
        if observed_shift < lo.1 && lo.1 - observed_shift <= band {
            roots.push(lo.0);
        } else if observed_shift > hi.1 && observed_shift - hi.1 <= band {
            roots.push(hi.0);
        } else {
            return Ok(Localization::NoSolution {
                min_shift: lo.1,
                max_shift: hi.1,
            });
        }
    }
    let step = 1e-6 * tau;
    let candidates = roots
        .into_iter()
        .map(|t| {
            let (a, b) = ((t - step).max(0.0), (t + step).min(tau));
            let slope = ((h(b) - h(a)) / (b - a)).abs();
            let half = if slope > 0.0 {
                band / slope
            } else {
                f64::INFINITY
            };
            Candidate {
                t_e: t,
                lower: (t - half).max(0.0),
                upper: (t + half).min(tau),
            }
        })
        .collect();
    Ok(Localization::Candidates { candidates })
}

/// Earliest tap position whose rate differs from the rate at the receiver
/// by less than the precision everywhere up to the receiver, i.e. the
/// smallest `t` with `|α_0 Δt (γ(s) - γ(τ))| < ε` for all `s ∈ [t, τ]`.
pub fn min_detectable_attack_time(
    model: &DecayModel,
    amplitude: f64,
    delta_t: f64,
    epsilon: f64,
    tau: f64,
    resolution: usize,
) -> Result<f64> {
    ensure_domain(epsilon >= 0.0, "epsilon", epsilon, "epsilon >= 0")?;
    ensure_domain(tau > 0.0, "tau", tau, "tau > 0")?;
    if resolution < 2 {
        return Err(Error::Usage("grid resolution must be at least 2"));
    }
    let rate_tau = model.rate(tau)?;
    let gap = |s: f64| (amplitude * delta_t * (model.rate(s).unwrap_or(f64::NAN) - rate_tau)).abs();
    let nodes: Vec<f64> = numeric::grid(0.0, tau, resolution).collect();
    let Some(last_visible) = nodes.iter().rposition(|&s| gap(s) >= epsilon) else {
        return Ok(0.0);
    };
    if last_visible == nodes.len() - 1 {
        return Ok(tau);
    }
    let (a, b) = (nodes[last_visible], nodes[last_visible + 1]);
    Ok(numeric::bisect(|s| gap(s) - epsilon, a, b, 1e-12 * tau))
}

/// Overall transmission above which the line is secure given `t_E*`.
pub fn secure_transmission_bound(model: &DecayModel, t_e_star: f64) -> Result<f64> {
    adversary::security_threshold(model, t_e_star)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BasisReport {
    pub basis: QuadratureBasis,
    pub amplitude: f64,
    pub expected_shift_clean: ShiftPrediction,
    pub observed: ObservedShift,
    pub decision: Decision,
    /// Sample variances of the two populations differ beyond the band.
    pub width_anomaly: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DetectionReport {
    pub verdict: Verdict,
    pub bases: Vec<BasisReport>,
    pub max_attack_discrepancy: f64,
    pub localization: Localization,
    pub t_e_star: f64,
    pub threshold_transmission: f64,
}

impl DetectionReport {
    /// Report for the basis carrying the largest share of `α_0`.
    pub fn primary(&self) -> &BasisReport {
        &self.bases[0]
    }
}

fn width_anomaly(o: &ObservedShift, sigmas: f64) -> bool {
    let ratio = o.var_ordinary / o.var_delayed;
    let spread = (2.0 / (o.n_ordinary as f64 - 1.0) + 2.0 / (o.n_delayed as f64 - 1.0)).sqrt();
    (ratio - 1.0).abs() > sigmas * spread
}

/// Full analysis of one transcript.
pub fn analyze(
    transcript: &SessionTranscript,
    config: &DetectionConfig,
) -> Result<DetectionReport> {
    config.validate()?;
    let session = &transcript.config;
    let model = &session.profile.model;
    let tau = session.tau();
    let delta_t = session.delta_t;
    let resolution = config.resolution_for(model, tau);
    let alpha0 = session.reference_amplitude;

    let mut bases = informative_bases(alpha0);
    bases.sort_by(|a, b| {
        alpha0
            .component(*b)
            .abs()
            .total_cmp(&alpha0.component(*a).abs())
    });

    let mut reports = Vec::with_capacity(bases.len());
    let mut worst_discrepancy: f64 = 0.0;
    for basis in bases {
        let amplitude = alpha0.component(basis).abs();
        let expected = expected_shift_clean(model, amplitude, tau, delta_t)?;
        let observed = split_and_compare(transcript, basis)?;
        let max_disc = max_attack_discrepancy(model, amplitude, tau, delta_t, resolution)?;
        worst_discrepancy = worst_discrepancy.max(max_disc);
        let decision = decide(&observed, &expected, max_disc, model.is_constant(), config);
        reports.push(BasisReport {
            basis,
            amplitude,
            expected_shift_clean: expected,
            width_anomaly: width_anomaly(&observed, config.significance_sigmas),
            observed,
            decision,
        });
    }

    let verdict = if reports
        .iter()
        .any(|r| r.decision.verdict == Verdict::EvePresent)
    {
        Verdict::EvePresent
    } else if reports
        .iter()
        .any(|r| r.decision.verdict == Verdict::Inconclusive)
    {
        Verdict::Inconclusive
    } else {
        Verdict::Clean
    };

    let primary = &reports[0];
    let localization = localize(
        model,
        primary.observed.shift.max(0.0),
        primary.amplitude,
        delta_t,
        tau,
        resolution,
        primary.observed.standard_error,
        config.significance_sigmas,
    )?;
    let t_e_star = min_detectable_attack_time(
        model,
        primary.amplitude,
        delta_t,
        config.epsilon,
        tau,
        resolution,
    )?;
    let threshold_transmission = secure_transmission_bound(model, t_e_star)?;

    Ok(DetectionReport {
        verdict,
        bases: reports,
        max_attack_discrepancy: worst_discrepancy,
        localization,
        t_e_star,
        threshold_transmission,
    })
}
