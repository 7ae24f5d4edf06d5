//! One protocol session: Gaussian key pulses, randomly routed reference
//! pulses, propagation through the lossy line (optionally tapped by Eve),
//! and Bob's homodyne measurement.
//!
//! Reference pulses use the same line as key pulses but may be sent with an
//! extra delay `Δt` inserted before the line. Bob cannot tell the routes
//! apart, so he rescales every outcome by the ordinary-line factor
//! `e^{Γ(τ)/2}`. Routes are disclosed only after the session.

use rand::seq::index;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::adversary::{AttackConfig, ResolvedAttack};
use crate::decay::{DampingProfile, DecayModel};
use crate::error::{ensure_domain, Result};
use crate::gaussian::{
    attenuate, homodyne_sample, rescale_outcome, CoherentAmplitude, HomodyneOutcome,
    QuadratureBasis, SHOT_NOISE,
};
use crate::streams;

const LAYOUT_STREAM: u64 = 0;
const KEY_STREAM: u64 = 1;
const ROUTE_STREAM: u64 = 2;
const FIRST_PULSE_STREAM: u64 = 3;

pub const DEFAULT_N_REF: usize = 10_000;
pub const DEFAULT_N_KEY: usize = 10_000;
pub const DEFAULT_REFERENCE_AMPLITUDE: f64 = 20.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SessionConfig {
    pub profile: DampingProfile,
    pub delta_t: f64,
    pub modulation_variance: f64,
    pub reference_amplitude: CoherentAmplitude,
    pub n_key: usize,
    pub n_ref: usize,
    pub seed: u64,
}

impl SessionConfig {
    /// Session with default settings: `V_A = 10 N₀`, `|α_0| = 20` along X,
    /// 10⁴ key and 10⁴ reference pulses, and `Δt = 0.05/ω_c` for a
    /// Lorentz-Drude line (`0.01 τ` otherwise).
    pub fn with_defaults(profile: DampingProfile, seed: u64) -> Self {
        let delta_t = default_delay(&profile);
        Self {
            profile,
            delta_t,
            modulation_variance: 10.0 * SHOT_NOISE,
            reference_amplitude: CoherentAmplitude {
                re: DEFAULT_REFERENCE_AMPLITUDE,
                im: 0.0,
            },
            n_key: DEFAULT_N_KEY,
            n_ref: DEFAULT_N_REF,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        ensure_domain(
            self.delta_t > 0.0 && self.delta_t.is_finite(),
            "delta_t",
            self.delta_t,
            "delta_t > 0",
        )?;
        ensure_domain(
            self.modulation_variance >= 0.0 && self.modulation_variance.is_finite(),
            "modulation_variance",
            self.modulation_variance,
            "modulation_variance >= 0",
        )?;
        CoherentAmplitude::new(self.reference_amplitude.re, self.reference_amplitude.im)?;
        Ok(())
    }

    /// A note when `Δt` is too long for the first-order shift formulas to be
    /// accurate (`Δt > 0.1/max(ω_0, ω_c)`).
    pub fn delay_warning(&self) -> Option<String> {
        if let DecayModel::OhmicLorentzDrude {
            omega_0, omega_c, ..
        } = self.profile.model
        {
            let limit = 0.1 / omega_0.max(omega_c);
            if self.delta_t > limit {
                return Some(format!(
                    "delta_t = {} exceeds 0.1/max(omega_0, omega_c) = {limit}; first-order shifts will be inaccurate",
                    self.delta_t
                ));
            }
        }
        None
    }

    pub fn tau(&self) -> f64 {
        self.profile.horizon
    }

    pub fn n_pulses(&self) -> usize {
        self.n_key + self.n_ref
    }
}

pub fn default_delay(profile: &DampingProfile) -> f64 {
    match profile.model {
        DecayModel::OhmicLorentzDrude { omega_c, .. } => 0.05 / omega_c,
        _ => 0.01 * profile.horizon,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PulseKind {
    Key,
    Reference,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Route {
    Ordinary,
    Delayed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseRecord {
    pub index: usize,
    pub kind: PulseKind,
    pub route: Route,
    pub sent: CoherentAmplitude,
    pub basis: QuadratureBasis,
    pub outcome: HomodyneOutcome,
}

/// Post-session announcement of the route a reference pulse took.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RouteDisclosure {
    pub index: usize,
    pub route: Route,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SessionTranscript {
    pub config: SessionConfig,
    pub attack: Option<AttackConfig>,
    pub resolved_attack: Option<ResolvedAttack>,
    pub pulses: Vec<PulseRecord>,
    pub disclosure: Vec<RouteDisclosure>,
}

impl SessionTranscript {
    /// Reference pulses paired with their disclosed routes.
    pub fn disclosed_references(&self) -> impl Iterator<Item = (&PulseRecord, Route)> + '_ {
        self.disclosure
            .iter()
            .map(|d| (&self.pulses[d.index], d.route))
    }
}

/// Alice's key amplitudes: independent zero-mean Gaussian quadratures of
/// variance `V_A` each.
pub fn generate_key_amplitudes<R: Rng + ?Sized>(
    config: &SessionConfig,
    rng: &mut R,
) -> Vec<CoherentAmplitude> {
    let sd = config.modulation_variance.sqrt();
    (0..config.n_key)
        .map(|_| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            CoherentAmplitude {
                re: sd * re,
                im: sd * im,
            }
        })
        .collect()
}

/// Fair, independent route choices for the reference pulses.
pub fn route_reference_pulses<R: Rng + ?Sized>(config: &SessionConfig, rng: &mut R) -> Vec<Route> {
    (0..config.n_ref)
        .map(|_| {
            if rng.gen::<bool>() {
                Route::Delayed
            } else {
                Route::Ordinary
            }
        })
        .collect()
}

/// End-to-end intensity transmission from Alice to Bob for one route.
///
/// The delay sits at the start of the line, so on the delayed route every
/// point of the line, including Eve's tap, is reached `Δt` later. After the
/// tap the signal travels to Bob without loss.
pub fn effective_transmission(
    profile: &DampingProfile,
    delta_t: f64,
    route: Route,
    attack: Option<&ResolvedAttack>,
) -> Result<f64> {
    let model = &profile.model;
    let shift = match route {
        Route::Ordinary => 0.0,
        Route::Delayed => delta_t,
    };
    match attack {
        None => model.transmissivity(profile.horizon + shift),
        Some(a) => {
            ensure_domain(
                a.t_e >= 0.0 && a.t_e <= profile.horizon,
                "t_e",
                a.t_e,
                "0 <= t_e <= tau",
            )?;
            Ok(model.transmissivity(a.t_e + shift)? * a.eta_e)
        }
    }
}

/// Bob's side of a single pulse: random basis, homodyne draw, rescaling by
/// the ordinary-line loss. Takes no route information.
fn bob_measure<R: Rng + ?Sized>(
    received: CoherentAmplitude,
    eta_ordinary: f64,
    rng: &mut R,
) -> Result<HomodyneOutcome> {
    let basis = QuadratureBasis::random(rng);
    rescale_outcome(homodyne_sample(received, basis, rng), eta_ordinary)
}

/// Runs a full session. Deterministic in `(config.seed, attack)`.
pub fn run_session(
    config: &SessionConfig,
    attack: Option<&AttackConfig>,
) -> Result<SessionTranscript> {
    config.validate()?;
    let profile = &config.profile;
    let resolved = attack
        .map(|a| a.resolve(&profile.model, profile.horizon))
        .transpose()?;

    let eta_ordinary_clean = profile.model.transmissivity(profile.horizon)?;
    let eta_ordinary =
        effective_transmission(profile, config.delta_t, Route::Ordinary, resolved.as_ref())?;
    let eta_delayed =
        effective_transmission(profile, config.delta_t, Route::Delayed, resolved.as_ref())?;

    let total = config.n_pulses();
    let mut is_reference = vec![false; total];
    let mut layout_rng = streams::stream(config.seed, LAYOUT_STREAM);
    let mut ref_slots: Vec<usize> = index::sample(&mut layout_rng, total, config.n_ref).into_vec();
    ref_slots.sort_unstable();
    for &i in &ref_slots {
        is_reference[i] = true;
    }

    let keys = generate_key_amplitudes(config, &mut streams::stream(config.seed, KEY_STREAM));
    let routes = route_reference_pulses(config, &mut streams::stream(config.seed, ROUTE_STREAM));

    let mut keys = keys.into_iter();
    let mut routes = routes.into_iter();
    let mut pulses = Vec::with_capacity(total);
    let mut disclosure = Vec::with_capacity(config.n_ref);
    for (i, &reference) in is_reference.iter().enumerate() {
        let (kind, route, sent) = if reference {
            let route = routes.next().expect("one route per reference slot");
            disclosure.push(RouteDisclosure { index: i, route });
            (PulseKind::Reference, route, config.reference_amplitude)
        } else {
            let sent = keys.next().expect("one key per key slot");
            (PulseKind::Key, Route::Ordinary, sent)
        };
        let eta = match route {
            Route::Ordinary => eta_ordinary,
            Route::Delayed => eta_delayed,
        };
        let received = attenuate(sent, eta)?;
        let mut rng = streams::stream(config.seed, FIRST_PULSE_STREAM + i as u64);
        let outcome = bob_measure(received, eta_ordinary_clean, &mut rng)?;
        pulses.push(PulseRecord {
            index: i,
            kind,
            route,
            sent,
            basis: outcome.basis,
            outcome,
        });
    }

    Ok(SessionTranscript {
        config: config.clone(),
        attack: attack.copied(),
        resolved_attack: resolved,
        pulses,
        disclosure,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(n_key: usize, n_ref: usize) -> SessionConfig {
        let model = DecayModel::lorentz_drude(0.5, 0.2, 1.0).unwrap();
        let mut c = SessionConfig::with_defaults(DampingProfile::new(model, 3.0).unwrap(), 9);
        c.n_key = n_key;
        c.n_ref = n_ref;
        c
    }

    #[test]
    fn zero_variance_keys_are_vacuum() {
        let mut c = config(50, 0);
        c.modulation_variance = 0.0;
        let keys = generate_key_amplitudes(&c, &mut streams::stream(1, 1));
        assert!(keys.iter().all(|k| *k == CoherentAmplitude::VACUUM));
    }

    #[test]
    fn no_reference_pulses_no_routes() {
        let c = config(10, 0);
        assert!(route_reference_pulses(&c, &mut streams::stream(1, 2)).is_empty());
    }

    #[test]
    fn routing_is_reproducible() {
        let c = config(0, 500);
        let a = route_reference_pulses(&c, &mut streams::stream(4, 2));
        let b = route_reference_pulses(&c, &mut streams::stream(4, 2));
        assert_eq!(a, b);
    }

    #[test]
    fn markovian_clean_ordinary_transmission() {
        let m = DecayModel::markovian(0.2).unwrap();
        let p = DampingProfile::new(m, 2.0).unwrap();
        let eta = effective_transmission(&p, 0.1, Route::Ordinary, None).unwrap();
        assert!((eta - (-0.8f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn attack_position_checked() {
        let c = config(1, 1);
        let bad = ResolvedAttack {
            t_e: 4.0,
            eta_e: 0.5,
        };
        assert!(
            effective_transmission(&c.profile, c.delta_t, Route::Ordinary, Some(&bad)).is_err()
        );
        assert!(run_session(&c, Some(&AttackConfig::auto(3.5))).is_err());
    }

    #[test]
    fn transcript_structure() {
        let c = config(300, 200);
        let t = run_session(&c, None).unwrap();
        assert_eq!(t.pulses.len(), 500);
        assert_eq!(t.disclosure.len(), 200);
        for p in &t.pulses {
            assert!(p.outcome.rescaled);
            assert_eq!(p.basis, p.outcome.basis);
            if p.kind == PulseKind::Key {
                assert_eq!(p.route, Route::Ordinary);
            }
        }
        for d in &t.disclosure {
            assert_eq!(t.pulses[d.index].kind, PulseKind::Reference);
            assert_eq!(t.pulses[d.index].route, d.route);
        }
        assert_eq!(t, run_session(&c, None).unwrap());
    }

    #[test]
    fn delay_warning_threshold() {
        let mut c = config(0, 0);
        assert!(c.delay_warning().is_none());
        c.delta_t = 0.2;
        assert!(c.delay_warning().is_some());
        c.delta_t = 0.0;
        assert!(c.validate().is_err());
    }
}
