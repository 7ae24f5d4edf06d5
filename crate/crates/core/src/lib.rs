//! Simulation and analysis of coherent-state continuous-variable quantum key
//! distribution over lossy lines whose decay rate depends on time.
//!
//! The crate covers the loss laws ([`decay`]), the Gaussian measurement
//! model ([`gaussian`]), full protocol sessions with delayed reference pulses
//! ([`protocol`]), the beam-splitter attack and its information balance
//! ([`adversary`]), and the post-session statistics that reveal and locate an
//! eavesdropper ([`detection`]).

pub mod adversary;
pub mod decay;
pub mod detection;
pub mod error;
pub mod gaussian;
pub mod numeric;
pub mod protocol;
pub mod streams;

pub use adversary::{AttackConfig, EveTransmissivity, ResolvedAttack, SecurityAssessment};
pub use decay::{DampingProfile, DecayModel, RateInversion};
pub use detection::{analyze, DetectionConfig, DetectionReport, Localization, Verdict};
pub use error::{Error, Result};
pub use gaussian::{CoherentAmplitude, HomodyneOutcome, QuadratureBasis, SHOT_NOISE};
pub use protocol::{
    run_session, PulseKind, PulseRecord, Route, RouteDisclosure, SessionConfig, SessionTranscript,
};
