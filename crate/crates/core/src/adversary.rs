//! The passive beam-splitter attack and its information balance.
//!
//! Eve taps the line at position `t_E` with a splitter of transmissivity
//! `η_E`, keeps the reflected arm and forwards the rest to Bob over a
//! lossless link. She knows the loss law, the line length and every public
//! disclosure, but not the per-pulse routes until they are announced.

use serde::{Deserialize, Serialize};

use crate::decay::DecayModel;
use crate::error::{ensure_domain, Result};
use crate::gaussian::SHOT_NOISE;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EveTransmissivity {
    /// Tuned so Bob's ordinary-route transmission matches the clean line.
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttackConfig {
    pub t_e: f64,
    pub eta_e: EveTransmissivity,
}

/// An attack with its transmissivity fixed for a particular line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResolvedAttack {
    pub t_e: f64,
    pub eta_e: f64,
}

impl AttackConfig {
    pub fn auto(t_e: f64) -> Self {
        Self {
            t_e,
            eta_e: EveTransmissivity::Auto,
        }
    }

    pub fn fixed(t_e: f64, eta_e: f64) -> Self {
        Self {
            t_e,
            eta_e: EveTransmissivity::Fixed(eta_e),
        }
    }

    pub fn resolve(&self, model: &DecayModel, tau: f64) -> Result<ResolvedAttack> {
        check_position(self.t_e, tau)?;
        let eta_e = match self.eta_e {
            EveTransmissivity::Auto => optimal_transmissivity(model, self.t_e, tau)?,
            EveTransmissivity::Fixed(eta) => {
                ensure_domain((0.0..=1.0).contains(&eta), "eta_e", eta, "0 <= eta_e <= 1")?;
                eta
            }
        };
        Ok(ResolvedAttack {
            t_e: self.t_e,
            eta_e,
        })
    }
}

fn check_position(t_e: f64, tau: f64) -> Result<()> {
    ensure_domain(t_e >= 0.0 && t_e <= tau, "t_e", t_e, "0 <= t_e <= tau")
}

/// The splitter transmissivity that leaves Bob's ordinary-route signal
/// unchanged: `η_E = e^{-(Γ(τ) - Γ(t_E))}`.
pub fn optimal_transmissivity(model: &DecayModel, t_e: f64, tau: f64) -> Result<f64> {
    check_position(t_e, tau)?;
    let remaining = model.accumulated_damping(tau)? - model.accumulated_damping(t_e)?;
    Ok((-remaining).exp().min(1.0))
}

/// Fraction of Alice's signal intensity that ends up in Eve's stored arm
/// under the optimal attack, `e^{-Γ(t_E)} - e^{-Γ(τ)}`.
pub fn eve_effective_transmission(model: &DecayModel, t_e: f64, tau: f64) -> Result<f64> {
    check_position(t_e, tau)?;
    let at_tap = model.transmissivity(t_e)?;
    let at_bob = model.transmissivity(tau)?;
    Ok((at_tap - at_bob).max(0.0))
}

/// Shannon information, in bits per quadrature, that a homodyne receiver
/// gains about a Gaussian modulation of variance `v_a` seen through a pure
/// loss channel of transmission `t_channel`.
pub fn mutual_information(v_a: f64, t_channel: f64, n0: f64) -> f64 {
    0.5 * (t_channel * v_a / n0).ln_1p() / std::f64::consts::LN_2
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SecurityAssessment {
    pub i_ab: f64,
    pub i_ae: f64,
    pub margin: f64,
    pub secure: bool,
    pub eta_threshold: f64,
}

/// Compares Bob's and Eve's information under the optimal attack at `t_e`.
///
/// `secure` is decided on transmissions (`e^{-Γ(τ)} >= ½e^{-Γ(t_E)}`), which
/// is the same ordering as the information comparison but free of rounding
/// in the logarithms.
pub fn assess_security(
    model: &DecayModel,
    t_e: f64,
    tau: f64,
    v_a: f64,
) -> Result<SecurityAssessment> {
    check_position(t_e, tau)?;
    ensure_domain(v_a >= 0.0, "v_a", v_a, "v_a >= 0")?;
    let t_bob = model.transmissivity(tau)?;
    let t_eve = eve_effective_transmission(model, t_e, tau)?;
    let eta_threshold = security_threshold(model, t_e)?;
    let i_ab = mutual_information(v_a, t_bob, SHOT_NOISE);
    let i_ae = mutual_information(v_a, t_eve, SHOT_NOISE);
    Ok(SecurityAssessment {
        i_ab,
        i_ae,
        margin: i_ab - i_ae,
        secure: t_bob >= eta_threshold,
        eta_threshold,
    })
}

/// Lowest overall transmission that is still secure when attacks beyond
/// `t_e_star` go unnoticed: `½e^{-Γ(t_E*)}`.
pub fn security_threshold(model: &DecayModel, t_e_star: f64) -> Result<f64> {
    Ok(0.5 * model.transmissivity(t_e_star)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ld() -> DecayModel {
        DecayModel::lorentz_drude(0.4, 1.0, 3.0).unwrap()
    }

    #[test]
    fn optimal_transmissivity_examples() {
        let m = ld();
        assert_eq!(
            optimal_transmissivity(&m, 0.0, 2.0).unwrap(),
            m.transmissivity(2.0).unwrap()
        );
        assert_eq!(optimal_transmissivity(&m, 2.0, 2.0).unwrap(), 1.0);
        let mk = DecayModel::markovian(0.5).unwrap();
        let eta = optimal_transmissivity(&mk, 0.5, 1.0).unwrap();
        let via_damping =
            (-(mk.accumulated_damping(1.0).unwrap() - mk.accumulated_damping(0.5).unwrap())).exp();
        assert!((eta - (-0.5f64).exp()).abs() < 1e-15);
        assert_eq!(eta, via_damping);
        assert!(optimal_transmissivity(&m, 2.1, 2.0).is_err());
        assert!(optimal_transmissivity(&m, -0.1, 2.0).is_err());
    }

    #[test]
    fn eve_transmission_examples() {
        let m = ld();
        assert_eq!(eve_effective_transmission(&m, 2.0, 2.0).unwrap(), 0.0);
        let t0 = eve_effective_transmission(&m, 0.0, 2.0).unwrap();
        assert!((t0 - (1.0 - m.transmissivity(2.0).unwrap())).abs() < 1e-15);
    }

    #[test]
    fn mutual_information_examples() {
        assert_eq!(mutual_information(5.0, 0.0, 0.25), 0.0);
        assert!((mutual_information(0.75, 1.0, 0.25) - 1.0).abs() < 1e-15);
        assert_eq!(
            mutual_information(2.0, 0.3, 0.25),
            mutual_information(2.0, 0.3, 0.25)
        );
    }

    #[test]
    fn markovian_half_transmission_is_the_boundary() {
        let g = 0.5f64.ln().abs() / 2.0;
        let m = DecayModel::markovian(g).unwrap();
        let a = assess_security(&m, 0.0, 1.0, 2.5).unwrap();
        assert!(a.margin.abs() < 1e-12, "{a:?}");
        assert_eq!(a.eta_threshold, 0.5);
    }

    #[test]
    fn attack_at_receiver_leaks_nothing() {
        let m = ld();
        let a = assess_security(&m, 5.0, 5.0, 10.0).unwrap();
        assert_eq!(a.i_ae, 0.0);
        assert!(a.secure);
    }

    #[test]
    fn fixed_transmissivity_is_validated() {
        let m = ld();
        assert!(AttackConfig::fixed(0.5, 1.2).resolve(&m, 1.0).is_err());
        assert!(AttackConfig::auto(1.5).resolve(&m, 1.0).is_err());
        assert_eq!(
            AttackConfig::fixed(0.5, 0.3)
                .resolve(&m, 1.0)
                .unwrap()
                .eta_e,
            0.3
        );
    }

    #[test]
    fn threshold_examples() {
        let m = ld();
        assert_eq!(security_threshold(&m, 0.0).unwrap(), 0.5);
        let mk = DecayModel::markovian(2f64.ln() / 2.0).unwrap();
        assert!((security_threshold(&mk, 1.0).unwrap() - 0.25).abs() < 1e-15);
    }
}
