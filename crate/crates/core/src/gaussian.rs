//! Coherent amplitudes, pure-loss and beam-splitter maps, and homodyne
//! sampling.
//!
//! Quadratures follow `x = (a + a†)/2`, `p = (a - a†)/(2i)`, so a coherent
//! state `|α⟩` has `⟨x⟩ = Re α`, `⟨p⟩ = Im α` and vacuum variance
//! [`SHOT_NOISE`] `= 1/4` in either quadrature.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_domain, Error, Result};

/// Vacuum quadrature variance `N₀`.
pub const SHOT_NOISE: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CoherentAmplitude {
    pub re: f64,
    pub im: f64,
}

impl CoherentAmplitude {
    pub const VACUUM: Self = Self { re: 0.0, im: 0.0 };

    pub fn new(re: f64, im: f64) -> Result<Self> {
        ensure_domain(re.is_finite(), "re", re, "finite")?;
        ensure_domain(im.is_finite(), "im", im, "finite")?;
        Ok(Self { re, im })
    }

    pub fn real(re: f64) -> Result<Self> {
        Self::new(re, 0.0)
    }

    pub fn norm_sqr(&self) -> f64 {
        self.re * self.re + self.im * self.im
    }

    pub fn norm(&self) -> f64 {
        self.re.hypot(self.im)
    }

    fn scale(self, k: f64) -> Self {
        Self {
            re: self.re * k,
            im: self.im * k,
        }
    }

    /// Quadrature mean carried by this amplitude in `basis`.
    pub fn component(&self, basis: QuadratureBasis) -> f64 {
        match basis {
            QuadratureBasis::X => self.re,
            QuadratureBasis::P => self.im,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum QuadratureBasis {
    X,
    P,
}

impl QuadratureBasis {
    pub const BOTH: [Self; 2] = [Self::X, Self::P];

    /// Fair coin between the two quadratures.
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        if rng.gen::<bool>() {
            Self::X
        } else {
            Self::P
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HomodyneOutcome {
    pub value: f64,
    pub basis: QuadratureBasis,
    pub rescaled: bool,
}

fn check_fraction(name: &'static str, eta: f64) -> Result<()> {
    ensure_domain((0.0..=1.0).contains(&eta), name, eta, "0 <= eta <= 1")
}

/// Pure loss with transmissivity `eta`: `α → √η α`.
pub fn attenuate(alpha: CoherentAmplitude, eta: f64) -> Result<CoherentAmplitude> {
    check_fraction("eta", eta)?;
    Ok(alpha.scale(eta.sqrt()))
}

/// Splits `alpha` on a beam splitter of transmissivity `eta_e`, returning the
/// transmitted and reflected arms.
pub fn beam_splitter(
    alpha: CoherentAmplitude,
    eta_e: f64,
) -> Result<(CoherentAmplitude, CoherentAmplitude)> {
    check_fraction("eta_e", eta_e)?;
    Ok((alpha.scale(eta_e.sqrt()), alpha.scale((1.0 - eta_e).sqrt())))
}

/// Mean and variance of a homodyne measurement of `basis` on `|α⟩`.
pub fn homodyne_distribution(alpha: CoherentAmplitude, basis: QuadratureBasis) -> (f64, f64) {
    (alpha.component(basis), SHOT_NOISE)
}

/// One homodyne draw. Normal variates come from `rand_distr`'s ziggurat
/// sampler.
pub fn homodyne_sample<R: Rng + ?Sized>(
    alpha: CoherentAmplitude,
    basis: QuadratureBasis,
    rng: &mut R,
) -> HomodyneOutcome {
    let (mean, variance) = homodyne_distribution(alpha, basis);
    let z: f64 = rng.sample(StandardNormal);
    HomodyneOutcome {
        value: mean + variance.sqrt() * z,
        basis,
        rescaled: false,
    }
}

/// Undoes the line's amplitude loss by `eta_total^{-1/2}`; the shot noise is
/// amplified to `N₀/eta_total` along with the signal.
pub fn rescale_outcome(outcome: HomodyneOutcome, eta_total: f64) -> Result<HomodyneOutcome> {
    if outcome.rescaled {
        return Err(Error::Usage("outcome has already been rescaled"));
    }
    ensure_domain(
        eta_total > 0.0 && eta_total <= 1.0,
        "eta_total",
        eta_total,
        "0 < eta_total <= 1",
    )?;
    Ok(HomodyneOutcome {
        value: outcome.value / eta_total.sqrt(),
        rescaled: true,
        ..outcome
    })
}
