//! Time-dependent loss laws for the transmission line.
//!
//! With the speed of light set to one, a position along the line and the
//! propagation time to reach it are the same number, so every "time" here is
//! also a length.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{ensure_domain, Error, Result};
use crate::numeric;

/// Default number of grid nodes used when scanning a window for roots.
pub const DEFAULT_GRID_RESOLUTION: usize = 10_000;
/// Minimum number of grid nodes per oscillation period `2π/ω_0`.
pub const NODES_PER_PERIOD: usize = 50;

/// A rate law sampled at increasing times, linearly interpolated between
/// samples and held constant after the last one.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateTable {
    times: Vec<f64>,
    rates: Vec<f64>,
    #[serde(skip)]
    cumulative: Vec<f64>,
}

impl RateTable {
    pub fn new(samples: Vec<(f64, f64)>) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::InvalidModel(
                "rate table needs at least two samples".into(),
            ));
        }
        if samples[0].0 != 0.0 {
            return Err(Error::InvalidModel(format!(
                "rate table must start at t = 0, got {}",
                samples[0].0
            )));
        }
        for (i, &(t, r)) in samples.iter().enumerate() {
            if !t.is_finite() || !r.is_finite() || r < 0.0 {
                return Err(Error::InvalidModel(format!(
                    "sample {i}: ({t}, {r}) must be finite with a nonnegative rate"
                )));
            }
            if i > 0 && t <= samples[i - 1].0 {
                return Err(Error::InvalidModel(format!(
                    "sample {i}: time {t} is not strictly greater than {}",
                    samples[i - 1].0
                )));
            }
        }
        let (times, rates): (Vec<f64>, Vec<f64>) = samples.into_iter().unzip();
        let mut cumulative = Vec::with_capacity(times.len());
        cumulative.push(0.0);
        for i in 1..times.len() {
            let seg = (times[i] - times[i - 1]) * (rates[i] + rates[i - 1]);
            cumulative.push(cumulative[i - 1] + seg);
        }
        Ok(Self {
            times,
            rates,
            cumulative,
        })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    /// Index of the segment `[times[i], times[i+1])` containing `t`, or
    /// `None` past the last sample.
    fn segment(&self, t: f64) -> Option<usize> {
        let last = self.times.len() - 1;
        if t >= self.times[last] {
            return None;
        }
        let idx = self.times.partition_point(|&x| x <= t);
        Some(idx - 1)
    }

    fn rate(&self, t: f64) -> f64 {
        match self.segment(t) {
            None => *self.rates.last().unwrap(),
            Some(i) => {
                let w = (t - self.times[i]) / (self.times[i + 1] - self.times[i]);
                self.rates[i] + w * (self.rates[i + 1] - self.rates[i])
            }
        }
    }

    /// Exact `2∫_0^t` of the interpolated rate.
    fn damping(&self, t: f64) -> f64 {
        match self.segment(t) {
            None => {
                let last = self.times.len() - 1;
                self.cumulative[last] + 2.0 * self.rates[last] * (t - self.times[last])
            }
            Some(i) => {
                let r_t = self.rate(t);
                self.cumulative[i] + (t - self.times[i]) * (self.rates[i] + r_t)
            }
        }
    }

    fn is_constant(&self) -> bool {
        self.rates.iter().all(|&r| r == self.rates[0])
    }
}

/// The loss law `γ(t)` of a transmission line coupled to a zero-temperature
/// bosonic reservoir.
///
/// The Lorentz-Drude law is the weak-coupling result; parameters are not
/// checked against that regime.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DecayModel {
    Markovian {
        gamma_m: f64,
    },
    OhmicLorentzDrude {
        gamma_m: f64,
        omega_0: f64,
        omega_c: f64,
    },
    Tabulated(RateTable),
}

fn positive(name: &'static str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidModel(format!(
            "{name} must be positive and finite, got {v}"
        )))
    }
}

fn check_time(t: f64) -> Result<()> {
    ensure_domain(t >= 0.0 && t.is_finite(), "t", t, "t >= 0")
}

/// `(e^w - 1) / w`, accurate near `w = 0`.
fn phi1(w: Complex64) -> Complex64 {
    if w.norm() < 0.5 {
        let mut term = Complex64::new(1.0, 0.0);
        let mut sum = term;
        for k in 2..30 {
            term = term * w / k as f64;
            sum += term;
        }
        sum
    } else {
        (w.exp() - 1.0) / w
    }
}

/// `(e^w - 1 - w) / w²`, accurate near `w = 0`.
fn phi2(w: Complex64) -> Complex64 {
    if w.norm() < 0.5 {
        let mut term = Complex64::new(0.5, 0.0);
        let mut sum = term;
        for k in 3..30 {
            term = term * w / k as f64;
            sum += term;
        }
        sum
    } else {
        (w.exp() - 1.0 - w) / (w * w)
    }
}

impl DecayModel {
    pub fn markovian(gamma_m: f64) -> Result<Self> {
        positive("gamma_m", gamma_m)?;
        Ok(Self::Markovian { gamma_m })
    }

    pub fn lorentz_drude(gamma_m: f64, omega_0: f64, omega_c: f64) -> Result<Self> {
        positive("gamma_m", gamma_m)?;
        positive("omega_0", omega_0)?;
        positive("omega_c", omega_c)?;
        Ok(Self::OhmicLorentzDrude {
            gamma_m,
            omega_0,
            omega_c,
        })
    }

    pub fn tabulated(samples: Vec<(f64, f64)>) -> Result<Self> {
        RateTable::new(samples).map(Self::Tabulated)
    }

    /// The rate the law settles to at long times.
    pub fn asymptotic_rate(&self) -> f64 {
        match self {
            Self::Markovian { gamma_m } | Self::OhmicLorentzDrude { gamma_m, .. } => *gamma_m,
            Self::Tabulated(table) => *table.rates.last().unwrap(),
        }
    }

    /// True when `γ` does not depend on time, so `Γ` composes additively.
    pub fn is_constant(&self) -> bool {
        match self {
            Self::Markovian { .. } => true,
            Self::OhmicLorentzDrude { .. } => false,
            Self::Tabulated(table) => table.is_constant(),
        }
    }

    /// Instantaneous decay rate `γ(t)`.
    pub fn rate(&self, t: f64) -> Result<f64> {
        check_time(t)?;
        Ok(match self {
            Self::Markovian { gamma_m } => *gamma_m,
            Self::OhmicLorentzDrude {
                gamma_m,
                omega_0,
                omega_c,
            } => {
                // γ = γ_M K ∫_0^t e^{-ω_c s} sin(ω_0 s) ds with K = (ω_c² + ω_0²)/ω_0,
                // written through φ1 so small t does not cancel.
                let z = Complex64::new(-omega_c, *omega_0);
                let k = (omega_c * omega_c + omega_0 * omega_0) / omega_0;
                gamma_m * k * t * phi1(z * t).im
            }
            Self::Tabulated(table) => table.rate(t),
        })
    }

    /// Accumulated damping exponent `Γ(t) = 2∫_0^t γ(s) ds`.
    pub fn accumulated_damping(&self, t: f64) -> Result<f64> {
        check_time(t)?;
        Ok(match self {
            Self::Markovian { gamma_m } => 2.0 * gamma_m * t,
            Self::OhmicLorentzDrude {
                gamma_m,
                omega_0,
                omega_c,
            } => {
                let z = Complex64::new(-omega_c, *omega_0);
                let k = (omega_c * omega_c + omega_0 * omega_0) / omega_0;
                2.0 * gamma_m * k * t * t * phi2(z * t).im
            }
            Self::Tabulated(table) => table.damping(t),
        })
    }

    /// `Γ(t)` by adaptive quadrature of the rate law, independent of the
    /// closed forms above.
    pub fn accumulated_damping_quadrature(&self, t: f64) -> Result<f64> {
        check_time(t)?;
        let mut breaks = vec![0.0];
        match self {
            Self::OhmicLorentzDrude { omega_0, .. } => {
                let half_period = PI / omega_0;
                let mut s = half_period;
                while s < t {
                    breaks.push(s);
                    s += half_period;
                }
            }
            Self::Tabulated(table) => {
                breaks.extend(table.times.iter().copied().filter(|&s| s > 0.0 && s < t));
            }
            Self::Markovian { .. } => {}
        }
        breaks.push(t);
        let f = |s: f64| self.rate(s).unwrap_or(0.0);
        let total: f64 = breaks
            .windows(2)
            .map(|w| numeric::integrate(f, w[0], w[1], 1e-14, 0.0))
            .sum();
        Ok(2.0 * total)
    }

    /// Channel transmissivity `η(t) = e^{-Γ(t)}`.
    pub fn transmissivity(&self, t: f64) -> Result<f64> {
        Ok((-self.accumulated_damping(t)?).exp())
    }

    /// Amplitude damping factor `e^{-Γ(t)/2}`.
    pub fn amplitude_factor(&self, t: f64) -> Result<f64> {
        Ok((-0.5 * self.accumulated_damping(t)?).exp())
    }

    /// Reservoir correlation time `τ_R = 1/ω_c`.
    pub fn reservoir_correlation_time(&self) -> Result<f64> {
        match self {
            Self::OhmicLorentzDrude { omega_c, .. } => Ok(1.0 / omega_c),
            _ => Err(Error::UnsupportedModel {
                required: "Lorentz-Drude",
            }),
        }
    }

    /// Fewest grid nodes on `[lo, hi]` that give every oscillation period
    /// at least [`NODES_PER_PERIOD`] nodes.
    pub fn min_resolution(&self, lo: f64, hi: f64) -> usize {
        match self {
            Self::OhmicLorentzDrude { omega_0, .. } => {
                let periods = (hi - lo).abs() * omega_0 / (2.0 * PI);
                (periods * NODES_PER_PERIOD as f64).ceil() as usize + 1
            }
            _ => 2,
        }
    }

    /// Grid resolution for scanning `[lo, hi]`: the default node count, raised
    /// to [`Self::min_resolution`] when oscillations are fast.
    pub fn default_resolution(&self, lo: f64, hi: f64) -> usize {
        DEFAULT_GRID_RESOLUTION.max(self.min_resolution(lo, hi))
    }

    /// All times in `window` where `γ(t) = target`.
    pub fn invert_rate(
        &self,
        target: f64,
        window: (f64, f64),
        resolution: usize,
    ) -> Result<RateInversion> {
        let (lo, hi) = window;
        check_time(lo)?;
        ensure_domain(hi > lo && hi.is_finite(), "window end", hi, "end > start")?;
        if resolution < 2 {
            return Err(Error::Usage("grid resolution must be at least 2"));
        }
        if self.is_constant() {
            return Ok(if self.asymptotic_rate() == target {
                RateInversion::EntireWindow
            } else {
                RateInversion::Roots(Vec::new())
            });
        }
        let tol = 1e-12 * (hi - lo);
        let roots = numeric::grid_roots(
            |t| self.rate(t).map(|r| r - target).unwrap_or(f64::NAN),
            lo,
            hi,
            resolution,
            tol,
        );
        Ok(RateInversion::Roots(roots))
    }
}

/// Outcome of inverting a rate law over a window.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", content = "times", rename_all = "snake_case")]
pub enum RateInversion {
    /// The law is constant and equal to the target everywhere.
    EntireWindow,
    /// Sorted roots; empty when the target is never reached.
    Roots(Vec<f64>),
}

/// A loss law together with the line length `τ`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DampingProfile {
    pub model: DecayModel,
    pub horizon: f64,
}

impl DampingProfile {
    pub fn new(model: DecayModel, horizon: f64) -> Result<Self> {
        ensure_domain(
            horizon > 0.0 && horizon.is_finite(),
            "tau",
            horizon,
            "tau > 0",
        )?;
        Ok(Self { model, horizon })
    }

    pub fn tau(&self) -> f64 {
        self.horizon
    }
}
