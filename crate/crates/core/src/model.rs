//! Constitutive functions: mobilities, running energy and the extended momentum cost.
//!
//! All presets drive the three mobility roles with a single function,
//! `F = G = H`, so `H = G^2 / F` holds wherever `F > 0`. Mobilities are
//! extended by zero outside the admissible density range `[0, rho_max]`.

use crate::error::{Result, SolverError};
use crate::spline::CubicSpline;
use std::fmt;

/// Which mobility is being evaluated: transport cost `F`, constraint mobility `G`,
/// or the reduced mobility `H = G^2 / F`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MobilityRole {
    F,
    G,
    H,
}

/// Tabulated mobility sampled uniformly on `[0, rho_max]`, interpolated by a cubic spline.
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedMobility {
    spline: CubicSpline,
    peak: f64,
}

impl TabulatedMobility {
    /// `samples[k]` is the mobility at `k * rho_max / (samples.len() - 1)`.
    ///
    /// The mobility must vanish at zero density, be nonnegative and have a single
    /// maximum; the location of that maximum is located numerically.
    pub fn new(samples: Vec<f64>, rho_max: f64) -> Result<Self> {
        if samples.len() < 3 {
            return Err(SolverError::InvalidInput(
                "tabulated mobility needs at least 3 samples".into(),
            ));
        }
        if samples[0].abs() > 1e-12 {
            return Err(SolverError::InvalidInput(format!(
                "tabulated mobility must vanish at zero density, got {}",
                samples[0]
            )));
        }
        if samples.iter().any(|s| !s.is_finite() || *s < 0.0) {
            return Err(SolverError::InvalidInput(
                "tabulated mobility samples must be finite and nonnegative".into(),
            ));
        }
        let step = rho_max / (samples.len() - 1) as f64;
        let spline = CubicSpline::uniform(0.0, step, samples);
        let n = 4096;
        let peak = (0..=n)
            .map(|k| rho_max * k as f64 / n as f64)
            .fold((0.0, f64::NEG_INFINITY), |(arg, best), r| {
                let v = spline.value(r);
                if v > best {
                    (r, v)
                } else {
                    (arg, best)
                }
            })
            .0;
        Ok(Self { spline, peak })
    }

    pub fn samples(&self) -> &[f64] {
        self.spline.samples()
    }
}

/// Mobility presets.
#[derive(Debug, Clone, PartialEq)]
pub enum Mobility {
    /// `F = G = H = rho`.
    LinearDensity,
    /// `F = G = H = rho (rho_max - rho)^2`, the Hughes choice `rho f(rho)^2`
    /// with `f(rho) = rho_max - rho`.
    HughesCubic,
    Tabulated(TabulatedMobility),
}

/// Running energy presets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Energy {
    /// `E = alpha * rho`.
    Linear,
    /// `E = exp(a * rho)`.
    Exponential,
}

/// Result of a cost evaluation that may take the value `+inf`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExtendedValue {
    Finite(f64),
    Infinite,
}

impl ExtendedValue {
    pub fn is_finite(&self) -> bool {
        matches!(self, ExtendedValue::Finite(_))
    }

    /// Numeric value, `f64::INFINITY` for the infinite branch.
    pub fn value(&self) -> f64 {
        match self {
            ExtendedValue::Finite(v) => *v,
            ExtendedValue::Infinite => f64::INFINITY,
        }
    }
}

impl std::ops::Add for ExtendedValue {
    type Output = ExtendedValue;
    fn add(self, rhs: Self) -> Self {
        match (self, rhs) {
            (ExtendedValue::Finite(a), ExtendedValue::Finite(b)) => ExtendedValue::Finite(a + b),
            _ => ExtendedValue::Infinite,
        }
    }
}

impl fmt::Display for ExtendedValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtendedValue::Finite(v) => write!(f, "{v}"),
            ExtendedValue::Infinite => write!(f, "inf"),
        }
    }
}

/// Model parameters and constitutive functions.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub mobility: Mobility,
    pub energy: Energy,
    /// Diffusivity; the diffusion coefficient is `sigma^2 / 2`.
    pub sigma: f64,
    /// Exit rate in the Robin outflow condition.
    pub beta: f64,
    /// Exit-time weight, also the slope of the linear energy.
    pub alpha: f64,
    /// Exponent of the exponential energy.
    pub a: f64,
    pub rho_max: f64,
}

impl Default for ModelSpec {
    fn default() -> Self {
        Self {
            mobility: Mobility::HughesCubic,
            energy: Energy::Linear,
            sigma: 0.1,
            beta: 1.0,
            alpha: 1.0,
            a: 3.0,
            rho_max: 1.0,
        }
    }
}

impl ModelSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |name: &str, v: f64| {
            Err(SolverError::InvalidInput(format!(
                "model.{name} = {v} is out of range"
            )))
        };
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return bad("sigma", self.sigma);
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return bad("beta", self.beta);
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return bad("alpha", self.alpha);
        }
        if !self.a.is_finite() {
            return bad("a", self.a);
        }
        if !(self.rho_max > 0.0 && self.rho_max.is_finite()) {
            return bad("rho_max", self.rho_max);
        }
        Ok(())
    }

    pub fn diffusion(&self) -> f64 {
        0.5 * self.sigma * self.sigma
    }

    fn admissible(&self, rho: f64) -> bool {
        (0.0..=self.rho_max).contains(&rho)
    }

    /// The shared mobility `F = G = H` with extension by zero.
    pub fn mobility(&self, rho: f64) -> f64 {
        if !self.admissible(rho) {
            return 0.0;
        }
        match &self.mobility {
            Mobility::LinearDensity => rho,
            Mobility::HughesCubic => {
                let f = self.rho_max - rho;
                rho * f * f
            }
            Mobility::Tabulated(t) => t.spline.value(rho),
        }
    }

    /// Analytic derivative of the shared mobility; zero outside `[0, rho_max]`.
    pub fn mobility_derivative(&self, rho: f64) -> f64 {
        if !self.admissible(rho) {
            return 0.0;
        }
        match &self.mobility {
            Mobility::LinearDensity => 1.0,
            Mobility::HughesCubic => (self.rho_max - rho) * (self.rho_max - 3.0 * rho),
            Mobility::Tabulated(t) => t.spline.derivative(rho),
        }
    }

    /// Density at which the mobility attains its maximum on `[0, rho_max]`.
    pub fn mobility_peak(&self) -> f64 {
        match &self.mobility {
            Mobility::LinearDensity => self.rho_max,
            Mobility::HughesCubic => self.rho_max / 3.0,
            Mobility::Tabulated(t) => t.peak,
        }
    }

    pub fn eval_mobility(&self, _which: MobilityRole, rho: f64) -> f64 {
        self.mobility(rho)
    }

    pub fn eval_mobility_derivative(&self, _which: MobilityRole, rho: f64) -> f64 {
        self.mobility_derivative(rho)
    }

    /// `(E(rho), E'(rho))`.
    pub fn eval_energy(&self, rho: f64) -> (f64, f64) {
        match self.energy {
            Energy::Linear => (self.alpha * rho, self.alpha),
            Energy::Exponential => {
                let e = (self.a * rho).exp();
                (e, self.a * e)
            }
        }
    }

    /// Extended momentum cost `K(j, rho) = j^2 / H(rho)`, with `K(0, rho) = 0`
    /// and `K = +inf` for nonzero flux where `H` vanishes.
    pub fn eval_k(&self, j: f64, rho: f64) -> ExtendedValue {
        let h = self.mobility(rho);
        if h != 0.0 {
            ExtendedValue::Finite(j * j / h)
        } else if j == 0.0 {
            ExtendedValue::Finite(0.0)
        } else {
            ExtendedValue::Infinite
        }
    }

    /// Hughes speed `f(rho) = rho_max - rho`, floored at zero.
    pub fn hughes_speed(&self, rho: f64) -> f64 {
        (self.rho_max - rho).max(0.0)
    }
}
