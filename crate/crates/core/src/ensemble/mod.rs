//! The generally covariant Gibbs state `ρ ∝ exp(−b H(ξ))`, its Markov-chain
//! sampler, batch-means estimators and the thermodynamic suite.
//!
//! Two modes are supported. `MatterSector` freezes `(τ, P)` and samples only
//! `(φ, Π)`. `Regulated` samples every sector and multiplies the weight by a
//! Gaussian reference density on `(τ, P)`; without it the weight is linear in
//! `P` and cannot be normalized.

mod estimate;
mod model;
mod sampler;
mod stationarity;
mod thermo;

pub use estimate::{estimate, estimate_values, jackknife, Estimate};
pub use sampler::{sample, ChainInfo, SampleSet, SamplerConfig};
pub use stationarity::{
    stationarity_of_samples, stationarity_test, ObservableShift, StationarityConfig, StationarityReport,
    BATTERY,
};
pub use thermo::{thermo, ThermoConfig, ThermoReport};

use crate::canonical::{comomentum, spatial_momentum_map, PhasePoint};
use crate::error::{Error, Result};
use crate::geometry::{field_on_slice, minkowski_dot, slice_geometry, Embedding};
use crate::grid::{Lattice, SpacetimeVectorField};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EnsembleMode {
    /// All sectors sampled; Gaussian reference density of widths `sigma_p`, `sigma_tau` on `(P, τ − τ̄)`.
    Regulated { sigma_p: f64, sigma_tau: f64 },
    /// `(τ, P)` frozen, `(φ, Π)` sampled.
    MatterSector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GibbsSpec {
    pub xi: SpacetimeVectorField,
    pub b: f64,
    pub mode: EnsembleMode,
    pub mass: f64,
    /// Frozen slice in matter-sector mode, regulator centre `τ̄` in regulated mode.
    /// Defaults to the identity embedding.
    pub frozen_tau: Option<Embedding>,
    /// Frozen `P` in matter-sector mode. Defaults to zero.
    pub frozen_p: Option<Vec<[f64; 2]>>,
    /// Removes the kernel of the central difference from the `φ` sector.
    pub pin_zero_mode: bool,
}

impl GibbsSpec {
    pub fn matter(xi: SpacetimeVectorField, b: f64, mass: f64) -> Self {
        Self { xi, b, mode: EnsembleMode::MatterSector, mass, frozen_tau: None, frozen_p: None, pin_zero_mode: false }
    }

    pub fn regulated(xi: SpacetimeVectorField, b: f64, mass: f64, sigma_p: f64, sigma_tau: f64) -> Self {
        Self {
            xi,
            b,
            mode: EnsembleMode::Regulated { sigma_p, sigma_tau },
            mass,
            frozen_tau: None,
            frozen_p: None,
            pin_zero_mode: false,
        }
    }

    pub fn with_frozen(mut self, tau: Embedding, p: Vec<[f64; 2]>) -> Self {
        self.frozen_tau = Some(tau);
        self.frozen_p = Some(p);
        self
    }

    pub fn with_pin(mut self, pin: bool) -> Self {
        self.pin_zero_mode = pin;
        self
    }

    pub fn reference_tau(&self, lat: &Lattice) -> Result<Embedding> {
        match &self.frozen_tau {
            Some(t) => {
                lat.check_len(t.tau0.len())?;
                lat.check_len(t.tau1.len())?;
                Ok(t.clone())
            }
            None => Ok(Embedding::identity(lat)),
        }
    }

    pub fn reference_p(&self, lat: &Lattice) -> Result<Vec<[f64; 2]>> {
        match &self.frozen_p {
            Some(p) => {
                lat.check_len(p.len())?;
                Ok(p.clone())
            }
            None => Ok(vec![[0.0; 2]; lat.n()]),
        }
    }

    /// The state at which the weight is evaluated: matter data from `state`,
    /// `(τ, P)` from the spec in matter-sector mode.
    pub fn evaluation_state(&self, state: &PhasePoint, lat: &Lattice) -> Result<PhasePoint> {
        match self.mode {
            EnsembleMode::Regulated { .. } => Ok(state.clone()),
            EnsembleMode::MatterSector => PhasePoint::new(
                state.phi.clone(),
                state.pi.clone(),
                self.reference_tau(lat)?,
                self.reference_p(lat)?,
                lat,
            ),
        }
    }

    /// Refuses specs whose weight cannot be normalized.
    ///
    /// The matter quadratic form is positive definite iff `ξ` is future timelike
    /// on the slice and the `φ` zero modes are lifted by `m > 0` or the pin.
    /// In regulated mode this is checked on the regulator centre only.
    pub fn check_normalizable(&self, lat: &Lattice) -> Result<()> {
        if !(self.b > 0.0) || !self.b.is_finite() {
            return Err(Error::NonNormalizable(format!("b must be positive and finite, got {}", self.b)));
        }
        if !(self.mass >= 0.0) || !self.mass.is_finite() {
            return Err(Error::InvalidParameter(format!("mass must be finite and >= 0, got {}", self.mass)));
        }
        if self.mass == 0.0 && !self.pin_zero_mode {
            return Err(Error::NonNormalizable("m = 0 leaves the phi zero mode flat; set m > 0 or pin it".into()));
        }
        if let EnsembleMode::Regulated { sigma_p, sigma_tau } = self.mode {
            for (name, s) in [("sigma_p", sigma_p), ("sigma_tau", sigma_tau)] {
                if !(s > 0.0) || !s.is_finite() {
                    return Err(Error::NonNormalizable(format!("{name} must be positive and finite, got {s}")));
                }
            }
        }
        let tau = self.reference_tau(lat)?;
        let geo = slice_geometry(&tau, lat)?;
        for (i, v) in field_on_slice(&self.xi, &tau)?.into_iter().enumerate() {
            let (lapse, _) = geo.split(i, v);
            if !(minkowski_dot(v, v) < 0.0 && lapse > 0.0) {
                return Err(Error::NonNormalizable(format!(
                    "xi = ({}, {}) is not future timelike at site {i}",
                    v[0], v[1]
                )));
            }
        }
        self.reference_p(lat)?;
        Ok(())
    }
}

/// `Σ Δx (|P|²/2σ_P² + |τ − τ̄|²/2σ_τ²)`.
pub(crate) fn regulator(state: &PhasePoint, centre: &Embedding, sigma_p: f64, sigma_tau: f64, lat: &Lattice) -> f64 {
    let mut acc = 0.0;
    for i in 0..lat.n() {
        let [p0, p1] = state.p[i];
        let d0 = state.tau.tau0[i] - centre.tau0[i];
        let d1 = state.tau.tau1[i] - centre.tau1[i];
        acc += (p0 * p0 + p1 * p1) / (2.0 * sigma_p * sigma_p) + (d0 * d0 + d1 * d1) / (2.0 * sigma_tau * sigma_tau);
    }
    acc * lat.spacing()
}

/// Unnormalized `log ρ`.
pub fn log_weight(state: &PhasePoint, spec: &GibbsSpec, lat: &Lattice) -> Result<f64> {
    state.validate(lat)?;
    let eval = spec.evaluation_state(state, lat)?;
    let mut lw = -spec.b * comomentum(&eval, &spec.xi, spec.mass, lat)?.value;
    if let EnsembleMode::Regulated { sigma_p, sigma_tau } = spec.mode {
        lw -= regulator(state, &spec.reference_tau(lat)?, sigma_p, sigma_tau, lat);
    }
    if !lw.is_finite() {
        return Err(Error::NonFinite { context: "log weight".into() });
    }
    Ok(lw)
}

/// Log weight of the state restricted to spatial diffeomorphisms,
/// `b ⟨J_τ, ζ⟩`, evaluated at `state` as given.
pub fn spatial_log_weight(state: &PhasePoint, zeta: &[f64], b: f64, mass: f64, lat: &Lattice) -> Result<f64> {
    Ok(b * spatial_momentum_map(state, zeta, mass, lat)?.value)
}
