//! Invariance of the matter-sector Gibbs ensemble under the gauge-fixed flow.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::sampler::{sample, SampleSet, SamplerConfig};
use super::{estimate_values, EnsembleMode, Estimate, GibbsSpec};
use crate::error::{Error, Result};
use crate::gauge::{reduced_evolve, GaugeSpec};
use crate::geometry::{field_on_slice, Embedding};
use crate::grid::{derivative_unchecked, Lattice};

/// Names of the observables compared before and after the flow.
pub const BATTERY: [&str; 6] = ["phi_sq", "pi_sq", "phi_pi", "grad_phi_sq", "phi_mode1_sq", "pi_mode1_sq"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StationarityConfig {
    pub flow_time: f64,
    pub step: f64,
    /// Mass used by the flow; defaults to the ensemble mass. A different value
    /// gives a flow that does not preserve the ensemble.
    pub flow_mass: Option<f64>,
}

impl Default for StationarityConfig {
    fn default() -> Self {
        Self { flow_time: 1.0, step: 0.02, flow_mass: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservableShift {
    pub name: String,
    pub before: Estimate,
    pub after: Estimate,
    /// Paired difference `after − before`.
    pub shift: Estimate,
    /// `|shift| / σ(shift)`.
    pub deviation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationarityReport {
    pub flow_time: f64,
    pub observables: Vec<ObservableShift>,
    pub max_deviation: f64,
}

fn battery(phi: &[f64], pi: &[f64], lat: &Lattice) -> [f64; 6] {
    let dx = lat.spacing();
    let dphi = derivative_unchecked(phi, 0.0, lat);
    let sum = |f: &dyn Fn(usize) -> f64| (0..phi.len()).map(f).sum::<f64>() * dx;
    let mode = |v: &[f64]| {
        let (re, im) = v.iter().enumerate().fold((0.0, 0.0), |(re, im), (i, &f)| {
            let x = lat.site(i);
            (re + f * x.cos(), im - f * x.sin())
        });
        (re * re + im * im) * dx * dx
    };
    [
        sum(&|i| phi[i] * phi[i]),
        sum(&|i| pi[i] * pi[i]),
        sum(&|i| phi[i] * pi[i]),
        sum(&|i| dphi[i] * dphi[i]),
        mode(phi),
        mode(pi),
    ]
}

/// Samples `spec` and compares the battery before and after the time-gauge flow.
pub fn stationarity_test(
    spec: &GibbsSpec,
    sampler: &SamplerConfig,
    cfg: &StationarityConfig,
    lat: &Lattice,
) -> Result<StationarityReport> {
    if spec.mode != EnsembleMode::MatterSector {
        return Err(Error::InvalidParameter("stationarity requires the matter-sector mode".into()));
    }
    let tau = spec.reference_tau(lat)?;
    if tau != Embedding::identity(lat) {
        return Err(Error::InvalidParameter("stationarity requires the identity slice".into()));
    }
    if field_on_slice(&spec.xi, &tau)?.iter().any(|v| v[0] != 1.0 || v[1] != 0.0) {
        return Err(Error::InvalidParameter("stationarity requires xi = (1, 0) on the slice".into()));
    }
    let set = sample(spec, sampler, lat)?;
    stationarity_of_samples(&set, cfg.flow_mass.unwrap_or(spec.mass), cfg, lat)
}

/// Pushes every sample through the time-gauge flow with mass `flow_mass`.
pub fn stationarity_of_samples(
    set: &SampleSet,
    flow_mass: f64,
    cfg: &StationarityConfig,
    lat: &Lattice,
) -> Result<StationarityReport> {
    if set.is_empty() {
        return Err(Error::EmptySampleSet);
    }
    if !(cfg.flow_time >= 0.0) || !cfg.flow_time.is_finite() || !(cfg.step > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "need flow_time >= 0 and step > 0, got {} and {}",
            cfg.flow_time, cfg.step
        )));
    }
    let gs = GaugeSpec::timegauge();
    let rows: Vec<([f64; 6], [f64; 6])> = set
        .states
        .par_iter()
        .map(|s| {
            let before = battery(&s.phi, &s.pi, lat);
            if cfg.flow_time == 0.0 {
                return Ok((before, before));
            }
            let tr = reduced_evolve(&s.phi, &s.pi, &gs, flow_mass, cfg.flow_time, cfg.step, lat)?;
            let k = tr.lambda.len() - 1;
            Ok((before, battery(&tr.phi[k], &tr.pi[k], lat)))
        })
        .collect::<Result<_>>()?;
    let est = |v: Vec<f64>| estimate_values(&v, set.chain_len, set.batches_per_chain);
    let mut observables = Vec::with_capacity(BATTERY.len());
    for (j, name) in BATTERY.iter().enumerate() {
        let before = est(rows.iter().map(|r| r.0[j]).collect())?;
        let after = est(rows.iter().map(|r| r.1[j]).collect())?;
        let shift = est(rows.iter().map(|r| r.1[j] - r.0[j]).collect())?;
        observables.push(ObservableShift { name: name.to_string(), before, after, shift, deviation: shift.z_score(0.0) });
    }
    let max_deviation = observables.iter().map(|o| o.deviation).fold(0.0, f64::max);
    Ok(StationarityReport { flow_time: cfg.flow_time, observables, max_deviation })
}
