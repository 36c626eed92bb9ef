//! Free-energy differences, entropy, heat, work and the relative entropy
//! between two Gibbs states.
//!
//! The path `log w_s = (1 − s) log w_i + s log w_f` is sampled at `K + 1`
//! equally spaced `s`. `Δ log Z` comes from staged reweighting between
//! neighbours and is cross-checked by Simpson integration of `𝔼_s[log w_f − log w_i]`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::model::Model;
use super::sampler::{run, SampleSet, SamplerConfig};
use super::{estimate_values, jackknife, log_weight, Estimate, GibbsSpec};
use crate::canonical::comomentum;
use crate::error::{Error, Result};
use crate::grid::Lattice;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ThermoConfig {
    pub sampler: SamplerConfig,
    /// Number of path intervals; must be even.
    pub stages: usize,
    /// Relative step `δ` of the finite difference in `b`.
    pub fd_step: f64,
    pub min_ess: f64,
}

impl Default for ThermoConfig {
    fn default() -> Self {
        Self { sampler: SamplerConfig::default(), stages: 8, fd_step: 0.01, min_ess: 10.0 }
    }
}

/// All differences are final minus initial; `H` is `H(ξ)` of the respective spec.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThermoReport {
    pub b_initial: f64,
    pub b_final: f64,
    /// `log Z_f − log Z_i` by staged reweighting.
    pub logz_diff: Estimate,
    /// Same by thermodynamic integration.
    pub logz_diff_ti: Estimate,
    /// `ΔF = −Δ log Z`.
    pub free_energy_diff: Estimate,
    /// `Q = 𝔼[H]` in each state.
    pub q_initial: Estimate,
    pub q_final: Estimate,
    /// `−∂_b log Z` at `b_i` by reweighted central differences.
    pub q_fd_initial: Estimate,
    /// `S = log Z + b 𝔼[H]`, as a difference.
    pub entropy_diff: Estimate,
    /// `KL(ρ_i ‖ ρ_f)`.
    pub kl: Estimate,
    /// `𝔼_i[H(ξ_f) − H(ξ_i)]`.
    pub work: Estimate,
    /// `b 𝔼_i[W] − ΔF`, only when `b_i = b_f`.
    pub isothermal_bound: Option<Estimate>,
    /// `ΔQ = 𝔼_f[J̃(ξ_f)] − 𝔼_i[J̃(ξ_f)]` with `J̃ = −H`.
    pub heat: Estimate,
    /// `ΔS + b_f ΔQ`.
    pub clausius: Estimate,
    /// Smallest Kish effective sample size over all reweightings.
    pub min_ess: f64,
    pub acceptance: f64,
}

/// Per-sample values along the path.
struct Stage {
    /// `log w_f − log w_i`
    diff: Vec<f64>,
    h_i: Vec<f64>,
    h_f: Vec<f64>,
}

fn kish(log_w: &[f64]) -> f64 {
    let m = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (s1, s2) = log_w.iter().fold((0.0, 0.0), |(a, b), &l| {
        let w = (l - m).exp();
        (a + w, b + w * w)
    });
    s1 * s1 / s2
}

/// `log 𝔼[exp(r)]` with a jackknife error; also returns the Kish size.
fn log_mean_exp(r: &[f64], set: &SampleSet) -> Result<(Estimate, f64)> {
    let m = r.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = r.iter().map(|x| (x - m).exp()).collect();
    let e = jackknife(&[&w], set.chain_len, set.batches_per_chain, |means| means[0].ln() + m)?;
    Ok((e, kish(r)))
}

pub fn thermo(spec_i: &GibbsSpec, spec_f: &GibbsSpec, cfg: &ThermoConfig, lat: &Lattice) -> Result<ThermoReport> {
    if cfg.stages == 0 || cfg.stages % 2 != 0 {
        return Err(Error::InvalidParameter(format!("stages must be even and positive, got {}", cfg.stages)));
    }
    if !(cfg.fd_step > 0.0 && cfg.fd_step < 1.0) {
        return Err(Error::InvalidParameter(format!("fd_step must lie in (0, 1), got {}", cfg.fd_step)));
    }
    // validates shared mode, frozen data and normalizability of both ends
    Model::mixture(&[(0.5, spec_i), (0.5, spec_f)], lat)?;
    let k = cfg.stages;
    let grid: Vec<f64> = (0..=k).map(|j| j as f64 / k as f64).collect();

    let mut sets = Vec::with_capacity(k + 1);
    for (j, &s) in grid.iter().enumerate() {
        let model = Model::mixture(&[(1.0 - s, spec_i), (s, spec_f)], lat)?;
        let sampler = SamplerConfig { seed: cfg.sampler.seed.wrapping_add(j as u64 * 0x9E37_79B9), ..cfg.sampler.clone() };
        sets.push(run(&model, spec_i.pin_zero_mode, &sampler)?);
    }
    let stages: Vec<Stage> = sets
        .iter()
        .map(|set| {
            let rows: Vec<(f64, f64, f64)> = set
                .states
                .par_iter()
                .map(|st| {
                    let lw_i = log_weight(st, spec_i, lat)?;
                    let lw_f = log_weight(st, spec_f, lat)?;
                    let h_i = comomentum(&spec_i.evaluation_state(st, lat)?, &spec_i.xi, spec_i.mass, lat)?.value;
                    let h_f = comomentum(&spec_f.evaluation_state(st, lat)?, &spec_f.xi, spec_f.mass, lat)?.value;
                    Ok((lw_f - lw_i, h_i, h_f))
                })
                .collect::<Result<_>>()?;
            Ok(Stage {
                diff: rows.iter().map(|r| r.0).collect(),
                h_i: rows.iter().map(|r| r.1).collect(),
                h_f: rows.iter().map(|r| r.2).collect(),
            })
        })
        .collect::<Result<_>>()?;
    let set0 = &sets[0];
    let setk = &sets[k];
    let mean_of = |v: &[f64], set: &SampleSet| estimate_values(v, set.chain_len, set.batches_per_chain);
    let mut min_ess = f64::INFINITY;
    let check = |ess: f64| -> Result<f64> {
        if ess < cfg.min_ess {
            Err(Error::InsufficientOverlap { ess, min: cfg.min_ess })
        } else {
            Ok(ess)
        }
    };

    // staged reweighting
    let mut logz = Estimate::exact(0.0);
    for j in 0..k {
        let ds = grid[j + 1] - grid[j];
        let r: Vec<f64> = stages[j].diff.iter().map(|d| ds * d).collect();
        let (e, ess) = log_mean_exp(&r, &sets[j])?;
        min_ess = min_ess.min(check(ess)?);
        logz = logz.combine(1.0, &e, 1.0);
    }

    // Simpson over the same grid
    let h = 1.0 / k as f64;
    let mut ti = Estimate::exact(0.0);
    for j in 0..=k {
        let w = if j == 0 || j == k { 1.0 } else if j % 2 == 1 { 4.0 } else { 2.0 };
        let e = mean_of(&stages[j].diff, &sets[j])?;
        ti = ti.combine(1.0, &e, w * h / 3.0);
    }

    let q_i = mean_of(&stages[0].h_i, set0)?;
    let q_f = mean_of(&stages[k].h_f, setk)?;

    // −∂_b log Z at b_i from log 𝔼_i[exp(∓δb H_i)]
    let db = cfg.fd_step * spec_i.b;
    let m_up = stages[0].h_i.iter().map(|h| -db * h).fold(f64::NEG_INFINITY, f64::max);
    let m_dn = stages[0].h_i.iter().map(|h| db * h).fold(f64::NEG_INFINITY, f64::max);
    let w_up: Vec<f64> = stages[0].h_i.iter().map(|h| (-db * h - m_up).exp()).collect();
    let w_dn: Vec<f64> = stages[0].h_i.iter().map(|h| (db * h - m_dn).exp()).collect();
    for r in [
        stages[0].h_i.iter().map(|h| -db * h).collect::<Vec<_>>(),
        stages[0].h_i.iter().map(|h| db * h).collect::<Vec<_>>(),
    ] {
        min_ess = min_ess.min(check(kish(&r))?);
    }
    let q_fd = jackknife(&[&w_up, &w_dn], set0.chain_len, set0.batches_per_chain, |m| {
        -((m[0].ln() + m_up) - (m[1].ln() + m_dn)) / (2.0 * db)
    })?;

    let neg_diff: Vec<f64> = stages[0].diff.iter().map(|d| -d).collect();
    let kl = logz.combine(1.0, &mean_of(&neg_diff, set0)?, 1.0);
    let w: Vec<f64> = stages[0].h_f.iter().zip(&stages[0].h_i).map(|(f, i)| f - i).collect();
    let work = mean_of(&w, set0)?;
    let free = Estimate { mean: -logz.mean, stderr: logz.stderr };
    let isothermal_bound = (spec_i.b == spec_f.b).then(|| work.combine(spec_i.b, &free, -1.0));
    let entropy = logz.combine(1.0, &q_f, spec_f.b).combine(1.0, &q_i, -spec_i.b);

    let e_i_hf = mean_of(&stages[0].h_f, set0)?;
    let heat = e_i_hf.combine(1.0, &q_f, -1.0);
    // ΔS + b_f ΔQ = Δ log Z + 𝔼_i[b_f H_f − b_i H_i]; the 𝔼_f terms cancel exactly
    let paired: Vec<f64> = stages[0].h_f.iter().zip(&stages[0].h_i).map(|(f, i)| spec_f.b * f - spec_i.b * i).collect();
    let paired = mean_of(&paired, set0)?;
    let clausius = Estimate {
        mean: entropy.mean + spec_f.b * heat.mean,
        stderr: logz.combine(1.0, &paired, 1.0).stderr,
    };

    Ok(ThermoReport {
        b_initial: spec_i.b,
        b_final: spec_f.b,
        logz_diff: logz,
        logz_diff_ti: ti,
        free_energy_diff: free,
        q_initial: q_i,
        q_final: q_f,
        q_fd_initial: q_fd,
        entropy_diff: entropy,
        kl,
        work,
        isothermal_bound,
        heat,
        clausius,
        min_ess,
        acceptance: sets.iter().map(SampleSet::acceptance).sum::<f64>() / sets.len() as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::SpacetimeVectorField;

    fn quick() -> ThermoConfig {
        ThermoConfig {
            sampler: SamplerConfig { seed: 3, chains: 2, samples_per_chain: 600, burn_in: 100, thin: 2, ..Default::default() },
            ..Default::default()
        }
    }

    #[test]
    fn identical_states_give_zeros() {
        let lat = Lattice::periodic(8).unwrap();
        let spec = GibbsSpec::matter(SpacetimeVectorField::constant(1.0, 0.0), 1.0, 1.0);
        let r = thermo(&spec, &spec, &quick(), &lat).unwrap();
        for e in [r.logz_diff, r.logz_diff_ti, r.free_energy_diff, r.kl, r.work, r.isothermal_bound.unwrap()] {
            assert!(e.mean.abs() < 1e-12, "{e:?}");
        }
        assert!((r.q_fd_initial.mean - r.q_initial.mean).abs() < 4.0 * (r.q_fd_initial.stderr + r.q_initial.stderr));
    }

    #[test]
    fn gaussian_oracle_for_doubling_b() {
        let lat = Lattice::periodic(8).unwrap();
        let xi = SpacetimeVectorField::constant(1.0, 0.0);
        let r = thermo(&GibbsSpec::matter(xi.clone(), 1.0, 1.0), &GibbsSpec::matter(xi, 2.0, 1.0), &quick(), &lat).unwrap();
        let oracle = -8.0 * 2f64.ln();
        assert!(r.logz_diff.z_score(oracle) < 3.5, "{:?} vs {oracle}", r.logz_diff);
        assert!(r.logz_diff_ti.z_score(oracle) < 3.5, "{:?} vs {oracle}", r.logz_diff_ti);
        assert!(r.kl.mean > -3.0 * r.kl.stderr);
        assert!(r.clausius.mean > -3.0 * r.clausius.stderr);
        assert!(r.isothermal_bound.is_none());
    }

    #[test]
    fn refuses_poor_overlap_and_mixed_modes() {
        let lat = Lattice::periodic(8).unwrap();
        let xi = SpacetimeVectorField::constant(1.0, 0.0);
        let cfg = ThermoConfig { stages: 2, min_ess: 1e9, ..quick() };
        let r = thermo(&GibbsSpec::matter(xi.clone(), 1.0, 1.0), &GibbsSpec::matter(xi.clone(), 2.0, 1.0), &cfg, &lat);
        assert!(matches!(r, Err(Error::InsufficientOverlap { .. })));
        let reg = GibbsSpec::regulated(xi.clone(), 1.0, 1.0, 1.0, 0.1);
        assert!(thermo(&GibbsSpec::matter(xi, 1.0, 1.0), &reg, &quick(), &lat).is_err());
    }
}
