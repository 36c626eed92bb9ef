//! Metropolis sampling with per-sector scales, independent chains and a
//! deterministic merge.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::model::{Model, Sector};
use super::GibbsSpec;
use crate::canonical::PhasePoint;
use crate::error::{Error, Result};
use crate::grid::Lattice;

/// Sweeps between scale adaptations during burn-in.
const ADAPT_WINDOW: usize = 10;
/// Acceptance outside this range after burn-in is reported as a warning.
const ACCEPTANCE_RANGE: (f64, f64) = (0.1, 0.7);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerConfig {
    pub seed: u64,
    pub chains: usize,
    pub samples_per_chain: usize,
    /// Sweeps discarded before recording; scales adapt only here.
    pub burn_in: usize,
    /// Sweeps between recorded samples.
    pub thin: usize,
    pub target_acceptance: f64,
    /// Whole-vector Langevin proposals using the exact gradient instead of single-site moves.
    pub langevin: bool,
    pub batches_per_chain: usize,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            chains: 4,
            samples_per_chain: 2500,
            burn_in: 200,
            thin: 2,
            target_acceptance: 0.3,
            langevin: false,
            batches_per_chain: 10,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.chains == 0 || self.samples_per_chain == 0 || self.thin == 0 {
            return bad("chains, samples_per_chain and thin must be positive".into());
        }
        if self.batches_per_chain == 0 || self.batches_per_chain > self.samples_per_chain {
            return bad(format!(
                "batches_per_chain must lie in 1..={}, got {}",
                self.samples_per_chain, self.batches_per_chain
            ));
        }
        if !(self.target_acceptance > 0.0 && self.target_acceptance < 1.0) {
            return bad(format!("target_acceptance must lie in (0, 1), got {}", self.target_acceptance));
        }
        Ok(())
    }

    pub fn total_samples(&self) -> usize {
        self.chains * self.samples_per_chain
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainInfo {
    pub chain: usize,
    pub seed: u64,
    pub stream: u64,
    pub burn_in: usize,
    pub thin: usize,
    /// Post burn-in acceptance over all proposals.
    pub acceptance: f64,
    pub sector_acceptance: Vec<(String, f64)>,
    pub scales: Vec<(String, f64)>,
    pub warning: Option<String>,
}

/// Retained states, chain by chain in chain order.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    pub states: Vec<PhasePoint>,
    pub log_weights: Vec<f64>,
    pub chain_len: usize,
    pub batches_per_chain: usize,
    pub chains: Vec<ChainInfo>,
}

impl SampleSet {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn acceptance(&self) -> f64 {
        self.chains.iter().map(|c| c.acceptance).sum::<f64>() / self.chains.len().max(1) as f64
    }
}

/// Samples the Gibbs state of `spec`.
pub fn sample(spec: &GibbsSpec, cfg: &SamplerConfig, lat: &Lattice) -> Result<SampleSet> {
    let model = Model::mixture(&[(1.0, spec)], lat)?;
    run(&model, spec.pin_zero_mode, cfg)
}

pub(crate) fn run(model: &Model, pin: bool, cfg: &SamplerConfig) -> Result<SampleSet> {
    cfg.validate()?;
    let chains: Vec<(Vec<PhasePoint>, Vec<f64>, ChainInfo)> =
        (0..cfg.chains).into_par_iter().map(|c| Chain::new(model, pin, cfg, c).run()).collect::<Result<_>>()?;
    let mut set = SampleSet {
        states: Vec::with_capacity(cfg.total_samples()),
        log_weights: Vec::with_capacity(cfg.total_samples()),
        chain_len: cfg.samples_per_chain,
        batches_per_chain: cfg.batches_per_chain,
        chains: Vec::with_capacity(cfg.chains),
    };
    for (states, lw, info) in chains {
        set.states.extend(states);
        set.log_weights.extend(lw);
        set.chains.push(info);
    }
    Ok(set)
}

struct Chain<'a> {
    model: &'a Model,
    cfg: &'a SamplerConfig,
    index: usize,
    sectors: Vec<Sector>,
    scales: Vec<f64>,
    /// Global step multiplier for Langevin proposals.
    eps: f64,
    rng: ChaCha8Rng,
    x: Vec<f64>,
    lw: f64,
    accepted: Vec<u64>,
    proposed: Vec<u64>,
}

impl<'a> Chain<'a> {
    fn new(model: &'a Model, pin: bool, cfg: &'a SamplerConfig, index: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(index as u64);
        let sectors = model.sectors(pin);
        let x = model.initial();
        let lw = model.log_weight(&x);
        let k = sectors.len();
        Self {
            model,
            cfg,
            index,
            scales: model.initial_scales(),
            sectors,
            eps: 0.5,
            rng,
            x,
            lw,
            accepted: vec![0; k],
            proposed: vec![0; k],
        }
    }

    fn run(mut self) -> Result<(Vec<PhasePoint>, Vec<f64>, ChainInfo)> {
        if !self.lw.is_finite() {
            return Err(Error::NonFinite { context: "log weight of the initial state".into() });
        }
        for sweep in 0..self.cfg.burn_in {
            self.sweep();
            if (sweep + 1) % ADAPT_WINDOW == 0 {
                self.adapt();
            }
        }
        self.reset_counters();
        let mut states = Vec::with_capacity(self.cfg.samples_per_chain);
        let mut weights = Vec::with_capacity(self.cfg.samples_per_chain);
        for _ in 0..self.cfg.samples_per_chain {
            for _ in 0..self.cfg.thin {
                self.sweep();
            }
            // resynchronise to avoid accumulating round-off from incremental updates
            self.lw = self.model.log_weight(&self.x);
            states.push(self.model.state(&self.x));
            weights.push(self.lw);
        }
        let info = self.info();
        Ok((states, weights, info))
    }

    fn reset_counters(&mut self) {
        self.accepted.iter_mut().for_each(|a| *a = 0);
        self.proposed.iter_mut().for_each(|p| *p = 0);
    }

    fn adapt(&mut self) {
        let target = self.cfg.target_acceptance;
        if self.cfg.langevin {
            let (a, p) = (self.accepted[0], self.proposed[0]);
            if p > 0 {
                self.eps *= (a as f64 / p as f64 - target).exp();
            }
        } else {
            for k in 0..self.sectors.len() {
                let (a, p) = (self.accepted[k], self.proposed[k]);
                if p > 0 {
                    self.scales[k] *= (2.0 * (a as f64 / p as f64 - target)).exp();
                }
            }
        }
        self.reset_counters();
    }

    fn info(&self) -> ChainInfo {
        let rate = |a: u64, p: u64| if p == 0 { 0.0 } else { a as f64 / p as f64 };
        let acceptance = rate(self.accepted.iter().sum(), self.proposed.iter().sum());
        let warning = (acceptance < ACCEPTANCE_RANGE.0 || acceptance > ACCEPTANCE_RANGE.1).then(|| {
            format!(
                "acceptance {acceptance:.3} outside [{}, {}] after tuning",
                ACCEPTANCE_RANGE.0, ACCEPTANCE_RANGE.1
            )
        });
        let sector_acceptance = if self.cfg.langevin {
            vec![("all".to_string(), acceptance)]
        } else {
            self.sectors.iter().enumerate().map(|(k, s)| (s.name.to_string(), rate(self.accepted[k], self.proposed[k]))).collect()
        };
        let scales = self
            .sectors
            .iter()
            .zip(&self.scales)
            .map(|(s, &v)| (s.name.to_string(), if self.cfg.langevin { v * self.eps } else { v }))
            .collect();
        ChainInfo {
            chain: self.index,
            seed: self.cfg.seed,
            stream: self.index as u64,
            burn_in: self.cfg.burn_in,
            thin: self.cfg.thin,
            acceptance,
            sector_acceptance,
            scales,
            warning,
        }
    }

    fn sweep(&mut self) {
        if self.cfg.langevin {
            self.langevin_step();
        } else {
            for k in 0..self.sectors.len() {
                for i in 0..self.sectors[k].len {
                    self.site_move(k, i);
                }
            }
        }
    }

    fn site_move(&mut self, k: usize, i: usize) {
        let sector = &self.sectors[k];
        let z: f64 = self.rng.sample(StandardNormal);
        let delta = self.scales[k] * z;
        let idx = sector.start + i;
        let mut changes = [(idx, self.x[idx] + delta), (0, 0.0)];
        let count = if sector.pinned {
            let j = sector.start + (i + 2) % sector.len;
            changes[1] = (j, self.x[j] - delta);
            2
        } else {
            1
        };
        let d = self.model.delta(&mut self.x, self.lw, &changes[..count]);
        self.proposed[k] += 1;
        let u: f64 = self.rng.random();
        if d.is_finite() && u.ln() < d {
            for &(j, v) in &changes[..count] {
                self.x[j] = v;
            }
            self.lw += d;
            self.accepted[k] += 1;
        }
    }

    /// Per-coordinate step `σ_i = ε s_k`, drift `σ_i²/2 ∂_i log w`.
    fn langevin_step(&mut self) {
        let sigma = self.step_sizes();
        let g = match self.model.gradient(&self.x) {
            Ok(g) => self.project(g),
            Err(_) => return,
        };
        let noise: Vec<f64> = (0..self.x.len()).map(|_| self.rng.sample(StandardNormal)).collect();
        let noise = self.project(noise);
        let y: Vec<f64> =
            (0..self.x.len()).map(|i| self.x[i] + 0.5 * sigma[i] * sigma[i] * g[i] + sigma[i] * noise[i]).collect();
        self.proposed[0] += 1;
        let u: f64 = self.rng.random();
        let lw_y = self.model.log_weight(&y);
        if !lw_y.is_finite() {
            return;
        }
        let gy = match self.model.gradient(&y) {
            Ok(g) => self.project(g),
            Err(_) => return,
        };
        let log_q = |to: &[f64], from: &[f64], g_from: &[f64]| -> f64 {
            (0..to.len())
                .map(|i| {
                    let r = to[i] - from[i] - 0.5 * sigma[i] * sigma[i] * g_from[i];
                    -r * r / (2.0 * sigma[i] * sigma[i])
                })
                .sum()
        };
        let log_alpha = lw_y - self.lw + log_q(&self.x, &y, &gy) - log_q(&y, &self.x, &g);
        if u.ln() < log_alpha {
            self.x = y;
            self.lw = lw_y;
            self.accepted[0] += 1;
        }
    }

    fn step_sizes(&self) -> Vec<f64> {
        let mut sigma = vec![0.0; self.x.len()];
        for (s, &scale) in self.sectors.iter().zip(&self.scales) {
            sigma[s.start..s.start + s.len].iter_mut().for_each(|v| *v = self.eps * scale);
        }
        sigma
    }

    /// Removes the per-parity means of the pinned sector, keeping moves on the constraint surface.
    fn project(&self, mut v: Vec<f64>) -> Vec<f64> {
        for s in self.sectors.iter().filter(|s| s.pinned) {
            for parity in 0..2 {
                let idx: Vec<usize> = (parity..s.len).step_by(2).map(|i| s.start + i).collect();
                let mean = idx.iter().map(|&i| v[i]).sum::<f64>() / idx.len() as f64;
                idx.iter().for_each(|&i| v[i] -= mean);
            }
        }
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::{estimate, log_weight};
    use crate::grid::SpacetimeVectorField;

    fn small_cfg(seed: u64) -> SamplerConfig {
        SamplerConfig { seed, chains: 3, samples_per_chain: 400, burn_in: 100, thin: 2, ..Default::default() }
    }

    #[test]
    fn same_seed_same_chains() {
        let lat = Lattice::periodic(8).unwrap();
        let spec = GibbsSpec::matter(SpacetimeVectorField::constant(1.0, 0.0), 1.0, 1.0);
        let a = sample(&spec, &small_cfg(11), &lat).unwrap();
        let b = sample(&spec, &small_cfg(11), &lat).unwrap();
        assert_eq!(a, b);
        let c = sample(&spec, &small_cfg(12), &lat).unwrap();
        assert_ne!(a.states, c.states);
        assert_ne!(a.states[0], a.states[400], "chains must use distinct streams");
    }

    #[test]
    fn recorded_weights_are_exact() {
        let lat = Lattice::periodic(8).unwrap();
        let xi = SpacetimeVectorField::parse("1 + 0.2*cos(x)", "0.3*sin(x)", &lat).unwrap();
        let spec = GibbsSpec::matter(xi, 1.3, 0.7);
        let s = sample(&spec, &small_cfg(1), &lat).unwrap();
        for (st, &lw) in s.states.iter().zip(&s.log_weights).step_by(97) {
            assert!((log_weight(st, &spec, &lat).unwrap() - lw).abs() < 1e-10 * (1.0 + lw.abs()));
        }
        let acc = s.acceptance();
        assert!(acc > 0.1 && acc < 0.7, "acceptance {acc}");
        assert!(s.chains.iter().all(|c| c.warning.is_none()));
    }

    #[test]
    fn pin_keeps_parity_sums_zero() {
        let lat = Lattice::periodic(8).unwrap();
        for langevin in [false, true] {
            let spec = GibbsSpec::matter(SpacetimeVectorField::constant(1.0, 0.0), 1.0, 0.0).with_pin(true);
            let cfg = SamplerConfig { langevin, ..small_cfg(5) };
            let s = sample(&spec, &cfg, &lat).unwrap();
            for st in s.states.iter().step_by(50) {
                let even: f64 = st.phi.iter().step_by(2).sum();
                let odd: f64 = st.phi.iter().skip(1).step_by(2).sum();
                assert!(even.abs() < 1e-9 && odd.abs() < 1e-9);
            }
        }
    }

    #[test]
    fn langevin_reaches_equipartition() {
        let lat = Lattice::periodic(8).unwrap();
        let spec = GibbsSpec::matter(SpacetimeVectorField::constant(1.0, 0.0), 2.0, 1.0);
        let cfg = SamplerConfig { langevin: true, chains: 4, samples_per_chain: 2000, burn_in: 400, thin: 2, ..Default::default() };
        let s = sample(&spec, &cfg, &lat).unwrap();
        let e = estimate(|st| -log_weight(st, &spec, &lat).unwrap() / 2.0, &s).unwrap();
        assert!((e.mean - 4.0).abs() < 4.0 * e.stderr, "{e:?}");
    }

    #[test]
    fn regulated_mode_samples_every_sector() {
        let lat = Lattice::periodic(8).unwrap();
        let spec = GibbsSpec::regulated(SpacetimeVectorField::constant(1.0, 0.0), 1.0, 1.0, 0.5, 0.05);
        let s = sample(&spec, &small_cfg(3), &lat).unwrap();
        let last = s.states.last().unwrap();
        assert!(last.p.iter().any(|p| p[0] != 0.0));
        assert!(last.tau.tau0.iter().any(|&t| t != 0.0));
        assert!(s.chains[0].sector_acceptance.iter().all(|(_, a)| *a > 0.05));
    }

    #[test]
    fn refuses_bad_input() {
        let lat = Lattice::periodic(8).unwrap();
        let spec = GibbsSpec::matter(SpacetimeVectorField::constant(1.0, 0.0), 1.0, 0.0);
        assert!(matches!(sample(&spec, &small_cfg(1), &lat), Err(Error::NonNormalizable(_))));
        let ok = GibbsSpec::matter(SpacetimeVectorField::constant(1.0, 0.0), 1.0, 1.0);
        let cfg = SamplerConfig { thin: 0, ..small_cfg(1) };
        assert!(matches!(sample(&ok, &cfg, &lat), Err(Error::InvalidParameter(_))));
    }
}
