use std::f64::consts::TAU;
use std::path::Path;

use anyhow::{bail, Context};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use pftlab::canonical::{
    comomentum, convergence_order, dirac_algebra_study, equivariance_study, PhasePoint, SmoothProfile, TestFunctions,
};
use pftlab::dynamics::{evolve_sampled, on_shell, trace_csv};
use pftlab::ensemble::{
    estimate, sample as draw, stationarity_of_samples, thermo as compare, ChainInfo, Estimate, GibbsSpec, SampleSet,
    StationarityReport,
};
use pftlab::gauge::{reduced_evolve_sampled, GaugeSpec};
use pftlab::geometry::{field_on_slice, Embedding};
use pftlab::grid::{Expr, Lattice, SpacetimeVectorField};
use pftlab::multisym::slice_pullback_check;
use pftlab::Error;

use crate::config::{Mode, Preset, RunConfig};
use crate::output::{check_dir, OutputDir};

/// A check that ran but missed its tolerance.
#[derive(Debug)]
pub struct NumericalFailure(pub String);

impl std::fmt::Display for NumericalFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for NumericalFailure {}

/// Largest pullback residual accepted by `verify multisym`.
const PULLBACK_TOLERANCE: f64 = 1e-10;

fn profile(seed: u64) -> SmoothProfile {
    SmoothProfile::random(&mut ChaCha8Rng::seed_from_u64(seed))
}

fn field(pair: &[String; 2], lat: &Lattice) -> anyhow::Result<SpacetimeVectorField> {
    SpacetimeVectorField::parse(&pair[0], &pair[1], lat)
        .with_context(|| format!("vector field ({}, {})", pair[0], pair[1]))
}

fn fmt_row(label: &str, values: &[f64]) -> String {
    let mut row = label.to_string();
    for v in values {
        row.push_str(&format!(",{v:?}"));
    }
    row.push('\n');
    row
}

fn check_sizes(cfg: &RunConfig) -> anyhow::Result<()> {
    if cfg.lattice.circumference != TAU {
        return Err(Error::InvalidParameter("convergence studies run on the circle of length 2π".into()).into());
    }
    if cfg.check.sizes.len() < 2 {
        return Err(Error::InvalidParameter("need at least two lattice sizes".into()).into());
    }
    Ok(())
}

pub fn check_algebra(mut cfg: RunConfig) -> anyhow::Result<()> {
    check_sizes(&cfg)?;
    let seed = *cfg.seed.get_or_insert(0);
    let c = &cfg.check;
    let parse = |s: &String| Expr::parse(s).with_context(|| format!("test function `{s}`"));
    let tf = TestFunctions {
        lapse_n: parse(&c.lapse_n)?,
        lapse_m: parse(&c.lapse_m)?,
        shift_n: parse(&c.shift_n)?,
        shift_m: parse(&c.shift_m)?,
    };
    let rows = dirac_algebra_study(&profile(seed), &tf, cfg.model.mass, &c.sizes)?;
    let mut body = String::from("n,shift_shift,shift_lapse,lapse_lapse\n");
    for (n, r) in &rows {
        body.push_str(&fmt_row(&n.to_string(), &r.as_array()));
    }
    let mut orders = Vec::new();
    for k in 0..3 {
        let res: Vec<f64> = rows.iter().map(|(_, r)| r.as_array()[k]).collect();
        orders.push(convergence_order(&c.sizes, &res)?);
    }
    body.push_str(&fmt_row("order", &orders));
    let out = OutputDir::create(&cfg)?;
    out.csv("algebra.csv", &body)
}

pub fn check_equivariance(mut cfg: RunConfig) -> anyhow::Result<()> {
    check_sizes(&cfg)?;
    let seed = *cfg.seed.get_or_insert(0);
    let c = &cfg.check;
    let lat = Lattice::periodic(c.sizes[0])?;
    let rows = equivariance_study(&profile(seed), &field(&c.xi, &lat)?, &field(&c.zeta, &lat)?, cfg.model.mass, &c.sizes)?;
    let mut body = String::from("n,residual\n");
    for (n, r) in &rows {
        body.push_str(&fmt_row(&n.to_string(), &[*r]));
    }
    let res: Vec<f64> = rows.iter().map(|r| r.1).collect();
    body.push_str(&fmt_row("order", &[convergence_order(&c.sizes, &res)?]));
    let out = OutputDir::create(&cfg)?;
    out.csv("equivariance.csv", &body)
}

/// Matter data and slice for a preset, before the momenta are put on shell.
fn initial_state(preset: Preset, seed: u64, lat: &Lattice) -> anyhow::Result<PhasePoint> {
    Ok(match preset {
        Preset::Wave => {
            let mut s = PhasePoint::vacuum(Embedding::identity(lat), lat);
            s.phi = lat.sample(f64::sin);
            s
        }
        Preset::Random => profile(seed).state(lat)?,
    })
}

pub fn evolve(mut cfg: RunConfig) -> anyhow::Result<()> {
    let seed = *cfg.seed.get_or_insert(0);
    let lat = cfg.lattice()?;
    let e = &cfg.evolve;
    let xi = field(&e.xi, &lat)?;
    let mut state = initial_state(e.preset, seed, &lat)?;
    if let Some(path) = &e.embedding {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        state.tau = Embedding::from_csv(&text, &lat).with_context(|| format!("embedding {}", path.display()))?;
    }
    let state = on_shell(&state, cfg.model.mass, &lat)?;
    let trace = evolve_sampled(&state, &xi, cfg.model.mass, e.lambda_end, e.step, e.every, &lat)?;
    let out = OutputDir::create(&cfg)?;
    out.csv("evolve.csv", &trace_csv(&trace, cfg.output.per_site))?;
    match trace.aborted {
        Some(err) => Err(err.into()),
        None => Ok(()),
    }
}

pub fn gauge_reduce(mut cfg: RunConfig) -> anyhow::Result<()> {
    let seed = *cfg.seed.get_or_insert(0);
    let lat = cfg.lattice()?;
    let g = &cfg.gauge;
    let gs = GaugeSpec::parse(&g.f0, &g.f1)?;
    let checks = ((g.lambda_end / g.step).ceil() as usize).clamp(2, 10_000);
    gs.validate_range(0.0, g.lambda_end, checks, &lat)?;
    let s = initial_state(g.initial, seed, &lat)?;
    let trace = reduced_evolve_sampled(&s.phi, &s.pi, &gs, cfg.model.mass, g.lambda_end, g.step, g.every, &lat)?;
    let out = OutputDir::create(&cfg)?;
    out.csv("reduced.csv", &trace.to_csv())
}

fn spec(cfg: &RunConfig, xi: &[String; 2], b: f64, lat: &Lattice) -> anyhow::Result<GibbsSpec> {
    let e = &cfg.ensemble;
    let xi = field(xi, lat)?;
    let spec = match e.mode {
        Mode::Matter => GibbsSpec::matter(xi, b, cfg.model.mass),
        Mode::Regulated => GibbsSpec::regulated(xi, b, cfg.model.mass, e.sigma_p, e.sigma_tau),
    };
    Ok(spec.with_pin(e.pin_zero_mode))
}

#[derive(Serialize)]
struct NamedEstimate {
    name: &'static str,
    mean: f64,
    stderr: f64,
}

#[derive(Serialize)]
struct SampleReport {
    samples: usize,
    acceptance: f64,
    observables: Vec<NamedEstimate>,
    chains: Vec<ChainInfo>,
    stationarity: Option<StationarityReport>,
}

type Observable = fn(&PhasePoint, &GibbsSpec, &Lattice) -> f64;

fn observables() -> [(&'static str, Observable); 4] {
    [
        ("energy", |s, spec, lat| comomentum(s, &spec.xi, spec.mass, lat).map_or(f64::NAN, |f| f.value)),
        ("phi_sq", |s, _, lat| s.phi.iter().map(|v| v * v).sum::<f64>() * lat.spacing()),
        ("pi_sq", |s, _, lat| s.pi.iter().map(|v| v * v).sum::<f64>() * lat.spacing()),
        ("phi_mean", |s, _, _| s.phi.iter().sum::<f64>() / s.phi.len() as f64),
    ]
}

fn histogram(values: &[f64], bins: usize) -> String {
    let mut out = String::from("lower,upper,count\n");
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let bins = bins.max(1);
    let width = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
    let mut counts = vec![0usize; bins];
    for v in values {
        let k = (((v - lo) / width) as usize).min(bins - 1);
        counts[k] += 1;
    }
    for (k, c) in counts.iter().enumerate() {
        out.push_str(&format!("{:?},{:?},{c}\n", lo + k as f64 * width, lo + (k + 1) as f64 * width));
    }
    out
}

fn trace_table(set: &SampleSet, energy: &[f64]) -> String {
    let mut out = String::from("index,chain,log_weight,energy\n");
    for (i, (lw, e)) in set.log_weights.iter().zip(energy).enumerate() {
        out.push_str(&format!("{i},{},{lw:?},{e:?}\n", i / set.chain_len));
    }
    out
}

pub fn sample(cfg: RunConfig) -> anyhow::Result<()> {
    let seed = cfg.require_seed()?;
    let lat = cfg.lattice()?;
    let spec = spec(&cfg, &cfg.ensemble.xi, cfg.ensemble.b, &lat)?;
    if cfg.stationarity.enabled {
        // the time-gauge flow only preserves the matter ensemble of ξ = (1, 0) on the identity slice
        let rest = field_on_slice(&spec.xi, &Embedding::identity(&lat))?.iter().all(|v| v == &[1.0, 0.0]);
        if cfg.ensemble.mode != Mode::Matter || !rest {
            return Err(Error::InvalidParameter(
                "stationarity needs the matter-sector mode with xi = (1, 0)".into(),
            )
            .into());
        }
    }
    let set = draw(&spec, &cfg.sampler_config(seed), &lat)?;
    let mut report = SampleReport {
        samples: set.len(),
        acceptance: set.acceptance(),
        observables: Vec::new(),
        chains: set.chains.clone(),
        stationarity: None,
    };
    for (name, f) in observables() {
        let Estimate { mean, stderr } = estimate(|s| f(s, &spec, &lat), &set)?;
        report.observables.push(NamedEstimate { name, mean, stderr });
    }
    if cfg.stationarity.enabled {
        let flow_mass = cfg.stationarity.flow_mass.unwrap_or(spec.mass);
        report.stationarity = Some(stationarity_of_samples(&set, flow_mass, &cfg.stationarity_config(), &lat)?);
    }
    let energy: Vec<f64> = set.states.iter().map(|s| observables()[0].1(s, &spec, &lat)).collect();
    let out = OutputDir::create(&cfg)?;
    out.json("sample.json", &report)?;
    out.csv("samples.csv", &trace_table(&set, &energy))?;
    out.csv("histogram.csv", &histogram(&energy, cfg.output.histogram_bins))
}

pub fn thermo(cfg: RunConfig) -> anyhow::Result<()> {
    let seed = cfg.require_seed()?;
    let lat = cfg.lattice()?;
    let e = &cfg.ensemble;
    let initial = spec(&cfg, &e.xi, e.b, &lat)?;
    let xi_final = cfg.thermo.xi_final.clone().unwrap_or_else(|| e.xi.clone());
    let fin = spec(&cfg, &xi_final, cfg.thermo.b_final.unwrap_or(e.b), &lat)?;
    let report = compare(&initial, &fin, &cfg.thermo_config(seed), &lat)?;
    let out = OutputDir::create(&cfg)?;
    out.json("thermo.json", &report)
}

pub fn verify_hashes(dir: &Path) -> anyhow::Result<()> {
    let rows = check_dir(dir)?;
    let mut bad = 0;
    for (name, ok) in &rows {
        println!("{name}: {}", if *ok { "ok" } else { "MISMATCH" });
        bad += usize::from(!ok);
    }
    if bad > 0 {
        bail!("{bad} of {} files do not match the config hash", rows.len());
    }
    Ok(())
}

pub fn verify_multisym(mut cfg: RunConfig) -> anyhow::Result<()> {
    let seed = *cfg.seed.get_or_insert(0);
    let lat = cfg.lattice()?;
    let xi = field(&cfg.check.xi, &lat)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut body = String::from("state,residual\n");
    let mut worst = 0.0f64;
    for k in 0..cfg.check.states {
        let s = SmoothProfile::random(&mut rng).state(&lat)?;
        let r = slice_pullback_check(&s, &xi, cfg.model.mass, &lat)?;
        worst = worst.max(r);
        body.push_str(&format!("{k},{r:?}\n"));
    }
    let out = OutputDir::create(&cfg)?;
    out.csv("multisym.csv", &body)?;
    if worst > PULLBACK_TOLERANCE {
        return Err(NumericalFailure(format!("pullback residual {worst:e} above {PULLBACK_TOLERANCE:e}")).into());
    }
    Ok(())
}
