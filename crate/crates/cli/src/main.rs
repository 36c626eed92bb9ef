//! Command-line driver: loads a TOML run config, applies flag overrides, runs one
//! experiment and writes its outputs together with the resolved config.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use config::{Mode, Preset, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "pftlab", version, about = "Lattice experiments for a parametrized scalar field")]
struct Cli {
    /// TOML run config; flags override its values
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    mass: Option<f64>,
    /// Worker threads; results do not depend on this
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct LatticeArgs {
    /// Lattice sites
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    circumference: Option<f64>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum CheckKind {
    /// Residuals of the hypersurface-deformation algebra
    Algebra,
    /// Residual of the comomentum-map equivariance
    Equivariance,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum GaugePreset {
    Timegauge,
}

#[derive(Debug, Subcommand)]
enum VerifyKind {
    /// Recompute the config hash of an output directory and check every file against it
    Hashes { dir: PathBuf },
    /// Slice pullback of the multisymplectic momentum map on random states
    Multisym {
        #[arg(long)]
        states: Option<usize>,
        #[command(flatten)]
        lattice: LatticeArgs,
    },
}

#[derive(Debug, Args)]
struct EnsembleArgs {
    #[command(flatten)]
    lattice: LatticeArgs,
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    #[arg(long, num_args = 2, value_names = ["XI0", "XI1"], allow_hyphen_values = true)]
    xi: Option<Vec<String>>,
    #[arg(long)]
    b: Option<f64>,
    #[arg(long)]
    sigma_p: Option<f64>,
    #[arg(long)]
    sigma_tau: Option<f64>,
    /// Remove the kernel of the central difference from the φ sector
    #[arg(long)]
    pin: bool,
    #[arg(long)]
    chains: Option<usize>,
    #[arg(long)]
    samples_per_chain: Option<usize>,
    #[arg(long)]
    burn_in: Option<usize>,
    #[arg(long)]
    thin: Option<usize>,
    /// Langevin proposals instead of single-site moves
    #[arg(long)]
    langevin: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Convergence studies over lattice refinement
    Check {
        #[arg(value_enum)]
        kind: CheckKind,
        /// Comma-separated lattice sizes
        #[arg(long, value_delimiter = ',')]
        n: Option<Vec<usize>>,
    },
    /// Integrate the flow of H(ξ) and write the trace
    Evolve {
        #[command(flatten)]
        lattice: LatticeArgs,
        #[arg(long, num_args = 2, value_names = ["XI0", "XI1"], allow_hyphen_values = true)]
        xi: Option<Vec<String>>,
        #[arg(long, value_enum)]
        preset: Option<Preset>,
        /// Embedding CSV (columns tau0,tau1) replacing the preset slice
        #[arg(long)]
        embedding: Option<PathBuf>,
        #[arg(long)]
        lambda_end: Option<f64>,
        #[arg(long)]
        step: Option<f64>,
        /// Record every k-th step
        #[arg(long)]
        every: Option<usize>,
        #[arg(long)]
        per_site: bool,
    },
    /// Evolve matter data with the reduced Hamiltonian of a gauge F(λ, x)
    GaugeReduce {
        #[command(flatten)]
        lattice: LatticeArgs,
        #[arg(long, value_enum, conflicts_with_all = ["f0", "f1"])]
        preset: Option<GaugePreset>,
        #[arg(long, allow_hyphen_values = true)]
        f0: Option<String>,
        #[arg(long, allow_hyphen_values = true)]
        f1: Option<String>,
        #[arg(long, value_enum)]
        initial: Option<Preset>,
        #[arg(long)]
        lambda_end: Option<f64>,
        #[arg(long)]
        step: Option<f64>,
        #[arg(long)]
        every: Option<usize>,
    },
    /// Sample a Gibbs ensemble
    Sample {
        #[command(flatten)]
        ensemble: EnsembleArgs,
        /// Also push the samples through the time-gauge flow
        #[arg(long)]
        stationarity: bool,
        #[arg(long)]
        flow_time: Option<f64>,
        #[arg(long)]
        flow_mass: Option<f64>,
    },
    /// Thermodynamic comparison of two Gibbs states
    Thermo {
        #[command(flatten)]
        ensemble: EnsembleArgs,
        #[arg(long)]
        b_final: Option<f64>,
        #[arg(long, num_args = 2, value_names = ["XI0", "XI1"], allow_hyphen_values = true)]
        xi_final: Option<Vec<String>>,
        #[arg(long)]
        stages: Option<usize>,
    },
    /// Consistency checks on existing outputs or on the model
    Verify {
        #[command(subcommand)]
        kind: VerifyKind,
    },
}

fn pair(v: Vec<String>) -> [String; 2] {
    let [a, b]: [String; 2] = v.try_into().expect("clap enforces two values");
    [a, b]
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

fn apply_lattice(c: &mut RunConfig, l: LatticeArgs) {
    set(&mut c.lattice.n, l.n);
    set(&mut c.lattice.circumference, l.circumference);
}

fn apply_ensemble(c: &mut RunConfig, e: EnsembleArgs) {
    apply_lattice(c, e.lattice);
    set(&mut c.ensemble.mode, e.mode);
    set(&mut c.ensemble.xi, e.xi.map(pair));
    set(&mut c.ensemble.b, e.b);
    set(&mut c.ensemble.sigma_p, e.sigma_p);
    set(&mut c.ensemble.sigma_tau, e.sigma_tau);
    c.ensemble.pin_zero_mode |= e.pin;
    set(&mut c.sampler.chains, e.chains);
    set(&mut c.sampler.samples_per_chain, e.samples_per_chain);
    set(&mut c.sampler.burn_in, e.burn_in);
    set(&mut c.sampler.thin, e.thin);
    c.sampler.langevin |= e.langevin;
}

/// What to run once the config is resolved.
enum Job {
    Check(CheckKind),
    Evolve,
    GaugeReduce,
    Sample,
    Thermo,
    VerifyHashes(PathBuf),
    VerifyMultisym,
}

fn resolve(cli: Cli) -> anyhow::Result<(RunConfig, Job)> {
    let mut c = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    set(&mut c.output.directory, cli.out);
    if cli.seed.is_some() {
        c.seed = cli.seed;
    }
    set(&mut c.model.mass, cli.mass);
    let job = match cli.command {
        Command::Check { kind, n } => {
            set(&mut c.check.sizes, n);
            c.command = format!("check {}", kind.to_possible_value().expect("no skipped variants").get_name());
            Job::Check(kind)
        }
        Command::Evolve { lattice, xi, preset, embedding, lambda_end, step, every, per_site } => {
            apply_lattice(&mut c, lattice);
            set(&mut c.evolve.xi, xi.map(pair));
            set(&mut c.evolve.preset, preset);
            if embedding.is_some() {
                c.evolve.embedding = embedding;
            }
            set(&mut c.evolve.lambda_end, lambda_end);
            set(&mut c.evolve.step, step);
            set(&mut c.evolve.every, every);
            c.output.per_site |= per_site;
            c.command = "evolve".into();
            Job::Evolve
        }
        Command::GaugeReduce { lattice, preset, f0, f1, initial, lambda_end, step, every } => {
            apply_lattice(&mut c, lattice);
            if let Some(GaugePreset::Timegauge) = preset {
                c.gauge.f0 = "lambda".into();
                c.gauge.f1 = "x".into();
            }
            set(&mut c.gauge.f0, f0);
            set(&mut c.gauge.f1, f1);
            set(&mut c.gauge.initial, initial);
            set(&mut c.gauge.lambda_end, lambda_end);
            set(&mut c.gauge.step, step);
            set(&mut c.gauge.every, every);
            c.command = "gauge-reduce".into();
            Job::GaugeReduce
        }
        Command::Sample { ensemble, stationarity, flow_time, flow_mass } => {
            apply_ensemble(&mut c, ensemble);
            c.stationarity.enabled |= stationarity;
            set(&mut c.stationarity.flow_time, flow_time);
            if flow_mass.is_some() {
                c.stationarity.flow_mass = flow_mass;
            }
            c.command = "sample".into();
            Job::Sample
        }
        Command::Thermo { ensemble, b_final, xi_final, stages } => {
            apply_ensemble(&mut c, ensemble);
            if b_final.is_some() {
                c.thermo.b_final = b_final;
            }
            if xi_final.is_some() {
                c.thermo.xi_final = xi_final.map(pair);
            }
            set(&mut c.thermo.stages, stages);
            c.command = "thermo".into();
            Job::Thermo
        }
        Command::Verify { kind: VerifyKind::Hashes { dir } } => {
            c.command = "verify hashes".into();
            Job::VerifyHashes(dir)
        }
        Command::Verify { kind: VerifyKind::Multisym { states, lattice } } => {
            apply_lattice(&mut c, lattice);
            set(&mut c.check.states, states);
            c.command = "verify multisym".into();
            Job::VerifyMultisym
        }
    };
    Ok((c, job))
}

fn run(cli: Cli) -> anyhow::Result<()> {
    if let Some(k) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(k.max(1)).build_global()?;
    }
    let (cfg, job) = resolve(cli)?;
    match job {
        Job::Check(CheckKind::Algebra) => commands::check_algebra(cfg),
        Job::Check(CheckKind::Equivariance) => commands::check_equivariance(cfg),
        Job::Evolve => commands::evolve(cfg),
        Job::GaugeReduce => commands::gauge_reduce(cfg),
        Job::Sample => commands::sample(cfg),
        Job::Thermo => commands::thermo(cfg),
        Job::VerifyHashes(dir) => commands::verify_hashes(&dir),
        Job::VerifyMultisym => commands::verify_multisym(cfg),
    }
}

/// 2 for numerical failures of the core, 1 for everything else.
fn exit_code(e: &anyhow::Error) -> u8 {
    use pftlab::Error::*;
    if e.chain().any(|c| c.is::<commands::NumericalFailure>()) {
        return 2;
    }
    match e.chain().find_map(|c| c.downcast_ref::<pftlab::Error>()) {
        Some(NonFinite { .. } | DivisionByZero | SingularMatrix { .. } | OffSurface { .. }) => 2,
        Some(InsufficientOverlap { .. } | FlowAborted { .. }) => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let usage_error = e.use_stderr();
            let _ = e.print();
            return ExitCode::from(if usage_error { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
