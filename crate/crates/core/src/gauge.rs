//! Time-dependent gauge fixing `χ^μ = τ^μ − F^μ(λ, x)`, the Dirac bracket,
//! the reduced Hamiltonian and reduced dynamics.
//!
//! Gauge functions are field independent, so `χ` only involves `τ` and
//! `{ℋ_μ(x_i), χ^ν(x_j)} = −δ_μ^ν δ_ij / Δx` exactly.

use nalgebra::DMatrix;

use crate::canonical::{full_constraints, poisson_bracket, smeared_constraint, PhasePoint, Smearing, SmearedFunctional};
use crate::dynamics::rk4_step;
use crate::error::{Error, Result};
use crate::geometry::Embedding;
use crate::grid::{Expr, Lattice};

/// Tolerance for "on the reduced surface".
pub const SURFACE_TOLERANCE: f64 = 1e-10;

/// Gauge functions `F⁰(λ, x)`, `F¹(λ, x)`; `F¹` winds once around the circle.
#[derive(Debug, Clone, PartialEq)]
pub struct GaugeSpec {
    pub f0: Expr,
    pub f1: Expr,
}

impl GaugeSpec {
    pub fn new(f0: Expr, f1: Expr) -> Self {
        Self { f0, f1 }
    }

    pub fn parse(f0: &str, f1: &str) -> Result<Self> {
        Ok(Self::new(Expr::parse(f0)?, Expr::parse(f1)?))
    }

    /// `F⁰ = λ`, `F¹ = x`.
    pub fn timegauge() -> Self {
        Self::parse("lambda", "x").expect("valid literal expression")
    }

    /// The gauge slice `τ = F(λ, ·)`, checked for winding and spacelike tangents.
    pub fn slice(&self, lambda: f64, lat: &Lattice) -> Result<Embedding> {
        let l = lat.circumference();
        let mut tau0 = Vec::with_capacity(lat.n());
        let mut tau1 = Vec::with_capacity(lat.n());
        for x in lat.sites() {
            let a = self.f0.eval(lambda, x)?;
            let b = self.f1.eval(lambda, x)?;
            let da = (self.f0.eval(lambda, x + l)? - a).abs();
            let db = (self.f1.eval(lambda, x + l)? - b - l).abs();
            for deviation in [da, db] {
                if deviation > 1e-9 * (1.0 + a.abs() + b.abs()) {
                    return Err(Error::NotPeriodic { t: lambda, x, deviation });
                }
            }
            tau0.push(a);
            tau1.push(b);
        }
        Embedding::new(tau0, tau1, lat)
    }

    /// `∂_λ F^μ` at every site.
    pub fn velocity(&self, lambda: f64, lat: &Lattice) -> Result<Vec<[f64; 2]>> {
        lat.sites()
            .into_iter()
            .map(|x| Ok([self.f0.eval_with_grad(lambda, x)?.dt, self.f1.eval_with_grad(lambda, x)?.dt]))
            .collect()
    }

    /// Checks the slice at `samples + 1` evenly spaced values of `λ` in `[start, end]`.
    pub fn validate_range(&self, start: f64, end: f64, samples: usize, lat: &Lattice) -> Result<()> {
        let k = samples.max(1);
        for j in 0..=k {
            self.slice(start + (end - start) * j as f64 / k as f64, lat)?;
        }
        Ok(())
    }

    /// `max |χ|` at the given state.
    pub fn residual(&self, state: &PhasePoint, lambda: f64, lat: &Lattice) -> Result<f64> {
        let slice = self.slice(lambda, lat)?;
        Ok(state
            .tau
            .tau0
            .iter()
            .zip(&slice.tau0)
            .chain(state.tau.tau1.iter().zip(&slice.tau1))
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }
}

fn unit_vectors(lat: &Lattice, i: usize, mu: usize) -> Vec<[f64; 2]> {
    let mut v = vec![[0.0; 2]; lat.n()];
    v[i][mu] = 1.0 / lat.spacing();
    v
}

/// `ℋ_μ(x_i)` as a functional, for `μ = 0, 1` and every site, ordered `(μ, i)`.
pub fn pointwise_constraints(state: &PhasePoint, mass: f64, lat: &Lattice) -> Result<Vec<SmearedFunctional>> {
    let mut out = Vec::with_capacity(2 * lat.n());
    for mu in 0..2 {
        for i in 0..lat.n() {
            out.push(smeared_constraint(state, &Smearing::Values(unit_vectors(lat, i, mu)), mass, lat)?);
        }
    }
    Ok(out)
}

/// `χ^ν(x_j)` as a functional, ordered `(ν, j)`.
pub fn gauge_conditions(state: &PhasePoint, gs: &GaugeSpec, lambda: f64, lat: &Lattice) -> Result<Vec<SmearedFunctional>> {
    let slice = gs.slice(lambda, lat)?;
    let n = lat.n();
    let zero = vec![0.0; n];
    let zero2 = vec![[0.0; 2]; n];
    let mut out = Vec::with_capacity(2 * n);
    for nu in 0..2 {
        for j in 0..n {
            let mut f = SmearedFunctional::linear(state, lat, &zero, &zero, &unit_vectors(lat, j, nu), &zero2)?;
            f.value -= if nu == 0 { slice.tau0[j] } else { slice.tau1[j] };
            out.push(f);
        }
    }
    Ok(out)
}

fn bracket_matrix(rows: &[SmearedFunctional], cols: &[SmearedFunctional], lat: &Lattice) -> Result<DMatrix<f64>> {
    let mut m = DMatrix::zeros(rows.len(), cols.len());
    for (r, f) in rows.iter().enumerate() {
        for (c, g) in cols.iter().enumerate() {
            m[(r, c)] = poisson_bracket(f, g, lat)?;
        }
    }
    Ok(m)
}

/// Ratio of extreme singular values.
pub fn condition_number(m: &DMatrix<f64>) -> f64 {
    let sv = m.singular_values();
    let max = sv.iter().cloned().fold(0.0, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    max / min
}

/// The `2n × 2n` matrix `{ℋ_μ(x_i), χ^ν(x_j)}`, rows `(μ, i)`, columns `(ν, j)`.
pub fn constraint_matrix(
    state: &PhasePoint,
    gs: &GaugeSpec,
    lambda: f64,
    mass: f64,
    lat: &Lattice,
) -> Result<DMatrix<f64>> {
    let m = bracket_matrix(&pointwise_constraints(state, mass, lat)?, &gauge_conditions(state, gs, lambda, lat)?, lat)?;
    let condition = condition_number(&m);
    if !condition.is_finite() || condition > 1e14 {
        return Err(Error::SingularMatrix { condition });
    }
    Ok(m)
}

/// The full second-class system `ψ = (ℋ, χ)` at a state, with its bracket matrix.
#[derive(Debug, Clone)]
pub struct SecondClassSystem {
    pub constraints: Vec<SmearedFunctional>,
    /// `C_IJ = {ψ_I, ψ_J}`
    pub matrix: DMatrix<f64>,
    pub condition: f64,
    lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
}

impl SecondClassSystem {
    pub fn new(state: &PhasePoint, gs: &GaugeSpec, lambda: f64, mass: f64, lat: &Lattice) -> Result<Self> {
        let mut constraints = pointwise_constraints(state, mass, lat)?;
        constraints.extend(gauge_conditions(state, gs, lambda, lat)?);
        let matrix = bracket_matrix(&constraints, &constraints, lat)?;
        let condition = condition_number(&matrix);
        if !condition.is_finite() || condition > 1e14 {
            return Err(Error::SingularMatrix { condition });
        }
        let lu = matrix.clone().lu();
        Ok(Self { constraints, matrix, condition, lu })
    }

    /// Numerical rank of the bracket matrix.
    pub fn rank(&self) -> usize {
        let sv = self.matrix.singular_values();
        let max = sv.iter().cloned().fold(0.0, f64::max);
        sv.iter().filter(|s| **s > 1e-12 * max).count()
    }

    /// `{F, G}* = {F, G} − {F, ψ_I} C^{IJ} {ψ_J, G}`.
    pub fn dirac_bracket(&self, f: &SmearedFunctional, g: &SmearedFunctional, lat: &Lattice) -> Result<f64> {
        let k = self.constraints.len();
        let mut fpsi = DMatrix::zeros(1, k);
        let mut psig = DMatrix::zeros(k, 1);
        for (i, psi) in self.constraints.iter().enumerate() {
            fpsi[(0, i)] = poisson_bracket(f, psi, lat)?;
            psig[(i, 0)] = poisson_bracket(psi, g, lat)?;
        }
        let y = self.lu.solve(&psig).ok_or(Error::SingularMatrix { condition: self.condition })?;
        Ok(poisson_bracket(f, g, lat)? - (fpsi * y)[(0, 0)])
    }
}

/// One-shot Dirac bracket; builds the second-class system at the state.
pub fn dirac_bracket(
    f: &SmearedFunctional,
    g: &SmearedFunctional,
    state: &PhasePoint,
    gs: &GaugeSpec,
    lambda: f64,
    mass: f64,
    lat: &Lattice,
) -> Result<f64> {
    SecondClassSystem::new(state, gs, lambda, mass, lat)?.dirac_bracket(f, g, lat)
}

/// `H̄ = ∫ Ḟ^μ h_μ` with `τ = F(λ)`, matter sectors only.
fn reduced_functional(phi: &[f64], pi: &[f64], gs: &GaugeSpec, lambda: f64, mass: f64, lat: &Lattice) -> Result<SmearedFunctional> {
    let slice = gs.slice(lambda, lat)?;
    let mut state = PhasePoint::vacuum(slice, lat);
    state.phi = phi.to_vec();
    state.pi = pi.to_vec();
    let velocity = gs.velocity(lambda, lat)?;
    let mut f = smeared_constraint(&state, &Smearing::Values(velocity), mass, lat)?;
    f.grad_tau.iter_mut().for_each(|g| *g = [0.0; 2]);
    f.grad_p.iter_mut().for_each(|g| *g = [0.0; 2]);
    Ok(f)
}

/// The reduced Hamiltonian at a point of the reduced surface (`χ = 0`, `ℋ = 0`).
pub fn reduced_hamiltonian(
    state: &PhasePoint,
    gs: &GaugeSpec,
    lambda: f64,
    mass: f64,
    lat: &Lattice,
) -> Result<SmearedFunctional> {
    state.validate(lat)?;
    let chi = gs.residual(state, lambda, lat)?;
    if chi > SURFACE_TOLERANCE {
        return Err(Error::OffSurface { which: "gauge condition", residual: chi, tolerance: SURFACE_TOLERANCE });
    }
    let h = full_constraints(state, mass, lat)?.into_iter().flatten().fold(0.0, |m: f64, v| m.max(v.abs()));
    if h > SURFACE_TOLERANCE {
        return Err(Error::OffSurface { which: "constraint", residual: h, tolerance: SURFACE_TOLERANCE });
    }
    let mut f = reduced_functional(&state.phi, &state.pi, gs, lambda, mass, lat)?;
    f.token = state.fingerprint();
    Ok(f)
}

/// Matter trajectory of the reduced dynamics.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedTrace {
    pub lambda: Vec<f64>,
    pub phi: Vec<Vec<f64>>,
    pub pi: Vec<Vec<f64>>,
    pub energy: Vec<f64>,
}

impl ReducedTrace {
    pub fn to_csv(&self) -> String {
        let n = self.phi[0].len();
        let mut out = String::from("lambda,energy");
        for i in 0..n {
            out.push_str(&format!(",phi_{i}"));
        }
        for i in 0..n {
            out.push_str(&format!(",pi_{i}"));
        }
        out.push('\n');
        for k in 0..self.lambda.len() {
            out.push_str(&format!("{:?},{:?}", self.lambda[k], self.energy[k]));
            for v in self.phi[k].iter().chain(&self.pi[k]) {
                out.push_str(&format!(",{v:?}"));
            }
            out.push('\n');
        }
        out
    }
}

/// Advances matter data by `H̄` alone from `λ = 0` to `lambda_end`; the slice
/// follows `τ = F(λ)`. The last step is shortened to land on `lambda_end`.
pub fn reduced_evolve(
    phi: &[f64],
    pi: &[f64],
    gs: &GaugeSpec,
    mass: f64,
    lambda_end: f64,
    h: f64,
    lat: &Lattice,
) -> Result<ReducedTrace> {
    reduced_evolve_sampled(phi, pi, gs, mass, lambda_end, h, 1, lat)
}

/// As [`reduced_evolve`], recording every `every`-th step and the final state.
#[allow(clippy::too_many_arguments)]
pub fn reduced_evolve_sampled(
    phi: &[f64],
    pi: &[f64],
    gs: &GaugeSpec,
    mass: f64,
    lambda_end: f64,
    h: f64,
    every: usize,
    lat: &Lattice,
) -> Result<ReducedTrace> {
    lat.check_len(phi.len())?;
    lat.check_len(pi.len())?;
    if !(lambda_end > 0.0) || !(h > 0.0) || !lambda_end.is_finite() || !h.is_finite() {
        return Err(Error::InvalidParameter(format!("need lambda_end > 0 and h > 0, got {lambda_end} and {h}")));
    }
    if phi.iter().chain(pi).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { context: "reduced initial data".into() });
    }
    let n = lat.n();
    let rhs = |lambda: f64, y: &[f64]| -> Result<Vec<f64>> {
        let f = reduced_functional(&y[..n], &y[n..], gs, lambda, mass, lat)?;
        Ok(f.grad_pi.iter().copied().chain(f.grad_phi.iter().map(|g| -g)).collect())
    };
    let energy = |lambda: f64, y: &[f64]| -> Result<f64> { Ok(reduced_functional(&y[..n], &y[n..], gs, lambda, mass, lat)?.value) };
    let mut y: Vec<f64> = phi.iter().chain(pi).copied().collect();
    let mut trace = ReducedTrace { lambda: vec![0.0], phi: vec![phi.to_vec()], pi: vec![pi.to_vec()], energy: vec![energy(0.0, &y)?] };
    let every = every.max(1);
    let steps = (lambda_end / h - 1e-9).ceil().max(1.0) as usize;
    for k in 1..=steps {
        let start = (k - 1) as f64 * h;
        let lambda = if k == steps { lambda_end } else { k as f64 * h };
        y = rk4_step(start, &y, lambda - start, rhs)?;
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { context: format!("reduced state at lambda = {lambda}") });
        }
        if k % every == 0 || k == steps {
            trace.lambda.push(lambda);
            trace.energy.push(energy(lambda, &y)?);
            trace.phi.push(y[..n].to_vec());
            trace.pi.push(y[n..].to_vec());
        }
    }
    Ok(trace)
}
