//! Hamiltonian flow of `H(ξ)` on the full parametrized phase space.
//!
//! Fixed-step classical RK4 on
//! `φ̇ = δH/δΠ`, `Π̇ = −δH/δφ`, `τ̇ = δH/δP = ξ(τ)`, `Ṗ = −δH/δτ`,
//! using the off-shell right-hand side throughout.

use crate::canonical::{comomentum, full_constraints, PhasePoint, SmearedFunctional};
use crate::error::{Error, Result};
use crate::grid::{Lattice, SpacetimeVectorField};

/// One classical RK4 step for `y' = f(t, y)`.
pub fn rk4_step<F>(t: f64, y: &[f64], h: f64, f: F) -> Result<Vec<f64>>
where
    F: Fn(f64, &[f64]) -> Result<Vec<f64>>,
{
    let axpy = |k: &[f64], s: f64| y.iter().zip(k).map(|(a, b)| a + s * b).collect::<Vec<_>>();
    let k1 = f(t, y)?;
    let k2 = f(t + 0.5 * h, &axpy(&k1, 0.5 * h))?;
    let k3 = f(t + 0.5 * h, &axpy(&k2, 0.5 * h))?;
    let k4 = f(t + h, &axpy(&k3, h))?;
    Ok((0..y.len())
        .map(|i| y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect())
}

/// Hamiltonian vector field of a smeared functional, flattened like [`PhasePoint::to_vec`].
pub fn hamiltonian_vector_field(f: &SmearedFunctional) -> Vec<f64> {
    let n = f.grad_phi.len();
    let mut v = Vec::with_capacity(6 * n);
    v.extend(&f.grad_pi);
    v.extend(f.grad_phi.iter().map(|g| -g));
    v.extend(f.grad_p.iter().map(|g| g[0]));
    v.extend(f.grad_p.iter().map(|g| g[1]));
    v.extend(f.grad_tau.iter().map(|g| -g[0]));
    v.extend(f.grad_tau.iter().map(|g| -g[1]));
    v
}

fn flow_rhs(y: &[f64], xi: &SpacetimeVectorField, mass: f64, lat: &Lattice) -> Result<Vec<f64>> {
    let state = PhasePoint::from_slice(y, lat.n());
    Ok(hamiltonian_vector_field(&comomentum(&state, xi, mass, lat)?))
}

/// One RK4 step of the flow generated by `H(ξ)`.
pub fn flow_step(state: &PhasePoint, xi: &SpacetimeVectorField, mass: f64, h: f64, lat: &Lattice) -> Result<PhasePoint> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::InvalidParameter(format!("step size must be positive, got {h}")));
    }
    state.validate(lat)?;
    let y = rk4_step(0.0, &state.to_vec(), h, |_, y| flow_rhs(y, xi, mass, lat))?;
    let next = PhasePoint::from_slice(&y, lat.n());
    next.validate(lat)?;
    Ok(next)
}

/// Samples of a flow together with constraint drift and `H(ξ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowTrace {
    pub lambda: Vec<f64>,
    pub states: Vec<PhasePoint>,
    /// `max_{i,μ} |ℋ_μ(x_i; λ) − ℋ_μ(x_i; 0)|`
    pub drift: Vec<f64>,
    pub energy: Vec<f64>,
    /// Set when the flow stopped early; the samples up to that point are kept.
    pub aborted: Option<Error>,
}

impl FlowTrace {
    pub fn last(&self) -> &PhasePoint {
        self.states.last().expect("a trace always holds its initial state")
    }

    pub fn max_drift(&self) -> f64 {
        self.drift.iter().fold(0.0, |m, d| m.max(*d))
    }

    /// Largest deviation of `H(ξ)` from its initial value.
    pub fn energy_variation(&self) -> f64 {
        let e0 = self.energy[0];
        self.energy.iter().fold(0.0, |m, e| m.max((e - e0).abs()))
    }
}

fn drift(h0: &[[f64; 2]], h: &[[f64; 2]]) -> f64 {
    h0.iter()
        .zip(h)
        .flat_map(|(a, b)| [(a[0] - b[0]).abs(), (a[1] - b[1]).abs()])
        .fold(0.0, f64::max)
}

/// Integrates to `lambda_end` with fixed step `h` (the final step is shortened
/// to land exactly), recording every step.
pub fn evolve(
    state: &PhasePoint,
    xi: &SpacetimeVectorField,
    mass: f64,
    lambda_end: f64,
    h: f64,
    lat: &Lattice,
) -> Result<FlowTrace> {
    evolve_sampled(state, xi, mass, lambda_end, h, 1, lat)
}

/// As [`evolve`], recording every `every`-th step and the final state.
pub fn evolve_sampled(
    state: &PhasePoint,
    xi: &SpacetimeVectorField,
    mass: f64,
    lambda_end: f64,
    h: f64,
    every: usize,
    lat: &Lattice,
) -> Result<FlowTrace> {
    if !(lambda_end > 0.0) || !lambda_end.is_finite() {
        return Err(Error::InvalidParameter(format!("lambda_end must be positive, got {lambda_end}")));
    }
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::InvalidParameter(format!("step size must be positive, got {h}")));
    }
    let every = every.max(1);
    state.validate(lat)?;
    let h0 = full_constraints(state, mass, lat)?;
    let mut trace = FlowTrace {
        lambda: vec![0.0],
        states: vec![state.clone()],
        drift: vec![0.0],
        energy: vec![comomentum(state, xi, mass, lat)?.value],
        aborted: None,
    };
    let steps = (lambda_end / h - 1e-9).ceil().max(1.0) as usize;
    let mut current = state.clone();
    for k in 1..=steps {
        let lambda = if k == steps { lambda_end } else { k as f64 * h };
        let step = lambda - (k - 1) as f64 * h;
        match flow_step(&current, xi, mass, step, lat) {
            Ok(next) => current = next,
            Err(e) => {
                trace.aborted = Some(Error::FlowAborted { lambda, reason: e.to_string() });
                return Ok(trace);
            }
        }
        if k % every == 0 || k == steps {
            trace.lambda.push(lambda);
            trace.drift.push(drift(&h0, &full_constraints(&current, mass, lat)?));
            trace.energy.push(comomentum(&current, xi, mass, lat)?.value);
            trace.states.push(current.clone());
        }
    }
    Ok(trace)
}

/// Puts a state on the constraint surface by setting `P_μ = −h_μ`.
pub fn on_shell(state: &PhasePoint, mass: f64, lat: &Lattice) -> Result<PhasePoint> {
    let h = crate::canonical::matter_covector(state, mass, lat)?;
    let mut s = state.clone();
    s.p = h.into_iter().map(|v| [-v[0], -v[1]]).collect();
    Ok(s)
}

/// CSV of a trace: `lambda,drift,energy` and optionally the per-site matter fields.
pub fn trace_csv(trace: &FlowTrace, per_site: bool) -> String {
    let n = trace.states[0].n();
    let mut out = String::from("lambda,drift,energy");
    if per_site {
        for i in 0..n {
            out.push_str(&format!(",phi_{i}"));
        }
        for i in 0..n {
            out.push_str(&format!(",pi_{i}"));
        }
        for i in 0..n {
            out.push_str(&format!(",tau0_{i},tau1_{i}"));
        }
    }
    out.push('\n');
    for (k, s) in trace.states.iter().enumerate() {
        out.push_str(&format!("{:?},{:?},{:?}", trace.lambda[k], trace.drift[k], trace.energy[k]));
        if per_site {
            for v in s.phi.iter().chain(&s.pi) {
                out.push_str(&format!(",{v:?}"));
            }
            for i in 0..n {
                out.push_str(&format!(",{:?},{:?}", s.tau.tau0[i], s.tau.tau1[i]));
            }
        }
        out.push('\n');
    }
    out
}
