//! Constraint densities and smeared constraint functionals with exact gradients.
//!
//! Per site, with `a = τ⁰'`, `c = τ¹'`, `Q = c² − a²`:
//!
//! ```text
//! H_⊥ = (Π² + φ'²) / (2√Q) + √Q m² φ² / 2        H_∥ = Π φ'
//! h_0 = (c K − a W)/Q + c V                       h_1 = (−a K + c W)/Q − a V
//! ```
//!
//! with `K = (Π² + φ'²)/2`, `W = Π φ'`, `V = m² φ²/2`, so that
//! `h_μ = −n_μ H_⊥ + τ'_μ H_∥ / Q` and `ℋ_μ = P_μ + h_μ`.

use crate::canonical::PhasePoint;
use crate::error::{Error, Result};
use crate::geometry::{slice_geometry, SliceGeometry};
use crate::grid::{derivative_transpose, derivative_unchecked, Lattice, SpacetimeVectorField};

/// Matter densities and their local partials at one site.
#[derive(Debug, Clone, Copy)]
pub(crate) struct SiteDensity {
    pub h: [f64; 2],
    pub dh_dphi: [f64; 2],
    pub dh_dphi_prime: [f64; 2],
    pub dh_dpi: [f64; 2],
    pub dh_da: [f64; 2],
    pub dh_dc: [f64; 2],
}

#[inline]
pub(crate) fn site_density(phi: f64, dphi: f64, pi: f64, a: f64, c: f64, mass: f64) -> SiteDensity {
    let q = c * c - a * a;
    let q2 = q * q;
    let m2 = mass * mass;
    let k = 0.5 * (pi * pi + dphi * dphi);
    let w = pi * dphi;
    let v = 0.5 * m2 * phi * phi;
    let u0 = c * k - a * w;
    let u1 = -a * k + c * w;
    SiteDensity {
        h: [u0 / q + c * v, u1 / q - a * v],
        dh_dphi: [c * m2 * phi, -a * m2 * phi],
        dh_dphi_prime: [(c * dphi - a * pi) / q, (c * pi - a * dphi) / q],
        dh_dpi: [(c * pi - a * dphi) / q, (c * dphi - a * pi) / q],
        dh_da: [-w / q + 2.0 * a * u0 / q2, -k / q + 2.0 * a * u1 / q2 - v],
        dh_dc: [k / q - 2.0 * c * u0 / q2 + v, w / q - 2.0 * c * u1 / q2],
    }
}

/// Normal and tangential densities `(H_⊥, H_∥)`.
pub fn constraint_densities(state: &PhasePoint, mass: f64, lat: &Lattice) -> Result<(Vec<f64>, Vec<f64>)> {
    state.validate(lat)?;
    let geo = slice_geometry(&state.tau, lat)?;
    let dphi = derivative_unchecked(&state.phi, 0.0, lat);
    let m2 = mass * mass;
    Ok((0..lat.n())
        .map(|i| {
            let s = geo.sqrt_q[i];
            let perp = 0.5 * (state.pi[i].powi(2) + dphi[i].powi(2)) / s + 0.5 * s * m2 * state.phi[i].powi(2);
            (perp, state.pi[i] * dphi[i])
        })
        .unzip())
}

/// Matter part `h_μ` of the constraint covector at every site.
pub fn matter_covector(state: &PhasePoint, mass: f64, lat: &Lattice) -> Result<Vec<[f64; 2]>> {
    state.validate(lat)?;
    let tangents = state.tau.tangents(lat);
    let dphi = derivative_unchecked(&state.phi, 0.0, lat);
    Ok((0..lat.n())
        .map(|i| {
            let [a, c] = tangents[i];
            site_density(state.phi[i], dphi[i], state.pi[i], a, c, mass).h
        })
        .collect())
}

/// Full constraint covector `ℋ_μ = P_μ + h_μ` per site.
pub fn full_constraints(state: &PhasePoint, mass: f64, lat: &Lattice) -> Result<Vec<[f64; 2]>> {
    Ok(matter_covector(state, mass, lat)?
        .into_iter()
        .zip(&state.p)
        .map(|(h, p)| [h[0] + p[0], h[1] + p[1]])
        .collect())
}

/// A smeared functional: its value and functional derivatives in every sector.
///
/// Gradients are `δF/δX(x_i)`, i.e. partial derivatives divided by the spacing.
#[derive(Debug, Clone, PartialEq)]
pub struct SmearedFunctional {
    pub value: f64,
    pub grad_phi: Vec<f64>,
    pub grad_pi: Vec<f64>,
    pub grad_tau: Vec<[f64; 2]>,
    pub grad_p: Vec<[f64; 2]>,
    /// Fingerprint of the state the functional was evaluated at.
    pub token: u64,
}

impl SmearedFunctional {
    pub fn zero(state: &PhasePoint) -> Self {
        let n = state.n();
        Self {
            value: 0.0,
            grad_phi: vec![0.0; n],
            grad_pi: vec![0.0; n],
            grad_tau: vec![[0.0; 2]; n],
            grad_p: vec![[0.0; 2]; n],
            token: state.fingerprint(),
        }
    }

    /// The linear functional `∫ (f_φ φ + f_Π Π + f_τ·τ + f_P·P)`.
    ///
    /// The τ¹ pairing uses the stored (unwrapped) values.
    pub fn linear(
        state: &PhasePoint,
        lat: &Lattice,
        f_phi: &[f64],
        f_pi: &[f64],
        f_tau: &[[f64; 2]],
        f_p: &[[f64; 2]],
    ) -> Result<Self> {
        for len in [f_phi.len(), f_pi.len(), f_tau.len(), f_p.len()] {
            lat.check_len(len)?;
        }
        let dx = lat.spacing();
        let mut value = 0.0;
        for i in 0..lat.n() {
            value += f_phi[i] * state.phi[i]
                + f_pi[i] * state.pi[i]
                + f_tau[i][0] * state.tau.tau0[i]
                + f_tau[i][1] * state.tau.tau1[i]
                + f_p[i][0] * state.p[i][0]
                + f_p[i][1] * state.p[i][1];
        }
        Ok(Self {
            value: value * dx,
            grad_phi: f_phi.to_vec(),
            grad_pi: f_pi.to_vec(),
            grad_tau: f_tau.to_vec(),
            grad_p: f_p.to_vec(),
            token: state.fingerprint(),
        })
    }

    /// `α F + β G`; both must belong to the same state.
    pub fn combine(&self, alpha: f64, other: &Self, beta: f64) -> Result<Self> {
        if self.token != other.token {
            return Err(Error::StateMismatch);
        }
        let lin = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| alpha * x + beta * y).collect::<Vec<_>>();
        let lin2 = |a: &[[f64; 2]], b: &[[f64; 2]]| {
            a.iter()
                .zip(b)
                .map(|(x, y)| [alpha * x[0] + beta * y[0], alpha * x[1] + beta * y[1]])
                .collect::<Vec<_>>()
        };
        Ok(Self {
            value: alpha * self.value + beta * other.value,
            grad_phi: lin(&self.grad_phi, &other.grad_phi),
            grad_pi: lin(&self.grad_pi, &other.grad_pi),
            grad_tau: lin2(&self.grad_tau, &other.grad_tau),
            grad_p: lin2(&self.grad_p, &other.grad_p),
            token: self.token,
        })
    }
}

/// How the constraint covector is smeared into a scalar functional.
#[derive(Debug, Clone)]
pub enum Smearing<'a> {
    /// `ξ^μ(τ(x))` for an analytic spacetime field, including its embedding dependence.
    Field(&'a SpacetimeVectorField),
    /// Fixed per-site vectors, independent of the state.
    Values(Vec<[f64; 2]>),
    /// `N n^μ`: the normal (lapse) projection.
    Lapse(Vec<f64>),
    /// `N¹ τ'^μ`: the tangential (shift) projection.
    Shift(Vec<f64>),
}

/// Per-site smearing vector and its partials in `τ`, `a = τ⁰'` and `c = τ¹'`.
struct SmearingSite {
    s: [f64; 2],
    ds_dtau: [[f64; 2]; 2],
    ds_da: [f64; 2],
    ds_dc: [f64; 2],
}

fn smearing_sites(
    smearing: &Smearing<'_>,
    state: &PhasePoint,
    geo: &SliceGeometry,
    lat: &Lattice,
) -> Result<Vec<SmearingSite>> {
    let n = lat.n();
    let zero = SmearingSite { s: [0.0; 2], ds_dtau: [[0.0; 2]; 2], ds_da: [0.0; 2], ds_dc: [0.0; 2] };
    let mut out = Vec::with_capacity(n);
    match smearing {
        Smearing::Field(xi) => {
            for i in 0..n {
                let (t, x) = state.tau.point(i);
                let [d0, d1] = xi.eval_with_grad(t, x)?;
                out.push(SmearingSite {
                    s: [d0.value, d1.value],
                    ds_dtau: [[d0.dt, d0.dx], [d1.dt, d1.dx]],
                    ..zero
                });
            }
        }
        Smearing::Values(v) => {
            lat.check_len(v.len())?;
            out.extend(v.iter().map(|&s| SmearingSite { s, ..zero }));
        }
        Smearing::Lapse(lapse) => {
            lat.check_len(lapse.len())?;
            for i in 0..n {
                let [a, c] = geo.tangent[i];
                let q = geo.q11[i];
                let q32 = q * geo.sqrt_q[i];
                let nn = lapse[i];
                out.push(SmearingSite {
                    s: [nn * geo.normal_up[i][0], nn * geo.normal_up[i][1]],
                    ds_da: [nn * c * a / q32, nn * c * c / q32],
                    ds_dc: [-nn * a * a / q32, -nn * a * c / q32],
                    ..zero
                });
            }
        }
        Smearing::Shift(shift) => {
            lat.check_len(shift.len())?;
            for i in 0..n {
                let [a, c] = geo.tangent[i];
                let ns = shift[i];
                out.push(SmearingSite { s: [ns * a, ns * c], ds_da: [ns, 0.0], ds_dc: [0.0, ns], ..zero });
            }
        }
    }
    Ok(out)
}

/// `F = ∫ s^μ (h_μ + P_μ)` for the given smearing, with all functional derivatives.
pub fn smeared_constraint(
    state: &PhasePoint,
    smearing: &Smearing<'_>,
    mass: f64,
    lat: &Lattice,
) -> Result<SmearedFunctional> {
    state.validate(lat)?;
    let geo = slice_geometry(&state.tau, lat)?;
    let sites = smearing_sites(smearing, state, &geo, lat)?;
    let n = lat.n();
    let dphi = derivative_unchecked(&state.phi, 0.0, lat);

    let mut value = 0.0;
    let mut grad_phi = vec![0.0; n];
    let mut grad_pi = vec![0.0; n];
    let mut grad_tau = vec![[0.0; 2]; n];
    let mut grad_p = vec![[0.0; 2]; n];
    // coefficients of φ', τ⁰', τ¹' that are pulled back through the stencil
    let mut g_phi_prime = vec![0.0; n];
    let mut g_a = vec![0.0; n];
    let mut g_c = vec![0.0; n];

    for i in 0..n {
        let [a, c] = geo.tangent[i];
        let d = site_density(state.phi[i], dphi[i], state.pi[i], a, c, mass);
        let ss = &sites[i];
        let s = ss.s;
        let hc = [d.h[0] + state.p[i][0], d.h[1] + state.p[i][1]];
        let dot = |u: [f64; 2], v: [f64; 2]| u[0] * v[0] + u[1] * v[1];

        value += dot(s, hc);
        grad_p[i] = s;
        grad_pi[i] = dot(s, d.dh_dpi);
        grad_phi[i] = dot(s, d.dh_dphi);
        g_phi_prime[i] = dot(s, d.dh_dphi_prime);
        grad_tau[i] = [
            ss.ds_dtau[0][0] * hc[0] + ss.ds_dtau[1][0] * hc[1],
            ss.ds_dtau[0][1] * hc[0] + ss.ds_dtau[1][1] * hc[1],
        ];
        g_a[i] = dot(ss.ds_da, hc) + dot(s, d.dh_da);
        g_c[i] = dot(ss.ds_dc, hc) + dot(s, d.dh_dc);
    }
    let t_phi = derivative_transpose(&g_phi_prime, lat);
    let t_a = derivative_transpose(&g_a, lat);
    let t_c = derivative_transpose(&g_c, lat);
    for i in 0..n {
        grad_phi[i] += t_phi[i];
        grad_tau[i][0] += t_a[i];
        grad_tau[i][1] += t_c[i];
    }
    Ok(SmearedFunctional {
        value: value * lat.spacing(),
        grad_phi,
        grad_pi,
        grad_tau,
        grad_p,
        token: state.fingerprint(),
    })
}

/// The co-momentum map `H(ξ) = ∫ ξ^μ(τ(x)) (ℋ^(φ)_μ + P_μ)`.
pub fn comomentum(
    state: &PhasePoint,
    xi: &SpacetimeVectorField,
    mass: f64,
    lat: &Lattice,
) -> Result<SmearedFunctional> {
    smeared_constraint(state, &Smearing::Field(xi), mass, lat)
}

/// `H(ξ)` for a vector field given only by its values on the current slice.
pub fn comomentum_on_slice(
    state: &PhasePoint,
    values: &[[f64; 2]],
    mass: f64,
    lat: &Lattice,
) -> Result<SmearedFunctional> {
    smeared_constraint(state, &Smearing::Values(values.to_vec()), mass, lat)
}

/// Lapse-smeared normal constraint `H[N] = ∫ N (n^μ P_μ + H_⊥)`.
pub fn lapse_functional(state: &PhasePoint, lapse: &[f64], mass: f64, lat: &Lattice) -> Result<SmearedFunctional> {
    smeared_constraint(state, &Smearing::Lapse(lapse.to_vec()), mass, lat)
}

/// Shift-smeared tangential constraint `H[N⃗] = ∫ N¹ (τ'^μ P_μ + H_∥)`.
pub fn shift_functional(state: &PhasePoint, shift: &[f64], mass: f64, lat: &Lattice) -> Result<SmearedFunctional> {
    smeared_constraint(state, &Smearing::Shift(shift.to_vec()), mass, lat)
}

/// Restriction of the momentum map to spatial diffeomorphisms,
/// `⟨J_τ, ζ⟩ = −∫ ζ (τ'^μ P_μ + H_∥)`.
///
/// Computed directly from the tangential density rather than through
/// [`smeared_constraint`].
pub fn spatial_momentum_map(state: &PhasePoint, zeta: &[f64], mass: f64, lat: &Lattice) -> Result<SmearedFunctional> {
    let _ = mass; // H_∥ is mass independent
    state.validate(lat)?;
    lat.check_len(zeta.len())?;
    let n = lat.n();
    let dphi = derivative_unchecked(&state.phi, 0.0, lat);
    let tangents = state.tau.tangents(lat);
    let mut value = 0.0;
    for i in 0..n {
        let t = tangents[i];
        let tangential = t[0] * state.p[i][0] + t[1] * state.p[i][1] + state.pi[i] * dphi[i];
        value += zeta[i] * tangential;
    }
    let zeta_pi: Vec<f64> = (0..n).map(|i| zeta[i] * state.pi[i]).collect();
    let zeta_p0: Vec<f64> = (0..n).map(|i| zeta[i] * state.p[i][0]).collect();
    let zeta_p1: Vec<f64> = (0..n).map(|i| zeta[i] * state.p[i][1]).collect();
    // −∫ζ Π Dφ  →  δ/δφ = D(ζΠ);  −∫ζ P_μ Dτ^μ  →  δ/δτ^μ = D(ζ P_μ)
    let grad_phi = derivative_unchecked(&zeta_pi, 0.0, lat);
    let g0 = derivative_unchecked(&zeta_p0, 0.0, lat);
    let g1 = derivative_unchecked(&zeta_p1, 0.0, lat);
    Ok(SmearedFunctional {
        value: -value * lat.spacing(),
        grad_phi,
        grad_pi: (0..n).map(|i| -zeta[i] * dphi[i]).collect(),
        grad_tau: g0.into_iter().zip(g1).map(|(a, b)| [a, b]).collect(),
        grad_p: (0..n).map(|i| [-zeta[i] * tangents[i][0], -zeta[i] * tangents[i][1]]).collect(),
        token: state.fingerprint(),
    })
}
