//! Canonical parametrized phase space: constraints, smeared functionals,
//! the Poisson bracket and the algebra verifiers.

mod functional;
mod state;
mod verify;

pub use functional::{
    comomentum, comomentum_on_slice, constraint_densities, full_constraints, lapse_functional, matter_covector,
    shift_functional, smeared_constraint, spatial_momentum_map, Smearing, SmearedFunctional,
};
pub use state::{Fourier, PhasePoint, SmoothProfile};

pub(crate) use functional::site_density;
pub use verify::{
    convergence_order, dirac_algebra_study, equivariance_study, verify_dirac_algebra, verify_equivariance,
    AlgebraResiduals, TestFunctions,
};

use crate::error::{Error, Result};
use crate::grid::Lattice;

/// `{F, G} = Σ Δx (F_φ G_Π − F_Π G_φ + F_τ·G_P − F_P·G_τ)` on functional derivatives.
pub fn poisson_bracket(f: &SmearedFunctional, g: &SmearedFunctional, lat: &Lattice) -> Result<f64> {
    if f.token != g.token {
        return Err(Error::StateMismatch);
    }
    for h in [f, g] {
        for len in [h.grad_phi.len(), h.grad_pi.len(), h.grad_tau.len(), h.grad_p.len()] {
            lat.check_len(len)?;
        }
    }
    let mut acc = 0.0;
    for i in 0..lat.n() {
        acc += f.grad_phi[i] * g.grad_pi[i] - f.grad_pi[i] * g.grad_phi[i];
        for mu in 0..2 {
            acc += f.grad_tau[i][mu] * g.grad_p[i][mu] - f.grad_p[i][mu] * g.grad_tau[i][mu];
        }
    }
    Ok(acc * lat.spacing())
}
