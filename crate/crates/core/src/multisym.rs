//! Pointwise covariant Hamiltonian data for the parametrized free scalar,
//! and the check that the slice pullback of the covariant momentum map
//! reproduces the canonical co-momentum integrand.
//!
//! Jet coordinates are `(x^μ, y, v_μ, u^a, u^a_μ)` with `G_μν = u^a_μ u^b_ν η_ab`
//! and density `L = −√(−det G) (G^μν v_μ v_ν + m² y²) / 2`.

use crate::canonical::{comomentum, PhasePoint};
use crate::error::{Error, Result};
use crate::geometry::{minkowski_dot, ETA};
use crate::grid::{derivative_unchecked, Lattice, SpacetimeVectorField};

pub type Mat2 = [[f64; 2]; 2];

/// A point of the first jet bundle of the extended configuration bundle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JetPoint {
    pub x: [f64; 2],
    pub y: f64,
    /// `v_μ = ∂_μ φ`
    pub v: [f64; 2],
    pub u: [f64; 2],
    /// `du[a][μ] = ∂_μ η^a`
    pub du: Mat2,
}

impl JetPoint {
    pub fn new(x: [f64; 2], y: f64, v: [f64; 2], u: [f64; 2], du: Mat2) -> Result<Self> {
        let j = Self { x, y, v, u, du };
        j.check()?;
        Ok(j)
    }

    /// Identity covariance field at the origin.
    pub fn identity(y: f64, v: [f64; 2]) -> Self {
        Self { x: [0.0; 2], y, v, u: [0.0; 2], du: [[1.0, 0.0], [0.0, 1.0]] }
    }

    fn check(&self) -> Result<()> {
        let det = det2(&self.du);
        if !(det > 0.0) {
            return Err(Error::OrientationReversed { det });
        }
        Ok(())
    }

    /// Pulled-back metric `G_μν`.
    pub fn metric(&self) -> Mat2 {
        let mut g = [[0.0; 2]; 2];
        for (mu, row) in g.iter_mut().enumerate() {
            for (nu, entry) in row.iter_mut().enumerate() {
                *entry = (0..2).map(|a| ETA[a] * self.du[a][mu] * self.du[a][nu]).sum();
            }
        }
        g
    }
}

/// Covariant Hamiltonian, multimomenta and the Piola-Kirchhoff tensor density.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MultiMomenta {
    pub p_tilde: f64,
    /// `p^μ`
    pub p: [f64; 2],
    /// `rho[a][μ] = ϱ_a^μ`
    pub rho: Mat2,
    /// `piola[μ][ν] = 𝒯^μν`
    pub piola: Mat2,
}

fn det2(m: &Mat2) -> f64 {
    m[0][0] * m[1][1] - m[0][1] * m[1][0]
}

fn inverse(g: &Mat2) -> Result<Mat2> {
    let d = det2(g);
    if d == 0.0 || !d.is_finite() {
        return Err(Error::DegenerateMetric { det: d });
    }
    Ok([[g[1][1] / d, -g[0][1] / d], [-g[1][0] / d, g[0][0] / d]])
}

/// Metric pieces shared by the Lagrangian and its Legendre transform.
struct MetricData {
    g: Mat2,
    ginv: Mat2,
    vol: f64,
}

fn metric_data(j: &JetPoint) -> Result<MetricData> {
    j.check()?;
    let g = j.metric();
    let det = det2(&g);
    if !(det < 0.0) {
        return Err(Error::DegenerateMetric { det });
    }
    Ok(MetricData { ginv: inverse(&g)?, vol: (-det).sqrt(), g })
}

fn lagrangian_from(md: &MetricData, v: [f64; 2], y: f64, mass: f64) -> f64 {
    let mut vv = 0.0;
    for mu in 0..2 {
        for nu in 0..2 {
            vv += md.ginv[mu][nu] * v[mu] * v[nu];
        }
    }
    -0.5 * md.vol * (vv + mass * mass * y * y)
}

/// `(L, G)` at a jet point.
pub fn scalar_lagrangian(j: &JetPoint, mass: f64) -> Result<(f64, Mat2)> {
    let md = metric_data(j)?;
    Ok((lagrangian_from(&md, j.v, j.y, mass), md.g))
}

pub fn legendre(j: &JetPoint, mass: f64) -> Result<MultiMomenta> {
    let md = metric_data(j)?;
    let l = lagrangian_from(&md, j.v, j.y, mass);
    let v_up = [
        md.ginv[0][0] * j.v[0] + md.ginv[0][1] * j.v[1],
        md.ginv[1][0] * j.v[0] + md.ginv[1][1] * j.v[1],
    ];
    let v2 = v_up[0] * j.v[0] + v_up[1] * j.v[1];
    let x2 = v2 + mass * mass * j.y * j.y;
    let p = [-md.vol * v_up[0], -md.vol * v_up[1]];
    let mut piola = [[0.0; 2]; 2];
    for mu in 0..2 {
        for nu in 0..2 {
            piola[mu][nu] = md.vol * (v_up[mu] * v_up[nu] - 0.5 * md.ginv[mu][nu] * x2);
        }
    }
    let mut rho = [[0.0; 2]; 2];
    for a in 0..2 {
        for mu in 0..2 {
            rho[a][mu] = ETA[a] * (0..2).map(|nu| piola[mu][nu] * j.du[a][nu]).sum::<f64>();
        }
    }
    let p_tilde = covariant_hamiltonian(l, &p, &rho, j);
    Ok(MultiMomenta { p_tilde, p, rho, piola })
}

fn covariant_hamiltonian(l: f64, p: &[f64; 2], rho: &Mat2, j: &JetPoint) -> f64 {
    let mut h = l - p[0] * j.v[0] - p[1] * j.v[1];
    for a in 0..2 {
        for mu in 0..2 {
            h -= rho[a][mu] * j.du[a][mu];
        }
    }
    h
}

/// The pairing `⟨𝒥̃, ξ⟩` at a jet point: the `dⁿx_μ` coefficients and the
/// two 2-form coefficient blocks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentumMapDensity {
    /// `p̃ ξ^μ` (the fiber component `ξ^A` vanishes for the scalar).
    pub density: [f64; 2],
    /// `field_block[μ][ν] = −p^μ ξ^ν`, coefficient of `dy ∧ d^{n−1}x_μν`.
    pub field_block: Mat2,
    /// `cov_block[a][μ][ν] = −ϱ_a^μ ξ^ν`, coefficient of `du^a ∧ d^{n−1}x_μν`.
    pub cov_block: [Mat2; 2],
}

pub fn momentum_map_density(j: &JetPoint, mm: &MultiMomenta, xi: &SpacetimeVectorField) -> Result<MomentumMapDensity> {
    j.check()?;
    let x = xi.eval(j.x[0], j.x[1])?;
    let mut out = MomentumMapDensity {
        density: [mm.p_tilde * x[0], mm.p_tilde * x[1]],
        field_block: [[0.0; 2]; 2],
        cov_block: [[[0.0; 2]; 2]; 2],
    };
    for mu in 0..2 {
        for nu in 0..2 {
            out.field_block[mu][nu] = -mm.p[mu] * x[nu];
            for a in 0..2 {
                out.cov_block[a][mu][nu] = -mm.rho[a][mu] * x[nu];
            }
        }
    }
    Ok(out)
}

/// Pullback of the momentum-map form to the slice `x⁰ = const` of the chart,
/// as the coefficient of `dx¹`, given the section's jet data.
fn slice_coefficient(j: &JetPoint, d: &MomentumMapDensity) -> f64 {
    // d^{0}x_{01} = +1, d^{0}x_{10} = −1 in 1+1; on the slice only v_1 and u^a_1 survive
    let mut c = d.density[0];
    c += (d.field_block[0][1] - d.field_block[1][0]) * j.v[1];
    for a in 0..2 {
        c += (d.cov_block[a][0][1] - d.cov_block[a][1][0]) * j.du[a][1];
    }
    c
}

/// Absolute difference between the slice integral of the pulled-back momentum
/// map and `−H(ξ)` from the canonical module.
///
/// At each site a chart adapted to the flow is used, with time direction
/// `ξ(τ(x_i))` and spatial direction `τ'(x_i)`, so that `ξ = ∂₀` in the chart.
/// The jet's time derivative `v₀` is solved from `Π = p⁰`; the section's `ϱ⁰`
/// row is the embedding momentum `P`.
pub fn slice_pullback_check(state: &PhasePoint, xi: &SpacetimeVectorField, mass: f64, lat: &Lattice) -> Result<f64> {
    state.validate(lat)?;
    let tangents = state.tau.tangents(lat);
    let dphi = derivative_unchecked(&state.phi, 0.0, lat);
    let chart_flow = SpacetimeVectorField::constant(1.0, 0.0);
    let mut total = 0.0;
    for i in 0..lat.n() {
        let (t, x) = state.tau.point(i);
        let xv = xi.eval(t, x)?;
        let tan = tangents[i];
        let du = [[xv[0], tan[0]], [xv[1], tan[1]]];
        let g = [[minkowski_dot(xv, xv), minkowski_dot(xv, tan)], [minkowski_dot(xv, tan), minkowski_dot(tan, tan)]];
        let det = det2(&g);
        if !(det < 0.0) {
            return Err(Error::DegenerateMetric { det });
        }
        let ginv = inverse(&g)?;
        let vol = (-det).sqrt();
        let v1 = dphi[i];
        let v0 = (-state.pi[i] / vol - ginv[0][1] * v1) / ginv[0][0];
        let j = JetPoint::new([0.0, x], state.phi[i], [v0, v1], [t, x], du)?;
        let mut mm = legendre(&j, mass)?;
        let (l, _) = scalar_lagrangian(&j, mass)?;
        mm.rho[0][0] = state.p[i][0];
        mm.rho[1][0] = state.p[i][1];
        mm.p_tilde = covariant_hamiltonian(l, &mm.p, &mm.rho, &j);
        let dens = momentum_map_density(&j, &mm, &chart_flow)?;
        total += slice_coefficient(&j, &dens);
    }
    let canonical = comomentum(state, xi, mass, lat)?.value;
    Ok((total * lat.spacing() + canonical).abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::canonical::{matter_covector, SmoothProfile};
    use crate::geometry::Embedding;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_jet(rng: &mut ChaCha8Rng) -> JetPoint {
        let mut r = |s: f64| s * (2.0 * rng.random::<f64>() - 1.0);
        JetPoint {
            x: [r(1.0), r(1.0)],
            y: r(1.0),
            v: [r(1.0), r(1.0)],
            u: [r(1.0), r(1.0)],
            du: [[1.0 + r(0.2), r(0.3)], [r(0.3), 1.0 + r(0.2)]],
        }
    }

    #[test]
    fn lagrangian_examples() {
        let (l, g) = scalar_lagrangian(&JetPoint::identity(0.0, [0.0; 2]), 0.0).unwrap();
        assert_eq!(l, 0.0);
        assert_eq!(g, [[-1.0, 0.0], [0.0, 1.0]]);
        let (l, _) = scalar_lagrangian(&JetPoint::identity(0.0, [1.0, 0.0]), 0.0).unwrap();
        assert!((l - 0.5).abs() < 1e-15);
        let j = JetPoint::new([0.0; 2], 1.0, [0.0; 2], [0.0; 2], [[2.0, 0.0], [0.0, 1.0]]).unwrap();
        let (l, g) = scalar_lagrangian(&j, 1.0).unwrap();
        assert_eq!(g, [[-4.0, 0.0], [0.0, 1.0]]);
        assert!((l + 1.0).abs() < 1e-15);
    }

    #[test]
    fn orientation_and_signature_are_checked() {
        let flipped = [[0.0, 1.0], [1.0, 0.0]];
        assert!(matches!(
            JetPoint::new([0.0; 2], 0.0, [0.0; 2], [0.0; 2], flipped),
            Err(Error::OrientationReversed { .. })
        ));
        // in 1+1, det G = −(det du)², so orientation alone guards the signature
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..50 {
            let j = random_jet(&mut rng);
            let g = j.metric();
            assert!((det2(&g) + det2(&j.du).powi(2)).abs() < 1e-14);
        }
        let singular = JetPoint { du: [[1.0, 1.0], [1.0, 1.0]], ..JetPoint::identity(0.0, [0.0; 2]) };
        assert!(scalar_lagrangian(&singular, 1.0).is_err());
    }

    #[test]
    fn legendre_examples() {
        let mm = legendre(&JetPoint::identity(0.0, [0.0; 2]), 1.0).unwrap();
        assert_eq!(mm.p_tilde, 0.0);
        assert!(mm.p.iter().chain(mm.rho.iter().flatten()).all(|v| *v == 0.0));
        let mm = legendre(&JetPoint::identity(0.0, [1.0, 0.0]), 0.0).unwrap();
        assert_eq!(mm.p, [1.0, 0.0]);
        assert!((mm.rho[0][0] + 0.5).abs() < 1e-15 && (mm.rho[1][1] - 0.5).abs() < 1e-15);
        assert!((mm.p_tilde + 0.5).abs() < 1e-15);
    }

    #[test]
    fn legendre_partials_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let h = 1e-6;
        for _ in 0..200 {
            let j = random_jet(&mut rng);
            let m = 0.8;
            let mm = legendre(&j, m).unwrap();
            let lag = |j: &JetPoint| scalar_lagrangian(j, m).unwrap().0;
            let close = |fd: f64, exact: f64| (fd - exact).abs() <= 1e-7 * (1.0 + exact.abs());
            for mu in 0..2 {
                let (mut a, mut b) = (j, j);
                a.v[mu] += h;
                b.v[mu] -= h;
                assert!(close((lag(&a) - lag(&b)) / (2.0 * h), mm.p[mu]));
                for k in 0..2 {
                    let (mut a, mut b) = (j, j);
                    a.du[k][mu] += h;
                    b.du[k][mu] -= h;
                    assert!(close((lag(&a) - lag(&b)) / (2.0 * h), mm.rho[k][mu]));
                }
            }
            assert!((mm.piola[0][1] - mm.piola[1][0]).abs() < 1e-14);
        }
    }

    #[test]
    fn momentum_map_density_examples() {
        let j = JetPoint::identity(0.0, [1.0, 0.0]);
        let mm = legendre(&j, 0.0).unwrap();
        let zero = momentum_map_density(&j, &mm, &SpacetimeVectorField::zero()).unwrap();
        assert_eq!(zero.density, [0.0, 0.0]);
        let d = momentum_map_density(&j, &mm, &SpacetimeVectorField::constant(1.0, 0.0)).unwrap();
        let (l, _) = scalar_lagrangian(&j, 0.0).unwrap();
        // p̃ = L − p⁰ v₀ − ϱ·du recomputed by hand
        let by_hand = l - 1.0 - (-0.5 + 0.5);
        assert!((d.density[0] - by_hand).abs() < 1e-15 && d.density[1] == 0.0);
        let vac = JetPoint::identity(0.0, [0.0; 2]);
        let dv = momentum_map_density(&vac, &legendre(&vac, 1.0).unwrap(), &SpacetimeVectorField::constant(0.3, 2.0))
            .unwrap();
        assert_eq!(dv.density, [0.0, 0.0]);
    }

    #[test]
    fn pullback_of_vacuum_and_wave() {
        let lat = Lattice::periodic(64).unwrap();
        let vac = PhasePoint::vacuum(Embedding::identity(&lat), &lat);
        let xi = SpacetimeVectorField::parse("1 + 0.1*sin(x)", "0.2*cos(x)", &lat).unwrap();
        assert!(slice_pullback_check(&vac, &xi, 1.0, &lat).unwrap() < 1e-15);
        let mut wave = vac.clone();
        wave.phi = lat.sample(f64::sin);
        let r = slice_pullback_check(&wave, &SpacetimeVectorField::constant(1.0, 0.0), 0.0, &lat).unwrap();
        assert!(r <= 1e-10, "{r}");
    }

    #[test]
    fn pullback_on_random_states() {
        let lat = Lattice::periodic(64).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let xi = SpacetimeVectorField::parse("1.2 + 0.2*cos(x - t)", "0.3*sin(x) + 0.1*t", &lat).unwrap();
        for _ in 0..20 {
            let mut s = SmoothProfile::random(&mut rng).state(&lat).unwrap();
            let r = slice_pullback_check(&s, &xi, 0.7, &lat).unwrap();
            assert!(r <= 1e-10, "{r}");
            // also on-shell
            let h = matter_covector(&s, 0.7, &lat).unwrap();
            s.p = h.iter().map(|v| [-v[0], -v[1]]).collect();
            assert!(slice_pullback_check(&s, &xi, 0.7, &lat).unwrap() <= 1e-10);
        }
    }
}
