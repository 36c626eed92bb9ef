//! Sampling targets over flat coordinate vectors.

use super::{regulator, EnsembleMode, GibbsSpec};
use crate::canonical::{comomentum, site_density, smeared_constraint, PhasePoint, Smearing};
use crate::error::{Error, Result};
use crate::geometry::{field_on_slice, Embedding};
use crate::grid::Lattice;

/// A contiguous block of coordinates with its own proposal scale.
#[derive(Debug, Clone)]
pub(crate) struct Sector {
    pub name: &'static str,
    pub start: usize,
    pub len: usize,
    /// Only pair moves `(+δ, −δ)` at sites `i` and `i + 2`.
    pub pinned: bool,
}

/// Frozen-geometry target: `log w = −Σ Δx β_i·(h_i + P_i)` with `β = Σ_k c_k b_k ξ_k(τ)`.
#[derive(Debug, Clone)]
pub(crate) struct MatterModel {
    n: usize,
    dx: f64,
    beta: Vec<[f64; 2]>,
    a: Vec<f64>,
    c: Vec<f64>,
    tau: Embedding,
    p: Vec<[f64; 2]>,
    mass: f64,
    lat: Lattice,
}

impl MatterModel {
    fn site_energy(&self, x: &[f64], j: usize) -> f64 {
        let n = self.n;
        let jp = if j + 1 == n { 0 } else { j + 1 };
        let jm = if j == 0 { n - 1 } else { j - 1 };
        let dphi = (x[jp] - x[jm]) / (2.0 * self.dx);
        let d = site_density(x[j], dphi, x[n + j], self.a[j], self.c[j], self.mass);
        let b = self.beta[j];
        b[0] * (d.h[0] + self.p[j][0]) + b[1] * (d.h[1] + self.p[j][1])
    }

    fn log_weight(&self, x: &[f64]) -> f64 {
        -self.dx * (0..self.n).map(|j| self.site_energy(x, j)).sum::<f64>()
    }

    fn affected(&self, idx: usize, out: &mut Vec<usize>) {
        let n = self.n;
        if idx < n {
            for k in [n - 1, 0, 1] {
                out.push((idx + k) % n);
            }
        } else {
            out.push(idx - n);
        }
    }

    fn delta(&self, x: &mut [f64], changes: &[(usize, f64)]) -> f64 {
        let mut sites = Vec::with_capacity(6);
        for &(idx, _) in changes {
            self.affected(idx, &mut sites);
        }
        sites.sort_unstable();
        sites.dedup();
        let before: f64 = sites.iter().map(|&j| self.site_energy(x, j)).sum();
        let old: Vec<f64> = changes.iter().map(|&(i, v)| std::mem::replace(&mut x[i], v)).collect();
        let after: f64 = sites.iter().map(|&j| self.site_energy(x, j)).sum();
        for (&(i, _), v) in changes.iter().zip(old) {
            x[i] = v;
        }
        -self.dx * (after - before)
    }

    fn state(&self, x: &[f64]) -> PhasePoint {
        PhasePoint { phi: x[..self.n].to_vec(), pi: x[self.n..].to_vec(), tau: self.tau.clone(), p: self.p.clone() }
    }

    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        let f = smeared_constraint(&self.state(x), &Smearing::Values(self.beta.clone()), self.mass, &self.lat)?;
        Ok(f.grad_phi.iter().chain(&f.grad_pi).map(|g| -self.dx * g).collect())
    }
}

/// Full phase-space target: `log w = Σ_k c_k log w_k` over regulated specs.
#[derive(Debug, Clone)]
pub(crate) struct FullModel {
    parts: Vec<(f64, GibbsSpec, Embedding)>,
    lat: Lattice,
}

impl FullModel {
    fn log_weight(&self, x: &[f64]) -> f64 {
        let s = PhasePoint::from_slice(x, self.lat.n());
        if s.validate(&self.lat).is_err() {
            return f64::NEG_INFINITY;
        }
        let mut acc = 0.0;
        for (c, spec, centre) in &self.parts {
            let EnsembleMode::Regulated { sigma_p, sigma_tau } = spec.mode else { unreachable!() };
            match comomentum(&s, &spec.xi, spec.mass, &self.lat) {
                Ok(h) => acc += c * (-spec.b * h.value - regulator(&s, centre, sigma_p, sigma_tau, &self.lat)),
                Err(_) => return f64::NEG_INFINITY,
            }
        }
        if acc.is_finite() {
            acc
        } else {
            f64::NEG_INFINITY
        }
    }

    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        let n = self.lat.n();
        let dx = self.lat.spacing();
        let s = PhasePoint::from_slice(x, n);
        let mut g = vec![0.0; 6 * n];
        for (c, spec, centre) in &self.parts {
            let EnsembleMode::Regulated { sigma_p, sigma_tau } = spec.mode else { unreachable!() };
            let h = comomentum(&s, &spec.xi, spec.mass, &self.lat)?;
            let k = -c * spec.b * dx;
            let rp = c * dx / (sigma_p * sigma_p);
            let rt = c * dx / (sigma_tau * sigma_tau);
            for i in 0..n {
                g[i] += k * h.grad_phi[i];
                g[n + i] += k * h.grad_pi[i];
                g[2 * n + i] += k * h.grad_tau[i][0] - rt * (s.tau.tau0[i] - centre.tau0[i]);
                g[3 * n + i] += k * h.grad_tau[i][1] - rt * (s.tau.tau1[i] - centre.tau1[i]);
                g[4 * n + i] += k * h.grad_p[i][0] - rp * s.p[i][0];
                g[5 * n + i] += k * h.grad_p[i][1] - rp * s.p[i][1];
            }
        }
        Ok(g)
    }
}

#[derive(Debug, Clone)]
pub(crate) enum Model {
    Matter(MatterModel),
    Full(FullModel),
}

impl Model {
    /// Target `Σ_k c_k log w_k`; all specs must share a mode, and in
    /// matter-sector mode also the frozen data, mass and pin.
    pub fn mixture(parts: &[(f64, &GibbsSpec)], lat: &Lattice) -> Result<Self> {
        let (_, first) = *parts.first().ok_or_else(|| Error::InvalidParameter("empty mixture".into()))?;
        for (_, s) in parts {
            s.check_normalizable(lat)?;
            if std::mem::discriminant(&s.mode) != std::mem::discriminant(&first.mode) {
                return Err(Error::InvalidParameter("specs do not share an ensemble mode".into()));
            }
            if s.pin_zero_mode != first.pin_zero_mode {
                return Err(Error::InvalidParameter("specs disagree on the zero-mode pin".into()));
            }
        }
        match first.mode {
            EnsembleMode::MatterSector => {
                let tau = first.reference_tau(lat)?;
                let p = first.reference_p(lat)?;
                let n = lat.n();
                let mut beta = vec![[0.0; 2]; n];
                for (c, s) in parts {
                    if s.mass != first.mass || s.reference_tau(lat)? != tau || s.reference_p(lat)? != p {
                        return Err(Error::InvalidParameter(
                            "matter-sector specs must share mass and frozen (tau, P)".into(),
                        ));
                    }
                    for (bj, v) in beta.iter_mut().zip(field_on_slice(&s.xi, &tau)?) {
                        bj[0] += c * s.b * v[0];
                        bj[1] += c * s.b * v[1];
                    }
                }
                let t = tau.tangents(lat);
                Ok(Model::Matter(MatterModel {
                    n,
                    dx: lat.spacing(),
                    beta,
                    a: t.iter().map(|v| v[0]).collect(),
                    c: t.iter().map(|v| v[1]).collect(),
                    tau,
                    p,
                    mass: first.mass,
                    lat: *lat,
                }))
            }
            EnsembleMode::Regulated { .. } => {
                let parts = parts
                    .iter()
                    .map(|(c, s)| Ok((*c, (*s).clone(), s.reference_tau(lat)?)))
                    .collect::<Result<Vec<_>>>()?;
                Ok(Model::Full(FullModel { parts, lat: *lat }))
            }
        }
    }

    pub fn sectors(&self, pin: bool) -> Vec<Sector> {
        let (n, names): (usize, &[&'static str]) = match self {
            Model::Matter(m) => (m.n, &["phi", "pi"]),
            Model::Full(f) => (f.lat.n(), &["phi", "pi", "tau0", "tau1", "p0", "p1"]),
        };
        names
            .iter()
            .enumerate()
            .map(|(k, &name)| Sector { name, start: k * n, len: n, pinned: pin && k == 0 })
            .collect()
    }

    pub fn initial(&self) -> Vec<f64> {
        match self {
            Model::Matter(m) => vec![0.0; 2 * m.n],
            Model::Full(f) => {
                let (_, _, centre) = &f.parts[0];
                PhasePoint::vacuum(centre.clone(), &f.lat).to_vec()
            }
        }
    }

    /// Rough per-sector scale from the size of the weight.
    pub fn initial_scales(&self) -> Vec<f64> {
        match self {
            Model::Matter(m) => {
                let bmax = m.beta.iter().map(|b| b[0].abs().max(b[1].abs())).fold(0.0, f64::max);
                vec![1.0 / (bmax * m.dx).sqrt(); 2]
            }
            Model::Full(f) => {
                let dx = f.lat.spacing();
                let (_, spec, _) = &f.parts[0];
                let EnsembleMode::Regulated { sigma_p, sigma_tau } = spec.mode else { unreachable!() };
                let matter = 1.0 / (spec.b * dx).sqrt();
                let tau = (sigma_tau / dx.sqrt()).min(0.1 * dx);
                vec![matter, matter, tau, tau, sigma_p / dx.sqrt(), sigma_p / dx.sqrt()]
            }
        }
    }

    pub fn log_weight(&self, x: &[f64]) -> f64 {
        match self {
            Model::Matter(m) => m.log_weight(x),
            Model::Full(f) => f.log_weight(x),
        }
    }

    /// `log w(x with changes) − log w(x)`; `x` is left unchanged.
    pub fn delta(&self, x: &mut [f64], current: f64, changes: &[(usize, f64)]) -> f64 {
        match self {
            Model::Matter(m) => m.delta(x, changes),
            Model::Full(f) => {
                let old: Vec<f64> = changes.iter().map(|&(i, v)| std::mem::replace(&mut x[i], v)).collect();
                let new = f.log_weight(x);
                for (&(i, _), v) in changes.iter().zip(old) {
                    x[i] = v;
                }
                new - current
            }
        }
    }

    /// Partial derivatives of `log w` in the flat coordinates.
    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        match self {
            Model::Matter(m) => m.gradient(x),
            Model::Full(f) => f.gradient(x),
        }
    }

    pub fn state(&self, x: &[f64]) -> PhasePoint {
        match self {
            Model::Matter(m) => m.state(x),
            Model::Full(f) => PhasePoint::from_slice(x, f.lat.n()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::log_weight;
    use crate::grid::SpacetimeVectorField;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_x(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
        (0..len).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    #[test]
    fn matter_model_reproduces_log_weight() {
        let lat = Lattice::periodic(12).unwrap();
        let tau = Embedding::new(lat.sample(|x| 0.1 * x.sin()), lat.sites(), &lat).unwrap();
        let p: Vec<[f64; 2]> = lat.sample(f64::cos).into_iter().map(|c| [0.2 * c, 0.1]).collect();
        let xi = SpacetimeVectorField::parse("1 + 0.1*cos(x)", "0.2*sin(t + x)", &lat).unwrap();
        let spec = GibbsSpec::matter(xi, 1.7, 0.8).with_frozen(tau, p);
        let model = Model::mixture(&[(1.0, &spec)], &lat).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut x = random_x(&mut rng, 24);
        let lw = model.log_weight(&x);
        let direct = log_weight(&model.state(&x), &spec, &lat).unwrap();
        assert!((lw - direct).abs() < 1e-12 * (1.0 + lw.abs()));

        let changes = [(3, 0.7), (5, -0.2), (17, 1.1)];
        let d = model.delta(&mut x, lw, &changes);
        let mut y = x.clone();
        for (i, v) in changes {
            y[i] = v;
        }
        assert!((d - (model.log_weight(&y) - lw)).abs() < 1e-12);
        assert_eq!(model.log_weight(&x), lw);
    }

    #[test]
    fn mixture_is_linear_in_weights() {
        let lat = Lattice::periodic(10).unwrap();
        let a = GibbsSpec::matter(SpacetimeVectorField::constant(1.0, 0.0), 1.0, 1.0);
        let b = GibbsSpec::matter(SpacetimeVectorField::parse("1 + 0.1*cos(x)", "0.3", &lat).unwrap(), 1.5, 1.0);
        let mix = Model::mixture(&[(0.25, &a), (0.75, &b)], &lat).unwrap();
        let ma = Model::mixture(&[(1.0, &a)], &lat).unwrap();
        let mb = Model::mixture(&[(1.0, &b)], &lat).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = random_x(&mut rng, 20);
        let expected = 0.25 * ma.log_weight(&x) + 0.75 * mb.log_weight(&x);
        assert!((mix.log_weight(&x) - expected).abs() < 1e-12);
    }

    #[test]
    fn gradients_match_finite_differences() {
        let lat = Lattice::periodic(8).unwrap();
        let xi = SpacetimeVectorField::parse("1 + 0.1*cos(x - t)", "0.2", &lat).unwrap();
        let specs = [
            GibbsSpec::matter(xi.clone(), 1.3, 1.0),
            GibbsSpec::regulated(xi, 1.3, 1.0, 0.7, 0.3),
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for spec in &specs {
            let model = Model::mixture(&[(1.0, spec)], &lat).unwrap();
            let mut x = model.initial();
            for v in x.iter_mut() {
                *v += rng.random_range(-0.05..0.05);
            }
            let g = model.gradient(&x).unwrap();
            let eps = 1e-6;
            for k in 0..x.len() {
                let mut up = x.clone();
                let mut dn = x.clone();
                up[k] += eps;
                dn[k] -= eps;
                let fd = (model.log_weight(&up) - model.log_weight(&dn)) / (2.0 * eps);
                assert!((fd - g[k]).abs() < 1e-6 * (1.0 + fd.abs()), "k = {k}: {fd} vs {}", g[k]);
            }
        }
    }

    #[test]
    fn mixtures_must_agree_on_frozen_data() {
        let lat = Lattice::periodic(8).unwrap();
        let a = GibbsSpec::matter(SpacetimeVectorField::constant(1.0, 0.0), 1.0, 1.0);
        let b = GibbsSpec { mass: 2.0, ..a.clone() };
        assert!(Model::mixture(&[(0.5, &a), (0.5, &b)], &lat).is_err());
        let c = GibbsSpec::regulated(SpacetimeVectorField::constant(1.0, 0.0), 1.0, 1.0, 1.0, 1.0);
        assert!(Model::mixture(&[(0.5, &a), (0.5, &c)], &lat).is_err());
    }
}
