use std::f64::consts::TAU;
use std::hash::{Hash, Hasher};

use rand::Rng;

use crate::error::{Error, Result};
use crate::geometry::Embedding;
use crate::grid::Lattice;

/// A point `(φ, Π, τ, P)` of the parametrized canonical phase space.
#[derive(Debug, Clone, PartialEq)]
pub struct PhasePoint {
    pub phi: Vec<f64>,
    pub pi: Vec<f64>,
    pub tau: Embedding,
    pub p: Vec<[f64; 2]>,
}

impl PhasePoint {
    pub fn new(phi: Vec<f64>, pi: Vec<f64>, tau: Embedding, p: Vec<[f64; 2]>, lat: &Lattice) -> Result<Self> {
        let s = Self { phi, pi, tau, p };
        s.validate(lat)?;
        Ok(s)
    }

    /// Vacuum matter with vanishing embedding momenta on the slice `tau`.
    pub fn vacuum(tau: Embedding, lat: &Lattice) -> Self {
        let n = lat.n();
        Self { phi: vec![0.0; n], pi: vec![0.0; n], tau, p: vec![[0.0; 2]; n] }
    }

    pub fn validate(&self, lat: &Lattice) -> Result<()> {
        for len in [self.phi.len(), self.pi.len(), self.tau.tau0.len(), self.tau.tau1.len(), self.p.len()] {
            lat.check_len(len)?;
        }
        let finite = self
            .phi
            .iter()
            .chain(&self.pi)
            .chain(&self.tau.tau0)
            .chain(&self.tau.tau1)
            .chain(self.p.iter().flatten())
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::NonFinite { context: "phase point".into() });
        }
        self.tau.check_spacelike(lat)
    }

    pub fn n(&self) -> usize {
        self.phi.len()
    }

    /// Bitwise identity of the state, used to tie gradients to the point they were taken at.
    pub fn fingerprint(&self) -> u64 {
        let mut h = std::collections::hash_map::DefaultHasher::new();
        for v in self
            .phi
            .iter()
            .chain(&self.pi)
            .chain(&self.tau.tau0)
            .chain(&self.tau.tau1)
            .chain(self.p.iter().flatten())
        {
            v.to_bits().hash(&mut h);
        }
        h.finish()
    }

    /// Flattens into `[φ.., Π.., τ⁰.., τ¹.., P₀.., P₁..]`.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(6 * self.n());
        v.extend(&self.phi);
        v.extend(&self.pi);
        v.extend(&self.tau.tau0);
        v.extend(&self.tau.tau1);
        v.extend(self.p.iter().map(|p| p[0]));
        v.extend(self.p.iter().map(|p| p[1]));
        v
    }

    pub fn from_slice(v: &[f64], n: usize) -> Self {
        assert_eq!(v.len(), 6 * n, "flattened phase point has wrong length");
        let chunk = |k: usize| v[k * n..(k + 1) * n].to_vec();
        Self {
            phi: chunk(0),
            pi: chunk(1),
            tau: Embedding { tau0: chunk(2), tau1: chunk(3) },
            p: (0..n).map(|i| [v[4 * n + i], v[5 * n + i]]).collect(),
        }
    }
}

/// A finite Fourier series on the circle, `c₀ + Σ_k (a_k cos kx + b_k sin kx)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Fourier {
    pub constant: f64,
    pub cos: Vec<f64>,
    pub sin: Vec<f64>,
}

impl Fourier {
    pub fn zero() -> Self {
        Self { constant: 0.0, cos: Vec::new(), sin: Vec::new() }
    }

    pub fn random<R: Rng + ?Sized>(rng: &mut R, modes: usize, amplitude: f64, with_constant: bool) -> Self {
        let mut draw = || amplitude * (2.0 * rng.random::<f64>() - 1.0);
        let constant = if with_constant { draw() } else { 0.0 };
        let cos = (0..modes).map(|_| draw()).collect();
        let sin = (0..modes).map(|_| draw()).collect();
        Self { constant, cos, sin }
    }

    /// Evaluates at `x` for a circle of circumference `l`.
    pub fn eval(&self, x: f64, l: f64) -> f64 {
        let w = TAU / l;
        let mut v = self.constant;
        for (k, (a, b)) in self.cos.iter().zip(&self.sin).enumerate() {
            let arg = (k + 1) as f64 * w * x;
            v += a * arg.cos() + b * arg.sin();
        }
        v
    }

    /// Upper bound on `|f'|` (circumference 2π units scaled by `l`).
    pub fn slope_bound(&self, l: f64) -> f64 {
        let w = TAU / l;
        self.cos
            .iter()
            .zip(&self.sin)
            .enumerate()
            .map(|(k, (a, b))| (k + 1) as f64 * w * (a.abs() + b.abs()))
            .sum()
    }

    pub fn sample(&self, lat: &Lattice) -> Vec<f64> {
        let l = lat.circumference();
        lat.sample(|x| self.eval(x, l))
    }
}

/// Resolution-independent smooth state: the same continuum profile can be
/// sampled on a sequence of refined lattices.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothProfile {
    pub phi: Fourier,
    pub pi: Fourier,
    pub tau0: Fourier,
    /// `τ¹(x) = x + tau1_offset(x)`.
    pub tau1_offset: Fourier,
    pub p0: Fourier,
    pub p1: Fourier,
}

impl SmoothProfile {
    /// Random low-mode profile with a comfortably spacelike embedding.
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let mut tau0 = Fourier::random(rng, 2, 0.08, true);
        let mut tau1_offset = Fourier::random(rng, 2, 0.06, true);
        // keep |τ⁰'| ≤ 0.3 and τ¹' ≥ 0.7 in the continuum (L = 2π)
        let s0 = tau0.slope_bound(TAU);
        if s0 > 0.3 {
            scale(&mut tau0, 0.3 / s0);
        }
        let s1 = tau1_offset.slope_bound(TAU);
        if s1 > 0.3 {
            scale(&mut tau1_offset, 0.3 / s1);
        }
        Self {
            phi: Fourier::random(rng, 3, 0.4, true),
            pi: Fourier::random(rng, 3, 0.4, true),
            tau0,
            tau1_offset,
            p0: Fourier::random(rng, 2, 0.5, true),
            p1: Fourier::random(rng, 2, 0.5, true),
        }
    }

    pub fn state(&self, lat: &Lattice) -> Result<PhasePoint> {
        let l = lat.circumference();
        let p0 = self.p0.sample(lat);
        let p1 = self.p1.sample(lat);
        let tau = Embedding::new(self.tau0.sample(lat), lat.sample(|x| x + self.tau1_offset.eval(x, l)), lat)?;
        PhasePoint::new(
            self.phi.sample(lat),
            self.pi.sample(lat),
            tau,
            p0.into_iter().zip(p1).map(|(a, b)| [a, b]).collect(),
            lat,
        )
    }
}

fn scale(f: &mut Fourier, k: f64) {
    f.constant *= k;
    f.cos.iter_mut().for_each(|v| *v *= k);
    f.sin.iter_mut().for_each(|v| *v *= k);
}
