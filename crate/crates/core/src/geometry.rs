//! Slice geometry of a spacelike embedding in 1+1 Minkowski space.
//!
//! Background metric is `η = diag(−1, +1)`. An embedding stores `τ⁰(x_i)` and
//! `τ¹(x_i)`; the spatial component winds once around the circle,
//! `τ¹(x + L) = τ¹(x) + L`, and derivatives account for the winding.

use crate::error::{Error, Result};
use crate::grid::{derivative_unchecked, Lattice, SpacetimeVectorField};

/// Minkowski metric `η = diag(−1, +1)`.
pub const ETA: [f64; 2] = [-1.0, 1.0];

#[inline]
pub fn minkowski_dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    -a[0] * b[0] + a[1] * b[1]
}

#[inline]
pub fn lower(v: [f64; 2]) -> [f64; 2] {
    [-v[0], v[1]]
}

/// A spacelike embedding of the lattice circle.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    pub tau0: Vec<f64>,
    pub tau1: Vec<f64>,
}

impl Embedding {
    pub fn new(tau0: Vec<f64>, tau1: Vec<f64>, lat: &Lattice) -> Result<Self> {
        lat.check_len(tau0.len())?;
        lat.check_len(tau1.len())?;
        let e = Self { tau0, tau1 };
        e.check_spacelike(lat)?;
        Ok(e)
    }

    /// The flat slice `τ = (0, x)`.
    pub fn identity(lat: &Lattice) -> Self {
        Self::flat(0.0, lat)
    }

    /// The flat slice `τ = (t, x)`.
    pub fn flat(t: f64, lat: &Lattice) -> Self {
        Self { tau0: vec![t; lat.n()], tau1: lat.sites() }
    }

    /// `τ'^μ` at every site.
    pub fn tangents(&self, lat: &Lattice) -> Vec<[f64; 2]> {
        let a = derivative_unchecked(&self.tau0, 0.0, lat);
        let c = derivative_unchecked(&self.tau1, lat.circumference(), lat);
        a.into_iter().zip(c).map(|(a, c)| [a, c]).collect()
    }

    pub fn check_spacelike(&self, lat: &Lattice) -> Result<()> {
        for (site, t) in self.tangents(lat).into_iter().enumerate() {
            let q11 = minkowski_dot(t, t);
            if !(q11 > 0.0) {
                return Err(Error::NotSpacelike { site, q11 });
            }
        }
        Ok(())
    }

    pub fn point(&self, i: usize) -> (f64, f64) {
        (self.tau0[i], self.tau1[i])
    }

    /// Two-column CSV (`tau0,tau1`); `tau1` is written unwrapped.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("tau0,tau1\n");
        for (a, b) in self.tau0.iter().zip(&self.tau1) {
            out.push_str(&format!("{a:?},{b:?}\n"));
        }
        out
    }

    pub fn from_csv(text: &str, lat: &Lattice) -> Result<Self> {
        let mut tau0 = Vec::new();
        let mut tau1 = Vec::new();
        for (k, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || (k == 0 && line.starts_with("tau0")) {
                continue;
            }
            let mut cols = line.split(',');
            let mut next = || -> Result<f64> {
                cols.next()
                    .and_then(|s| s.trim().parse().ok())
                    .ok_or_else(|| Error::InvalidParameter(format!("malformed embedding row {k}: `{line}`")))
            };
            tau0.push(next()?);
            tau1.push(next()?);
        }
        Self::new(tau0, tau1, lat)
    }
}

/// Induced metric and unit normal per site.
#[derive(Debug, Clone, PartialEq)]
pub struct SliceGeometry {
    pub tangent: Vec<[f64; 2]>,
    pub q11: Vec<f64>,
    pub sqrt_q: Vec<f64>,
    pub normal_up: Vec<[f64; 2]>,
    pub normal_down: Vec<[f64; 2]>,
}

impl SliceGeometry {
    pub fn len(&self) -> usize {
        self.q11.len()
    }

    pub fn is_empty(&self) -> bool {
        self.q11.is_empty()
    }

    /// Lapse and shift of a single spacetime vector at site `i`.
    #[inline]
    pub fn split(&self, i: usize, v: [f64; 2]) -> (f64, f64) {
        let lapse = -minkowski_dot(v, self.normal_up[i]);
        let shift = minkowski_dot(v, self.tangent[i]) / self.q11[i];
        (lapse, shift)
    }
}

pub fn slice_geometry(tau: &Embedding, lat: &Lattice) -> Result<SliceGeometry> {
    lat.check_len(tau.tau0.len())?;
    lat.check_len(tau.tau1.len())?;
    let tangent = tau.tangents(lat);
    let n = tangent.len();
    let mut geo = SliceGeometry {
        q11: Vec::with_capacity(n),
        sqrt_q: Vec::with_capacity(n),
        normal_up: Vec::with_capacity(n),
        normal_down: Vec::with_capacity(n),
        tangent: Vec::new(),
    };
    for (site, &[a, c]) in tangent.iter().enumerate() {
        let q = c * c - a * a;
        if !(q > 0.0) {
            return Err(Error::NotSpacelike { site, q11: q });
        }
        let s = q.sqrt();
        let up = [c / s, a / s];
        geo.q11.push(q);
        geo.sqrt_q.push(s);
        geo.normal_up.push(up);
        geo.normal_down.push(lower(up));
    }
    geo.tangent = tangent;
    Ok(geo)
}

/// Evaluates `ξ^μ(τ(x_i))` at every site.
pub fn field_on_slice(xi: &SpacetimeVectorField, tau: &Embedding) -> Result<Vec<[f64; 2]>> {
    tau.tau0.iter().zip(&tau.tau1).map(|(&t, &x)| xi.eval(t, x)).collect()
}

/// Solves `ξ(τ(x_i)) = N n + N¹ τ'` per site.
pub fn decompose_lapse_shift(
    xi: &SpacetimeVectorField,
    tau: &Embedding,
    lat: &Lattice,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let geo = slice_geometry(tau, lat)?;
    let values = field_on_slice(xi, tau)?;
    Ok(decompose_vectors(&values, &geo))
}

/// Lapse/shift split of arbitrary per-site vectors.
pub fn decompose_vectors(values: &[[f64; 2]], geo: &SliceGeometry) -> (Vec<f64>, Vec<f64>) {
    values.iter().enumerate().map(|(i, &v)| geo.split(i, v)).unzip()
}

/// Pushforward `τ_* ζ`, i.e. `ξ^μ(τ(x_i)) = τ'^μ(x_i) ζ(x_i)`.
pub fn pushforward_spatial(zeta: &[f64], tau: &Embedding, lat: &Lattice) -> Result<Vec<[f64; 2]>> {
    lat.check_len(zeta.len())?;
    lat.check_len(tau.tau0.len())?;
    Ok(tau
        .tangents(lat)
        .into_iter()
        .zip(zeta)
        .map(|([a, c], &z)| [a * z, c * z])
        .collect())
}

/// `T_i = 1 / |ξ(τ(x_i))|` with the Euclidean norm of the coordinate components.
pub fn local_temperature(xi: &SpacetimeVectorField, tau: &Embedding, lat: &Lattice) -> Result<Vec<f64>> {
    lat.check_len(tau.tau0.len())?;
    field_on_slice(xi, tau)?
        .into_iter()
        .enumerate()
        .map(|(site, [a, b])| {
            let norm = a.hypot(b);
            if norm == 0.0 {
                Err(Error::VanishingField { site })
            } else {
                Ok(1.0 / norm)
            }
        })
        .collect()
}
