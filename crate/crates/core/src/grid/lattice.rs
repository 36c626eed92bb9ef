use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Periodic one-dimensional lattice on a circle of given circumference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lattice {
    n: usize,
    circumference: f64,
}

impl Lattice {
    pub fn new(n: usize, circumference: f64) -> Result<Self> {
        if n < 4 || n % 2 != 0 {
            return Err(Error::InvalidLattice(format!(
                "site count must be even and at least 4, got {n}"
            )));
        }
        if !(circumference.is_finite() && circumference > 0.0) {
            return Err(Error::InvalidLattice(format!(
                "circumference must be positive, got {circumference}"
            )));
        }
        Ok(Self { n, circumference })
    }

    /// Lattice on the circle of circumference 2π.
    pub fn periodic(n: usize) -> Result<Self> {
        Self::new(n, std::f64::consts::TAU)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn circumference(&self) -> f64 {
        self.circumference
    }

    pub fn spacing(&self) -> f64 {
        self.circumference / self.n as f64
    }

    pub fn site(&self, i: usize) -> f64 {
        i as f64 * self.spacing()
    }

    pub fn sites(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.site(i)).collect()
    }

    #[inline]
    pub fn next(&self, i: usize) -> usize {
        if i + 1 == self.n {
            0
        } else {
            i + 1
        }
    }

    #[inline]
    pub fn prev(&self, i: usize) -> usize {
        if i == 0 {
            self.n - 1
        } else {
            i - 1
        }
    }

    pub fn check_len(&self, len: usize) -> Result<()> {
        if len != self.n {
            return Err(Error::LengthMismatch { expected: self.n, got: len });
        }
        Ok(())
    }

    /// Samples `f` at every site.
    pub fn sample(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        (0..self.n).map(|i| f(self.site(i))).collect()
    }
}

/// Second-order central difference `(f[i+1] - f[i-1]) / (2 dx)` with periodic indices.
///
/// A sequence that is not itself periodic (a linear ramp, say) picks up the
/// jump at the wrap pair; use [`central_derivative_wound`] for data with a
/// known winding.
pub fn central_derivative(f: &[f64], lat: &Lattice) -> Result<Vec<f64>> {
    central_derivative_wound(f, 0.0, lat)
}

/// Central difference for data obeying `f(x + L) = f(x) + winding`.
pub fn central_derivative_wound(f: &[f64], winding: f64, lat: &Lattice) -> Result<Vec<f64>> {
    lat.check_len(f.len())?;
    Ok(derivative_unchecked(f, winding, lat))
}

pub(crate) fn derivative_unchecked(f: &[f64], winding: f64, lat: &Lattice) -> Vec<f64> {
    let n = lat.n();
    let inv = 1.0 / (2.0 * lat.spacing());
    (0..n)
        .map(|i| {
            let mut up = f[lat.next(i)];
            let mut down = f[lat.prev(i)];
            if i + 1 == n {
                up += winding;
            }
            if i == 0 {
                down -= winding;
            }
            (up - down) * inv
        })
        .collect()
}

/// Transpose of the central stencil applied to `g`; equals `-D g` on a periodic grid.
pub(crate) fn derivative_transpose(g: &[f64], lat: &Lattice) -> Vec<f64> {
    derivative_unchecked(g, 0.0, lat).into_iter().map(|v| -v).collect()
}

/// Rectangle rule `Σ f_i dx`, which coincides with the trapezoid rule on a periodic grid.
pub fn quadrature(f: &[f64], lat: &Lattice) -> Result<f64> {
    lat.check_len(f.len())?;
    Ok(f.iter().sum::<f64>() * lat.spacing())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn rejects_odd_or_tiny_lattices() {
        assert!(Lattice::periodic(3).is_err());
        assert!(Lattice::periodic(2).is_err());
        assert!(Lattice::periodic(7).is_err());
        assert!(Lattice::new(8, 0.0).is_err());
        assert!(Lattice::periodic(4).is_ok());
    }

    #[test]
    fn derivative_of_constant_vanishes() {
        let lat = Lattice::periodic(16).unwrap();
        let d = central_derivative(&[3.5; 16], &lat).unwrap();
        assert!(d.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn ramp_has_unit_slope_except_at_the_wrap() {
        let lat = Lattice::periodic(16).unwrap();
        let d = central_derivative(&lat.sites(), &lat).unwrap();
        for (i, v) in d.iter().enumerate() {
            if i == 0 || i == 15 {
                // jump of -L across the identification
                let expected = 1.0 - lat.circumference() / (2.0 * lat.spacing());
                assert!((v - expected).abs() < 1e-12, "site {i}: {v}");
            } else {
                assert!((v - 1.0).abs() < 1e-12, "site {i}: {v}");
            }
        }
        let wound = central_derivative_wound(&lat.sites(), lat.circumference(), &lat).unwrap();
        assert!(wound.iter().all(|v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn sine_stencil_matches_closed_form() {
        let lat = Lattice::periodic(64).unwrap();
        let dx = lat.spacing();
        let f = lat.sample(f64::sin);
        let d = central_derivative(&f, &lat).unwrap();
        for (i, v) in d.iter().enumerate() {
            let expected = lat.site(i).cos() * dx.sin() / dx;
            assert!((v - expected).abs() < 1e-14);
        }
    }

    #[test]
    fn length_mismatch_is_reported() {
        let lat = Lattice::periodic(8).unwrap();
        assert_eq!(
            central_derivative(&[0.0; 7], &lat),
            Err(Error::LengthMismatch { expected: 8, got: 7 })
        );
        assert!(quadrature(&[0.0; 9], &lat).is_err());
    }

    #[test]
    fn quadrature_examples() {
        let lat = Lattice::periodic(64).unwrap();
        assert!((quadrature(&[1.0; 64], &lat).unwrap() - 2.0 * PI).abs() < 1e-13);
        assert!(quadrature(&lat.sample(f64::sin), &lat).unwrap().abs() < 1e-14);
        let c2 = lat.sample(|x| x.cos().powi(2));
        assert!((quadrature(&c2, &lat).unwrap() - PI).abs() < 1e-13);
    }

    #[test]
    fn pure_modes_integrate_to_zero() {
        let lat = Lattice::periodic(32).unwrap();
        for k in 1..16 {
            let c = quadrature(&lat.sample(|x| (k as f64 * x).cos()), &lat).unwrap();
            let s = quadrature(&lat.sample(|x| (k as f64 * x).sin()), &lat).unwrap();
            assert!(c.abs() < 1e-13 && s.abs() < 1e-13, "k = {k}: {c} {s}");
        }
    }

    #[test]
    fn transpose_is_minus_derivative() {
        let lat = Lattice::periodic(8).unwrap();
        let f: Vec<f64> = (0..8).map(|i| (i * i) as f64).collect();
        let g: Vec<f64> = (0..8).map(|i| (3 * i % 5) as f64).collect();
        let df = central_derivative(&f, &lat).unwrap();
        let dtg = derivative_transpose(&g, &lat);
        let lhs: f64 = g.iter().zip(&df).map(|(a, b)| a * b).sum();
        let rhs: f64 = f.iter().zip(&dtg).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-12);
    }
}
