use super::expr::{add, mul, sub, Dual, Expr, Var};
use super::lattice::Lattice;
use crate::error::{Error, Result};

/// A spacetime vector field `ξ^μ(t, x)` given by two analytic components.
#[derive(Debug, Clone, PartialEq)]
pub struct SpacetimeVectorField {
    xi0: Expr,
    xi1: Expr,
}

/// Times at which spatial periodicity is sampled during validation.
const PERIODICITY_TIMES: [f64; 5] = [-2.0, -0.5, 0.0, 0.7, 2.0];

impl SpacetimeVectorField {
    /// Builds the field and checks `ξ(t, x + L) = ξ(t, x)` on the lattice sites.
    pub fn new(xi0: Expr, xi1: Expr, lat: &Lattice) -> Result<Self> {
        let field = Self { xi0, xi1 };
        field.check_periodic(lat)?;
        Ok(field)
    }

    pub fn parse(xi0: &str, xi1: &str, lat: &Lattice) -> Result<Self> {
        Self::new(Expr::parse(xi0)?, Expr::parse(xi1)?, lat)
    }

    /// Constant field `(c0, c1)`.
    pub fn constant(c0: f64, c1: f64) -> Self {
        Self { xi0: Expr::Const(c0), xi1: Expr::Const(c1) }
    }

    pub fn zero() -> Self {
        Self::constant(0.0, 0.0)
    }

    pub fn components(&self) -> [&Expr; 2] {
        [&self.xi0, &self.xi1]
    }

    fn check_periodic(&self, lat: &Lattice) -> Result<()> {
        let l = lat.circumference();
        for &t in &PERIODICITY_TIMES {
            for x in lat.sites() {
                for c in [&self.xi0, &self.xi1] {
                    let a = c.eval(t, x)?;
                    let b = c.eval(t, x + l)?;
                    let deviation = (a - b).abs();
                    if deviation > 1e-9 * (1.0 + a.abs()) {
                        return Err(Error::NotPeriodic { t, x, deviation });
                    }
                }
            }
        }
        Ok(())
    }

    /// Components with their partials at the spacetime point `(t, x)`.
    pub fn eval_with_grad(&self, t: f64, x: f64) -> Result<[Dual; 2]> {
        Ok([self.xi0.eval_with_grad(t, x)?, self.xi1.eval_with_grad(t, x)?])
    }

    pub fn eval(&self, t: f64, x: f64) -> Result<[f64; 2]> {
        Ok([self.xi0.eval(t, x)?, self.xi1.eval(t, x)?])
    }

    /// Multiplies both components by `k`.
    pub fn scaled(&self, k: f64) -> Self {
        Self { xi0: mul(Expr::Const(k), self.xi0.clone()), xi1: mul(Expr::Const(k), self.xi1.clone()) }
    }

    /// `α ξ + β ζ`.
    pub fn combine(&self, alpha: f64, other: &Self, beta: f64) -> Self {
        let a = self.scaled(alpha);
        let b = other.scaled(beta);
        Self { xi0: add(a.xi0, b.xi0), xi1: add(a.xi1, b.xi1) }
    }

    /// Vector-field commutator `[ξ, ζ]^μ = ξ^ν ∂_ν ζ^μ − ζ^ν ∂_ν ξ^μ`, built symbolically.
    pub fn commutator(&self, other: &Self) -> Self {
        let lie = |a: &Self, b: &Expr| {
            add(mul(a.xi0.clone(), b.derivative(Var::T)), mul(a.xi1.clone(), b.derivative(Var::X)))
        };
        Self {
            xi0: sub(lie(self, &other.xi0), lie(other, &self.xi0)),
            xi1: sub(lie(self, &other.xi1), lie(other, &self.xi1)),
        }
    }
}
