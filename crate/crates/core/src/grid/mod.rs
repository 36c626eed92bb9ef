//! Periodic lattice, quadrature, derivative stencils and analytic spacetime functions.

pub mod expr;
mod field;
mod lattice;

pub use expr::{parse_expr, BinOp, Dual, Expr, Func, Var};
pub use field::SpacetimeVectorField;
pub use lattice::{central_derivative, central_derivative_wound, quadrature, Lattice};

pub(crate) use lattice::{derivative_transpose, derivative_unchecked};

/// `(value, ∂_t, ∂_x)` of an expression at `(t, x)`.
pub fn eval_with_grad(e: &Expr, t: f64, x: f64) -> crate::Result<(f64, f64, f64)> {
    let d = e.eval_with_grad(t, x)?;
    Ok((d.value, d.dt, d.dx))
}
