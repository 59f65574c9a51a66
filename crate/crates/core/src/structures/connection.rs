//! Koszul connection and Hessian structure in local form.

use crate::calculus::{directional_derivative, fd_directional_with_step, second_derivative, second_order_step, SmoothMap, Vector};
use crate::error::{check_dim, Result};

use super::{ChristoffelField, ScalarField, VectorField};

/// `(∇_X Y)(u) = DY(u)·X(u) − Γ(u)(X(u), Y(u))`.
pub fn covariant_derivative(
    gamma: &ChristoffelField,
    x: &VectorField,
    y: &VectorField,
    u: &Vector,
) -> Result<Vector> {
    check_dim("covariant derivative X", gamma.dim(), x.dim())?;
    check_dim("covariant derivative Y", gamma.dim(), y.dim())?;
    let xu = x.at(u)?;
    let yu = y.at(u)?;
    let dy_x = directional_derivative(y.map(), u, &xu)?;
    Ok(dy_x - gamma.apply(u, &xu, &yu)?)
}

/// `Hf(X, Y)(u) = D²f(u)(X, Y) + Df(u)·Γ(u)(X, Y)`.
pub fn hessian_apply(
    gamma: &ChristoffelField,
    f: &ScalarField,
    x: &VectorField,
    y: &VectorField,
    u: &Vector,
) -> Result<f64> {
    check_dim("Hessian scalar field", gamma.dim(), f.dim())?;
    let xu = x.at(u)?;
    let yu = y.at(u)?;
    let d2 = second_derivative(f.map(), u, &xu, &yu)?[0];
    let g = gamma.apply(u, &xu, &yu)?;
    Ok(d2 + f.differential(u, &g)?)
}

/// `Hf(X, Y)(u) = X(Y(f))(u) − (∇_X Y)(u) f`, by nested directional
/// differentiation. The outer derivative uses the relaxed fourth-root step
/// since its integrand is itself a derivative.
pub fn hessian_via_connection(
    gamma: &ChristoffelField,
    f: &ScalarField,
    x: &VectorField,
    y: &VectorField,
    u: &Vector,
) -> Result<f64> {
    check_dim("Hessian scalar field", gamma.dim(), f.dim())?;
    let n = gamma.dim();
    let (fm, ym) = (f.clone(), y.clone());
    let y_of_f = SmoothMap::try_new(n, 1, move |p| {
        Ok(Vector::from_element(1, fm.derivative_along(&ym, p)?))
    })
    .with_fd_scale(f.map().fd_scale());
    let h = y_of_f.fd_scale() * u.norm().max(1.0) * second_order_step();
    let x_of_y_of_f = fd_directional_with_step(&y_of_f, u, &x.at(u)?, h)?[0];
    let nabla = covariant_derivative(gamma, x, y, u)?;
    Ok(x_of_y_of_f - f.differential(u, &nabla)?)
}
