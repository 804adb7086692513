//! Generalized resolvents `R_f(λ)` from the boundary-value characterization.
//!
//! `y = R_f(λ) x` solves `A* y − λ y = x` together with
//! `Γ1 y + f(λ) Γ0 y = 0` (or `Γ0 y = 0` for `f = ∞`). Writing
//! `y = y_p + c·u_λ` with a particular solution `y_p` and the deficiency
//! solution `u_λ` gives `c = −(Γ1 y_p + f Γ0 y_p)/χ_f(λ)`.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::herglotz::{FValue, HerglotzData};
use crate::models::{char_from_parts, weak_ode_residual, BoundaryFunction, TripletSystem};

#[derive(Debug, Clone)]
pub struct ResolventOutput {
    pub y: BoundaryFunction,
    /// Coefficient of the deficiency solution.
    pub c: Complex64,
    pub residual_ode: f64,
    pub residual_bc: f64,
}

pub const CSV_HEADER: &str = "lambda_re,lambda_im,residual_ode,residual_bc,c_re,c_im";

impl ResolventOutput {
    pub fn csv_row(&self, lambda: Complex64) -> String {
        format!(
            "{},{},{:e},{:e},{},{}",
            lambda.re, lambda.im, self.residual_ode, self.residual_bc, self.c.re, self.c.im
        )
    }
}

pub fn generalized_resolvent(
    model: &dyn TripletSystem,
    fd: &HerglotzData,
    lambda: Complex64,
    x: &dyn Fn(f64) -> Complex64,
) -> Result<ResolventOutput> {
    let fvalue = fd.eval(lambda)?;
    resolvent_for_value(model, fvalue, lambda, x)
}

/// Resolvent for an explicitly given value `f(λ)`; `f = ∞` takes its own path.
pub fn resolvent_for_value(
    model: &dyn TripletSystem,
    fvalue: FValue,
    lambda: Complex64,
    x: &dyn Fn(f64) -> Complex64,
) -> Result<ResolventOutput> {
    let u = model.deficiency_solution(lambda)?;
    let yp = model.particular_solution(lambda, x)?;
    let (g0u, g1u) = (model.gamma0(&u), model.gamma1(&u));
    let chi = char_from_parts(model, &u, fvalue);
    let scale = match fvalue {
        FValue::Infinity => g0u.norm().max(g1u.norm()),
        FValue::Finite(f) => g1u.norm().max(f.norm() * g0u.norm()),
    };
    if chi.norm() < 1e-12 * scale || chi.norm() == 0.0 {
        return Err(Error::CharacteristicZero { lambda });
    }
    let bc = |y: &BoundaryFunction| match fvalue {
        FValue::Infinity => model.gamma0(y),
        FValue::Finite(f) => model.gamma1(y) + f * model.gamma0(y),
    };
    let c = -bc(&yp) / chi;
    let y = yp.add_scaled(c, &u)?;
    let residual_bc = bc(&y).norm();
    let residual_ode = weak_ode_residual(model, &y, lambda, x);
    Ok(ResolventOutput { y, c, residual_ode, residual_bc })
}

fn samples(model: &dyn TripletSystem, g: &dyn Fn(f64) -> Complex64) -> Vec<Complex64> {
    model.nodes().iter().map(|&s| g(s)).collect()
}

/// `|⟨R_f(λ)x, y⟩ − ⟨x, R_f(λ̄)y⟩|`.
pub fn resolvent_symmetry_residual(
    model: &dyn TripletSystem,
    fd: &HerglotzData,
    lambda: Complex64,
    x: &dyn Fn(f64) -> Complex64,
    y_test: &dyn Fn(f64) -> Complex64,
) -> Result<f64> {
    let rx = generalized_resolvent(model, fd, lambda, x)?;
    let ry = generalized_resolvent(model, fd, lambda.conj(), y_test)?;
    let (xs, ys) = (samples(model, x), samples(model, y_test));
    let lhs = model.inner_values(rx.y.values(), &ys);
    let rhs = model.inner_values(&xs, ry.y.values());
    Ok((lhs - rhs).norm())
}

/// `max(0, −min_λ Im⟨R_f(λ)x, x⟩)` over a grid in the upper half-plane.
pub fn compression_herglotz_check(
    model: &dyn TripletSystem,
    fd: &HerglotzData,
    grid: &[Complex64],
    x: &dyn Fn(f64) -> Complex64,
) -> Result<f64> {
    let xs = samples(model, x);
    let mut min_im = f64::INFINITY;
    for &lambda in grid {
        if lambda.im <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "grid point {lambda} is not in the upper half-plane"
            )));
        }
        let r = generalized_resolvent(model, fd, lambda, x)?;
        min_im = min_im.min(model.inner_values(r.y.values(), &xs).im);
    }
    Ok((-min_im).max(0.0))
}

/// `‖R(λ)x − R(μ)x − (λ − μ) R(λ) R(μ) x‖`. Vanishes (up to discretization)
/// only when `f` is a real constant or `∞`.
pub fn resolvent_identity_defect(
    model: &dyn TripletSystem,
    fd: &HerglotzData,
    lambda: Complex64,
    mu: Complex64,
    x: &dyn Fn(f64) -> Complex64,
) -> Result<f64> {
    let rl = generalized_resolvent(model, fd, lambda, x)?;
    let rm = generalized_resolvent(model, fd, mu, x)?;
    let inner_src = |s: f64| rm.y.interpolate(s);
    let rlm = generalized_resolvent(model, fd, lambda, &inner_src)?;
    let diff = rl
        .y
        .add_scaled(Complex64::new(-1.0, 0.0), &rm.y)?
        .add_scaled(-(lambda - mu), &rlm.y)?;
    Ok(model.norm(&diff))
}
