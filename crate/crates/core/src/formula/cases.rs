//! Built-in `(phi, coefficients, X_0)` cases.

use crate::error::{invalid, Result};
use crate::scalar::Scalar;

use super::process::{Coefficient, CoefficientTriple};
use super::test_function::{Smoothness, TestFunction};
use super::ItoCase;

/// Names accepted by [`builtin_case`].
pub const CASE_NAMES: [&str; 9] = [
    "identity_state",
    "affine_state",
    "square_bm",
    "time_x_bm",
    "sin_exp_constant",
    "cubic_state",
    "quartic_bm",
    "cos_state",
    "decoupled_2d",
];

/// Cases whose residual vanishes identically (affine `phi`).
pub const AFFINE_CASES: [&str; 2] = ["identity_state", "affine_state"];

/// One-dimensional cases with a nonzero residual.
pub const CONVERGENCE_PANEL: [&str; 6] = [
    "square_bm",
    "time_x_bm",
    "sin_exp_constant",
    "cubic_state",
    "quartic_bm",
    "cos_state",
];

fn lit<T: Scalar>(x: f64) -> T {
    T::lit(x)
}

fn brownian<T: Scalar>() -> CoefficientTriple<T> {
    CoefficientTriple::constant(1, 1, &[T::zero()], &[T::zero()], &[T::one()]).expect("1-d")
}

fn state_coefficients<T: Scalar>() -> CoefficientTriple<T> {
    CoefficientTriple::zero(1, 1)
        .expect("1-d")
        .with_alpha(0, Coefficient::state(|t: T, x: &[T]| (t + x[0]).cos()))
        .with_eta(0, 0, 0, Coefficient::Constant(lit(0.4)))
        .with_beta(
            0,
            0,
            Coefficient::state(|_, x: &[T]| T::one() + lit::<T>(0.5) * x[0].sin()),
        )
}

fn sin_exp<T: Scalar>() -> TestFunction<T> {
    TestFunction::scalar(
        Smoothness::LipschitzDerivatives,
        |t: T, x: T| x.sin() * (-t).exp(),
        |t: T, x: T| -x.sin() * (-t).exp(),
        |t: T, x: T| x.cos() * (-t).exp(),
        |t: T, x: T| -x.sin() * (-t).exp(),
    )
}

fn square<T: Scalar>() -> TestFunction<T> {
    TestFunction::scalar(
        Smoothness::General,
        |_, x: T| x * x,
        |_, _| T::zero(),
        |_, x: T| lit::<T>(2.0) * x,
        |_, _| lit(2.0),
    )
}

/// Looks up a built-in case. All cases are driven by a one-dimensional
/// `B` except `decoupled_2d` (`n = d = 2`).
pub fn builtin_case<T: Scalar>(name: &str) -> Result<ItoCase<T>> {
    let (phi, coeffs, x0) = match name {
        "identity_state" => (
            TestFunction::identity(),
            state_coefficients(),
            vec![lit(0.3)],
        ),
        "affine_state" => (
            TestFunction::affine(T::one(), lit(2.0), &[lit(-3.0)])?,
            state_coefficients(),
            vec![lit(0.3)],
        ),
        "square_bm" => (square(), brownian(), vec![T::zero()]),
        "time_x_bm" => (
            TestFunction::scalar(
                Smoothness::General,
                |t: T, x: T| t * x,
                |_, x: T| x,
                |t: T, _| t,
                |_, _| T::zero(),
            ),
            brownian(),
            vec![T::zero()],
        ),
        "sin_exp_constant" => (
            sin_exp(),
            CoefficientTriple::constant(1, 1, &[lit(0.2)], &[lit(0.3)], &[lit(0.8)])?,
            vec![lit(0.1)],
        ),
        "cubic_state" => (
            TestFunction::scalar(
                Smoothness::General,
                |_, x: T| x * x * x,
                |_, _| T::zero(),
                |_, x: T| lit::<T>(3.0) * x * x,
                |_, x: T| lit::<T>(6.0) * x,
            ),
            CoefficientTriple::zero(1, 1)?
                .with_alpha(0, Coefficient::state(|_, x: &[T]| lit::<T>(-0.5) * x[0]))
                .with_eta(
                    0,
                    0,
                    0,
                    Coefficient::state(|_, x: &[T]| lit::<T>(0.1) * x[0].sin()),
                )
                .with_beta(
                    0,
                    0,
                    Coefficient::state(|_, x: &[T]| {
                        lit::<T>(0.5) + lit::<T>(0.5) / (T::one() + x[0] * x[0])
                    }),
                ),
            vec![lit(0.5)],
        ),
        "quartic_bm" => (
            TestFunction::scalar(
                Smoothness::General,
                |_, x: T| x.powi(4),
                |_, _| T::zero(),
                |_, x: T| lit::<T>(4.0) * x.powi(3),
                |_, x: T| lit::<T>(12.0) * x * x,
            ),
            brownian(),
            vec![T::zero()],
        ),
        "cos_state" => (
            TestFunction::scalar(
                Smoothness::BoundedUniformlyContinuous,
                |t: T, x: T| x.cos() * (T::one() + t),
                |_, x: T| x.cos(),
                |t: T, x: T| -x.sin() * (T::one() + t),
                |t: T, x: T| -x.cos() * (T::one() + t),
            ),
            CoefficientTriple::zero(1, 1)?
                .with_alpha(0, Coefficient::state(|_, x: &[T]| x[0].sin()))
                .with_eta(0, 0, 0, Coefficient::Constant(lit(0.5)))
                .with_beta(
                    0,
                    0,
                    Coefficient::state(|_, x: &[T]| T::one() + lit::<T>(0.5) * x[0].cos()),
                ),
            vec![T::zero()],
        ),
        "decoupled_2d" => (
            TestFunction::separable(&sin_exp(), &square())?,
            CoefficientTriple::zero(2, 2)?
                .with_alpha(0, Coefficient::state(|_, x: &[T]| -x[0]))
                .with_eta(0, 0, 0, Coefficient::Constant(lit(0.3)))
                .with_beta(
                    0,
                    0,
                    Coefficient::state(|_, x: &[T]| T::one() + lit::<T>(0.5) * x[0].sin()),
                )
                .with_alpha(1, Coefficient::Constant(lit(0.2)))
                .with_eta(
                    1,
                    1,
                    1,
                    Coefficient::state(|t: T, x: &[T]| (x[1] + t).cos()),
                )
                .with_beta(1, 1, Coefficient::Constant(lit(0.7))),
            vec![lit(0.1), lit(-0.2)],
        ),
        _ => return invalid(format!("unknown Itô case '{name}'")),
    };
    Ok(ItoCase {
        name: name.to_string(),
        phi,
        coeffs,
        x0,
    })
}
