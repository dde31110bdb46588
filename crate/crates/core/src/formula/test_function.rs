//! Test functions `phi(t, x)` with user-supplied derivatives.

use std::fmt;
use std::sync::{Arc, OnceLock};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Error, Result};
use crate::scalar::Scalar;

/// Largest supported state dimension.
pub const MAX_STATE_DIM: usize = 2;

/// Regularity class a test function is declared in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Smoothness {
    /// Derivatives up to second order are bounded and Lipschitz.
    LipschitzDerivatives,
    /// Derivatives up to second order are bounded and uniformly continuous.
    BoundedUniformlyContinuous,
    /// `C^{1,2}` without growth restrictions.
    General,
}

type ValueFn<T> = Arc<dyn Fn(T, &[T]) -> T + Send + Sync>;
type PartialFn<T> = Arc<dyn Fn(T, &[T], usize) -> T + Send + Sync>;
type HessianFn<T> = Arc<dyn Fn(T, &[T], usize, usize) -> T + Send + Sync>;

const CHECK_PROBES: usize = 64;
const CHECK_SEED: u64 = 0x7465_7374_6669_6e64;

/// `phi(t, x)` on `[0, T] x R^n` together with `d_t phi`, `d_{x^nu} phi`
/// and `d^2_{x^mu x^nu} phi`.
#[derive(Clone)]
pub struct TestFunction<T> {
    n: usize,
    smoothness: Smoothness,
    phi: ValueFn<T>,
    dt: ValueFn<T>,
    dx: PartialFn<T>,
    dxx: HessianFn<T>,
    verified: Arc<OnceLock<std::result::Result<(), String>>>,
}

impl<T: fmt::Debug> fmt::Debug for TestFunction<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TestFunction")
            .field("n", &self.n)
            .field("smoothness", &self.smoothness)
            .finish()
    }
}

impl<T: Scalar> TestFunction<T> {
    pub fn new(
        n: usize,
        smoothness: Smoothness,
        phi: impl Fn(T, &[T]) -> T + Send + Sync + 'static,
        dt: impl Fn(T, &[T]) -> T + Send + Sync + 'static,
        dx: impl Fn(T, &[T], usize) -> T + Send + Sync + 'static,
        dxx: impl Fn(T, &[T], usize, usize) -> T + Send + Sync + 'static,
    ) -> Result<Self> {
        if n == 0 || n > MAX_STATE_DIM {
            return invalid(format!("state dimension must be 1 or 2, got {n}"));
        }
        Ok(Self {
            n,
            smoothness,
            phi: Arc::new(phi),
            dt: Arc::new(dt),
            dx: Arc::new(dx),
            dxx: Arc::new(dxx),
            verified: Arc::new(OnceLock::new()),
        })
    }

    /// One-dimensional test function from scalar closures of `(t, x)`.
    pub fn scalar(
        smoothness: Smoothness,
        phi: impl Fn(T, T) -> T + Send + Sync + 'static,
        dt: impl Fn(T, T) -> T + Send + Sync + 'static,
        dx: impl Fn(T, T) -> T + Send + Sync + 'static,
        dxx: impl Fn(T, T) -> T + Send + Sync + 'static,
    ) -> Self {
        Self::new(
            1,
            smoothness,
            move |t, x| phi(t, x[0]),
            move |t, x| dt(t, x[0]),
            move |t, x, _| dx(t, x[0]),
            move |t, x, _, _| dxx(t, x[0]),
        )
        .expect("dimension 1 is supported")
    }

    /// `phi(t, x1, x2) = f(t, x1) + g(t, x2)` from two one-dimensional functions.
    pub fn separable(f: &Self, g: &Self) -> Result<Self> {
        if f.n != 1 || g.n != 1 {
            return invalid("separable sum needs two one-dimensional functions");
        }
        let smoothness = if f.smoothness == g.smoothness {
            f.smoothness
        } else {
            Smoothness::General
        };
        let (f1, f2, f3, f4) = (f.clone(), f.clone(), f.clone(), f.clone());
        let (g1, g2, g3, g4) = (g.clone(), g.clone(), g.clone(), g.clone());
        Self::new(
            2,
            smoothness,
            move |t, x| f1.value(t, &x[..1]) + g1.value(t, &x[1..]),
            move |t, x| f2.time_derivative(t, &x[..1]) + g2.time_derivative(t, &x[1..]),
            move |t, x, nu| {
                if nu == 0 {
                    f3.gradient(t, &x[..1], 0)
                } else {
                    g3.gradient(t, &x[1..], 0)
                }
            },
            move |t, x, mu, nu| match (mu, nu) {
                (0, 0) => f4.hessian(t, &x[..1], 0, 0),
                (1, 1) => g4.hessian(t, &x[1..], 0, 0),
                _ => T::zero(),
            },
        )
    }

    /// `phi = x^1`.
    pub fn identity() -> Self {
        Self::affine(T::zero(), T::zero(), &[T::one()]).expect("one coordinate")
    }

    /// `phi = c + a t + b . x`.
    pub fn affine(c: T, a: T, b: &[T]) -> Result<Self> {
        let n = b.len();
        let coef: Vec<T> = b.to_vec();
        let grad = coef.clone();
        Self::new(
            n,
            Smoothness::LipschitzDerivatives,
            move |t, x| c + a * t + coef.iter().zip(x).fold(T::zero(), |s, (&b, &x)| s + b * x),
            move |_, _| a,
            move |_, _, nu| grad[nu],
            |_, _, _, _| T::zero(),
        )
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn smoothness(&self) -> Smoothness {
        self.smoothness
    }

    pub fn value(&self, t: T, x: &[T]) -> T {
        (self.phi)(t, x)
    }

    pub fn time_derivative(&self, t: T, x: &[T]) -> T {
        (self.dt)(t, x)
    }

    pub fn gradient(&self, t: T, x: &[T], nu: usize) -> T {
        (self.dx)(t, x, nu)
    }

    pub fn hessian(&self, t: T, x: &[T], mu: usize, nu: usize) -> T {
        (self.dxx)(t, x, mu, nu)
    }

    /// Compares the supplied derivatives with central finite differences at
    /// `probes` seeded points of `[0, 1] x [-2, 2]^n`.
    ///
    /// First derivatives are differenced from `phi`, second derivatives from
    /// the supplied gradient. The tolerance is `1e-5` relative to
    /// `max(1, |difference quotient|)`, widened to the step-size floor of
    /// the scalar type.
    pub fn check_derivatives(&self, probes: usize, seed: u64) -> Result<()> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = T::epsilon().cbrt();
        let two = T::lit(2.0);
        let tol = T::lit(1e-5).max(T::lit(10.0) * T::epsilon().powf(T::lit(2.0 / 3.0)));
        let fail = |what: String, got: T, want: T| {
            Err(Error::Validation(format!(
                "derivative check failed for {what}: supplied {got}, finite difference {want}"
            )))
        };
        for _ in 0..probes {
            let t = T::lit(rng.random_range(0.0..1.0));
            let x: Vec<T> = (0..self.n)
                .map(|_| T::lit(rng.random_range(-2.0..2.0)))
                .collect();
            let close = |got: T, want: T| (got - want).abs() <= tol * want.abs().max(T::one());

            let ht = h * (T::one() + t.abs());
            let fd = (self.value(t + ht, &x) - self.value(t - ht, &x)) / (two * ht);
            let got = self.time_derivative(t, &x);
            if !close(got, fd) {
                return fail(format!("d_t phi at t = {t}, x = {x:?}"), got, fd);
            }
            for nu in 0..self.n {
                let hx = h * (T::one() + x[nu].abs());
                let mut up = x.clone();
                let mut down = x.clone();
                up[nu] += hx;
                down[nu] -= hx;
                let fd = (self.value(t, &up) - self.value(t, &down)) / (two * hx);
                let got = self.gradient(t, &x, nu);
                if !close(got, fd) {
                    return fail(format!("d_x{nu} phi at t = {t}, x = {x:?}"), got, fd);
                }
                for mu in 0..self.n {
                    let fd = (self.gradient(t, &up, mu) - self.gradient(t, &down, mu)) / (two * hx);
                    let got = self.hessian(t, &x, mu, nu);
                    if !close(got, fd) {
                        return fail(format!("d_x{mu}x{nu} phi at t = {t}, x = {x:?}"), got, fd);
                    }
                }
            }
        }
        Ok(())
    }

    /// Runs the derivative check once per function (shared by clones).
    pub fn verify(&self) -> Result<()> {
        self.verified
            .get_or_init(|| {
                self.check_derivatives(CHECK_PROBES, CHECK_SEED)
                    .map_err(|e| e.to_string())
            })
            .clone()
            .map_err(Error::Validation)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sin_exp() -> TestFunction<f64> {
        TestFunction::scalar(
            Smoothness::LipschitzDerivatives,
            |t: f64, x: f64| x.sin() * (-t).exp(),
            |t, x| -x.sin() * (-t).exp(),
            |t, x| x.cos() * (-t).exp(),
            |t, x| -x.sin() * (-t).exp(),
        )
    }

    #[test]
    fn correct_derivatives_pass() {
        assert!(sin_exp().check_derivatives(200, 1).is_ok());
        let a = TestFunction::<f64>::affine(1.0, 2.0, &[-3.0, 0.5]).unwrap();
        assert!(a.verify().is_ok());
        assert_eq!(a.value(1.0, &[1.0, 2.0]), 1.0 + 2.0 - 3.0 + 1.0);
        let s = TestFunction::separable(&sin_exp(), &sin_exp()).unwrap();
        assert!(s.check_derivatives(100, 2).is_ok());
        assert_eq!(s.hessian(0.3, &[0.1, 0.2], 0, 1), 0.0);
    }

    #[test]
    fn wrong_derivative_is_a_validation_error() {
        let bad = TestFunction::scalar(
            Smoothness::General,
            |_, x: f64| x * x * x,
            |_, _| 0.0,
            |_, x| 3.0 * x * x,
            |_, x| 3.0 * x,
        );
        assert!(matches!(bad.verify(), Err(Error::Validation(_))));
        let bad_dt = TestFunction::scalar(
            Smoothness::General,
            |t, x: f64| t * x,
            |_, _| 0.0,
            |t, _| t,
            |_, _| 0.0,
        );
        assert!(matches!(bad_dt.verify(), Err(Error::Validation(_))));
    }

    #[test]
    fn dimension_is_checked() {
        let r = TestFunction::<f64>::new(
            3,
            Smoothness::General,
            |_, _| 0.0,
            |_, _| 0.0,
            |_, _, _| 0.0,
            |_, _, _, _| 0.0,
        );
        assert!(r.is_err());
    }
}
