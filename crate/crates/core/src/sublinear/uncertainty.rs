//! Volatility / covariance uncertainty and the generator `G`.

use crate::error::{invalid, Result};
use crate::scalar::{Mat2, Scalar, Vec2};

const SYMMETRY_TOL: f64 = 1e-12;
const PSD_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
enum Kind<T> {
    Interval { sigma_lo: T, sigma_hi: T },
    Covariances { theta: Vec<Mat2<T>> },
}

/// The set of admissible volatilities (`d = 1`) or covariance rates (`d = 2`).
///
/// Every adapted selection from this set induces one probability measure of
/// the representing family; the upper expectation is the supremum over them.
#[derive(Debug, Clone, PartialEq)]
pub struct UncertaintySet<T> {
    kind: Kind<T>,
}

/// One admissible volatility selection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Control<T> {
    /// Scalar volatility, `d = 1`.
    Sigma(T),
    /// Index into the covariance set, `d = 2`.
    Theta(usize),
}

/// A control together with its covariance rate and symmetric square root.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResolvedControl<T> {
    pub control: Control<T>,
    pub cov: Mat2<T>,
    pub root: Mat2<T>,
}

impl<T: Scalar> UncertaintySet<T> {
    /// One-dimensional volatility interval `[sigma_lo, sigma_hi]`.
    pub fn interval(sigma_lo: T, sigma_hi: T) -> Result<Self> {
        if !(sigma_lo.is_finite() && sigma_hi.is_finite()) {
            return invalid("volatility bounds must be finite");
        }
        if sigma_lo < T::zero() || sigma_lo > sigma_hi {
            return invalid(format!(
                "volatility bounds must satisfy 0 <= lo <= hi, got [{sigma_lo}, {sigma_hi}]"
            ));
        }
        Ok(Self {
            kind: Kind::Interval { sigma_lo, sigma_hi },
        })
    }

    /// Two-dimensional finite set of symmetric PSD covariance rates.
    pub fn covariances(theta: Vec<Mat2<T>>) -> Result<Self> {
        if theta.is_empty() {
            return invalid("covariance set must be non-empty");
        }
        for (i, q) in theta.iter().enumerate() {
            check_symmetric(q).map_err(|_| {
                crate::Error::InvalidArgument(format!("covariance #{i} is not symmetric"))
            })?;
            let (l1, l2) = sym_eigenvalues(q);
            if l1.min(l2) < -T::lit(PSD_TOL) * (T::one() + l1.abs().max(l2.abs())) {
                return invalid(format!("covariance #{i} is not positive semidefinite"));
            }
        }
        Ok(Self {
            kind: Kind::Covariances { theta },
        })
    }

    pub fn dim(&self) -> usize {
        match self.kind {
            Kind::Interval { .. } => 1,
            Kind::Covariances { .. } => 2,
        }
    }

    /// `(sigma_lo, sigma_hi)` for the one-dimensional set.
    pub fn interval_bounds(&self) -> Option<(T, T)> {
        match self.kind {
            Kind::Interval { sigma_lo, sigma_hi } => Some((sigma_lo, sigma_hi)),
            Kind::Covariances { .. } => None,
        }
    }

    pub fn theta(&self) -> Option<&[Mat2<T>]> {
        match &self.kind {
            Kind::Interval { .. } => None,
            Kind::Covariances { theta } => Some(theta),
        }
    }

    /// Largest instantaneous variance rate over the set (`sigma_hi^2` when `d = 1`).
    pub fn max_variance_rate(&self) -> T {
        match &self.kind {
            Kind::Interval { sigma_hi, .. } => *sigma_hi * *sigma_hi,
            Kind::Covariances { theta } => theta
                .iter()
                .map(|q| {
                    let (a, b) = sym_eigenvalues(q);
                    a.max(b)
                })
                .fold(T::zero(), T::max),
        }
    }

    /// `G(alpha) = 1/2 (sigma_hi^2 alpha^+ - sigma_lo^2 alpha^-)`.
    pub fn g(&self, alpha: T) -> Result<T> {
        match self.kind {
            Kind::Interval { sigma_lo, sigma_hi } => Ok(T::lit(0.5)
                * (sigma_hi * sigma_hi * alpha.pos_part()
                    - sigma_lo * sigma_lo * alpha.neg_part())),
            Kind::Covariances { .. } => {
                invalid("scalar G argument requires d = 1; use g_matrix for d = 2")
            }
        }
    }

    /// `G(A) = 1/2 max_{Q in Theta} tr(A Q)` for a symmetric 2x2 `A`.
    pub fn g_matrix(&self, a: &Mat2<T>) -> Result<T> {
        check_symmetric(a)?;
        match &self.kind {
            Kind::Interval { .. } => invalid("matrix G argument requires d = 2"),
            Kind::Covariances { theta } => {
                let best = theta
                    .iter()
                    .map(|q| trace_product(a, q))
                    .fold(T::neg_infinity(), T::max);
                Ok(T::lit(0.5) * best)
            }
        }
    }

    /// One-dimensional set governing `B^a = <a, B>`: upper variance `2G(aa^T)`,
    /// lower variance `-2G(-aa^T)`.
    pub fn directional(&self, a: Vec2<T>) -> Result<UncertaintySet<T>> {
        let aat = [[a[0] * a[0], a[0] * a[1]], [a[1] * a[0], a[1] * a[1]]];
        let neg = [[-aat[0][0], -aat[0][1]], [-aat[1][0], -aat[1][1]]];
        let hi2 = T::lit(2.0) * self.g_matrix(&aat)?;
        let lo2 = -T::lit(2.0) * self.g_matrix(&neg)?;
        UncertaintySet::interval(lo2.max(T::zero()).sqrt(), hi2.max(T::zero()).sqrt())
    }

    /// Default finite choice set: the interval endpoints, or every covariance.
    pub fn default_controls(&self) -> Vec<Control<T>> {
        match &self.kind {
            Kind::Interval { sigma_lo, sigma_hi } => {
                if sigma_lo == sigma_hi {
                    vec![Control::Sigma(*sigma_hi)]
                } else {
                    vec![Control::Sigma(*sigma_lo), Control::Sigma(*sigma_hi)]
                }
            }
            Kind::Covariances { theta } => (0..theta.len()).map(Control::Theta).collect(),
        }
    }

    /// Validates a control against the set and attaches its covariance data.
    pub fn resolve(&self, control: Control<T>) -> Result<ResolvedControl<T>> {
        let z = T::zero();
        match (&self.kind, control) {
            (Kind::Interval { sigma_lo, sigma_hi }, Control::Sigma(s)) => {
                if !(s >= *sigma_lo && s <= *sigma_hi) {
                    return invalid(format!("volatility {s} outside [{sigma_lo}, {sigma_hi}]"));
                }
                Ok(ResolvedControl {
                    control,
                    cov: [[s * s, z], [z, z]],
                    root: [[s, z], [z, z]],
                })
            }
            (Kind::Covariances { theta }, Control::Theta(i)) => {
                let q = theta.get(i).ok_or_else(|| {
                    crate::Error::InvalidArgument(format!(
                        "covariance index {i} out of range ({} entries)",
                        theta.len()
                    ))
                })?;
                Ok(ResolvedControl {
                    control,
                    cov: *q,
                    root: sym_sqrt(q),
                })
            }
            (Kind::Interval { .. }, Control::Theta(_)) => {
                invalid("covariance-index control used with a d = 1 set")
            }
            (Kind::Covariances { .. }, Control::Sigma(_)) => {
                invalid("scalar volatility control used with a d = 2 set")
            }
        }
    }
}

impl<T: Scalar> Control<T> {
    /// Tie-break rank: larger is preferred (larger sigma, lower covariance index).
    pub(crate) fn preference(&self) -> f64 {
        match *self {
            Control::Sigma(s) => s.to_f64_lossy(),
            Control::Theta(i) => -(i as f64),
        }
    }
}

fn check_symmetric<T: Scalar>(a: &Mat2<T>) -> Result<()> {
    let scale = T::one() + a[0][1].abs().max(a[1][0].abs());
    if (a[0][1] - a[1][0]).abs() > T::lit(SYMMETRY_TOL) * scale {
        return invalid("matrix argument must be symmetric");
    }
    Ok(())
}

pub(crate) fn trace_product<T: Scalar>(a: &Mat2<T>, q: &Mat2<T>) -> T {
    a[0][0] * q[0][0] + a[0][1] * q[1][0] + a[1][0] * q[0][1] + a[1][1] * q[1][1]
}

/// Eigenvalues `(larger, smaller)` of a symmetric 2x2 matrix.
pub(crate) fn sym_eigenvalues<T: Scalar>(m: &Mat2<T>) -> (T, T) {
    let half = T::lit(0.5);
    let mean = half * (m[0][0] + m[1][1]);
    let diff = half * (m[0][0] - m[1][1]);
    let off = half * (m[0][1] + m[1][0]);
    let rad = (diff * diff + off * off).sqrt();
    (mean + rad, mean - rad)
}

/// Symmetric PSD square root by spectral decomposition, eigenvalues clamped at 0.
pub fn sym_sqrt<T: Scalar>(m: &Mat2<T>) -> Mat2<T> {
    let z = T::zero();
    let off = T::lit(0.5) * (m[0][1] + m[1][0]);
    if off == z {
        return [[m[0][0].max(z).sqrt(), z], [z, m[1][1].max(z).sqrt()]];
    }
    let (l1, l2) = sym_eigenvalues(m);
    // eigenvector of l1: (off, l1 - m00), normalised
    let (vx, vy) = (off, l1 - m[0][0]);
    let norm = (vx * vx + vy * vy).sqrt();
    let (c, s) = (vx / norm, vy / norm);
    let r1 = l1.max(z).sqrt();
    let r2 = l2.max(z).sqrt();
    // V diag(r1, r2) V^T with V = [[c, -s], [s, c]]
    [
        [r1 * c * c + r2 * s * s, (r1 - r2) * c * s],
        [(r1 - r2) * c * s, r1 * s * s + r2 * c * c],
    ]
}
