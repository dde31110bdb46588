//! Scalar abstraction shared by every numerical routine in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Real field the engines are generic over (`f32` or `f64`).
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + NumAssign + Sum + Debug + Display + Send + Sync + 'static
{
    /// Converts an `f64` literal; panics only if the literal is not representable.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in scalar type")
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("integer representable in scalar type")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    #[inline]
    fn pos_part(self) -> Self {
        self.max(Self::zero())
    }

    #[inline]
    fn neg_part(self) -> Self {
        (-self).max(Self::zero())
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Symmetric 2x2 matrix stored row-major.
pub type Mat2<T> = [[T; 2]; 2];

/// Two-component vector.
pub type Vec2<T> = [T; 2];
