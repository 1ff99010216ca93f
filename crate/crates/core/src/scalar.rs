//! Floating-point scalar abstraction shared by every numeric routine.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Real scalar type the library is generic over (`f32` or `f64`).
///
/// Arithmetic comes from `num-traits`; the one dense kernel we do not write
/// ourselves (symmetric eigenvalues) is delegated per concrete type.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + NumAssign + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Lossy conversion from an `f64` literal.
    #[inline]
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 is representable")
    }

    #[inline]
    fn of_usize(x: usize) -> Self {
        Self::from_usize(x).expect("usize is representable")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Eigenvalues of the symmetric `dim x dim` matrix stored row-major in
    /// `data`, sorted ascending.
    fn symmetric_eigenvalues(dim: usize, data: &[Self]) -> Vec<Self>;
}

macro_rules! impl_scalar {
    ($t:ty) => {
        impl Scalar for $t {
            fn symmetric_eigenvalues(dim: usize, data: &[Self]) -> Vec<Self> {
                assert_eq!(data.len(), dim * dim, "eigen input must be square");
                if dim == 0 {
                    return Vec::new();
                }
                let m = nalgebra::DMatrix::<$t>::from_row_slice(dim, dim, data);
                let mut eigs: Vec<$t> = m.symmetric_eigenvalues().iter().copied().collect();
                eigs.sort_by(|a, b| a.total_cmp(b));
                eigs
            }
        }
    };
}

impl_scalar!(f32);
impl_scalar!(f64);
