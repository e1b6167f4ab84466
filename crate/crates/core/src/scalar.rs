//! Scalar abstraction shared by every numeric routine in the crate.

use std::fmt::{Debug, Display, LowerExp};

use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};

/// Real scalar the dynamics, estimators and oracles are generic over.
///
/// Implemented for `f32` and `f64`. Decompositions come from nalgebra, so the
/// bound is `RealField`; conversions to and from literals go through
/// num-traits.
pub trait Real:
    RealField + Copy + FromPrimitive + ToPrimitive + LowerExp + Default + Debug + Display
{
    /// Converts an `f64` literal. Infallible for the supported float types.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable in scalar type")
    }

    #[inline]
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar convertible to f64")
    }

    /// Absolute tolerance `nominal`, floored at a small multiple of machine
    /// epsilon so that f32 instances get a meaningful bound.
    #[inline]
    fn tolerance(nominal: f64) -> Self {
        let floor = Self::default_epsilon() * Self::lit(64.0);
        let nominal = Self::lit(nominal);
        if nominal > floor {
            nominal
        } else {
            floor
        }
    }
}

impl Real for f32 {}
impl Real for f64 {}
