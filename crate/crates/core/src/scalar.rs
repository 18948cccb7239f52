//! Scalar abstraction shared by the geometry and simulation layers.

use std::fmt;

use nalgebra::RealField;
use num_traits::{FromPrimitive, NumAssignOps, ToPrimitive};

/// Floating point scalar the geometric core is generic over: `f32` or `f64`.
pub trait Real:
    RealField + Copy + FromPrimitive + ToPrimitive + NumAssignOps + Default + fmt::Debug + fmt::Display
{
    /// Converts an `f64` literal into this scalar.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable in scalar type")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}
