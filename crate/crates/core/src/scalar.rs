//! Numeric abstraction shared by the statistical routines.
//!
//! The product-limit estimator and the summary statistics only need field
//! arithmetic and an ordering, so they are written against [`Scalar`] and run
//! unchanged over `f32`, `f64` and exact rationals. Routines that need square
//! roots or logarithms (confidence bands) additionally require
//! [`num_traits::Float`].

use std::fmt::Debug;

use num_traits::{FromPrimitive, Num, ToPrimitive};

/// Ordered field element usable by the estimators.
pub trait Scalar: Num + Clone + PartialOrd + FromPrimitive + ToPrimitive + Debug {
    /// Exact conversion of a count.
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }

    /// Lossy conversion to `f64`, used only for reporting.
    fn to_f64_lossy(&self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl<T> Scalar for T where T: Num + Clone + PartialOrd + FromPrimitive + ToPrimitive + Debug {}
