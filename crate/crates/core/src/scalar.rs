//! Scalar abstraction for the scoring and metric math.
//!
//! Everything that computes relevance scores or ranking metrics is generic
//! over [`Real`], so the same code runs in `f32` or `f64`. The crate root
//! exports concrete aliases instantiated with [`crate::Score`].

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point scalar used by scorers and metrics.
pub trait Real:
    Float + FromPrimitive + ToPrimitive + std::fmt::Debug + std::fmt::Display + Send + Sync + 'static
{
    /// Lossless-enough conversion from a token or document count.
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable as scalar")
    }
}

impl<T> Real for T where
    T: Float
        + FromPrimitive
        + ToPrimitive
        + std::fmt::Debug
        + std::fmt::Display
        + Send
        + Sync
        + 'static
{
}
