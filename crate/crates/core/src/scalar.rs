//! Floating-point scalar abstraction shared by every numeric module.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};

/// Real scalar field underlying the complex code symbols: `f32` or `f64`.
///
/// The associated tolerances are the round-off budgets used when a structural
/// property (unitarity, positive semi-definiteness, rank) is checked in this
/// precision.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + 'static
{
    /// Largest admissible `max |U Uᴴ - I|` for a code matrix.
    const UNITARY_TOL: f64;
    /// Round-off budget for exact identities (constellation power, negative
    /// Gram determinants).
    const ROUNDOFF: f64;
    /// Default relative pivot tolerance for numerical rank.
    const RANK_TOL: f64;

    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("literal representable in every float type")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("float converts to f64")
    }
}

impl Real for f32 {
    const UNITARY_TOL: f64 = 1e-5;
    const ROUNDOFF: f64 = 1e-5;
    const RANK_TOL: f64 = 1e-4;
}

impl Real for f64 {
    const UNITARY_TOL: f64 = 1e-10;
    const ROUNDOFF: f64 = 1e-12;
    const RANK_TOL: f64 = 1e-9;
}
