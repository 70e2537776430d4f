//! Scalar abstraction shared by every numeric routine in the crate.

use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating point scalar the linear algebra and measurement code is generic over.
///
/// The associated tolerances are absolute and scaled to the precision of the type.
/// `f64` uses the tight values the test suite is written against; `f32` gets
/// looser ones so the same checks remain meaningful.
pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    /// Tolerance for closed-form algebra (hermiticity, unit norms, traces).
    const EXACT_TOL: Self;
    /// Tolerance for validating POVMs and states built from user-supplied numbers.
    const VALIDATION_TOL: Self;
    /// Band shared by every form of the sharpness-bound admissibility test.
    const ADMISSIBILITY_TOL: Self;

    /// Converts an `f64` literal. Panics only if the type cannot represent it.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal not representable")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f64 {
    const EXACT_TOL: Self = 1e-12;
    const VALIDATION_TOL: Self = 1e-10;
    const ADMISSIBILITY_TOL: Self = 1e-10;
}

impl Real for f32 {
    const EXACT_TOL: Self = 1e-5;
    const VALIDATION_TOL: Self = 1e-4;
    const ADMISSIBILITY_TOL: Self = 1e-4;
}
