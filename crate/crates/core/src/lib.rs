//! Joint (unsharp) measurements of two spin-1/2 components.
//!
//! The crate builds and checks four-outcome POVMs that measure spin along two
//! directions `a`, `a'` at once, with sharpness factors `alpha`, `alpha'`.
//! It covers the sharpness bound and its equivalent forms, the optimal and
//! general POVM families, the probabilistic-switch realization, singlet-state
//! correlations and the CHSH-type inequality they obey, no-signalling probes,
//! the associated uncertainty relations, Monte Carlo sampling, and two applied
//! scenarios (universal cloning, BB84 eavesdropping).
//!
//! All numerics are generic over [`Real`] (`f32` or `f64`); the aliases at the
//! crate root fix the scalar to `f64`.

pub mod cli;
pub mod correlations;
pub mod error;
pub mod joint;
pub mod povm;
pub mod qubit;
pub mod sampler;
pub mod scalar;
pub mod scenarios;
pub mod uncertainty;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Vec3 = qubit::Vector3<f64>;
pub type Unit3 = qubit::UnitVector3<f64>;
pub type Mat2 = qubit::ComplexMatrix2<f64>;
pub type Mat4 = qubit::ComplexMatrix4<f64>;
pub type Qubit = qubit::QubitState<f64>;
pub type QubitPair = qubit::TwoQubitState<f64>;
pub type Measurement = povm::Povm<f64>;
pub type Spec = joint::JointSpec<f64>;
pub type Switch = joint::SwitchRealization<f64>;
pub type Correlations = correlations::CorrelationSet<f64>;
pub type Report = uncertainty::UncertaintyReport<f64>;
