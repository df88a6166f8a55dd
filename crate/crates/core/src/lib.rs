//! Twisted averages of paramodular Fourier coefficients over `Γ₀(N)`-classes of
//! binary quadratic forms, and twisted central values of degree-4 spin
//! L-functions computed from genus-2 curves.
pub mod afe;
pub mod arith;
pub mod averages;
pub mod coeffstore;
pub mod error;
pub mod lseries;
pub mod quadforms;
pub mod verify;

pub use afe::CompletedL;
pub use averages::{AverageResult, AverageStatus};
pub use coeffstore::{CoeffTable, CoefficientSource, FormMeta, JacobiTable};
pub use error::{Error, Result};
pub use lseries::{Curve, GammaFactor, LSeriesData};
pub use quadforms::{ClassKey, ClassList, Mat2, QuadForm};
