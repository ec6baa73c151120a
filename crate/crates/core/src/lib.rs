//! Numerical laboratory for Haar-random Stiefel matrices, their corners and
//! random projections of product measures and `ℓ_p` balls, together with
//! the log-determinant rate functions that govern their large deviations.

pub mod configurations;
pub mod densities;
pub mod error;
pub mod linalg;
pub mod projections;
pub mod quadrature;
pub mod rates;
pub mod rng;
pub mod samplers;
pub mod stats;
pub mod verify;

pub use configurations::{Atom, PointConfiguration, PowerSumRecovery};
pub use densities::LogDensity;
pub use error::{Error, Result};
pub use linalg::{ColumnList, DenseMatrix, SymmetricPSD};
pub use projections::{EmpiricalMeasure, ProductLaw, ProjectedLaw};
pub use rates::{RateValue, TruncationReport};
pub use rng::SeededRng;
pub use samplers::PGaussianParams;
pub use verify::{LdpExperiment, Method, SlopeReport};
