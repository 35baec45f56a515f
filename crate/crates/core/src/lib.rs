//! Stationary Gaussian analytic functions in a strip: spectral measures,
//! simulation, zero counting by the argument principle, and the variance
//! asymptotics of zero counts in rectangles.

pub mod analytics;
pub mod error;
pub mod gafsim;
pub mod harness;
pub mod quad;
pub mod spectral;
pub mod zeros;

pub use error::{Error, Result};
pub use spectral::{Atom, GridDensity, Singularity, SpectralMeasure, TailClass};
pub use num_complex::Complex64;
