//! Needlet frames on the sphere S² and the hard-thresholding needlet density
//! estimator.
//!
//! The pieces, bottom up:
//!
//! - [`sphere`]: unit vectors, geodesic distance, projector kernels `L_l`.
//! - [`window`]: the Littlewood–Paley pair `(φ, b)`.
//! - [`cubature`]: positive-weight rules exact up to degree `2^{j+2} − 2`.
//! - [`frame`]: needlets `ψ_{jη}`, analysis and synthesis, Besov norms.
//! - [`estimator`]: empirical coefficients, hard thresholding, `f̂`.
//! - [`experiments`]: density models, samplers and simulation drivers.
//!
//! ```
//! use needlet::{estimator, experiments, frame::NeedletFrame};
//!
//! let frame = NeedletFrame::build(2).unwrap();
//! let sample = experiments::sample_uniform(400, 1, 0).unwrap();
//! let config = estimator::EstimatorConfig::new(400, 2, 1.5, 1.0 / (4.0 * std::f64::consts::PI)).unwrap();
//! let fit = estimator::estimate_density(&sample, &config, &frame).unwrap();
//! assert_eq!(fit.survivors().len(), 3);
//! ```

pub mod cubature;
pub mod error;
pub mod estimator;
pub mod experiments;
pub mod frame;
pub mod gauss;
pub mod io;
pub mod rng;
pub mod sphere;
pub mod window;

pub use error::{Error, Result};
pub use sphere::UnitVector3;
