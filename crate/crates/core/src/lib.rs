//! Matrix completion under non-uniform sampling.
//!
//! Learns a preference matrix from non-uniformly sampled, noisy entries via
//! weighted trace-norm penalized regression. The crate covers dense matrix
//! primitives, sampling-matrix estimation (rank-1 margins and Poisson
//! low-rank recovery), the proximal-gradient path solver, weight-matrix
//! construction, four benchmark estimation pipelines, and the evaluation and
//! fairness protocols around them.
//!
//! ```
//! use nucomplete::dataio::{generate_synthetic, SyntheticSpec};
//! use nucomplete::estimators::{EstimatorSpec, Method};
//! use nucomplete::evaluation::{evaluate_on_synthetic, LambdaSelection};
//!
//! let data = generate_synthetic(&SyntheticSpec {
//!     d: 15,
//!     rank_b: 3,
//!     rank_p: 3,
//!     noise_sd: 1.0,
//!     n: 300,
//!     seed: 7,
//! })?;
//! let spec = EstimatorSpec::new(Method::NuRecommend);
//! let scored = evaluate_on_synthetic(&data, &spec, LambdaSelection::Oracle, 7)?;
//! assert!(scored.rel_frobenius < 1.0, "recovers some signal");
//! # Ok::<(), nucomplete::Error>(())
//! ```

// Validations use `!(x > 0.0)` so NaN fails them too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dataio;
pub mod error;
pub mod estimators;
pub mod evaluation;
pub mod matcore;
pub mod sampling;
pub mod solver;
pub mod weights;

pub use error::{Error, Result};
pub use matcore::DenseMatrix;
pub use sampling::ObservationSet;
