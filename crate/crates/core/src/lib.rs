//! Random-projection ensemble entropy estimation for information-theoretic
//! image registration.
//!
//! High-dimensional joint patch features of a reference and a rotated test
//! image are split into random groups, each group is pushed through its own
//! Gaussian random projection, a nonparametric entropy estimator runs on
//! every projected group and the group estimates are averaged. The negative
//! of that average is the registration objective.
//!
//! Modules follow the pipeline:
//!
//! * [`image_io`]: loading, Sobel magnitude, rotation, rotation-safe region
//! * [`features`]: patch features and the joint sample set
//! * [`rproj`]: Gaussian projection matrices
//! * [`entropy`]: kdp, kNN, kNN-graph, MST and weighted-kNN estimators
//! * [`ensemble`]: grouping, per-group projection and averaging
//! * [`registration`]: objectives, angle grids and sweeps
//! * [`bench`]: experiment lattices, box statistics, timing tables

pub mod bench;
pub mod ensemble;
pub mod entropy;
pub mod features;
pub mod image_io;
pub mod registration;
pub mod rproj;
pub mod seed;

pub use ensemble::{baseline_entropy, ensemble_entropy, make_plan, EnsembleEstimate, GroupPlan, ProjectionMode};
pub use entropy::{EntropyEstimate, EntropyEstimator, EstimatorKind, EstimatorSpec};
pub use features::FeatureSet;
pub use image_io::{Channel, ImageGrid, PixelRect};
pub use rproj::ProjectionMatrix;
