//! Numerical core for LIBS spectral analysis.
//!
//! The crate is organised by pipeline stage:
//!
//! - [`dataset`]: the spectral data model, CSV / manifest ingestion and
//!   stratified fold assignment.
//! - [`spectral_stats`]: region totals, expected-intensity histograms,
//!   per-wavelength entropy density and emission-line matching.
//! - [`linear_embed`]: PCA, classical MDS and the residual-variance scree
//!   diagnostic.
//! - [`manifold_embed`]: k-NN graphs, geodesic distances, ISOMAP, LLE and
//!   neighborhood-size sweeps.
//! - [`cluster_eval`]: k-means and the Davies-Bouldin index.
//! - [`svm`]: polynomial-kernel SVMs trained by SMO, one-vs-one multiclass
//!   voting and stratified cross-validation sweeps.
//!
//! [`fixtures`] and [`synth`] generate seeded synthetic inputs (swiss roll,
//! blobs, stand-in LIBS spectra) for tests, benchmarks and demos.

// Parameter checks are written as `!(x > 0.0)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cluster_eval;
pub mod dataset;
pub mod error;
pub mod fixtures;
pub mod linalg;
pub mod linear_embed;
pub mod manifold_embed;
pub mod seed;
pub mod spectral_stats;
pub mod svm;
pub mod synth;

pub use error::{Error, Result};
