//! Estimating how many explicit ratings a new user must give before a
//! cluster-based collaborative filter places them in a stable cluster.
//!
//! The pipeline: load ratings ([`dataset`]), cluster users with k-means
//! ([`kmeans`]), score clusters with the Davies-Bouldin index ([`quality`]),
//! choose the cluster-size coefficient by ranking metrics ([`recsys_eval`]),
//! then replay each user's ratings one at a time against the frozen model to
//! find where assignment success stops improving quickly ([`coldstart`]).

pub mod coldstart;
pub mod dataset;
mod error;
pub mod kmeans;
pub mod quality;
pub mod recsys_eval;

pub use error::{Error, Result};
