//! Linearized power flow on transmission networks and principal component
//! analysis of injection and flow patterns.
//!
//! The crate is organised by stage:
//!
//! * [`grid`]: network model, PTDF matrix, DC flows and k-means coarsening.
//! * [`synth`]: synthetic weather, wind/solar share optimisation, mismatch
//!   and the local balancing scheme that yields zero-sum injections.
//! * [`pca`]: covariance, principal axes, amplitudes, periodogram and
//!   daytime profiles.
//! * [`duality`]: the link between injection and flow covariances through
//!   the topological matrix `T = H^T H` and `M = Sigma_p T`.
//! * [`io`]: CSV/JSON readers and writers for all of the above.

pub mod duality;
pub mod error;
pub mod grid;
pub mod io;
pub mod linalg;
pub mod pca;
pub mod series;
pub mod synth;

pub use error::{Error, Result};
pub use series::TimeSeriesEnsemble;
