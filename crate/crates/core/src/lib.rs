//! Numerical laboratory for negatively Ricci-curved metrics on flat tori.
//!
//! The crate computes curvature of metric fields given in coordinates,
//! builds separated covering nets on flat tori, transplants a local seed
//! metric into every net ball and deforms the result by a product of
//! localized conformal factors, then sweeps the deformation parameters
//! while tracking the extreme Ricci eigenvalues.

pub mod atlas;
pub mod autodiff;
pub mod curvature;
pub mod deform;
pub mod error;
pub mod linalg;
pub mod metric;
pub mod net;
pub mod search;
pub mod sweep;

pub use error::{Error, Result};
