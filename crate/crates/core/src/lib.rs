//! Decomposition of points in free spectrahedra, spectrahedrops and
//! truncated generalized free spectrahedra into matrix convex combinations
//! of free extreme points, with checkable certificates.

pub mod error;
pub mod extremal;
pub mod generalized;
pub mod linalg;
pub mod pencil;
pub mod random;
pub mod sdp;
pub mod spectrahedrop;

pub use error::{FexError, Result};
