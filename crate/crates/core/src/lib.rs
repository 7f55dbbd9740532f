//! Edge multiscale finite elements for `−∇·(κ∇u) = f` on the unit square
//! with high-contrast `κ`.

pub mod coefficient;
pub mod error;
pub mod fem;
pub mod harness;
pub mod linalg;
pub mod local;
pub mod mesh;
pub mod metrics;
pub mod parallel;
pub mod spaces;
pub mod wavelets;

pub use error::{Error, Result};
