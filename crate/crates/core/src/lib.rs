//! Simulation and exact evaluation of the anchored-island coverage model.
//!
//! Clones are intervals `[x - t, x]` whose right ends `x` form a Poisson
//! process and whose lengths `t` follow a position-dependent law. Anchors form
//! an independent Poisson process. A clone is anchored when it contains an
//! anchor; islands are the connected unions of anchored clones and the ocean
//! is what is left.

pub mod error;
pub mod formulas;
pub mod mc;
pub mod model;
pub mod quad;
pub mod rng;
pub mod sampler;
pub mod stats;

pub use error::{Error, Result};
pub use model::{IntensityMeasure, LengthLaw, Lengths, ModelSpec};
pub use quad::QuadConfig;
pub use rng::RngStream;
