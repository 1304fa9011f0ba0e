pub mod basin;
pub mod boundary;
pub mod cli;
pub mod error;
pub mod forcing;
pub mod geometry;
pub mod ingest;
pub mod integrator;
pub mod manifold;
pub mod model;
pub mod svg;

pub use error::{Error, Result};
pub use model::State;
