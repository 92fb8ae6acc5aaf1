//! Dyadic cubes, sparse families and sparse operators on uniform meshes.

pub mod batch;
pub mod chain;
pub mod constants;
pub mod error;
pub mod experiments;
pub mod geometry;
pub mod mesh;
pub mod norm;
pub mod numerics;
pub mod operators;
pub mod sparse;
pub mod step;
pub mod weights;

pub use error::{Error, Result};
