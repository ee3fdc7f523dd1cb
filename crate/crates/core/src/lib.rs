//! Scale-invariant random soups, Mandelbrot fractal percolation and the
//! Monte Carlo machinery for their crossing events.
//!
//! Geometry, intensity formulas, Wilson intervals and the exact fractal
//! polynomial are generic over the scalar type. The sampling pipeline runs
//! on `f64`; the aliases below fix that choice.

pub mod error;
pub mod estimate;
pub mod fractal;
pub mod geometry;
pub mod lattice;
pub mod raster;
pub mod renorm;
pub mod rng;
pub mod scalar;
pub mod soup;
pub mod stats;
pub mod svg;

pub use error::{Error, Result};
pub use estimate::{BisectConfig, BisectResult, Event, EventSpec, Model, Param, SweepResult};
pub use fractal::{FractalShell, FractalSpec, RetainedSet};
pub use geometry::ShapeKind;
pub use lattice::Adjacency;
pub use raster::Grid;
pub use renorm::{RenormSpec, XField};
pub use rng::Stream;
pub use scalar::Scalar;
pub use soup::{Shape, ShapeSet, SoupMode, SoupSpec};
pub use stats::{Correlation, Estimate};

pub type Point = geometry::Point<f64>;
pub type AxisBox = geometry::AxisBox<f64>;
pub type Ball = geometry::Ball<f64>;
pub type SimpleShell = geometry::SimpleShell<f64>;
