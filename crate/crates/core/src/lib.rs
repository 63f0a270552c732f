//! Exact number-partitioning experiments: instances, solvers, low-degree
//! algorithms and solution-landscape measurements.

pub mod caps;
pub mod error;
pub mod experiment;
pub mod instances;
pub mod io;
pub mod landscape;
pub mod lowdeg;
pub mod model;
pub mod par;
pub mod rng;
pub mod solvers;
pub mod stats;
pub mod wide;

pub use caps::Caps;
pub use error::{NppError, Result};
pub use model::{Dist, EnergyLevel, Instance, SignVector};
pub use wide::Wide;
