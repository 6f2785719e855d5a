//! Cost-function approximation policies for an energy storage problem.

pub mod energy;
pub mod error;
pub mod exp;
pub mod grad;
pub mod lp;
pub mod model;
pub mod policy;
pub mod search;

pub use error::{Error, Result};
