//! Agrivoltaic design-space evaluation: row-array optics, module energy, crop
//! light and the food-energy profit criterion against ground-mounted PV.

pub mod crop;
pub mod econ;
pub mod energy;
pub mod error;
pub mod optics;
pub mod scenario;
pub mod simulate;
pub mod solar;
pub mod study;
pub mod sweep;
pub mod validation;

pub use error::{Error, Result};
