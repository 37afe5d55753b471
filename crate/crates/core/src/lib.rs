//! Calibration and annotation toolkit for robot-measured 6D object poses.

pub mod error;
pub mod geom;
pub mod handeye;
pub mod io;
pub mod metrics;
pub mod pivot;
pub mod registration;
pub mod sim;

pub use error::{Error, Result};
