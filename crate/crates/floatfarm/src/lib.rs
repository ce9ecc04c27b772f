//! Floating offshore wind farm power tracking.

pub mod control;
pub mod error;
pub mod farm;
pub mod harness;
pub mod lpv;
pub mod mpc;
pub mod pjm;
pub mod plant;
pub mod wake;

pub use error::{FarmError, Result};
