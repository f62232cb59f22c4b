pub mod arm;
pub mod cli;
pub mod cloud;
pub mod config;
pub mod correlation;
pub mod egi;
pub mod error;
pub mod experiments;
pub mod harmonics;
pub mod servo;
pub mod shapes;
pub mod sim;
pub mod transform;
pub mod translation;
pub mod voxel;
pub mod wigner;

pub use error::{Error, Result};
