pub mod bump;
pub mod error;
pub mod experiments;
mod fft;
pub mod fit;
pub mod grid;
pub mod potentials;
pub mod propagator;
pub mod reconstruct;
pub mod scattering;
pub mod xray;

pub use error::{Error, Result};
