//! Quantum trajectories of the driven dissipative Kerr cavity: exact Fock-space
//! unravelings, two Gaussian trajectory ansätze, truncated Wigner sampling and
//! ensemble statistics.

pub mod cli;
pub mod ensemble;
pub mod experiments;
pub mod error;
pub mod fock;
pub mod model;
pub mod moments;
pub mod ntheta;
pub mod twa;
pub mod unravel;
pub mod wigner;
pub mod xp;

pub use error::{Error, Result};
pub use model::{derive_trajectory_seed, sample_noise, KerrParams, NoiseIncrement, RngStream, UnravelingScheme};
pub use moments::DensityMatrixMoments;
