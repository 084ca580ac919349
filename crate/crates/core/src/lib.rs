//! Tabular adversarial imitation learning with positive-unlabeled
//! discriminator training, its f-divergence instantiations, baselines, and
//! exact oracles for the underlying theory.

pub mod demos;
pub mod error;
pub mod fdiv;
pub mod gridworld;
pub mod mdp;
pub mod objective;
pub mod oracle;
pub mod scorer;
pub mod sim;
pub mod stats;
pub mod synth;
pub mod trainer;

pub use error::{CoreError, Result};
pub use mdp::{OccupancyMeasure, SoftmaxPolicy, StochasticPolicy, TabularMdp, Trajectory};
