//! Simulator and trainer for binarized diffractive optical neural networks.
//!
//! The model stacks binary phase layers between free-space gaps, reads ten
//! photodetector powers at the output plane, and classifies by the largest
//! reading. Training drives real-valued neuron phases to the two
//! realizable states with a scheduled penalty (or a straight-through
//! estimator), and a trainable 10x10 linear correcting layer on the
//! detector powers boosts accuracy and absorbs hardware errors.

pub mod adam;
pub mod cli;
pub mod correcting;
pub mod dataio;
pub mod error;
pub mod eval;
pub mod field;
pub mod grid;
pub mod loss;
pub mod network;
pub mod phase;
pub mod propagation;
pub mod reference;
pub mod training;

pub use error::{DonnError, Result};
pub use field::WaveField;
pub use grid::GridSpec;
pub use network::{DetectorLayout, DiffractiveLayer, DiffractiveNetwork, NeuronPhysics};
pub use propagation::{propagate, EvanescentPolicy, PropagationParams};
