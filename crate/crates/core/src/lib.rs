//! Numerical laboratory for deep scaled residual networks.
//!
//! The crate implements the depth-`L` residual network
//! `h_{k+1} = h_k + (1 / (L sqrt(m))) V_{k+1} sigma(W_{k+1} h_k / sqrt(q))`,
//! its exact backpropagation, gradient-flow training with the `L`-scaled
//! step on the residual blocks, the neural ODE obtained in the large-depth
//! limit, and the metrics used to study the implicit regularization of
//! training (successive-weight gaps, uniform convergence of the weight
//! interpolant, PL ratios, Hermite spectra of activations).
//!
//! Everything here is pure computation on owned data: no IO, no threads, no
//! global state. File formats and the experiment runner live in the `odeflow`
//! crate.

#![no_std]

extern crate alloc;

pub mod analysis;
mod error;
pub mod grad;
pub mod model;
pub mod numcore;
pub mod odesim;
pub mod relucx;
pub mod train;

pub use error::{Error, Result};
pub use model::{Activation, Dataset, Dims, Embedding, InitScheme, ResNetParams, Trajectory};
pub use numcore::{Matrix, Rng};
