//! Simulation laboratory for blind estimation of doubly selective OFDM
//! channels: channel generation through a complex-exponential basis
//! expansion, an OFDM transceiver chain, dataset construction, a from-scratch
//! ReLU feedforward network, the blind estimator built on it, and numerical
//! verification of the supporting probability bounds.

pub mod channel;
pub mod config;
pub mod dataset;
pub mod estimator;
pub mod linalg;
pub mod nn;
pub mod ofdm;
pub mod pipeline;
pub mod rng;
pub mod special;
pub mod theory;
