//! Simulation of a single-photon-level optical memory for orbital angular
//! momentum qubits.
//!
//! The pipeline follows a weak coherent pulse through a spatial light
//! modulator, a 50/50 splitter and two fork-hologram/fiber discriminators,
//! optionally stored and retrieved in a cold-atom ensemble by dynamic EIT,
//! and finally detected by photon counters:
//!
//! - [`modes`]: Laguerre-Gauss basis, polar-grid fields and decomposition;
//! - [`optics`]: forks, fibers, splitter and the linear detection kernel;
//! - [`memory`]: Maxwell-Bloch storage and retrieval per radial shell;
//! - [`counting`]: Poisson photodetection and deterministic Monte Carlo;
//! - [`analysis`]: efficiency, distinction ratio, imbalance and reports;
//! - [`config`] and [`experiment`]: strict configuration and orchestration.
//!
//! The field and memory kernels are generic over [`scalar::Real`] (`f32` or
//! `f64`); the aliases below fix them to `f64`.

// `!(x > 0)` is used on purpose so that NaN fails every guard.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod config;
pub mod counting;
pub mod error;
pub mod experiment;
pub mod grid;
pub mod memory;
pub mod modes;
pub mod optics;
pub mod scalar;

pub use error::{Error, Result};

pub type Grid = grid::PolarGrid<f64>;
pub type Field = modes::TransverseField<f64>;
pub type Coefficients = modes::ModeCoefficients<f64>;
pub type State = optics::ChannelState<f64>;
pub type Ensemble = memory::EnsembleParams<f64>;
pub type Schedule = memory::ControlSchedule<f64>;
pub type Pulse = memory::PulseEnvelope<f64>;
pub type Spin = memory::SpinWave<f64>;
