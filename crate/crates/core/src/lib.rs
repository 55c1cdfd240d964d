//! Virtual DC-SQUID emulator.
//!
//! Simulates a comparator-based SQUID emulator circuit: hysteretic switching
//! between a zero-resistance and a normal state, periodic flux modulation of
//! the switching threshold through a digitizing triangular converter, and
//! Gaussian threshold noise. On top of the device model sit the usual SQUID
//! diagnostics (DC and pulsed IV, S-curves, modulation maps, working-point
//! search, flux feedback), a CLI and a line-oriented TCP instrument server.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod device;
pub mod error;
pub mod io;
pub mod noise;
pub mod protocols;
pub mod reference;
pub mod tri;

pub use device::{DeviceState, EmulatorConfig, Modulation, Phase};
pub use error::{Error, Result};
pub use noise::{NoiseSource, OpId, Sampling};
pub use tri::{AdcCode, TriConfig};
