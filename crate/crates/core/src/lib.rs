//! Link-level simulation of uplink cell-free massive MIMO in which APs forward
//! their local sufficient statistics to the CPU over a shared over-the-air
//! fronthaul.

pub mod channel;
pub mod combiner;
pub mod config;
pub mod detectors;
pub mod error;
pub mod fronthaul;
pub mod geometry;
pub mod harness;
pub mod ldpc;
pub mod linalg;
pub mod modulation;
pub mod moments;
pub mod rng;
pub mod uplink;

pub use error::{Error, Result};
