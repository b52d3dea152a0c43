//! Simulation library for an optical Kerr shutter (OKS) used as an ultrafast
//! polarization gate: Jones-calculus optics, pump/probe pulse overlap, qubit
//! conversion between time-bin and polarization encodings, and quantum process
//! tomography with Poisson count statistics.

// validation guards are written `!(x > 0.0)` so that NaN fails closed
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod kerr;
pub mod linalg;
pub mod polarization;
pub mod pulse;
pub mod scenarios;
pub mod seed;
pub mod timebin;
pub mod tomography;

pub use error::{Error, Result};
