//! Link-level simulation of RIS-assisted differential reflecting modulation
//! (DRM) and its space-time group-coded extension (DRM-DSTM).
//!
//! The crate is organised bottom-up:
//!
//! * [`cmatrix`] - small dense complex matrices.
//! * [`mapping`] - bits to permutation / PSK / group-element mappings.
//! * [`group_codes`] - cyclic and dicyclic unitary group codes.
//! * [`ris_channel`] - Rayleigh channel draws, reflecting patterns and
//!   stepwise-depletion pattern selection.
//! * [`transceiver`] - differential encoders and detectors.
//! * [`analysis`] - rate, complexity and union-bound evaluation.
//! * [`harness`] - reproducible Monte Carlo BER sweeps.
//! * [`cli`] - the `ris-drm` command-line front end.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod cli;
pub mod cmatrix;
mod error;
pub mod group_codes;
pub mod harness;
pub mod mapping;
pub mod ris_channel;
pub mod transceiver;

pub use cmatrix::{CMatrix, Complex};
pub use error::{Error, Result};
