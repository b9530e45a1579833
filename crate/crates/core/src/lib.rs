//! Respiration-rate estimation from ECG and accelerometer recordings.
//!
//! The crate covers the whole numeric path: waveform conditioning
//! ([`signal`]), ECG- and accelerometer-derived respiration surrogates
//! ([`ecg_resp`], [`adr`]), breath counting ([`breath`]), a small 1-D
//! convolutional network engine with exact reverse-mode gradients ([`nn`]),
//! the five network configurations ([`model`]), the training loop
//! ([`training`]), agreement statistics ([`evaluation`]) and a synthetic
//! signal generator with exact labels ([`synth`], [`dataset`]).
//!
//! Everything here is `no_std` + `alloc`; file formats, timing and the
//! command line live in the `resprate` companion crate.
#![no_std]
#![cfg_attr(test, allow(unused_imports))]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod adr;
pub mod breath;
pub mod dataset;
pub mod ecg_resp;
mod error;
pub mod evaluation;
pub mod filter;
pub mod interp;
pub mod model;
pub mod nn;
pub mod rng;
pub mod signal;
pub mod synth;
pub mod training;

pub use error::{Error, Result};
