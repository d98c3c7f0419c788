#![allow(
    clippy::neg_cmp_op_on_partial_ord,
    clippy::single_range_in_vec_init,
    clippy::needless_range_loop
)]

//! Vibro-polariton normal modes, infrared spectra and effective harmonic
//! models for molecules coupled to cavity photon modes within the cavity
//! Born-Oppenheimer approximation.

pub mod backend;
pub mod collective;
pub mod config;
pub mod error;
pub mod hessian;
pub mod models;
pub mod pipeline;
pub mod polariton;
pub mod presets;
pub mod system;
pub mod units;

pub use error::{Error, Result};
