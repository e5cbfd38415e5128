#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! Core mathematics for a Poisson process whose intensity decays from
//! `alpha + beta` toward the baseline `beta`:
//!
//! ```text
//! lambda(t) = beta + alpha / (b t + 1)
//! ```
//!
//! Everything here is pure computation over `alloc`; file formats, timestamp
//! ingestion and the command-line front end live in the `waning` crate.
//!
//! Time is measured in days throughout.

extern crate alloc;
#[cfg(test)]
extern crate std;

mod error;

pub mod inference;
pub mod model;
pub mod optimize;
pub mod quad;
pub mod rng;
pub mod simulate;
pub mod stats;
pub mod theory;

pub use crate::error::{Error, Result};
pub use crate::inference::{fit_ccdf, fit_mle, log_likelihood, CutoffPowerLawFit, MleFit};
pub use crate::model::{ModelParams, RegimeClass};
pub use crate::simulate::{EventStream, SimulationSpec, StopRule};
pub use crate::stats::{EmpiricalCcdf, GofReport, InterarrivalSample};
pub use crate::theory::{AsymptoticForm, SurvivalCurve, SurvivalMethod};
