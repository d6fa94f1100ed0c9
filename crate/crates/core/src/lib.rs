//! Numerical laboratory for i.i.d. random compositions of piecewise
//! expanding interval maps.
//!
//! The crate is organized along the pipeline it implements:
//!
//! * [`maps`] — piecewise expanding maps of `[0,1]` and finite random
//!   systems driven by an i.i.d. choice of map;
//! * [`transfer`] — Ulam discretizations of annealed, twisted and doubled
//!   transfer operators, stationary densities and spectral gaps;
//! * [`limits`] — spectral predictors for the limit theorems: Green–Kubo
//!   variance, leading-eigenvalue derivatives, log-MGF and rate function,
//!   aperiodicity scans, martingale coboundaries, doubled-system variance;
//! * [`montecarlo`] — seeded, reproducible orbit simulation and the
//!   empirical experiments that are checked against the predictors;
//! * [`cli`] — JSON-config batch front-end used by the `rde` binary.

pub mod cli;
pub mod error;
pub mod limits;
pub mod maps;
pub mod montecarlo;
pub mod numeric;
pub mod observable;
pub mod transfer;

pub use error::{RdeError, Result};
