//! Verification and conversion of generalized (energy-variational,
//! dissipative weak, measure-valued) solutions of Euler-type systems on
//! uniform grids.

pub mod catalog;
pub mod certify;
pub mod convert;
pub mod dmeasure;
pub mod domain;
pub mod error;
pub mod io;
pub mod symcone;
pub mod systems;

pub use error::{Error, Result};
