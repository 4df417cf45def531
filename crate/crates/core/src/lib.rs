//! Finite-element simulation of fluid-solid phase-field flows governed by a
//! Cahn-Hilliard Navier-Stokes system, with an energy-stable time scheme,
//! monolithic and partitioned solvers, sharp-interface preprocessing and a
//! precipitation/dissolution extension.

pub mod assembly;
pub mod config;
pub mod driver;
pub mod error;
pub mod fespace;
pub mod linalg;
pub mod mesh;
pub mod nonlinear;
pub mod output;
pub mod physics;
pub mod reactive;

pub use error::{Error, Result};
