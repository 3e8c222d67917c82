//! Simulation of discrete mechanical systems whose nonconservative forces
//! derive from a dissipation potential `R` constructed from a (not
//! necessarily quadratic) dissipation function `D`.
//!
//! The equations of motion are `dL/dq - d/dt(dL/dv) - dR/dv = 0`, and every
//! trajectory can be audited against the energy law `dH/dt = -D`.

pub mod audit;
pub mod cli;
pub mod dynamics;
pub mod expr;
pub mod model;
