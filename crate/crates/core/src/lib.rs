//! Traveling waves of the shallow-water equation u_t + u u_x + P_x = 0 with
//! P - P_xx = u^2 + u_x^2 / 2: exact profile families (peakons, cuspons,
//! stumpons, periodic and decaying), the nonlocal pressure, a conservative
//! Lagrangian reformulation with an energy-carrying coordinate, time
//! stepping, and diagnostics for the weak formulation and flux balance.

pub mod analysis;
pub mod error;
pub mod evolution;
pub mod helmholtz;
pub mod io;
pub mod lagrangian;
pub mod plot;
pub mod profiles;
pub mod quad;
pub mod scenario;

pub use error::{ChError, Result};
