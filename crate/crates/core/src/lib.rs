//! Discrete-velocity BGK kinetic solver with projective Runge-Kutta time integration.
//!
//! The distribution `f(x, v)` lives on a finite-volume spatial grid times a tensor velocity
//! grid and obeys `f_t + v·∇x f = (M[f] − f)/ε`. For small ε the collision term is stiff;
//! projective integrators damp it with a few short inner forward Euler steps and then take a
//! long extrapolation step at the transport scale.

pub mod bgk_rhs;
pub mod cli;
pub mod config;
pub mod error;
pub mod integrators;
pub mod linear_analysis;
pub mod output;
pub mod phase_space;
pub mod scenarios;
pub mod transport;

pub use bgk_rhs::{BgkOperator, Stiffness};
pub use config::{parse_config, ScenarioConfig};
pub use error::{Error, Result};
pub use integrators::{integrate, ButcherTableau, Method, OdeSystem, ProjectiveParameters, RunOptions};
pub use phase_space::{DistributionField, MaxwellianMode, PhaseSpace, SpatialGrid, VelocityGrid};
pub use transport::ReconstructionOrder;
