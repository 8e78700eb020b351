//! Hydrodynamically coupled spheres in Stokes flow: passive particles steered
//! by actuated ones.

pub mod binary_control;
pub mod dynamics;
pub mod error;
pub mod hydro;
pub mod kinetic;
pub mod lie;
pub mod planner;

pub use dynamics::{integrate, integrate_with, ControlSignal, Integrator, Stepper, Trajectory};
pub use error::{Error, Result, SeparationViolation};
pub use hydro::{
    is_well_separated, min_separation, mobility_stack, stokeslet, InteractionTensor, Mat3, PairIndex,
    ParticleConfiguration, Vec3,
};
