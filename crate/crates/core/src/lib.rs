//! Semiclassical dynamics of a two-level atom in a tilted optical lattice:
//! trajectories, finite-time Lyapunov exponents, exit-time scattering
//! functions and exit-time statistics.

pub mod dynamics;
pub mod integrator;
pub mod lyapunov;
pub mod orchestrator;
pub mod parallel;
pub mod scattering;
pub mod statistics;

pub use dynamics::{AtomState, ControlParams, PhysicalParams, TangentVector};
pub use integrator::{integrate, integrate_with_tangent, IntegratorSettings, TrajectoryRecord};
pub use parallel::Workers;
