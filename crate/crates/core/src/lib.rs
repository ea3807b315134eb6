//! Grain-boundary network coarsening with dynamic lattice misorientations:
//! a single triple junction model with its stability analysis, a periodic
//! network simulator, and statistics on the resulting microstructure.

pub mod cli_io;
pub mod error;
pub mod geometry;
pub mod junction_dynamics;
pub mod linear_stability;
pub mod microstructure;
pub mod network_sim;
pub mod ode;
pub mod statistics;
pub mod surface_tension;
pub mod vec2;

pub use error::{Error, Result};
pub use geometry::{AnchorTriangle, EquilibriumState};
pub use junction_dynamics::{JunctionState, JunctionSystem, Trajectory};
pub use linear_stability::LinearizedSystem;
pub use surface_tension::SurfaceTensionModel;
pub use vec2::Vec2;
