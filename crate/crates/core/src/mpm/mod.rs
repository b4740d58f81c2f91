//! The material point method solver.
//!
//! Each substep clears the grid, scatters particle mass, momentum and
//! stress impulse onto it with quadratic B-spline weights ([`p2g`]), turns
//! momentum into velocity under gravity and boundary conditions
//! ([`grid_update`]), gathers velocity and its affine part back to the
//! particles ([`g2p`]), and finally projects every particle's elastic
//! deformation gradient onto its material's admissible set.

mod grid;
mod kernel;
mod model;
mod particles;
mod solver;
mod trajectory;

pub use grid::{Grid, GridNode, GridSpec};
pub use kernel::Stencil;
pub use model::{ElasticModel, MaterialModel, SAND_POISSON_RATIO, SAND_YOUNGS_MODULUS};
pub use particles::{build_particles, read_particle_file, ParticleState};
pub use solver::{
    g2p, grid_update, p2g, refresh_stress, simulate, ConservationRecord, Diagnostics,
    ExecutionMode, OutOfDomain, SimError, Simulation, Solver, SolverOptions, StepConfig,
    SINGULAR_VALUE_FLOOR,
};
pub use trajectory::{
    read_trajectory, write_summary_csv, write_trajectory, FrameSummary, Snapshot, Trajectory,
    TrajectoryError, TRAJECTORY_MAGIC, TRAJECTORY_VERSION,
};
