//! Adaptive mixed finite elements for a Darcy--Forchheimer flow model coupled
//! to a stationary heat equation with Dirac point sources.
//!
//! The crate provides:
//! - conforming 2D triangulations with longest-edge bisection refinement ([`mesh`]),
//! - quadrature rules on triangles and edges ([`quadrature`]),
//! - P0/P1 spaces and assembly of the coupled discrete system ([`fem`]),
//! - a sparse direct solver ([`sparse`]),
//! - the fixed-point iteration for the coupled system ([`coupled`]),
//! - residual a posteriori error indicators ([`estimator`]),
//! - the solve/estimate/mark/refine loop ([`adaptive`]),
//! - experiment configuration and VTK/CSV export ([`config`], [`vtk`]).

pub mod adaptive;
pub mod config;
pub mod coupled;
pub mod estimator;
pub mod fem;
pub mod mesh;
pub mod parallel;
pub mod quadrature;
pub mod sparse;
pub mod vtk;

pub use adaptive::{adaptive_loop, fit_rate, mark_max, AdaptiveOptions, AdaptiveRun, RunRecord};
pub use config::{Domain, ExperimentConfig, Preset};
pub use vtk::Snapshot;
pub use coupled::{picard_solve, CoupledState, PicardOptions};
pub use estimator::{compute_indicators, IndicatorField};
pub use fem::{FeFunction, ProblemData, SpaceTag};
pub use mesh::{Mesh, PointLocation};
pub use quadrature::QuadRule;
pub use sparse::SparseMatrix;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Mesh(#[from] mesh::MeshError),
    #[error(transparent)]
    Quadrature(#[from] quadrature::QuadratureError),
    #[error(transparent)]
    LinAlg(#[from] sparse::LinAlgError),
    #[error(transparent)]
    Solve(#[from] coupled::SolveError),
    #[error(transparent)]
    Estimator(#[from] estimator::EstimatorError),
    #[error(transparent)]
    Adaptive(#[from] adaptive::AdaptiveError),
    #[error(transparent)]
    Config(#[from] config::ConfigError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
