//! Synthesis and certification of polyhedral robust positively invariant sets for
//! constrained linear parameter-varying systems under incremental output feedback.

pub mod bilinear;
pub mod certification;
pub mod closed_loop;
pub mod conditions;
pub mod error;
pub mod lp;
pub mod matrix;
pub mod plant;
pub mod polyhedron;
pub mod polytope_algebra;
pub mod scalar;
pub mod simulation;
pub mod synthesis;

pub use error::{Error, Result};
pub use scalar::Real;

/// Double-precision aliases.
pub type Mat = matrix::Matrix<f64>;
pub type Weights = polytope_algebra::Simplex<f64>;
pub type Polytope = polytope_algebra::MatrixPolytope<f64>;
pub type Grid = polytope_algebra::BlockGrid<f64>;
pub type Lp = lp::LpProblem<f64>;
pub type Polyhedron = polyhedron::HPolyhedron<f64>;
pub type Problem = plant::LpvProblem<f64>;
pub type Gains = closed_loop::GainSchedule<f64>;
