//! Exact reference solvers: dispatch labels, Euclidean projection onto the
//! reduced set, and a brute-force grid search used to validate both.

mod grid;
mod lambda;
mod projection;

pub use grid::grid_search_oracle;
pub use lambda::{kkt_certificate, solve_dispatch_exact, DispatchSolution};
pub use projection::{
    dykstra, project_onto_reduced_set, reduced_set_pieces, ConvexPiece, ProjectionOptions,
};
