use crate::dispatch::ReducedSet;
use crate::error::{check_len, Error, Result};
use crate::linalg::dot;

/// A closed convex set with a closed-form Euclidean projection.
#[derive(Debug, Clone, PartialEq)]
pub enum ConvexPiece {
    /// `{u | normal . u <= offset}`
    HalfSpace { normal: Vec<f64>, offset: f64 },
    /// `{u | lo <= u <= hi}`
    Box { lo: Vec<f64>, hi: Vec<f64> },
}

impl ConvexPiece {
    fn project_in_place(&self, u: &mut [f64]) {
        match self {
            ConvexPiece::HalfSpace { normal, offset } => {
                let excess = dot(normal, u) - offset;
                if excess > 0.0 {
                    let scale = excess / dot(normal, normal);
                    for (x, a) in u.iter_mut().zip(normal) {
                        *x -= scale * a;
                    }
                }
            }
            ConvexPiece::Box { lo, hi } => {
                for ((x, l), h) in u.iter_mut().zip(lo).zip(hi) {
                    *x = x.clamp(*l, *h);
                }
            }
        }
    }

    fn violation(&self, u: &[f64]) -> f64 {
        match self {
            ConvexPiece::HalfSpace { normal, offset } => (dot(normal, u) - offset).max(0.0),
            ConvexPiece::Box { lo, hi } => u
                .iter()
                .zip(lo)
                .zip(hi)
                .fold(0.0_f64, |m, ((x, l), h)| m.max(l - x).max(x - h)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectionOptions {
    /// Stop once a full sweep moves the iterate by at most this much (l-infinity)
    /// and no piece is violated by more than it.
    pub tol: f64,
    pub max_iterations: usize,
}

impl Default for ProjectionOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iterations: 10_000,
        }
    }
}

/// Euclidean projection onto the intersection of `pieces` by Dykstra's
/// alternating projections.
pub fn dykstra(pieces: &[ConvexPiece], v: &[f64], opts: ProjectionOptions) -> Result<Vec<f64>> {
    let n = v.len();
    for piece in pieces {
        match piece {
            ConvexPiece::HalfSpace { normal, .. } => {
                check_len("halfspace normal", n, normal.len())?
            }
            ConvexPiece::Box { lo, hi } => {
                check_len("box lower bound", n, lo.len())?;
                check_len("box upper bound", n, hi.len())?;
            }
        }
    }
    let mut x = v.to_vec();
    let mut increments = vec![vec![0.0; n]; pieces.len()];
    let mut y = vec![0.0; n];
    let mut residual = f64::INFINITY;
    for _ in 0..opts.max_iterations {
        let mut moved = 0.0_f64;
        for (piece, p) in pieces.iter().zip(increments.iter_mut()) {
            for k in 0..n {
                y[k] = x[k] + p[k];
            }
            let before = y.clone();
            piece.project_in_place(&mut y);
            for k in 0..n {
                p[k] = before[k] - y[k];
                moved = moved.max((y[k] - x[k]).abs());
                x[k] = y[k];
            }
        }
        let violation = pieces
            .iter()
            .map(|piece| piece.violation(&x))
            .fold(0.0_f64, f64::max);
        residual = moved.max(violation);
        if residual <= opts.tol {
            return Ok(x);
        }
    }
    Err(Error::NoConvergence {
        iterations: opts.max_iterations,
        residual,
    })
}

/// The reduced set as two halfspaces (the dependent unit's limits) and one box
/// (the independent units' limits).
pub fn reduced_set_pieces(rs: &ReducedSet, x: &[f64]) -> Result<Vec<ConvexPiece>> {
    let rhs = rs.rhs(x)?;
    let n = rs.dim();
    let lo: Vec<f64> = (0..n).map(|j| -rhs[n + 2 + j]).collect();
    let hi: Vec<f64> = (0..n).map(|j| rhs[1 + j]).collect();
    Ok(vec![
        ConvexPiece::HalfSpace {
            normal: vec![-1.0; n],
            offset: rhs[0],
        },
        ConvexPiece::Box { lo, hi },
        ConvexPiece::HalfSpace {
            normal: vec![1.0; n],
            offset: rhs[n + 1],
        },
    ])
}

/// Euclidean projection of `v` onto the reduced set for loads `x`.
pub fn project_onto_reduced_set(
    rs: &ReducedSet,
    x: &[f64],
    v: &[f64],
    tol: f64,
) -> Result<Vec<f64>> {
    check_len("projection input", rs.dim(), v.len())?;
    let pieces = reduced_set_pieces(rs, x)?;
    dykstra(
        &pieces,
        v,
        ProjectionOptions {
            tol,
            ..ProjectionOptions::default()
        },
    )
}
