//! Linearly-constrained sets `{u | A u <= B x + b}` and their Minkowski gauges.
//!
//! The context vector `x` enters only through the right-hand side, so most
//! evaluation paths take the precomputed right-hand side `B x + b` directly.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::linalg::{dot, Matrix};

/// Slacks at or below this value mean the center is not strictly interior.
pub const DENOMINATOR_FLOOR: f64 = 1e-12;

/// Rays that stay feasible past this length are reported as unbounded.
pub const RAY_LENGTH_CAP: f64 = 1e12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearInequalitySet {
    a_mat: Matrix,
    b_mat: Matrix,
    b_vec: Vec<f64>,
}

impl LinearInequalitySet {
    pub fn new(a_mat: Matrix, b_mat: Matrix, b_vec: Vec<f64>) -> Result<Self> {
        if a_mat.rows() == 0 || a_mat.cols() == 0 {
            return Err(Error::Invalid(
                "constraint matrix needs at least one row and one column".into(),
            ));
        }
        check_len("context matrix rows", a_mat.rows(), b_mat.rows())?;
        check_len("offset vector", a_mat.rows(), b_vec.len())?;
        Ok(Self {
            a_mat,
            b_mat,
            b_vec,
        })
    }

    /// A set with no context dependence: `{u | A u <= b}`.
    pub fn fixed(a_mat: Matrix, b_vec: Vec<f64>) -> Result<Self> {
        let m = a_mat.rows();
        Self::new(a_mat, Matrix::zeros(m, 0), b_vec)
    }

    /// Axis-aligned box `lo <= u <= hi`, rows ordered `[I; -I]`.
    pub fn boxed(lo: &[f64], hi: &[f64]) -> Result<Self> {
        check_len("box bounds", lo.len(), hi.len())?;
        let n = lo.len();
        let mut a = Matrix::zeros(2 * n, n);
        let mut b = Vec::with_capacity(2 * n);
        for i in 0..n {
            a[(i, i)] = 1.0;
            b.push(hi[i]);
        }
        for i in 0..n {
            a[(n + i, i)] = -1.0;
            b.push(-lo[i]);
        }
        Self::fixed(a, b)
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.a_mat.rows()
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.a_mat.cols()
    }

    #[inline]
    pub fn context_dim(&self) -> usize {
        self.b_mat.cols()
    }

    pub fn a_mat(&self) -> &Matrix {
        &self.a_mat
    }

    pub fn b_mat(&self) -> &Matrix {
        &self.b_mat
    }

    pub fn b_vec(&self) -> &[f64] {
        &self.b_vec
    }

    /// `B x + b`.
    pub fn rhs(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len("context vector", self.context_dim(), x.len())?;
        let mut out = self.b_mat.mul_vec(x)?;
        for (o, b) in out.iter_mut().zip(&self.b_vec) {
            *o += b;
        }
        Ok(out)
    }

    /// `A u - rhs`, one entry per row; positive entries are violations.
    pub fn residuals_with_rhs(&self, rhs: &[f64], u: &[f64]) -> Result<Vec<f64>> {
        check_len("right-hand side", self.rows(), rhs.len())?;
        let mut out = self.a_mat.mul_vec(u)?;
        for (o, r) in out.iter_mut().zip(rhs) {
            *o -= r;
        }
        Ok(out)
    }

    pub fn contains(&self, x: &[f64], u: &[f64], tol: f64) -> Result<bool> {
        let rhs = self.rhs(x)?;
        self.contains_rhs(&rhs, u, tol)
    }

    pub fn contains_rhs(&self, rhs: &[f64], u: &[f64], tol: f64) -> Result<bool> {
        if !(tol >= 0.0) {
            return Err(Error::Invalid(format!("tolerance must be >= 0, got {tol}")));
        }
        Ok(self.residuals_with_rhs(rhs, u)?.iter().all(|&r| r <= tol))
    }
}

/// A strictly feasible anchor together with its per-row slack `rhs - A point`.
#[derive(Debug, Clone, PartialEq)]
pub struct InteriorPoint {
    point: Vec<f64>,
    slack: Vec<f64>,
}

impl InteriorPoint {
    pub fn new(set: &LinearInequalitySet, rhs: &[f64], point: Vec<f64>) -> Result<Self> {
        let residual = set.residuals_with_rhs(rhs, &point)?;
        let slack: Vec<f64> = residual.iter().map(|r| -r).collect();
        if let Some((row, &s)) = slack
            .iter()
            .enumerate()
            .find(|(_, &s)| !(s > DENOMINATOR_FLOOR))
        {
            return Err(Error::NotInterior { row, slack: s });
        }
        Ok(Self { point, slack })
    }

    pub fn point(&self) -> &[f64] {
        &self.point
    }

    pub fn slack(&self) -> &[f64] {
        &self.slack
    }
}

/// Value of a max-type gauge together with the row that attains it.
///
/// Ties resolve to the lowest row index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArgMax {
    pub value: f64,
    pub row: usize,
}

/// The base set translated so that its interior point sits at the origin.
#[derive(Debug, Clone)]
pub struct ShiftedSet<'a> {
    base: &'a LinearInequalitySet,
    rhs: Vec<f64>,
    center: InteriorPoint,
}

impl<'a> ShiftedSet<'a> {
    pub fn new(base: &'a LinearInequalitySet, x: &[f64], center: Vec<f64>) -> Result<Self> {
        let rhs = base.rhs(x)?;
        Self::from_rhs(base, rhs, center)
    }

    pub fn from_rhs(
        base: &'a LinearInequalitySet,
        rhs: Vec<f64>,
        center: Vec<f64>,
    ) -> Result<Self> {
        let center = InteriorPoint::new(base, &rhs, center)?;
        Ok(Self { base, rhs, center })
    }

    pub fn base(&self) -> &LinearInequalitySet {
        self.base
    }

    pub fn rhs(&self) -> &[f64] {
        &self.rhs
    }

    pub fn center(&self) -> &InteriorPoint {
        &self.center
    }

    pub fn dim(&self) -> usize {
        self.base.dim()
    }

    /// Minkowski gauge of `v` on the shifted set: `max_r (A^r v) / slack^r`.
    ///
    /// Not clamped at zero; directions pointing into every row give negative values.
    pub fn gauge(&self, v: &[f64]) -> Result<f64> {
        Ok(self.gauge_argmax(v)?.value)
    }

    pub fn gauge_argmax(&self, v: &[f64]) -> Result<ArgMax> {
        check_len("gauge argument", self.dim(), v.len())?;
        let a = self.base.a_mat();
        let slack = self.center.slack();
        let mut best = ArgMax {
            value: f64::NEG_INFINITY,
            row: 0,
        };
        for r in 0..a.rows() {
            let val = dot(a.row(r), v) / slack[r];
            if val > best.value {
                best = ArgMax { value: val, row: r };
            }
        }
        Ok(best)
    }

    /// Row `r` of `A` divided by its slack; the gradient of the gauge when `r` is active.
    pub fn scaled_normal(&self, row: usize) -> Vec<f64> {
        let s = self.center.slack()[row];
        self.base.a_mat().row(row).iter().map(|a| a / s).collect()
    }

    /// Membership of `center + v` in the base set.
    pub fn contains_offset(&self, v: &[f64], tol: f64) -> Result<bool> {
        check_len("offset", self.dim(), v.len())?;
        let u: Vec<f64> = self
            .center
            .point()
            .iter()
            .zip(v)
            .map(|(c, d)| c + d)
            .collect();
        self.base.contains_rhs(&self.rhs, &u, tol)
    }

    /// Distance along `direction` from the center to the boundary, found by
    /// bisection on plain membership tests.
    ///
    /// Independent of [`ShiftedSet::gauge`]; used to cross-check it.
    pub fn boundary_oracle(&self, direction: &[f64]) -> Result<RayExit> {
        check_len("ray direction", self.dim(), direction.len())?;
        if direction.iter().all(|&d| d == 0.0) {
            return Err(Error::Invalid("ray direction must be nonzero".into()));
        }
        let inside = |t: f64| -> Result<bool> {
            let step: Vec<f64> = direction.iter().map(|d| t * d).collect();
            self.contains_offset(&step, 0.0)
        };

        let mut lo = 0.0;
        let mut hi = 1.0;
        while inside(hi)? {
            lo = hi;
            hi *= 2.0;
            if hi > RAY_LENGTH_CAP {
                return Ok(RayExit::Unbounded);
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi || hi - lo <= 1e-14 * hi.max(1.0) {
                break;
            }
            if inside(mid)? {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(RayExit::Boundary(0.5 * (lo + hi)))
    }
}

/// Result of walking a ray from the center of a shifted set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RayExit {
    Boundary(f64),
    Unbounded,
}

/// The l-infinity norm, i.e. the gauge of the unit box.
pub fn unit_ball_gauge(v: &[f64]) -> Result<f64> {
    Ok(unit_ball_argmax(v)?.value)
}

/// Like [`unit_ball_gauge`] but also reports which component attains the max.
pub fn unit_ball_argmax(v: &[f64]) -> Result<ArgMax> {
    if v.is_empty() {
        return Err(Error::Invalid("unit-ball gauge of an empty vector".into()));
    }
    let mut best = ArgMax {
        value: v[0].abs(),
        row: 0,
    };
    for (i, x) in v.iter().enumerate().skip(1) {
        if x.abs() > best.value {
            best = ArgMax {
                value: x.abs(),
                row: i,
            };
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn unit_interval() -> LinearInequalitySet {
        // u <= 1, -u <= 0
        LinearInequalitySet::fixed(
            Matrix::from_rows(&[vec![1.0], vec![-1.0]]).unwrap(),
            vec![1.0, 0.0],
        )
        .unwrap()
    }

    fn half_to_three_halves() -> LinearInequalitySet {
        LinearInequalitySet::boxed(&[0.5], &[1.5]).unwrap()
    }

    #[test]
    fn contains_examples() {
        let s = unit_interval();
        assert!(s.contains(&[], &[0.5], 0.0).unwrap());
        assert!(s.contains(&[], &[1.0 + 1e-12], 1e-9).unwrap());
        assert!(!s.contains(&[], &[1.1], 1e-9).unwrap());
    }

    #[test]
    fn contains_rejects_dimension_mismatch() {
        let s = unit_interval();
        assert!(matches!(
            s.contains(&[], &[0.5, 0.5], 0.0),
            Err(Error::Dimension { .. })
        ));
        assert!(s.contains(&[1.0], &[0.5], 0.0).is_err());
    }

    #[test]
    fn unit_ball_gauge_examples() {
        assert_eq!(unit_ball_gauge(&[0.3, -0.8]).unwrap(), 0.8);
        assert_eq!(unit_ball_gauge(&[0.0, 0.0, 0.0]).unwrap(), 0.0);
        assert_eq!(unit_ball_gauge(&[-2.5]).unwrap(), 2.5);
        assert!(unit_ball_gauge(&[]).is_err());
    }

    #[test]
    fn unit_ball_ties_pick_lowest_index() {
        assert_eq!(unit_ball_argmax(&[0.5, -0.5, 0.5]).unwrap().row, 0);
    }

    #[test]
    fn shifted_gauge_examples() {
        let base = half_to_three_halves();
        let s = ShiftedSet::new(&base, &[], vec![1.0]).unwrap();
        assert_eq!(s.center().slack(), &[0.5, 0.5]);
        assert_abs_diff_eq!(s.gauge(&[0.25]).unwrap(), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(s.gauge(&[2.0]).unwrap(), 4.0, epsilon = 1e-15);
        assert_eq!(s.gauge(&[0.0]).unwrap(), 0.0);
    }

    #[test]
    fn gauge_may_be_negative() {
        // Only an upper bound on u1 + u2; pointing away from it gives a negative gauge.
        let base = LinearInequalitySet::fixed(
            Matrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 0.0]]).unwrap(),
            vec![1.0, 1.0],
        )
        .unwrap();
        let s = ShiftedSet::new(&base, &[], vec![0.0, 0.0]).unwrap();
        assert!(s.gauge(&[-1.0, 0.0]).unwrap() < 0.0);
    }

    #[test]
    fn boundary_center_is_rejected() {
        let base = half_to_three_halves();
        let err = ShiftedSet::new(&base, &[], vec![1.5]).unwrap_err();
        assert!(matches!(err, Error::NotInterior { row: 0, .. }));
    }

    #[test]
    fn oracle_examples() {
        let base = half_to_three_halves();
        let s = ShiftedSet::new(&base, &[], vec![1.0]).unwrap();
        let RayExit::Boundary(t) = s.boundary_oracle(&[1.0]).unwrap() else {
            panic!("bounded set")
        };
        assert_abs_diff_eq!(t, 0.5, epsilon = 1e-10);
        let RayExit::Boundary(t) = s.boundary_oracle(&[-1.0]).unwrap() else {
            panic!("bounded set")
        };
        assert_abs_diff_eq!(t, 0.5, epsilon = 1e-10);

        let square = LinearInequalitySet::boxed(&[-1.0, -1.0], &[1.0, 1.0]).unwrap();
        let s = ShiftedSet::new(&square, &[], vec![0.0, 0.0]).unwrap();
        let d = [1.0 / 2f64.sqrt(), 1.0 / 2f64.sqrt()];
        let RayExit::Boundary(t) = s.boundary_oracle(&d).unwrap() else {
            panic!("bounded set")
        };
        assert_abs_diff_eq!(t, 2f64.sqrt(), epsilon = 1e-8);
        assert_abs_diff_eq!(t, 1.0 / s.gauge(&d).unwrap(), epsilon = 1e-8);
    }

    #[test]
    fn oracle_signals_unbounded_rays() {
        let half_plane =
            LinearInequalitySet::fixed(Matrix::from_rows(&[vec![1.0, 0.0]]).unwrap(), vec![1.0])
                .unwrap();
        let s = ShiftedSet::new(&half_plane, &[], vec![0.0, 0.0]).unwrap();
        assert_eq!(s.boundary_oracle(&[0.0, 1.0]).unwrap(), RayExit::Unbounded);
        assert!(s.boundary_oracle(&[0.0, 0.0]).is_err());
    }

    #[test]
    fn context_enters_through_rhs() {
        // u <= x1 + 1
        let set = LinearInequalitySet::new(
            Matrix::from_rows(&[vec![1.0]]).unwrap(),
            Matrix::from_rows(&[vec![1.0]]).unwrap(),
            vec![1.0],
        )
        .unwrap();
        assert!(set.contains(&[1.0], &[1.9], 0.0).unwrap());
        assert!(!set.contains(&[0.0], &[1.9], 0.0).unwrap());
    }
}
