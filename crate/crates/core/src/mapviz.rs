//! Point clouds of a layer applied to a uniform grid over a planar set.

use serde::{Deserialize, Serialize};

use crate::dispatch::{build_reduced_set, DispatchCase, Partition};
use crate::error::{Error, Result};
use crate::gauge::{sample_map_distribution, GaugeLayer, MappedPoint};
use crate::linalg::Matrix;
use crate::polytope::{LinearInequalitySet, RayExit, ShiftedSet};

/// `{u | a u <= b}` in the plane with an interior `center`. Also the JSON set-file format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanarSet {
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub center: Vec<f64>,
}

pub const PRESETS: [&str; 2] = ["triangle", "dispatch3"];

impl PlanarSet {
    pub fn preset(name: &str) -> Result<Self> {
        match name {
            // u1 >= 0, u2 >= 0, u1 + u2 <= 1.2
            "triangle" => Ok(Self {
                a: vec![vec![-1.0, 0.0], vec![0.0, -1.0], vec![1.0, 1.0]],
                b: vec![0.0, 0.0, 1.2],
                center: vec![0.3, 0.3],
            }),
            // Three unit-capacity generators serving 1.5, first one dependent.
            "dispatch3" => {
                let case = DispatchCase::new(
                    vec![0.0; 3],
                    vec![1.0; 3],
                    vec![1.0; 3],
                    vec![0.0; 3],
                    vec![1.5],
                )?;
                let rs = build_reduced_set(&case, &Partition::first(3)?)?;
                let x = [1.5];
                let anchored = rs.anchored(&x, None)?;
                let a = rs.set().a_mat();
                Ok(Self {
                    a: (0..a.rows()).map(|r| a.row(r).to_vec()).collect(),
                    b: rs.rhs(&x)?,
                    center: anchored.shifted.center().point().to_vec(),
                })
            }
            other => Err(Error::Invalid(format!(
                "unknown set preset '{other}'; expected one of {PRESETS:?}"
            ))),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    fn inequality_set(&self) -> Result<LinearInequalitySet> {
        let a = Matrix::from_rows(&self.a)?;
        if a.cols() != 2 || self.center.len() != 2 {
            return Err(Error::Invalid(format!(
                "map visualisation needs a 2-D set, got {} columns and a {}-D center",
                a.cols(),
                self.center.len()
            )));
        }
        LinearInequalitySet::fixed(a, self.b.clone())
    }

    /// Axis-aligned bounding box `[lo, hi]` from the polygon's vertices.
    pub fn bounding_box(&self) -> Result<([f64; 2], [f64; 2])> {
        let set = self.inequality_set()?;
        let shifted = ShiftedSet::new(&set, &[], self.center.clone())?;
        for d in [[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]] {
            if matches!(shifted.boundary_oracle(&d)?, RayExit::Unbounded) {
                return Err(Error::Geometry("set is unbounded".into()));
            }
        }
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        let m = self.a.len();
        for i in 0..m {
            for j in i + 1..m {
                let (a, b) = (&self.a[i], &self.a[j]);
                let det = a[0] * b[1] - a[1] * b[0];
                if det.abs() < 1e-14 {
                    continue;
                }
                let p = [
                    (self.b[i] * b[1] - a[1] * self.b[j]) / det,
                    (a[0] * self.b[j] - self.b[i] * b[0]) / det,
                ];
                let scale = 1.0 + p[0].abs() + p[1].abs();
                if set.contains(&[], &p, 1e-9 * scale)? {
                    for k in 0..2 {
                        lo[k] = lo[k].min(p[k]);
                        hi[k] = hi[k].max(p[k]);
                    }
                }
            }
        }
        if !(lo[0] < hi[0] && lo[1] < hi[1]) {
            return Err(Error::Geometry(
                "set has no two-dimensional interior".into(),
            ));
        }
        Ok((lo, hi))
    }
}

/// `resolution x resolution` points evenly spaced over `[-1, 1]^2`, first
/// coordinate varying slowest.
pub fn square_grid(resolution: usize) -> Result<Vec<Vec<f64>>> {
    if resolution < 2 {
        return Err(Error::Invalid(format!(
            "grid resolution must be at least 2, got {resolution}"
        )));
    }
    let step = 2.0 / (resolution - 1) as f64;
    let mut out = Vec::with_capacity(resolution * resolution);
    for i in 0..resolution {
        for j in 0..resolution {
            out.push(vec![-1.0 + i as f64 * step, -1.0 + j as f64 * step]);
        }
    }
    Ok(out)
}

/// Map every point of the square grid through `layer` onto `set`.
pub fn map_grid(
    layer: &GaugeLayer,
    set: &PlanarSet,
    resolution: usize,
) -> Result<Vec<MappedPoint>> {
    let base = set.inequality_set()?;
    let shifted = ShiftedSet::new(&base, &[], set.center.clone())?;
    sample_map_distribution(layer, &shifted, &square_grid(resolution)?)
}

pub fn to_csv(points: &[MappedPoint]) -> String {
    let mut out = String::from("v1,v2,u1,u2\n");
    for p in points {
        out.push_str(&format!(
            "{},{},{},{}\n",
            p.v_hat[0], p.v_hat[1], p.u[0], p.u[1]
        ));
    }
    out
}

/// Ratio of the largest to the smallest point count over the `bins x bins` cells
/// of the bounding box that lie strictly inside the set. Infinite when some
/// such cell is empty.
pub fn density_ratio(points: &[MappedPoint], set: &PlanarSet, bins: usize) -> Result<f64> {
    if bins == 0 {
        return Err(Error::Invalid("need at least one bin".into()));
    }
    let base = set.inequality_set()?;
    let (lo, hi) = set.bounding_box()?;
    let width = [(hi[0] - lo[0]) / bins as f64, (hi[1] - lo[1]) / bins as f64];
    let mut counts = vec![0usize; bins * bins];
    for p in points {
        let cell = |k: usize| -> Option<usize> {
            let t = (p.u[k] - lo[k]) / width[k];
            (t >= 0.0 && t <= bins as f64).then(|| (t.floor() as usize).min(bins - 1))
        };
        if let (Some(i), Some(j)) = (cell(0), cell(1)) {
            counts[i * bins + j] += 1;
        }
    }
    let strictly_inside = |u: [f64; 2]| -> Result<bool> {
        let residual = base.residuals_with_rhs(base.b_vec(), &u)?;
        Ok(residual.iter().all(|&r| r < -1e-12))
    };
    let mut max = 0usize;
    let mut min = usize::MAX;
    for i in 0..bins {
        for j in 0..bins {
            let x0 = lo[0] + i as f64 * width[0];
            let y0 = lo[1] + j as f64 * width[1];
            let corners = [
                [x0, y0],
                [x0 + width[0], y0],
                [x0, y0 + width[1]],
                [x0 + width[0], y0 + width[1]],
            ];
            let mut inside = true;
            for c in corners {
                inside &= strictly_inside(c)?;
            }
            if inside {
                let c = counts[i * bins + j];
                max = max.max(c);
                min = min.min(c);
            }
        }
    }
    if min == usize::MAX {
        return Err(Error::Geometry("no bin lies inside the set".into()));
    }
    Ok(if min == 0 {
        f64::INFINITY
    } else {
        max as f64 / min as f64
    })
}
