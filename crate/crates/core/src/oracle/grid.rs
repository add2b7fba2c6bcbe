use crate::dispatch::{equality_completion, DispatchCase, Partition};
use crate::error::{Error, Result};
use crate::linalg::sum;

const MAX_GRID_GENERATORS: usize = 3;

fn axis(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let mut values = Vec::new();
    let mut k = 0usize;
    loop {
        let v = lo + k as f64 * step;
        if v > hi {
            break;
        }
        values.push(v);
        k += 1;
    }
    if values.last().is_some_and(|&v| v < hi) {
        values.push(hi);
    }
    values
}

/// Exhaustive minimizer over a grid of the independent generators, with the
/// first generator completing the balance. `None` when the demand is infeasible.
pub fn grid_search_oracle(case: &DispatchCase, x: &[f64], step: f64) -> Result<Option<Vec<f64>>> {
    let g = case.generators();
    if g > MAX_GRID_GENERATORS {
        return Err(Error::GridTooLarge(g));
    }
    if !(step > 0.0) {
        return Err(Error::Invalid(format!(
            "grid step must be positive, got {step}"
        )));
    }
    let demand = case.net_demand(x)?;
    let eps = 1e-12 * (1.0 + demand.abs());
    if demand < case.total_min() - eps || demand > case.total_max() + eps {
        return Ok(None);
    }

    let partition = Partition::first(g)?;
    let dep = partition.dep_index();
    let axes: Vec<Vec<f64>> = partition
        .ind_indices()
        .iter()
        .map(|&i| axis(case.u_min()[i], case.u_max()[i], step))
        .collect();

    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut idx = vec![0usize; axes.len()];
    let mut point = vec![0.0; axes.len()];
    loop {
        for (k, &j) in idx.iter().enumerate() {
            point[k] = axes[k][j];
        }
        let u_dep = demand - sum(&point);
        if u_dep >= case.u_min()[dep] - eps && u_dep <= case.u_max()[dep] + eps {
            let u = equality_completion(&partition, demand, &point)?;
            let cost = case.cost(&u);
            if best.as_ref().map_or(true, |(c, _)| cost < *c) {
                best = Some((cost, u));
            }
        }
        // odometer increment
        let mut k = 0;
        loop {
            if k == idx.len() {
                return Ok(best.map(|(_, u)| u));
            }
            idx[k] += 1;
            if idx[k] < axes[k].len() {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}
