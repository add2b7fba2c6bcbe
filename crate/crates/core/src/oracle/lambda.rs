use serde::{Deserialize, Serialize};

use crate::dispatch::DispatchCase;
use crate::error::{Error, Result};
use crate::linalg::sum;

const BISECTION_CAP: usize = 200;

/// Optimal generation together with the system marginal price.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DispatchSolution {
    pub generation: Vec<f64>,
    pub marginal_price: f64,
}

/// Output of generator `i` when the system price is `lambda`.
///
/// Linear-cost units jump from minimum to maximum once the price exceeds `c1`.
fn response(case: &DispatchCase, i: usize, lambda: f64) -> f64 {
    let (lo, hi) = (case.u_min()[i], case.u_max()[i]);
    let c2 = case.cost_quadratic()[i];
    let c1 = case.cost_linear()[i];
    if c2 > 0.0 {
        ((lambda - c1) / (2.0 * c2)).clamp(lo, hi)
    } else if lambda > c1 {
        hi
    } else {
        lo
    }
}

fn total_response(case: &DispatchCase, lambda: f64) -> f64 {
    (0..case.generators())
        .map(|i| response(case, i, lambda))
        .sum()
}

/// Minimize `sum(c2 u^2 + c1 u)` subject to balance and generator limits.
///
/// Quadratic costs are solved by bisection on the equal-incremental-cost price
/// until the balance residual is within `tol`; all-linear cases use merit order.
pub fn solve_dispatch_exact(case: &DispatchCase, x: &[f64], tol: f64) -> Result<DispatchSolution> {
    if !(tol > 0.0) {
        return Err(Error::Invalid(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    let demand = case.net_demand(x)?;
    case.check_demand(demand)?;

    if case.cost_quadratic().iter().all(|&c| c == 0.0) {
        return Ok(merit_order(case, demand));
    }

    let g = case.generators();
    let marginal = |i: usize, u: f64| 2.0 * case.cost_quadratic()[i] * u + case.cost_linear()[i];
    let mut lo = (0..g)
        .map(|i| marginal(i, case.u_min()[i]))
        .fold(f64::INFINITY, f64::min)
        - 1.0;
    let mut hi = (0..g)
        .map(|i| marginal(i, case.u_max()[i]))
        .fold(f64::NEG_INFINITY, f64::max)
        + 1.0;

    for _ in 0..BISECTION_CAP {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let total = total_response(case, mid);
        if (total - demand).abs() <= tol {
            return Ok(DispatchSolution {
                generation: (0..g).map(|i| response(case, i, mid)).collect(),
                marginal_price: mid,
            });
        }
        if total < demand {
            lo = mid;
        } else {
            hi = mid;
        }
    }

    // The bracket collapsed onto the price of a linear-cost unit whose jump
    // straddles the demand; that unit (or units) covers the remainder.
    let mut generation: Vec<f64> = (0..g).map(|i| response(case, i, lo)).collect();
    let mut remaining = demand - sum(&generation);
    let mut marginal_units: Vec<usize> = (0..g)
        .filter(|&i| {
            let c1 = case.cost_linear()[i];
            case.cost_quadratic()[i] == 0.0 && c1 >= lo && c1 <= hi
        })
        .collect();
    marginal_units.sort_by(|&a, &b| case.cost_linear()[a].total_cmp(&case.cost_linear()[b]));
    let mut price = 0.5 * (lo + hi);
    for i in marginal_units {
        if remaining <= tol {
            break;
        }
        let room = case.u_max()[i] - generation[i];
        let take = remaining.min(room);
        generation[i] += take;
        remaining -= take;
        price = case.cost_linear()[i];
    }
    if remaining.abs() > tol {
        return Err(Error::NoConvergence {
            iterations: BISECTION_CAP,
            residual: remaining.abs(),
        });
    }
    Ok(DispatchSolution {
        generation,
        marginal_price: price,
    })
}

fn merit_order(case: &DispatchCase, demand: f64) -> DispatchSolution {
    let g = case.generators();
    let mut order: Vec<usize> = (0..g).collect();
    order.sort_by(|&a, &b| case.cost_linear()[a].total_cmp(&case.cost_linear()[b]));
    let mut generation = case.u_min().to_vec();
    let mut remaining = demand - case.total_min();
    let mut price = case.cost_linear()[order[0]];
    for i in order {
        if remaining <= 0.0 {
            break;
        }
        let take = remaining.min(case.u_max()[i] - case.u_min()[i]);
        generation[i] += take;
        remaining -= take;
        price = case.cost_linear()[i];
    }
    DispatchSolution {
        generation,
        marginal_price: price,
    }
}

/// Check optimality of `u` without reference to how it was computed.
///
/// Returns a price `lambda` certifying `u` at tolerance `10 * tol`: unclamped
/// units have marginal cost within `10 * tol` of `lambda`, units at their minimum
/// have marginal cost at least `lambda - 10 * tol`, units at their maximum at most
/// `lambda + 10 * tol`, and the balance holds to `10 * tol`. `None` if no such
/// price exists.
pub fn kkt_certificate(case: &DispatchCase, x: &[f64], u: &[f64], tol: f64) -> Result<Option<f64>> {
    crate::error::check_len("generation vector", case.generators(), u.len())?;
    let slack = 10.0 * tol;
    let demand = case.net_demand(x)?;
    if (sum(u) - demand).abs() > slack {
        return Ok(None);
    }
    let mut lower = f64::NEG_INFINITY;
    let mut upper = f64::INFINITY;
    for i in 0..u.len() {
        let (lo, hi) = (case.u_min()[i], case.u_max()[i]);
        if u[i] < lo - slack || u[i] > hi + slack {
            return Ok(None);
        }
        let mc = 2.0 * case.cost_quadratic()[i] * u[i] + case.cost_linear()[i];
        let at_low = u[i] - lo <= slack;
        let at_high = hi - u[i] <= slack;
        match (at_low, at_high) {
            (true, true) => {}
            (true, false) => upper = upper.min(mc + slack),
            (false, true) => lower = lower.max(mc - slack),
            (false, false) => {
                lower = lower.max(mc - slack);
                upper = upper.min(mc + slack);
            }
        }
    }
    if lower > upper {
        return Ok(None);
    }
    Ok(Some(match (lower.is_finite(), upper.is_finite()) {
        (true, true) => 0.5 * (lower + upper),
        (true, false) => lower,
        (false, true) => upper,
        (false, false) => 0.0,
    }))
}
