//! The economic dispatch problem, its equality completion, and the reduced
//! inequality set over the independent generators.
//!
//! All quantities are per-unit. Loads enter the constraints only through their
//! total, but the full load vector is kept because it is the model input.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::linalg::{sq_dist, sum, Matrix};
use crate::polytope::{InteriorPoint, LinearInequalitySet, ShiftedSet};

/// One dispatch instance: generator limits, quadratic costs and nominal nodal loads.
///
/// `fixed_output` is the total injection of must-run units whose limits coincide;
/// those units are not decision variables, so the balance reads
/// `sum(u) + fixed_output = sum(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CaseData", into = "CaseData")]
pub struct DispatchCase {
    u_min: Vec<f64>,
    u_max: Vec<f64>,
    cost_quadratic: Vec<f64>,
    cost_linear: Vec<f64>,
    loads_nominal: Vec<f64>,
    fixed_output: f64,
}

#[derive(Serialize, Deserialize)]
struct CaseData {
    u_min: Vec<f64>,
    u_max: Vec<f64>,
    cost_quadratic: Vec<f64>,
    cost_linear: Vec<f64>,
    loads_nominal: Vec<f64>,
    #[serde(default)]
    fixed_output: f64,
}

impl TryFrom<CaseData> for DispatchCase {
    type Error = Error;

    fn try_from(d: CaseData) -> Result<Self> {
        DispatchCase::new(
            d.u_min,
            d.u_max,
            d.cost_quadratic,
            d.cost_linear,
            d.loads_nominal,
        )?
        .with_fixed_output(d.fixed_output)
    }
}

impl From<DispatchCase> for CaseData {
    fn from(c: DispatchCase) -> Self {
        CaseData {
            u_min: c.u_min,
            u_max: c.u_max,
            cost_quadratic: c.cost_quadratic,
            cost_linear: c.cost_linear,
            loads_nominal: c.loads_nominal,
            fixed_output: c.fixed_output,
        }
    }
}

impl DispatchCase {
    pub fn new(
        u_min: Vec<f64>,
        u_max: Vec<f64>,
        cost_quadratic: Vec<f64>,
        cost_linear: Vec<f64>,
        loads_nominal: Vec<f64>,
    ) -> Result<Self> {
        let g = u_min.len();
        if g < 2 {
            return Err(Error::Invalid(format!(
                "need at least 2 dispatchable generators, got {g}"
            )));
        }
        check_len("u_max", g, u_max.len())?;
        check_len("cost_quadratic", g, cost_quadratic.len())?;
        check_len("cost_linear", g, cost_linear.len())?;
        for i in 0..g {
            if !(u_min[i] <= u_max[i]) {
                return Err(Error::Invalid(format!(
                    "generator {i}: u_min {} exceeds u_max {}",
                    u_min[i], u_max[i]
                )));
            }
            if cost_quadratic[i] < 0.0 {
                return Err(Error::NonConvexCost(i));
            }
            if !cost_quadratic[i].is_finite() || !cost_linear[i].is_finite() {
                return Err(Error::Invalid(format!("generator {i}: non-finite cost")));
            }
        }
        Ok(Self {
            u_min,
            u_max,
            cost_quadratic,
            cost_linear,
            loads_nominal,
            fixed_output: 0.0,
        })
    }

    pub fn with_fixed_output(mut self, fixed_output: f64) -> Result<Self> {
        if !fixed_output.is_finite() {
            return Err(Error::Invalid("fixed output must be finite".into()));
        }
        self.fixed_output = fixed_output;
        Ok(self)
    }

    /// Number of dispatchable generators.
    pub fn generators(&self) -> usize {
        self.u_min.len()
    }

    /// Number of load nodes.
    pub fn nodes(&self) -> usize {
        self.loads_nominal.len()
    }

    pub fn u_min(&self) -> &[f64] {
        &self.u_min
    }

    pub fn u_max(&self) -> &[f64] {
        &self.u_max
    }

    pub fn cost_quadratic(&self) -> &[f64] {
        &self.cost_quadratic
    }

    pub fn cost_linear(&self) -> &[f64] {
        &self.cost_linear
    }

    pub fn loads_nominal(&self) -> &[f64] {
        &self.loads_nominal
    }

    pub fn fixed_output(&self) -> f64 {
        self.fixed_output
    }

    pub fn total_min(&self) -> f64 {
        sum(&self.u_min)
    }

    pub fn total_max(&self) -> f64 {
        sum(&self.u_max)
    }

    /// Demand the dispatchable units must cover: `sum(x) - fixed_output`.
    pub fn net_demand(&self, x: &[f64]) -> Result<f64> {
        check_len("load vector", self.nodes(), x.len())?;
        Ok(sum(x) - self.fixed_output)
    }

    pub fn cost(&self, u: &[f64]) -> f64 {
        u.iter()
            .zip(&self.cost_quadratic)
            .zip(&self.cost_linear)
            .map(|((u, c2), c1)| c2 * u * u + c1 * u)
            .sum()
    }

    /// Fails unless the demand lies strictly between total minimum and maximum capacity.
    pub fn check_demand(&self, demand: f64) -> Result<()> {
        let (lo, hi) = (self.total_min(), self.total_max());
        if hi == lo {
            return Err(Error::DegenerateCapacity(hi));
        }
        if !(demand > lo && demand < hi) {
            return Err(Error::InfeasibleDemand {
                demand,
                min_capacity: lo,
                max_capacity: hi,
            });
        }
        Ok(())
    }
}

/// Proportional interior solution: every unit sits at the same fraction of its range.
pub fn intuitive_solution(case: &DispatchCase, x: &[f64]) -> Result<Vec<f64>> {
    let demand = case.net_demand(x)?;
    case.check_demand(demand)?;
    let ratio = (demand - case.total_min()) / (case.total_max() - case.total_min());
    Ok(case
        .u_min
        .iter()
        .zip(&case.u_max)
        .map(|(lo, hi)| lo + ratio * (hi - lo))
        .collect())
}

/// Generalization of [`intuitive_solution`] where generator `i` moves `weights[i]`
/// times as far through its range as the others. Unit weights give the intuitive
/// solution back.
pub fn weighted_interior_solution(
    case: &DispatchCase,
    x: &[f64],
    weights: &[f64],
) -> Result<Vec<f64>> {
    check_len("center weights", case.generators(), weights.len())?;
    if weights.iter().any(|w| !(*w > 0.0)) {
        return Err(Error::Invalid("center weights must be positive".into()));
    }
    let demand = case.net_demand(x)?;
    case.check_demand(demand)?;
    let spread: f64 = (0..case.generators())
        .map(|i| weights[i] * (case.u_max[i] - case.u_min[i]))
        .sum();
    let ratio = (demand - case.total_min()) / spread;
    Ok((0..case.generators())
        .map(|i| case.u_min[i] + ratio * weights[i] * (case.u_max[i] - case.u_min[i]))
        .collect())
}

/// Which generator is eliminated by the balance equation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    dep_index: usize,
    ind_indices: Vec<usize>,
}

impl Partition {
    pub fn new(dep_index: usize, generators: usize) -> Result<Self> {
        if generators < 2 {
            return Err(Error::Invalid(
                "partition needs at least 2 generators".into(),
            ));
        }
        if dep_index >= generators {
            return Err(Error::Invalid(format!(
                "dependent index {dep_index} out of range for {generators} generators"
            )));
        }
        Ok(Self {
            dep_index,
            ind_indices: (0..generators).filter(|&i| i != dep_index).collect(),
        })
    }

    /// The first generator is dependent.
    pub fn first(generators: usize) -> Result<Self> {
        Self::new(0, generators)
    }

    /// The generator with the widest `u_max - u_min` is dependent (lowest index
    /// on ties). A narrow dependent unit squeezes the reduced set into a thin
    /// slab around the balance hyperplane.
    pub fn widest(case: &DispatchCase) -> Result<Self> {
        let g = case.generators();
        let mut best = 0;
        for i in 1..g {
            if case.u_max()[i] - case.u_min()[i] > case.u_max()[best] - case.u_min()[best] {
                best = i;
            }
        }
        Self::new(best, g)
    }

    pub fn dep_index(&self) -> usize {
        self.dep_index
    }

    pub fn ind_indices(&self) -> &[usize] {
        &self.ind_indices
    }

    pub fn generators(&self) -> usize {
        self.ind_indices.len() + 1
    }

    /// `n_Ind`, the number of free variables.
    pub fn n_ind(&self) -> usize {
        self.ind_indices.len()
    }

    pub fn independent(&self, u: &[f64]) -> Result<Vec<f64>> {
        check_len("full generation vector", self.generators(), u.len())?;
        Ok(self.ind_indices.iter().map(|&i| u[i]).collect())
    }
}

/// Rebuild the full generation vector; the dependent unit covers `demand - sum(u_ind)`.
pub fn equality_completion(partition: &Partition, demand: f64, u_ind: &[f64]) -> Result<Vec<f64>> {
    let mut u = vec![0.0; partition.generators()];
    complete_into(partition, demand, u_ind, &mut u)?;
    Ok(u)
}

pub(crate) fn complete_into(
    partition: &Partition,
    demand: f64,
    u_ind: &[f64],
    out: &mut [f64],
) -> Result<()> {
    check_len("independent vector", partition.n_ind(), u_ind.len())?;
    check_len("completion output", partition.generators(), out.len())?;
    for (&i, &v) in partition.ind_indices.iter().zip(u_ind) {
        out[i] = v;
    }
    out[partition.dep_index] = demand - sum(u_ind);
    Ok(())
}

/// The inequality set over independent generators after eliminating the dependent one.
///
/// Rows, in order:
/// - `-1'u_ind <= -1'x + F + u_max[dep]`
/// - `I u_ind <= u_max[ind]`
/// - `1'u_ind <= 1'x - F - u_min[dep]`
/// - `-I u_ind <= -u_min[ind]`
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedSet {
    set: LinearInequalitySet,
    partition: Partition,
    case: DispatchCase,
}

/// Per-sample geometry: the full-space anchor and the reduced set shifted onto it.
#[derive(Debug, Clone)]
pub struct Anchored<'a> {
    pub demand: f64,
    /// Full-size interior solution, fed to the network alongside the loads.
    pub anchor: Vec<f64>,
    pub shifted: ShiftedSet<'a>,
}

pub fn build_reduced_set(case: &DispatchCase, partition: &Partition) -> Result<ReducedSet> {
    let g = case.generators();
    check_len("partition size", g, partition.generators())?;
    let n = partition.n_ind();
    let d = case.nodes();
    let dep = partition.dep_index();
    let ind = partition.ind_indices();
    let fixed = case.fixed_output();

    let mut a = Matrix::zeros(2 * g, n);
    let mut b_mat = Matrix::zeros(2 * g, d);
    let mut b_vec = vec![0.0; 2 * g];

    let upper_sum = 0;
    let lower_sum = n + 1;
    for j in 0..n {
        a[(upper_sum, j)] = -1.0;
        a[(1 + j, j)] = 1.0;
        a[(lower_sum, j)] = 1.0;
        a[(lower_sum + 1 + j, j)] = -1.0;
    }
    for k in 0..d {
        b_mat[(upper_sum, k)] = -1.0;
        b_mat[(lower_sum, k)] = 1.0;
    }
    b_vec[upper_sum] = case.u_max()[dep] + fixed;
    b_vec[lower_sum] = -case.u_min()[dep] - fixed;
    for (j, &i) in ind.iter().enumerate() {
        b_vec[1 + j] = case.u_max()[i];
        b_vec[lower_sum + 1 + j] = -case.u_min()[i];
    }

    Ok(ReducedSet {
        set: LinearInequalitySet::new(a, b_mat, b_vec)?,
        partition: partition.clone(),
        case: case.clone(),
    })
}

/// Independent components of the intuitive solution, with slacks against the reduced set.
pub fn reduced_interior_point(
    case: &DispatchCase,
    partition: &Partition,
    x: &[f64],
) -> Result<InteriorPoint> {
    let rs = build_reduced_set(case, partition)?;
    let anchored = rs.anchored(x, None)?;
    Ok(anchored.shifted.center().clone())
}

impl ReducedSet {
    pub fn set(&self) -> &LinearInequalitySet {
        &self.set
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    pub fn case(&self) -> &DispatchCase {
        &self.case
    }

    pub fn dim(&self) -> usize {
        self.partition.n_ind()
    }

    /// `B x + b`, using the block structure so only `sum(x)` is needed.
    pub fn rhs(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len("load vector", self.case.nodes(), x.len())?;
        Ok(self.rhs_from_total(sum(x)))
    }

    fn rhs_from_total(&self, total: f64) -> Vec<f64> {
        let n = self.dim();
        let mut rhs = self.set.b_vec().to_vec();
        rhs[0] -= total;
        rhs[n + 1] += total;
        rhs
    }

    /// Anchor the set for load vector `x`. Without weights the anchor is the
    /// intuitive solution; see [`weighted_interior_solution`] otherwise.
    pub fn anchored(&self, x: &[f64], weights: Option<&[f64]>) -> Result<Anchored<'_>> {
        let demand = self.case.net_demand(x)?;
        let anchor = match weights {
            None => intuitive_solution(&self.case, x)?,
            Some(w) => weighted_interior_solution(&self.case, x, w)?,
        };
        let center = self.partition.independent(&anchor)?;
        let rhs = self.rhs_from_total(sum(x));
        let shifted = ShiftedSet::from_rhs(&self.set, rhs, center)?;
        Ok(Anchored {
            demand,
            anchor,
            shifted,
        })
    }

    pub fn complete(&self, x: &[f64], u_ind: &[f64]) -> Result<Vec<f64>> {
        equality_completion(&self.partition, self.case.net_demand(x)?, u_ind)
    }

    pub fn contains(&self, x: &[f64], u_ind: &[f64], tol: f64) -> Result<bool> {
        self.set.contains_rhs(&self.rhs(x)?, u_ind, tol)
    }
}

/// Mean squared l2 distance between predictions and labels.
pub fn optimality_gap(predictions: &[Vec<f64>], labels: &[Vec<f64>]) -> Result<f64> {
    if predictions.is_empty() {
        return Err(Error::Invalid("optimality gap over an empty batch".into()));
    }
    check_len("label count", predictions.len(), labels.len())?;
    let mut total = 0.0;
    for (p, l) in predictions.iter().zip(labels) {
        check_len("label length", p.len(), l.len())?;
        total += sq_dist(p, l);
    }
    Ok(total / predictions.len() as f64)
}

/// Sum of positive bound violations plus the absolute balance residual.
pub fn feasibility_gap(case: &DispatchCase, x: &[f64], u: &[f64]) -> Result<f64> {
    check_len("generation vector", case.generators(), u.len())?;
    let demand = case.net_demand(x)?;
    let mut gap = 0.0;
    for i in 0..u.len() {
        gap += (u[i] - case.u_max[i]).max(0.0);
        gap += (case.u_min[i] - u[i]).max(0.0);
    }
    gap += (sum(u) - demand).abs();
    Ok(gap)
}
