//! Test-split evaluation of trained pipelines, the projection baseline and the
//! exact solver, in the shape of a three-metric results table.

use std::hint::black_box;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data_io::Dataset;
use crate::dispatch::{feasibility_gap, optimality_gap, ReducedSet};
use crate::error::{Error, Result};
use crate::neural::{Pipeline, Sample};
use crate::oracle::{project_onto_reduced_set, solve_dispatch_exact};

pub const REPORT_SCHEMA: &str = "gauge-dispatch.report/v1";
pub const PROJECTION_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimingConfig {
    pub repetitions: usize,
    pub warmup: usize,
}

impl Default for TimingConfig {
    fn default() -> Self {
        Self {
            repetitions: 100,
            warmup: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingMeta {
    pub repetitions: usize,
    pub warmup: usize,
    pub statistic: String,
    pub clock: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodRow {
    pub method: String,
    pub optimality_gap: f64,
    pub feasibility_gap: f64,
    /// Mean over test instances of the per-instance median, in milliseconds.
    pub time_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub schema: String,
    pub case_name: String,
    pub seed: u64,
    pub dataset_hash: String,
    pub test_samples: usize,
    pub timing: TimingMeta,
    pub rows: Vec<MethodRow>,
}

/// What a row evaluates.
pub enum Evaluated<'a> {
    Pipeline(&'a Pipeline),
    /// Raw output of the pipeline, projected onto the reduced set and completed.
    Projection(&'a Pipeline),
    Oracle {
        tol: f64,
    },
}

impl Evaluated<'_> {
    pub fn label(&self) -> String {
        match self {
            Evaluated::Pipeline(p) => p.method().to_string(),
            Evaluated::Projection(p) => format!("projection({})", p.method()),
            Evaluated::Oracle { .. } => "exact-solver(lambda-bisection)".to_string(),
        }
    }

    fn solve(
        &self,
        rs: Option<&ReducedSet>,
        sample: &Sample,
        dataset: &Dataset,
    ) -> Result<Vec<f64>> {
        match self {
            Evaluated::Pipeline(p) => p.predict(&sample.x),
            Evaluated::Projection(p) => {
                let rs = rs.expect("projection rows carry their reduced set");
                let raw = p.raw_independent(&sample.x)?;
                let projected = project_onto_reduced_set(rs, &sample.x, &raw, PROJECTION_TOL)?;
                rs.complete(&sample.x, &projected)
            }
            Evaluated::Oracle { tol } => {
                Ok(solve_dispatch_exact(&dataset.case, &sample.x, *tol)?.generation)
            }
        }
    }
}

/// Median wall time of `f` in milliseconds over `cfg.repetitions` calls, after
/// `cfg.warmup` discarded calls.
pub fn median_time_ms<T>(cfg: &TimingConfig, mut f: impl FnMut() -> Result<T>) -> Result<f64> {
    if cfg.repetitions == 0 {
        return Err(Error::Invalid(
            "timing needs at least one repetition".into(),
        ));
    }
    for _ in 0..cfg.warmup {
        black_box(f()?);
    }
    let mut times = Vec::with_capacity(cfg.repetitions);
    for _ in 0..cfg.repetitions {
        let start = Instant::now();
        black_box(f()?);
        times.push(start.elapsed().as_secs_f64() * 1e3);
    }
    times.sort_by(f64::total_cmp);
    let mid = times.len() / 2;
    Ok(if times.len() % 2 == 1 {
        times[mid]
    } else {
        0.5 * (times[mid - 1] + times[mid])
    })
}

/// Gaps and timing of one row on the test split.
///
/// With `parallel`, predictions for the gap columns are computed concurrently;
/// timing always runs sequentially.
pub fn evaluate_row(
    item: &Evaluated<'_>,
    dataset: &Dataset,
    timing: &TimingConfig,
    parallel: bool,
) -> Result<MethodRow> {
    let test = dataset.test_samples();
    if test.is_empty() {
        return Err(Error::Invalid("dataset has an empty test split".into()));
    }
    let rs = match item {
        Evaluated::Projection(p) => Some(p.reduced_set()),
        _ => None,
    };
    let solve = |s: &Sample| item.solve(rs, s, dataset);
    let preds: Vec<Vec<f64>> = if parallel {
        test.par_iter().map(solve).collect::<Result<_>>()?
    } else {
        test.iter().map(solve).collect::<Result<_>>()?
    };
    let labels: Vec<Vec<f64>> = test.iter().map(|s| s.label.clone()).collect();
    let opt = optimality_gap(&preds, &labels)?;
    let mut feas = 0.0;
    for (s, u) in test.iter().zip(&preds) {
        feas += feasibility_gap(&dataset.case, &s.x, u)?;
    }
    let mut time = 0.0;
    for s in &test {
        time += median_time_ms(timing, || solve(s))?;
    }
    Ok(MethodRow {
        method: item.label(),
        optimality_gap: opt,
        feasibility_gap: feas / test.len() as f64,
        time_ms: time / test.len() as f64,
    })
}

pub fn evaluate(
    items: &[Evaluated<'_>],
    dataset: &Dataset,
    timing: &TimingConfig,
    parallel: bool,
) -> Result<EvalReport> {
    let rows = items
        .iter()
        .map(|item| evaluate_row(item, dataset, timing, parallel))
        .collect::<Result<_>>()?;
    Ok(EvalReport {
        schema: REPORT_SCHEMA.to_string(),
        case_name: dataset.case_name.clone(),
        seed: dataset.seed,
        dataset_hash: dataset.hash()?,
        test_samples: dataset.test.len(),
        timing: TimingMeta {
            repetitions: timing.repetitions,
            warmup: timing.warmup,
            statistic: "per-instance median, averaged over test instances".into(),
            clock: "monotonic".into(),
        },
        rows,
    })
}

impl EvalReport {
    pub fn row(&self, method: &str) -> Option<&MethodRow> {
        self.rows.iter().find(|r| r.method == method)
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    /// The report with every timing field zeroed, for reproducibility checks.
    pub fn without_timing(&self) -> Self {
        let mut r = self.clone();
        for row in &mut r.rows {
            row.time_ms = 0.0;
        }
        r
    }

    pub fn to_markdown(&self) -> String {
        let mut out = String::from(
            "| Method | Optimality gap | Feasibility gap | Time per instance (ms) |\n|---|---|---|---|\n",
        );
        for r in &self.rows {
            out.push_str(&format!(
                "| {} | {:.3e} | {:.3e} | {:.4} |\n",
                r.method, r.optimality_gap, r.feasibility_gap, r.time_ms
            ));
        }
        out
    }
}
