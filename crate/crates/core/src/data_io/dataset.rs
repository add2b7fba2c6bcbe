use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dispatch::{feasibility_gap, DispatchCase};
use crate::error::{check_len, Error, Result};
use crate::neural::Sample;
use crate::oracle::{kkt_certificate, solve_dispatch_exact};

pub const DATASET_SCHEMA: &str = "gauge-dispatch.dataset/v1";

/// Persisted labels must be feasible to this level after reload.
pub const LABEL_FEASIBILITY_TOL: f64 = 1e-7;

/// Perturbed load vectors around the nominal loads.
///
/// Each node is scaled by an independent uniform factor in `[1 - f, 1 + f]`, so
/// zero-load nodes stay at zero. Draws whose total demand is not strictly inside
/// the capacity range are discarded; at most `100 * count` draws are made.
pub fn sample_loads(
    case: &DispatchCase,
    count: usize,
    fluctuation: f64,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    if count == 0 {
        return Err(Error::Invalid("sample count must be positive".into()));
    }
    if !(0.0..1.0).contains(&fluctuation) {
        return Err(Error::Invalid(format!(
            "fluctuation must be in [0, 1), got {fluctuation}"
        )));
    }
    let nominal = case.loads_nominal();
    case.check_demand(case.net_demand(nominal)?)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cap = 100 * count;
    let mut out = Vec::with_capacity(count);
    let mut draws = 0;
    while out.len() < count {
        if draws == cap {
            return Err(Error::CaseTooTight {
                requested: count,
                accepted: out.len(),
                draws,
            });
        }
        draws += 1;
        let x: Vec<f64> = nominal
            .iter()
            .map(|&pd| {
                let factor = if fluctuation > 0.0 {
                    rng.random_range(1.0 - fluctuation..=1.0 + fluctuation)
                } else {
                    1.0
                };
                pd * factor
            })
            .collect();
        if case.check_demand(case.net_demand(&x)?).is_ok() {
            out.push(x);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub schema: String,
    pub case_name: String,
    pub seed: u64,
    pub fluctuation: f64,
    pub label_tol: f64,
    pub case: DispatchCase,
    pub samples: Vec<Sample>,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Label every load vector with the exact solver and split by seeded shuffle.
///
/// `train_fraction` of the samples (rounded down) go to the training split.
pub fn build_dataset(
    case: &DispatchCase,
    case_name: &str,
    loads: Vec<Vec<f64>>,
    train_fraction: f64,
    tol: f64,
    seed: u64,
    fluctuation: f64,
) -> Result<Dataset> {
    if loads.is_empty() {
        return Err(Error::Invalid("dataset needs at least one sample".into()));
    }
    if !(0.0..=1.0).contains(&train_fraction) {
        return Err(Error::Invalid(format!(
            "train fraction must be in [0, 1], got {train_fraction}"
        )));
    }
    let samples: Vec<Sample> = loads
        .into_par_iter()
        .enumerate()
        .map(|(k, x)| {
            let label = solve_dispatch_exact(case, &x, tol)?.generation;
            if kkt_certificate(case, &x, &label, tol)?.is_none() {
                return Err(Error::Invalid(format!(
                    "label {k} fails its optimality certificate"
                )));
            }
            Ok(Sample { x, label })
        })
        .collect::<Result<_>>()?;

    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(2);
    order.shuffle(&mut rng);
    let n_train = (train_fraction * samples.len() as f64).floor() as usize;
    let mut train = order[..n_train].to_vec();
    let mut test = order[n_train..].to_vec();
    train.sort_unstable();
    test.sort_unstable();

    Ok(Dataset {
        schema: DATASET_SCHEMA.to_string(),
        case_name: case_name.to_string(),
        seed,
        fluctuation,
        label_tol: tol,
        case: case.clone(),
        samples,
        train,
        test,
    })
}

impl Dataset {
    pub fn validate(&self) -> Result<()> {
        if self.schema != DATASET_SCHEMA {
            return Err(Error::Invalid(format!(
                "dataset schema '{}' is not {DATASET_SCHEMA}",
                self.schema
            )));
        }
        let n = self.samples.len();
        let mut seen = vec![false; n];
        for &i in self.train.iter().chain(&self.test) {
            if i >= n || std::mem::replace(&mut seen[i], true) {
                return Err(Error::Invalid(format!(
                    "split index {i} is out of range or repeated"
                )));
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::Invalid(
                "train and test splits do not cover every sample".into(),
            ));
        }
        for (k, s) in self.samples.iter().enumerate() {
            check_len("sample loads", self.case.nodes(), s.x.len())?;
            check_len("sample label", self.case.generators(), s.label.len())?;
            let gap = feasibility_gap(&self.case, &s.x, &s.label)?;
            if !(gap <= LABEL_FEASIBILITY_TOL) {
                return Err(Error::Invalid(format!(
                    "label {k} has feasibility gap {gap:e}"
                )));
            }
        }
        Ok(())
    }

    pub fn train_samples(&self) -> Vec<Sample> {
        self.train
            .iter()
            .map(|&i| self.samples[i].clone())
            .collect()
    }

    pub fn test_samples(&self) -> Vec<Sample> {
        self.test.iter().map(|&i| self.samples[i].clone()).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let ds: Dataset = serde_json::from_str(text)?;
        ds.validate()?;
        Ok(ds)
    }

    /// Hex SHA-256 of the canonical serialization.
    pub fn hash(&self) -> Result<String> {
        Ok(sha256_hex(self.to_json()?.as_bytes()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}
