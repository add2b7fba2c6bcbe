use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::optim::{Optimizer, OptimizerKind};
use super::pipeline::{Pipeline, Sample};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub seed: u64,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    /// Weight of the violation term; read only by the penalty method.
    pub penalty_rho: f64,
    pub optimizer: OptimizerKind,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            epochs: 100,
            learning_rate: 1e-3,
            batch_size: 32,
            penalty_rho: 1e-6,
            optimizer: OptimizerKind::Adam,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Invalid(format!(
                "learning rate must be finite and >= 0, got {}",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::Invalid("batch size must be positive".into()));
        }
        if !(self.penalty_rho >= 0.0 && self.penalty_rho.is_finite()) {
            return Err(Error::Invalid(format!(
                "penalty weight must be finite and >= 0, got {}",
                self.penalty_rho
            )));
        }
        Ok(())
    }
}

/// Mean training loss of each epoch, measured on the forward passes that
/// produced that epoch's updates.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LossTrace {
    pub losses: Vec<f64>,
}

impl LossTrace {
    /// `epoch,loss` rows, epochs counted from 1.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,loss\n");
        for (e, l) in self.losses.iter().enumerate() {
            out.push_str(&format!("{},{:e}\n", e + 1, l));
        }
        out
    }
}

pub fn train(
    pipeline: &mut Pipeline,
    samples: &[Sample],
    config: &TrainConfig,
) -> Result<LossTrace> {
    train_observed(pipeline, samples, config, |_, _| Ok(()))
}

/// Like [`train`], calling `observer(epoch, pipeline)` before the first update
/// (epoch 0) and after every epoch.
pub fn train_observed<F>(
    pipeline: &mut Pipeline,
    samples: &[Sample],
    config: &TrainConfig,
    mut observer: F,
) -> Result<LossTrace>
where
    F: FnMut(usize, &Pipeline) -> Result<()>,
{
    config.validate()?;
    if samples.is_empty() {
        return Err(Error::Invalid("training set is empty".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(1);
    let mut optimizer = Optimizer::new(config.optimizer, config.learning_rate, pipeline.model());
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut trace = LossTrace::default();
    observer(0, pipeline)?;
    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<&Sample> = chunk.iter().map(|&i| &samples[i]).collect();
            let (loss, grads) = pipeline.loss_and_gradients(&batch, config.penalty_rho)?;
            if !loss.is_finite() {
                return Err(Error::Diverged { epoch, loss });
            }
            total += loss * batch.len() as f64;
            optimizer.step(pipeline.model_mut(), &grads);
        }
        trace.losses.push(total / samples.len() as f64);
        observer(epoch, pipeline)?;
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dispatch::{feasibility_gap, optimality_gap, DispatchCase, Partition};
    use crate::neural::pipeline::Method;
    use crate::oracle::solve_dispatch_exact;

    fn toy() -> (DispatchCase, Vec<Sample>) {
        let case = DispatchCase::new(
            vec![0.0, 0.0],
            vec![1.0, 2.0],
            vec![1.0, 0.5],
            vec![0.2, 0.1],
            vec![1.0],
        )
        .unwrap();
        let samples = (0..20)
            .map(|k| {
                let x = vec![0.3 + 2.4 * k as f64 / 19.0];
                let label = solve_dispatch_exact(&case, &x, 1e-12).unwrap().generation;
                Sample { x, label }
            })
            .collect();
        (case, samples)
    }

    fn pipeline(case: &DispatchCase, method: Method, seed: u64) -> Pipeline {
        Pipeline::new(case, Partition::first(2).unwrap(), method, 64, seed).unwrap()
    }

    #[test]
    fn zero_learning_rate_records_initial_loss() {
        let (case, samples) = toy();
        let mut p = pipeline(&case, Method::generalized(), 1);
        let before = p.model().clone();
        let refs: Vec<&Sample> = samples.iter().collect();
        let initial = p.batch_loss(&refs, 0.0).unwrap();
        let config = TrainConfig {
            epochs: 1,
            learning_rate: 0.0,
            batch_size: samples.len(),
            ..TrainConfig::default()
        };
        let trace = train(&mut p, &samples, &config).unwrap();
        assert_eq!(p.model(), &before);
        assert_eq!(trace.losses.len(), 1);
        assert!((trace.losses[0] - initial).abs() <= 1e-12 * (1.0 + initial));
    }

    #[test]
    fn toy_case_trains_to_near_zero_gap() {
        let (case, samples) = toy();
        let mut p = pipeline(&case, Method::generalized(), 7);
        let config = TrainConfig {
            epochs: 500,
            learning_rate: 1e-3,
            batch_size: 10,
            ..TrainConfig::default()
        };
        let mut worst_feasibility = 0.0_f64;
        train_observed(&mut p, &samples, &config, |_, p| {
            for s in &samples {
                let u = p.predict(&s.x)?;
                worst_feasibility = worst_feasibility.max(feasibility_gap(&case, &s.x, &u)?);
            }
            Ok(())
        })
        .unwrap();
        assert!(worst_feasibility <= 1e-9);
        let preds: Vec<Vec<f64>> = samples.iter().map(|s| p.predict(&s.x).unwrap()).collect();
        let labels: Vec<Vec<f64>> = samples.iter().map(|s| s.label.clone()).collect();
        let gap = optimality_gap(&preds, &labels).unwrap();
        assert!(gap < 1e-3, "final gap {gap}");
    }

    #[test]
    fn identical_seeds_give_identical_traces() {
        let (case, samples) = toy();
        let config = TrainConfig {
            epochs: 5,
            batch_size: 7,
            ..TrainConfig::default()
        };
        let run = || {
            let mut p = pipeline(&case, Method::traditional(), 3);
            let t = train(&mut p, &samples, &config).unwrap();
            t.losses.iter().map(|l| l.to_bits()).collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn full_batch_descent_is_nearly_monotone() {
        let (case, samples) = toy();
        let mut p = pipeline(&case, Method::generalized(), 5);
        let config = TrainConfig {
            epochs: 100,
            learning_rate: 1e-4,
            batch_size: samples.len(),
            optimizer: OptimizerKind::Sgd,
            ..TrainConfig::default()
        };
        let trace = train(&mut p, &samples, &config).unwrap();
        let rises = trace.losses.windows(2).filter(|w| w[1] > w[0]).count();
        assert!(rises <= 5, "{rises} increases");
    }

    #[test]
    fn divergence_is_reported() {
        let (case, samples) = toy();
        let mut p = pipeline(&case, Method::Penalty, 5);
        let config = TrainConfig {
            epochs: 50,
            learning_rate: 1e300,
            optimizer: OptimizerKind::Sgd,
            penalty_rho: 1.0,
            ..TrainConfig::default()
        };
        assert!(matches!(
            train(&mut p, &samples, &config),
            Err(Error::Diverged { .. })
        ));
    }

    #[test]
    fn trace_csv_layout() {
        let t = LossTrace {
            losses: vec![0.5, 0.25],
        };
        assert_eq!(t.to_csv(), "epoch,loss\n1,5e-1\n2,2.5e-1\n");
    }
}
