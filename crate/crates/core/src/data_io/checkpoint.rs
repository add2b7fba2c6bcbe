use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dispatch::{DispatchCase, Partition};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::neural::{MlpModel, OutputActivation, Pipeline, TrainConfig};

pub const CHECKPOINT_SCHEMA: &str = "gauge-dispatch.checkpoint/v1";

/// A trained pipeline with the dataset it was fitted on.
///
/// Weights are row-major with explicit `rows`/`cols`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub schema: String,
    pub method: String,
    pub dataset_hash: String,
    pub train_config: TrainConfig,
    pub dep_index: usize,
    pub center_weights: Option<Vec<f64>>,
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub output_dim: usize,
    pub output_activation: OutputActivation,
    pub w1: Matrix,
    pub b1: Vec<f64>,
    pub w2: Matrix,
    pub b2: Vec<f64>,
}

impl Checkpoint {
    pub fn from_pipeline(pipeline: &Pipeline, dataset_hash: &str, config: &TrainConfig) -> Self {
        let m = pipeline.model();
        Self {
            schema: CHECKPOINT_SCHEMA.to_string(),
            method: pipeline.method().to_string(),
            dataset_hash: dataset_hash.to_string(),
            train_config: config.clone(),
            dep_index: pipeline.partition().dep_index(),
            center_weights: pipeline.center_weights().map(<[f64]>::to_vec),
            input_dim: m.input_dim(),
            hidden_dim: m.hidden_dim(),
            output_dim: m.output_dim(),
            output_activation: m.output_activation(),
            w1: m.w1().clone(),
            b1: m.b1().to_vec(),
            w2: m.w2().clone(),
            b2: m.b2().to_vec(),
        }
    }

    /// Rebuild the pipeline for `case`, checking every recorded shape.
    pub fn to_pipeline(&self, case: &DispatchCase) -> Result<Pipeline> {
        if self.schema != CHECKPOINT_SCHEMA {
            return Err(Error::Invalid(format!(
                "checkpoint schema '{}' is not {CHECKPOINT_SCHEMA}",
                self.schema
            )));
        }
        let model = MlpModel::from_parts(
            self.w1.clone(),
            self.b1.clone(),
            self.w2.clone(),
            self.b2.clone(),
            self.output_activation,
        )?;
        if (model.input_dim(), model.hidden_dim(), model.output_dim())
            != (self.input_dim, self.hidden_dim, self.output_dim)
        {
            return Err(Error::Invalid(format!(
                "checkpoint header says {}x{}x{} but weights are {}x{}x{}",
                self.input_dim,
                self.hidden_dim,
                self.output_dim,
                model.input_dim(),
                model.hidden_dim(),
                model.output_dim()
            )));
        }
        let partition = Partition::new(self.dep_index, case.generators())?;
        Pipeline::from_parts(
            case,
            partition,
            model,
            self.method.parse()?,
            self.center_weights.clone(),
        )
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}
