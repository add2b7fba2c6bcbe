//! Loads in, full dispatch out: `x -> [x; u_o] -> MLP -> layer -> completion`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::loss::{loss_mse, loss_penalty};
use super::mlp::{MlpGradients, MlpModel, MlpTape, OutputActivation};
use crate::dispatch::{build_reduced_set, complete_into, DispatchCase, Partition, ReducedSet};
use crate::error::{check_len, Error, Result};
use crate::gauge::{BranchKey, GaugeLayer, LayerTape};

/// How the raw network output becomes a dispatch.
///
/// `Penalty` adds the network output to the interior anchor and completes it
/// with no feasibility layer; violations are discouraged by the loss only.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Method {
    Penalty,
    Gauge { layer: GaugeLayer },
}

impl Method {
    pub fn output_activation(&self) -> OutputActivation {
        match self {
            Method::Gauge { layer } if layer.requires_unit_ball() => OutputActivation::Tanh,
            _ => OutputActivation::None,
        }
    }

    pub fn generalized() -> Self {
        Method::Gauge {
            layer: GaugeLayer::Generalized,
        }
    }

    pub fn traditional() -> Self {
        Method::Gauge {
            layer: GaugeLayer::Traditional,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Penalty => write!(f, "penalty"),
            Method::Gauge {
                layer: layer @ (GaugeLayer::Traditional | GaugeLayer::Generalized),
            } => write!(f, "{layer}-gauge"),
            Method::Gauge { layer } => write!(f, "{layer}"),
        }
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim().to_ascii_lowercase();
        if t == "penalty" {
            return Ok(Method::Penalty);
        }
        if !(t.ends_with("-gauge") || t.starts_with("variant:")) {
            return Err(Error::Invalid(format!(
                "unknown method '{s}'; expected penalty, traditional-gauge, variant:<name> or generalized-gauge"
            )));
        }
        Ok(Method::Gauge { layer: t.parse()? })
    }
}

/// One labelled instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub x: Vec<f64>,
    pub label: Vec<f64>,
}

/// Everything one forward pass produced.
#[derive(Debug, Clone)]
pub struct SampleTrace {
    pub u: Vec<f64>,
    pub v_hat: Vec<f64>,
    mlp_tape: MlpTape,
    layer_tape: Option<LayerTape>,
}

impl SampleTrace {
    /// ReLU activity pattern and layer branch; finite differences are only
    /// meaningful while both stay fixed.
    pub fn signature(&self) -> (Vec<bool>, Option<BranchKey>) {
        (
            self.mlp_tape.active_units(),
            self.layer_tape.as_ref().map(LayerTape::branch_key),
        )
    }
}

#[derive(Debug, Clone)]
pub struct Pipeline {
    reduced: ReducedSet,
    model: MlpModel,
    method: Method,
    /// Per-generator weights for the interior anchor; `None` is the intuitive solution.
    center_weights: Option<Vec<f64>>,
}

impl Pipeline {
    pub fn new(
        case: &DispatchCase,
        partition: Partition,
        method: Method,
        hidden: usize,
        seed: u64,
    ) -> Result<Self> {
        let model = MlpModel::new_seeded(
            case.nodes() + case.generators(),
            hidden,
            partition.n_ind(),
            method.output_activation(),
            seed,
        )?;
        Self::from_parts(case, partition, model, method, None)
    }

    pub fn from_parts(
        case: &DispatchCase,
        partition: Partition,
        model: MlpModel,
        method: Method,
        center_weights: Option<Vec<f64>>,
    ) -> Result<Self> {
        if let Method::Gauge { layer } = &method {
            layer.validate()?;
        }
        check_len(
            "network input",
            case.nodes() + case.generators(),
            model.input_dim(),
        )?;
        check_len("network output", partition.n_ind(), model.output_dim())?;
        if model.output_activation() != method.output_activation() {
            return Err(Error::Invalid(format!(
                "method {method} needs output activation {:?}, model has {:?}",
                method.output_activation(),
                model.output_activation()
            )));
        }
        if let Some(w) = &center_weights {
            check_len("center weights", case.generators(), w.len())?;
        }
        Ok(Self {
            reduced: build_reduced_set(case, &partition)?,
            model,
            method,
            center_weights,
        })
    }

    /// Anchor the layer at the weighted interior solution instead of the intuitive one.
    pub fn with_center_weights(mut self, weights: Vec<f64>) -> Result<Self> {
        check_len("center weights", self.case().generators(), weights.len())?;
        if weights.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
            return Err(Error::Invalid(
                "center weights must be positive and finite".into(),
            ));
        }
        self.center_weights = Some(weights);
        Ok(self)
    }

    pub fn reduced_set(&self) -> &ReducedSet {
        &self.reduced
    }

    pub fn case(&self) -> &DispatchCase {
        self.reduced.case()
    }

    pub fn partition(&self) -> &Partition {
        self.reduced.partition()
    }

    pub fn model(&self) -> &MlpModel {
        &self.model
    }

    pub fn model_mut(&mut self) -> &mut MlpModel {
        &mut self.model
    }

    pub fn method(&self) -> Method {
        self.method
    }

    pub fn center_weights(&self) -> Option<&[f64]> {
        self.center_weights.as_deref()
    }

    pub fn forward_sample(&self, x: &[f64]) -> Result<SampleTrace> {
        let anchored = self.reduced.anchored(x, self.center_weights.as_deref())?;
        let (v_hat, mlp_tape) = self.model.forward(x, &anchored.anchor)?;
        let (u_ind, layer_tape) = match &self.method {
            Method::Gauge { layer } => {
                let (u_ind, tape) = layer.forward(&anchored.shifted, &v_hat)?;
                (u_ind, Some(tape))
            }
            Method::Penalty => {
                let c = anchored.shifted.center().point();
                (v_hat.iter().zip(c).map(|(v, c)| v + c).collect(), None)
            }
        };
        let mut u = vec![0.0; self.partition().generators()];
        complete_into(self.partition(), anchored.demand, &u_ind, &mut u)?;
        Ok(SampleTrace {
            u,
            v_hat,
            mlp_tape,
            layer_tape,
        })
    }

    pub fn predict(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward_sample(x)?.u)
    }

    /// Network output shifted onto the anchor, before any layer or completion.
    pub fn raw_independent(&self, x: &[f64]) -> Result<Vec<f64>> {
        let anchored = self.reduced.anchored(x, self.center_weights.as_deref())?;
        let (v_hat, _) = self.model.forward(x, &anchored.anchor)?;
        let c = anchored.shifted.center().point();
        Ok(v_hat.iter().zip(c).map(|(v, c)| v + c).collect())
    }

    /// Training objective on `batch`: MSE for gauge methods, MSE plus the
    /// `rho`-weighted violation penalty for [`Method::Penalty`].
    pub fn batch_loss(&self, batch: &[&Sample], rho: f64) -> Result<f64> {
        let traces = self.forward_batch(batch)?;
        Ok(self.loss_on(batch, &traces, rho)?.value)
    }

    /// Loss and parameter gradients on `batch`, back-propagated through
    /// completion, the layer and the network.
    pub fn loss_and_gradients(&self, batch: &[&Sample], rho: f64) -> Result<(f64, MlpGradients)> {
        let traces = self.forward_batch(batch)?;
        let loss = self.loss_on(batch, &traces, rho)?;
        let mut grads = MlpGradients::zeros_like(&self.model);
        let dep = self.partition().dep_index();
        for (trace, d_u) in traces.into_iter().zip(&loss.cotangents) {
            // u_dep = D - sum(u_ind)
            let d_ind: Vec<f64> = self
                .partition()
                .ind_indices()
                .iter()
                .map(|&i| d_u[i] - d_u[dep])
                .collect();
            let d_v = match trace.layer_tape {
                Some(mut tape) => tape.backward(&d_ind)?,
                None => d_ind,
            };
            self.model.backward(&trace.mlp_tape, &d_v, &mut grads)?;
        }
        Ok((loss.value, grads))
    }

    fn forward_batch(&self, batch: &[&Sample]) -> Result<Vec<SampleTrace>> {
        batch.iter().map(|s| self.forward_sample(&s.x)).collect()
    }

    fn loss_on(
        &self,
        batch: &[&Sample],
        traces: &[SampleTrace],
        rho: f64,
    ) -> Result<super::loss::LossOutput> {
        let preds: Vec<Vec<f64>> = traces.iter().map(|t| t.u.clone()).collect();
        let labels: Vec<Vec<f64>> = batch.iter().map(|s| s.label.clone()).collect();
        match self.method {
            Method::Penalty => {
                let loads: Vec<Vec<f64>> = batch.iter().map(|s| s.x.clone()).collect();
                loss_penalty(&preds, &labels, self.case(), &loads, rho)
            }
            Method::Gauge { .. } => loss_mse(&preds, &labels),
        }
    }
}
