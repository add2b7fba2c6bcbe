use serde::{Deserialize, Serialize};

use super::mlp::{MlpGradients, MlpModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const EPSILON: f64 = 1e-8;

#[derive(Debug, Clone)]
pub enum Optimizer {
    Sgd {
        lr: f64,
    },
    Adam {
        lr: f64,
        step: i32,
        m: Vec<Vec<f64>>,
        v: Vec<Vec<f64>>,
    },
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, lr: f64, model: &MlpModel) -> Self {
        match kind {
            OptimizerKind::Sgd => Optimizer::Sgd { lr },
            OptimizerKind::Adam => {
                let zeros: Vec<Vec<f64>> = MlpGradients::zeros_like(model)
                    .parts()
                    .iter()
                    .map(|p| vec![0.0; p.len()])
                    .collect();
                Optimizer::Adam {
                    lr,
                    step: 0,
                    m: zeros.clone(),
                    v: zeros,
                }
            }
        }
    }

    pub fn step(&mut self, model: &mut MlpModel, grads: &MlpGradients) {
        match self {
            Optimizer::Sgd { lr } => {
                for (param, grad) in model.parts_mut().into_iter().zip(grads.parts()) {
                    for (p, g) in param.iter_mut().zip(grad) {
                        *p -= *lr * g;
                    }
                }
            }
            Optimizer::Adam { lr, step, m, v } => {
                *step += 1;
                let bias1 = 1.0 - BETA1.powi(*step);
                let bias2 = 1.0 - BETA2.powi(*step);
                let params = model.parts_mut();
                for (k, (param, grad)) in params.into_iter().zip(grads.parts()).enumerate() {
                    for i in 0..param.len() {
                        let g = grad[i];
                        m[k][i] = BETA1 * m[k][i] + (1.0 - BETA1) * g;
                        v[k][i] = BETA2 * v[k][i] + (1.0 - BETA2) * g * g;
                        let m_hat = m[k][i] / bias1;
                        let v_hat = v[k][i] / bias2;
                        param[i] -= *lr * m_hat / (v_hat.sqrt() + EPSILON);
                    }
                }
            }
        }
    }
}
