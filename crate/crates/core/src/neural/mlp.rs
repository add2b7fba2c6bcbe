//! One-hidden-layer ReLU network with an optional tanh output.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::linalg::{dot, Matrix};

pub const DEFAULT_HIDDEN: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputActivation {
    None,
    Tanh,
}

/// `act_out(W2 relu(W1 z + b1) + b2)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MlpData")]
pub struct MlpModel {
    w1: Matrix,
    b1: Vec<f64>,
    w2: Matrix,
    b2: Vec<f64>,
    output_activation: OutputActivation,
}

#[derive(Deserialize)]
struct MlpData {
    w1: Matrix,
    b1: Vec<f64>,
    w2: Matrix,
    b2: Vec<f64>,
    output_activation: OutputActivation,
}

impl TryFrom<MlpData> for MlpModel {
    type Error = Error;

    fn try_from(d: MlpData) -> Result<Self> {
        MlpModel::from_parts(d.w1, d.b1, d.w2, d.b2, d.output_activation)
    }
}

/// Forward intermediates for [`MlpModel::backward`].
#[derive(Debug, Clone)]
pub struct MlpTape {
    input: Vec<f64>,
    hidden: Vec<f64>,
    output: Vec<f64>,
}

impl MlpTape {
    /// Which hidden units were active; changes in this pattern are ReLU kinks.
    pub fn active_units(&self) -> Vec<bool> {
        self.hidden.iter().map(|&h| h > 0.0).collect()
    }

    pub fn output(&self) -> &[f64] {
        &self.output
    }
}

/// Parameter gradients with the same layout as the model.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpGradients {
    pub w1: Matrix,
    pub b1: Vec<f64>,
    pub w2: Matrix,
    pub b2: Vec<f64>,
}

impl MlpGradients {
    pub fn zeros_like(model: &MlpModel) -> Self {
        Self {
            w1: Matrix::zeros(model.w1.rows(), model.w1.cols()),
            b1: vec![0.0; model.b1.len()],
            w2: Matrix::zeros(model.w2.rows(), model.w2.cols()),
            b2: vec![0.0; model.b2.len()],
        }
    }

    /// Flattened in the order `w1, b1, w2, b2`.
    pub fn parts(&self) -> [&[f64]; 4] {
        [self.w1.as_slice(), &self.b1, self.w2.as_slice(), &self.b2]
    }

    pub fn get(&self, index: usize) -> f64 {
        let mut i = index;
        for part in self.parts() {
            if i < part.len() {
                return part[i];
            }
            i -= part.len();
        }
        panic!("gradient index {index} out of range")
    }
}

impl MlpModel {
    /// Uniform `(-1/sqrt(fan_in), 1/sqrt(fan_in))` initialization from `seed`.
    pub fn new_seeded(
        input_dim: usize,
        hidden: usize,
        output_dim: usize,
        output_activation: OutputActivation,
        seed: u64,
    ) -> Result<Self> {
        if input_dim == 0 || hidden == 0 || output_dim == 0 {
            return Err(Error::Invalid("network dimensions must be positive".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut fill = |len: usize, fan_in: usize| -> Vec<f64> {
            let bound = (1.0 / fan_in as f64).sqrt();
            (0..len).map(|_| rng.random_range(-bound..bound)).collect()
        };
        let w1 = Matrix::from_row_major(hidden, input_dim, fill(hidden * input_dim, input_dim))?;
        let b1 = fill(hidden, input_dim);
        let w2 = Matrix::from_row_major(output_dim, hidden, fill(output_dim * hidden, hidden))?;
        let b2 = fill(output_dim, hidden);
        Ok(Self {
            w1,
            b1,
            w2,
            b2,
            output_activation,
        })
    }

    pub fn from_parts(
        w1: Matrix,
        b1: Vec<f64>,
        w2: Matrix,
        b2: Vec<f64>,
        output_activation: OutputActivation,
    ) -> Result<Self> {
        check_len("hidden bias", w1.rows(), b1.len())?;
        check_len("output layer input", w1.rows(), w2.cols())?;
        check_len("output bias", w2.rows(), b2.len())?;
        Ok(Self {
            w1,
            b1,
            w2,
            b2,
            output_activation,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.w1.cols()
    }

    pub fn hidden_dim(&self) -> usize {
        self.w1.rows()
    }

    pub fn output_dim(&self) -> usize {
        self.w2.rows()
    }

    pub fn output_activation(&self) -> OutputActivation {
        self.output_activation
    }

    pub fn w1(&self) -> &Matrix {
        &self.w1
    }

    pub fn b1(&self) -> &[f64] {
        &self.b1
    }

    pub fn w2(&self) -> &Matrix {
        &self.w2
    }

    pub fn b2(&self) -> &[f64] {
        &self.b2
    }

    /// Forward on the concatenated features `[x; u_o]`.
    pub fn forward(&self, x: &[f64], u_o: &[f64]) -> Result<(Vec<f64>, MlpTape)> {
        check_len("network input", self.input_dim(), x.len() + u_o.len())?;
        let mut input = Vec::with_capacity(x.len() + u_o.len());
        input.extend_from_slice(x);
        input.extend_from_slice(u_o);
        self.forward_features(input)
    }

    pub fn forward_features(&self, input: Vec<f64>) -> Result<(Vec<f64>, MlpTape)> {
        check_len("network input", self.input_dim(), input.len())?;
        let hidden: Vec<f64> = (0..self.hidden_dim())
            .map(|r| (dot(self.w1.row(r), &input) + self.b1[r]).max(0.0))
            .collect();
        let output: Vec<f64> = (0..self.output_dim())
            .map(|r| {
                let z = dot(self.w2.row(r), &hidden) + self.b2[r];
                match self.output_activation {
                    OutputActivation::None => z,
                    OutputActivation::Tanh => z.tanh(),
                }
            })
            .collect();
        Ok((
            output.clone(),
            MlpTape {
                input,
                hidden,
                output,
            },
        ))
    }

    /// Accumulate parameter gradients for cotangent `d_out` on the output.
    pub fn backward(&self, tape: &MlpTape, d_out: &[f64], grads: &mut MlpGradients) -> Result<()> {
        check_len("network cotangent", self.output_dim(), d_out.len())?;
        let d_z2: Vec<f64> = match self.output_activation {
            OutputActivation::None => d_out.to_vec(),
            OutputActivation::Tanh => d_out
                .iter()
                .zip(&tape.output)
                .map(|(d, y)| d * (1.0 - y * y))
                .collect(),
        };
        let mut d_hidden = vec![0.0; self.hidden_dim()];
        for (r, &dz) in d_z2.iter().enumerate() {
            if dz == 0.0 {
                continue;
            }
            grads.b2[r] += dz;
            let w_row = self.w2.row(r);
            let g_row = grads.w2.row_mut(r);
            for (k, &h) in tape.hidden.iter().enumerate() {
                g_row[k] += dz * h;
                d_hidden[k] += dz * w_row[k];
            }
        }
        for (r, &dh) in d_hidden.iter().enumerate() {
            // ReLU subgradient at 0 is 0.
            if tape.hidden[r] <= 0.0 || dh == 0.0 {
                continue;
            }
            grads.b1[r] += dh;
            let g_row = grads.w1.row_mut(r);
            for (k, &z) in tape.input.iter().enumerate() {
                g_row[k] += dh * z;
            }
        }
        Ok(())
    }

    pub fn parameter_count(&self) -> usize {
        self.w1.as_slice().len() + self.b1.len() + self.w2.as_slice().len() + self.b2.len()
    }

    /// Mutable parameter blocks in the order `w1, b1, w2, b2`.
    pub fn parts_mut(&mut self) -> [&mut [f64]; 4] {
        [
            self.w1.as_mut_slice(),
            &mut self.b1,
            self.w2.as_mut_slice(),
            &mut self.b2,
        ]
    }

    pub fn parameter(&self, index: usize) -> f64 {
        let parts: [&[f64]; 4] = [self.w1.as_slice(), &self.b1, self.w2.as_slice(), &self.b2];
        let mut i = index;
        for part in parts {
            if i < part.len() {
                return part[i];
            }
            i -= part.len();
        }
        panic!("parameter index {index} out of range")
    }

    pub fn set_parameter(&mut self, index: usize, value: f64) {
        let mut i = index;
        for part in self.parts_mut() {
            if i < part.len() {
                part[i] = value;
                return;
            }
            i -= part.len();
        }
        panic!("parameter index {index} out of range")
    }
}
