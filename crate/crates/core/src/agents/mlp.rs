//! Fully connected network with rectifier hidden layers and a linear head.
//!
//! Weights are stored as `(fan_in, fan_out)` so a batch of row vectors goes
//! through a layer as `x.dot(W) + b`.

use std::fmt::Write as _;
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;

use crate::rng::RngStream;

use super::AgentError;

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layers: Vec<Layer>,
}

/// Values cached by a forward pass for the backward pass.
#[derive(Debug, Clone)]
pub struct Activations {
    /// Input to each layer; `inputs[0]` is the batch itself.
    inputs: Vec<Array2<f64>>,
    pub output: Array2<f64>,
}

/// Gradients with the same shapes as the network parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Grads {
    pub layers: Vec<Layer>,
}

impl Grads {
    pub fn zeros_like(net: &Mlp) -> Self {
        Self {
            layers: net
                .layers
                .iter()
                .map(|l| Layer {
                    weights: Array2::zeros(l.weights.raw_dim()),
                    bias: Array1::zeros(l.bias.raw_dim()),
                })
                .collect(),
        }
    }

    /// Flat view in the same order as [`Mlp::param`].
    pub fn flat(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(l.bias.iter()).copied())
            .collect()
    }
}

impl Mlp {
    /// Uniform `(-1/sqrt(fan_in), 1/sqrt(fan_in))` initialization for weights and biases.
    pub fn new(sizes: &[usize], rng: &mut RngStream) -> Result<Self, AgentError> {
        check_sizes(sizes)?;
        let layers = sizes
            .windows(2)
            .map(|w| {
                let bound = 1.0 / (w[0] as f64).sqrt();
                Layer {
                    weights: Array2::from_shape_fn((w[0], w[1]), |_| rng.gen_range(-bound..bound)),
                    bias: Array1::from_shape_fn(w[1], |_| rng.gen_range(-bound..bound)),
                }
            })
            .collect();
        Ok(Self { layers })
    }

    pub fn zeros(sizes: &[usize]) -> Result<Self, AgentError> {
        check_sizes(sizes)?;
        Ok(Self {
            layers: sizes
                .windows(2)
                .map(|w| Layer {
                    weights: Array2::zeros((w[0], w[1])),
                    bias: Array1::zeros(w[1]),
                })
                .collect(),
        })
    }

    pub fn from_layers(layers: Vec<Layer>) -> Result<Self, AgentError> {
        if layers.is_empty() {
            return Err(AgentError::Shape("network needs at least one layer".into()));
        }
        for (i, l) in layers.iter().enumerate() {
            if l.bias.len() != l.weights.ncols() {
                return Err(AgentError::Shape(format!("layer {i}: bias does not match weights")));
            }
            if i > 0 && layers[i - 1].weights.ncols() != l.weights.nrows() {
                return Err(AgentError::Shape(format!("layer {i}: input does not chain")));
            }
        }
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![self.input_size()];
        s.extend(self.layers.iter().map(|l| l.weights.ncols()));
        s
    }

    pub fn input_size(&self) -> usize {
        self.layers[0].weights.nrows()
    }

    pub fn output_size(&self) -> usize {
        self.layers.last().expect("non-empty").weights.ncols()
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// Mutable access to parameter `index` in flat order (per layer: weights row-major, then bias).
    pub fn param(&mut self, mut index: usize) -> &mut f64 {
        for l in &mut self.layers {
            let nw = l.weights.len();
            if index < nw {
                let cols = l.weights.ncols();
                return &mut l.weights[[index / cols, index % cols]];
            }
            index -= nw;
            if index < l.bias.len() {
                return &mut l.bias[index];
            }
            index -= l.bias.len();
        }
        panic!("parameter index out of range");
    }

    pub fn all_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(l.bias.iter()).all(|v| v.is_finite()))
    }

    /// Forward pass for a single input vector.
    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>, AgentError> {
        let x = ArrayView2::from_shape((1, input.len()), input)
            .map_err(|e| AgentError::Shape(e.to_string()))?;
        Ok(self.forward_batch(x)?.output.into_raw_vec_and_offset().0)
    }

    /// Forward pass for a batch of row vectors, caching what backward needs.
    pub fn forward_batch(&self, x: ArrayView2<f64>) -> Result<Activations, AgentError> {
        if x.ncols() != self.input_size() {
            return Err(AgentError::Shape(format!(
                "input has {} features, network expects {}",
                x.ncols(),
                self.input_size()
            )));
        }
        let last = self.layers.len() - 1;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut current = x.to_owned();
        for (i, l) in self.layers.iter().enumerate() {
            let mut z = current.dot(&l.weights);
            z += &l.bias;
            if i < last {
                z.mapv_inplace(|v| v.max(0.0));
            }
            inputs.push(current);
            current = z;
        }
        Ok(Activations {
            inputs,
            output: current,
        })
    }

    /// Backpropagates `grad_output` (dLoss/dOutput, one row per sample).
    pub fn backward(&self, acts: &Activations, grad_output: ArrayView2<f64>) -> Grads {
        let mut grads = Vec::with_capacity(self.layers.len());
        let mut delta = grad_output.to_owned();
        for (i, l) in self.layers.iter().enumerate().rev() {
            let input = &acts.inputs[i];
            let dw = input.t().dot(&delta);
            let db = delta.sum_axis(Axis(0));
            if i > 0 {
                let mut prev = delta.dot(&l.weights.t());
                // input[i] is relu(z_{i-1}); its derivative is 1 where the input is positive
                ndarray::Zip::from(&mut prev)
                    .and(input)
                    .for_each(|d, &a| {
                        if a <= 0.0 {
                            *d = 0.0;
                        }
                    });
                delta = prev;
            }
            grads.push(Layer {
                weights: dw,
                bias: db,
            });
        }
        grads.reverse();
        Grads { layers: grads }
    }

    pub fn copy_from(&mut self, other: &Mlp) {
        self.layers.clone_from(&other.layers);
    }

    /// Text snapshot: magic line, sizes line, then one line per weight
    /// matrix (row-major) and bias vector. Values use shortest round-trip form.
    pub fn to_snapshot(&self) -> String {
        let mut out = String::from(SNAPSHOT_MAGIC);
        out.push('\n');
        let sizes: Vec<String> = self.sizes().iter().map(ToString::to_string).collect();
        let _ = writeln!(out, "sizes {}", sizes.join(" "));
        for (i, l) in self.layers.iter().enumerate() {
            let w: Vec<String> = l.weights.iter().map(|v| v.to_string()).collect();
            let b: Vec<String> = l.bias.iter().map(|v| v.to_string()).collect();
            let _ = writeln!(out, "w{i} {}", w.join(" "));
            let _ = writeln!(out, "b{i} {}", b.join(" "));
        }
        out
    }

    pub fn from_snapshot(text: &str) -> Result<Self, AgentError> {
        let bad = |m: &str| AgentError::Snapshot(m.to_string());
        let mut lines = text.lines();
        if lines.next() != Some(SNAPSHOT_MAGIC) {
            return Err(bad("missing or unsupported header"));
        }
        let sizes: Vec<usize> = lines
            .next()
            .and_then(|l| l.strip_prefix("sizes "))
            .ok_or_else(|| bad("missing sizes line"))?
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| bad("bad size")))
            .collect::<Result<_, _>>()?;
        check_sizes(&sizes)?;
        let mut read_values = |tag: String, n: usize| -> Result<Vec<f64>, AgentError> {
            let line = lines.next().ok_or_else(|| bad("truncated snapshot"))?;
            let rest = line
                .strip_prefix(&tag)
                .and_then(|r| r.strip_prefix(' ').or(Some(r)))
                .ok_or_else(|| bad(&format!("expected {tag}")))?;
            let vals: Vec<f64> = rest
                .split_whitespace()
                .map(|t| t.parse().map_err(|_| bad("bad value")))
                .collect::<Result<_, _>>()?;
            if vals.len() != n {
                return Err(bad(&format!("{tag}: expected {n} values, got {}", vals.len())));
            }
            Ok(vals)
        };
        let mut layers = Vec::new();
        for (i, w) in sizes.windows(2).enumerate() {
            let weights = Array2::from_shape_vec((w[0], w[1]), read_values(format!("w{i}"), w[0] * w[1])?)
                .map_err(|e| AgentError::Snapshot(e.to_string()))?;
            let bias = Array1::from(read_values(format!("b{i}"), w[1])?);
            layers.push(Layer { weights, bias });
        }
        Self::from_layers(layers)
    }

    pub fn save(&self, path: &Path) -> Result<(), AgentError> {
        std::fs::write(path, self.to_snapshot()).map_err(|e| AgentError::Snapshot(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, AgentError> {
        let text = std::fs::read_to_string(path).map_err(|e| AgentError::Snapshot(e.to_string()))?;
        Self::from_snapshot(&text)
    }
}

pub const SNAPSHOT_MAGIC: &str = "LAGR-MLP v1";

fn check_sizes(sizes: &[usize]) -> Result<(), AgentError> {
    if sizes.len() < 2 || sizes.contains(&0) {
        return Err(AgentError::Shape(format!(
            "layer sizes must have at least two non-zero entries, got {sizes:?}"
        )));
    }
    Ok(())
}
