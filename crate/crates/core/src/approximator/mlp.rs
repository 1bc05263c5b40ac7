use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SimRng;

const CHECKPOINT_FORMAT: &str = "nfvsched-mlp";
const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Sigmoid,
    Identity,
}

impl Activation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Sigmoid => 1.0 / (1.0 + (-z).exp()),
            Activation::Identity => z,
        }
    }

    /// Derivative expressed through the activation's output.
    #[inline]
    fn derivative_from_output(self, a: f64) -> f64 {
        match self {
            Activation::Sigmoid => a * (1.0 - a),
            Activation::Identity => 1.0,
        }
    }
}

/// Hidden-layer geometry. The default is six layers of 300 units.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetShape {
    pub hidden_layers: usize,
    pub hidden_units: usize,
}

impl Default for NetShape {
    fn default() -> Self {
        NetShape {
            hidden_layers: 6,
            hidden_units: 300,
        }
    }
}

impl NetShape {
    pub fn small(layers: usize, units: usize) -> Self {
        NetShape {
            hidden_layers: layers,
            hidden_units: units,
        }
    }

    pub fn sizes(&self, input: usize, output: usize) -> Vec<usize> {
        let mut s = vec![input];
        s.extend(std::iter::repeat_n(self.hidden_units, self.hidden_layers));
        s.push(output);
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub inputs: usize,
    pub outputs: usize,
    /// Row-major `outputs x inputs`.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl Layer {
    fn zeros(inputs: usize, outputs: usize, activation: Activation) -> Self {
        Layer {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            bias: vec![0.0; outputs],
            activation,
        }
    }

    fn forward_into(&self, input: &[f64], rows: usize, out: &mut Vec<f64>) {
        out.clear();
        out.resize(rows * self.outputs, 0.0);
        for r in 0..rows {
            let x = &input[r * self.inputs..(r + 1) * self.inputs];
            let y = &mut out[r * self.outputs..(r + 1) * self.outputs];
            for (o, yo) in y.iter_mut().enumerate() {
                let w = &self.weights[o * self.inputs..(o + 1) * self.inputs];
                let z = self.bias[o] + w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
                *yo = self.activation.apply(z);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrad {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

/// Parameter gradients, shaped like the network.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerGrad>,
}

impl Gradients {
    pub fn zeros_like(mlp: &Mlp) -> Self {
        Gradients {
            layers: mlp
                .layers
                .iter()
                .map(|l| LayerGrad {
                    weights: vec![0.0; l.weights.len()],
                    bias: vec![0.0; l.bias.len()],
                })
                .collect(),
        }
    }

    /// Parameters in a fixed order: per layer, weights then biases.
    pub fn flat(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(&l.bias).copied())
            .collect()
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(&l.bias).all(|g| g.is_finite()))
    }
}

#[derive(Debug, Clone, Default)]
struct Tape {
    rows: usize,
    /// `activations[0]` is the input batch, `activations[l + 1]` the output of layer `l`.
    activations: Vec<Vec<f64>>,
}

/// Multilayer perceptron with per-layer activations.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Mlp {
    layers: Vec<Layer>,
    #[serde(skip)]
    tape: Option<Tape>,
}

impl PartialEq for Mlp {
    fn eq(&self, other: &Self) -> bool {
        self.layers == other.layers
    }
}

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    format: String,
    version: u32,
    layers: Vec<Layer>,
}

impl Mlp {
    /// Random network; weights and biases drawn from
    /// `U[-1/sqrt(fan_in), 1/sqrt(fan_in)]`.
    pub fn new(sizes: &[usize], hidden: Activation, output: Activation, rng: &mut SimRng) -> Self {
        let mut mlp = Self::zeros(sizes, hidden, output);
        for layer in &mut mlp.layers {
            let bound = 1.0 / (layer.inputs as f64).sqrt();
            for w in layer.weights.iter_mut().chain(layer.bias.iter_mut()) {
                *w = rng.random_range(-bound..=bound);
            }
        }
        mlp
    }

    pub fn zeros(sizes: &[usize], hidden: Activation, output: Activation) -> Self {
        assert!(
            sizes.len() >= 2,
            "an MLP needs at least input and output sizes"
        );
        let n = sizes.len() - 1;
        let layers = sizes
            .windows(2)
            .enumerate()
            .map(|(i, w)| Layer::zeros(w[0], w[1], if i + 1 == n { output } else { hidden }))
            .collect();
        Mlp { layers, tape: None }
    }

    pub fn input_size(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn output_size(&self) -> usize {
        self.layers.last().map(|l| l.outputs).unwrap_or(0)
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    /// Mutable access to parameters; drops any cached forward pass.
    pub fn layers_mut(&mut self) -> &mut [Layer] {
        self.tape = None;
        &mut self.layers
    }

    pub fn parameter_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.bias.len())
            .sum()
    }

    pub fn flat_parameters(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(&l.bias).copied())
            .collect()
    }

    /// Sets the `index`-th parameter in [`flat_parameters`](Self::flat_parameters) order.
    pub fn set_flat_parameter(&mut self, mut index: usize, value: f64) {
        self.tape = None;
        for l in &mut self.layers {
            let n = l.weights.len();
            if index < n {
                l.weights[index] = value;
                return;
            }
            index -= n;
            if index < l.bias.len() {
                l.bias[index] = value;
                return;
            }
            index -= l.bias.len();
        }
        panic!("parameter index out of range");
    }

    fn check_batch(&self, inputs: &[Vec<f64>]) -> Result<()> {
        let expected = self.input_size();
        for x in inputs {
            if x.len() != expected {
                return Err(Error::Dimension {
                    expected,
                    got: x.len(),
                });
            }
        }
        Ok(())
    }

    fn run(&self, inputs: &[Vec<f64>], keep: bool) -> (Vec<f64>, Option<Tape>) {
        let rows = inputs.len();
        let mut cur: Vec<f64> = inputs.iter().flatten().copied().collect();
        let mut tape = keep.then(|| Tape {
            rows,
            activations: Vec::with_capacity(self.layers.len() + 1),
        });
        for layer in &self.layers {
            let mut next = Vec::new();
            layer.forward_into(&cur, rows, &mut next);
            let prev = std::mem::replace(&mut cur, next);
            if let Some(t) = tape.as_mut() {
                t.activations.push(prev);
            }
        }
        if let Some(t) = tape.as_mut() {
            t.activations.push(cur.clone());
        }
        (cur, tape)
    }

    fn split(&self, flat: Vec<f64>) -> Vec<Vec<f64>> {
        let n = self.output_size();
        flat.chunks(n.max(1)).map(|c| c.to_vec()).collect()
    }

    /// Inference on a single input. Does not touch the cache.
    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        if input.len() != self.input_size() {
            return Err(Error::Dimension {
                expected: self.input_size(),
                got: input.len(),
            });
        }
        let (out, _) = self.run(std::slice::from_ref(&input.to_vec()), false);
        Ok(out)
    }

    /// Inference on a batch. Does not touch the cache.
    pub fn forward_batch(&self, inputs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        self.check_batch(inputs)?;
        let (out, _) = self.run(inputs, false);
        Ok(self.split(out))
    }

    /// Forward pass that records activations for a following [`backward`](Self::backward).
    pub fn forward_train(&mut self, inputs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        self.check_batch(inputs)?;
        let (out, tape) = self.run(inputs, true);
        self.tape = tape;
        Ok(self.split(out))
    }

    /// Backpropagates per-sample loss gradients at the output through the
    /// last [`forward_train`](Self::forward_train) batch.
    ///
    /// Parameter gradients are averaged over the batch. Input gradients are
    /// returned per sample and are not averaged.
    pub fn backward(&self, output_grads: &[Vec<f64>]) -> Result<(Gradients, Vec<Vec<f64>>)> {
        let tape = self.tape.as_ref().ok_or(Error::NoForwardCache)?;
        let rows = tape.rows;
        if output_grads.len() != rows {
            return Err(Error::Dimension {
                expected: rows,
                got: output_grads.len(),
            });
        }
        let out_n = self.output_size();
        for g in output_grads {
            if g.len() != out_n {
                return Err(Error::Dimension {
                    expected: out_n,
                    got: g.len(),
                });
            }
        }

        let mut grads = Gradients::zeros_like(self);
        let scale = 1.0 / rows.max(1) as f64;

        // delta = dL/dz for the current layer, row-major rows x outputs
        let last = self.layers.len() - 1;
        let out_act = &tape.activations[last + 1];
        let mut delta: Vec<f64> = output_grads
            .iter()
            .flatten()
            .zip(out_act)
            .map(|(g, &a)| g * self.layers[last].activation.derivative_from_output(a))
            .collect();

        let mut input_grad = Vec::new();
        for l in (0..self.layers.len()).rev() {
            let layer = &self.layers[l];
            let a_prev = &tape.activations[l];
            let (ni, no) = (layer.inputs, layer.outputs);
            let g = &mut grads.layers[l];
            for r in 0..rows {
                let d = &delta[r * no..(r + 1) * no];
                let x = &a_prev[r * ni..(r + 1) * ni];
                for (o, &dv) in d.iter().enumerate() {
                    if dv == 0.0 {
                        continue;
                    }
                    g.bias[o] += dv;
                    let row = &mut g.weights[o * ni..(o + 1) * ni];
                    for (w, &xi) in row.iter_mut().zip(x) {
                        *w += dv * xi;
                    }
                }
            }
            for v in g.weights.iter_mut().chain(g.bias.iter_mut()) {
                *v *= scale;
            }

            // dL/da_prev = W^T delta
            let mut back = vec![0.0; rows * ni];
            for r in 0..rows {
                let d = &delta[r * no..(r + 1) * no];
                let b = &mut back[r * ni..(r + 1) * ni];
                for (o, &dv) in d.iter().enumerate() {
                    if dv == 0.0 {
                        continue;
                    }
                    let w = &layer.weights[o * ni..(o + 1) * ni];
                    for (bi, &wi) in b.iter_mut().zip(w) {
                        *bi += wi * dv;
                    }
                }
            }
            if l == 0 {
                input_grad = back;
            } else {
                let act = self.layers[l - 1].activation;
                for (bv, &a) in back.iter_mut().zip(a_prev) {
                    *bv *= act.derivative_from_output(a);
                }
                delta = back;
            }
        }

        let inputs = self.input_size();
        let input_grads = input_grad
            .chunks(inputs.max(1))
            .map(|c| c.to_vec())
            .collect();
        Ok((grads, input_grads))
    }

    /// `self <- tau * online + (1 - tau) * self`.
    pub fn soft_update_from(&mut self, online: &Mlp, tau: f64) {
        self.tape = None;
        for (t, o) in self.layers.iter_mut().zip(&online.layers) {
            for (tw, ow) in t.weights.iter_mut().zip(&o.weights) {
                *tw = tau * ow + (1.0 - tau) * *tw;
            }
            for (tb, ob) in t.bias.iter_mut().zip(&o.bias) {
                *tb = tau * ob + (1.0 - tau) * *tb;
            }
        }
    }

    pub fn copy_from(&mut self, other: &Mlp) {
        self.layers.clone_from(&other.layers);
        self.tape = None;
    }

    /// Euclidean distance between parameter vectors.
    pub fn distance(&self, other: &Mlp) -> f64 {
        self.flat_parameters()
            .iter()
            .zip(other.flat_parameters())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    pub(crate) fn clear_tape(&mut self) {
        self.tape = None;
    }

    pub fn to_checkpoint_string(&self) -> Result<String> {
        let ck = Checkpoint {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            layers: self.layers.clone(),
        };
        Ok(serde_json::to_string_pretty(&ck)?)
    }

    pub fn from_checkpoint_str(text: &str) -> Result<Self> {
        let ck: Checkpoint = serde_json::from_str(text)?;
        if ck.format != CHECKPOINT_FORMAT {
            return Err(Error::Checkpoint(format!("unknown format `{}`", ck.format)));
        }
        if ck.version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported version {} (expected {CHECKPOINT_VERSION})",
                ck.version
            )));
        }
        if ck.layers.is_empty() {
            return Err(Error::Checkpoint("no layers".into()));
        }
        for (i, l) in ck.layers.iter().enumerate() {
            if l.weights.len() != l.inputs * l.outputs || l.bias.len() != l.outputs {
                return Err(Error::Checkpoint(format!(
                    "layer {i} has inconsistent shape"
                )));
            }
            if i > 0 && ck.layers[i - 1].outputs != l.inputs {
                return Err(Error::Checkpoint(format!("layer {i} does not chain")));
            }
        }
        Ok(Mlp {
            layers: ck.layers,
            tape: None,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_checkpoint_string()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_checkpoint_str(&std::fs::read_to_string(path)?)
    }
}
