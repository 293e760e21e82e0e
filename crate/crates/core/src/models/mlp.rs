use rand::Rng;

use super::ModelError;
use crate::track::{Action, FeatureVector, FEATURE_COUNT};

/// Layer widths of the network shared by all learning methods.
pub const MLP_ARCH: [usize; 4] = [FEATURE_COUNT, 64, 64, Action::COUNT];

/// Fully connected layer; `weights` is row-major `outputs x inputs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            bias: vec![0.0; outputs],
        }
    }

    fn forward_into(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(self.weights.chunks_exact(self.inputs).zip(&self.bias).map(|(row, b)| {
            row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + b
        }));
    }
}

/// Feedforward network: affine layers with rectifiers in between and a
/// linear output, so outputs can stand for Q-values as well as class scores.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layers: Vec<Dense>,
}

/// Gradient buffers shaped like the network's parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Dense>,
}

/// Regression target for one sample.
#[derive(Debug, Clone, Copy)]
pub enum Target<'a> {
    /// A value for every output.
    Full(&'a [f64]),
    /// A value for one output; the others carry no error.
    Single { index: usize, value: f64 },
}

/// Inputs paired with full target vectors.
#[derive(Debug, Clone, Default)]
pub struct TrainBatch {
    pub inputs: Vec<FeatureVector>,
    pub targets: Vec<[f64; Action::COUNT]>,
}

impl TrainBatch {
    pub fn push(&mut self, input: FeatureVector, target: [f64; Action::COUNT]) {
        self.inputs.push(input);
        self.targets.push(target);
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }
}

impl Mlp {
    /// Standard architecture with uniform `±1/sqrt(fan_in)` weights and zero biases.
    pub fn new<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Self::with_arch(&MLP_ARCH, rng)
    }

    pub fn with_arch<R: Rng + ?Sized>(arch: &[usize], rng: &mut R) -> Self {
        let mut mlp = Self::zeros(arch);
        for layer in &mut mlp.layers {
            let bound = 1.0 / (layer.inputs as f64).sqrt();
            for w in &mut layer.weights {
                *w = rng.gen_range(-bound..=bound);
            }
        }
        mlp
    }

    pub fn zeros(arch: &[usize]) -> Self {
        assert!(arch.len() >= 2, "need at least an input and an output layer");
        Self {
            layers: arch.windows(2).map(|w| Dense::zeros(w[0], w[1])).collect(),
        }
    }

    pub fn from_layers(layers: Vec<Dense>) -> Self {
        Self { layers }
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    pub fn arch(&self) -> Vec<usize> {
        let mut a = vec![self.layers[0].inputs];
        a.extend(self.layers.iter().map(|l| l.outputs));
        a
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("at least one layer").outputs
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(&l.bias).all(|v| v.is_finite()))
    }

    fn check_input(&self, x: &[f64]) -> Result<(), ModelError> {
        if x.len() != self.input_dim() {
            return Err(ModelError::InputSize {
                expected: self.input_dim(),
                found: x.len(),
            });
        }
        if !x.iter().all(|v| v.is_finite()) {
            return Err(ModelError::NonFiniteInput);
        }
        Ok(())
    }

    /// Per-layer activations; entry 0 is the input, the last the output.
    fn activations(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x.to_vec());
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let mut out = Vec::with_capacity(layer.outputs);
            layer.forward_into(&acts[i], &mut out);
            if i != last {
                for v in &mut out {
                    *v = v.max(0.0);
                }
            }
            acts.push(out);
        }
        acts
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>, ModelError> {
        self.check_input(x)?;
        Ok(self.forward_unchecked(x))
    }

    pub(crate) fn forward_unchecked(&self, x: &[f64]) -> Vec<f64> {
        let mut cur = x.to_vec();
        let mut next = Vec::new();
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            layer.forward_into(&cur, &mut next);
            if i != last {
                for v in &mut next {
                    *v = v.max(0.0);
                }
            }
            std::mem::swap(&mut cur, &mut next);
        }
        cur
    }

    /// Nine action scores for a state encoding.
    pub fn scores(&self, features: &FeatureVector) -> Result<[f64; Action::COUNT], ModelError> {
        let out = self.forward(features.as_slice())?;
        out.try_into().map_err(|v: Vec<f64>| ModelError::ArchitectureMismatch {
            expected: format!("{} outputs", Action::COUNT),
            found: format!("{} outputs", v.len()),
        })
    }

    /// Loss `mean_b sum_k (pred_bk - target_bk)^2` and its gradient.
    pub fn loss_and_gradients(&self, batch: &[(&[f64], Target<'_>)]) -> Result<(f64, Gradients), ModelError> {
        if batch.is_empty() {
            return Err(ModelError::EmptyBatch);
        }
        let mut grads = Gradients {
            layers: self.layers.iter().map(|l| Dense::zeros(l.inputs, l.outputs)).collect(),
        };
        let scale = 1.0 / batch.len() as f64;
        let mut loss = 0.0;
        for (x, target) in batch {
            self.check_input(x)?;
            let acts = self.activations(x);
            let out = acts.last().expect("output layer");
            let mut delta = vec![0.0; out.len()];
            match *target {
                Target::Full(t) => {
                    for k in 0..out.len() {
                        let e = out[k] - t[k];
                        loss += e * e;
                        delta[k] = 2.0 * e * scale;
                    }
                }
                Target::Single { index, value } => {
                    let e = out[index] - value;
                    loss += e * e;
                    delta[index] = 2.0 * e * scale;
                }
            }
            for l in (0..self.layers.len()).rev() {
                let layer = &self.layers[l];
                let input = &acts[l];
                let g = &mut grads.layers[l];
                for (o, &d) in delta.iter().enumerate() {
                    if d == 0.0 {
                        continue;
                    }
                    g.bias[o] += d;
                    let row = &mut g.weights[o * layer.inputs..(o + 1) * layer.inputs];
                    for (gw, &a) in row.iter_mut().zip(input) {
                        *gw += d * a;
                    }
                }
                if l == 0 {
                    break;
                }
                let mut prev = vec![0.0; layer.inputs];
                for (o, &d) in delta.iter().enumerate() {
                    if d == 0.0 {
                        continue;
                    }
                    let row = &layer.weights[o * layer.inputs..(o + 1) * layer.inputs];
                    for (p, &w) in prev.iter_mut().zip(row) {
                        *p += d * w;
                    }
                }
                // rectifier derivative, taken as 0 at the kink
                for (p, &a) in prev.iter_mut().zip(input) {
                    if a <= 0.0 {
                        *p = 0.0;
                    }
                }
                delta = prev;
            }
        }
        Ok((loss * scale, grads))
    }

    pub fn apply_gradients(&mut self, grads: &Gradients, step_size: f64) {
        for (layer, g) in self.layers.iter_mut().zip(&grads.layers) {
            for (w, gw) in layer.weights.iter_mut().zip(&g.weights) {
                *w -= step_size * gw;
            }
            for (b, gb) in layer.bias.iter_mut().zip(&g.bias) {
                *b -= step_size * gb;
            }
        }
    }

    /// One plain gradient-descent step; returns the loss before the update.
    pub fn train_step(&mut self, batch: &[(&[f64], Target<'_>)], step_size: f64) -> Result<f64, ModelError> {
        let (loss, grads) = self.loss_and_gradients(batch)?;
        if !loss.is_finite() {
            return Err(ModelError::NonFiniteLoss(loss));
        }
        self.apply_gradients(&grads, step_size);
        Ok(loss)
    }

    pub fn train_batch(&mut self, batch: &TrainBatch, step_size: f64) -> Result<f64, ModelError> {
        let pairs: Vec<(&[f64], Target<'_>)> = batch
            .inputs
            .iter()
            .zip(&batch.targets)
            .map(|(x, t)| (x.as_slice(), Target::Full(t)))
            .collect();
        self.train_step(&pairs, step_size)
    }
}

/// Index of the largest score; the first one wins ties.
pub fn greedy_index(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

pub fn greedy_action(scores: &[f64; Action::COUNT]) -> Action {
    Action::from_index(greedy_index(scores))
}
