use serde::{Deserialize, Serialize};

use crate::model::{DimensionMismatch, Regressor};
use crate::numeric::{dot, Matrix, RandomStream};

use super::NnError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Linear,
}

impl Activation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Linear => z,
        }
    }

    /// Derivative; ReLU uses 0 at the kink.
    #[inline]
    fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Linear => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub width: usize,
    pub activation: Activation,
}

impl LayerSpec {
    pub fn relu(width: usize) -> Self {
        LayerSpec {
            width,
            activation: Activation::Relu,
        }
    }

    pub fn linear(width: usize) -> Self {
        LayerSpec {
            width,
            activation: Activation::Linear,
        }
    }

    /// ReLU hidden layers of the given widths followed by a single linear output.
    pub fn stack(hidden: &[usize]) -> Vec<LayerSpec> {
        hidden
            .iter()
            .map(|&w| LayerSpec::relu(w))
            .chain([LayerSpec::linear(1)])
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    /// `out × in`.
    pub weights: Matrix,
    pub biases: Vec<f64>,
    pub activation: Activation,
}

impl Layer {
    pub fn input_dim(&self) -> usize {
        self.weights.n_cols()
    }

    pub fn output_dim(&self) -> usize {
        self.weights.n_rows()
    }

    fn forward_into(&self, input: &[f64], pre: &mut [f64], post: &mut [f64]) {
        for j in 0..self.output_dim() {
            let z = dot(self.weights.row(j), input) + self.biases[j];
            pre[j] = z;
            post[j] = self.activation.apply(z);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub input_dim: usize,
    pub layers: Vec<Layer>,
}

impl Network {
    pub fn n_parameters(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.data().len() + l.biases.len())
            .sum()
    }

    /// All parameters, layer by layer: weights row-major, then biases.
    pub fn parameters(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_parameters());
        for layer in &self.layers {
            out.extend_from_slice(layer.weights.data());
            out.extend_from_slice(&layer.biases);
        }
        out
    }

    pub fn set_parameters(&mut self, values: &[f64]) -> Result<(), NnError> {
        if values.len() != self.n_parameters() {
            return Err(NnError::ShapeMismatch(format!(
                "expected {} parameters, found {}",
                self.n_parameters(),
                values.len()
            )));
        }
        let mut offset = 0;
        for layer in &mut self.layers {
            let w = layer.weights.data_mut();
            w.copy_from_slice(&values[offset..offset + w.len()]);
            offset += w.len();
            let b = layer.biases.len();
            layer.biases.copy_from_slice(&values[offset..offset + b]);
            offset += b;
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(|l| {
            l.weights
                .data()
                .iter()
                .chain(&l.biases)
                .all(|v| v.is_finite())
        })
    }

    pub fn architecture(&self) -> Vec<LayerSpec> {
        self.layers
            .iter()
            .map(|l| LayerSpec {
                width: l.output_dim(),
                activation: l.activation,
            })
            .collect()
    }
}

impl Regressor for Network {
    fn input_dim(&self) -> usize {
        self.input_dim
    }

    fn predict_row_unchecked(&self, x: &[f64]) -> f64 {
        let mut current = x.to_vec();
        for layer in &self.layers {
            let mut pre = vec![0.0; layer.output_dim()];
            let mut post = vec![0.0; layer.output_dim()];
            layer.forward_into(&current, &mut pre, &mut post);
            current = post;
        }
        current[0]
    }
}

fn check_specs(input_dim: usize, specs: &[LayerSpec]) -> Result<(), NnError> {
    if input_dim == 0 {
        return Err(NnError::InvalidSpec(
            "input dimension must be at least 1".into(),
        ));
    }
    let Some(last) = specs.last() else {
        return Err(NnError::InvalidSpec("no layers".into()));
    };
    if let Some(i) = specs.iter().position(|s| s.width == 0) {
        return Err(NnError::InvalidSpec(format!("layer {i} has width 0")));
    }
    if *last != LayerSpec::linear(1) {
        return Err(NnError::InvalidSpec(
            "output layer must be linear with width 1".into(),
        ));
    }
    Ok(())
}

/// He initialization: weights `N(0, 2/fan_in)`, biases zero.
pub fn nn_init(
    input_dim: usize,
    specs: &[LayerSpec],
    stream: &mut RandomStream,
) -> Result<Network, NnError> {
    check_specs(input_dim, specs)?;
    let mut layers = Vec::with_capacity(specs.len());
    let mut fan_in = input_dim;
    for spec in specs {
        let std = (2.0 / fan_in as f64).sqrt();
        let data = (0..spec.width * fan_in)
            .map(|_| std * stream.next_normal())
            .collect();
        layers.push(Layer {
            weights: Matrix::from_vec(spec.width, fan_in, data).expect("finite draws"),
            biases: vec![0.0; spec.width],
            activation: spec.activation,
        });
        fan_in = spec.width;
    }
    Ok(Network { input_dim, layers })
}

/// Per-layer pre-activations `z` and activations `a` for a batch (one row per sample).
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardCache {
    pub input: Matrix,
    pub pre: Vec<Matrix>,
    pub post: Vec<Matrix>,
}

impl ForwardCache {
    pub fn predictions(&self) -> Vec<f64> {
        self.post.last().expect("at least one layer").column(0)
    }
}

pub fn nn_forward(net: &Network, x: &Matrix) -> Result<(Vec<f64>, ForwardCache), NnError> {
    if x.n_cols() != net.input_dim {
        return Err(DimensionMismatch {
            expected: net.input_dim,
            found: x.n_cols(),
        }
        .into());
    }
    let m = x.n_rows();
    let mut pre = Vec::with_capacity(net.layers.len());
    let mut post: Vec<Matrix> = Vec::with_capacity(net.layers.len());
    for layer in &net.layers {
        let input = post.last().unwrap_or(x);
        let mut z = Matrix::zeros(m, layer.output_dim());
        let mut a = Matrix::zeros(m, layer.output_dim());
        for i in 0..m {
            layer.forward_into(input.row(i), z.row_mut(i), a.row_mut(i));
        }
        pre.push(z);
        post.push(a);
    }
    let cache = ForwardCache {
        input: x.clone(),
        pre,
        post,
    };
    Ok((cache.predictions(), cache))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Matrix>,
    pub biases: Vec<Vec<f64>>,
}

impl Gradients {
    /// Same ordering as [`Network::parameters`].
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend_from_slice(w.data());
            out.extend_from_slice(b);
        }
        out
    }
}

/// Reverse-mode gradients of `L = (1/m)·Σ(ŷ − y)²`.
pub fn nn_backward(net: &Network, cache: &ForwardCache, y: &[f64]) -> Result<Gradients, NnError> {
    let m = cache.input.n_rows();
    if y.len() != m {
        return Err(NnError::ShapeMismatch(format!(
            "{} targets for a batch of {m}",
            y.len()
        )));
    }
    if cache.pre.len() != net.layers.len()
        || cache.input.n_cols() != net.input_dim
        || cache
            .pre
            .iter()
            .zip(&net.layers)
            .any(|(z, l)| z.shape() != (m, l.output_dim()))
    {
        return Err(NnError::ShapeMismatch(
            "cache does not match the network".into(),
        ));
    }
    let mut weights: Vec<Matrix> = net
        .layers
        .iter()
        .map(|l| Matrix::zeros(l.output_dim(), l.input_dim()))
        .collect();
    let mut biases: Vec<Vec<f64>> = net
        .layers
        .iter()
        .map(|l| vec![0.0; l.output_dim()])
        .collect();
    let last = net.layers.len() - 1;
    let scale = 2.0 / m as f64;

    for i in 0..m {
        // dL/da for the output layer
        let mut upstream = vec![scale * (cache.post[last].get(i, 0) - y[i])];
        for l in (0..=last).rev() {
            let layer = &net.layers[l];
            let z = cache.pre[l].row(i);
            let delta: Vec<f64> = upstream
                .iter()
                .zip(z)
                .map(|(g, z)| g * layer.activation.derivative(*z))
                .collect();
            let input = if l == 0 {
                cache.input.row(i)
            } else {
                cache.post[l - 1].row(i)
            };
            for (j, d) in delta.iter().enumerate() {
                if *d == 0.0 {
                    continue;
                }
                biases[l][j] += d;
                for (gw, a) in weights[l].row_mut(j).iter_mut().zip(input) {
                    *gw += d * a;
                }
            }
            if l > 0 {
                let mut next = vec![0.0; layer.input_dim()];
                for (j, d) in delta.iter().enumerate() {
                    if *d == 0.0 {
                        continue;
                    }
                    for (n, w) in next.iter_mut().zip(layer.weights.row(j)) {
                        *n += d * w;
                    }
                }
                upstream = next;
            }
        }
    }
    Ok(Gradients { weights, biases })
}
