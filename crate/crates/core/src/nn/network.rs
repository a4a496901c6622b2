use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::conv::{Padding, TemporalConv};
use super::dense::FullyConnected;
use super::dropout::Dropout;
use super::layer::{Layer, LayerCache};
use super::lcn::LocalContrastNorm;
use super::pool::MaxPool;
use super::softmax::{softmax, softmax_xent};
use crate::error::{Error, Result};
use crate::netspec::{LayerSpec, ModelSpec};
use crate::tensor::{to_storage, Real, Tensor};

/// How a [`ModelSpec`] is turned into layers.
#[derive(Debug, Clone, PartialEq)]
pub struct BuildOptions {
    /// Standard deviation of the Gaussian weight initialization (biases start at zero).
    pub init_std: Real,
    /// Dropout rates: the first applies to the input, the `j`-th to the output
    /// of the `j`-th hidden fully connected layer. Missing entries mean no dropout.
    pub dropout: Vec<Real>,
    /// Floor constant of every local contrast normalization layer.
    pub lcn_floor: Real,
}

impl Default for BuildOptions {
    fn default() -> Self {
        BuildOptions {
            init_std: 0.01,
            dropout: Vec::new(),
            lcn_floor: 1.0,
        }
    }
}

/// A linear stack of layers built from a [`ModelSpec`], ending in softmax.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    spec: ModelSpec,
    layers: Vec<Layer>,
    /// Index into `layers` of the layer holding each spec layer's weights or
    /// doing its work (the classifier maps to its fully connected layer).
    primary: Vec<usize>,
    /// Index into `layers` whose output is each spec layer's activation.
    outputs: Vec<usize>,
}

/// Gradients of the loss with respect to [`Network::params`], in the same order.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub tensors: Vec<Tensor>,
}

impl Gradients {
    pub fn zeros_like(network: &Network) -> Result<Self> {
        Ok(Gradients {
            tensors: network
                .params()
                .iter()
                .map(|p| Tensor::zeros(p.shape()))
                .collect::<Result<_>>()?,
        })
    }

    pub fn accumulate(&mut self, other: &Gradients) -> Result<()> {
        if self.tensors.len() != other.tensors.len() {
            return Err(Error::invalid("gradient sets have different lengths"));
        }
        for (a, b) in self.tensors.iter_mut().zip(&other.tensors) {
            a.add_scaled(b, 1.0)?;
        }
        Ok(())
    }

    pub fn scale(&mut self, factor: Real) {
        self.tensors.iter_mut().for_each(|t| t.scale(factor));
    }
}

/// Result of a caching forward pass.
#[derive(Debug, Clone)]
pub struct Trace {
    caches: Vec<LayerCache>,
    logits: Tensor,
    pub probabilities: Tensor,
}

impl Network {
    /// Builds a network with Gaussian weights drawn from `rng`.
    pub fn build<R: Rng + ?Sized>(spec: &ModelSpec, options: &BuildOptions, rng: &mut R) -> Result<Self> {
        let mut net = Self::zeros(spec, options)?;
        let normal = Normal::new(0.0, options.init_std as f64)
            .map_err(|e| Error::invalid(format!("init_std: {e}")))?;
        for layer in &mut net.layers {
            if let Some(weight) = layer.params_mut().into_iter().next() {
                for w in weight.data_mut() {
                    *w = to_storage(normal.sample(rng) as Real);
                }
            }
        }
        Ok(net)
    }

    /// Builds a network with all parameters zero.
    pub fn zeros(spec: &ModelSpec, options: &BuildOptions) -> Result<Self> {
        let shapes = spec.shapes()?;
        let hidden_dense = spec
            .hidden
            .iter()
            .filter(|l| matches!(l, LayerSpec::Dense { .. }))
            .count();
        if options.dropout.len() > hidden_dense + 1 {
            return Err(Error::invalid(format!(
                "{} dropout rates given but {} has only {} dropout positions",
                options.dropout.len(),
                spec,
                hidden_dense + 1
            )));
        }
        let rate = |i: usize| options.dropout.get(i).copied().unwrap_or(0.0);

        let mut layers = Vec::new();
        let mut primary = Vec::new();
        let mut outputs = Vec::new();
        if rate(0) > 0.0 {
            layers.push(Layer::Dropout(Dropout::new(rate(0))?));
        }
        let mut dense_seen = 0;
        for (layer, shape) in spec.hidden.iter().zip(&shapes) {
            match *layer {
                LayerSpec::Conv { kernel, filters } => {
                    layers.push(Layer::TemporalConv(TemporalConv::zeros(
                        filters,
                        shape.input[0],
                        kernel,
                        kernel,
                        Padding::Same,
                        true,
                    )?));
                }
                LayerSpec::Lcn { window } => {
                    layers.push(Layer::LocalContrastNorm(LocalContrastNorm::new(
                        window,
                        options.lcn_floor,
                    )?));
                }
                LayerSpec::Pool { window } => layers.push(Layer::MaxPool(MaxPool::new(window))),
                LayerSpec::Dense { units } => {
                    let fan_in = shape.input.iter().product();
                    layers.push(Layer::FullyConnected(FullyConnected::zeros(fan_in, units, true)?));
                }
            }
            primary.push(layers.len() - 1);
            outputs.push(layers.len() - 1);
            if let LayerSpec::Dense { .. } = layer {
                dense_seen += 1;
                if rate(dense_seen) > 0.0 {
                    layers.push(Layer::Dropout(Dropout::new(rate(dense_seen))?));
                }
            }
        }
        let classifier = shapes.last().expect("shapes include the classifier");
        let fan_in = classifier.input.iter().product();
        layers.push(Layer::FullyConnected(FullyConnected::zeros(fan_in, spec.classes, false)?));
        primary.push(layers.len() - 1);
        layers.push(Layer::Softmax);
        outputs.push(layers.len() - 1);

        Ok(Network {
            spec: spec.clone(),
            layers,
            primary,
            outputs,
        })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn classes(&self) -> usize {
        self.spec.classes
    }

    pub fn input_shape(&self) -> Vec<usize> {
        self.spec.input_shape()
    }

    /// Number of layers addressable by spec index (hidden layers plus the classifier).
    pub fn spec_layer_count(&self) -> usize {
        self.primary.len()
    }

    /// The layer that implements spec layer `index`.
    pub fn spec_layer(&self, index: usize) -> Result<&Layer> {
        self.primary
            .get(index)
            .map(|&i| &self.layers[i])
            .ok_or_else(|| self.bad_index(index))
    }

    pub fn spec_layer_mut(&mut self, index: usize) -> Result<&mut Layer> {
        match self.primary.get(index) {
            Some(&i) => Ok(&mut self.layers[i]),
            None => Err(self.bad_index(index)),
        }
    }

    fn bad_index(&self, index: usize) -> Error {
        let names: Vec<String> = self
            .spec
            .shapes()
            .map(|s| s.iter().enumerate().map(|(i, l)| format!("{i}:{}", l.token)).collect())
            .unwrap_or_default();
        Error::invalid(format!(
            "layer index {index} out of range; valid layers are [{}]",
            names.join(", ")
        ))
    }

    pub fn params(&self) -> Vec<&Tensor> {
        self.layers.iter().flat_map(Layer::params).collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        self.layers.iter_mut().flat_map(Layer::params_mut).collect()
    }

    pub fn parameter_count(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }

    fn check_input(&self, x: &Tensor) -> Result<()> {
        let expected = self.input_shape();
        if x.shape() != expected.as_slice() {
            return Err(Error::ShapeMismatch {
                op: "network_input",
                left: x.shape().to_vec(),
                right: expected,
            });
        }
        Ok(())
    }

    /// Inference: class probabilities with dropout disabled.
    pub fn predict(&self, x: &Tensor) -> Result<Tensor> {
        self.activations(x, self.spec_layer_count() - 1)
    }

    /// Inference-mode output of spec layer `index` (post-activation).
    pub fn activations(&self, x: &Tensor, index: usize) -> Result<Tensor> {
        self.check_input(x)?;
        let stop = *self.outputs.get(index).ok_or_else(|| self.bad_index(index))?;
        let mut current = x.clone();
        for layer in &self.layers[..=stop] {
            current = layer.forward::<ChaCha8Rng>(&current, None)?.0;
        }
        Ok(current)
    }

    /// Caching forward pass. Dropout is active when `rng` is given.
    pub fn forward_train<R: Rng + ?Sized>(&self, x: &Tensor, mut rng: Option<&mut R>) -> Result<Trace> {
        self.check_input(x)?;
        let mut caches = Vec::with_capacity(self.layers.len());
        let mut current = x.clone();
        let last = self.layers.len() - 1;
        for layer in &self.layers[..last] {
            let (y, cache) = layer.forward(&current, rng.as_deref_mut())?;
            caches.push(cache);
            current = y;
        }
        caches.push(LayerCache::Empty);
        Ok(Trace {
            probabilities: softmax(&current),
            logits: current,
            caches,
        })
    }

    /// Cross-entropy loss of `trace` against `label` and its parameter gradients.
    pub fn backward(&self, trace: &Trace, label: usize) -> Result<(Gradients, Real)> {
        if trace.caches.len() != self.layers.len() {
            return Err(Error::MissingCache { layer: "Network" });
        }
        let xent = softmax_xent(&trace.logits, label)?;
        let mut grad = xent.logit_grad;
        let mut per_layer: Vec<Vec<Tensor>> = Vec::with_capacity(self.layers.len());
        let last = self.layers.len() - 1;
        for (layer, cache) in self.layers[..last].iter().zip(&trace.caches).rev() {
            let (dx, dparams) = layer.backward(&grad, cache)?;
            per_layer.push(dparams);
            grad = dx;
        }
        per_layer.reverse();
        Ok((
            Gradients {
                tensors: per_layer.into_iter().flatten().collect(),
            },
            xent.loss,
        ))
    }

    /// Inference-mode cross-entropy loss.
    pub fn loss(&self, x: &Tensor, label: usize) -> Result<Real> {
        let trace = self.forward_train::<ChaCha8Rng>(x, None)?;
        Ok(softmax_xent(&trace.logits, label)?.loss)
    }

    /// Gradient of the inference-mode loss with respect to the input.
    pub fn input_gradient(&self, x: &Tensor, label: usize) -> Result<Tensor> {
        let trace = self.forward_train::<ChaCha8Rng>(x, None)?;
        let mut grad = softmax_xent(&trace.logits, label)?.logit_grad;
        let last = self.layers.len() - 1;
        for (layer, cache) in self.layers[..last].iter().zip(&trace.caches).rev() {
            grad = layer.backward(&grad, cache)?.0;
        }
        Ok(grad)
    }
}
