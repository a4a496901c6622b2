use rand::Rng;

use super::activation::{relu_backward, relu_forward};
use super::conv::{ConvCache, TemporalConv};
use super::dense::{DenseCache, FullyConnected};
use super::dropout::{Dropout, DropoutCache};
use super::lcn::{LcnCache, LocalContrastNorm};
use super::pool::{MaxPool, PoolCache};
use super::softmax::{softmax, softmax_backward};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq)]
pub enum Layer {
    TemporalConv(TemporalConv),
    FullyConnected(FullyConnected),
    Relu,
    MaxPool(MaxPool),
    LocalContrastNorm(LocalContrastNorm),
    Dropout(Dropout),
    Softmax,
}

/// State recorded by a forward pass and consumed by the matching backward pass.
#[derive(Debug, Clone)]
pub enum LayerCache {
    Conv(ConvCache),
    Dense(DenseCache),
    Relu(Tensor),
    Pool(PoolCache),
    Lcn(LcnCache),
    Dropout(DropoutCache),
    Softmax(Tensor),
    /// Placeholder for layers that were not run in training mode.
    Empty,
}

impl Layer {
    pub fn kind(&self) -> &'static str {
        match self {
            Layer::TemporalConv(_) => "TemporalConv",
            Layer::FullyConnected(_) => "FullyConnected",
            Layer::Relu => "ReLU",
            Layer::MaxPool(_) => "MaxPool",
            Layer::LocalContrastNorm(_) => "LocalContrastNorm",
            Layer::Dropout(_) => "Dropout",
            Layer::Softmax => "Softmax",
        }
    }

    pub fn params(&self) -> Vec<&Tensor> {
        match self {
            Layer::TemporalConv(c) => vec![&c.weight, &c.bias],
            Layer::FullyConnected(f) => vec![&f.weight, &f.bias],
            _ => Vec::new(),
        }
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        match self {
            Layer::TemporalConv(c) => vec![&mut c.weight, &mut c.bias],
            Layer::FullyConnected(f) => vec![&mut f.weight, &mut f.bias],
            _ => Vec::new(),
        }
    }

    /// Runs the layer. Dropout is active only when `rng` is given.
    pub fn forward<R: Rng + ?Sized>(
        &self,
        x: &Tensor,
        rng: Option<&mut R>,
    ) -> Result<(Tensor, LayerCache)> {
        Ok(match self {
            Layer::TemporalConv(c) => {
                let (y, cache) = c.forward(x)?;
                (y, LayerCache::Conv(cache))
            }
            Layer::FullyConnected(f) => {
                let (y, cache) = f.forward(x)?;
                (y, LayerCache::Dense(cache))
            }
            Layer::Relu => {
                let y = relu_forward(x);
                (y.clone(), LayerCache::Relu(y))
            }
            Layer::MaxPool(p) => {
                let (y, cache) = p.forward(x)?;
                (y, LayerCache::Pool(cache))
            }
            Layer::LocalContrastNorm(l) => {
                let (y, cache) = l.forward(x)?;
                (y, LayerCache::Lcn(cache))
            }
            Layer::Dropout(d) => {
                let (y, cache) = d.forward(x, rng)?;
                (y, LayerCache::Dropout(cache))
            }
            Layer::Softmax => {
                if x.rank() != 1 || x.len() < 2 {
                    return Err(Error::invalid(format!(
                        "softmax needs a vector of at least 2 entries, got {:?}",
                        x.shape()
                    )));
                }
                let p = softmax(x);
                (p.clone(), LayerCache::Softmax(p))
            }
        })
    }

    /// Returns the input gradient and the gradients of [`Layer::params`], in order.
    pub fn backward(&self, upstream: &Tensor, cache: &LayerCache) -> Result<(Tensor, Vec<Tensor>)> {
        let missing = || Error::MissingCache { layer: self.kind() };
        Ok(match (self, cache) {
            (Layer::TemporalConv(c), LayerCache::Conv(cache)) => {
                let (dx, dw, db) = c.backward(upstream, Some(cache))?;
                (dx, vec![dw, db])
            }
            (Layer::FullyConnected(f), LayerCache::Dense(cache)) => {
                let (dx, dw, db) = f.backward(upstream, Some(cache))?;
                (dx, vec![dw, db])
            }
            (Layer::Relu, LayerCache::Relu(out)) => (relu_backward(upstream, out)?, Vec::new()),
            (Layer::MaxPool(p), LayerCache::Pool(cache)) => {
                (p.backward(upstream, Some(cache))?, Vec::new())
            }
            (Layer::LocalContrastNorm(l), LayerCache::Lcn(cache)) => {
                (l.backward(upstream, Some(cache))?, Vec::new())
            }
            (Layer::Dropout(d), LayerCache::Dropout(cache)) => {
                (d.backward(upstream, Some(cache))?, Vec::new())
            }
            (Layer::Softmax, LayerCache::Softmax(p)) => (softmax_backward(upstream, p)?, Vec::new()),
            _ => return Err(missing()),
        })
    }
}
