use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Fully connected layer over the flattened input, `y = W·x + b`, optionally
/// followed by a fused ReLU.
#[derive(Debug, Clone, PartialEq)]
pub struct FullyConnected {
    /// `[out, in]`
    pub weight: Tensor,
    /// `[out]`
    pub bias: Tensor,
    pub relu: bool,
}

#[derive(Debug, Clone)]
pub struct DenseCache {
    input: Tensor,
    output: Tensor,
}

impl FullyConnected {
    pub fn zeros(inputs: usize, outputs: usize, relu: bool) -> Result<Self> {
        Ok(FullyConnected {
            weight: Tensor::zeros(&[outputs, inputs])?,
            bias: Tensor::zeros(&[outputs])?,
            relu,
        })
    }

    pub fn inputs(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn outputs(&self) -> usize {
        self.weight.shape()[0]
    }

    pub fn forward(&self, input: &Tensor) -> Result<(Tensor, DenseCache)> {
        if input.len() != self.inputs() {
            return Err(Error::ShapeMismatch {
                op: "fc_forward",
                left: input.shape().to_vec(),
                right: self.weight.shape().to_vec(),
            });
        }
        let flat = input.clone().reshape(vec![input.len()])?;
        let mut y = self.weight.matvec(&flat)?.add(&self.bias)?;
        if self.relu {
            y = y.map(|v| v.max(0.0));
        }
        Ok((
            y.clone(),
            DenseCache {
                input: input.clone(),
                output: y,
            },
        ))
    }

    /// Returns `(input_grad, weight_grad, bias_grad)`; the input gradient has
    /// the (unflattened) shape of the cached input.
    pub fn backward(
        &self,
        upstream: &Tensor,
        cache: Option<&DenseCache>,
    ) -> Result<(Tensor, Tensor, Tensor)> {
        let cache = cache.ok_or(Error::MissingCache {
            layer: "FullyConnected",
        })?;
        if upstream.shape() != cache.output.shape() {
            return Err(Error::ShapeMismatch {
                op: "fc_backward",
                left: upstream.shape().to_vec(),
                right: cache.output.shape().to_vec(),
            });
        }
        let g = if self.relu {
            Tensor::new(
                upstream.shape().to_vec(),
                upstream
                    .data()
                    .iter()
                    .zip(cache.output.data())
                    .map(|(&g, &o)| if o > 0.0 { g } else { 0.0 })
                    .collect(),
            )?
        } else {
            upstream.clone()
        };
        let x = cache.input.data();
        let n = x.len();
        let mut dw = vec![0.0; self.weight.len()];
        for (row, &gv) in dw.chunks_exact_mut(n).zip(g.data()) {
            if gv != 0.0 {
                row.iter_mut().zip(x).for_each(|(d, &xv)| *d = gv * xv);
            }
        }
        let dx = self
            .weight
            .matvec_transposed(&g)?
            .reshape(cache.input.shape().to_vec())?;
        Ok((dx, Tensor::new(self.weight.shape().to_vec(), dw)?, g))
    }
}
