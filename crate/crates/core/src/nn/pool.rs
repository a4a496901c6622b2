use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Max pooling over `window×window` blocks of each feature map.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MaxPool {
    pub window: usize,
    pub stride: usize,
}

#[derive(Debug, Clone)]
pub struct PoolCache {
    input_shape: Vec<usize>,
    output_shape: Vec<usize>,
    /// Flat input index that produced each output value.
    argmax: Vec<usize>,
}

impl MaxPool {
    pub fn new(window: usize) -> Self {
        MaxPool {
            window,
            stride: window,
        }
    }

    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        let bad = || Error::ShapeMismatch {
            op: "maxpool",
            left: input.to_vec(),
            right: vec![self.window, self.window],
        };
        if input.len() != 3 || self.window == 0 || self.stride == 0 {
            return Err(bad());
        }
        let extent = |e: usize| e.checked_sub(self.window).map(|d| d / self.stride + 1);
        match (extent(input[1]), extent(input[2])) {
            (Some(h), Some(w)) => Ok(vec![input[0], h, w]),
            _ => Err(bad()),
        }
    }

    /// Ties go to the smallest flat index in the window.
    pub fn forward(&self, input: &Tensor) -> Result<(Tensor, PoolCache)> {
        let out_shape = self.output_shape(input.shape())?;
        let (c, h, w) = (input.shape()[0], input.shape()[1], input.shape()[2]);
        let (oh, ow) = (out_shape[1], out_shape[2]);
        let x = input.data();
        let mut out = Vec::with_capacity(c * oh * ow);
        let mut argmax = Vec::with_capacity(c * oh * ow);
        for ch in 0..c {
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut best = usize::MAX;
                    for dy in 0..self.window {
                        for dx in 0..self.window {
                            let idx = (ch * h + oy * self.stride + dy) * w + ox * self.stride + dx;
                            if best == usize::MAX || x[idx] > x[best] {
                                best = idx;
                            }
                        }
                    }
                    out.push(x[best]);
                    argmax.push(best);
                }
            }
        }
        let output = Tensor::new(out_shape.clone(), out)?;
        Ok((
            output,
            PoolCache {
                input_shape: input.shape().to_vec(),
                output_shape: out_shape,
                argmax,
            },
        ))
    }

    pub fn backward(&self, upstream: &Tensor, cache: Option<&PoolCache>) -> Result<Tensor> {
        let cache = cache.ok_or(Error::MissingCache { layer: "MaxPool" })?;
        if upstream.shape() != cache.output_shape.as_slice() {
            return Err(Error::ShapeMismatch {
                op: "maxpool_backward",
                left: upstream.shape().to_vec(),
                right: cache.output_shape.clone(),
            });
        }
        let mut dx = Tensor::zeros(&cache.input_shape)?;
        let d = dx.data_mut();
        for (&g, &idx) in upstream.data().iter().zip(&cache.argmax) {
            d[idx] += g;
        }
        Ok(dx)
    }
}
