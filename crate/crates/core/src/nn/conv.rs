//! Temporal convolution without weight sharing along the time axis.
//!
//! The input is a stack of `T` frames (`[T, H, W]`); every filter owns one
//! `R×S` slice per frame and the per-frame responses are summed into a
//! single feature map. With `T` read as "input channels" this is exactly an
//! ordinary multi-channel convolution, which is how deeper conv layers use it.

use crate::error::{Error, Result};
use crate::tensor::{Real, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Padding {
    /// Zero padding that keeps `H×W`; for even kernels the extra row/column
    /// of padding goes after the image.
    #[default]
    Same,
    Valid,
}

impl Padding {
    fn before(self, kernel: usize) -> usize {
        match self {
            Padding::Same => (kernel - 1) / 2,
            Padding::Valid => 0,
        }
    }

    pub fn output_extent(self, input: usize, kernel: usize) -> Option<usize> {
        match self {
            Padding::Same => Some(input),
            Padding::Valid => input.checked_sub(kernel).map(|d| d + 1),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TemporalConv {
    /// `[filters, frames, rows, cols]`
    pub weight: Tensor,
    /// `[filters]`
    pub bias: Tensor,
    pub padding: Padding,
    /// Apply `max(0, ·)` to the output.
    pub relu: bool,
}

#[derive(Debug, Clone)]
pub struct ConvCache {
    input: Tensor,
    output: Tensor,
}

impl TemporalConv {
    pub fn zeros(
        filters: usize,
        frames: usize,
        rows: usize,
        cols: usize,
        padding: Padding,
        relu: bool,
    ) -> Result<Self> {
        Ok(TemporalConv {
            weight: Tensor::zeros(&[filters, frames, rows, cols])?,
            bias: Tensor::zeros(&[filters])?,
            padding,
            relu,
        })
    }

    pub fn filters(&self) -> usize {
        self.weight.shape()[0]
    }

    pub fn frames(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn kernel(&self) -> (usize, usize) {
        (self.weight.shape()[2], self.weight.shape()[3])
    }

    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        let (kr, kc) = self.kernel();
        if input.len() != 3 || input[0] != self.frames() {
            return Err(Error::ShapeMismatch {
                op: "temporal_conv",
                left: input.to_vec(),
                right: self.weight.shape().to_vec(),
            });
        }
        match (
            self.padding.output_extent(input[1], kr),
            self.padding.output_extent(input[2], kc),
        ) {
            (Some(h), Some(w)) if h > 0 && w > 0 => Ok(vec![self.filters(), h, w]),
            _ => Err(Error::ShapeMismatch {
                op: "temporal_conv",
                left: input.to_vec(),
                right: self.weight.shape().to_vec(),
            }),
        }
    }

    pub fn forward(&self, input: &Tensor) -> Result<(Tensor, ConvCache)> {
        let out_shape = self.output_shape(input.shape())?;
        let (frames, h, w) = (input.shape()[0], input.shape()[1], input.shape()[2]);
        let (filters, oh, ow) = (out_shape[0], out_shape[1], out_shape[2]);
        let (kr, kc) = self.kernel();
        let (pr, pc) = (self.padding.before(kr), self.padding.before(kc));
        let x = input.data();
        let wt = self.weight.data();
        let mut out = vec![0.0; filters * oh * ow];

        for i in 0..filters {
            let map = &mut out[i * oh * ow..(i + 1) * oh * ow];
            map.iter_mut().for_each(|v| *v = self.bias.data()[i]);
            for t in 0..frames {
                let frame = &x[t * h * w..(t + 1) * h * w];
                for r in 0..kr {
                    for s in 0..kc {
                        let k = wt[((i * frames + t) * kr + r) * kc + s];
                        if k == 0.0 {
                            continue;
                        }
                        let (y0, y1) = valid_range(oh, h, r, pr);
                        let (x0, x1) = valid_range(ow, w, s, pc);
                        for oy in y0..y1 {
                            let iy = oy + r - pr;
                            let src = &frame[iy * w..(iy + 1) * w];
                            let dst = &mut map[oy * ow..(oy + 1) * ow];
                            for ox in x0..x1 {
                                dst[ox] += k * src[ox + s - pc];
                            }
                        }
                    }
                }
            }
        }
        if self.relu {
            out.iter_mut().for_each(|v| *v = v.max(0.0));
        }
        let output = Tensor::new(out_shape, out)?;
        Ok((
            output.clone(),
            ConvCache {
                input: input.clone(),
                output,
            },
        ))
    }

    /// Returns `(input_grad, weight_grad, bias_grad)`.
    pub fn backward(
        &self,
        upstream: &Tensor,
        cache: Option<&ConvCache>,
    ) -> Result<(Tensor, Tensor, Tensor)> {
        let cache = cache.ok_or(Error::MissingCache {
            layer: "TemporalConv",
        })?;
        if upstream.shape() != cache.output.shape() {
            return Err(Error::ShapeMismatch {
                op: "temporal_conv_backward",
                left: upstream.shape().to_vec(),
                right: cache.output.shape().to_vec(),
            });
        }
        let input = &cache.input;
        let (frames, h, w) = (input.shape()[0], input.shape()[1], input.shape()[2]);
        let (filters, oh, ow) = (
            upstream.shape()[0],
            upstream.shape()[1],
            upstream.shape()[2],
        );
        let (kr, kc) = self.kernel();
        let (pr, pc) = (self.padding.before(kr), self.padding.before(kc));

        let mut g = upstream.data().to_vec();
        if self.relu {
            for (gv, &o) in g.iter_mut().zip(cache.output.data()) {
                if o <= 0.0 {
                    *gv = 0.0;
                }
            }
        }

        let x = input.data();
        let wt = self.weight.data();
        let mut dx = vec![0.0; x.len()];
        let mut dw = vec![0.0; wt.len()];
        let mut db = vec![0.0; filters];

        for i in 0..filters {
            let gmap = &g[i * oh * ow..(i + 1) * oh * ow];
            db[i] = gmap.iter().sum();
            for t in 0..frames {
                let frame = &x[t * h * w..(t + 1) * h * w];
                let dframe = &mut dx[t * h * w..(t + 1) * h * w];
                for r in 0..kr {
                    for s in 0..kc {
                        let widx = ((i * frames + t) * kr + r) * kc + s;
                        let k = wt[widx];
                        let (y0, y1) = valid_range(oh, h, r, pr);
                        let (x0, x1) = valid_range(ow, w, s, pc);
                        let mut acc: Real = 0.0;
                        for oy in y0..y1 {
                            let iy = oy + r - pr;
                            let grow = &gmap[oy * ow..(oy + 1) * ow];
                            let src = &frame[iy * w..(iy + 1) * w];
                            let dst = &mut dframe[iy * w..(iy + 1) * w];
                            for ox in x0..x1 {
                                let gv = grow[ox];
                                acc += gv * src[ox + s - pc];
                                dst[ox + s - pc] += gv * k;
                            }
                        }
                        dw[widx] = acc;
                    }
                }
            }
        }
        Ok((
            Tensor::new(input.shape().to_vec(), dx)?,
            Tensor::new(self.weight.shape().to_vec(), dw)?,
            Tensor::new(vec![filters], db)?,
        ))
    }
}

/// Output positions `o` in `[lo, hi)` for which `o + k - pad` lies inside `[0, input)`.
fn valid_range(out: usize, input: usize, k: usize, pad: usize) -> (usize, usize) {
    let lo = pad.saturating_sub(k);
    let hi = (input + pad).saturating_sub(k).min(out);
    (lo, hi.max(lo))
}
