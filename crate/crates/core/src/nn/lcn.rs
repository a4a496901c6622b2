//! Local contrast normalization, applied to every feature map independently.
//!
//! With `A` the `w×w` box mean over the in-bounds part of the window (zero
//! padding, normalized by the number of in-bounds cells so that constant maps
//! normalize to zero up to the border):
//!
//! ```text
//! v   = f - A f
//! out = v / max(c, sqrt(A v²))
//! ```

use crate::error::{Error, Result};
use crate::tensor::{Real, Tensor};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalContrastNorm {
    pub window: usize,
    /// Floor of the divisive term.
    pub floor: Real,
}

#[derive(Debug, Clone)]
pub struct LcnCache {
    centered: Tensor,
    /// `sqrt(A v²)` per position.
    spread: Tensor,
}

impl LocalContrastNorm {
    pub fn new(window: usize, floor: Real) -> Result<Self> {
        if window == 0 || window % 2 == 0 {
            return Err(Error::invalid(format!(
                "local contrast window must be odd and >= 1, got {window}"
            )));
        }
        if !(floor > 0.0) {
            return Err(Error::invalid(format!(
                "local contrast floor must be > 0, got {floor}"
            )));
        }
        Ok(LocalContrastNorm { window, floor })
    }

    fn check(&self, shape: &[usize]) -> Result<()> {
        if shape.len() != 3 {
            return Err(Error::ShapeMismatch {
                op: "local_contrast_norm",
                left: shape.to_vec(),
                right: vec![self.window, self.window],
            });
        }
        Ok(())
    }

    pub fn forward(&self, input: &Tensor) -> Result<(Tensor, LcnCache)> {
        self.check(input.shape())?;
        let mean = box_mean(input, self.window)?;
        let centered = input.sub(&mean)?;
        let spread = box_mean(&centered.map(|v| v * v), self.window)?.map(Real::sqrt);
        let floor = self.floor;
        let out = Tensor::new(
            input.shape().to_vec(),
            centered
                .data()
                .iter()
                .zip(spread.data())
                .map(|(&v, &s)| v / s.max(floor))
                .collect(),
        )?;
        Ok((out, LcnCache { centered, spread }))
    }

    pub fn backward(&self, upstream: &Tensor, cache: Option<&LcnCache>) -> Result<Tensor> {
        let cache = cache.ok_or(Error::MissingCache {
            layer: "LocalContrastNorm",
        })?;
        if upstream.shape() != cache.centered.shape() {
            return Err(Error::ShapeMismatch {
                op: "local_contrast_norm_backward",
                left: upstream.shape().to_vec(),
                right: cache.centered.shape().to_vec(),
            });
        }
        let shape = upstream.shape().to_vec();
        let n = upstream.len();
        let (g, v, s) = (upstream.data(), cache.centered.data(), cache.spread.data());
        let mut dv = vec![0.0; n];
        let mut ds = vec![0.0; n];
        for k in 0..n {
            let d = s[k].max(self.floor);
            dv[k] = g[k] / d;
            if s[k] > self.floor {
                // d(out)/d(s) through the divisor; s = sqrt(A v²) so ds/d(A v²) = 1 / 2s.
                ds[k] = -g[k] * v[k] / (d * d) / (2.0 * s[k]);
            }
        }
        let back = box_mean_adjoint(&Tensor::new(shape.clone(), ds)?, self.window)?;
        for k in 0..n {
            dv[k] += 2.0 * v[k] * back.data()[k];
        }
        let dv = Tensor::new(shape, dv)?;
        dv.sub(&box_mean_adjoint(&dv, self.window)?)
    }
}

/// Number of in-bounds cells of the window centred at each position of one plane.
fn window_counts(h: usize, w: usize, window: usize) -> Vec<Real> {
    let half = window / 2;
    let span = |i: usize, n: usize| ((i + half + 1).min(n) - i.saturating_sub(half)) as Real;
    (0..h * w).map(|k| span(k / w, h) * span(k % w, w)).collect()
}

/// Zero-padded `w×w` sum over each `[H, W]` plane of a `[C, H, W]` tensor.
fn box_sum(x: &Tensor, window: usize) -> Vec<Real> {
    let (c, h, w) = (x.shape()[0], x.shape()[1], x.shape()[2]);
    let half = window / 2;
    let src = x.data();
    let mut out = vec![0.0; src.len()];
    let mut rows = vec![0.0; h * w];
    for ch in 0..c {
        let plane = &src[ch * h * w..(ch + 1) * h * w];
        // The box is separable: horizontal pass, then vertical.
        for y in 0..h {
            for xx in 0..w {
                let lo = xx.saturating_sub(half);
                let hi = (xx + half + 1).min(w);
                rows[y * w + xx] = plane[y * w + lo..y * w + hi].iter().sum();
            }
        }
        let dst = &mut out[ch * h * w..(ch + 1) * h * w];
        for y in 0..h {
            let lo = y.saturating_sub(half);
            let hi = (y + half + 1).min(h);
            for xx in 0..w {
                dst[y * w + xx] = (lo..hi).map(|yy| rows[yy * w + xx]).sum();
            }
        }
    }
    out
}

fn box_mean(x: &Tensor, window: usize) -> Result<Tensor> {
    let (h, w) = (x.shape()[1], x.shape()[2]);
    let counts = window_counts(h, w, window);
    let mut sums = box_sum(x, window);
    for (k, s) in sums.iter_mut().enumerate() {
        *s /= counts[k % (h * w)];
    }
    Tensor::new(x.shape().to_vec(), sums)
}

/// Transpose of [`box_mean`]: spread `g / count` back over each window.
fn box_mean_adjoint(g: &Tensor, window: usize) -> Result<Tensor> {
    let (h, w) = (g.shape()[1], g.shape()[2]);
    let counts = window_counts(h, w, window);
    let scaled = Tensor::new(
        g.shape().to_vec(),
        g.data()
            .iter()
            .enumerate()
            .map(|(k, &v)| v / counts[k % (h * w)])
            .collect(),
    )?;
    Tensor::new(g.shape().to_vec(), box_sum(&scaled, window))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    // Straight double loop over the definition.
    fn reference(x: &Tensor, window: usize, floor: Real) -> Vec<Real> {
        let (c, h, w) = (x.shape()[0], x.shape()[1], x.shape()[2]);
        let half = window as isize / 2;
        let inside = |y: isize, xx: isize| -> Real {
            if y < 0 || xx < 0 || y >= h as isize || xx >= w as isize {
                0.0
            } else {
                1.0
            }
        };
        let at = |buf: &[Real], ch: usize, y: isize, xx: isize| -> Real {
            if y < 0 || xx < 0 || y >= h as isize || xx >= w as isize {
                0.0
            } else {
                buf[(ch * h + y as usize) * w + xx as usize]
            }
        };
        let mut v = vec![0.0; x.len()];
        for ch in 0..c {
            for y in 0..h as isize {
                for xx in 0..w as isize {
                    let (mut m, mut area) = (0.0, 0.0);
                    for dy in -half..=half {
                        for dx in -half..=half {
                            m += at(x.data(), ch, y + dy, xx + dx);
                            area += inside(y + dy, xx + dx);
                        }
                    }
                    v[(ch * h + y as usize) * w + xx as usize] =
                        at(x.data(), ch, y, xx) - m / area;
                }
            }
        }
        let mut out = vec![0.0; x.len()];
        for ch in 0..c {
            for y in 0..h as isize {
                for xx in 0..w as isize {
                    let (mut m, mut area) = (0.0, 0.0);
                    for dy in -half..=half {
                        for dx in -half..=half {
                            let q = at(&v, ch, y + dy, xx + dx);
                            m += q * q;
                            area += inside(y + dy, xx + dx);
                        }
                    }
                    let k = (ch * h + y as usize) * w + xx as usize;
                    out[k] = v[k] / (m / area).sqrt().max(floor);
                }
            }
        }
        out
    }

    #[test]
    fn matches_double_loop_reference() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for floor in [1.0, 0.05] {
            let x = Tensor::from_fn(&[3, 5, 5], |_| rng.random_range(-2.0..2.0)).unwrap();
            let lcn = LocalContrastNorm::new(3, floor).unwrap();
            let (y, _) = lcn.forward(&x).unwrap();
            for (a, b) in y.data().iter().zip(reference(&x, 3, floor)) {
                assert!((a - b).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn window_one_zeroes_everything() {
        let x = Tensor::from_fn(&[2, 3, 3], |i| i as Real).unwrap();
        let (y, _) = LocalContrastNorm::new(1, 1.0).unwrap().forward(&x).unwrap();
        assert!(y.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn constant_input_normalizes_to_zero() {
        for (value, window) in [(3.5, 3), (0.1, 5), (-7.25, 5)] {
            let x = Tensor::full(&[2, 6, 7], value).unwrap();
            let (y, _) = LocalContrastNorm::new(window, 1.0).unwrap().forward(&x).unwrap();
            assert!(y.data().iter().all(|&v| v.abs() < 1e-12), "{value} {window}");
        }
    }

    #[test]
    fn even_window_rejected() {
        assert!(LocalContrastNorm::new(4, 1.0).is_err());
        assert!(LocalContrastNorm::new(3, 0.0).is_err());
    }
}
