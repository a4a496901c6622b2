use rand::Rng;

use crate::error::{Error, Result};
use crate::tensor::{Real, Tensor};

/// Inverted dropout: survivors are scaled by `1/(1-p)` during training so that
/// inference is the identity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dropout {
    pub rate: Real,
}

#[derive(Debug, Clone)]
pub struct DropoutCache {
    /// Per-entry multiplier (`0` or `1/(1-p)`); `None` when the pass was the identity.
    mask: Option<Tensor>,
    shape: Vec<usize>,
}

impl Dropout {
    pub fn new(rate: Real) -> Result<Self> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::invalid(format!("dropout rate must be in [0, 1), got {rate}")));
        }
        Ok(Dropout { rate })
    }

    /// Training mode when `rng` is given, inference otherwise.
    pub fn forward<R: Rng + ?Sized>(
        &self,
        x: &Tensor,
        rng: Option<&mut R>,
    ) -> Result<(Tensor, DropoutCache)> {
        let identity = || DropoutCache {
            mask: None,
            shape: x.shape().to_vec(),
        };
        let rng = match rng {
            Some(rng) if self.rate > 0.0 => rng,
            _ => return Ok((x.clone(), identity())),
        };
        let keep = 1.0 / (1.0 - self.rate);
        let mask = Tensor::from_fn(x.shape(), |_| {
            if rng.random::<f64>() < self.rate as f64 {
                0.0
            } else {
                keep
            }
        })?;
        let y = x.mul(&mask)?;
        Ok((
            y,
            DropoutCache {
                mask: Some(mask),
                shape: x.shape().to_vec(),
            },
        ))
    }

    pub fn backward(&self, upstream: &Tensor, cache: Option<&DropoutCache>) -> Result<Tensor> {
        let cache = cache.ok_or(Error::MissingCache { layer: "Dropout" })?;
        if upstream.shape() != cache.shape.as_slice() {
            return Err(Error::ShapeMismatch {
                op: "dropout_backward",
                left: upstream.shape().to_vec(),
                right: cache.shape.clone(),
            });
        }
        match &cache.mask {
            Some(mask) => upstream.mul(mask),
            None => Ok(upstream.clone()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_rate_and_inference_are_identity() {
        let x = Tensor::from_fn(&[50], |i| i as Real - 20.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (y, _) = Dropout::new(0.0).unwrap().forward(&x, Some(&mut rng)).unwrap();
        assert_eq!(y, x);
        let (y, _) = Dropout::new(0.9).unwrap().forward::<ChaCha8Rng>(&x, None).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn inverted_scaling_preserves_mean() {
        let x = Tensor::full(&[100_000], 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let (y, _) = Dropout::new(0.5).unwrap().forward(&x, Some(&mut rng)).unwrap();
        let mean = y.sum() / 100_000.0;
        assert!((0.98..=1.02).contains(&mean), "mean {mean}");
        assert!(y.data().iter().all(|&v| v == 0.0 || v == 2.0));
    }

    #[test]
    fn backward_uses_same_mask() {
        let x = Tensor::full(&[64], 3.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let d = Dropout::new(0.3).unwrap();
        let (y, cache) = d.forward(&x, Some(&mut rng)).unwrap();
        let g = d.backward(&Tensor::full(&[64], 1.0).unwrap(), Some(&cache)).unwrap();
        for (gv, yv) in g.data().iter().zip(y.data()) {
            assert_eq!(*gv * 3.0, *yv);
        }
    }

    #[test]
    fn rate_bounds() {
        assert!(Dropout::new(1.0).is_err());
        assert!(Dropout::new(-0.1).is_err());
    }
}
