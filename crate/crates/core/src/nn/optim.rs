use crate::error::{Error, Result};
use crate::tensor::{to_storage, Real, Tensor};

use super::network::{Gradients, Network};

/// Hyperparameters of minibatch SGD with momentum and L2 weight decay.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: Real,
    pub momentum: Real,
    pub weight_decay: Real,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.01,
            momentum: 0.9,
            weight_decay: 5e-4,
            batch_size: 64,
            epochs: 50,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return Err(Error::invalid(format!(
                "learning rate must be > 0, got {}",
                self.learning_rate
            )));
        }
        if !(self.weight_decay >= 0.0) {
            return Err(Error::invalid(format!(
                "weight decay must be >= 0, got {}",
                self.weight_decay
            )));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::invalid(format!(
                "momentum must be in [0, 1), got {}",
                self.momentum
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch size must be >= 1"));
        }
        Ok(())
    }
}

/// Momentum SGD state:
///
/// ```text
/// velocity = momentum * velocity - lr * (grad + weight_decay * param)
/// param   += velocity
/// ```
#[derive(Debug, Clone)]
pub struct Sgd {
    velocity: Vec<Tensor>,
}

impl Sgd {
    pub fn new(network: &Network) -> Result<Self> {
        Ok(Sgd {
            velocity: Gradients::zeros_like(network)?.tensors,
        })
    }

    /// Applies one update. Parameters are rounded to single precision after the
    /// update; the velocity keeps full precision.
    pub fn step(&mut self, network: &mut Network, grads: &Gradients, config: &TrainConfig) -> Result<()> {
        config.validate()?;
        let mut params = network.params_mut();
        if params.len() != grads.tensors.len() || params.len() != self.velocity.len() {
            return Err(Error::invalid(format!(
                "{} parameter tensors but {} gradients",
                params.len(),
                grads.tensors.len()
            )));
        }
        for ((param, grad), vel) in params.iter_mut().zip(&grads.tensors).zip(&mut self.velocity) {
            if param.shape() != grad.shape() {
                return Err(Error::ShapeMismatch {
                    op: "sgd_step",
                    left: param.shape().to_vec(),
                    right: grad.shape().to_vec(),
                });
            }
            let p = param.data_mut();
            for ((p, &g), v) in p.iter_mut().zip(grad.data()).zip(vel.data_mut()) {
                *v = config.momentum * *v - config.learning_rate * (g + config.weight_decay * *p);
                *p = to_storage(*p + *v);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netspec::parse_arch;
    use crate::nn::BuildOptions;

    fn scalar_net(w: Real) -> Network {
        // D1-S2 has a 2x1 weight and 2 biases; use the first weight entry as the scalar.
        let mut net = Network::zeros(&parse_arch("D1-S2", 1).unwrap(), &BuildOptions::default()).unwrap();
        net.params_mut()[0].data_mut()[0] = w;
        net
    }

    fn grads(net: &Network, g: Real) -> Gradients {
        let mut grads = Gradients::zeros_like(net).unwrap();
        grads.tensors[0].data_mut()[0] = g;
        grads
    }

    #[test]
    fn vanilla_sgd() {
        let mut net = scalar_net(1.0);
        let cfg = TrainConfig { learning_rate: 0.5, momentum: 0.0, weight_decay: 0.0, ..Default::default() };
        let mut sgd = Sgd::new(&net).unwrap();
        let g = grads(&net, 0.25);
        sgd.step(&mut net, &g, &cfg).unwrap();
        assert_eq!(net.params()[0].data()[0], 1.0 - 0.5 * 0.25);
    }

    #[test]
    fn decay_only_shrinks_geometrically() {
        let mut net = scalar_net(1.0);
        let cfg = TrainConfig { learning_rate: 0.5, momentum: 0.0, weight_decay: 0.5, ..Default::default() };
        let mut sgd = Sgd::new(&net).unwrap();
        let g = grads(&net, 0.0);
        for step in 1..=3 {
            sgd.step(&mut net, &g, &cfg).unwrap();
            assert_eq!(net.params()[0].data()[0], (0.75 as Real).powi(step));
        }
    }

    #[test]
    fn momentum_two_steps_by_hand() {
        let (lr, mu, w0, g) = (0.125, 0.9, 1.0, 0.5);
        let mut net = scalar_net(w0);
        let cfg = TrainConfig { learning_rate: lr, momentum: mu, weight_decay: 0.0, ..Default::default() };
        let mut sgd = Sgd::new(&net).unwrap();
        let gr = grads(&net, g);
        sgd.step(&mut net, &gr, &cfg).unwrap();
        sgd.step(&mut net, &gr, &cfg).unwrap();
        // v1 = -lr g, w1 = w0 + v1; v2 = mu v1 - lr g, w2 = w1 + v2
        let v1 = -lr * g;
        let v2 = mu * v1 - lr * g;
        let expect = ((w0 + v1) as f32 as Real + v2) as f32 as Real;
        assert_eq!(net.params()[0].data()[0], expect);
        assert!((expect - 0.81875).abs() < 1e-6);
    }

    #[test]
    fn shape_mismatch_rejected() {
        let mut net = scalar_net(1.0);
        let mut sgd = Sgd::new(&net).unwrap();
        let mut g = grads(&net, 0.0);
        g.tensors[0] = Tensor::zeros(&[3]).unwrap();
        assert!(sgd.step(&mut net, &g, &TrainConfig::default()).is_err());
    }
}
