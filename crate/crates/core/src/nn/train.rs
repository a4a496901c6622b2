use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::network::{Gradients, Network};
use super::optim::{Sgd, TrainConfig};
use crate::error::{Error, Result};
use crate::tensor::{Real, Tensor};

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub input: Tensor,
    pub label: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean cross-entropy over the epoch's training passes (dropout active).
    pub loss: Real,
    /// Accuracy of the training passes themselves.
    pub accuracy: Real,
}

/// Index of the largest entry; ties go to the smallest index.
pub fn argmax(values: &[Real]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Minibatch SGD over `samples` for `config.epochs` epochs. The sample order
/// and dropout masks come from a single stream seeded by `config.seed`, so a
/// fixed seed and data order give bitwise-identical parameters.
pub fn train(network: &mut Network, samples: &[Sample], config: &TrainConfig) -> Result<Vec<EpochStats>> {
    train_with(network, samples, config, |_| {})
}

/// [`train`] with a callback invoked after every epoch.
pub fn train_with(
    network: &mut Network,
    samples: &[Sample],
    config: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochStats),
) -> Result<Vec<EpochStats>> {
    config.validate()?;
    if samples.is_empty() {
        return Err(Error::invalid("no training samples"));
    }
    let expected = network.input_shape();
    if let Some(bad) = samples.iter().find(|s| s.input.shape() != expected.as_slice()) {
        return Err(Error::ShapeMismatch {
            op: "train",
            left: bad.input.shape().to_vec(),
            right: expected,
        });
    }
    if let Some(bad) = samples.iter().find(|s| s.label >= network.classes()) {
        return Err(Error::invalid(format!(
            "label {} out of range for {} classes",
            bad.label,
            network.classes()
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut sgd = Sgd::new(network)?;
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut history = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let (mut loss_sum, mut correct) = (0.0, 0usize);
        for batch in order.chunks(config.batch_size) {
            let mut total = Gradients::zeros_like(network)?;
            for &i in batch {
                let sample = &samples[i];
                let trace = network.forward_train(&sample.input, Some(&mut rng))?;
                if argmax(trace.probabilities.data()) == sample.label {
                    correct += 1;
                }
                let (grads, loss) = network.backward(&trace, sample.label)?;
                loss_sum += loss;
                total.accumulate(&grads)?;
            }
            total.scale(1.0 / batch.len() as Real);
            sgd.step(network, &total, config)?;
        }
        let stats = EpochStats {
            epoch: epoch + 1,
            loss: loss_sum / samples.len() as Real,
            accuracy: correct as Real / samples.len() as Real,
        };
        on_epoch(&stats);
        history.push(stats);
    }
    Ok(history)
}

/// Inference accuracy of `network` on `samples`.
pub fn accuracy(network: &Network, samples: &[Sample]) -> Result<Real> {
    if samples.is_empty() {
        return Ok(0.0);
    }
    let mut correct = 0;
    for s in samples {
        if argmax(network.predict(&s.input)?.data()) == s.label {
            correct += 1;
        }
    }
    Ok(correct as Real / samples.len() as Real)
}
