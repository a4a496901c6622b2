//! Central finite-difference verification of analytic gradients.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::layer::Layer;
use super::network::{Gradients, Network};
use crate::error::{Error, Result};
use crate::tensor::{Real, Tensor};

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckOptions {
    pub step: Real,
    pub tolerance: Real,
    /// Check at most this many randomly chosen entries per tensor.
    pub max_per_tensor: Option<usize>,
    pub seed: u64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        GradCheckOptions {
            step: 1e-5,
            tolerance: 1e-4,
            max_per_tensor: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Offender {
    /// Parameter tensor index; `None` for the input.
    pub tensor: Option<usize>,
    pub index: usize,
    pub analytic: Real,
    pub numeric: Real,
    pub relative_error: Real,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub checked: usize,
    pub failures: usize,
    pub max_relative_error: Real,
    /// Largest relative errors, worst first (at most ten).
    pub worst: Vec<Offender>,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }

    fn merge(mut self, other: GradCheckReport) -> GradCheckReport {
        self.checked += other.checked;
        self.failures += other.failures;
        self.max_relative_error = self.max_relative_error.max(other.max_relative_error);
        self.worst.extend(other.worst);
        self.finish()
    }

    fn finish(mut self) -> GradCheckReport {
        self.worst
            .sort_by(|a, b| b.relative_error.total_cmp(&a.relative_error));
        self.worst.truncate(10);
        self
    }
}

pub fn relative_error(analytic: Real, numeric: Real) -> Real {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

struct Collector<'a> {
    options: &'a GradCheckOptions,
    report: GradCheckReport,
}

impl<'a> Collector<'a> {
    fn new(options: &'a GradCheckOptions) -> Self {
        Collector {
            options,
            report: GradCheckReport {
                checked: 0,
                failures: 0,
                max_relative_error: 0.0,
                worst: Vec::new(),
            },
        }
    }

    fn record(&mut self, tensor: Option<usize>, index: usize, analytic: Real, numeric: Real) {
        let rel = relative_error(analytic, numeric);
        self.report.checked += 1;
        if !(rel <= self.options.tolerance) {
            self.report.failures += 1;
        }
        self.report.max_relative_error = self.report.max_relative_error.max(rel);
        self.report.worst.push(Offender {
            tensor,
            index,
            analytic,
            numeric,
            relative_error: rel,
        });
        if self.report.worst.len() > 64 {
            self.report = std::mem::replace(&mut self.report, empty()).finish();
        }
    }

    fn indices(&self, len: usize, salt: u64) -> Vec<usize> {
        match self.options.max_per_tensor {
            Some(k) if k < len => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.options.seed ^ salt.wrapping_mul(0x9e37_79b9));
                let mut picked = sample(&mut rng, len, k).into_vec();
                picked.sort_unstable();
                picked
            }
            _ => (0..len).collect(),
        }
    }
}

fn empty() -> GradCheckReport {
    GradCheckReport {
        checked: 0,
        failures: 0,
        max_relative_error: 0.0,
        worst: Vec::new(),
    }
}

fn require_double_precision() -> Result<()> {
    if std::mem::size_of::<Real>() != 8 {
        return Err(Error::invalid("gradient checks need the 64-bit build"));
    }
    Ok(())
}

/// Compares the network's backward pass with central differences of the
/// inference-mode loss, for every parameter (or a sample of them).
pub fn gradient_check(
    network: &Network,
    input: &Tensor,
    label: usize,
    options: &GradCheckOptions,
) -> Result<GradCheckReport> {
    let trace = network.forward_train::<ChaCha8Rng>(input, None)?;
    let (analytic, _) = network.backward(&trace, label)?;
    compare_gradients(network, input, label, &analytic, options)
}

/// Like [`gradient_check`] but against caller-supplied analytic gradients.
pub fn compare_gradients(
    network: &Network,
    input: &Tensor,
    label: usize,
    analytic: &Gradients,
    options: &GradCheckOptions,
) -> Result<GradCheckReport> {
    require_double_precision()?;
    let shapes: Vec<Vec<usize>> = network.params().iter().map(|p| p.shape().to_vec()).collect();
    if shapes.len() != analytic.tensors.len()
        || shapes.iter().zip(&analytic.tensors).any(|(s, g)| s.as_slice() != g.shape())
    {
        return Err(Error::invalid("analytic gradients do not match the network parameters"));
    }
    let mut probe = network.clone();
    let mut out = Collector::new(options);
    let h = options.step;
    for (t, grad) in analytic.tensors.iter().enumerate() {
        for i in out.indices(grad.len(), t as u64 + 1) {
            let original = probe.params()[t].data()[i];
            probe.params_mut()[t].data_mut()[i] = original + h;
            let plus = probe.loss(input, label)?;
            probe.params_mut()[t].data_mut()[i] = original - h;
            let minus = probe.loss(input, label)?;
            probe.params_mut()[t].data_mut()[i] = original;
            out.record(Some(t), i, grad.data()[i], (plus - minus) / (2.0 * h));
        }
    }
    Ok(out.report.finish())
}

/// Checks the gradient of the loss with respect to the network input.
pub fn check_input_gradient(
    network: &Network,
    input: &Tensor,
    label: usize,
    options: &GradCheckOptions,
) -> Result<GradCheckReport> {
    require_double_precision()?;
    let analytic = network.input_gradient(input, label)?;
    let mut out = Collector::new(options);
    let h = options.step;
    let mut x = input.clone();
    for i in out.indices(x.len(), 0) {
        let original = x.data()[i];
        x.data_mut()[i] = original + h;
        let plus = network.loss(&x, label)?;
        x.data_mut()[i] = original - h;
        let minus = network.loss(&x, label)?;
        x.data_mut()[i] = original;
        out.record(None, i, analytic.data()[i], (plus - minus) / (2.0 * h));
    }
    Ok(out.report.finish())
}

/// Checks one layer in isolation against the scalar loss `Σ r ⊙ layer(x)` for a
/// fixed random `r`. Dropout layers reuse the same mask for every evaluation.
pub fn check_layer(layer: &Layer, input: &Tensor, options: &GradCheckOptions) -> Result<GradCheckReport> {
    require_double_precision()?;
    let seed = options.seed;
    let run = |layer: &Layer, x: &Tensor| -> Result<(Tensor, super::layer::LayerCache)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        layer.forward(x, Some(&mut rng))
    };
    let (y, cache) = run(layer, input)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let weights = Tensor::from_fn(y.shape(), |_| rng.random_range(-1.0..1.0))?;
    let objective = |layer: &Layer, x: &Tensor| -> Result<Real> {
        Ok(run(layer, x)?.0.mul(&weights)?.sum())
    };
    let (dx, dparams) = layer.backward(&weights, &cache)?;
    let h = options.step;

    let mut out = Collector::new(options);
    let mut x = input.clone();
    for i in out.indices(x.len(), 0) {
        let original = x.data()[i];
        x.data_mut()[i] = original + h;
        let plus = objective(layer, &x)?;
        x.data_mut()[i] = original - h;
        let minus = objective(layer, &x)?;
        x.data_mut()[i] = original;
        out.record(None, i, dx.data()[i], (plus - minus) / (2.0 * h));
    }
    let mut report = out.report;

    let mut probe = layer.clone();
    for (t, grad) in dparams.iter().enumerate() {
        let mut out = Collector::new(options);
        for i in out.indices(grad.len(), t as u64 + 1) {
            let original = probe.params()[t].data()[i];
            probe.params_mut()[t].data_mut()[i] = original + h;
            let plus = objective(&probe, input)?;
            probe.params_mut()[t].data_mut()[i] = original - h;
            let minus = objective(&probe, input)?;
            probe.params_mut()[t].data_mut()[i] = original;
            out.record(Some(t), i, grad.data()[i], (plus - minus) / (2.0 * h));
        }
        report = report.merge(out.report);
    }
    Ok(report.finish())
}
