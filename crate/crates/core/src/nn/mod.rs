//! Layers, loss, optimizer, training loop and gradient verification.

mod activation;
mod conv;
mod dense;
mod dropout;
pub mod gradcheck;
mod layer;
mod lcn;
mod network;
mod optim;
mod pool;
mod softmax;
mod train;

pub use activation::{relu_backward, relu_forward};
pub use conv::{ConvCache, Padding, TemporalConv};
pub use dense::{DenseCache, FullyConnected};
pub use dropout::{Dropout, DropoutCache};
pub use gradcheck::{gradient_check, GradCheckOptions, GradCheckReport};
pub use layer::{Layer, LayerCache};
pub use lcn::{LcnCache, LocalContrastNorm};
pub use network::{BuildOptions, Gradients, Network, Trace};
pub use optim::{Sgd, TrainConfig};
pub use pool::{MaxPool, PoolCache};
pub use softmax::{softmax, softmax_backward, softmax_xent, SoftmaxXent};
pub use train::{accuracy, argmax, train, train_with, EpochStats, Sample};
