//! A small f64 neural network trainer.
//!
//! Tensors are stored per sample in HWC order. Networks are a linear body of
//! layers built from architecture tokens, followed by a fixed flatten and
//! softmax classifier head. Training is plain minibatch SGD on mean
//! cross-entropy.

pub mod io;
mod layers;
mod network;
mod shape;
mod train;

pub use layers::{
    dropout_mask, maxpool_backward, maxpool_forward, softmax, Conv2d, Dense, ParamArray, Residual,
};
pub use network::{build_network, Gradients, Layer, LayerInstance, Network};
pub use shape::TensorShape;
pub use train::{train, EpochRecord, Samples, TrainOptions, TrainingHistory};
