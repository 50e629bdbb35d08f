//! A small 1-D convolutional network engine and the monitor pipelines built on it.
//!
//! Everything runs in `f64` on a single thread. Trained weights are rounded to
//! `f32` so checkpoints reload bit-for-bit.

mod monitor;
mod net;
mod train;

pub use monitor::{Examples, MonitorKind, MonitorModel, Prediction, Profile, Schedule, TrainMeta};
pub use net::{
    cross_entropy, mse, softmax, to_channel_major, to_time_major, Activation, LayerSpec, Net, NetSpec, Trace,
    LEAKY_SLOPE, RELU_BIAS,
};
pub use train::{combined_grad, fine_tune, train_classifier, train_estimator, Adam, TrainOpts, Trained};
