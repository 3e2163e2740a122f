//! Audio captioning with low- and high-dimensional feature fusion.
//!
//! The pipeline: WAV audio → 64-bin log-mel spectrograms → a four-block
//! convolutional encoder that emits a high-dimensional feature and a fused
//! low/high feature → two transformer decoders whose log-softmax outputs are
//! summed into a fused distribution → greedy or beam caption decoding.
//!
//! Everything runs on a self-contained f64 tensor library with reverse-mode
//! automatic differentiation ([`tensor`]), so training, inference, and the
//! gradient checks share one numeric substrate. Supporting modules cover the
//! synthetic corpus generator ([`dataset`]), caption metrics ([`metrics`]),
//! and the command-line interface ([`cli`]).

pub mod audio;
pub mod cli;
pub mod config;
pub mod dataset;
pub mod decoder;
pub mod encoder;
pub mod inference;
pub mod metrics;
pub mod model;
pub mod tensor;
pub mod training;
pub mod vocab;
