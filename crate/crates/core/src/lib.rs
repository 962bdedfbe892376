//! Face recognition on log-polar eigenfaces.
//!
//! The pipeline registers each face image with a log-polar resampling about
//! its center ([`logpolar`]), projects it onto a PCA eigenspace learned from
//! the training images ([`eigenspace`]) and classifies the projection with a
//! tanh multilayer perceptron trained by batch backpropagation with momentum
//! and delta-bar-delta learning rates ([`mlp`]). [`pipeline`] ties the stages
//! together with dataset loading, evaluation metrics and model persistence.
//!
//! Data-parallel loops (batch gradients, per-image transforms and
//! projections, hyperparameter sweeps) run on rayon when the `parallel`
//! feature is enabled and sequentially otherwise, with identical results.

pub mod eigenspace;
pub mod error;
pub mod image;
pub mod logpolar;
pub mod mlp;
pub mod par;
pub mod pipeline;
pub mod selftest;
pub mod synth;

pub use error::{Error, Result};
pub use image::{GrayImage, ImageVector};
