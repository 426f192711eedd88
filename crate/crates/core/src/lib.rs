//! Secure compressed-image transmission over a MIMO wiretap channel.
//!
//! A convolutional autoencoder ([`cae`]) compresses images to latent codes,
//! which are sent over a multi-antenna link ([`wiretap`]) that hides
//! artificial noise in the null space of the legitimate receiver's channel.
//! [`modem`] provides BPSK and Rayleigh-fading BER machinery, [`metrics`]
//! the reconstruction measures, and [`pipeline`] the experiment driver
//! behind the `uavsec` command-line tool.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the precision for common uses.

// Negated comparisons below deliberately treat NaN as invalid input.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cae;
pub mod error;
pub mod linalg;
pub mod metrics;
pub mod modem;
pub mod pipeline;
pub mod rng;
pub mod scalar;
pub mod tensor;
pub mod wiretap;

pub use error::{Error, Result};
pub use rng::RandomStream;
pub use scalar::Scalar;

pub type Complex64 = num_complex::Complex<f64>;
pub type ComplexMatrix64 = linalg::ComplexMatrix<f64>;
pub type ComplexVector64 = linalg::ComplexVector<f64>;
pub type ChannelPair64 = wiretap::ChannelPair<f64>;
pub type ModelParams32 = cae::ModelParams<f32>;
pub type ModelParams64 = cae::ModelParams<f64>;
pub type ImageTensor32 = tensor::ImageTensor<f32>;
pub type ImageTensor64 = tensor::ImageTensor<f64>;
