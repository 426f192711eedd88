//! Image and latent-code containers.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// `width × height × channels` image, stored row-major with channels
/// innermost. Loaded images are normalized to `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageTensor<T> {
    width: usize,
    height: usize,
    channels: usize,
    values: Vec<T>,
}

impl<T: Scalar> ImageTensor<T> {
    pub fn new(width: usize, height: usize, channels: usize, values: Vec<T>) -> Result<Self> {
        if values.len() != width * height * channels {
            return Err(Error::shape(
                format!("{width}x{height}x{channels} = {} values", width * height * channels),
                values.len(),
            ));
        }
        if !values.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("image values"));
        }
        Ok(Self { width, height, channels, values })
    }

    /// Builds an image from 8-bit pixels, mapping 0 → 0.0 and 255 → 1.0.
    pub fn from_bytes(width: usize, height: usize, channels: usize, bytes: &[u8]) -> Result<Self> {
        let scale = T::of(1.0 / 255.0);
        Self::new(width, height, channels, bytes.iter().map(|&b| T::of(b as f64) * scale).collect())
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: T) -> Self {
        Self { width, height, channels, values: vec![value; width * height * channels] }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.width, self.height, self.channels)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn in_unit_range(&self) -> bool {
        self.values.iter().all(|&v| v >= T::zero() && v <= T::one())
    }

    pub fn cast<U: Scalar>(&self) -> ImageTensor<U> {
        ImageTensor {
            width: self.width,
            height: self.height,
            channels: self.channels,
            values: self.values.iter().map(|v| U::of(v.as_f64())).collect(),
        }
    }
}

/// Encoder output: the unit of transmission.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentCode<T>(pub Vec<T>);

impl<T: Scalar> LatentCode<T> {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[T] {
        &self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}
