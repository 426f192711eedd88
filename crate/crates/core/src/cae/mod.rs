//! Convolutional autoencoder.
//!
//! Encoder: two 16-filter 5×5 convolutions (stride 1, zero "same" padding,
//! rectified linear) and a dense layer to a latent code of length `L`.
//! Decoder: a dense layer back to a `w × h × 16` feature map and two 5×5
//! transposed convolutions, the last squashed into `[0, 1]` by a logistic.

mod checkpoint;
mod conv;
mod network;
mod train;

use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::standard_normal;
use crate::scalar::Scalar;
pub use crate::tensor::{ImageTensor, LatentCode};

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, CHECKPOINT_VERSION};
pub use train::{
    gradient_check, gradient_check_with, loss_and_gradients, reconstruction_loss, train, train_model, Adam, TrainConfig,
    TrainOutcome,
};

/// Latent lengths swept by default.
pub const DEFAULT_LATENT_LENGTHS: [usize; 4] = [32, 64, 128, 256];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Identity,
    Relu,
    Sigmoid,
}

impl Activation {
    #[inline]
    pub fn apply<T: Scalar>(self, x: T) -> T {
        match self {
            Activation::Identity => x,
            Activation::Relu => x.max(T::zero()),
            Activation::Sigmoid => T::one() / (T::one() + (-x).exp()),
        }
    }

    /// Derivative expressed through the activation's output `y`.
    #[inline]
    pub fn derivative_from_output<T: Scalar>(self, y: T) -> T {
        match self {
            Activation::Identity => T::one(),
            Activation::Relu => {
                if y > T::zero() {
                    T::one()
                } else {
                    T::zero()
                }
            }
            Activation::Sigmoid => y * (T::one() - y),
        }
    }

    pub(crate) fn code(self) -> u32 {
        match self {
            Activation::Identity => 0,
            Activation::Relu => 1,
            Activation::Sigmoid => 2,
        }
    }

    pub(crate) fn from_code(code: u32) -> Option<Self> {
        match code {
            0 => Some(Activation::Identity),
            1 => Some(Activation::Relu),
            2 => Some(Activation::Sigmoid),
            _ => None,
        }
    }
}

/// Architecture hyper-parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CaeConfig {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub latent_length: usize,
    pub filters: usize,
    pub kernel: usize,
    pub hidden_activation: Activation,
    pub output_activation: Activation,
}

impl CaeConfig {
    /// 16 filters of 5×5, rectified hidden layers, logistic output.
    pub fn new(width: usize, height: usize, channels: usize, latent_length: usize) -> Self {
        Self {
            width,
            height,
            channels,
            latent_length,
            filters: 16,
            kernel: 5,
            hidden_activation: Activation::Relu,
            output_activation: Activation::Sigmoid,
        }
    }

    /// 28×28 grayscale digits.
    pub fn digits(latent_length: usize) -> Self {
        Self::new(28, 28, 1, latent_length)
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 || self.channels == 0 || self.latent_length == 0 || self.filters == 0 {
            return Err(Error::ConfigInvalid(format!("autoencoder dimensions must be positive: {self:?}")));
        }
        if self.kernel.is_multiple_of(2) {
            return Err(Error::ConfigInvalid(format!("kernel size must be odd, got {}", self.kernel)));
        }
        Ok(())
    }

    pub fn image_len(&self) -> usize {
        self.width * self.height * self.channels
    }

    pub fn feature_len(&self) -> usize {
        self.width * self.height * self.filters
    }

    /// `(rows, cols)` of every parameter tensor, in [`ParamId`] order.
    pub fn param_shapes(&self) -> [(usize, usize); PARAM_COUNT] {
        let (k2, c, f, l, feat) = (self.kernel * self.kernel, self.channels, self.filters, self.latent_length, self.feature_len());
        [
            (k2 * c, f),
            (1, f),
            (k2 * f, f),
            (1, f),
            (feat, l),
            (1, l),
            (l, feat),
            (1, feat),
            (k2 * f, f),
            (1, f),
            (k2 * c, f),
            (1, c),
        ]
    }
}

pub const PARAM_COUNT: usize = 12;

/// Index of each tensor inside [`ModelParams`], which is also the order
/// tensors appear in checkpoints.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(usize)]
pub enum ParamId {
    /// `[k·k·c, 16]`, rows ordered `(ky, kx, channel)`.
    Conv1Weight,
    Conv1Bias,
    /// `[k·k·16, 16]`.
    Conv2Weight,
    Conv2Bias,
    /// `[w·h·16, L]`, rows ordered `(y, x, filter)`.
    EncoderWeight,
    EncoderBias,
    /// `[L, w·h·16]`.
    DecoderWeight,
    DecoderBias,
    /// `[k·k·16, 16]`: transposed convolution, rows are output taps `(ky, kx, out)`, columns input filters.
    Deconv1Weight,
    Deconv1Bias,
    /// `[k·k·c, 16]`.
    Deconv2Weight,
    Deconv2Bias,
}

impl ParamId {
    pub const ALL: [ParamId; PARAM_COUNT] = [
        ParamId::Conv1Weight,
        ParamId::Conv1Bias,
        ParamId::Conv2Weight,
        ParamId::Conv2Bias,
        ParamId::EncoderWeight,
        ParamId::EncoderBias,
        ParamId::DecoderWeight,
        ParamId::DecoderBias,
        ParamId::Deconv1Weight,
        ParamId::Deconv1Bias,
        ParamId::Deconv2Weight,
        ParamId::Deconv2Bias,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ParamId::Conv1Weight => "conv1.weight",
            ParamId::Conv1Bias => "conv1.bias",
            ParamId::Conv2Weight => "conv2.weight",
            ParamId::Conv2Bias => "conv2.bias",
            ParamId::EncoderWeight => "encoder.weight",
            ParamId::EncoderBias => "encoder.bias",
            ParamId::DecoderWeight => "decoder.weight",
            ParamId::DecoderBias => "decoder.bias",
            ParamId::Deconv1Weight => "deconv1.weight",
            ParamId::Deconv1Bias => "deconv1.bias",
            ParamId::Deconv2Weight => "deconv2.weight",
            ParamId::Deconv2Bias => "deconv2.bias",
        }
    }

    pub fn is_bias(self) -> bool {
        (self as usize) % 2 == 1
    }
}

/// All trainable weights. Gradients use the same container.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<T> {
    config: CaeConfig,
    tensors: [Array2<T>; PARAM_COUNT],
}

impl<T: Scalar> ModelParams<T> {
    pub fn zeros(config: CaeConfig) -> Result<Self> {
        config.validate()?;
        let shapes = config.param_shapes();
        Ok(Self { config, tensors: std::array::from_fn(|i| Array2::zeros(shapes[i])) })
    }

    /// Zero biases; weights drawn from N(0, gain / fan_in), with gain 2 ahead
    /// of rectified units and 1 elsewhere.
    pub fn init<R: Rng + ?Sized>(config: CaeConfig, rng: &mut R) -> Result<Self> {
        let mut params = Self::zeros(config)?;
        let (k2, c, f, l) = (config.kernel * config.kernel, config.channels, config.filters, config.latent_length);
        let relu_gain = if config.hidden_activation == Activation::Relu { 2.0 } else { 1.0 };
        let fan = |id: ParamId| -> (f64, f64) {
            match id {
                ParamId::Conv1Weight => ((k2 * c) as f64, relu_gain),
                ParamId::Conv2Weight => ((k2 * f) as f64, relu_gain),
                ParamId::EncoderWeight => (config.feature_len() as f64, 1.0),
                ParamId::DecoderWeight => (l as f64, relu_gain),
                ParamId::Deconv1Weight => ((k2 * f) as f64, relu_gain),
                ParamId::Deconv2Weight => ((k2 * f) as f64, 1.0),
                _ => (1.0, 0.0),
            }
        };
        for id in ParamId::ALL {
            if id.is_bias() {
                continue;
            }
            let (fan_in, gain) = fan(id);
            let sd = (gain / fan_in).sqrt();
            params.tensors[id as usize].mapv_inplace(|_| T::of(standard_normal(rng) * sd));
        }
        Ok(params)
    }

    pub fn from_tensors(config: CaeConfig, tensors: Vec<Array2<T>>) -> Result<Self> {
        config.validate()?;
        let shapes = config.param_shapes();
        if tensors.len() != PARAM_COUNT {
            return Err(Error::shape(format!("{PARAM_COUNT} tensors"), tensors.len()));
        }
        for (i, t) in tensors.iter().enumerate() {
            if t.dim() != shapes[i] {
                return Err(Error::shape(
                    format!("{} {:?}", ParamId::ALL[i].name(), shapes[i]),
                    format!("{:?}", t.dim()),
                ));
            }
        }
        let mut it = tensors.into_iter().map(|t| t.as_standard_layout().into_owned());
        Ok(Self { config, tensors: std::array::from_fn(|_| it.next().expect("length checked")) })
    }

    pub fn config(&self) -> &CaeConfig {
        &self.config
    }

    pub fn get(&self, id: ParamId) -> &Array2<T> {
        &self.tensors[id as usize]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Array2<T> {
        &mut self.tensors[id as usize]
    }

    pub fn tensors(&self) -> &[Array2<T>; PARAM_COUNT] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Array2<T>; PARAM_COUNT] {
        &mut self.tensors
    }

    pub fn len(&self) -> usize {
        self.tensors.iter().map(|t| t.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_finite(&self) -> bool {
        self.tensors.iter().all(|t| t.iter().all(|v| v.is_finite()))
    }

    pub fn cast<U: Scalar>(&self) -> ModelParams<U> {
        ModelParams { config: self.config, tensors: std::array::from_fn(|i| self.tensors[i].mapv(|v| U::of(v.as_f64()))) }
    }

    /// Latent code of one image.
    pub fn encode(&self, image: &ImageTensor<T>) -> Result<LatentCode<T>> {
        let mut codes = self.encode_batch(std::slice::from_ref(image))?;
        Ok(codes.pop().expect("one image in, one code out"))
    }

    /// Reconstruction from one latent code.
    pub fn decode(&self, latent: &LatentCode<T>) -> Result<ImageTensor<T>> {
        let mut images = self.decode_batch(std::slice::from_ref(latent))?;
        Ok(images.pop().expect("one code in, one image out"))
    }

    pub fn encode_batch(&self, images: &[ImageTensor<T>]) -> Result<Vec<LatentCode<T>>> {
        let cfg = &self.config;
        for img in images {
            if img.dims() != (cfg.width, cfg.height, cfg.channels) {
                return Err(Error::shape(
                    format!("{}x{}x{}", cfg.width, cfg.height, cfg.channels),
                    format!("{}x{}x{}", img.width(), img.height(), img.channels()),
                ));
            }
        }
        let mut flat = Vec::with_capacity(images.len() * cfg.image_len());
        for img in images {
            flat.extend_from_slice(img.values());
        }
        let input = Array2::from_shape_vec((images.len() * cfg.width * cfg.height, cfg.channels), flat)
            .expect("sizes checked above");
        let latent = network::encode(self, input.view(), images.len());
        Ok(latent.outer_iter().map(|row| LatentCode(row.to_vec())).collect())
    }

    pub fn decode_batch(&self, latents: &[LatentCode<T>]) -> Result<Vec<ImageTensor<T>>> {
        let cfg = &self.config;
        if let Some(bad) = latents.iter().find(|z| z.len() != cfg.latent_length) {
            return Err(Error::shape(format!("latent length {}", cfg.latent_length), bad.len()));
        }
        let flat: Vec<T> = latents.iter().flat_map(|z| z.values().iter().copied()).collect();
        let z = Array2::from_shape_vec((latents.len(), cfg.latent_length), flat).expect("sizes checked above");
        let out = network::decode(self, z.view());
        let per = cfg.image_len();
        let values = out.into_raw_vec_and_offset().0;
        values
            .chunks(per)
            .map(|v| ImageTensor::new(cfg.width, cfg.height, cfg.channels, v.to_vec()))
            .collect()
    }

    /// `decode(encode(image))`.
    pub fn reconstruct(&self, image: &ImageTensor<T>) -> Result<ImageTensor<T>> {
        self.decode(&self.encode(image)?)
    }
}

pub fn encode<T: Scalar>(image: &ImageTensor<T>, params: &ModelParams<T>) -> Result<LatentCode<T>> {
    params.encode(image)
}

pub fn decode<T: Scalar>(latent: &LatentCode<T>, params: &ModelParams<T>) -> Result<ImageTensor<T>> {
    params.decode(latent)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    fn digit_like(seed: u64, cfg: &CaeConfig) -> ImageTensor<f64> {
        let mut rng = stream(seed);
        let v = (0..cfg.image_len()).map(|_| rng.random::<f64>()).collect();
        ImageTensor::new(cfg.width, cfg.height, cfg.channels, v).unwrap()
    }

    #[test]
    fn shapes_round_trip() {
        for &(w, h, c) in &[(28, 28, 1), (8, 6, 3)] {
            let cfg = CaeConfig::new(w, h, c, 32);
            let params = ModelParams::<f64>::init(cfg, &mut stream(1)).unwrap();
            let img = digit_like(2, &cfg);
            let z = params.encode(&img).unwrap();
            assert_eq!(z.len(), 32);
            let out = params.decode(&z).unwrap();
            assert_eq!(out.dims(), img.dims());
            assert!(out.in_unit_range());
        }
    }

    #[test]
    fn zero_parameters_give_zero_latent_and_flat_output() {
        let cfg = CaeConfig::digits(32);
        let params = ModelParams::<f64>::zeros(cfg).unwrap();
        let z = params.encode(&digit_like(3, &cfg)).unwrap();
        assert!(z.values().iter().all(|&v| v == 0.0));
        let out = params.decode(&z).unwrap();
        assert!(out.values().iter().all(|&v| v == 0.5));
    }

    #[test]
    fn encoding_is_deterministic() {
        let cfg = CaeConfig::digits(32);
        let a = ModelParams::<f64>::init(cfg, &mut stream(4)).unwrap();
        let b = ModelParams::<f64>::init(cfg, &mut stream(4)).unwrap();
        assert_eq!(a, b);
        let img = digit_like(5, &cfg);
        assert_eq!(a.encode(&img).unwrap(), b.encode(&img).unwrap());
    }

    #[test]
    fn batch_and_single_paths_agree() {
        let cfg = CaeConfig::new(10, 9, 1, 8);
        let params = ModelParams::<f64>::init(cfg, &mut stream(6)).unwrap();
        let imgs: Vec<_> = (0..3).map(|s| digit_like(10 + s, &cfg)).collect();
        let batch = params.encode_batch(&imgs).unwrap();
        for (img, z) in imgs.iter().zip(&batch) {
            let single = params.encode(img).unwrap();
            for (a, b) in single.values().iter().zip(z.values()) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn shape_errors() {
        let cfg = CaeConfig::digits(32);
        let params = ModelParams::<f64>::zeros(cfg).unwrap();
        let wrong = ImageTensor::filled(27, 28, 1, 0.5);
        assert!(matches!(params.encode(&wrong), Err(Error::ShapeMismatch { .. })));
        assert!(matches!(params.decode(&LatentCode(vec![0.0; 31])), Err(Error::ShapeMismatch { .. })));
        assert!(ModelParams::<f64>::zeros(CaeConfig { kernel: 4, ..cfg }).is_err());
    }
}
