//! Reconstruction training and gradient verification.

use ndarray::{Array2, ArrayView2};
use rand::seq::index::sample;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::network::{backward, forward};
use super::{CaeConfig, ModelParams, ParamId, PARAM_COUNT};
use crate::error::{Error, Result};
use crate::rng::{stream, RandomStream};
use crate::scalar::Scalar;
use crate::tensor::ImageTensor;

/// Images per independent gradient job inside a mini-batch. Fixed so the
/// reduction order, and therefore every bit of the result, does not depend
/// on the thread count.
const GRAD_CHUNK: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    /// Mini-batch gradient steps.
    pub iterations: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub latent_length: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { iterations: 400, batch_size: 128, learning_rate: 1e-3, seed: 0, latent_length: 256 }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::ConfigInvalid("iterations must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::ConfigInvalid("batch_size must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::ConfigInvalid(format!("learning_rate must be positive, got {}", self.learning_rate)));
        }
        if self.latent_length == 0 {
            return Err(Error::ConfigInvalid("latent_length must be positive".into()));
        }
        Ok(())
    }
}

/// Adaptive-moment gradient descent.
#[derive(Debug, Clone)]
pub struct Adam<T> {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    first: ModelParams<T>,
    second: ModelParams<T>,
    step: i32,
}

impl<T: Scalar> Adam<T> {
    pub fn new(config: CaeConfig, learning_rate: f64) -> Result<Self> {
        Ok(Self {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            first: ModelParams::zeros(config)?,
            second: ModelParams::zeros(config)?,
            step: 0,
        })
    }

    pub fn update(&mut self, params: &mut ModelParams<T>, grads: &ModelParams<T>) {
        self.step += 1;
        let (b1, b2) = (T::of(self.beta1), T::of(self.beta2));
        let (one_b1, one_b2) = (T::one() - b1, T::one() - b2);
        let lr_t = T::of(
            self.learning_rate * (1.0 - self.beta2.powi(self.step)).sqrt() / (1.0 - self.beta1.powi(self.step)),
        );
        let eps = T::of(self.epsilon);
        for i in 0..PARAM_COUNT {
            ndarray::Zip::from(&mut params.tensors_mut()[i])
                .and(&grads.tensors()[i])
                .and(&mut self.first.tensors_mut()[i])
                .and(&mut self.second.tensors_mut()[i])
                .for_each(|p, &g, m, v| {
                    *m = b1 * *m + one_b1 * g;
                    *v = b2 * *v + one_b2 * g * g;
                    *p -= lr_t * *m / (v.sqrt() + eps);
                });
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<T> {
    pub params: ModelParams<T>,
    /// Mini-batch loss before each update.
    pub loss_history: Vec<f64>,
}

fn check_dataset<T: Scalar>(dataset: &[ImageTensor<T>]) -> Result<(usize, usize, usize)> {
    let first = dataset.first().ok_or(Error::EmptyDataset)?;
    let dims = first.dims();
    if let Some(bad) = dataset.iter().find(|img| img.dims() != dims) {
        return Err(Error::InconsistentDims(format!("{:?} vs {:?}", dims, bad.dims())));
    }
    Ok(dims)
}

/// Trains the default architecture sized to the dataset.
pub fn train<T: Scalar>(dataset: &[ImageTensor<T>], config: &TrainConfig, rng: &mut RandomStream) -> Result<TrainOutcome<T>> {
    let (w, h, c) = check_dataset(dataset)?;
    train_model(CaeConfig::new(w, h, c, config.latent_length), dataset, config, rng)
}

/// Trains `architecture` from a fresh initialization drawn from `rng`.
pub fn train_model<T: Scalar>(
    architecture: CaeConfig,
    dataset: &[ImageTensor<T>],
    config: &TrainConfig,
    rng: &mut RandomStream,
) -> Result<TrainOutcome<T>> {
    config.validate()?;
    let dims = check_dataset(dataset)?;
    if dims != (architecture.width, architecture.height, architecture.channels) {
        return Err(Error::shape(
            format!("{}x{}x{}", architecture.width, architecture.height, architecture.channels),
            format!("{}x{}x{}", dims.0, dims.1, dims.2),
        ));
    }
    let mut params = ModelParams::init(CaeConfig { latent_length: config.latent_length, ..architecture }, rng)?;
    let mut adam = Adam::new(*params.config(), config.learning_rate)?;
    let batch = config.batch_size.min(dataset.len());
    let mut history = Vec::with_capacity(config.iterations);
    for iteration in 0..config.iterations {
        let picks = sample(rng, dataset.len(), batch).into_vec();
        let images: Vec<&ImageTensor<T>> = picks.iter().map(|&i| &dataset[i]).collect();
        let (loss, grads) = batch_gradients(&params, &images);
        if !loss.is_finite() {
            return Err(Error::DivergedTraining { iteration, loss });
        }
        history.push(loss);
        adam.update(&mut params, &grads);
        log::debug!("iteration {iteration}: loss {loss:.6}");
    }
    if !params.is_finite() {
        return Err(Error::DivergedTraining { iteration: config.iterations, loss: f64::NAN });
    }
    Ok(TrainOutcome { params, loss_history: history })
}

fn stack<T: Scalar>(images: &[&ImageTensor<T>], cfg: &CaeConfig) -> Array2<T> {
    let mut flat = Vec::with_capacity(images.len() * cfg.image_len());
    for img in images {
        flat.extend_from_slice(img.values());
    }
    Array2::from_shape_vec((images.len() * cfg.width * cfg.height, cfg.channels), flat).expect("uniform image dims")
}

/// Sum of squared errors and accumulated gradients for one chunk, with the
/// loss normalized by `total` elements.
fn chunk_gradients<T: Scalar>(params: &ModelParams<T>, images: &[&ImageTensor<T>], total: usize) -> (f64, ModelParams<T>) {
    let cfg = *params.config();
    let input = stack(images, &cfg);
    let trace = forward(params, input.view(), images.len());
    let scale = T::of(2.0 / total as f64);
    let mut sse = 0.0;
    let mut d_out = trace.out.clone();
    ndarray::Zip::from(&mut d_out).and(&input).for_each(|d, &x| {
        let diff = *d - x;
        sse += diff.as_f64() * diff.as_f64();
        *d = diff * scale;
    });
    let mut grads = ModelParams::zeros(cfg).expect("validated config");
    backward(params, &trace, d_out, images.len(), &mut grads);
    (sse / total as f64, grads)
}

fn batch_gradients<T: Scalar>(params: &ModelParams<T>, images: &[&ImageTensor<T>]) -> (f64, ModelParams<T>) {
    let total = images.len() * params.config().image_len();
    let parts: Vec<(f64, ModelParams<T>)> =
        images.par_chunks(GRAD_CHUNK).map(|chunk| chunk_gradients(params, chunk, total)).collect();
    let mut iter = parts.into_iter();
    let (mut loss, mut grads) = iter.next().expect("non-empty batch");
    for (l, g) in iter {
        loss += l;
        for (acc, part) in grads.tensors_mut().iter_mut().zip(g.tensors()) {
            *acc += part;
        }
    }
    (loss, grads)
}

/// Mean squared reconstruction error over `images` and its gradient.
pub fn loss_and_gradients<T: Scalar>(params: &ModelParams<T>, images: &[ImageTensor<T>]) -> Result<(f64, ModelParams<T>)> {
    if images.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let refs: Vec<&ImageTensor<T>> = images.iter().collect();
    Ok(batch_gradients(params, &refs))
}

/// Mean squared reconstruction error over `images`.
pub fn reconstruction_loss<T: Scalar>(params: &ModelParams<T>, images: &[ImageTensor<T>]) -> Result<f64> {
    if images.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let cfg = params.config();
    let refs: Vec<&ImageTensor<T>> = images.iter().collect();
    let input = stack(&refs, cfg);
    let z = super::network::encode(params, input.view(), images.len());
    let out = super::network::decode(params, z.view());
    let input: ArrayView2<T> = input.view().into_shape_with_order((images.len(), cfg.image_len())).expect("contiguous");
    let sse: f64 = out.iter().zip(input.iter()).map(|(&a, &b)| (a - b).as_f64().powi(2)).sum();
    Ok(sse / (images.len() * cfg.image_len()) as f64)
}

fn set_coordinate<T: Scalar>(params: &mut ModelParams<T>, id: ParamId, flat: usize, value: T) {
    params.get_mut(id).as_slice_mut().expect("standard layout")[flat] = value;
}

/// Gradients smaller than this are compared in absolute rather than relative terms.
const GRAD_FLOOR: f64 = 1e-6;

/// Largest `|analytic − numeric| / max(|analytic|, |numeric|, 1e-6)` over a
/// random sample of at least 200 parameters, using central differences of
/// the reconstruction loss on `image`.
pub fn gradient_check<T: Scalar>(params: &ModelParams<T>, image: &ImageTensor<T>, epsilon: f64) -> Result<f64> {
    gradient_check_with(params, image, epsilon, 200, &mut stream(0x6772_6164), |_| {})
}

/// [`gradient_check`] with an explicit sample size and stream. `tamper` may
/// modify the analytic gradient before comparison, to confirm the harness
/// notices a wrong backward pass.
pub fn gradient_check_with<T: Scalar, R: Rng + ?Sized>(
    params: &ModelParams<T>,
    image: &ImageTensor<T>,
    epsilon: f64,
    samples: usize,
    rng: &mut R,
    tamper: impl FnOnce(&mut ModelParams<T>),
) -> Result<f64> {
    if !(1e-7..=1e-3).contains(&epsilon) {
        return Err(Error::InvalidArgument(format!("epsilon must be in [1e-7, 1e-3], got {epsilon}")));
    }
    let images = std::slice::from_ref(image);
    let (_, mut analytic) = loss_and_gradients(params, images)?;
    tamper(&mut analytic);

    let per_tensor = samples.div_ceil(PARAM_COUNT);
    let mut probe = params.clone();
    let mut worst = 0.0f64;
    for id in ParamId::ALL {
        let n = params.get(id).len();
        let picks = sample(rng, n, per_tensor.min(n)).into_vec();
        for flat in picks {
            let original = params.get(id).as_slice().expect("standard layout")[flat];
            set_coordinate(&mut probe, id, flat, original + T::of(epsilon));
            let plus = reconstruction_loss(&probe, images)?;
            set_coordinate(&mut probe, id, flat, original - T::of(epsilon));
            let minus = reconstruction_loss(&probe, images)?;
            set_coordinate(&mut probe, id, flat, original);
            let numeric = (plus - minus) / (2.0 * epsilon);
            let exact = analytic.get(id).as_slice().expect("standard layout")[flat].as_f64();
            let denom = exact.abs().max(numeric.abs()).max(GRAD_FLOOR);
            worst = worst.max((exact - numeric).abs() / denom);
        }
    }
    Ok(worst)
}
