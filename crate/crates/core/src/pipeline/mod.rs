//! Experiment driver: dataset in, trained autoencoders, latent codes over the
//! artificial-noise link, Bob and Eve reconstructions, aggregated reports.

mod dataset;
mod plots;
mod report;

use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cae::{load_checkpoint, save_checkpoint, train, CaeConfig, LatentCode, ModelParams, TrainConfig};
use crate::error::{Error, Result};
use crate::linalg::sample_complex_gaussian;
use crate::metrics::{compression_ratio, QualityReport};
use crate::modem::{ber_sweep, noise_variance_from_snr_db, BerPoint, LinkConfig, Quantizer, Scenario};
use crate::rng::substream;
use crate::scalar::Scalar;
use crate::tensor::ImageTensor;
use crate::wiretap::{draw_channel_pair, equalize, secrecy_lower_bound, AnParams, ChannelPair, Precoder};

pub use dataset::{load_dataset, parse_idx, write_idx, Split};
pub use plots::{emit_plots, emit_samples};
pub use report::{emit_ber_csv, emit_csv, emit_secrecy_csv, emit_train_csv};

/// Overrides `output_dir` from the configuration file.
pub const OUTPUT_DIR_ENV: &str = "UAVSEC_OUTPUT_DIR";

/// Test images whose reconstructions are kept for the sample grids.
const SAMPLE_IMAGES: usize = 8;

// Stream labels under the experiment seed.
const STREAM_TRAIN: u64 = 1;
const STREAM_CHANNEL: u64 = 2;
const STREAM_NOISE: u64 = 3;
const STREAM_AN: u64 = 4;
const STREAM_BER: u64 = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transport {
    /// Each latent value is one real symbol, scaled per image to power `σ_u²`.
    Analog,
    /// Latent values are quantized and sent bit by bit with BPSK.
    Digital,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub dataset_path: PathBuf,
    pub latent_lengths: Vec<usize>,
    pub n_t: usize,
    pub snr_grid_db: Vec<f64>,
    pub sigma_v_sq: f64,
    pub sigma_u_sq: f64,
    pub transport: Transport,
    pub bits_per_value: u32,
    pub train: TrainConfig,
    pub seed: u64,
    pub output_dir: PathBuf,
    /// Train and save a model when its checkpoint is missing.
    pub train_if_missing: bool,
    /// Use only the first this-many training images.
    pub max_train_images: Option<usize>,
    /// Use only the first this-many test images.
    pub max_test_images: Option<usize>,
    /// Bits per SNR point for the BER tables; 0 skips them.
    pub ber_bits_per_point: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dataset_path: PathBuf::from("data/digits"),
            latent_lengths: crate::cae::DEFAULT_LATENT_LENGTHS.to_vec(),
            n_t: 4,
            snr_grid_db: vec![5.0, 10.0, 15.0, 20.0],
            sigma_v_sq: 10.0,
            sigma_u_sq: 1.0,
            transport: Transport::Analog,
            bits_per_value: 8,
            train: TrainConfig::default(),
            seed: 0,
            output_dir: PathBuf::from("out"),
            train_if_missing: true,
            max_train_images: None,
            max_test_images: None,
            ber_bits_per_point: 100_000,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: Self = serde_json::from_str(text).map_err(|e| Error::ConfigInvalid(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::ConfigInvalid(msg));
        if self.latent_lengths.is_empty() || self.latent_lengths.contains(&0) {
            return bad(format!("latent_lengths must be non-empty and positive, got {:?}", self.latent_lengths));
        }
        if self.snr_grid_db.is_empty() || self.snr_grid_db.iter().any(|s| s.is_nan()) {
            return bad(format!("snr_grid_db must be non-empty, got {:?}", self.snr_grid_db));
        }
        if self.n_t == 0 || (self.sigma_v_sq > 0.0 && self.n_t < 2) {
            return bad(format!("artificial noise needs n_t >= 2, got {}", self.n_t));
        }
        AnParams::new(self.sigma_v_sq, self.sigma_u_sq).map_err(|e| Error::ConfigInvalid(e.to_string()))?;
        if self.transport == Transport::Digital {
            Quantizer::new(self.bits_per_value, 0.0, 1.0).map_err(|e| Error::ConfigInvalid(e.to_string()))?;
        }
        if self.max_train_images == Some(0) || self.max_test_images == Some(0) {
            return bad("image caps must be positive".into());
        }
        self.train.validate()
    }

    /// `dir` if given, else the environment override, else `output_dir`.
    pub fn resolve_output_dir(&mut self, dir: Option<PathBuf>) {
        if let Some(d) = dir.or_else(|| std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from)) {
            self.output_dir = d;
        }
    }

    pub fn checkpoint_path(&self, latent_length: usize) -> PathBuf {
        self.output_dir.join("checkpoints").join(format!("cae_L{latent_length}.bin"))
    }

    fn an_params(&self) -> AnParams {
        AnParams { sigma_v_sq: self.sigma_v_sq, sigma_u_sq: self.sigma_u_sq }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Party {
    Bob,
    Eve,
}

impl Party {
    pub fn as_str(&self) -> &'static str {
        match self {
            Party::Bob => "bob",
            Party::Eve => "eve",
        }
    }
}

/// Mean and sample standard deviation of a set of trials.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
    pub trials: usize,
}

impl Summary {
    pub fn of(values: impl IntoIterator<Item = f64>) -> Self {
        let v: Vec<f64> = values.into_iter().collect();
        let n = v.len();
        if n == 0 {
            return Self { mean: f64::NAN, std: f64::NAN, trials: 0 };
        }
        let mean = v.iter().sum::<f64>() / n as f64;
        let std = if n > 1 { (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt() } else { 0.0 };
        Self { mean, std, trials: n }
    }
}

/// Reconstruction quality aggregated over test images.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QualitySummary {
    /// Images whose normalized MSE is defined.
    pub normalized_mse: Summary,
    pub plain_mse: Summary,
    pub psnr_db: Summary,
    pub compression_ratio: f64,
}

impl QualitySummary {
    pub fn of(reports: &[QualityReport]) -> Self {
        Self {
            normalized_mse: Summary::of(reports.iter().filter_map(|r| r.normalized_mse)),
            plain_mse: Summary::of(reports.iter().map(|r| r.plain_mse)),
            psnr_db: Summary::of(reports.iter().map(|r| r.psnr_db)),
            compression_ratio: reports.first().map_or(f64::NAN, |r| r.compression_ratio),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellReport {
    pub latent_length: usize,
    pub snr_db: f64,
    pub party: Party,
    pub quality: QualitySummary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SecrecySummary {
    pub snr_db: f64,
    pub bob_capacity: Summary,
    pub eve_capacity: Summary,
    pub secrecy_lower_bound: Summary,
    pub positive_fraction: f64,
}

/// First few test images with both parties' reconstructions.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    pub latent_length: usize,
    pub snr_db: f64,
    pub original: Vec<ImageTensor<f64>>,
    pub bob: Vec<ImageTensor<f64>>,
    pub eve: Vec<ImageTensor<f64>>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunReport {
    /// Ordered by latent length, SNR, then party.
    pub cells: Vec<CellReport>,
    /// Channel-only reconstruction quality per latent length.
    pub clean: Vec<(usize, QualitySummary)>,
    pub secrecy: Vec<SecrecySummary>,
    pub ber: Vec<(Scenario, Vec<BerPoint>)>,
    pub samples: Vec<SampleSet>,
}

impl RunReport {
    pub fn cell(&self, latent_length: usize, snr_db: f64, party: Party) -> Option<&CellReport> {
        self.cells.iter().find(|c| c.latent_length == latent_length && c.snr_db == snr_db && c.party == party)
    }
}

/// Link settings shared by every symbol of an experiment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkParams {
    pub sigma_u_sq: f64,
    pub sigma_v_sq: f64,
    pub transport: Transport,
    pub bits_per_value: u32,
}

/// Latent estimates recovered by each receiver.
#[derive(Debug, Clone, PartialEq)]
pub struct Received {
    pub bob: Vec<f64>,
    pub eve: Vec<f64>,
}

/// Sends one latent code through a single fading block.
///
/// Each symbol is beamformed and masked by fresh artificial noise from
/// `an_rng`; receiver noise comes from `noise_rng`. Bob divides by `‖H‖` and
/// Eve by `G p`. Both receivers know the per-image scale (analog) or
/// quantizer range (digital), and Eve knows the decoder.
pub fn send_latent<R: rand::Rng + ?Sized>(
    latent: &[f64],
    pair: &ChannelPair<f64>,
    link: &LinkParams,
    an_rng: &mut R,
    noise_rng: &mut R,
) -> Result<Received> {
    if latent.is_empty() {
        return Err(Error::EmptyLatent);
    }
    let precoder = if link.sigma_v_sq > 0.0 { Precoder::new(&pair.h)? } else { Precoder::beam_only(&pair.h)? };
    let eve_gain = precoder.beam.dot_row(pair.g.row(0))?;
    let bob_gain = Complex::new(precoder.gain, 0.0);

    let mut channel = |u: f64| -> Result<(f64, f64)> {
        let x = precoder.transmit(Complex::new(u, 0.0), link.sigma_v_sq, an_rng)?;
        let n = sample_complex_gaussian::<f64, R>(1, pair.sigma_n_sq, noise_rng)?.0[0];
        let e = sample_complex_gaussian::<f64, R>(1, pair.sigma_e_sq, noise_rng)?.0[0];
        let yb = x.dot_row(pair.h.row(0))? + n;
        let ye = x.dot_row(pair.g.row(0))? + e;
        Ok((equalize(yb, bob_gain).re, equalize(ye, eve_gain).re))
    };

    match link.transport {
        Transport::Analog => {
            let power = latent.iter().map(|v| v * v).sum::<f64>() / latent.len() as f64;
            let scale = if power > 0.0 { (link.sigma_u_sq / power).sqrt() } else { 1.0 };
            let mut bob = Vec::with_capacity(latent.len());
            let mut eve = Vec::with_capacity(latent.len());
            for &v in latent {
                let (b, e) = channel(v * scale)?;
                bob.push(b / scale);
                eve.push(e / scale);
            }
            Ok(Received { bob, eve })
        }
        Transport::Digital => {
            let lo = latent.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = latent.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let (lo, hi) = if hi > lo { (lo, hi) } else { (lo - 0.5, lo + 0.5) };
            let q = Quantizer::new(link.bits_per_value, lo, hi)?;
            let bits = q.quantize(&LatentCode(latent.to_vec()))?;
            let amplitude = link.sigma_u_sq.sqrt();
            let mut bob_bits = Vec::with_capacity(bits.len());
            let mut eve_bits = Vec::with_capacity(bits.len());
            for &bit in bits.bits() {
                let u = if bit == 0 { amplitude } else { -amplitude };
                let (b, e) = channel(u)?;
                bob_bits.push(u8::from(b < 0.0));
                eve_bits.push(u8::from(e < 0.0));
            }
            let decode = |bits: Vec<u8>| -> Result<Vec<f64>> {
                Ok(q.dequantize::<f64>(&crate::modem::BitStream::new(bits)?)?.0)
            };
            Ok(Received { bob: decode(bob_bits)?, eve: decode(eve_bits)? })
        }
    }
}

fn cap<T: Clone>(mut images: Vec<T>, limit: Option<usize>) -> Vec<T> {
    if let Some(n) = limit {
        images.truncate(n);
    }
    images
}

/// Trains one model per configured latent length on the training split and
/// saves each checkpoint. Returns the loss histories.
pub fn train_models<T: Scalar>(config: &ExperimentConfig) -> Result<Vec<(usize, Vec<f64>)>> {
    config.validate()?;
    let data = cap(load_dataset::<T>(&config.dataset_path, Split::Train)?, config.max_train_images);
    config
        .latent_lengths
        .iter()
        .map(|&l| {
            let (params, history) = train_one(config, &data, l)?;
            save_checkpoint(&params, config.checkpoint_path(l))?;
            Ok((l, history))
        })
        .collect()
}

fn train_one<T: Scalar>(
    config: &ExperimentConfig,
    data: &[ImageTensor<T>],
    latent_length: usize,
) -> Result<(ModelParams<T>, Vec<f64>)> {
    let tc = TrainConfig { latent_length, ..config.train.clone() };
    let mut rng = substream(config.seed, &[STREAM_TRAIN, tc.seed, latent_length as u64]);
    log::info!("training L={latent_length} on {} images for {} steps", data.len(), tc.iterations);
    let outcome = train(data, &tc, &mut rng)?;
    log::info!("L={latent_length}: final batch loss {:.6}", outcome.loss_history.last().copied().unwrap_or(f64::NAN));
    Ok((outcome.params, outcome.loss_history))
}

/// Loads the checkpoint for `latent_length`, training it first when allowed.
pub fn obtain_model<T: Scalar>(
    config: &ExperimentConfig,
    latent_length: usize,
    train_data: &mut Option<Vec<ImageTensor<T>>>,
) -> Result<ModelParams<T>> {
    let path = config.checkpoint_path(latent_length);
    if path.is_file() {
        let params: ModelParams<T> = load_checkpoint(&path)?;
        if params.config().latent_length != latent_length {
            return Err(Error::shape(format!("latent length {latent_length}"), params.config().latent_length));
        }
        return Ok(params);
    }
    if !config.train_if_missing {
        return Err(Error::MissingCheckpoint { latent_length, path });
    }
    if train_data.is_none() {
        *train_data = Some(cap(load_dataset::<T>(&config.dataset_path, Split::Train)?, config.max_train_images));
    }
    let (params, _) = train_one(config, train_data.as_deref().expect("loaded above"), latent_length)?;
    save_checkpoint(&params, &path)?;
    Ok(params)
}

/// Decodes `codes` in parallel chunks; output order follows input order.
fn decode_all<T: Scalar>(params: &ModelParams<T>, codes: &[LatentCode<T>]) -> Result<Vec<ImageTensor<T>>> {
    let parts: Vec<Vec<ImageTensor<T>>> =
        codes.par_chunks(32).map(|chunk| params.decode_batch(chunk)).collect::<Result<_>>()?;
    Ok(parts.into_iter().flatten().collect())
}

fn encode_all<T: Scalar>(params: &ModelParams<T>, images: &[ImageTensor<T>]) -> Result<Vec<LatentCode<T>>> {
    let parts: Vec<Vec<LatentCode<T>>> =
        images.par_chunks(32).map(|chunk| params.encode_batch(chunk)).collect::<Result<_>>()?;
    Ok(parts.into_iter().flatten().collect())
}

fn compare_all<T: Scalar>(predicted: &[ImageTensor<T>], original: &[ImageTensor<T>], l: usize) -> Result<Vec<QualityReport>> {
    predicted.par_iter().zip(original).map(|(p, o)| QualityReport::compare(p, o, l)).collect()
}

/// Reconstruction quality of `params` on `images` without any channel.
pub fn reconstruction_quality<T: Scalar>(params: &ModelParams<T>, images: &[ImageTensor<T>]) -> Result<QualitySummary> {
    if images.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let codes = encode_all(params, images)?;
    let out = decode_all(params, &codes)?;
    Ok(QualitySummary::of(&compare_all(&out, images, params.config().latent_length)?))
}

/// Channel draw for test image `index`, shared by every latent length and SNR.
fn image_channel(config: &ExperimentConfig, index: usize, noise_variance: f64) -> Result<ChannelPair<f64>> {
    let mut rng = substream(config.seed, &[STREAM_CHANNEL, index as u64]);
    draw_channel_pair(config.n_t, 1, 1, noise_variance, noise_variance, &mut rng)
}

/// Trains or loads every model, sends every test image's latent code over
/// the link at every SNR, and aggregates both receivers' reconstructions.
pub fn run_end_to_end<T: Scalar>(config: &ExperimentConfig) -> Result<RunReport> {
    config.validate()?;
    let test = cap(load_dataset::<T>(&config.dataset_path, Split::Test)?, config.max_test_images);
    let mut train_data = None;
    let mut report = RunReport::default();
    let link = LinkParams {
        sigma_u_sq: config.sigma_u_sq,
        sigma_v_sq: config.sigma_v_sq,
        transport: config.transport,
        bits_per_value: config.bits_per_value,
    };

    for &l in &config.latent_lengths {
        let params: ModelParams<T> = obtain_model(config, l, &mut train_data)?;
        check_model(params.config(), &test)?;
        let codes = encode_all(&params, &test)?;
        let clean = decode_all(&params, &codes)?;
        report.clean.push((l, QualitySummary::of(&compare_all(&clean, &test, l)?)));

        for (si, &snr_db) in config.snr_grid_db.iter().enumerate() {
            let noise_variance = config.sigma_u_sq * noise_variance_from_snr_db(snr_db);
            let received: Vec<(LatentCode<T>, LatentCode<T>)> = codes
                .par_iter()
                .enumerate()
                .map(|(i, code)| {
                    let pair = image_channel(config, i, noise_variance)?;
                    let path = [l as u64, si as u64, i as u64];
                    let mut an_rng = substream(config.seed, &[STREAM_AN, path[0], path[1], path[2]]);
                    let mut noise_rng = substream(config.seed, &[STREAM_NOISE, path[0], path[1], path[2]]);
                    let latent: Vec<f64> = code.values().iter().map(|v| v.as_f64()).collect();
                    let r = send_latent(&latent, &pair, &link, &mut an_rng, &mut noise_rng)?;
                    let to_t = |v: Vec<f64>| LatentCode(v.into_iter().map(T::of).collect());
                    Ok((to_t(r.bob), to_t(r.eve)))
                })
                .collect::<Result<_>>()?;
            let (bob_codes, eve_codes): (Vec<_>, Vec<_>) = received.into_iter().unzip();
            let bob = decode_all(&params, &bob_codes)?;
            let eve = decode_all(&params, &eve_codes)?;
            for (party, images) in [(Party::Bob, &bob), (Party::Eve, &eve)] {
                let quality = QualitySummary::of(&compare_all(images, &test, l)?);
                report.cells.push(CellReport { latent_length: l, snr_db, party, quality });
            }
            let n = SAMPLE_IMAGES.min(test.len());
            let to64 = |v: &[ImageTensor<T>]| v[..n].iter().map(|x| x.cast::<f64>()).collect();
            report.samples.push(SampleSet {
                latent_length: l,
                snr_db,
                original: to64(&test),
                bob: to64(&bob),
                eve: to64(&eve),
            });
        }
    }

    report.secrecy = secrecy_table(config, test.len())?;
    report.ber = ber_tables(config)?;
    Ok(report)
}

fn check_model<T: Scalar>(cfg: &CaeConfig, test: &[ImageTensor<T>]) -> Result<()> {
    let dims = (cfg.width, cfg.height, cfg.channels);
    match test.first() {
        Some(img) if img.dims() != dims => Err(Error::shape(format!("{dims:?}"), format!("{:?}", img.dims()))),
        _ => Ok(()),
    }
}

/// Secrecy statistics over the per-image channel draws at every SNR.
pub fn secrecy_table(config: &ExperimentConfig, draws: usize) -> Result<Vec<SecrecySummary>> {
    let params = config.an_params();
    config
        .snr_grid_db
        .iter()
        .map(|&snr_db| {
            let noise_variance = config.sigma_u_sq * noise_variance_from_snr_db(snr_db);
            let reports = (0..draws)
                .into_par_iter()
                .map(|i| secrecy_lower_bound(&image_channel(config, i, noise_variance)?, &params))
                .collect::<Result<Vec<_>>>()?;
            let positive = reports.iter().filter(|r| r.secrecy_lower_bound > 0.0).count();
            Ok(SecrecySummary {
                snr_db,
                bob_capacity: Summary::of(reports.iter().map(|r| r.bob_capacity)),
                eve_capacity: Summary::of(reports.iter().map(|r| r.eve_capacity)),
                secrecy_lower_bound: Summary::of(reports.iter().map(|r| r.secrecy_lower_bound)),
                positive_fraction: positive as f64 / draws.max(1) as f64,
            })
        })
        .collect()
}

/// BPSK bit error rates for Bob and Eve with AN, and Bob without it.
pub fn ber_tables(config: &ExperimentConfig) -> Result<Vec<(Scenario, Vec<BerPoint>)>> {
    if config.ber_bits_per_point == 0 {
        return Ok(Vec::new());
    }
    let link = LinkConfig {
        n_t: config.n_t,
        sigma_u_sq: config.sigma_u_sq,
        sigma_v_sq: config.sigma_v_sq,
        per_symbol_fading: true,
    };
    [Scenario::BobWithAn, Scenario::EveWithAn, Scenario::NoAn]
        .into_iter()
        .map(|scenario| {
            // one stream for all scenarios, so Bob with and without AN share draws
            let mut rng = substream(config.seed, &[STREAM_BER]);
            Ok((scenario, ber_sweep(&config.snr_grid_db, config.ber_bits_per_point, scenario, &link, &mut rng)?))
        })
        .collect()
}

/// Runs the experiment and writes `report.csv`, `secrecy.csv`, `ber.csv`
/// and the figures into the output directory.
pub fn sweep<T: Scalar>(config: &ExperimentConfig) -> Result<RunReport> {
    let report = run_end_to_end::<T>(config)?;
    let dir = &config.output_dir;
    emit_csv(&report, dir.join("report.csv"))?;
    emit_secrecy_csv(&report, dir.join("secrecy.csv"))?;
    if !report.ber.is_empty() {
        emit_ber_csv(&report, dir.join("ber.csv"))?;
    }
    emit_plots(&report, dir)?;
    emit_samples(&report, dir)?;
    Ok(report)
}

/// Compression ratios for the configured latent lengths at the dataset's size.
pub fn compression_table(latent_lengths: &[usize], width: usize, height: usize, channels: usize) -> Result<Vec<(usize, f64)>> {
    latent_lengths.iter().map(|&l| Ok((l, compression_ratio(l, width, height, channels)?))).collect()
}
