//! BPSK over Rayleigh fading, BER measurement, and latent quantization.

use num_complex::Complex;
use rand::{Rng, RngCore};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{sample_complex_gaussian, ComplexMatrix, ComplexVector};
use crate::rng::substream;
use crate::scalar::Scalar;
use crate::tensor::LatentCode;
use crate::wiretap::Precoder;

/// Symbols simulated per independent work item in [`ber_sweep`].
const BER_CHUNK: usize = 1 << 15;

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct BitStream(Vec<u8>);

impl BitStream {
    pub fn new(bits: Vec<u8>) -> Result<Self> {
        if let Some(b) = bits.iter().find(|&&b| b > 1) {
            return Err(Error::InvalidArgument(format!("bit value {b} is not 0 or 1")));
        }
        Ok(Self(bits))
    }

    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        Self((0..n).map(|_| (rng.next_u32() & 1) as u8).collect())
    }

    pub fn bits(&self) -> &[u8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn hamming_distance(&self, other: &Self) -> usize {
        self.0.iter().zip(&other.0).filter(|(a, b)| a != b).count() + self.len().abs_diff(other.len())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BerPoint {
    pub snr_db: f64,
    pub ber: f64,
    pub errors: u64,
    pub trials: u64,
}

impl BerPoint {
    /// Binomial standard error of the estimate.
    pub fn std_error(&self) -> f64 {
        (self.ber * (1.0 - self.ber) / self.trials as f64).sqrt()
    }
}

/// Bit 0 → +1, bit 1 → −1.
pub fn bpsk_modulate<T: Scalar>(bits: &BitStream) -> ComplexVector<T> {
    ComplexVector(bits.0.iter().map(|&b| Complex::new(bpsk_symbol(b), T::zero())).collect())
}

#[inline]
fn bpsk_symbol<T: Scalar>(bit: u8) -> T {
    if bit == 0 {
        T::one()
    } else {
        -T::one()
    }
}

/// Hard decision on the real part; `Re == 0` decodes as 0.
pub fn bpsk_demodulate<T: Scalar>(samples: &ComplexVector<T>) -> BitStream {
    BitStream(samples.0.iter().map(|z| bpsk_decide(z.re)).collect())
}

#[inline]
fn bpsk_decide<T: Scalar>(re: T) -> u8 {
    u8::from(re < T::zero())
}

/// Noise variance for unit-energy symbols at `snr_db`; zero at `+∞`.
pub fn noise_variance_from_snr_db(snr_db: f64) -> f64 {
    if snr_db == f64::INFINITY {
        0.0
    } else {
        10f64.powf(-snr_db / 10.0)
    }
}

/// Flat Rayleigh fading plus AWGN: `r = g s + n`, `g ~ CN(0,1)` per symbol
/// or per block, `n ~ CN(0, σ²)` with `σ²` from `snr_db` at unit symbol
/// energy. Returns the received samples and the gains.
pub fn rayleigh_link<T: Scalar, R: Rng + ?Sized>(
    symbols: &ComplexVector<T>,
    snr_db: f64,
    per_symbol_fading: bool,
    rng: &mut R,
) -> Result<(ComplexVector<T>, ComplexVector<T>)> {
    let n = symbols.len();
    let gains = if per_symbol_fading {
        sample_complex_gaussian::<T, R>(n, 1.0, rng)?
    } else {
        let g = sample_complex_gaussian::<T, R>(1, 1.0, rng)?.0[0];
        ComplexVector(vec![g; n])
    };
    let noise = sample_complex_gaussian::<T, R>(n, noise_variance_from_snr_db(snr_db), rng)?;
    let received = symbols.0.iter().zip(&gains.0).zip(&noise.0).map(|((&s, &g), &e)| g * s + e).collect();
    Ok((ComplexVector(received), gains))
}

/// Coherent equalization by known gains.
pub fn equalize_by_gains<T: Scalar>(received: &ComplexVector<T>, gains: &ComplexVector<T>) -> ComplexVector<T> {
    ComplexVector(received.0.iter().zip(&gains.0).map(|(&r, &g)| crate::wiretap::equalize(r, g)).collect())
}

/// Average BER of coherent BPSK with `diversity`-branch maximal-ratio
/// combining over i.i.d. Rayleigh fading at mean per-branch SNR `snr`.
/// With one branch this is `½(1 − √(γ̄/(1+γ̄)))`.
pub fn rayleigh_bpsk_ber(snr: f64, diversity: usize) -> f64 {
    let mu = (snr / (1.0 + snr)).sqrt();
    let lo = (1.0 - mu) / 2.0;
    let hi = (1.0 + mu) / 2.0;
    let l = diversity.max(1);
    let mut binom = 1.0;
    let mut sum = 0.0;
    for k in 0..l {
        if k > 0 {
            binom *= (l - 1 + k) as f64 / k as f64;
        }
        sum += binom * hi.powi(k as i32);
    }
    lo.powi(l as i32) * sum
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    /// Bob, with artificial noise on the air.
    BobWithAn,
    /// Eve, with artificial noise on the air.
    EveWithAn,
    /// Bob, no artificial noise.
    NoAn,
}

impl Scenario {
    pub fn as_str(&self) -> &'static str {
        match self {
            Scenario::BobWithAn => "bob_with_an",
            Scenario::EveWithAn => "eve_with_an",
            Scenario::NoAn => "no_an",
        }
    }
}

/// Multi-antenna BPSK link used by [`ber_sweep`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkConfig {
    pub n_t: usize,
    pub sigma_u_sq: f64,
    /// Artificial-noise variance; ignored for [`Scenario::NoAn`].
    pub sigma_v_sq: f64,
    /// Redraw channels every symbol (ergodic) instead of every chunk.
    pub per_symbol_fading: bool,
}

impl Default for LinkConfig {
    fn default() -> Self {
        Self { n_t: 4, sigma_u_sq: 1.0, sigma_v_sq: 1.0, per_symbol_fading: true }
    }
}

/// Monte-Carlo BER over an SNR grid.
///
/// Each bit is BPSK-mapped, beamformed along `H†/‖H‖`, and, unless the
/// scenario is [`Scenario::NoAn`], masked by null-space artificial noise.
/// Bob equalizes by `‖H‖`, Eve by `G p`. The SNR is `σ_u²/σ²` per receive
/// antenna with the same noise variance at both receivers. Channel, data and
/// receiver noise come from one stream and the artificial noise from
/// another, so Bob's decisions with and without AN see identical draws.
pub fn ber_sweep<R: RngCore + ?Sized>(
    snr_db_grid: &[f64],
    bits_per_point: usize,
    scenario: Scenario,
    link: &LinkConfig,
    rng: &mut R,
) -> Result<Vec<BerPoint>> {
    if bits_per_point == 0 {
        return Err(Error::InvalidArgument("bits_per_point must be positive".into()));
    }
    if scenario != Scenario::NoAn && link.n_t < 2 {
        return Err(Error::InvalidArgument("artificial noise needs at least two transmit antennas".into()));
    }
    let base = rng.next_u64();
    let chunks = bits_per_point.div_ceil(BER_CHUNK);
    snr_db_grid
        .iter()
        .enumerate()
        .map(|(point, &snr_db)| {
            let errors = (0..chunks)
                .into_par_iter()
                .map(|chunk| {
                    let len = BER_CHUNK.min(bits_per_point - chunk * BER_CHUNK);
                    ber_chunk(len, snr_db, scenario, link, base, point as u64, chunk as u64)
                })
                .collect::<Result<Vec<u64>>>()?
                .into_iter()
                .sum::<u64>();
            Ok(BerPoint {
                snr_db,
                ber: errors as f64 / bits_per_point as f64,
                errors,
                trials: bits_per_point as u64,
            })
        })
        .collect()
}

fn ber_chunk(
    len: usize,
    snr_db: f64,
    scenario: Scenario,
    link: &LinkConfig,
    base: u64,
    point: u64,
    chunk: u64,
) -> Result<u64> {
    let mut link_rng = substream(base, &[point, chunk, 0]);
    let mut an_rng = substream(base, &[point, chunk, 1]);
    let noise_var = link.sigma_u_sq * noise_variance_from_snr_db(snr_db);
    let amplitude = link.sigma_u_sq.sqrt();
    let with_an = scenario != Scenario::NoAn;
    let sigma_v_sq = if with_an { link.sigma_v_sq } else { 0.0 };

    let draw = |rng: &mut crate::rng::RandomStream| -> Result<(ComplexMatrix<f64>, ComplexMatrix<f64>)> {
        Ok((
            ComplexMatrix::random_gaussian(1, link.n_t, 1.0, rng)?,
            ComplexMatrix::random_gaussian(1, link.n_t, 1.0, rng)?,
        ))
    };
    let mut channels = draw(&mut link_rng)?;
    let mut precoder = build_precoder(&channels.0, with_an)?;
    let mut errors = 0u64;
    for i in 0..len {
        if link.per_symbol_fading && i > 0 {
            channels = draw(&mut link_rng)?;
            precoder = build_precoder(&channels.0, with_an)?;
        }
        let (h, g) = &channels;
        let bit = (link_rng.next_u32() & 1) as u8;
        let u = Complex::new(bpsk_symbol::<f64>(bit) * amplitude, 0.0);
        let x = if with_an {
            precoder.transmit(u, sigma_v_sq, &mut an_rng)?
        } else {
            precoder.beam.scale(u)
        };
        let (row, gain) = match scenario {
            Scenario::EveWithAn => (g, precoder.beam.dot_row(g.row(0))?),
            _ => (h, Complex::new(precoder.gain, 0.0)),
        };
        // Bob's and Eve's noise are both drawn so every scenario consumes the
        // link stream identically.
        let noise = sample_complex_gaussian::<f64, _>(2, noise_var, &mut link_rng)?;
        let eta = if scenario == Scenario::EveWithAn { noise.0[1] } else { noise.0[0] };
        let y = x.dot_row(row.row(0))? + eta;
        let estimate = crate::wiretap::equalize(y, gain);
        errors += u64::from(bpsk_decide(estimate.re) != bit);
    }
    Ok(errors)
}

fn build_precoder(h: &ComplexMatrix<f64>, with_an: bool) -> Result<Precoder<f64>> {
    if with_an {
        Precoder::new(h)
    } else {
        Precoder::beam_only(h)
    }
}

/// Uniform scalar quantizer over `[lo, hi]` with `2^bits` cells and
/// mid-cell reconstruction. Codes are written MSB first.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quantizer {
    pub bits_per_value: u32,
    pub lo: f64,
    pub hi: f64,
}

impl Quantizer {
    pub fn new(bits_per_value: u32, lo: f64, hi: f64) -> Result<Self> {
        if !(1..=16).contains(&bits_per_value) {
            return Err(Error::InvalidArgument(format!("bits_per_value must be in 1..=16, got {bits_per_value}")));
        }
        if !(lo.is_finite() && hi.is_finite() && hi > lo) {
            return Err(Error::InvalidArgument(format!("invalid quantizer range [{lo}, {hi}]")));
        }
        Ok(Self { bits_per_value, lo, hi })
    }

    pub fn levels(&self) -> u32 {
        1 << self.bits_per_value
    }

    pub fn step(&self) -> f64 {
        (self.hi - self.lo) / self.levels() as f64
    }

    pub fn index(&self, value: f64) -> u32 {
        let cell = ((value - self.lo) / self.step()).floor();
        cell.clamp(0.0, (self.levels() - 1) as f64) as u32
    }

    pub fn reconstruct(&self, index: u32) -> f64 {
        self.lo + (index as f64 + 0.5) * self.step()
    }

    pub fn quantize<T: Scalar>(&self, latent: &LatentCode<T>) -> Result<BitStream> {
        if latent.is_empty() {
            return Err(Error::EmptyLatent);
        }
        let b = self.bits_per_value;
        let mut bits = Vec::with_capacity(latent.len() * b as usize);
        for v in latent.values() {
            let idx = self.index(v.as_f64());
            bits.extend((0..b).rev().map(|k| ((idx >> k) & 1) as u8));
        }
        Ok(BitStream(bits))
    }

    pub fn dequantize<T: Scalar>(&self, bits: &BitStream) -> Result<LatentCode<T>> {
        let b = self.bits_per_value as usize;
        if bits.is_empty() {
            return Err(Error::EmptyLatent);
        }
        if !bits.len().is_multiple_of(b) {
            return Err(Error::dims(format!("a multiple of {b} bits"), bits.len()));
        }
        Ok(LatentCode(
            bits.0
                .chunks(b)
                .map(|code| {
                    let idx = code.iter().fold(0u32, |acc, &bit| (acc << 1) | bit as u32);
                    T::of(self.reconstruct(idx))
                })
                .collect(),
        ))
    }
}

pub fn quantize_latent<T: Scalar>(latent: &LatentCode<T>, quantizer: &Quantizer) -> Result<BitStream> {
    quantizer.quantize(latent)
}

pub fn dequantize_latent<T: Scalar>(bits: &BitStream, quantizer: &Quantizer) -> Result<LatentCode<T>> {
    quantizer.dequantize(bits)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use proptest::prelude::*;

    type C = Complex<f64>;

    #[test]
    fn modulation_convention() {
        let bits = BitStream::new(vec![0, 1]).unwrap();
        assert_eq!(bpsk_modulate::<f64>(&bits), ComplexVector::from_real(&[1.0, -1.0]));
        assert!(bpsk_modulate::<f64>(&BitStream::default()).is_empty());
        assert!(BitStream::new(vec![0, 2]).is_err());
    }

    #[test]
    fn demodulation_and_tie_break() {
        let s = ComplexVector(vec![C::new(0.3, 5.0), C::new(-2.0, 0.0), C::new(0.0, -1.0), C::new(-0.0, 0.0)]);
        assert_eq!(bpsk_demodulate(&s).bits(), &[0, 1, 0, 0]);
    }

    #[test]
    fn noiseless_roundtrip_through_fading() {
        let mut rng = stream(1);
        let bits = BitStream::random(1000, &mut rng);
        let sym = bpsk_modulate::<f64>(&bits);
        assert_eq!(bpsk_demodulate(&sym), bits);
        let (rx, gains) = rayleigh_link(&sym, f64::INFINITY, true, &mut rng).unwrap();
        for ((r, g), s) in rx.0.iter().zip(&gains.0).zip(&sym.0) {
            assert_eq!(*r, g * s);
        }
        assert_eq!(bpsk_demodulate(&equalize_by_gains(&rx, &gains)), bits);
    }

    #[test]
    fn block_fading_shares_one_gain() {
        let sym = bpsk_modulate::<f64>(&BitStream::random(64, &mut stream(2)));
        let (_, gains) = rayleigh_link(&sym, 10.0, false, &mut stream(3)).unwrap();
        assert!(gains.0.iter().all(|g| *g == gains.0[0]));
    }

    #[test]
    fn fading_power_is_unit() {
        let n = 100_000;
        let sym = ComplexVector::<f64>::from_real(&vec![1.0; n]);
        let (_, gains) = rayleigh_link(&sym, 10.0, true, &mut stream(4)).unwrap();
        let mean = gains.norm_sqr() / n as f64;
        assert!((mean - 1.0).abs() < 3.0 / (n as f64).sqrt());
    }

    #[test]
    fn closed_form_values() {
        assert!((rayleigh_bpsk_ber(10.0, 1) - 0.023_268_705_377).abs() < 1e-12);
        assert!((rayleigh_bpsk_ber(1.0, 1) - 0.5 * (1.0 - 0.5f64.sqrt())).abs() < 1e-15);
        // two-branch MRC: p² (1 + 2(1 − p)) with p = (1 − μ)/2
        let p = 0.5 * (1.0 - (10.0f64 / 11.0).sqrt());
        assert!((rayleigh_bpsk_ber(10.0, 2) - p * p * (1.0 + 2.0 * (1.0 - p))).abs() < 1e-15);
    }

    #[test]
    fn closed_form_matches_numerical_integration() {
        // E_γ[Q(√(2γ))] with γ ~ Gamma(L, γ̄), by midpoint quadrature
        fn q(x: f64) -> f64 {
            0.5 * erfc(x / std::f64::consts::SQRT_2)
        }
        fn erfc(x: f64) -> f64 {
            // Numerical Recipes erfcc, fractional error < 1.2e-7
            let z = x.abs();
            let t = 1.0 / (1.0 + 0.5 * z);
            let r = t * (-z * z - 1.265_512_23
                + t * (1.000_023_68
                    + t * (0.374_091_96
                        + t * (0.096_784_18
                            + t * (-0.186_288_06
                                + t * (0.278_868_07
                                    + t * (-1.135_203_98
                                        + t * (1.488_515_87 + t * (-0.822_152_23 + t * 0.170_872_77)))))))))
                .exp();
            if x >= 0.0 {
                r
            } else {
                2.0 - r
            }
        }
        for &(snr, l) in &[(1.0, 1usize), (10.0, 1), (3.0, 4)] {
            let n = 400_000;
            let upper = snr * 60.0;
            let dx = upper / n as f64;
            let fact: f64 = (1..l).map(|k| k as f64).product();
            let integral: f64 = (0..n)
                .map(|i| {
                    let g = (i as f64 + 0.5) * dx;
                    let pdf = g.powi(l as i32 - 1) * (-g / snr).exp() / (fact * snr.powi(l as i32));
                    q((2.0 * g).sqrt()) * pdf * dx
                })
                .sum();
            let closed = rayleigh_bpsk_ber(snr, l);
            assert!((integral / closed - 1.0).abs() < 1e-4, "{snr} {l}: {integral} vs {closed}");
        }
    }

    #[test]
    fn sweep_tracks_closed_form_and_is_monotone() {
        let link = LinkConfig { n_t: 2, sigma_v_sq: 1.0, ..LinkConfig::default() };
        let pts = ber_sweep(&[0.0, 5.0, 10.0], 200_000, Scenario::NoAn, &link, &mut stream(5)).unwrap();
        for p in &pts {
            let expected = rayleigh_bpsk_ber(noise_snr(p.snr_db), 2);
            let se = (expected * (1.0 - expected) / p.trials as f64).sqrt();
            assert!((p.ber - expected).abs() < 3.0 * se, "{p:?} vs {expected}");
        }
        assert!(pts.windows(2).all(|w| w[1].ber <= w[0].ber));
    }

    fn noise_snr(db: f64) -> f64 {
        10f64.powf(db / 10.0)
    }

    #[test]
    fn bob_ber_unchanged_by_artificial_noise() {
        let link = LinkConfig { n_t: 4, sigma_v_sq: 10.0, ..LinkConfig::default() };
        let grid = [0.0, 4.0];
        let bob = ber_sweep(&grid, 50_000, Scenario::BobWithAn, &link, &mut stream(6)).unwrap();
        let plain = ber_sweep(&grid, 50_000, Scenario::NoAn, &link, &mut stream(6)).unwrap();
        for (a, b) in bob.iter().zip(&plain) {
            assert!((a.ber - b.ber).abs() <= 3.0 * a.std_error().max(b.std_error()));
        }
    }

    #[test]
    fn eve_is_jammed() {
        let link = LinkConfig { n_t: 4, sigma_v_sq: 10.0, ..LinkConfig::default() };
        let eve = ber_sweep(&[0.0, 20.0], 20_000, Scenario::EveWithAn, &link, &mut stream(7)).unwrap();
        assert!(eve.iter().all(|p| p.ber >= 0.3), "{eve:?}");
    }

    #[test]
    fn sweep_rejects_bad_inputs() {
        let single = LinkConfig { n_t: 1, ..LinkConfig::default() };
        assert!(ber_sweep(&[0.0], 100, Scenario::EveWithAn, &single, &mut stream(0)).is_err());
        assert!(ber_sweep(&[0.0], 0, Scenario::NoAn, &single, &mut stream(0)).is_err());
    }

    #[test]
    fn quantizer_examples() {
        let q = Quantizer::new(8, -1.0, 1.0).unwrap();
        let latent = LatentCode(vec![0.0f64]);
        let back: LatentCode<f64> = q.dequantize(&q.quantize(&latent).unwrap()).unwrap();
        assert!((back.0[0] - 0.0).abs() <= q.step() / 2.0);
        let long = LatentCode(vec![0.25f64; 32]);
        assert_eq!(q.quantize(&long).unwrap().len(), 256);
        assert!(matches!(q.quantize(&LatentCode::<f64>(vec![])), Err(Error::EmptyLatent)));
        assert!(Quantizer::new(0, -1.0, 1.0).is_err());
        assert!(Quantizer::new(17, -1.0, 1.0).is_err());
        assert!(Quantizer::new(4, 1.0, 1.0).is_err());
        // out-of-range values clamp to the edge cells
        let clamped: LatentCode<f64> = q.dequantize(&q.quantize(&LatentCode(vec![5.0f64, -5.0])).unwrap()).unwrap();
        assert_eq!(clamped.0, vec![q.reconstruct(255), q.reconstruct(0)]);
    }

    #[test]
    fn quantizer_error_bounded_on_every_cell() {
        for bits in [1u32, 3, 8] {
            let q = Quantizer::new(bits, -2.0, 3.0).unwrap();
            let step = q.step();
            // both edges and the centre of each cell
            let probes: Vec<f64> = (0..q.levels())
                .flat_map(|i| {
                    let lo = q.lo + i as f64 * step;
                    [lo, lo + step * 0.5, lo + step * (1.0 - 1e-9)]
                })
                .collect();
            let back: LatentCode<f64> = q.dequantize(&q.quantize(&LatentCode(probes.clone())).unwrap()).unwrap();
            for (a, b) in probes.iter().zip(&back.0) {
                assert!((a - b).abs() <= step / 2.0 + 1e-12, "{bits} bits: {a} -> {b}");
            }
        }
    }

    proptest! {
        #[test]
        fn quantizer_roundtrip_bound(values in proptest::collection::vec(-1.0..1.0f64, 1..64), bits in 1u32..=16) {
            let q = Quantizer::new(bits, -1.0, 1.0).unwrap();
            let stream = q.quantize(&LatentCode(values.clone())).unwrap();
            prop_assert_eq!(stream.len(), values.len() * bits as usize);
            let back: LatentCode<f64> = q.dequantize(&stream).unwrap();
            for (a, b) in values.iter().zip(&back.0) {
                prop_assert!((a - b).abs() <= q.step() / 2.0 + 1e-12);
            }
        }

        #[test]
        fn bpsk_roundtrip(bits in proptest::collection::vec(0u8..=1, 0..200)) {
            let stream = BitStream::new(bits).unwrap();
            prop_assert_eq!(bpsk_demodulate(&bpsk_modulate::<f32>(&stream)), stream);
        }
    }
}
