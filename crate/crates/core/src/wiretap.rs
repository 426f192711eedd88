//! MISO wiretap link with null-space artificial noise.
//!
//! The transmitter has `n_t` antennas; Bob and Eve each have one. The
//! information symbol is beamformed along `p = H†/‖H‖`, and artificial noise
//! `w = Z v` is drawn in the null space of Bob's channel `H`, so Bob sees
//! `‖H‖ u + n` while Eve sees `G p u + G w + e`.

use num_complex::Complex;
use num_traits::Zero;
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{
    null_space_basis, sample_complex_gaussian, ComplexMatrix, ComplexVector, DEFAULT_RANK_TOLERANCE,
};
use crate::scalar::Scalar;

/// Channel norms below this are treated as a dead link.
pub const ZERO_CHANNEL_TOLERANCE: f64 = 1e-12;

/// One block-fading realization of Bob's and Eve's channels.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelPair<T> {
    /// Bob's channel, `n_r × n_t`.
    pub h: ComplexMatrix<T>,
    /// Eve's channel, `n_e × n_t`.
    pub g: ComplexMatrix<T>,
    pub sigma_n_sq: f64,
    pub sigma_e_sq: f64,
}

impl<T: Scalar> ChannelPair<T> {
    pub fn n_t(&self) -> usize {
        self.h.cols()
    }
}

/// Power allocation between the information symbol and the artificial noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnParams {
    /// Artificial-noise variance per null-space dimension.
    pub sigma_v_sq: f64,
    /// Information-symbol variance.
    pub sigma_u_sq: f64,
}

impl Default for AnParams {
    fn default() -> Self {
        Self { sigma_v_sq: 1.0, sigma_u_sq: 1.0 }
    }
}

impl AnParams {
    pub fn new(sigma_v_sq: f64, sigma_u_sq: f64) -> Result<Self> {
        if !(sigma_v_sq >= 0.0) || !sigma_v_sq.is_finite() {
            return Err(Error::NegativeVariance(sigma_v_sq));
        }
        if !(sigma_u_sq > 0.0) || !sigma_u_sq.is_finite() {
            return Err(Error::InvalidArgument(format!("symbol variance must be positive, got {sigma_u_sq}")));
        }
        Ok(Self { sigma_v_sq, sigma_u_sq })
    }

    /// Expected transmit power `σ_u² + null_dim · σ_v²`.
    pub fn total_power(&self, null_dim: usize) -> f64 {
        self.sigma_u_sq + null_dim as f64 * self.sigma_v_sq
    }
}

/// Per-realization secrecy figures, in bits per channel use.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SecrecyReport {
    pub bob_capacity: f64,
    pub eve_capacity: f64,
    /// `bob_capacity − eve_capacity`; negative for unlucky draws.
    pub secrecy_lower_bound: f64,
    /// `E|G w|²`.
    pub an_leakage_power: f64,
}

/// Draws `H` (`n_r × n_t`) and `G` (`n_e × n_t`) with i.i.d. CN(0,1) entries.
pub fn draw_channel_pair<T: Scalar, R: Rng + ?Sized>(
    n_t: usize,
    n_r: usize,
    n_e: usize,
    sigma_n_sq: f64,
    sigma_e_sq: f64,
    rng: &mut R,
) -> Result<ChannelPair<T>> {
    if n_t == 0 || n_r == 0 || n_e == 0 {
        return Err(Error::InvalidArgument(format!(
            "antenna counts must be positive (n_t={n_t}, n_r={n_r}, n_e={n_e})"
        )));
    }
    for v in [sigma_n_sq, sigma_e_sq] {
        if !(v >= 0.0) {
            return Err(Error::NegativeVariance(v));
        }
    }
    let h = ComplexMatrix::random_gaussian(n_r, n_t, 1.0, rng)?;
    let g = ComplexMatrix::random_gaussian(n_e, n_t, 1.0, rng)?;
    Ok(ChannelPair { h, g, sigma_n_sq, sigma_e_sq })
}

fn require_row<T: Scalar>(m: &ComplexMatrix<T>, what: &str) -> Result<()> {
    if m.rows() != 1 {
        return Err(Error::dims(format!("single-antenna {what} (1 row)"), format!("{} rows", m.rows())));
    }
    Ok(())
}

/// Unit-norm beamformer `p = H†/‖H‖` for a single-antenna receiver.
pub fn beamformer<T: Scalar>(h: &ComplexMatrix<T>) -> Result<ComplexVector<T>> {
    require_row(h, "receiver")?;
    let norm = h.frobenius_norm();
    if !(norm.as_f64() > ZERO_CHANNEL_TOLERANCE) {
        return Err(Error::ZeroChannel(norm.as_f64()));
    }
    Ok(ComplexVector(h.row(0).iter().map(|z| z.conj() / norm).collect()))
}

/// Transmit-side state for one fading block: beamformer, null-space basis and
/// Bob's effective real gain `‖H‖`.
#[derive(Debug, Clone)]
pub struct Precoder<T> {
    pub beam: ComplexVector<T>,
    pub null_basis: ComplexMatrix<T>,
    pub gain: T,
}

impl<T: Scalar> Precoder<T> {
    pub fn new(h: &ComplexMatrix<T>) -> Result<Self> {
        let beam = beamformer(h)?;
        let null_basis = null_space_basis(h, DEFAULT_RANK_TOLERANCE)?;
        Ok(Self { beam, null_basis, gain: h.frobenius_norm() })
    }

    /// Beamformer only, with an empty null-space basis; valid for `n_t = 1`.
    pub fn beam_only(h: &ComplexMatrix<T>) -> Result<Self> {
        Ok(Self { beam: beamformer(h)?, null_basis: ComplexMatrix::zeros(h.cols(), 0), gain: h.frobenius_norm() })
    }

    pub fn null_dim(&self) -> usize {
        self.null_basis.cols()
    }

    /// `w = Z v`, `v` i.i.d. CN(0, σ_v²).
    pub fn artificial_noise<R: Rng + ?Sized>(&self, sigma_v_sq: f64, rng: &mut R) -> Result<ComplexVector<T>> {
        let v = sample_complex_gaussian(self.null_dim(), sigma_v_sq, rng)?;
        self.null_basis.matvec(&v)
    }

    /// `x = p u + w`.
    pub fn transmit<R: Rng + ?Sized>(&self, u: Complex<T>, sigma_v_sq: f64, rng: &mut R) -> Result<ComplexVector<T>> {
        let w = self.artificial_noise(sigma_v_sq, rng)?;
        self.beam.scale(u).add(&w)
    }
}

/// Artificial noise confined to the null space of `h`.
pub fn make_artificial_noise<T: Scalar, R: Rng + ?Sized>(
    h: &ComplexMatrix<T>,
    params: &AnParams,
    rng: &mut R,
) -> Result<ComplexVector<T>> {
    let z = null_space_basis(h, DEFAULT_RANK_TOLERANCE)?;
    let v = sample_complex_gaussian(z.cols(), params.sigma_v_sq, rng)?;
    z.matvec(&v)
}

/// Transmit vector `x = p u + w` for information symbol `u`.
pub fn transmit<T: Scalar, R: Rng + ?Sized>(
    u: Complex<T>,
    h: &ComplexMatrix<T>,
    params: &AnParams,
    rng: &mut R,
) -> Result<ComplexVector<T>> {
    Precoder::new(h)?.transmit(u, params.sigma_v_sq, rng)
}

/// Received sample `channel_row · x + η`, `η ~ CN(0, noise_variance)`.
pub fn propagate<T: Scalar, R: Rng + ?Sized>(
    channel_row: &ComplexMatrix<T>,
    x: &ComplexVector<T>,
    noise_variance: f64,
    rng: &mut R,
) -> Result<Complex<T>> {
    require_row(channel_row, "receiver")?;
    let clean = x.dot_row(channel_row.row(0))?;
    let noise = sample_complex_gaussian::<T, R>(1, noise_variance, rng)?;
    Ok(clean + noise.0[0])
}

/// `E|G w|² = σ_v² ‖G Z‖²_F` with `Z` the null-space basis of `h`.
pub fn an_leakage_power<T: Scalar>(g: &ComplexMatrix<T>, h: &ComplexMatrix<T>, sigma_v_sq: f64) -> Result<f64> {
    let z = null_space_basis(h, DEFAULT_RANK_TOLERANCE)?;
    leakage_with_basis(g, &z, sigma_v_sq)
}

fn leakage_with_basis<T: Scalar>(g: &ComplexMatrix<T>, z: &ComplexMatrix<T>, sigma_v_sq: f64) -> Result<f64> {
    let gz = g.matmul(z)?.frobenius_norm().as_f64();
    Ok(sigma_v_sq * gz * gz)
}

/// Secrecy-rate lower bound `log₂(1 + SNR_bob) − log₂(1 + SINR_eve)` for one
/// channel realization.
pub fn secrecy_lower_bound<T: Scalar>(pair: &ChannelPair<T>, params: &AnParams) -> Result<SecrecyReport> {
    require_row(&pair.h, "receiver")?;
    require_row(&pair.g, "eavesdropper")?;
    let precoder = Precoder::new(&pair.h)?;
    let hp = precoder.beam.dot_row(pair.h.row(0))?.norm_sqr().as_f64();
    let gp = precoder.beam.dot_row(pair.g.row(0))?.norm_sqr().as_f64();
    let leakage = leakage_with_basis(&pair.g, &precoder.null_basis, params.sigma_v_sq)?;

    let bob_capacity = capacity(hp * params.sigma_u_sq, pair.sigma_n_sq);
    let eve_capacity = capacity(gp * params.sigma_u_sq, leakage + pair.sigma_e_sq);
    Ok(SecrecyReport {
        bob_capacity,
        eve_capacity,
        secrecy_lower_bound: bob_capacity - eve_capacity,
        an_leakage_power: leakage,
    })
}

/// `log₂(1 + signal/noise)`, infinite for a noiseless link carrying signal.
fn capacity(signal: f64, noise: f64) -> f64 {
    if signal == 0.0 {
        0.0
    } else if noise == 0.0 {
        f64::INFINITY
    } else {
        (1.0 + signal / noise).log2()
    }
}

/// Bob's equalized symbol estimate `z / ‖H‖`.
pub fn equalize<T: Scalar>(received: Complex<T>, gain: Complex<T>) -> Complex<T> {
    if gain.is_zero() {
        Complex::zero()
    } else {
        received / gain
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, substream};

    type C = Complex<f64>;

    fn row(v: &[f64]) -> ComplexMatrix<f64> {
        ComplexMatrix::from_real_rows(&[v]).unwrap()
    }

    #[test]
    fn channel_draws_are_deterministic() {
        let a: ChannelPair<f64> = draw_channel_pair(4, 1, 1, 0.1, 0.1, &mut stream(5)).unwrap();
        let b: ChannelPair<f64> = draw_channel_pair(4, 1, 1, 0.1, 0.1, &mut stream(5)).unwrap();
        assert_eq!(a, b);
        assert!(draw_channel_pair::<f64, _>(0, 1, 1, 0.1, 0.1, &mut stream(5)).is_err());
    }

    #[test]
    fn channel_moments_and_independence() {
        let n = 100_000;
        let mut rng = stream(11);
        let mut power = 0.0;
        let mut cross = C::zero();
        for _ in 0..n {
            let pair: ChannelPair<f64> = draw_channel_pair(2, 1, 1, 0.0, 0.0, &mut rng).unwrap();
            let h = pair.h[(0, 0)];
            power += h.norm_sqr();
            cross += h * pair.g[(0, 0)].conj();
        }
        let n_f = n as f64;
        assert!((power / n_f - 1.0).abs() < 3.0 / n_f.sqrt());
        // each of Re, Im of h g* has variance 1/2
        let se = (0.5 / n_f).sqrt();
        assert!((cross.re / n_f).abs() < 3.0 * se && (cross.im / n_f).abs() < 3.0 * se);
    }

    #[test]
    fn beamformer_examples() {
        let p = beamformer(&row(&[1.0, 0.0])).unwrap();
        assert_eq!(p, ComplexVector::from_real(&[1.0, 0.0]));
        let h = row(&[3.0, 4.0]);
        let p = beamformer(&h).unwrap();
        assert!((p.0[0] - C::new(0.6, 0.0)).norm() < 1e-15);
        assert!((p.0[1] - C::new(0.8, 0.0)).norm() < 1e-15);
        assert!((p.dot_row(h.row(0)).unwrap() - C::new(5.0, 0.0)).norm() < 1e-14);
        assert!(matches!(beamformer(&row(&[0.0, 0.0])), Err(Error::ZeroChannel(_))));
        assert!(beamformer(&ComplexMatrix::<f64>::zeros(2, 2)).is_err());
    }

    #[test]
    fn beamformer_is_unit_and_real_gain() {
        for seed in 0..1000 {
            let h = ComplexMatrix::<f64>::random_gaussian(1, 4, 1.0, &mut stream(seed)).unwrap();
            let p = beamformer(&h).unwrap();
            assert!((p.norm() - 1.0).abs() < 1e-12);
            let hp = p.dot_row(h.row(0)).unwrap();
            assert!(hp.im.abs() < 1e-12 && hp.re > 0.0);
        }
    }

    #[test]
    fn artificial_noise_examples() {
        let h = row(&[1.0, 0.0]);
        let silent = make_artificial_noise(&h, &AnParams::new(0.0, 1.0).unwrap(), &mut stream(1)).unwrap();
        assert!(silent.0.iter().all(|z| z.is_zero()));
        let w = make_artificial_noise(&h, &AnParams::new(1.0, 1.0).unwrap(), &mut stream(1)).unwrap();
        assert_eq!(w.0[0], C::zero());
        assert!(w.0[1].norm() > 0.0);
        assert_eq!(w.dot_row(h.row(0)).unwrap(), C::zero());
        let full = ComplexMatrix::<f64>::identity(2);
        assert!(matches!(
            make_artificial_noise(&full, &AnParams::default(), &mut stream(1)),
            Err(Error::NoNullSpace { .. })
        ));
    }

    #[test]
    fn artificial_noise_power_matches_null_dimension() {
        let n = 100_000;
        let sigma_v_sq = 2.0;
        let h = ComplexMatrix::<f64>::random_gaussian(1, 4, 1.0, &mut stream(2)).unwrap();
        let pre = Precoder::new(&h).unwrap();
        let mut rng = stream(3);
        let mut acc = 0.0;
        for _ in 0..n {
            let w = pre.artificial_noise(sigma_v_sq, &mut rng).unwrap();
            assert!(w.dot_row(h.row(0)).unwrap().norm() <= 1e-10 * pre.gain * w.norm() + 1e-300);
            acc += w.norm_sqr();
        }
        // ‖w‖² is a sum of 3 Exp(σ_v²) terms: sd 3^½ σ_v²
        let se = 3f64.sqrt() * sigma_v_sq / (n as f64).sqrt();
        assert!((acc / n as f64 - 3.0 * sigma_v_sq).abs() < 3.0 * se);
    }

    #[test]
    fn transmit_examples_and_nulling() {
        let x = transmit(C::new(1.0, 0.0), &row(&[1.0, 0.0]), &AnParams::new(0.0, 1.0).unwrap(), &mut stream(0))
            .unwrap();
        assert_eq!(x, ComplexVector::from_real(&[1.0, 0.0]));

        let params = AnParams::new(10.0, 1.0).unwrap();
        for seed in 0..200 {
            let mut rng = stream(seed);
            let h = ComplexMatrix::<f64>::random_gaussian(1, 4, 1.0, &mut rng).unwrap();
            let u = sample_complex_gaussian::<f64, _>(1, 1.0, &mut rng).unwrap().0[0];
            let x = transmit(u, &h, &params, &mut rng).unwrap();
            let hx = x.dot_row(h.row(0)).unwrap();
            let norm_h = h.frobenius_norm();
            assert!((hx - u * norm_h).norm() / (norm_h * u.norm() + 1e-300) < 1e-10);
        }
    }

    #[test]
    fn transmit_power_budget() {
        let n = 100_000;
        let params = AnParams::new(1.0, 2.0).unwrap();
        let h = ComplexMatrix::<f64>::random_gaussian(1, 4, 1.0, &mut stream(21)).unwrap();
        let pre = Precoder::new(&h).unwrap();
        let mut rng = stream(22);
        let mut acc = 0.0;
        for _ in 0..n {
            let u = sample_complex_gaussian::<f64, _>(1, params.sigma_u_sq, &mut rng).unwrap().0[0];
            acc += pre.transmit(u, params.sigma_v_sq, &mut rng).unwrap().norm_sqr();
        }
        // ‖x‖² = |u|² + ‖v‖²: variance σ_u⁴ + 3σ_v⁴
        let sd = (params.sigma_u_sq.powi(2) + 3.0 * params.sigma_v_sq.powi(2)).sqrt();
        let expected = params.total_power(3);
        assert!((acc / n as f64 - expected).abs() < 3.0 * sd / (n as f64).sqrt());
    }

    #[test]
    fn propagate_noiseless_row() {
        let x = ComplexVector(vec![C::new(0.5, -1.0), C::new(2.0, 3.0)]);
        let y = propagate(&row(&[1.0, 0.0]), &x, 0.0, &mut stream(0)).unwrap();
        assert_eq!(y, C::new(0.5, -1.0));
        assert!(propagate(&row(&[1.0, 0.0, 0.0]), &x, 0.0, &mut stream(0)).is_err());
    }

    /// Variance of `residual(...)` over `n` draws with independent streams.
    fn residual_variance(n: usize, seed: u64, mut residual: impl FnMut(&mut crate::rng::RandomStream) -> C) -> f64 {
        let samples: Vec<C> = (0..n).map(|i| residual(&mut substream(seed, &[i as u64]))).collect();
        let mean = samples.iter().sum::<C>() / n as f64;
        samples.iter().map(|z| (z - mean).norm_sqr()).sum::<f64>() / (n as f64 - 1.0)
    }

    #[test]
    fn bob_is_blind_to_artificial_noise() {
        let n = 20_000;
        let sigma_n_sq = 0.1;
        let h = ComplexMatrix::<f64>::random_gaussian(1, 4, 1.0, &mut stream(31)).unwrap();
        let pre = Precoder::new(&h).unwrap();
        let run = |sigma_v_sq: f64, seed: u64| {
            residual_variance(n, seed, |rng| {
                let u = sample_complex_gaussian::<f64, _>(1, 1.0, rng).unwrap().0[0];
                let x = pre.transmit(u, sigma_v_sq, rng).unwrap();
                propagate(&h, &x, sigma_n_sq, rng).unwrap() - u * pre.gain
            })
        };
        let quiet = run(0.0, 1);
        let loud = run(10.0, 2);
        // |n|² ~ Exp(σ²): sample variance has standard error ≈ σ²/√n
        let se = sigma_n_sq / (n as f64).sqrt();
        assert!((quiet - sigma_n_sq).abs() < 3.0 * se, "{quiet}");
        assert!((loud - quiet).abs() < 3.0 * 2f64.sqrt() * se, "{loud} vs {quiet}");
    }

    #[test]
    fn eve_sees_leakage_plus_noise() {
        let n = 100_000;
        let sigma_e_sq = 0.1;
        let sigma_v_sq = 1.0;
        let mut rng = stream(41);
        let h = ComplexMatrix::<f64>::random_gaussian(1, 4, 1.0, &mut rng).unwrap();
        let g = ComplexMatrix::<f64>::random_gaussian(1, 4, 1.0, &mut rng).unwrap();
        let pre = Precoder::new(&h).unwrap();
        let gp = pre.beam.dot_row(g.row(0)).unwrap();
        let var = residual_variance(n, 7, |rng| {
            let u = sample_complex_gaussian::<f64, _>(1, 1.0, rng).unwrap().0[0];
            let x = pre.transmit(u, sigma_v_sq, rng).unwrap();
            propagate(&g, &x, sigma_e_sq, rng).unwrap() - gp * u
        });
        let expected = an_leakage_power(&g, &h, sigma_v_sq).unwrap() + sigma_e_sq;
        assert!((var / expected - 1.0).abs() < 0.02, "{var} vs {expected}");
    }

    #[test]
    fn leakage_degenerate_cases() {
        let h = ComplexMatrix::<f64>::random_gaussian(1, 4, 1.0, &mut stream(8)).unwrap();
        assert!(an_leakage_power(&h, &h, 5.0).unwrap() < 1e-25);
        let g = ComplexMatrix::<f64>::random_gaussian(1, 4, 1.0, &mut stream(9)).unwrap();
        assert_eq!(an_leakage_power(&g, &h, 0.0).unwrap(), 0.0);
        assert!(an_leakage_power(&g, &ComplexMatrix::identity(4), 1.0).is_err());
    }

    #[test]
    fn leakage_matches_monte_carlo() {
        let n = 100_000;
        let mut rng = stream(10);
        let h = ComplexMatrix::<f64>::random_gaussian(1, 4, 1.0, &mut rng).unwrap();
        let g = ComplexMatrix::<f64>::random_gaussian(1, 4, 1.0, &mut rng).unwrap();
        let pre = Precoder::new(&h).unwrap();
        let mc = (0..n)
            .map(|_| pre.artificial_noise(1.5, &mut rng).unwrap().dot_row(g.row(0)).unwrap().norm_sqr())
            .sum::<f64>()
            / n as f64;
        let analytic = an_leakage_power(&g, &h, 1.5).unwrap();
        assert!((mc / analytic - 1.0).abs() < 0.02, "{mc} vs {analytic}");
    }

    #[test]
    fn secrecy_symmetric_channel_gives_zero() {
        let h = ComplexMatrix::<f64>::random_gaussian(1, 4, 1.0, &mut stream(12)).unwrap();
        let g = h.scale(C::from_polar(1.0, 0.7));
        let pair = ChannelPair { h, g, sigma_n_sq: 0.1, sigma_e_sq: 0.1 };
        let rep = secrecy_lower_bound(&pair, &AnParams::new(3.0, 1.0).unwrap()).unwrap();
        assert!(rep.an_leakage_power < 1e-25);
        assert!(rep.secrecy_lower_bound.abs() < 1e-12);
        assert_eq!(rep.secrecy_lower_bound, rep.bob_capacity - rep.eve_capacity);
    }

    #[test]
    fn secrecy_saturates_with_huge_noise_power() {
        let pair: ChannelPair<f64> = draw_channel_pair(4, 1, 1, 0.1, 0.1, &mut stream(13)).unwrap();
        let rep = secrecy_lower_bound(&pair, &AnParams::new(1e6, 1.0).unwrap()).unwrap();
        assert!(rep.eve_capacity < 1e-4);
        assert!((rep.secrecy_lower_bound - rep.bob_capacity).abs() < 1e-4);
    }

    #[test]
    fn secrecy_is_mostly_positive() {
        let params = AnParams::new(1.0, 1.0).unwrap();
        let positive = (0..1000)
            .filter(|&s| {
                let pair: ChannelPair<f64> = draw_channel_pair(4, 1, 1, 0.1, 0.1, &mut stream(s)).unwrap();
                secrecy_lower_bound(&pair, &params).unwrap().secrecy_lower_bound > 0.0
            })
            .count();
        assert!(positive >= 990, "{positive}");
    }

    #[test]
    fn eve_capacity_decreases_with_noise_power() {
        for seed in 0..50 {
            let pair: ChannelPair<f64> = draw_channel_pair(4, 1, 1, 0.1, 0.1, &mut stream(seed)).unwrap();
            let caps: Vec<f64> = [0.0, 0.1, 0.5, 1.0, 2.0, 5.0, 10.0, 100.0]
                .iter()
                .map(|&v| secrecy_lower_bound(&pair, &AnParams::new(v, 1.0).unwrap()).unwrap().eve_capacity)
                .collect();
            assert!(caps.windows(2).all(|w| w[1] <= w[0]));
        }
    }

    #[test]
    fn eve_is_degraded_on_average() {
        let params = AnParams::new(1.0, 1.0).unwrap();
        let (mut bob, mut eve) = (0.0, 0.0);
        for s in 0..2000 {
            let pair: ChannelPair<f64> = draw_channel_pair(2, 1, 1, 0.5, 0.5, &mut stream(s)).unwrap();
            let rep = secrecy_lower_bound(&pair, &params).unwrap();
            bob += rep.bob_capacity;
            eve += rep.eve_capacity;
        }
        assert!(eve < bob);
    }
}
