//! Reconstruction quality and compression measures.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::ImageTensor;

/// PSNR reported for identical images.
pub const PSNR_CAP_DB: f64 = 99.0;

/// `|P̄ · M̄|` below this makes the normalized MSE undefined.
pub const DEGENERATE_MEAN_PRODUCT: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QualityReport {
    /// Mean squared error divided by the product of the image means;
    /// `None` when that product is degenerate.
    pub normalized_mse: Option<f64>,
    pub plain_mse: f64,
    pub psnr_db: f64,
    pub compression_ratio: f64,
}

impl QualityReport {
    pub fn compare<T: Scalar>(predicted: &ImageTensor<T>, original: &ImageTensor<T>, latent_length: usize) -> Result<Self> {
        let plain = plain_mse(predicted, original)?;
        let (w, h, c) = original.dims();
        Ok(Self {
            normalized_mse: normalized_mse(predicted, original).ok(),
            plain_mse: plain,
            psnr_db: psnr_from_mse(plain),
            compression_ratio: compression_ratio(latent_length, w, h, c)?,
        })
    }
}

fn check_dims<T: Scalar>(a: &ImageTensor<T>, b: &ImageTensor<T>) -> Result<()> {
    if a.dims() != b.dims() {
        return Err(Error::shape(format!("{:?}", b.dims()), format!("{:?}", a.dims())));
    }
    Ok(())
}

fn mean<T: Scalar>(v: &[T]) -> f64 {
    v.iter().map(|x| x.as_f64()).sum::<f64>() / v.len() as f64
}

pub fn plain_mse<T: Scalar>(predicted: &ImageTensor<T>, original: &ImageTensor<T>) -> Result<f64> {
    check_dims(predicted, original)?;
    let n = original.len() as f64;
    Ok(predicted
        .values()
        .iter()
        .zip(original.values())
        .map(|(p, m)| {
            let d = p.as_f64() - m.as_f64();
            d * d
        })
        .sum::<f64>()
        / n)
}

/// `(1/N) Σ (P_i − M_i)² / (P̄ M̄)`.
pub fn normalized_mse<T: Scalar>(predicted: &ImageTensor<T>, original: &ImageTensor<T>) -> Result<f64> {
    let plain = plain_mse(predicted, original)?;
    let denom = mean(predicted.values()) * mean(original.values());
    if !(denom.abs() >= DEGENERATE_MEAN_PRODUCT) {
        return Err(Error::DegenerateMean(denom));
    }
    Ok(plain / denom)
}

/// Peak-1 PSNR in dB, capped at [`PSNR_CAP_DB`].
pub fn psnr<T: Scalar>(predicted: &ImageTensor<T>, original: &ImageTensor<T>) -> Result<f64> {
    Ok(psnr_from_mse(plain_mse(predicted, original)?))
}

pub fn psnr_from_mse(mse: f64) -> f64 {
    if mse <= 0.0 {
        PSNR_CAP_DB
    } else {
        (10.0 * (1.0 / mse).log10()).min(PSNR_CAP_DB)
    }
}

/// Fraction of the image's element count carried by the latent code.
pub fn compression_ratio(latent_length: usize, width: usize, height: usize, channels: usize) -> Result<f64> {
    if latent_length == 0 || width == 0 || height == 0 || channels == 0 {
        return Err(Error::InvalidArgument("compression ratio needs positive counts".into()));
    }
    Ok(latent_length as f64 / (width * height * channels) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn img(v: &[f64]) -> ImageTensor<f64> {
        ImageTensor::new(v.len(), 1, 1, v.to_vec()).unwrap()
    }

    #[test]
    fn normalized_mse_examples() {
        let m = img(&[0.2, 0.4, 0.9]);
        assert_eq!(normalized_mse(&m, &m).unwrap(), 0.0);
        assert_eq!(normalized_mse(&img(&[2.0, 2.0]), &img(&[1.0, 1.0])).unwrap(), 0.5);
        assert!(matches!(normalized_mse(&img(&[0.0, 0.0]), &img(&[0.5, 0.5])), Err(Error::DegenerateMean(_))));
        assert!(matches!(normalized_mse(&img(&[0.5]), &img(&[0.5, 0.5])), Err(Error::ShapeMismatch { .. })));
    }

    #[test]
    fn psnr_examples() {
        let m = img(&[0.1, 0.5]);
        assert_eq!(psnr(&m, &m).unwrap(), PSNR_CAP_DB);
        assert!((psnr_from_mse(0.01) - 20.0).abs() < 1e-12);
        assert!((psnr(&img(&[0.1, 0.0]), &img(&[0.0, 0.1])).unwrap() - 20.0).abs() < 1e-12);
    }

    #[test]
    fn compression_ratio_examples() {
        let pct = |l| (compression_ratio(l, 28, 28, 1).unwrap() * 10_000.0).round() / 100.0;
        assert_eq!(pct(32), 4.08);
        assert_eq!(pct(64), 8.16);
        assert_eq!(pct(128), 16.33);
        assert_eq!(pct(256), 32.65);
        assert_eq!(compression_ratio(784, 28, 28, 1).unwrap(), 1.0);
        assert!(compression_ratio(0, 28, 28, 1).is_err());
    }

    #[test]
    fn report_carries_both_errors() {
        let r = QualityReport::compare(&img(&[0.0, 0.2]), &img(&[0.1, 0.1]), 1).unwrap();
        assert!((r.plain_mse - 0.01).abs() < 1e-15);
        assert!((r.normalized_mse.unwrap() - 1.0).abs() < 1e-12);
        assert!((r.psnr_db - 20.0).abs() < 1e-9);
        assert_eq!(r.compression_ratio, 0.5);
    }

    proptest! {
        #[test]
        fn errors_vanish_only_on_equality(a in proptest::collection::vec(0.05..1.0f64, 8), b in proptest::collection::vec(0.05..1.0f64, 8)) {
            let (pa, pb) = (img(&a), img(&b));
            let nm = normalized_mse(&pa, &pb).unwrap();
            let pm = plain_mse(&pa, &pb).unwrap();
            prop_assert!(nm >= 0.0 && pm >= 0.0);
            prop_assert_eq!(pm == 0.0, a == b);
            prop_assert_eq!(nm == 0.0, a == b);
        }

        #[test]
        fn psnr_decreases_with_mse(m in 1e-8..1.0f64, k in 1.0001..10.0f64) {
            prop_assert!(psnr_from_mse(m * k) < psnr_from_mse(m));
        }
    }
}
