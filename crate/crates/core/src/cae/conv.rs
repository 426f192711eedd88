//! Stride-1 "same" convolution through patch matrices.
//!
//! Activations are NHWC and flattened to `[batch·h·w, channels]`. A patch
//! matrix row holds the `k × k × c` receptive field of one output pixel,
//! ordered `(ky, kx, channel)`; out-of-image taps are zero.

use ndarray::{Array2, ArrayView2};

use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Geometry {
    pub batch: usize,
    pub height: usize,
    pub width: usize,
    pub kernel: usize,
}

impl Geometry {
    fn pad(&self) -> isize {
        (self.kernel / 2) as isize
    }

    pub fn pixels(&self) -> usize {
        self.batch * self.height * self.width
    }

    /// Valid `k` range for output column `x`, as `(first tap, first input column, count)`.
    #[inline]
    fn span(&self, x: usize) -> (usize, usize, usize) {
        let start = x as isize - self.pad();
        let lo = (-start).max(0) as usize;
        let hi = (self.width as isize - start).min(self.kernel as isize).max(0) as usize;
        (lo, (start + lo as isize) as usize, hi.saturating_sub(lo))
    }
}

/// `[pixels, channels]` → `[pixels, k·k·channels]`.
pub(crate) fn im2col<T: Scalar>(input: ArrayView2<T>, g: Geometry) -> Array2<T> {
    let c = input.ncols();
    let k = g.kernel;
    let row_len = k * k * c;
    let src = input.as_slice().expect("activations are contiguous");
    let mut out = Array2::<T>::zeros((g.pixels(), row_len));
    let dst = out.as_slice_mut().expect("fresh array is contiguous");
    let img = g.height * g.width * c;
    for b in 0..g.batch {
        for y in 0..g.height {
            for x in 0..g.width {
                let row = ((b * g.height + y) * g.width + x) * row_len;
                let (kx0, ix0, n) = g.span(x);
                if n == 0 {
                    continue;
                }
                for ky in 0..k {
                    let iy = y as isize + ky as isize - g.pad();
                    if iy < 0 || iy >= g.height as isize {
                        continue;
                    }
                    let s = b * img + (iy as usize * g.width + ix0) * c;
                    let d = row + (ky * k + kx0) * c;
                    dst[d..d + n * c].copy_from_slice(&src[s..s + n * c]);
                }
            }
        }
    }
    out
}

/// Adjoint of [`im2col`]: scatter-adds patch rows back onto `[pixels, channels]`.
pub(crate) fn col2im<T: Scalar>(cols: ArrayView2<T>, channels: usize, g: Geometry) -> Array2<T> {
    let c = channels;
    let k = g.kernel;
    let row_len = k * k * c;
    debug_assert_eq!(cols.ncols(), row_len);
    let src = cols.as_slice().expect("patch matrix is contiguous");
    let mut out = Array2::<T>::zeros((g.pixels(), c));
    let dst = out.as_slice_mut().expect("fresh array is contiguous");
    let img = g.height * g.width * c;
    for b in 0..g.batch {
        for y in 0..g.height {
            for x in 0..g.width {
                let row = ((b * g.height + y) * g.width + x) * row_len;
                let (kx0, ix0, n) = g.span(x);
                if n == 0 {
                    continue;
                }
                for ky in 0..k {
                    let iy = y as isize + ky as isize - g.pad();
                    if iy < 0 || iy >= g.height as isize {
                        continue;
                    }
                    let d = b * img + (iy as usize * g.width + ix0) * c;
                    let s = row + (ky * k + kx0) * c;
                    for (o, &v) in dst[d..d + n * c].iter_mut().zip(&src[s..s + n * c]) {
                        *o += v;
                    }
                }
            }
        }
    }
    out
}
