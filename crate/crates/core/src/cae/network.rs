//! Forward and backward passes over a batch chunk.

use ndarray::{Array2, ArrayView2, Axis};

use super::conv::{col2im, im2col, Geometry};
use super::{Activation, ModelParams, ParamId};
use crate::scalar::Scalar;

/// Images per forward pass when running inference over many inputs.
const INFERENCE_CHUNK: usize = 32;

/// Activations kept for the backward pass.
pub(crate) struct Trace<T> {
    cols1: Array2<T>,
    h1: Array2<T>,
    cols2: Array2<T>,
    h2: Array2<T>,
    z: Array2<T>,
    h3: Array2<T>,
    h4: Array2<T>,
    pub out: Array2<T>,
}

fn geometry<T: Scalar>(params: &ModelParams<T>, batch: usize) -> Geometry {
    let c = params.config();
    Geometry { batch, height: c.height, width: c.width, kernel: c.kernel }
}

fn affine<T: Scalar>(input: ArrayView2<T>, weight: &Array2<T>, bias: &Array2<T>, act: Activation) -> Array2<T> {
    let mut out = input.dot(weight);
    out += bias;
    if act != Activation::Identity {
        out.mapv_inplace(|v| act.apply(v));
    }
    out
}

fn transposed_conv<T: Scalar>(
    input: ArrayView2<T>,
    weight: &Array2<T>,
    bias: &Array2<T>,
    out_channels: usize,
    g: Geometry,
    act: Activation,
) -> Array2<T> {
    let patches = input.dot(&weight.t());
    let mut out = col2im(patches.view(), out_channels, g);
    out += bias;
    if act != Activation::Identity {
        out.mapv_inplace(|v| act.apply(v));
    }
    out
}

fn encode_chunk<T: Scalar>(params: &ModelParams<T>, input: ArrayView2<T>, batch: usize) -> Array2<T> {
    let cfg = params.config();
    let g = geometry(params, batch);
    let act = cfg.hidden_activation;
    let cols1 = im2col(input, g);
    let h1 = affine(cols1.view(), params.get(ParamId::Conv1Weight), params.get(ParamId::Conv1Bias), act);
    drop(cols1);
    let cols2 = im2col(h1.view(), g);
    let h2 = affine(cols2.view(), params.get(ParamId::Conv2Weight), params.get(ParamId::Conv2Bias), act);
    let flat = h2.into_shape_with_order((batch, cfg.feature_len())).expect("contiguous feature map");
    affine(flat.view(), params.get(ParamId::EncoderWeight), params.get(ParamId::EncoderBias), Activation::Identity)
}

fn decode_chunk<T: Scalar>(params: &ModelParams<T>, z: ArrayView2<T>) -> Array2<T> {
    let cfg = params.config();
    let batch = z.nrows();
    let g = geometry(params, batch);
    let act = cfg.hidden_activation;
    let d = affine(z, params.get(ParamId::DecoderWeight), params.get(ParamId::DecoderBias), act);
    let h3 = d.into_shape_with_order((g.pixels(), cfg.filters)).expect("contiguous feature map");
    let h4 = transposed_conv(h3.view(), params.get(ParamId::Deconv1Weight), params.get(ParamId::Deconv1Bias), cfg.filters, g, act);
    transposed_conv(
        h4.view(),
        params.get(ParamId::Deconv2Weight),
        params.get(ParamId::Deconv2Bias),
        cfg.channels,
        g,
        cfg.output_activation,
    )
}

/// `[batch·h·w, c]` images → `[batch, L]` codes.
pub(crate) fn encode<T: Scalar>(params: &ModelParams<T>, input: ArrayView2<T>, batch: usize) -> Array2<T> {
    let per = params.config().width * params.config().height;
    let mut out = Array2::zeros((batch, params.config().latent_length));
    for start in (0..batch).step_by(INFERENCE_CHUNK) {
        let n = INFERENCE_CHUNK.min(batch - start);
        let chunk = input.slice(ndarray::s![start * per..(start + n) * per, ..]);
        let z = encode_chunk(params, chunk, n);
        out.slice_mut(ndarray::s![start..start + n, ..]).assign(&z);
    }
    out
}

/// `[batch, L]` codes → `[batch·h·w·c]` reconstructions, one image per row.
pub(crate) fn decode<T: Scalar>(params: &ModelParams<T>, z: ArrayView2<T>) -> Array2<T> {
    let batch = z.nrows();
    let per = params.config().image_len();
    let mut out = Array2::zeros((batch, per));
    for start in (0..batch).step_by(INFERENCE_CHUNK) {
        let n = INFERENCE_CHUNK.min(batch - start);
        let y = decode_chunk(params, z.slice(ndarray::s![start..start + n, ..]));
        let y = y.into_shape_with_order((n, per)).expect("contiguous output");
        out.slice_mut(ndarray::s![start..start + n, ..]).assign(&y);
    }
    out
}

/// Full forward pass keeping every intermediate.
pub(crate) fn forward<T: Scalar>(params: &ModelParams<T>, input: ArrayView2<T>, batch: usize) -> Trace<T> {
    let cfg = params.config();
    let g = geometry(params, batch);
    let act = cfg.hidden_activation;
    let cols1 = im2col(input, g);
    let h1 = affine(cols1.view(), params.get(ParamId::Conv1Weight), params.get(ParamId::Conv1Bias), act);
    let cols2 = im2col(h1.view(), g);
    let h2 = affine(cols2.view(), params.get(ParamId::Conv2Weight), params.get(ParamId::Conv2Bias), act);
    let flat = h2.view().into_shape_with_order((batch, cfg.feature_len())).expect("contiguous feature map");
    let z = affine(flat, params.get(ParamId::EncoderWeight), params.get(ParamId::EncoderBias), Activation::Identity);
    let d = affine(z.view(), params.get(ParamId::DecoderWeight), params.get(ParamId::DecoderBias), act);
    let h3 = d.into_shape_with_order((g.pixels(), cfg.filters)).expect("contiguous feature map");
    let h4 = transposed_conv(h3.view(), params.get(ParamId::Deconv1Weight), params.get(ParamId::Deconv1Bias), cfg.filters, g, act);
    let out = transposed_conv(
        h4.view(),
        params.get(ParamId::Deconv2Weight),
        params.get(ParamId::Deconv2Bias),
        cfg.channels,
        g,
        cfg.output_activation,
    );
    Trace { cols1, h1, cols2, h2, z, h3, h4, out }
}

fn apply_derivative<T: Scalar>(grad: &mut Array2<T>, output: &Array2<T>, act: Activation) {
    if act == Activation::Identity {
        return;
    }
    ndarray::Zip::from(grad).and(output).for_each(|g, &y| *g *= act.derivative_from_output(y));
}

fn row_sum<T: Scalar>(a: &Array2<T>) -> Array2<T> {
    a.sum_axis(Axis(0)).insert_axis(Axis(0))
}

/// Accumulates parameter gradients for `d loss / d out` into `grads`.
pub(crate) fn backward<T: Scalar>(
    params: &ModelParams<T>,
    trace: &Trace<T>,
    mut d_out: Array2<T>,
    batch: usize,
    grads: &mut ModelParams<T>,
) {
    let cfg = *params.config();
    let g = geometry(params, batch);
    let act = cfg.hidden_activation;

    // deconv2
    apply_derivative(&mut d_out, &trace.out, cfg.output_activation);
    *grads.get_mut(ParamId::Deconv2Bias) += &row_sum(&d_out);
    let d_patch = im2col(d_out.view(), g);
    *grads.get_mut(ParamId::Deconv2Weight) += &d_patch.t().dot(&trace.h4);
    let mut d_h4 = d_patch.dot(params.get(ParamId::Deconv2Weight));
    drop(d_patch);

    // deconv1
    apply_derivative(&mut d_h4, &trace.h4, act);
    *grads.get_mut(ParamId::Deconv1Bias) += &row_sum(&d_h4);
    let d_patch = im2col(d_h4.view(), g);
    *grads.get_mut(ParamId::Deconv1Weight) += &d_patch.t().dot(&trace.h3);
    let mut d_h3 = d_patch.dot(params.get(ParamId::Deconv1Weight));
    drop(d_patch);

    // decoder dense
    apply_derivative(&mut d_h3, &trace.h3, act);
    let d_dense = d_h3.into_shape_with_order((batch, cfg.feature_len())).expect("contiguous gradient");
    *grads.get_mut(ParamId::DecoderBias) += &row_sum(&d_dense);
    *grads.get_mut(ParamId::DecoderWeight) += &trace.z.t().dot(&d_dense);
    let d_z = d_dense.dot(&params.get(ParamId::DecoderWeight).t());

    // encoder dense
    *grads.get_mut(ParamId::EncoderBias) += &row_sum(&d_z);
    let flat = trace.h2.view().into_shape_with_order((batch, cfg.feature_len())).expect("contiguous feature map");
    *grads.get_mut(ParamId::EncoderWeight) += &flat.t().dot(&d_z);
    let d_flat = d_z.dot(&params.get(ParamId::EncoderWeight).t());
    let mut d_h2 = d_flat.into_shape_with_order((g.pixels(), cfg.filters)).expect("contiguous gradient");

    // conv2
    apply_derivative(&mut d_h2, &trace.h2, act);
    *grads.get_mut(ParamId::Conv2Bias) += &row_sum(&d_h2);
    *grads.get_mut(ParamId::Conv2Weight) += &trace.cols2.t().dot(&d_h2);
    let d_cols = d_h2.dot(&params.get(ParamId::Conv2Weight).t());
    let mut d_h1 = col2im(d_cols.view(), cfg.filters, g);
    drop(d_cols);

    // conv1
    apply_derivative(&mut d_h1, &trace.h1, act);
    *grads.get_mut(ParamId::Conv1Bias) += &row_sum(&d_h1);
    *grads.get_mut(ParamId::Conv1Weight) += &trace.cols1.t().dot(&d_h1);
}
