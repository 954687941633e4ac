//! Standard, depthwise and pointwise 2-D convolutions (no bias).
//!
//! Weight layouts:
//! - standard: `[out, in, k, k]`
//! - depthwise: `[channels, 1, k, k]`, filter `c` sees only input channel `c`
//! - pointwise: `[out, in, 1, 1]`
//!
//! Work is split across batch items (outputs, input gradients) and output
//! channels (weight gradients); every sum still runs in a fixed order, so
//! results do not depend on the thread count.

use rand::Rng;
use rayon::prelude::*;

use super::init_uniform;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ConvKind {
    Standard,
    Depthwise,
    Pointwise,
}

impl ConvKind {
    pub fn name(self) -> &'static str {
        match self {
            ConvKind::Standard => "conv",
            ConvKind::Depthwise => "dw",
            ConvKind::Pointwise => "pw",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvLayer {
    kind: ConvKind,
    weights: Tensor,
    stride: usize,
    padding: usize,
}

/// Input retained by a training-mode forward pass.
#[derive(Debug, Clone)]
pub struct ConvRecord {
    input: Tensor,
}

/// Padding used for a square kernel: "same" for odd kernels at stride 1.
pub fn default_padding(kernel: usize) -> usize {
    (kernel - 1) / 2
}

pub fn output_extent(input: usize, kernel: usize, stride: usize, padding: usize) -> Option<usize> {
    let padded = input + 2 * padding;
    if padded < kernel {
        return None;
    }
    Some((padded - kernel) / stride + 1)
}

impl ConvLayer {
    pub fn from_weights(kind: ConvKind, weights: Tensor, stride: usize, padding: usize) -> Result<Self> {
        let invalid = |message: String| Error::Layer {
            layer: kind.name().to_string(),
            message,
        };
        let [_, in_ch, kh, kw] = weights.dims4()?;
        if kh != kw {
            return Err(invalid(format!("kernel must be square, got {kh}x{kw}")));
        }
        if !(stride == 1 || stride == 2) {
            return Err(invalid(format!("stride must be 1 or 2, got {stride}")));
        }
        match kind {
            ConvKind::Pointwise if kh != 1 => {
                return Err(invalid(format!("pointwise kernel must be 1x1, got {kh}x{kw}")))
            }
            ConvKind::Depthwise if in_ch != 1 => {
                return Err(invalid(format!(
                    "depthwise weights must have one input channel per filter, got {in_ch}"
                )))
            }
            _ => {}
        }
        Ok(ConvLayer {
            kind,
            weights,
            stride,
            padding,
        })
    }

    pub fn standard<R: Rng>(in_ch: usize, out_ch: usize, kernel: usize, stride: usize, rng: &mut R) -> Result<Self> {
        let weights = init_uniform(&[out_ch, in_ch, kernel, kernel], in_ch * kernel * kernel, rng)?;
        Self::from_weights(ConvKind::Standard, weights, stride, default_padding(kernel))
    }

    pub fn depthwise<R: Rng>(channels: usize, kernel: usize, stride: usize, rng: &mut R) -> Result<Self> {
        let weights = init_uniform(&[channels, 1, kernel, kernel], kernel * kernel, rng)?;
        Self::from_weights(ConvKind::Depthwise, weights, stride, default_padding(kernel))
    }

    pub fn pointwise<R: Rng>(in_ch: usize, out_ch: usize, rng: &mut R) -> Result<Self> {
        let weights = init_uniform(&[out_ch, in_ch, 1, 1], in_ch, rng)?;
        Self::from_weights(ConvKind::Pointwise, weights, 1, 0)
    }

    pub fn kind(&self) -> ConvKind {
        self.kind
    }

    pub fn weights(&self) -> &Tensor {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut Tensor {
        &mut self.weights
    }

    pub fn stride(&self) -> usize {
        self.stride
    }

    pub fn padding(&self) -> usize {
        self.padding
    }

    pub fn kernel(&self) -> usize {
        self.weights.shape()[2]
    }

    pub fn in_channels(&self) -> usize {
        match self.kind {
            ConvKind::Depthwise => self.weights.shape()[0],
            _ => self.weights.shape()[1],
        }
    }

    pub fn out_channels(&self) -> usize {
        self.weights.shape()[0]
    }

    fn geometry(&self, x: &Tensor) -> Result<Geometry> {
        let [batch, channels, height, width] = x.dims4()?;
        let err = |message: String| Error::Layer {
            layer: self.kind.name().to_string(),
            message,
        };
        if channels != self.in_channels() {
            return Err(err(format!(
                "expected {} input channels, got {channels}",
                self.in_channels()
            )));
        }
        let k = self.kernel();
        let out_h = output_extent(height, k, self.stride, self.padding);
        let out_w = output_extent(width, k, self.stride, self.padding);
        let (Some(out_h), Some(out_w)) = (out_h, out_w) else {
            return Err(err(format!("input {height}x{width} too small for kernel {k}")));
        };
        Ok(Geometry {
            batch,
            in_ch: channels,
            out_ch: self.out_channels(),
            in_h: height,
            in_w: width,
            out_h,
            out_w,
            kernel: k,
            stride: self.stride,
            padding: self.padding,
        })
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let g = self.geometry(x)?;
        let in_plane = g.in_h * g.in_w;
        let out_plane = g.out_h * g.out_w;
        let kk = g.kernel * g.kernel;
        let xd = x.data();
        let wd = self.weights.data();
        let mut out = vec![0.0; g.batch * g.out_ch * out_plane];
        out.par_chunks_mut(g.out_ch * out_plane).enumerate().for_each(|(b, sample)| {
            let xs = &xd[b * g.in_ch * in_plane..][..g.in_ch * in_plane];
            if g.is_unit() && self.kind != ConvKind::Depthwise {
                let xt = transpose(xs, g.in_ch, in_plane);
                for (n, o) in sample.chunks_mut(out_plane).enumerate() {
                    let w = &wd[n * g.in_ch..][..g.in_ch];
                    for (o, px) in o.iter_mut().zip(xt.chunks_exact(g.in_ch)) {
                        *o = dot(w, px);
                    }
                }
                return;
            }
            for (n, o) in sample.chunks_mut(out_plane).enumerate() {
                for m in self.connected_inputs(n, g.in_ch) {
                    let inp = &xs[m * in_plane..][..in_plane];
                    let w = &wd[self.filter_offset(n, m, g.in_ch, kk)..][..kk];
                    if g.is_unit() {
                        let wv = w[0];
                        for (o, &v) in o.iter_mut().zip(inp) {
                            *o += wv * v;
                        }
                    } else {
                        g.plane_forward(inp, w, o);
                    }
                }
            }
        });
        Tensor::new(&[g.batch, g.out_ch, g.out_h, g.out_w], out)
    }

    pub fn forward_train(&self, x: &Tensor) -> Result<(Tensor, ConvRecord)> {
        let y = self.forward(x)?;
        Ok((y, ConvRecord { input: x.clone() }))
    }

    /// Returns `(grad_input, grad_weights)`.
    pub fn backward(&self, record: &ConvRecord, grad_out: &Tensor) -> Result<(Tensor, Tensor)> {
        let x = &record.input;
        let g = self.geometry(x)?;
        let expected = [g.batch, g.out_ch, g.out_h, g.out_w];
        if grad_out.shape() != expected {
            return Err(Error::ShapeMismatch {
                op: "conv_backward",
                left: grad_out.shape().to_vec(),
                right: expected.to_vec(),
            });
        }
        let in_plane = g.in_h * g.in_w;
        let out_plane = g.out_h * g.out_w;
        let kk = g.kernel * g.kernel;
        let xd = x.data();
        let gd = grad_out.data();
        let wd = self.weights.data();

        let unit = g.is_unit() && self.kind != ConvKind::Depthwise;
        let wt = if unit { transpose(wd, g.out_ch, g.in_ch) } else { Vec::new() };
        let mut grad_x = Tensor::zeros_like(x);
        grad_x
            .data_mut()
            .par_chunks_mut(g.in_ch * in_plane)
            .enumerate()
            .for_each(|(b, gx)| {
                if unit {
                    let gt = transpose(&gd[b * g.out_ch * out_plane..][..g.out_ch * out_plane], g.out_ch, out_plane);
                    for (m, gi) in gx.chunks_mut(in_plane).enumerate() {
                        let w = &wt[m * g.out_ch..][..g.out_ch];
                        for (gi, gp) in gi.iter_mut().zip(gt.chunks_exact(g.out_ch)) {
                            *gi = dot(w, gp);
                        }
                    }
                    return;
                }
                for n in 0..g.out_ch {
                    let go = &gd[(b * g.out_ch + n) * out_plane..][..out_plane];
                    for m in self.connected_inputs(n, g.in_ch) {
                        let w = &wd[self.filter_offset(n, m, g.in_ch, kk)..][..kk];
                        let gi = &mut gx[m * in_plane..][..in_plane];
                        if g.is_unit() {
                            let wv = w[0];
                            for (gi, &go) in gi.iter_mut().zip(go) {
                                *gi += wv * go;
                            }
                        } else {
                            g.plane_backward_input(w, go, gi);
                        }
                    }
                }
            });

        // one chunk per output channel's filters; batch summed in order
        let filter_len = match self.kind {
            ConvKind::Depthwise => kk,
            _ => g.in_ch * kk,
        };
        let xt: Option<Vec<Vec<f64>>> = unit.then(|| {
            xd.par_chunks(g.in_ch * in_plane)
                .map(|xs| transpose(xs, g.in_ch, in_plane))
                .collect()
        });
        let mut grad_w = Tensor::zeros_like(&self.weights);
        grad_w
            .data_mut()
            .par_chunks_mut(filter_len)
            .enumerate()
            .for_each(|(n, gw_n)| {
                if let Some(xt) = &xt {
                    for (b, xt) in xt.iter().enumerate() {
                        let go = &gd[(b * g.out_ch + n) * out_plane..][..out_plane];
                        for (&gv, px) in go.iter().zip(xt.chunks_exact(g.in_ch)) {
                            for (gw, &v) in gw_n.iter_mut().zip(px) {
                                *gw += gv * v;
                            }
                        }
                    }
                    return;
                }
                for b in 0..g.batch {
                    let go = &gd[(b * g.out_ch + n) * out_plane..][..out_plane];
                    for m in self.connected_inputs(n, g.in_ch) {
                        let inp = &xd[(b * g.in_ch + m) * in_plane..][..in_plane];
                        let off = self.filter_offset(n, m, g.in_ch, kk) - n * filter_len;
                        let gw = &mut gw_n[off..][..kk];
                        if g.is_unit() {
                            gw[0] += go.iter().zip(inp).map(|(a, b)| a * b).sum::<f64>();
                        } else {
                            g.plane_backward_weights(inp, go, gw);
                        }
                    }
                }
            });
        Ok((grad_x, grad_w))
    }

    fn connected_inputs(&self, out_channel: usize, in_ch: usize) -> std::ops::Range<usize> {
        match self.kind {
            ConvKind::Depthwise => out_channel..out_channel + 1,
            _ => 0..in_ch,
        }
    }

    fn filter_offset(&self, n: usize, m: usize, in_ch: usize, kk: usize) -> usize {
        match self.kind {
            ConvKind::Depthwise => n * kk,
            _ => (n * in_ch + m) * kk,
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `[rows, cols]` row-major to `[cols, rows]`.
fn transpose(a: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    let mut t = vec![0.0; a.len()];
    for r in 0..rows {
        for c in 0..cols {
            t[c * rows + r] = a[r * cols + c];
        }
    }
    t
}

#[derive(Debug, Clone, Copy)]
struct Geometry {
    batch: usize,
    in_ch: usize,
    out_ch: usize,
    in_h: usize,
    in_w: usize,
    out_h: usize,
    out_w: usize,
    kernel: usize,
    stride: usize,
    padding: usize,
}

impl Geometry {
    /// Output indices `o` for which `o * stride + offset - padding` lands inside `0..input`.
    fn valid_range(&self, out_len: usize, in_len: usize, offset: usize) -> std::ops::Range<usize> {
        let s = self.stride;
        let lo = if self.padding > offset {
            (self.padding - offset).div_ceil(s)
        } else {
            0
        };
        let hi = if in_len + self.padding > offset {
            ((in_len - 1 + self.padding - offset) / s + 1).min(out_len)
        } else {
            0
        };
        lo..hi.max(lo)
    }

    fn plane_forward(&self, inp: &[f64], w: &[f64], out: &mut [f64]) {
        let k = self.kernel;
        for kh in 0..k {
            let rows = self.valid_range(self.out_h, self.in_h, kh);
            for kw in 0..k {
                let wv = w[kh * k + kw];
                let cols = self.valid_range(self.out_w, self.in_w, kw);
                for oy in rows.clone() {
                    let iy = oy * self.stride + kh - self.padding;
                    let in_row = &inp[iy * self.in_w..][..self.in_w];
                    let out_row = &mut out[oy * self.out_w..][..self.out_w];
                    if self.stride == 1 {
                        let src = &in_row[cols.start + kw - self.padding..cols.end + kw - self.padding];
                        for (o, &v) in out_row[cols.clone()].iter_mut().zip(src) {
                            *o += wv * v;
                        }
                    } else {
                        for ox in cols.clone() {
                            out_row[ox] += wv * in_row[ox * self.stride + kw - self.padding];
                        }
                    }
                }
            }
        }
    }

    /// 1x1 kernel, stride 1, no padding: output planes are weighted sums of input planes.
    fn is_unit(&self) -> bool {
        self.kernel == 1 && self.stride == 1 && self.padding == 0
    }

    fn plane_backward_input(&self, w: &[f64], grad_out: &[f64], grad_in: &mut [f64]) {
        let k = self.kernel;
        for kh in 0..k {
            let rows = self.valid_range(self.out_h, self.in_h, kh);
            for kw in 0..k {
                let wv = w[kh * k + kw];
                let cols = self.valid_range(self.out_w, self.in_w, kw);
                for oy in rows.clone() {
                    let iy = oy * self.stride + kh - self.padding;
                    let g_row = &grad_out[oy * self.out_w..][..self.out_w];
                    let gi_row = &mut grad_in[iy * self.in_w..][..self.in_w];
                    for ox in cols.clone() {
                        gi_row[ox * self.stride + kw - self.padding] += wv * g_row[ox];
                    }
                }
            }
        }
    }

    fn plane_backward_weights(&self, inp: &[f64], grad_out: &[f64], grad_w: &mut [f64]) {
        let k = self.kernel;
        for kh in 0..k {
            let rows = self.valid_range(self.out_h, self.in_h, kh);
            for kw in 0..k {
                let cols = self.valid_range(self.out_w, self.in_w, kw);
                let mut acc = 0.0;
                for oy in rows.clone() {
                    let iy = oy * self.stride + kh - self.padding;
                    let g_row = &grad_out[oy * self.out_w..][..self.out_w];
                    let in_row = &inp[iy * self.in_w..][..self.in_w];
                    for ox in cols.clone() {
                        acc += g_row[ox] * in_row[ox * self.stride + kw - self.padding];
                    }
                }
                grad_w[kh * k + kw] += acc;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
        Tensor::from_fn(shape, |_| rng.gen_range(-1.0..1.0)).unwrap()
    }

    /// Direct nested-loop convolution with explicit zero padding.
    fn oracle(x: &Tensor, w: &Tensor, depthwise: bool, stride: usize, pad: usize) -> Tensor {
        let [b, m, h, wd] = x.dims4().unwrap();
        let [n, _, k, _] = w.dims4().unwrap();
        let oh = (h + 2 * pad - k) / stride + 1;
        let ow = (wd + 2 * pad - k) / stride + 1;
        let mut out = Tensor::zeros(&[b, n, oh, ow]).unwrap();
        for bi in 0..b {
            for ni in 0..n {
                for oy in 0..oh {
                    for ox in 0..ow {
                        let mut s = 0.0;
                        for mi in 0..m {
                            if depthwise && mi != ni {
                                continue;
                            }
                            let wm = if depthwise { 0 } else { mi };
                            for ky in 0..k {
                                for kx in 0..k {
                                    let iy = (oy * stride + ky) as isize - pad as isize;
                                    let ix = (ox * stride + kx) as isize - pad as isize;
                                    if iy < 0 || ix < 0 || iy >= h as isize || ix >= wd as isize {
                                        continue;
                                    }
                                    let xv = x.data()[((bi * m + mi) * h + iy as usize) * wd + ix as usize];
                                    let wv = w.data()[((ni * w.shape()[1] + wm) * k + ky) * k + kx];
                                    s += xv * wv;
                                }
                            }
                        }
                        out.data_mut()[((bi * n + ni) * oh + oy) * ow + ox] = s;
                    }
                }
            }
        }
        out
    }

    #[test]
    fn standard_matches_nested_loop_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for stride in [1, 2] {
            let x = random(&[1, 3, 6, 6], &mut rng);
            let w = random(&[4, 3, 3, 3], &mut rng);
            let layer = ConvLayer::from_weights(ConvKind::Standard, w.clone(), stride, 1).unwrap();
            let got = layer.forward(&x).unwrap();
            let want = oracle(&x, &w, false, stride, 1);
            assert_eq!(got.shape(), want.shape());
            for (a, b) in got.data().iter().zip(want.data()) {
                assert!((a - b).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn depthwise_matches_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for stride in [1, 2] {
            let x = random(&[2, 3, 7, 7], &mut rng);
            let w = random(&[3, 1, 3, 3], &mut rng);
            let layer = ConvLayer::from_weights(ConvKind::Depthwise, w.clone(), stride, 1).unwrap();
            let got = layer.forward(&x).unwrap();
            let want = oracle(&x, &w, true, stride, 1);
            for (a, b) in got.data().iter().zip(want.data()) {
                assert!((a - b).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn depthwise_single_channel_equals_standard() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let x = random(&[1, 1, 5, 5], &mut rng);
        let w = random(&[1, 1, 3, 3], &mut rng);
        let dw = ConvLayer::from_weights(ConvKind::Depthwise, w.clone(), 1, 1).unwrap();
        let std = ConvLayer::from_weights(ConvKind::Standard, w, 1, 1).unwrap();
        assert_eq!(dw.forward(&x).unwrap(), std.forward(&x).unwrap());
    }

    #[test]
    fn pointwise_identity_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let x = random(&[2, 4, 3, 3], &mut rng);
        let w = Tensor::from_fn(&[4, 4, 1, 1], |i| if i / 4 == i % 4 { 1.0 } else { 0.0 }).unwrap();
        let pw = ConvLayer::from_weights(ConvKind::Pointwise, w, 1, 0).unwrap();
        assert_eq!(pw.forward(&x).unwrap(), x);
    }

    #[test]
    fn output_extent_follows_stride_and_padding() {
        assert_eq!(output_extent(224, 3, 2, 1), Some(112));
        assert_eq!(output_extent(112, 3, 1, 1), Some(112));
        assert_eq!(output_extent(7, 3, 2, 1), Some(4));
        assert_eq!(output_extent(7, 1, 1, 0), Some(7));
        assert_eq!(output_extent(1, 3, 1, 0), None);
    }

    #[test]
    fn stride_two_is_subsampled_stride_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        for kind in [ConvKind::Standard, ConvKind::Depthwise, ConvKind::Pointwise] {
            let (w, pad) = match kind {
                ConvKind::Standard => (random(&[2, 3, 3, 3], &mut rng), 1),
                ConvKind::Depthwise => (random(&[3, 1, 3, 3], &mut rng), 1),
                ConvKind::Pointwise => (random(&[2, 3, 1, 1], &mut rng), 0),
            };
            let x = random(&[2, 3, 8, 7], &mut rng);
            let s1 = ConvLayer::from_weights(kind, w.clone(), 1, pad).unwrap().forward(&x).unwrap();
            let s2 = ConvLayer::from_weights(kind, w, 2, pad).unwrap().forward(&x).unwrap();
            let [b, c, h1, w1] = s1.dims4().unwrap();
            let [_, _, h2, w2] = s2.dims4().unwrap();
            for bi in 0..b {
                for ci in 0..c {
                    for y in 0..h2 {
                        for xx in 0..w2 {
                            let a = s2.data()[((bi * c + ci) * h2 + y) * w2 + xx];
                            let e = s1.data()[((bi * c + ci) * h1 + 2 * y) * w1 + 2 * xx];
                            assert_eq!(a, e);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn zero_grad_out_gives_zero_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        let layer = ConvLayer::standard(3, 2, 3, 1, &mut rng).unwrap();
        let x = random(&[1, 3, 4, 4], &mut rng);
        let (y, rec) = layer.forward_train(&x).unwrap();
        let (gx, gw) = layer.backward(&rec, &Tensor::zeros_like(&y)).unwrap();
        assert!(gx.data().iter().all(|&v| v == 0.0));
        assert!(gw.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn depthwise_weight_grad_is_channel_local() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let layer = ConvLayer::depthwise(3, 3, 1, &mut rng).unwrap();
        let x = random(&[1, 3, 5, 5], &mut rng);
        let g = random(&[1, 3, 5, 5], &mut rng);
        let (_, rec) = layer.forward_train(&x).unwrap();
        let (_, gw) = layer.backward(&rec, &g).unwrap();
        let mut x2 = x.clone();
        // perturb channel 2 only
        for v in &mut x2.data_mut()[50..75] {
            *v += 0.37;
        }
        let (_, rec2) = layer.forward_train(&x2).unwrap();
        let (_, gw2) = layer.backward(&rec2, &g).unwrap();
        assert_eq!(&gw.data()[..18], &gw2.data()[..18]);
        assert_ne!(&gw.data()[18..], &gw2.data()[18..]);
    }

    #[test]
    fn rejects_bad_configurations() {
        let w = Tensor::zeros(&[2, 3, 3, 3]).unwrap();
        assert!(ConvLayer::from_weights(ConvKind::Pointwise, w.clone(), 1, 0).is_err());
        assert!(ConvLayer::from_weights(ConvKind::Standard, w.clone(), 3, 1).is_err());
        assert!(ConvLayer::from_weights(ConvKind::Depthwise, w.clone(), 1, 1).is_err());
        let layer = ConvLayer::from_weights(ConvKind::Standard, w, 1, 1).unwrap();
        let x = Tensor::zeros(&[1, 4, 5, 5]).unwrap();
        assert!(layer.forward(&x).is_err());
    }
}
