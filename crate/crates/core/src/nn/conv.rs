//! 1-D convolution and transposed convolution, computed one kernel tap at a
//! time as matrix products. Taps that only ever read zero padding are
//! skipped, which matters for long kernels on short sequences.

use alloc::vec;

use rand::Rng;

use super::gemm::{gemm, Mat, MatMut};
use super::tensor::{from_columns, to_columns};
use super::{Param, Tensor};
use crate::{Error, Result};

/// Range `[lo, hi]` of positions `i` in `0..count` with
/// `0 <= i * stride + tap - padding < limit`, or `None`.
fn tap_range(count: usize, limit: usize, stride: usize, tap: usize, padding: usize) -> Option<(usize, usize)> {
    let (tap, padding) = (tap as i64, padding as i64);
    let s = stride as i64;
    let lo = if padding > tap { (padding - tap + s - 1) / s } else { 0 };
    let top = limit as i64 - 1 + padding - tap;
    if top < 0 || count == 0 {
        return None;
    }
    let hi = (top / s).min(count as i64 - 1);
    (lo <= hi).then_some((lo as usize, hi as usize))
}

fn shape_err(expected: alloc::string::String, got: &[usize]) -> Error {
    Error::Shape { expected, got: alloc::format!("{:?}", got) }
}

/// Cross-correlation with zero padding; weight `(C_out, C_in, K)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv1d {
    pub weight: Param,
    pub bias: Param,
    pub stride: usize,
    pub padding: usize,
    cache: Option<Tensor>,
}

impl Conv1d {
    pub fn new<R: Rng>(c_in: usize, c_out: usize, kernel: usize, stride: usize, padding: usize, rng: &mut R) -> Self {
        Self {
            weight: Param::kaiming(&[c_out, c_in, kernel], c_in * kernel, rng),
            bias: Param::zeros(&[c_out]),
            stride,
            padding,
            cache: None,
        }
    }

    pub fn from_tensors(weight: Tensor, bias: Tensor, stride: usize, padding: usize) -> Result<Self> {
        let [c_out, _, _] = weight.shape()[..] else {
            return Err(shape_err("(C_out, C_in, K)".into(), weight.shape()));
        };
        if bias.shape() != [c_out] {
            return Err(shape_err(alloc::format!("[{c_out}]"), bias.shape()));
        }
        if stride == 0 {
            return Err(Error::InvalidArgument("stride must be positive".into()));
        }
        Ok(Self { weight: Param::new(weight), bias: Param::new(bias), stride, padding, cache: None })
    }

    pub fn c_in(&self) -> usize {
        self.weight.value.shape()[1]
    }

    pub fn c_out(&self) -> usize {
        self.weight.value.shape()[0]
    }

    pub fn kernel(&self) -> usize {
        self.weight.value.shape()[2]
    }

    pub fn out_len(&self, len: usize) -> Result<usize> {
        let padded = len + 2 * self.padding;
        if self.kernel() > padded {
            return Err(Error::Shape {
                expected: alloc::format!("length >= {} for kernel {}", self.kernel() as i64 - 2 * self.padding as i64, self.kernel()),
                got: alloc::format!("{len}"),
            });
        }
        Ok((padded - self.kernel()) / self.stride + 1)
    }

    fn check_input(&self, x: &Tensor) -> Result<(usize, usize, usize)> {
        let (b, c, l) = x.dims3()?;
        if c != self.c_in() {
            return Err(shape_err(alloc::format!("(B, {}, L)", self.c_in()), x.shape()));
        }
        Ok((b, l, self.out_len(l)?))
    }

    /// Input values read by tap `tap`, laid out `(C_in, B * L_out)`.
    fn gather(&self, x: &[f64], b: usize, l: usize, l_out: usize, tap: usize, range: (usize, usize), buf: &mut [f64]) {
        let c_in = self.c_in();
        let n = b * l_out;
        buf.fill(0.0);
        for ci in 0..c_in {
            for bi in 0..b {
                let src = &x[(bi * c_in + ci) * l..];
                let dst = &mut buf[ci * n + bi * l_out..];
                for o in range.0..=range.1 {
                    dst[o] = src[o * self.stride + tap - self.padding];
                }
            }
        }
    }

    pub fn infer(&self, x: &Tensor) -> Result<Tensor> {
        let (b, l, l_out) = self.check_input(x)?;
        let (c_in, c_out, k) = (self.c_in(), self.c_out(), self.kernel());
        let n = b * l_out;
        let mut ycol = vec![0.0; c_out * n];
        let mut buf = vec![0.0; c_in * n];
        let w = self.weight.value.data();
        for tap in 0..k {
            let Some(range) = tap_range(l_out, l, self.stride, tap, self.padding) else { continue };
            self.gather(x.data(), b, l, l_out, tap, range, &mut buf);
            gemm(
                c_out,
                c_in,
                n,
                1.0,
                Mat { data: w, offset: tap, rs: c_in * k, cs: k },
                Mat { data: &buf, offset: 0, rs: n, cs: 1 },
                1.0,
                MatMut { data: &mut ycol, offset: 0, rs: n, cs: 1 },
            );
        }
        for (co, row) in ycol.chunks_mut(n.max(1)).enumerate() {
            let bias = self.bias.value.data()[co];
            row.iter_mut().for_each(|v| *v += bias);
        }
        Tensor::new(&[b, c_out, l_out], from_columns(&ycol, b, c_out, l_out))
    }

    pub fn forward(&mut self, x: &Tensor) -> Result<Tensor> {
        let y = self.infer(x)?;
        self.cache = Some(x.clone());
        Ok(y)
    }

    /// Accumulates weight/bias gradients and returns the input gradient.
    pub fn backward(&mut self, dy: &Tensor) -> Tensor {
        let x = self.cache.as_ref().expect("Conv1d::backward before forward");
        let (b, _, l) = x.dims3().unwrap();
        let (c_in, c_out, k) = (self.c_in(), self.c_out(), self.kernel());
        let l_out = dy.shape()[2];
        let n = b * l_out;
        let dycol = to_columns(dy.data(), b, c_out, l_out);
        for (co, row) in dycol.chunks(n.max(1)).enumerate() {
            self.bias.grad.data_mut()[co] += row.iter().sum::<f64>();
        }
        let mut dx = vec![0.0; b * c_in * l];
        let mut buf = vec![0.0; c_in * n];
        let mut dbuf = vec![0.0; c_in * n];
        for tap in 0..k {
            let Some(range) = tap_range(l_out, l, self.stride, tap, self.padding) else { continue };
            self.gather(x.data(), b, l, l_out, tap, range, &mut buf);
            gemm(
                c_out,
                n,
                c_in,
                1.0,
                Mat { data: &dycol, offset: 0, rs: n, cs: 1 },
                Mat { data: &buf, offset: 0, rs: 1, cs: n },
                1.0,
                MatMut { data: self.weight.grad.data_mut(), offset: tap, rs: c_in * k, cs: k },
            );
            gemm(
                c_in,
                c_out,
                n,
                1.0,
                Mat { data: self.weight.value.data(), offset: tap, rs: k, cs: c_in * k },
                Mat { data: &dycol, offset: 0, rs: n, cs: 1 },
                0.0,
                MatMut { data: &mut dbuf, offset: 0, rs: n, cs: 1 },
            );
            for ci in 0..c_in {
                for bi in 0..b {
                    let src = &dbuf[ci * n + bi * l_out..];
                    let dst = &mut dx[(bi * c_in + ci) * l..];
                    for o in range.0..=range.1 {
                        dst[o * self.stride + tap - self.padding] += src[o];
                    }
                }
            }
        }
        Tensor::new(&[b, c_in, l], dx).unwrap()
    }

    pub fn params(&self) -> [&Param; 2] {
        [&self.weight, &self.bias]
    }

    pub fn params_mut(&mut self) -> [&mut Param; 2] {
        [&mut self.weight, &mut self.bias]
    }
}

/// Transposed convolution (the adjoint of [`Conv1d`] with the same weight
/// array); weight `(C_in, C_out, K)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvTranspose1d {
    pub weight: Param,
    pub bias: Param,
    pub stride: usize,
    pub padding: usize,
    pub output_padding: usize,
    cache: Option<Tensor>,
}

impl ConvTranspose1d {
    pub fn new<R: Rng>(
        c_in: usize,
        c_out: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
        output_padding: usize,
        rng: &mut R,
    ) -> Self {
        Self {
            weight: Param::kaiming(&[c_in, c_out, kernel], c_in * kernel, rng),
            bias: Param::zeros(&[c_out]),
            stride,
            padding,
            output_padding,
            cache: None,
        }
    }

    pub fn from_tensors(weight: Tensor, bias: Tensor, stride: usize, padding: usize, output_padding: usize) -> Result<Self> {
        let [_, c_out, _] = weight.shape()[..] else {
            return Err(shape_err("(C_in, C_out, K)".into(), weight.shape()));
        };
        if bias.shape() != [c_out] {
            return Err(shape_err(alloc::format!("[{c_out}]"), bias.shape()));
        }
        if stride == 0 || output_padding >= stride {
            return Err(Error::InvalidArgument(alloc::format!(
                "need stride > output_padding, got stride {stride}, output_padding {output_padding}"
            )));
        }
        Ok(Self { weight: Param::new(weight), bias: Param::new(bias), stride, padding, output_padding, cache: None })
    }

    pub fn c_in(&self) -> usize {
        self.weight.value.shape()[0]
    }

    pub fn c_out(&self) -> usize {
        self.weight.value.shape()[1]
    }

    pub fn kernel(&self) -> usize {
        self.weight.value.shape()[2]
    }

    pub fn out_len(&self, len: usize) -> Result<usize> {
        let full = (len.max(1) - 1) * self.stride + self.kernel() + self.output_padding;
        if len == 0 || full <= 2 * self.padding {
            return Err(Error::Shape { expected: "longer input".into(), got: alloc::format!("{len}") });
        }
        Ok(full - 2 * self.padding)
    }

    fn check_input(&self, x: &Tensor) -> Result<(usize, usize, usize)> {
        let (b, c, l) = x.dims3()?;
        if c != self.c_in() {
            return Err(shape_err(alloc::format!("(B, {}, L)", self.c_in()), x.shape()));
        }
        Ok((b, l, self.out_len(l)?))
    }

    pub fn infer(&self, x: &Tensor) -> Result<Tensor> {
        let (b, l, l_out) = self.check_input(x)?;
        let (c_in, c_out, k) = (self.c_in(), self.c_out(), self.kernel());
        let n = b * l;
        let xcol = to_columns(x.data(), b, c_in, l);
        let mut y = vec![0.0; b * c_out * l_out];
        let mut z = vec![0.0; c_out * n];
        let w = self.weight.value.data();
        for tap in 0..k {
            let Some(range) = tap_range(l, l_out, self.stride, tap, self.padding) else { continue };
            gemm(
                c_out,
                c_in,
                n,
                1.0,
                Mat { data: w, offset: tap, rs: k, cs: c_out * k },
                Mat { data: &xcol, offset: 0, rs: n, cs: 1 },
                0.0,
                MatMut { data: &mut z, offset: 0, rs: n, cs: 1 },
            );
            for co in 0..c_out {
                for bi in 0..b {
                    let src = &z[co * n + bi * l..];
                    let dst = &mut y[(bi * c_out + co) * l_out..];
                    for i in range.0..=range.1 {
                        dst[i * self.stride + tap - self.padding] += src[i];
                    }
                }
            }
        }
        for bi in 0..b {
            for co in 0..c_out {
                let bias = self.bias.value.data()[co];
                y[(bi * c_out + co) * l_out..(bi * c_out + co + 1) * l_out].iter_mut().for_each(|v| *v += bias);
            }
        }
        Tensor::new(&[b, c_out, l_out], y)
    }

    pub fn forward(&mut self, x: &Tensor) -> Result<Tensor> {
        let y = self.infer(x)?;
        self.cache = Some(x.clone());
        Ok(y)
    }

    pub fn backward(&mut self, dy: &Tensor) -> Tensor {
        let x = self.cache.as_ref().expect("ConvTranspose1d::backward before forward");
        let (b, _, l) = x.dims3().unwrap();
        let (c_in, c_out, k) = (self.c_in(), self.c_out(), self.kernel());
        let l_out = dy.shape()[2];
        let n = b * l;
        for bi in 0..b {
            for co in 0..c_out {
                let s: f64 = dy.data()[(bi * c_out + co) * l_out..(bi * c_out + co + 1) * l_out].iter().sum();
                self.bias.grad.data_mut()[co] += s;
            }
        }
        let xcol = to_columns(x.data(), b, c_in, l);
        let mut dxcol = vec![0.0; c_in * n];
        let mut g = vec![0.0; c_out * n];
        for tap in 0..k {
            let Some(range) = tap_range(l, l_out, self.stride, tap, self.padding) else { continue };
            g.fill(0.0);
            for co in 0..c_out {
                for bi in 0..b {
                    let src = &dy.data()[(bi * c_out + co) * l_out..];
                    let dst = &mut g[co * n + bi * l..];
                    for i in range.0..=range.1 {
                        dst[i] = src[i * self.stride + tap - self.padding];
                    }
                }
            }
            gemm(
                c_in,
                c_out,
                n,
                1.0,
                Mat { data: self.weight.value.data(), offset: tap, rs: c_out * k, cs: k },
                Mat { data: &g, offset: 0, rs: n, cs: 1 },
                1.0,
                MatMut { data: &mut dxcol, offset: 0, rs: n, cs: 1 },
            );
            gemm(
                c_in,
                n,
                c_out,
                1.0,
                Mat { data: &xcol, offset: 0, rs: n, cs: 1 },
                Mat { data: &g, offset: 0, rs: 1, cs: n },
                1.0,
                MatMut { data: self.weight.grad.data_mut(), offset: tap, rs: c_out * k, cs: k },
            );
        }
        Tensor::new(&[b, c_in, l], from_columns(&dxcol, b, c_in, l)).unwrap()
    }

    pub fn params(&self) -> [&Param; 2] {
        [&self.weight, &self.bias]
    }

    pub fn params_mut(&mut self) -> [&mut Param; 2] {
        [&mut self.weight, &mut self.bias]
    }
}

/// Output padding that makes a transposed convolution invert the length
/// change of a convolution with the same kernel/stride/padding.
pub fn mirror_output_padding(conv_in_len: usize, kernel: usize, stride: usize, padding: usize) -> usize {
    let conv_out = (conv_in_len + 2 * padding - kernel) / stride + 1;
    conv_in_len + 2 * padding - ((conv_out - 1) * stride + kernel)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use rand::Rng;

    fn random(shape: &[usize], rng: &mut crate::rng::Rng) -> Tensor {
        let n = shape.iter().product();
        Tensor::new(shape, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
    }

    /// Direct summation of the convolution definition.
    fn conv_oracle(x: &Tensor, w: &Tensor, bias: &[f64], stride: usize, pad: usize) -> Tensor {
        let (b, c_in, l) = x.dims3().unwrap();
        let (c_out, k) = (w.shape()[0], w.shape()[2]);
        let l_out = (l + 2 * pad - k) / stride + 1;
        let mut y = Tensor::zeros(&[b, c_out, l_out]);
        for bi in 0..b {
            for co in 0..c_out {
                for o in 0..l_out {
                    let mut s = bias[co];
                    for ci in 0..c_in {
                        for j in 0..k {
                            let idx = (o * stride + j) as i64 - pad as i64;
                            if idx >= 0 && (idx as usize) < l {
                                s += w.data()[(co * c_in + ci) * k + j] * x.data()[(bi * c_in + ci) * l + idx as usize];
                            }
                        }
                    }
                    y.data_mut()[(bi * c_out + co) * l_out + o] = s;
                }
            }
        }
        y
    }

    #[test]
    fn unit_kernel_is_identity() {
        let mut rng = seeded(1, 0);
        let x = random(&[2, 1, 9], &mut rng);
        let conv = Conv1d::from_tensors(Tensor::filled(&[1, 1, 1], 1.0), Tensor::zeros(&[1]), 1, 0).unwrap();
        assert_eq!(conv.infer(&x).unwrap(), x);
        let convt = ConvTranspose1d::from_tensors(Tensor::filled(&[1, 1, 1], 1.0), Tensor::zeros(&[1]), 1, 0, 0).unwrap();
        assert_eq!(convt.infer(&x).unwrap(), x);
    }

    #[test]
    fn length_formulas() {
        let mut rng = seeded(1, 0);
        let conv = Conv1d::new(1, 1, 3, 2, 1, &mut rng);
        assert_eq!(conv.out_len(128).unwrap(), 64);
        let convt = ConvTranspose1d::new(1, 1, 3, 2, 1, 1, &mut rng);
        assert_eq!(convt.out_len(64).unwrap(), 128);
        assert_eq!(mirror_output_padding(128, 3, 2, 1), 1);
        let big = Conv1d::new(1, 1, 9, 1, 0, &mut rng);
        assert!(big.out_len(4).is_err());
    }

    #[test]
    fn matches_direct_summation() {
        let mut rng = seeded(2, 0);
        for (stride, pad, k) in [(1, 0, 3), (2, 1, 3), (1, 7, 15), (2, 1, 4), (3, 2, 5)] {
            let x = random(&[2, 3, 10], &mut rng);
            let w = random(&[4, 3, k], &mut rng);
            let bias = random(&[4], &mut rng);
            let conv = Conv1d::from_tensors(w.clone(), bias.clone(), stride, pad).unwrap();
            let got = conv.infer(&x).unwrap();
            let want = conv_oracle(&x, &w, bias.data(), stride, pad);
            assert_eq!(got.shape(), want.shape());
            for (a, b) in got.data().iter().zip(want.data()) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn transpose_is_adjoint() {
        let mut rng = seeded(3, 0);
        for _ in 0..20 {
            let (c_in, c_out) = (rng.random_range(1..5), rng.random_range(1..5));
            let k = rng.random_range(1..6);
            let stride = rng.random_range(1..4);
            let pad = rng.random_range(0..k);
            let l = rng.random_range(k.max(2 * pad + 1)..20);
            let conv = Conv1d::from_tensors(random(&[c_out, c_in, k], &mut rng), Tensor::zeros(&[c_out]), stride, pad).unwrap();
            let Ok(l_out) = conv.out_len(l) else { continue };
            let op = mirror_output_padding(l, k, stride, pad);
            let convt = ConvTranspose1d::from_tensors(conv.weight.value.clone(), Tensor::zeros(&[c_in]), stride, pad, op).unwrap();
            let x = random(&[2, c_in, l], &mut rng);
            let y = random(&[2, c_out, l_out], &mut rng);
            let lhs = conv.infer(&x).unwrap().dot(&y);
            let back = convt.infer(&y).unwrap();
            assert_eq!(back.shape(), x.shape());
            assert!((lhs - x.dot(&back)).abs() < 1e-10);
        }
    }

    #[test]
    fn rejects_wrong_channels() {
        let mut rng = seeded(4, 0);
        let conv = Conv1d::new(3, 4, 3, 1, 1, &mut rng);
        assert!(matches!(conv.infer(&Tensor::zeros(&[1, 2, 8])), Err(Error::Shape { .. })));
        let convt = ConvTranspose1d::new(3, 4, 3, 2, 1, 1, &mut rng);
        assert!(convt.infer(&Tensor::zeros(&[1, 4, 8])).is_err());
    }
}
