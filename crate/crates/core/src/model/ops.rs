//! Layer primitives and their vector-Jacobian products.

use super::config::Activator;
use super::tensor::{gemm, Scalar, Tensor};
use super::weights::ConvLayer;
use crate::{Error, Result};

const LEAKY_SLOPE: f64 = 0.01;
const SELU_LAMBDA: f64 = 1.050_700_987_355_480_5;
const SELU_ALPHA: f64 = 1.673_263_242_354_377_3;

/// Unfolds 3x3 zero-padded neighbourhoods into a `(c * 9) x (h * w)` matrix.
fn im2col<T: Scalar>(x: &Tensor<T>) -> Vec<T> {
    let (h, w, c) = x.shape();
    let hw = h * w;
    let mut cols = vec![T::zero(); c * 9 * hw];
    for ci in 0..c {
        let plane = x.plane(ci);
        for ky in 0..3 {
            for kx in 0..3 {
                let row = &mut cols[(ci * 9 + ky * 3 + kx) * hw..][..hw];
                let (dy, dx) = (ky as isize - 1, kx as isize - 1);
                let x0 = (-dx).max(0) as usize;
                let x1 = (w as isize - dx).min(w as isize).max(0) as usize;
                if x0 >= x1 {
                    continue;
                }
                for y in 0..h {
                    let sy = y as isize + dy;
                    if sy < 0 || sy >= h as isize {
                        continue;
                    }
                    let src = sy as usize * w;
                    row[y * w + x0..y * w + x1]
                        .copy_from_slice(&plane[(src as isize + x0 as isize + dx) as usize..][..x1 - x0]);
                }
            }
        }
    }
    cols
}

/// Adjoint of [`im2col`]: scatters column gradients back onto the input grid.
fn col2im<T: Scalar>(cols: &[T], h: usize, w: usize, c: usize) -> Tensor<T> {
    let hw = h * w;
    let mut out = vec![T::zero(); c * hw];
    for ci in 0..c {
        let plane = &mut out[ci * hw..(ci + 1) * hw];
        for ky in 0..3 {
            for kx in 0..3 {
                let row = &cols[(ci * 9 + ky * 3 + kx) * hw..][..hw];
                let (dy, dx) = (ky as isize - 1, kx as isize - 1);
                let x0 = (-dx).max(0) as usize;
                let x1 = (w as isize - dx).min(w as isize).max(0) as usize;
                if x0 >= x1 {
                    continue;
                }
                for y in 0..h {
                    let sy = y as isize + dy;
                    if sy < 0 || sy >= h as isize {
                        continue;
                    }
                    let dst = &mut plane[sy as usize * w + (x0 as isize + dx) as usize..][..x1 - x0];
                    for (d, s) in dst.iter_mut().zip(&row[y * w + x0..y * w + x1]) {
                        *d += *s;
                    }
                }
            }
        }
    }
    Tensor::new(h, w, c, out).expect("shape is consistent")
}

fn check_conv<T: Scalar>(x: &Tensor<T>, layer: &ConvLayer<T>) -> Result<()> {
    if x.channels() != layer.c_in {
        return Err(Error::invalid(format!(
            "convolution expects {} input channels, got {}",
            layer.c_in,
            x.channels()
        )));
    }
    if layer.ksize != 1 && layer.ksize != 3 {
        return Err(Error::invalid(format!("unsupported kernel size {}", layer.ksize)));
    }
    if layer.kernel.len() != layer.c_out * layer.c_in * layer.ksize * layer.ksize || layer.bias.len() != layer.c_out {
        return Err(Error::invalid("kernel or bias length does not match the layer shape"));
    }
    Ok(())
}

/// Same-size convolution (3x3 with zero padding 1, or 1x1) plus bias.
pub fn conv2d<T: Scalar>(x: &Tensor<T>, layer: &ConvLayer<T>) -> Result<Tensor<T>> {
    check_conv(x, layer)?;
    let (h, w, _) = x.shape();
    let hw = h * w;
    let mut out = vec![T::zero(); layer.c_out * hw];
    for (o, &b) in layer.bias.iter().enumerate() {
        out[o * hw..(o + 1) * hw].fill(b);
    }
    let k = layer.c_in * layer.ksize * layer.ksize;
    if layer.ksize == 1 {
        gemm(layer.c_out, k, hw, &layer.kernel, false, x.data(), false, T::one(), &mut out);
    } else {
        let cols = im2col(x);
        gemm(layer.c_out, k, hw, &layer.kernel, false, &cols, false, T::one(), &mut out);
    }
    Tensor::new(h, w, layer.c_out, out)
}

/// Accumulates kernel and bias gradients of [`conv2d`] into `grad` and, when
/// requested, returns the gradient with respect to the input.
pub(crate) fn conv2d_backward<T: Scalar>(
    x: &Tensor<T>,
    layer: &ConvLayer<T>,
    dout: &Tensor<T>,
    grad: &mut ConvLayer<T>,
    need_input_grad: bool,
) -> Option<Tensor<T>> {
    let (h, w, c) = x.shape();
    let hw = h * w;
    let k = layer.c_in * layer.ksize * layer.ksize;
    let d = dout.data();
    for (o, gb) in grad.bias.iter_mut().enumerate() {
        *gb += d[o * hw..(o + 1) * hw].iter().copied().sum::<T>();
    }
    if layer.ksize == 1 {
        gemm(layer.c_out, hw, k, d, false, x.data(), true, T::one(), &mut grad.kernel);
        need_input_grad.then(|| {
            let mut dx = vec![T::zero(); k * hw];
            gemm(k, layer.c_out, hw, &layer.kernel, true, d, false, T::zero(), &mut dx);
            Tensor::new(h, w, c, dx).expect("shape is consistent")
        })
    } else {
        let cols = im2col(x);
        gemm(layer.c_out, hw, k, d, false, &cols, true, T::one(), &mut grad.kernel);
        need_input_grad.then(|| {
            let mut dcols = cols;
            gemm(k, layer.c_out, hw, &layer.kernel, true, d, false, T::zero(), &mut dcols);
            col2im(&dcols, h, w, c)
        })
    }
}

#[inline]
fn act_value<T: Scalar>(kind: Activator, z: T, slope: T) -> T {
    match kind {
        Activator::PReLU => {
            if z > T::zero() {
                z
            } else {
                slope * z
            }
        }
        Activator::ReLU => z.max(T::zero()),
        Activator::LeakyReLU => {
            if z > T::zero() {
                z
            } else {
                T::lit(LEAKY_SLOPE) * z
            }
        }
        Activator::Sigmoid => T::one() / (T::one() + (-z).exp()),
        Activator::Tanh => z.tanh(),
        Activator::SELU => {
            if z > T::zero() {
                T::lit(SELU_LAMBDA) * z
            } else {
                T::lit(SELU_LAMBDA * SELU_ALPHA) * z.exp_m1()
            }
        }
    }
}

/// `(dy/dz, dy/dslope)` at pre-activation `z`.
#[inline]
fn act_derivative<T: Scalar>(kind: Activator, z: T, slope: T) -> (T, T) {
    let positive = z > T::zero();
    match kind {
        Activator::PReLU => {
            if positive {
                (T::one(), T::zero())
            } else {
                (slope, z)
            }
        }
        Activator::ReLU => (if positive { T::one() } else { T::zero() }, T::zero()),
        Activator::LeakyReLU => (if positive { T::one() } else { T::lit(LEAKY_SLOPE) }, T::zero()),
        Activator::Sigmoid => {
            let s = T::one() / (T::one() + (-z).exp());
            (s * (T::one() - s), T::zero())
        }
        Activator::Tanh => {
            let t = z.tanh();
            (T::one() - t * t, T::zero())
        }
        Activator::SELU => {
            if positive {
                (T::lit(SELU_LAMBDA), T::zero())
            } else {
                (T::lit(SELU_LAMBDA * SELU_ALPHA) * z.exp(), T::zero())
            }
        }
    }
}

fn check_slope<T: Scalar>(x: &Tensor<T>, kind: Activator, slope: &[T]) -> Result<()> {
    if kind.has_slope() && slope.len() != x.channels() {
        return Err(Error::invalid(format!(
            "PReLU needs {} slopes, got {}",
            x.channels(),
            slope.len()
        )));
    }
    Ok(())
}

/// Elementwise activation; `slope` holds per-channel PReLU slopes and is
/// ignored by the other activators.
pub fn activate<T: Scalar>(x: &Tensor<T>, kind: Activator, slope: &[T]) -> Result<Tensor<T>> {
    check_slope(x, kind, slope)?;
    let n = x.plane_len();
    let data = x
        .data()
        .iter()
        .enumerate()
        .map(|(i, &z)| act_value(kind, z, if kind.has_slope() { slope[i / n] } else { T::zero() }))
        .collect();
    Tensor::new(x.height(), x.width(), x.channels(), data)
}

/// Gradient through [`activate`]: returns `dL/dz` and accumulates
/// `dL/dslope` into `slope_grad` for PReLU.
pub(crate) fn activate_backward<T: Scalar>(
    z: &Tensor<T>,
    kind: Activator,
    slope: &[T],
    dy: &Tensor<T>,
    slope_grad: &mut [T],
) -> Tensor<T> {
    let n = z.plane_len();
    let mut dz = Vec::with_capacity(z.data().len());
    for c in 0..z.channels() {
        let s = if kind.has_slope() { slope[c] } else { T::zero() };
        let mut acc = T::zero();
        for (&zv, &g) in z.plane(c).iter().zip(dy.plane(c)) {
            let (dv, ds) = act_derivative(kind, zv, s);
            dz.push(dv * g);
            acc += ds * g;
        }
        if kind.has_slope() {
            slope_grad[c] += acc;
        }
    }
    debug_assert_eq!(dz.len(), n * z.channels());
    Tensor::new(z.height(), z.width(), z.channels(), dz).expect("shape is consistent")
}

/// Sub-pixel rearrangement: channel `o * s^2 + r * s + q` at `(i, j)` moves to
/// output channel `o` at `(s * i + r, s * j + q)`.
pub fn depth_to_space<T: Scalar>(x: &Tensor<T>, s: usize) -> Result<Tensor<T>> {
    let (h, w, c) = x.shape();
    if s == 0 || c % (s * s) != 0 {
        return Err(Error::invalid(format!("{c} channels not divisible by {s}^2")));
    }
    let oc = c / (s * s);
    let (oh, ow) = (h * s, w * s);
    let mut out = vec![T::zero(); oh * ow * oc];
    for o in 0..oc {
        for r in 0..s {
            for q in 0..s {
                let src = x.plane(o * s * s + r * s + q);
                for i in 0..h {
                    let dst_row = (o * oh + s * i + r) * ow;
                    for j in 0..w {
                        out[dst_row + s * j + q] = src[i * w + j];
                    }
                }
            }
        }
    }
    Tensor::new(oh, ow, oc, out)
}

/// Inverse of [`depth_to_space`].
pub fn space_to_depth<T: Scalar>(x: &Tensor<T>, s: usize) -> Result<Tensor<T>> {
    let (h, w, c) = x.shape();
    if s == 0 || h % s != 0 || w % s != 0 {
        return Err(Error::invalid(format!("{h}x{w} not divisible by {s}")));
    }
    let (ih, iw) = (h / s, w / s);
    let mut out = Vec::with_capacity(h * w * c);
    for o in 0..c {
        let plane = x.plane(o);
        for r in 0..s {
            for q in 0..s {
                for i in 0..ih {
                    for j in 0..iw {
                        out.push(plane[(s * i + r) * w + s * j + q]);
                    }
                }
            }
        }
    }
    Tensor::new(ih, iw, c * s * s, out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn layer(c_in: usize, c_out: usize, ksize: usize, kernel: Vec<f64>, bias: Vec<f64>) -> ConvLayer<f64> {
        ConvLayer {
            c_in,
            c_out,
            ksize,
            kernel,
            bias,
            slope: vec![],
        }
    }

    #[test]
    fn delta_kernel_is_identity() {
        let x = Tensor::<f64>::from_fn(5, 4, 2, |y, x, c| (y * 7 + x * 3 + c) as f64 * 0.1);
        let mut kernel = vec![0.0; 2 * 2 * 9];
        kernel[4] = 1.0; // out 0 <- in 0 centre
        kernel[(2 + 1) * 9 + 4] = 1.0; // out 1 <- in 1 centre
        let out = conv2d(&x, &layer(2, 2, 3, kernel, vec![0.0; 2])).unwrap();
        assert_eq!(out, x);
    }

    #[test]
    fn pointwise_backward_of_sum_is_input_sum() {
        let x = Tensor::<f64>::from_fn(3, 5, 1, |y, x, _| 0.3 * y as f64 - 0.17 * x as f64 + 0.05);
        let conv = layer(1, 1, 1, vec![1.7], vec![0.0]);
        let mut grad = layer(1, 1, 1, vec![0.0], vec![0.0]);
        let ones = Tensor::from_fn(3, 5, 1, |_, _, _| 1.0);
        let dx = conv2d_backward(&x, &conv, &ones, &mut grad, true).unwrap();
        let sum: f64 = x.data().iter().sum();
        assert!((grad.kernel[0] - sum).abs() < 1e-12);
        assert_eq!(grad.bias[0], 15.0);
        assert!(dx.data().iter().all(|&v| v == 1.7));
    }

    #[test]
    fn conv_backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = Tensor::<f64>::from_fn(4, 5, 2, |_, _, _| rng.random_range(-1.0..1.0));
        let dout = Tensor::<f64>::from_fn(4, 5, 3, |_, _, _| rng.random_range(-1.0..1.0));
        let kernel: Vec<f64> = (0..3 * 2 * 9).map(|_| rng.random_range(-1.0..1.0)).collect();
        let conv = layer(2, 3, 3, kernel, vec![0.1, -0.2, 0.3]);
        let mut grad = layer(2, 3, 3, vec![0.0; 54], vec![0.0; 3]);
        let dx = conv2d_backward(&x, &conv, &dout, &mut grad, true).unwrap();
        // The objective is linear in each argument, so differences are exact
        // up to rounding.
        let objective = |x: &Tensor<f64>, c: &ConvLayer<f64>| -> f64 {
            conv2d(x, c).unwrap().data().iter().zip(dout.data()).map(|(a, b)| a * b).sum()
        };
        let h = 1e-3;
        for i in 0..54 {
            let (mut p, mut m) = (conv.clone(), conv.clone());
            p.kernel[i] += h;
            m.kernel[i] -= h;
            let fd = (objective(&x, &p) - objective(&x, &m)) / (2.0 * h);
            assert!((fd - grad.kernel[i]).abs() < 1e-9);
        }
        for i in 0..x.data().len() {
            let (mut p, mut m) = (x.clone(), x.clone());
            p.data_mut()[i] += h;
            m.data_mut()[i] -= h;
            let fd = (objective(&p, &conv) - objective(&m, &conv)) / (2.0 * h);
            assert!((fd - dx.data()[i]).abs() < 1e-9);
        }
    }

    #[test]
    fn pointwise_channel_sum() {
        let x = Tensor::<f64>::from_fn(3, 3, 2, |_, _, c| if c == 0 { 0.25 } else { 0.5 });
        let out = conv2d(&x, &layer(2, 1, 1, vec![1.0, 1.0], vec![0.0])).unwrap();
        assert!(out.data().iter().all(|&v| v == 0.75));
    }

    #[test]
    fn channel_mismatch_is_rejected() {
        let x = Tensor::<f64>::zeros(3, 3, 2);
        assert!(conv2d(&x, &layer(3, 1, 1, vec![0.0; 3], vec![0.0])).is_err());
    }

    #[test]
    fn activators_at_known_points() {
        let x = Tensor::<f64>::new(1, 1, 1, vec![-3.0]).unwrap();
        assert_eq!(activate(&x, Activator::PReLU, &[0.0]).unwrap().data(), &[0.0]);
        let x = Tensor::<f64>::new(1, 1, 1, vec![-4.0]).unwrap();
        assert_eq!(activate(&x, Activator::PReLU, &[0.25]).unwrap().data(), &[-1.0]);
        let x = Tensor::<f64>::new(1, 1, 1, vec![0.0]).unwrap();
        assert_eq!(activate(&x, Activator::Sigmoid, &[]).unwrap().data(), &[0.5]);
        assert!(activate(&x, Activator::PReLU, &[]).is_err());
    }

    #[test]
    fn activator_derivatives_match_finite_differences() {
        let h: f64 = 1e-6;
        for kind in [
            Activator::PReLU,
            Activator::ReLU,
            Activator::LeakyReLU,
            Activator::Sigmoid,
            Activator::Tanh,
            Activator::SELU,
        ] {
            for z in [-1.7f64, -0.3, 0.4, 2.2] {
                let (d, ds) = act_derivative(kind, z, 0.3);
                let fd = (act_value(kind, z + h, 0.3) - act_value(kind, z - h, 0.3)) / (2.0 * h);
                assert!((d - fd).abs() < 1e-6, "{kind:?} at {z}: {d} vs {fd}");
                if kind == Activator::PReLU {
                    let fds = (act_value(kind, z, 0.3 + h) - act_value(kind, z, 0.3 - h)) / (2.0 * h);
                    assert!((ds - fds).abs() < 1e-6);
                }
            }
        }
    }

    #[test]
    fn shuffle_ordering() {
        let x = Tensor::<f64>::new(1, 1, 4, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let y = depth_to_space(&x, 2).unwrap();
        assert_eq!(y.shape(), (2, 2, 1));
        assert_eq!(y.data(), &[1.0, 2.0, 3.0, 4.0]);
        assert!(depth_to_space(&Tensor::<f64>::zeros(1, 1, 6), 2).is_err());

        let c = Tensor::<f64>::from_fn(3, 2, 8, |_, _, c| if c < 4 { 0.5 } else { 0.25 });
        let y = depth_to_space(&c, 2).unwrap();
        assert!(y.plane(0).iter().all(|&v| v == 0.5));
        assert!(y.plane(1).iter().all(|&v| v == 0.25));
    }

    #[test]
    fn shuffle_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = Tensor::<f64>::from_fn(4, 6, 16, |_, _, _| rng.random());
        let back = space_to_depth(&depth_to_space(&x, 4).unwrap(), 4).unwrap();
        assert_eq!(back, x);
    }
}
