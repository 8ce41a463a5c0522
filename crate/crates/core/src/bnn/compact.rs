//! Single-precision inference copy of a network, used for cheap task evaluation.
//!
//! Weights are rounded to `f32` and stored row-major so each unit is one
//! contiguous dot product; `tanh` uses a rational approximation that
//! vectorizes. Outputs agree with the `f64` network to about 1e-6 relative.

use super::network::{softplus, NetArchitecture};

const LANES: usize = 16;

#[derive(Clone, Debug)]
struct Layer {
    inp: usize,
    out: usize,
    /// Row-major `out × inp`, rows padded to a multiple of `LANES`.
    w: Vec<f32>,
    stride: usize,
    b: Vec<f32>,
}

#[derive(Clone, Debug)]
pub struct CompactNet {
    layers: Vec<Layer>,
    noise_variance: f64,
    width: usize,
}

fn padded(n: usize) -> usize {
    n.div_ceil(LANES) * LANES
}

/// Rational approximation of `tanh` accurate to a few float ulps.
#[inline(always)]
pub fn tanh_f32(x: f32) -> f32 {
    const CLAMP: f32 = 7.905_311;
    let x = x.clamp(-CLAMP, CLAMP);
    let x2 = x * x;
    let mut p = -2.760_768_5e-16_f32;
    p = p * x2 + 2.000_187_9e-13;
    p = p * x2 - 8.604_671_5e-11;
    p = p * x2 + 5.122_297e-8;
    p = p * x2 + 1.485_722_4e-5;
    p = p * x2 + 6.372_619_3e-4;
    p = p * x2 + 4.893_524_6e-3;
    p *= x;
    let mut q = 1.198_258_4e-6_f32;
    q = q * x2 + 1.185_347_1e-4;
    q = q * x2 + 2.268_434_6e-3;
    q = q * x2 + 4.893_525_2e-3;
    p / q
}

#[inline(always)]
fn dot(a: &[f32], b: &[f32]) -> f32 {
    let mut acc = [0.0f32; LANES];
    for (ca, cb) in a.chunks_exact(LANES).zip(b.chunks_exact(LANES)) {
        for k in 0..LANES {
            acc[k] += ca[k] * cb[k];
        }
    }
    acc.iter().sum()
}

impl CompactNet {
    pub fn new(arch: &NetArchitecture, theta: &[f64]) -> Self {
        assert_eq!(theta.len(), arch.num_params());
        let mut o = 0;
        let mut layers = Vec::new();
        for (inp, out) in arch.layers() {
            let stride = padded(inp);
            let mut w = vec![0.0f32; out * stride];
            for c in 0..inp {
                for r in 0..out {
                    w[r * stride + c] = theta[o + c * out + r] as f32;
                }
            }
            o += inp * out;
            let b = theta[o..o + out].iter().map(|v| *v as f32).collect();
            o += out;
            layers.push(Layer {
                inp,
                out,
                w,
                stride,
                b,
            });
        }
        let width = layers.iter().map(|l| l.stride.max(padded(l.out))).max().unwrap_or(LANES);
        CompactNet {
            layers,
            noise_variance: softplus(theta[o]),
            width,
        }
    }

    pub fn noise_variance(&self) -> f64 {
        self.noise_variance
    }

    pub fn mean(&self, input: &[f64]) -> f64 {
        let mut a = vec![0.0f32; self.width];
        let mut z = vec![0.0f32; self.width];
        for (dst, v) in a.iter_mut().zip(input) {
            *dst = *v as f32;
        }
        let last = self.layers.len() - 1;
        for (k, l) in self.layers.iter().enumerate() {
            let x = &a[..l.stride];
            for r in 0..l.out {
                z[r] = dot(&l.w[r * l.stride..(r + 1) * l.stride], x) + l.b[r];
            }
            if k < last {
                for v in z[..l.out].iter_mut() {
                    *v = tanh_f32(*v);
                }
            }
            for v in z[l.out..padded(l.out)].iter_mut() {
                *v = 0.0;
            }
            debug_assert!(l.inp <= l.stride);
            std::mem::swap(&mut a, &mut z);
        }
        a[0] as f64
    }
}
