//! Convolution families and supporting layers.

mod affine;
mod conv;
mod gkan;

pub use affine::ChannelAffine;
pub use conv::{conv1d, Conv1d};
pub use gkan::{gkan_conv1d, GkanConv1d};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::{Param, Tape, Var};

/// A differentiable module with owned parameters.
pub trait Layer<T: Scalar> {
    fn forward<'t>(&self, tape: &'t Tape<T>, x: Var<'t, T>) -> Result<Var<'t, T>>;

    fn params(&self) -> Vec<&Param<T>>;

    fn params_mut(&mut self) -> Vec<&mut Param<T>>;

    /// Exact number of learnable scalars.
    fn param_count(&self) -> usize;
}

/// Which convolution family fills a position in a block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Standard,
    Gkan,
}

/// Either convolution family behind one interface.
#[derive(Debug, Clone)]
pub enum ConvLayer<T> {
    Standard(Conv1d<T>),
    Gkan(GkanConv1d<T>),
}

impl<T: Scalar> ConvLayer<T> {
    pub fn family(&self) -> Family {
        match self {
            ConvLayer::Standard(_) => Family::Standard,
            ConvLayer::Gkan(_) => Family::Gkan,
        }
    }

    pub fn in_channels(&self) -> usize {
        match self {
            ConvLayer::Standard(c) => c.in_channels(),
            ConvLayer::Gkan(g) => g.in_channels(),
        }
    }

    pub fn out_channels(&self) -> usize {
        match self {
            ConvLayer::Standard(c) => c.out_channels(),
            ConvLayer::Gkan(g) => g.out_channels(),
        }
    }

    pub fn kernel(&self) -> usize {
        match self {
            ConvLayer::Standard(c) => c.kernel(),
            ConvLayer::Gkan(g) => g.kernel(),
        }
    }
}

impl<T: Scalar> Layer<T> for ConvLayer<T> {
    fn forward<'t>(&self, tape: &'t Tape<T>, x: Var<'t, T>) -> Result<Var<'t, T>> {
        match self {
            ConvLayer::Standard(c) => c.forward(tape, x),
            ConvLayer::Gkan(g) => g.forward(tape, x),
        }
    }

    fn params(&self) -> Vec<&Param<T>> {
        match self {
            ConvLayer::Standard(c) => c.params(),
            ConvLayer::Gkan(g) => g.params(),
        }
    }

    fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        match self {
            ConvLayer::Standard(c) => c.params_mut(),
            ConvLayer::Gkan(g) => g.params_mut(),
        }
    }

    fn param_count(&self) -> usize {
        match self {
            ConvLayer::Standard(c) => c.param_count(),
            ConvLayer::Gkan(g) => g.param_count(),
        }
    }
}

/// `x + fx` for identically shaped operands.
pub fn residual_add<'t, T: Scalar>(x: Var<'t, T>, fx: Var<'t, T>) -> Result<Var<'t, T>> {
    let (xs, fs) = (x.shape(), fx.shape());
    if xs != fs {
        return Err(Error::Dimension {
            op: "residual_add",
            left: xs,
            right: fs,
        });
    }
    x.add(fx)
}

pub(crate) fn check_input<T: Scalar>(op: &'static str, x: &Var<'_, T>, in_ch: usize) -> Result<()> {
    let shape = x.shape();
    match shape.as_slice() {
        [_, c, _] if *c == in_ch => Ok(()),
        _ => Err(Error::Dimension {
            op,
            left: shape,
            right: vec![in_ch],
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tensor;
    use crate::testutil::{assert_grad_close, central_difference, random_tensor};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn residual_identities() {
        let x = random_tensor(&[1, 2, 3], 1);
        let tape = Tape::new();
        let xv = tape.leaf(x.clone());
        let z = tape.leaf(Tensor::zeros(&[1, 2, 3]));
        assert_eq!(residual_add(xv, z).unwrap().data(), x.data());
        assert_eq!(residual_add(z, xv).unwrap().data(), x.data());
        let bad = tape.leaf(Tensor::zeros(&[1, 3, 2]));
        assert!(residual_add(xv, bad).is_err());
        let scalar = tape.leaf(Tensor::scalar(1.0));
        assert!(residual_add(xv, scalar).is_err());
    }

    #[test]
    fn residual_gradients_reach_both_branches() {
        let a = random_tensor(&[1, 2, 3], 2);
        let b = random_tensor(&[1, 2, 3], 3);
        let tape = Tape::new();
        let av = tape.leaf(a.clone().with_requires_grad(true));
        let bv = tape.leaf(b.clone().with_requires_grad(true));
        let loss = residual_add(av, bv.tanh()).unwrap().sum();
        tape.backward(loss).unwrap();
        let f = |a: &Tensor<f64>, b: &Tensor<f64>| -> f64 {
            a.data().iter().zip(b.data()).map(|(x, y)| x + y.tanh()).sum()
        };
        let fd_a = central_difference(&a, 1e-6, |p| f(p, &b));
        let fd_b = central_difference(&b, 1e-6, |p| f(&a, p));
        assert_grad_close(&av.grad().unwrap(), &fd_a, 1e-6);
        assert_grad_close(&bv.grad().unwrap(), &fd_b, 1e-6);
        assert!(av.grad().unwrap().iter().all(|&g| (g - 1.0).abs() < 1e-15));
    }

    fn shift_right(x: &Tensor<f64>, s: usize) -> Tensor<f64> {
        let &[b, c, t] = x.shape() else { unreachable!() };
        let mut out = Tensor::zeros(&[b, c, t + s]);
        for r in 0..b * c {
            out.data_mut()[r * (t + s) + s..][..t].copy_from_slice(&x.data()[r * t..][..t]);
        }
        out
    }

    #[test]
    fn time_shift_equivariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let layers: Vec<ConvLayer<f64>> = vec![
            ConvLayer::Standard(Conv1d::new("c", 3, 2, 5, true, &mut rng)),
            ConvLayer::Gkan(GkanConv1d::new("g", 3, 2, 5, 3, false, &mut rng)),
        ];
        let x = random_tensor(&[2, 3, 8], 5);
        for layer in &layers {
            for s in [1, 3] {
                let tape = Tape::new();
                let y = layer.forward(&tape, tape.leaf(x.clone())).unwrap().data();
                let ys = layer.forward(&tape, tape.leaf(shift_right(&x, s))).unwrap().data();
                let (oc, t) = (2, 8);
                for r in 0..2 * oc {
                    for i in 0..t {
                        let a = y[r * t + i];
                        let b = ys[r * (t + s) + i + s];
                        assert!((a - b).abs() < 1e-12, "{:?} s={s}", layer.family());
                    }
                }
            }
        }
    }
}
