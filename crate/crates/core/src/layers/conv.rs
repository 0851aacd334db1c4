use rand::Rng;

use super::{check_input, Layer};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::{Function, Param, Tape, Tensor, Var};

/// Causal 1D convolution with `kernel − 1` frames of left zero padding, so
/// output length equals input length.
#[derive(Debug, Clone)]
pub struct Conv1d<T> {
    pub weight: Param<T>,
    pub bias: Option<Param<T>>,
    in_ch: usize,
    out_ch: usize,
    kernel: usize,
}

impl<T: Scalar> Conv1d<T> {
    /// Fan-in scaled uniform initialisation, `U(−1/√fan_in, 1/√fan_in)`.
    pub fn new(
        name: &str,
        in_ch: usize,
        out_ch: usize,
        kernel: usize,
        bias: bool,
        rng: &mut impl Rng,
    ) -> Self {
        let fan_in = (in_ch * kernel).max(1) as f64;
        let bound = 1.0 / fan_in.sqrt();
        let mut uniform = |n: usize| -> Vec<T> {
            (0..n)
                .map(|_| T::of(rng.random_range(-bound..bound)))
                .collect()
        };
        let weight = Tensor::new(&[out_ch, in_ch, kernel], uniform(out_ch * in_ch * kernel))
            .expect("consistent shape");
        let bias = bias.then(|| {
            Param::new(
                format!("{name}.bias"),
                Tensor::new(&[out_ch], uniform(out_ch)).expect("consistent shape"),
            )
        });
        Conv1d {
            weight: Param::new(format!("{name}.weight"), weight),
            bias,
            in_ch,
            out_ch,
            kernel,
        }
    }

    pub fn in_channels(&self) -> usize {
        self.in_ch
    }

    pub fn out_channels(&self) -> usize {
        self.out_ch
    }

    pub fn kernel(&self) -> usize {
        self.kernel
    }
}

impl<T: Scalar> Layer<T> for Conv1d<T> {
    fn forward<'t>(&self, tape: &'t Tape<T>, x: Var<'t, T>) -> Result<Var<'t, T>> {
        check_input("conv1d", &x, self.in_ch)?;
        let w = tape.param(&self.weight);
        let b = self.bias.as_ref().map(|b| tape.param(b));
        conv1d(x, w, b)
    }

    fn params(&self) -> Vec<&Param<T>> {
        std::iter::once(&self.weight).chain(self.bias.as_ref()).collect()
    }

    fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        std::iter::once(&mut self.weight)
            .chain(self.bias.as_mut())
            .collect()
    }

    fn param_count(&self) -> usize {
        self.out_ch * self.in_ch * self.kernel + if self.bias.is_some() { self.out_ch } else { 0 }
    }
}

struct Conv1dOp {
    batch: usize,
    in_ch: usize,
    out_ch: usize,
    kernel: usize,
    len: usize,
}

/// Differentiable causal convolution of `x: B×C_in×T` with `w: C_out×C_in×k`.
pub fn conv1d<'t, T: Scalar>(
    x: Var<'t, T>,
    w: Var<'t, T>,
    bias: Option<Var<'t, T>>,
) -> Result<Var<'t, T>> {
    let (out, op) = {
        let xv = x.value();
        let wv = w.value();
        let (&[batch, in_ch, len], &[out_ch, w_in, kernel]) = (xv.shape(), wv.shape()) else {
            return Err(Error::Dimension {
                op: "conv1d",
                left: xv.shape().to_vec(),
                right: wv.shape().to_vec(),
            });
        };
        if in_ch != w_in {
            return Err(Error::Dimension {
                op: "conv1d",
                left: xv.shape().to_vec(),
                right: wv.shape().to_vec(),
            });
        }
        let bv = bias.map(|b| b.value());
        if let Some(b) = &bv {
            if b.shape() != [out_ch] {
                return Err(Error::Dimension {
                    op: "conv1d bias",
                    left: vec![out_ch],
                    right: b.shape().to_vec(),
                });
            }
        }
        let (xd, wd) = (xv.data(), wv.data());
        let mut y = vec![T::zero(); batch * out_ch * len];
        for bi in 0..batch {
            for co in 0..out_ch {
                let row = &mut y[(bi * out_ch + co) * len..][..len];
                if let Some(b) = &bv {
                    row.fill(b.data()[co]);
                }
                for ci in 0..in_ch {
                    let xr = &xd[(bi * in_ch + ci) * len..][..len];
                    for a in 0..kernel {
                        let wt = wd[(co * in_ch + ci) * kernel + a];
                        let shift = kernel - 1 - a;
                        if shift >= len {
                            continue;
                        }
                        for (o, &xi) in row[shift..].iter_mut().zip(xr) {
                            *o = *o + wt * xi;
                        }
                    }
                }
            }
        }
        (
            Tensor::new(&[batch, out_ch, len], y)?,
            Conv1dOp {
                batch,
                in_ch,
                out_ch,
                kernel,
                len,
            },
        )
    };
    let tape = x.tape();
    Ok(match bias {
        Some(b) => tape.apply(op, &[x, w, b], out),
        None => tape.apply(op, &[x, w], out),
    })
}

impl<T: Scalar> Function<T> for Conv1dOp {
    fn name(&self) -> &'static str {
        "conv1d"
    }

    fn backward(
        &self,
        inputs: &[&Tensor<T>],
        _output: &Tensor<T>,
        g: &[T],
        needs: &[bool],
    ) -> Vec<Option<Vec<T>>> {
        let Conv1dOp {
            batch,
            in_ch,
            out_ch,
            kernel,
            len,
        } = *self;
        let (xd, wd) = (inputs[0].data(), inputs[1].data());
        let mut dx = needs[0].then(|| vec![T::zero(); xd.len()]);
        let mut dw = needs[1].then(|| vec![T::zero(); wd.len()]);
        for bi in 0..batch {
            for co in 0..out_ch {
                let gr = &g[(bi * out_ch + co) * len..][..len];
                for ci in 0..in_ch {
                    let xoff = (bi * in_ch + ci) * len;
                    for a in 0..kernel {
                        let widx = (co * in_ch + ci) * kernel + a;
                        let shift = kernel - 1 - a;
                        if shift >= len {
                            continue;
                        }
                        let gs = &gr[shift..];
                        if let Some(dw) = &mut dw {
                            let xr = &xd[xoff..xoff + len - shift];
                            let acc: T = gs.iter().zip(xr).map(|(&gv, &xv)| gv * xv).sum();
                            dw[widx] = dw[widx] + acc;
                        }
                        if let Some(dx) = &mut dx {
                            let wt = wd[widx];
                            for (d, &gv) in dx[xoff..xoff + len - shift].iter_mut().zip(gs) {
                                *d = *d + wt * gv;
                            }
                        }
                    }
                }
            }
        }
        let mut grads = vec![dx, dw];
        if inputs.len() == 3 {
            grads.push(needs[2].then(|| {
                let mut db = vec![T::zero(); out_ch];
                for bi in 0..batch {
                    for (co, d) in db.iter_mut().enumerate() {
                        *d = *d + g[(bi * out_ch + co) * len..][..len].iter().copied().sum();
                    }
                }
                db
            }));
        }
        grads
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::{grad_check_layer, random_tensor};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn set(p: &mut Param<f64>, data: &[f64]) {
        p.tensor.data_mut().copy_from_slice(data);
    }

    #[test]
    fn pointwise_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut conv = Conv1d::<f64>::new("c", 3, 3, 1, true, &mut rng);
        let mut eye = vec![0.0; 9];
        for i in 0..3 {
            eye[i * 3 + i] = 1.0;
        }
        set(&mut conv.weight, &eye);
        set(conv.bias.as_mut().unwrap(), &[0.0; 3]);
        let x = random_tensor(&[2, 3, 6], 1);
        let tape = Tape::new();
        let y = conv.forward(&tape, tape.leaf(x.clone())).unwrap();
        assert_eq!(y.data(), x.data());
    }

    #[test]
    fn delta_kernel_at_current_tap() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut conv = Conv1d::<f64>::new("c", 1, 1, 3, true, &mut rng);
        // Tap index 2 multiplies x[t]; taps 0 and 1 look back two and one frames.
        set(&mut conv.weight, &[0.0, 0.0, 1.0]);
        set(conv.bias.as_mut().unwrap(), &[0.0]);
        let x = random_tensor(&[1, 1, 7], 2);
        let tape = Tape::new();
        let y = conv.forward(&tape, tape.leaf(x.clone())).unwrap();
        assert_eq!(y.data(), x.data());

        // The centre tap delays by one frame under causal padding.
        set(&mut conv.weight, &[0.0, 1.0, 0.0]);
        let tape = Tape::new();
        let y = conv.forward(&tape, tape.leaf(x.clone())).unwrap().data();
        assert_eq!(y[0], 0.0);
        assert_eq!(&y[1..], &x.data()[..6]);
    }

    #[test]
    fn matches_nested_loop_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let conv = Conv1d::<f64>::new("c", 2, 2, 3, true, &mut rng);
        let x = random_tensor(&[1, 2, 5], 4);
        let tape = Tape::new();
        let y = conv.forward(&tape, tape.leaf(x.clone())).unwrap().data();
        let w = conv.weight.tensor.data();
        let b = conv.bias.as_ref().unwrap().tensor.data();
        let xd = x.data();
        for co in 0..2 {
            for t in 0..5 {
                let mut acc = b[co];
                for ci in 0..2 {
                    for a in 0..3 {
                        let src = t as isize + a as isize - 2;
                        if src >= 0 {
                            acc += w[(co * 2 + ci) * 3 + a] * xd[ci * 5 + src as usize];
                        }
                    }
                }
                assert_eq!(y[co * 5 + t], acc);
            }
        }
    }

    #[test]
    fn channel_mismatch_is_dimension_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let conv = Conv1d::<f64>::new("c", 3, 2, 1, true, &mut rng);
        let tape = Tape::new();
        let x = tape.leaf(Tensor::zeros(&[1, 4, 5]));
        assert!(matches!(conv.forward(&tape, x), Err(Error::Dimension { .. })));
    }

    #[test]
    fn param_count_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let conv = Conv1d::<f64>::new("c", 72, 72, 5, true, &mut rng);
        assert_eq!(conv.param_count(), 25_992);
        let numel: usize = conv.params().iter().map(|p| p.numel()).sum();
        assert_eq!(numel, conv.param_count());
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let conv = Conv1d::<f64>::new("c", 3, 2, 3, true, &mut rng);
        grad_check_layer(&conv, &[2, 3, 6], 1e-4);
        let conv = Conv1d::<f64>::new("c", 2, 4, 1, false, &mut rng);
        grad_check_layer(&conv, &[1, 2, 4], 1e-4);
    }

    #[test]
    fn kernel_longer_than_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let conv = Conv1d::<f64>::new("c", 1, 1, 5, false, &mut rng);
        grad_check_layer(&conv, &[1, 1, 2], 1e-4);
    }
}
