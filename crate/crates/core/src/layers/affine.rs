use super::{check_input, Layer};
use crate::error::Result;
use crate::scalar::Scalar;
use crate::tensor::{Function, Param, Tape, Tensor, Var};

/// Per-channel `scale·x + offset`. Initialised to the identity.
#[derive(Debug, Clone)]
pub struct ChannelAffine<T> {
    pub scale: Param<T>,
    pub offset: Param<T>,
    channels: usize,
}

impl<T: Scalar> ChannelAffine<T> {
    pub fn new(name: &str, channels: usize) -> Self {
        ChannelAffine {
            scale: Param::new(format!("{name}.scale"), Tensor::full(&[channels], T::one())),
            offset: Param::new(format!("{name}.offset"), Tensor::zeros(&[channels])),
            channels,
        }
    }
}

struct AffineOp {
    batch: usize,
    channels: usize,
    len: usize,
}

impl<T: Scalar> Function<T> for AffineOp {
    fn name(&self) -> &'static str {
        "channel_affine"
    }

    fn backward(&self, inputs: &[&Tensor<T>], _: &Tensor<T>, g: &[T], needs: &[bool]) -> Vec<Option<Vec<T>>> {
        let (x, scale) = (inputs[0].data(), inputs[1].data());
        let AffineOp { batch, channels, len } = *self;
        let mut dx = needs[0].then(|| vec![T::zero(); x.len()]);
        let mut ds = vec![T::zero(); channels];
        let mut db = vec![T::zero(); channels];
        for b in 0..batch {
            for c in 0..channels {
                let off = (b * channels + c) * len;
                for i in off..off + len {
                    ds[c] = ds[c] + g[i] * x[i];
                    db[c] = db[c] + g[i];
                    if let Some(dx) = &mut dx {
                        dx[i] = g[i] * scale[c];
                    }
                }
            }
        }
        vec![dx, needs[1].then_some(ds), needs[2].then_some(db)]
    }
}

impl<T: Scalar> Layer<T> for ChannelAffine<T> {
    fn forward<'t>(&self, tape: &'t Tape<T>, x: Var<'t, T>) -> Result<Var<'t, T>> {
        check_input("channel_affine", &x, self.channels)?;
        let (out, op) = {
            let xv = x.value();
            let &[batch, channels, len] = xv.shape() else {
                unreachable!("checked rank")
            };
            let (s, o) = (self.scale.tensor.data(), self.offset.tensor.data());
            let mut y = xv.data().to_vec();
            for b in 0..batch {
                for c in 0..channels {
                    for v in &mut y[(b * channels + c) * len..][..len] {
                        *v = s[c] * *v + o[c];
                    }
                }
            }
            (Tensor::new(xv.shape(), y)?, AffineOp { batch, channels, len })
        };
        let s = tape.param(&self.scale);
        let o = tape.param(&self.offset);
        Ok(tape.apply(op, &[x, s, o], out))
    }

    fn params(&self) -> Vec<&Param<T>> {
        vec![&self.scale, &self.offset]
    }

    fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        vec![&mut self.scale, &mut self.offset]
    }

    fn param_count(&self) -> usize {
        2 * self.channels
    }
}
