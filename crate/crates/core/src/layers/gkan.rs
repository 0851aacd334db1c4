use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::{check_input, Layer};
use crate::error::{Error, Result};
use crate::gram::{coeff_init_std, gram_eval_into};
use crate::scalar::Scalar;
use crate::tensor::{Function, Param, Tape, Tensor, Var};

/// Convolution whose every (output, input, tap) connection is a learnable
/// activation `φ(x) = Σ_m c_m·P_m(tanh x)`, optionally plus `w·silu(x)`.
///
/// `y[o, i] = Σ_d Σ_a φ[o, d, a](x[d, i + a − (k − 1)])`, with the input
/// left-padded by `k − 1` zeros. The layer has no bias: `P0` already gives
/// every connection a constant.
#[derive(Debug, Clone)]
pub struct GkanConv1d<T> {
    /// `C_out × C_in × k × (degree + 1)`
    pub coeffs: Param<T>,
    /// `C_out × C_in × k`, present when the `silu` base term is enabled.
    pub base_weight: Option<Param<T>>,
    in_ch: usize,
    out_ch: usize,
    kernel: usize,
    degree: usize,
}

impl<T: Scalar> GkanConv1d<T> {
    pub fn new(
        name: &str,
        in_ch: usize,
        out_ch: usize,
        kernel: usize,
        degree: usize,
        base_term: bool,
        rng: &mut impl Rng,
    ) -> Self {
        let fan_in = in_ch * kernel;
        let normal = Normal::new(0.0, coeff_init_std(degree, fan_in)).expect("positive std");
        let n = out_ch * in_ch * kernel * (degree + 1);
        let coeffs: Vec<T> = (0..n).map(|_| T::of(normal.sample(rng))).collect();
        let base_weight = base_term.then(|| {
            let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
            let w: Vec<T> = (0..out_ch * in_ch * kernel)
                .map(|_| T::of(rng.random_range(-bound..bound)))
                .collect();
            Param::new(
                format!("{name}.base_weight"),
                Tensor::new(&[out_ch, in_ch, kernel], w).expect("consistent shape"),
            )
        });
        GkanConv1d {
            coeffs: Param::new(
                format!("{name}.coeffs"),
                Tensor::new(&[out_ch, in_ch, kernel, degree + 1], coeffs)
                    .expect("consistent shape"),
            ),
            base_weight,
            in_ch,
            out_ch,
            kernel,
            degree,
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

    pub fn degree(&self) -> usize {
        self.degree
    }
}

impl<T: Scalar> Layer<T> for GkanConv1d<T> {
    fn forward<'t>(&self, tape: &'t Tape<T>, x: Var<'t, T>) -> Result<Var<'t, T>> {
        check_input("gkan_conv1d", &x, self.in_ch)?;
        let c = tape.param(&self.coeffs);
        let base = self.base_weight.as_ref().map(|w| tape.param(w));
        gkan_conv1d(x, c, base)
    }

    fn params(&self) -> Vec<&Param<T>> {
        std::iter::once(&self.coeffs)
            .chain(self.base_weight.as_ref())
            .collect()
    }

    fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        std::iter::once(&mut self.coeffs)
            .chain(self.base_weight.as_mut())
            .collect()
    }

    fn param_count(&self) -> usize {
        let conn = self.out_ch * self.in_ch * self.kernel;
        conn * (self.degree + 1) + if self.base_weight.is_some() { conn } else { 0 }
    }
}

struct GkanOp<T> {
    batch: usize,
    in_ch: usize,
    out_ch: usize,
    kernel: usize,
    basis_len: usize,
    len: usize,
    /// `B × C_in × (degree+1) × (T + k − 1)` basis values of the padded input.
    basis: Vec<T>,
    /// Matching `dP/dx`.
    dbasis: Vec<T>,
    /// `silu` and `silu'` of the padded input when the base term is active.
    silu: Option<(Vec<T>, Vec<T>)>,
}

/// Differentiable GKAN convolution of `x: B×C_in×T` with
/// `coeffs: C_out×C_in×k×(degree+1)` and optional `base: C_out×C_in×k`.
///
/// The input is expanded once into `(degree+1)·C_in` basis channels, which are
/// then mixed by a grouped linear map over taps.
pub fn gkan_conv1d<'t, T: Scalar>(
    x: Var<'t, T>,
    coeffs: Var<'t, T>,
    base: Option<Var<'t, T>>,
) -> Result<Var<'t, T>> {
    let (out, op) = {
        let xv = x.value();
        let cv = coeffs.value();
        let mismatch = || Error::Dimension {
            op: "gkan_conv1d",
            left: xv.shape().to_vec(),
            right: cv.shape().to_vec(),
        };
        let (&[batch, in_ch, len], &[out_ch, c_in, kernel, basis_len]) = (xv.shape(), cv.shape())
        else {
            return Err(mismatch());
        };
        if c_in != in_ch || basis_len == 0 || kernel == 0 {
            return Err(mismatch());
        }
        let bv = base.map(|b| b.value());
        if let Some(b) = &bv {
            if b.shape() != [out_ch, in_ch, kernel] {
                return Err(Error::Dimension {
                    op: "gkan_conv1d base",
                    left: vec![out_ch, in_ch, kernel],
                    right: b.shape().to_vec(),
                });
            }
        }
        let padded = len + kernel - 1;
        let xd = xv.data();

        let mut basis = vec![T::zero(); batch * in_ch * basis_len * padded];
        let mut dbasis = vec![T::zero(); basis.len()];
        let mut vals = vec![T::zero(); basis_len];
        let mut ders = vec![T::zero(); basis_len];
        for bc in 0..batch * in_ch {
            for tp in 0..padded {
                let xi = if tp + 1 >= kernel {
                    xd[bc * len + tp + 1 - kernel]
                } else {
                    T::zero()
                };
                gram_eval_into(xi, &mut vals, &mut ders);
                for m in 0..basis_len {
                    let idx = (bc * basis_len + m) * padded + tp;
                    basis[idx] = vals[m];
                    dbasis[idx] = ders[m];
                }
            }
        }
        let silu = bv.as_ref().map(|_| {
            let mut s = vec![T::zero(); batch * in_ch * padded];
            let mut ds = vec![T::zero(); s.len()];
            for bc in 0..batch * in_ch {
                for tp in (kernel - 1)..padded {
                    let xi = xd[bc * len + tp + 1 - kernel];
                    let sg = xi.sigmoid();
                    s[bc * padded + tp] = xi * sg;
                    ds[bc * padded + tp] = sg * (T::one() + xi * (T::one() - sg));
                }
            }
            (s, ds)
        });

        let cd = cv.data();
        let mut y = vec![T::zero(); batch * out_ch * len];
        for bi in 0..batch {
            for co in 0..out_ch {
                let row = &mut y[(bi * out_ch + co) * len..][..len];
                for ci in 0..in_ch {
                    let bc = bi * in_ch + ci;
                    for a in 0..kernel {
                        let cbase = ((co * in_ch + ci) * kernel + a) * basis_len;
                        for m in 0..basis_len {
                            let c = cd[cbase + m];
                            let src = &basis[(bc * basis_len + m) * padded + a..][..len];
                            for (o, &p) in row.iter_mut().zip(src) {
                                *o = *o + c * p;
                            }
                        }
                        if let (Some(b), Some((s, _))) = (&bv, &silu) {
                            let wt = b.data()[(co * in_ch + ci) * kernel + a];
                            let src = &s[bc * padded + a..][..len];
                            for (o, &p) in row.iter_mut().zip(src) {
                                *o = *o + wt * p;
                            }
                        }
                    }
                }
            }
        }
        (
            Tensor::new(&[batch, out_ch, len], y)?,
            GkanOp {
                batch,
                in_ch,
                out_ch,
                kernel,
                basis_len,
                len,
                basis,
                dbasis,
                silu,
            },
        )
    };
    let tape = x.tape();
    Ok(match base {
        Some(b) => tape.apply(op, &[x, coeffs, b], out),
        None => tape.apply(op, &[x, coeffs], out),
    })
}

impl<T: Scalar> Function<T> for GkanOp<T> {
    fn name(&self) -> &'static str {
        "gkan_conv1d"
    }

    fn backward(
        &self,
        inputs: &[&Tensor<T>],
        _output: &Tensor<T>,
        g: &[T],
        needs: &[bool],
    ) -> Vec<Option<Vec<T>>> {
        let GkanOp {
            batch,
            in_ch,
            out_ch,
            kernel,
            basis_len,
            len,
            ..
        } = *self;
        let padded = len + kernel - 1;
        let cd = inputs[1].data();
        let base = inputs.get(2).map(|b| b.data());
        let has_base = base.is_some();

        let mut dcoeffs = needs[1].then(|| vec![T::zero(); cd.len()]);
        let mut dbase = (has_base && needs[2]).then(|| vec![T::zero(); out_ch * in_ch * kernel]);
        // Adjoints of the padded basis channels (and silu channel).
        let mut dbasis_in = needs[0].then(|| vec![T::zero(); self.basis.len()]);
        let mut dsilu_in = (needs[0] && has_base).then(|| vec![T::zero(); batch * in_ch * padded]);

        for bi in 0..batch {
            for co in 0..out_ch {
                let gr = &g[(bi * out_ch + co) * len..][..len];
                for ci in 0..in_ch {
                    let bc = bi * in_ch + ci;
                    for a in 0..kernel {
                        let conn = (co * in_ch + ci) * kernel + a;
                        let cbase = conn * basis_len;
                        for m in 0..basis_len {
                            let off = (bc * basis_len + m) * padded + a;
                            if let Some(dc) = &mut dcoeffs {
                                let src = &self.basis[off..off + len];
                                let acc: T = gr.iter().zip(src).map(|(&gv, &p)| gv * p).sum();
                                dc[cbase + m] = dc[cbase + m] + acc;
                            }
                            if let Some(db) = &mut dbasis_in {
                                let c = cd[cbase + m];
                                for (d, &gv) in db[off..off + len].iter_mut().zip(gr) {
                                    *d = *d + c * gv;
                                }
                            }
                        }
                        if let (Some(base), Some((s, _))) = (base, &self.silu) {
                            let off = bc * padded + a;
                            if let Some(dw) = &mut dbase {
                                let acc: T =
                                    gr.iter().zip(&s[off..off + len]).map(|(&gv, &p)| gv * p).sum();
                                dw[conn] = dw[conn] + acc;
                            }
                            if let Some(ds) = &mut dsilu_in {
                                let wt = base[conn];
                                for (d, &gv) in ds[off..off + len].iter_mut().zip(gr) {
                                    *d = *d + wt * gv;
                                }
                            }
                        }
                    }
                }
            }
        }

        let dx = dbasis_in.map(|db| {
            let mut dx = vec![T::zero(); batch * in_ch * len];
            for bc in 0..batch * in_ch {
                for t in 0..len {
                    let tp = t + kernel - 1;
                    let mut acc = T::zero();
                    for m in 0..basis_len {
                        let idx = (bc * basis_len + m) * padded + tp;
                        acc = acc + db[idx] * self.dbasis[idx];
                    }
                    if let (Some(ds), Some((_, dsilu))) = (&dsilu_in, &self.silu) {
                        acc = acc + ds[bc * padded + tp] * dsilu[bc * padded + tp];
                    }
                    dx[bc * len + t] = acc;
                }
            }
            dx
        });

        let mut grads = vec![dx, dcoeffs];
        if has_base {
            grads.push(dbase);
        }
        grads
    }
}
