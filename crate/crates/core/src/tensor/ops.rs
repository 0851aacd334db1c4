use super::tape::Var;
use super::Tensor;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Backward rule of a recorded operation.
///
/// `backward` receives the input values, the output value and the adjoint of
/// the output, and returns one adjoint per input (`None` where `needs` is
/// false or the input is not differentiable).
pub trait Function<T: Scalar> {
    fn name(&self) -> &'static str;

    fn backward(
        &self,
        inputs: &[&Tensor<T>],
        output: &Tensor<T>,
        grad_out: &[T],
        needs: &[bool],
    ) -> Vec<Option<Vec<T>>>;
}

fn broadcast_shape(op: &'static str, a: &Tensor<impl Scalar>, b: &Tensor<impl Scalar>) -> Result<Vec<usize>> {
    if a.shape() == b.shape() || b.is_scalar() {
        Ok(a.shape().to_vec())
    } else if a.is_scalar() {
        Ok(b.shape().to_vec())
    } else {
        Err(Error::Dimension {
            op,
            left: a.shape().to_vec(),
            right: b.shape().to_vec(),
        })
    }
}

#[inline]
fn at<T: Copy>(v: &[T], i: usize) -> T {
    if v.len() == 1 {
        v[0]
    } else {
        v[i]
    }
}

/// Reduces an adjoint to the input's extent (sums when the input was broadcast).
fn unbroadcast<T: Scalar>(g: Vec<T>, input: &Tensor<T>) -> Vec<T> {
    if input.numel() == g.len() {
        g
    } else {
        vec![g.into_iter().sum()]
    }
}

#[derive(Clone, Copy)]
enum Binary {
    Add,
    Sub,
    Mul,
}

impl<T: Scalar> Function<T> for Binary {
    fn name(&self) -> &'static str {
        match self {
            Binary::Add => "add",
            Binary::Sub => "sub",
            Binary::Mul => "mul",
        }
    }

    fn backward(
        &self,
        inputs: &[&Tensor<T>],
        _output: &Tensor<T>,
        g: &[T],
        needs: &[bool],
    ) -> Vec<Option<Vec<T>>> {
        let (a, b) = (inputs[0], inputs[1]);
        let ga = needs[0].then(|| {
            let v = match self {
                Binary::Add | Binary::Sub => g.to_vec(),
                Binary::Mul => (0..g.len()).map(|i| g[i] * at(b.data(), i)).collect(),
            };
            unbroadcast(v, a)
        });
        let gb = needs[1].then(|| {
            let v = match self {
                Binary::Add => g.to_vec(),
                Binary::Sub => g.iter().map(|&x| -x).collect(),
                Binary::Mul => (0..g.len()).map(|i| g[i] * at(a.data(), i)).collect(),
            };
            unbroadcast(v, b)
        });
        vec![ga, gb]
    }
}

struct Scale<T>(T);

impl<T: Scalar> Function<T> for Scale<T> {
    fn name(&self) -> &'static str {
        "scale"
    }

    fn backward(&self, _: &[&Tensor<T>], _: &Tensor<T>, g: &[T], _: &[bool]) -> Vec<Option<Vec<T>>> {
        vec![Some(g.iter().map(|&x| x * self.0).collect())]
    }
}

#[derive(Clone, Copy)]
enum Unary {
    Relu,
    Silu,
    Tanh,
    Log,
}

impl Unary {
    fn forward<T: Scalar>(self, x: T) -> T {
        match self {
            Unary::Relu => x.max(T::zero()),
            Unary::Silu => x.silu(),
            Unary::Tanh => x.tanh(),
            Unary::Log => x.ln(),
        }
    }

    fn derivative<T: Scalar>(self, x: T, y: T) -> T {
        match self {
            Unary::Relu => {
                if x > T::zero() {
                    T::one()
                } else {
                    T::zero()
                }
            }
            Unary::Silu => {
                let s = x.sigmoid();
                s * (T::one() + x * (T::one() - s))
            }
            Unary::Tanh => T::one() - y * y,
            Unary::Log => x.recip(),
        }
    }
}

impl<T: Scalar> Function<T> for Unary {
    fn name(&self) -> &'static str {
        match self {
            Unary::Relu => "relu",
            Unary::Silu => "silu",
            Unary::Tanh => "tanh",
            Unary::Log => "log",
        }
    }

    fn backward(&self, inputs: &[&Tensor<T>], out: &Tensor<T>, g: &[T], _: &[bool]) -> Vec<Option<Vec<T>>> {
        let x = inputs[0].data();
        let y = out.data();
        vec![Some(
            (0..g.len()).map(|i| g[i] * self.derivative(x[i], y[i])).collect(),
        )]
    }
}

struct Sum;

impl<T: Scalar> Function<T> for Sum {
    fn name(&self) -> &'static str {
        "sum"
    }

    fn backward(&self, inputs: &[&Tensor<T>], _: &Tensor<T>, g: &[T], _: &[bool]) -> Vec<Option<Vec<T>>> {
        vec![Some(vec![g[0]; inputs[0].numel()])]
    }
}

struct Reshape;

impl<T: Scalar> Function<T> for Reshape {
    fn name(&self) -> &'static str {
        "reshape"
    }

    fn backward(&self, _: &[&Tensor<T>], _: &Tensor<T>, g: &[T], _: &[bool]) -> Vec<Option<Vec<T>>> {
        vec![Some(g.to_vec())]
    }
}

struct MatMul {
    m: usize,
    k: usize,
    n: usize,
}

impl<T: Scalar> Function<T> for MatMul {
    fn name(&self) -> &'static str {
        "matmul"
    }

    fn backward(&self, inputs: &[&Tensor<T>], _: &Tensor<T>, g: &[T], needs: &[bool]) -> Vec<Option<Vec<T>>> {
        let (a, b) = (inputs[0].data(), inputs[1].data());
        let MatMul { m, k, n } = *self;
        // dA = G · Bᵀ
        let ga = needs[0].then(|| {
            let mut out = vec![T::zero(); m * k];
            for i in 0..m {
                for p in 0..k {
                    let mut acc = T::zero();
                    for j in 0..n {
                        acc = acc + g[i * n + j] * b[p * n + j];
                    }
                    out[i * k + p] = acc;
                }
            }
            out
        });
        // dB = Aᵀ · G
        let gb = needs[1].then(|| {
            let mut out = vec![T::zero(); k * n];
            for i in 0..m {
                for p in 0..k {
                    let aip = a[i * k + p];
                    for j in 0..n {
                        out[p * n + j] = out[p * n + j] + aip * g[i * n + j];
                    }
                }
            }
            out
        });
        vec![ga, gb]
    }
}

struct SoftmaxLastDim {
    cols: usize,
}

impl<T: Scalar> Function<T> for SoftmaxLastDim {
    fn name(&self) -> &'static str {
        "softmax_lastdim"
    }

    fn backward(&self, _: &[&Tensor<T>], out: &Tensor<T>, g: &[T], _: &[bool]) -> Vec<Option<Vec<T>>> {
        let y = out.data();
        let mut dx = vec![T::zero(); y.len()];
        for (row, (yr, gr)) in y.chunks(self.cols).zip(g.chunks(self.cols)).enumerate() {
            let dot: T = yr.iter().zip(gr).map(|(&a, &b)| a * b).sum();
            for c in 0..self.cols {
                dx[row * self.cols + c] = yr[c] * (gr[c] - dot);
            }
        }
        vec![Some(dx)]
    }
}

/// Row-wise softmax over the trailing dimension of a flat buffer.
pub(crate) fn softmax_rows<T: Scalar>(data: &[T], cols: usize) -> Vec<T> {
    let mut out = Vec::with_capacity(data.len());
    for row in data.chunks(cols) {
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        let start = out.len();
        let mut z = T::zero();
        for &v in row {
            let e = (v - max).exp();
            z = z + e;
            out.push(e);
        }
        out[start..].iter_mut().for_each(|e| *e = *e / z);
    }
    out
}

impl<'t, T: Scalar> Var<'t, T> {
    fn binary(self, other: Var<'t, T>, op: Binary) -> Result<Var<'t, T>> {
        let out = {
            let (a, b) = (self.value(), other.value());
            let shape = broadcast_shape(<Binary as Function<T>>::name(&op), &a, &b)?;
            let n: usize = shape.iter().product();
            let (ad, bd) = (a.data(), b.data());
            let data = (0..n)
                .map(|i| {
                    let (x, y) = (at(ad, i), at(bd, i));
                    match op {
                        Binary::Add => x + y,
                        Binary::Sub => x - y,
                        Binary::Mul => x * y,
                    }
                })
                .collect();
            Tensor::new(&shape, data)?
        };
        Ok(self.tape.apply(op, &[self, other], out))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn add(self, other: Var<'t, T>) -> Result<Var<'t, T>> {
        self.binary(other, Binary::Add)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn sub(self, other: Var<'t, T>) -> Result<Var<'t, T>> {
        self.binary(other, Binary::Sub)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn mul(self, other: Var<'t, T>) -> Result<Var<'t, T>> {
        self.binary(other, Binary::Mul)
    }

    pub fn scale(self, c: T) -> Var<'t, T> {
        let out = {
            let v = self.value();
            Tensor::new(v.shape(), v.data().iter().map(|&x| x * c).collect())
                .expect("same shape")
        };
        self.tape.apply(Scale(c), &[self], out)
    }

    fn unary(self, op: Unary) -> Var<'t, T> {
        let out = {
            let v = self.value();
            Tensor::new(v.shape(), v.data().iter().map(|&x| op.forward(x)).collect())
                .expect("same shape")
        };
        self.tape.apply(op, &[self], out)
    }

    pub fn relu(self) -> Var<'t, T> {
        self.unary(Unary::Relu)
    }

    pub fn silu(self) -> Var<'t, T> {
        self.unary(Unary::Silu)
    }

    pub fn tanh(self) -> Var<'t, T> {
        self.unary(Unary::Tanh)
    }

    pub fn log(self) -> Var<'t, T> {
        self.unary(Unary::Log)
    }

    pub fn sum(self) -> Var<'t, T> {
        let total = self.value().data().iter().copied().sum();
        self.tape.apply(Sum, &[self], Tensor::scalar(total))
    }

    pub fn mean(self) -> Var<'t, T> {
        let n = self.value().numel();
        self.sum().scale(T::one() / T::of(n as f64))
    }

    pub fn reshape(self, shape: &[usize]) -> Result<Var<'t, T>> {
        let out = self.value().clone().reshaped(shape)?;
        Ok(self.tape.apply(Reshape, &[self], out))
    }

    /// Matrix product of rank-2 operands.
    pub fn matmul(self, other: Var<'t, T>) -> Result<Var<'t, T>> {
        let (out, dims) = {
            let (a, b) = (self.value(), other.value());
            let mismatch = || Error::Dimension {
                op: "matmul",
                left: a.shape().to_vec(),
                right: b.shape().to_vec(),
            };
            let (&[m, k], &[k2, n]) = (a.shape(), b.shape()) else {
                return Err(mismatch());
            };
            if k != k2 {
                return Err(mismatch());
            }
            let (ad, bd) = (a.data(), b.data());
            let mut c = vec![T::zero(); m * n];
            for i in 0..m {
                for p in 0..k {
                    let aip = ad[i * k + p];
                    for j in 0..n {
                        c[i * n + j] = c[i * n + j] + aip * bd[p * n + j];
                    }
                }
            }
            (Tensor::new(&[m, n], c)?, MatMul { m, k, n })
        };
        Ok(self.tape.apply(dims, &[self, other], out))
    }

    /// Softmax over the last dimension.
    pub fn softmax_lastdim(self) -> Var<'t, T> {
        let (out, cols) = {
            let v = self.value();
            let cols = v.shape().last().copied().unwrap_or(1).max(1);
            (
                Tensor::new(v.shape(), softmax_rows(v.data(), cols)).expect("same shape"),
                cols,
            )
        };
        self.tape.apply(SoftmaxLastDim { cols }, &[self], out)
    }
}
