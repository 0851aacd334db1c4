//! Finite-difference oracles shared by unit tests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::layers::Layer;
use crate::tensor::{Tape, Tensor};

pub fn random_tensor(shape: &[usize], seed: u64) -> Tensor<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = shape.iter().product();
    Tensor::new(shape, (0..n).map(|_| rng.random_range(-2.0..2.0)).collect()).unwrap()
}

/// Central differences of `f` with respect to every element of `at`.
pub fn central_difference(at: &Tensor<f64>, h: f64, mut f: impl FnMut(&Tensor<f64>) -> f64) -> Vec<f64> {
    let mut probe = at.clone();
    (0..at.numel())
        .map(|i| {
            let orig = probe.data()[i];
            probe.data_mut()[i] = orig + h;
            let up = f(&probe);
            probe.data_mut()[i] = orig - h;
            let dn = f(&probe);
            probe.data_mut()[i] = orig;
            (up - dn) / (2.0 * h)
        })
        .collect()
}

/// Norm-wise relative error `‖a − b‖ / max(‖b‖, tiny)`.
pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let norm: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    diff / norm.max(1e-12)
}

pub fn assert_grad_close(analytic: &[f64], numeric: &[f64], tol: f64) {
    assert_eq!(analytic.len(), numeric.len());
    let err = rel_err(analytic, numeric);
    assert!(err < tol, "relative error {err:e} ≥ {tol:e}\nanalytic {analytic:?}\nnumeric  {numeric:?}");
}

/// Checks input and parameter gradients of `layer` under the loss
/// `Σ y ⊙ r` for a fixed random `r`.
pub fn grad_check_layer<L: Layer<f64> + Clone>(layer: &L, in_shape: &[usize], tol: f64) {
    let x = random_tensor(in_shape, 77);
    let out_shape = {
        let tape = Tape::new();
        layer.forward(&tape, tape.leaf(x.clone())).unwrap().shape()
    };
    let r = random_tensor(&out_shape, 78);
    let loss_of = |l: &L, x: &Tensor<f64>| -> f64 {
        let tape = Tape::new();
        let y = l.forward(&tape, tape.leaf(x.clone())).unwrap();
        y.data().iter().zip(r.data()).map(|(a, b)| a * b).sum()
    };

    let tape = Tape::new();
    let xv = tape.leaf(x.clone().with_requires_grad(true));
    let y = layer.forward(&tape, xv).unwrap();
    let loss = y.mul(tape.leaf(r.clone())).unwrap().sum();
    tape.backward(loss).unwrap();

    let fd_x = central_difference(&x, 1e-5, |p| loss_of(layer, p));
    assert_grad_close(&xv.grad().unwrap(), &fd_x, tol);

    for (i, p) in layer.params().iter().enumerate() {
        let analytic = tape.param_grad(p.key()).unwrap();
        let mut probe = layer.clone();
        let fd = central_difference(&p.tensor, 1e-5, |t| {
            probe.params_mut()[i].tensor = t.clone();
            loss_of(&probe, &x)
        });
        assert_grad_close(&analytic, &fd, tol);
    }
}
