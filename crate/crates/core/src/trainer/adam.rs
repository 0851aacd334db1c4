use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Param;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.98,
            eps: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(Error::contract(format!("learning rate must be non-negative, got {}", self.lr)));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(Error::contract(format!("{name} must lie in [0, 1), got {b}")));
            }
        }
        if !(self.eps > 0.0) {
            return Err(Error::contract("epsilon must be positive"));
        }
        Ok(())
    }
}

/// First and second moments per parameter plus the step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    pub m: Vec<Vec<T>>,
    pub v: Vec<Vec<T>>,
    pub step: u64,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(params: &[&Param<T>]) -> Self {
        let zeros = || params.iter().map(|p| vec![T::zero(); p.numel()]).collect();
        AdamState {
            m: zeros(),
            v: zeros(),
            step: 0,
        }
    }
}

/// One bias-corrected Adam update of every parameter.
pub fn adam_step<T: Scalar>(
    params: &mut [&mut Param<T>],
    grads: &[Vec<T>],
    state: &mut AdamState<T>,
    cfg: &AdamConfig,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(Error::contract(format!(
            "adam: {} parameters, {} gradients, {} moment slots",
            params.len(),
            grads.len(),
            state.m.len()
        )));
    }
    for (i, (p, g)) in params.iter().zip(grads).enumerate() {
        if p.numel() != g.len() || state.m[i].len() != g.len() {
            return Err(Error::Dimension {
                op: "adam",
                left: vec![p.numel()],
                right: vec![g.len()],
            });
        }
    }
    state.step += 1;
    let t = state.step as i32;
    let (b1, b2) = (T::of(cfg.beta1), T::of(cfg.beta2));
    let c1 = T::one() - T::of(cfg.beta1.powi(t));
    let c2 = T::one() - T::of(cfg.beta2.powi(t));
    let (lr, eps) = (T::of(cfg.lr), T::of(cfg.eps));
    for (i, (p, g)) in params.iter_mut().zip(grads).enumerate() {
        let (m, v) = (&mut state.m[i], &mut state.v[i]);
        for (j, w) in p.tensor.data_mut().iter_mut().enumerate() {
            m[j] = b1 * m[j] + (T::one() - b1) * g[j];
            v[j] = b2 * v[j] + (T::one() - b2) * g[j] * g[j];
            let mhat = m[j] / c1;
            let vhat = v[j] / c2;
            *w = *w - lr * mhat / (vhat.sqrt() + eps);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tensor;

    fn scalar_param(v: f64) -> Param<f64> {
        Param::new("p", Tensor::new(&[1], vec![v]).unwrap())
    }

    fn run(p: &mut Param<f64>, state: &mut AdamState<f64>, g: f64, cfg: &AdamConfig) {
        adam_step(&mut [p], &[vec![g]], state, cfg).unwrap();
    }

    #[test]
    fn two_steps_match_hand_arithmetic() {
        let cfg = AdamConfig::default();
        let mut p = scalar_param(1.0);
        let mut st = AdamState::new(&[&p]);
        run(&mut p, &mut st, 0.5, &cfg);
        // m1 = 0.05, v1 = 0.005; mhat = 0.5, vhat = 0.25
        let p1 = 1.0 - 1e-3 * 0.5 / (0.5 + 1e-8);
        assert_eq!(p.tensor.data()[0], p1);
        run(&mut p, &mut st, -0.25, &cfg);
        let m2: f64 = 0.9 * 0.05 + 0.1 * -0.25;
        let v2: f64 = 0.98 * 0.005 + 0.02 * 0.0625;
        let (mhat, vhat) = (m2 / (1.0 - 0.81), v2 / (1.0 - 0.9604));
        let p2 = p1 - 1e-3 * mhat / (vhat.sqrt() + 1e-8);
        assert!((p.tensor.data()[0] - p2).abs() < 1e-16);
        assert_eq!(st.step, 2);
    }

    #[test]
    fn zero_lr_and_zero_grads_leave_params_unchanged() {
        let mut p = scalar_param(0.123);
        let mut st = AdamState::new(&[&p]);
        let zero_lr = AdamConfig {
            lr: 0.0,
            ..AdamConfig::default()
        };
        for _ in 0..5 {
            run(&mut p, &mut st, 3.0, &zero_lr);
        }
        assert_eq!(p.tensor.data()[0].to_bits(), 0.123f64.to_bits());
        let mut q = scalar_param(-4.5);
        let mut st = AdamState::new(&[&q]);
        for _ in 0..5 {
            run(&mut q, &mut st, 0.0, &AdamConfig::default());
        }
        assert_eq!(q.tensor.data()[0], -4.5);
    }

    #[test]
    fn constant_gradient_steps_approach_lr_sign() {
        let cfg = AdamConfig::default();
        let mut p = Param::new("p", Tensor::new(&[2], vec![0.0, 0.0]).unwrap());
        let mut st = AdamState::new(&[&p]);
        let mut prev = p.tensor.data().to_vec();
        for _ in 0..500 {
            adam_step(&mut [&mut p], &[vec![0.3, -2.0]], &mut st, &cfg).unwrap();
            let now = p.tensor.data().to_vec();
            let step: [f64; 2] = [now[0] - prev[0], now[1] - prev[1]];
            assert!((step[0] + 1e-3).abs() < 1e-6 && (step[1] - 1e-3).abs() < 1e-6);
            prev = now;
        }
    }

    #[test]
    fn scaling_grads_keeps_sign_pattern() {
        let cfg = AdamConfig::default();
        let g = [0.5, -0.1, 2.0, -3.0];
        let update = |c: f64| {
            let mut p = Param::new("p", Tensor::<f64>::zeros(&[4]));
            let mut st = AdamState::new(&[&p]);
            let scaled: Vec<f64> = g.iter().map(|v| v * c).collect();
            adam_step(&mut [&mut p], &[scaled], &mut st, &cfg).unwrap();
            p.tensor.data().iter().map(|v| v.signum()).collect::<Vec<_>>()
        };
        assert_eq!(update(1.0), update(1e-3));
        assert_eq!(update(1.0), update(1e3));
    }

    #[test]
    fn shape_errors() {
        let mut p = scalar_param(0.0);
        let mut st = AdamState::new(&[&p]);
        assert!(adam_step(&mut [&mut p], &[vec![1.0, 2.0]], &mut st, &AdamConfig::default()).is_err());
        assert!(AdamConfig { beta2: 1.0, ..AdamConfig::default() }.validate().is_err());
    }
}
