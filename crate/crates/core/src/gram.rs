//! Gram (Legendre-family) polynomial basis with a `tanh` input squash.
//!
//! For an input `x` the basis is evaluated at `t = tanh(x)`, so the argument
//! always lies in `(-1, 1)`:
//!
//! ```text
//! P0 = 1,  P1 = t,  (n+1)·P(n+1) = (2n+1)·t·Pn − n·P(n−1)
//! ```
//!
//! Derivatives are returned with respect to `x`, i.e. already chained through
//! the squash.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Basis values and their derivatives at one input point.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisEval<T> {
    pub values: Vec<T>,
    pub derivs: Vec<T>,
}

/// Evaluates `P0..=P(degree)` at `tanh(x)`.
pub fn gram_eval<T: Scalar>(x: T, degree: i64) -> Result<BasisEval<T>> {
    if degree < 0 {
        return Err(Error::contract(format!(
            "basis degree must be non-negative, got {degree}"
        )));
    }
    let n = degree as usize + 1;
    let mut values = vec![T::zero(); n];
    let mut derivs = vec![T::zero(); n];
    gram_eval_into(x, &mut values, &mut derivs);
    Ok(BasisEval { values, derivs })
}

/// Fills `values`/`derivs` (both of length `degree + 1`) for input `x`.
///
/// This is the single kernel behind both the scalar and the batched paths,
/// so the two agree bitwise.
#[inline]
pub fn gram_eval_into<T: Scalar>(x: T, values: &mut [T], derivs: &mut [T]) {
    debug_assert_eq!(values.len(), derivs.len());
    let t = x.tanh();
    gram_at(t, values, derivs);
    let dt = T::one() - t * t;
    derivs.iter_mut().for_each(|d| *d = *d * dt);
}

/// Recurrence in the squashed coordinate `t`; `derivs` are `dP/dt`.
#[inline]
pub fn gram_at<T: Scalar>(t: T, values: &mut [T], derivs: &mut [T]) {
    let n = values.len();
    if n == 0 {
        return;
    }
    values[0] = T::one();
    derivs[0] = T::zero();
    if n == 1 {
        return;
    }
    values[1] = t;
    derivs[1] = T::one();
    for k in 1..n - 1 {
        let kf = T::of(k as f64);
        let a = T::of((2 * k + 1) as f64);
        let inv = T::one() / T::of((k + 1) as f64);
        values[k + 1] = (a * t * values[k] - kf * values[k - 1]) * inv;
        derivs[k + 1] = (a * (values[k] + t * derivs[k]) - kf * derivs[k - 1]) * inv;
    }
}

/// Scalar learnable activation `w_b·silu(x) + w_s·Σ c_m·P_m(tanh x)`.
///
/// Reference form used to check the layer implementations; not on the
/// training path.
pub fn phi_reference<T: Scalar>(x: T, w_b: T, w_s: T, coeffs: &[T], degree: usize) -> Result<T> {
    if coeffs.len() != degree + 1 {
        return Err(Error::contract(format!(
            "expected {} coefficients for degree {degree}, got {}",
            degree + 1,
            coeffs.len()
        )));
    }
    let basis = gram_eval(x, degree as i64)?;
    let expansion: T = basis
        .values
        .iter()
        .zip(coeffs)
        .map(|(&p, &c)| c * p)
        .sum();
    Ok(w_b * x.silu() + w_s * expansion)
}

/// Standard deviation of the zero-mean normal used to initialise basis
/// coefficients: `1 / ((degree + 1)·√fan_in)`.
pub fn coeff_init_std(degree: usize, fan_in: usize) -> f64 {
    1.0 / ((degree + 1) as f64 * (fan_in.max(1) as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn closed_forms(t: f64) -> [f64; 4] {
        [1.0, t, (3.0 * t * t - 1.0) / 2.0, (5.0 * t * t * t - 3.0 * t) / 2.0]
    }

    fn rel_err(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-12)
    }

    #[test]
    fn degree_three_at_zero() {
        let b = gram_eval(0.0f64, 3).unwrap();
        assert_eq!(b.values, vec![1.0, 0.0, -0.5, 0.0]);
    }

    #[test]
    fn degree_zero_is_constant_one() {
        for x in [-3.0, -0.2, 0.0, 1.7, 40.0] {
            assert_eq!(gram_eval(x, 0).unwrap().values, vec![1.0f64]);
        }
    }

    #[test]
    fn negative_degree_is_rejected() {
        assert!(matches!(gram_eval(0.3f64, -1), Err(Error::Contract(_))));
    }

    #[test]
    fn value_at_atanh_half() {
        let x = 0.5f64.atanh();
        let b = gram_eval(x, 3).unwrap();
        assert!(rel_err(b.values[2], -0.125) < 1e-12);
    }

    #[test]
    fn saturates_to_one() {
        let b = gram_eval(50.0f64, 6).unwrap();
        for v in b.values {
            assert!((v - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn recurrence_matches_closed_forms() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let x: f64 = rng.random_range(-3.0..3.0);
            let got = gram_eval(x, 3).unwrap().values;
            let want = closed_forms(x.tanh());
            for m in 0..4 {
                let err = (got[m] - want[m]).abs() / want[m].abs().max(1e-300);
                assert!(err < 1e-12 || (got[m] - want[m]).abs() < 1e-15, "m={m} x={x}");
            }
        }
    }

    #[test]
    fn bounded_on_unit_interval() {
        let mut v = vec![0.0f64; 9];
        let mut d = vec![0.0f64; 9];
        for i in 0..=200 {
            let t = -1.0 + i as f64 / 100.0;
            gram_at(t, &mut v, &mut d);
            assert!(v.iter().all(|p| p.abs() <= 1.0 + 1e-12));
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let h = 1e-6;
        let mut checked = 0;
        while checked < 300 {
            let x: f64 = rng.random_range(-3.0..3.0);
            if x.tanh().abs() > 0.999 {
                continue;
            }
            let b = gram_eval(x, 5).unwrap();
            let up = gram_eval(x + h, 5).unwrap().values;
            let dn = gram_eval(x - h, 5).unwrap().values;
            for m in 1..6 {
                let fd = (up[m] - dn[m]) / (2.0 * h);
                let err = (b.derivs[m] - fd).abs() / b.derivs[m].abs().max(1e-3);
                assert!(err < 1e-6, "m={m} x={x} analytic={} fd={fd}", b.derivs[m]);
            }
            checked += 1;
        }
    }

    #[test]
    fn trapezoid_gram_matrix_is_diagonally_dominant() {
        let n = 1024;
        let degree = 3;
        let mut v = vec![0.0f64; degree + 1];
        let mut d = vec![0.0f64; degree + 1];
        let h = 2.0 / (n - 1) as f64;
        let mut gram = vec![vec![0.0f64; degree + 1]; degree + 1];
        for i in 0..n {
            let t = -1.0 + i as f64 * h;
            let w = if i == 0 || i == n - 1 { h / 2.0 } else { h };
            gram_at(t, &mut v, &mut d);
            for a in 0..=degree {
                for b in 0..=degree {
                    gram[a][b] += w * v[a] * v[b];
                }
            }
        }
        for a in 0..=degree {
            for b in 0..=degree {
                if a != b {
                    let ratio = gram[a][b].abs() / gram[a][a].min(gram[b][b]);
                    assert!(ratio < 0.02, "({a},{b}) ratio {ratio}");
                }
            }
        }
    }

    #[test]
    fn phi_reference_examples() {
        let x = 0.3f64;
        assert_eq!(phi_reference(x, 0.0, 1.0, &[1.0, 0.0, 0.0, 0.0], 3).unwrap(), 1.0);
        assert_eq!(phi_reference(0.0f64, 1.0, 0.0, &[0.4, 0.1, 0.2, 0.3], 3).unwrap(), 0.0);
        let v = phi_reference(x, 0.0, 1.0, &[0.0, 1.0, 0.0, 0.0], 3).unwrap();
        assert!(rel_err(v, x.tanh()) < 1e-15);
        assert!(phi_reference(x, 1.0, 1.0, &[1.0, 2.0], 3).is_err());
    }

    #[test]
    fn f32_path_agrees_with_f64() {
        let b32 = gram_eval(0.4f32, 3).unwrap();
        let b64 = gram_eval(0.4f64, 3).unwrap();
        for (a, b) in b32.values.iter().zip(&b64.values) {
            assert!((*a as f64 - b).abs() < 1e-6);
        }
    }
}
