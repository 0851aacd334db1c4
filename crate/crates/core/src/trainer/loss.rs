use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::{Function, Tensor, Var};

struct WeightedCe<T> {
    probs: Vec<T>,
    labels: Vec<usize>,
    weights: Vec<T>,
    classes: usize,
    len: usize,
    norm: T,
}

/// `Σ weight[y]·(−log softmax(logits)[y]) / normalizer` over every frame of
/// `logits: B×C×T` with `labels` laid out `B×T`. The normalizer defaults to
/// the number of frames, giving the mean; pass the total frame count of a
/// batch to split one batch mean across several calls.
pub fn weighted_ce<'t, T: Scalar>(
    logits: Var<'t, T>,
    labels: &[usize],
    weights: &[f64],
    normalizer: Option<f64>,
) -> Result<Var<'t, T>> {
    let (loss, op) = {
        let lv = logits.value();
        let &[batch, classes, len] = lv.shape() else {
            return Err(Error::Dimension {
                op: "weighted_ce logits",
                left: lv.shape().to_vec(),
                right: vec![0, weights.len(), 0],
            });
        };
        if weights.len() != classes {
            return Err(Error::Dimension {
                op: "weighted_ce weights",
                left: vec![weights.len()],
                right: vec![classes],
            });
        }
        if labels.len() != batch * len {
            return Err(Error::Dimension {
                op: "weighted_ce labels",
                left: vec![labels.len()],
                right: vec![batch, len],
            });
        }
        if let Some(&bad) = labels.iter().find(|&&y| y >= classes) {
            return Err(Error::contract(format!("label {bad} outside 0..{classes}")));
        }
        if let Some(w) = weights.iter().find(|w| !(**w > 0.0)) {
            return Err(Error::contract(format!("class weights must be positive, got {w}")));
        }
        let n = normalizer.unwrap_or((batch * len) as f64);
        if !(n > 0.0) {
            return Err(Error::contract("loss normalizer must be positive"));
        }
        let ld = lv.data();
        let mut probs = vec![T::zero(); ld.len()];
        let mut total = T::zero();
        let wt: Vec<T> = weights.iter().map(|&w| T::of(w)).collect();
        for b in 0..batch {
            for t in 0..len {
                let at = |c: usize| (b * classes + c) * len + t;
                let max = (0..classes).map(|c| ld[at(c)]).fold(T::neg_infinity(), T::max);
                let z: T = (0..classes).map(|c| (ld[at(c)] - max).exp()).sum();
                for c in 0..classes {
                    probs[at(c)] = (ld[at(c)] - max).exp() / z;
                }
                let y = labels[b * len + t];
                total = total + wt[y] * (z.ln() + max - ld[at(y)]);
            }
        }
        let norm = T::of(n);
        (
            Tensor::scalar(total / norm),
            WeightedCe {
                probs,
                labels: labels.to_vec(),
                weights: wt,
                classes,
                len,
                norm,
            },
        )
    };
    Ok(logits.tape().apply(op, &[logits], loss))
}

impl<T: Scalar> Function<T> for WeightedCe<T> {
    fn name(&self) -> &'static str {
        "weighted_ce"
    }

    fn backward(&self, _: &[&Tensor<T>], _: &Tensor<T>, g: &[T], needs: &[bool]) -> Vec<Option<Vec<T>>> {
        if !needs[0] {
            return vec![None];
        }
        let mut d = self.probs.clone();
        let (c, len) = (self.classes, self.len);
        for (i, &y) in self.labels.iter().enumerate() {
            let (b, t) = (i / len, i % len);
            let s = g[0] * self.weights[y] / self.norm;
            for k in 0..c {
                let at = (b * c + k) * len + t;
                if k == y {
                    d[at] = d[at] - T::one();
                }
                d[at] = d[at] * s;
            }
        }
        vec![Some(d)]
    }
}
