use rand::Rng;

use super::block::LicoBlock;
use super::{Slot, VariantConfig};
use crate::error::{Error, Result};
use crate::layers::{Conv1d, Family, Layer};
use crate::scalar::Scalar;
use crate::tensor::{Param, Tape, Tensor, Var};

/// Stem (`n_features→w`, kernel 1) → blocks → head (`w→n_classes`, kernel 1).
#[derive(Debug, Clone)]
pub struct Model<T> {
    cfg: VariantConfig,
    pub stem: Conv1d<T>,
    pub blocks: Vec<LicoBlock<T>>,
    pub head: Conv1d<T>,
}

impl<T: Scalar> Model<T> {
    pub fn new(cfg: &VariantConfig, rng: &mut impl Rng) -> Result<Self> {
        cfg.validate()?;
        let stem = Conv1d::new("stem", cfg.n_features, cfg.width, 1, true, rng);
        let blocks = (0..cfg.n_blocks)
            .map(|i| LicoBlock::new(&format!("blocks.{i}"), cfg, rng))
            .collect();
        let head = Conv1d::new("head", cfg.width, cfg.n_classes, 1, true, rng);
        Ok(Model {
            cfg: cfg.clone(),
            stem,
            blocks,
            head,
        })
    }

    pub fn config(&self) -> &VariantConfig {
        &self.cfg
    }

    /// Per-frame logits `B×n_classes×T` for features `B×n_features×T`.
    pub fn forward<'t>(&self, tape: &'t Tape<T>, features: Var<'t, T>) -> Result<Var<'t, T>> {
        let shape = features.shape();
        if shape.len() != 3 || shape[1] != self.cfg.n_features {
            return Err(Error::Dimension {
                op: "encoder input",
                left: shape,
                right: vec![self.cfg.n_features],
            });
        }
        let mut h = self.stem.forward(tape, features)?;
        for block in &self.blocks {
            h = block.forward(tape, h)?;
        }
        self.head.forward(tape, h)
    }

    /// Inference convenience: logits for a features tensor.
    pub fn logits(&self, features: &Tensor<T>) -> Result<Tensor<T>> {
        let tape = Tape::new();
        let out = self.forward(&tape, tape.leaf(features.clone()))?;
        let v = out.value().clone();
        Ok(v.with_requires_grad(false))
    }

    pub fn params(&self) -> Vec<&Param<T>> {
        let mut out = self.stem.params();
        for b in &self.blocks {
            out.extend(b.params());
        }
        out.extend(self.head.params());
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        let mut out = self.stem.params_mut();
        for b in &mut self.blocks {
            out.extend(b.params_mut());
        }
        out.extend(self.head.params_mut());
        out
    }

    pub fn param_count(&self) -> usize {
        self.stem.param_count()
            + self.blocks.iter().map(|b| b.param_count()).sum::<usize>()
            + self.head.param_count()
    }

    /// Per-block (slot, family) sequence.
    pub fn layout(&self) -> Vec<Vec<(Slot, Family)>> {
        self.blocks.iter().map(LicoBlock::layout).collect()
    }

    /// Gradients of this model's parameters recorded on `tape`, in
    /// [`Model::params`] order; parameters the loss did not reach get zeros.
    pub fn grads_from(&self, tape: &Tape<T>) -> Vec<Vec<T>> {
        self.params()
            .iter()
            .map(|p| {
                tape.param_grad(p.key())
                    .unwrap_or_else(|| vec![T::zero(); p.numel()])
            })
            .collect()
    }

    /// Adds gradients from `tape` into each parameter's grad buffer.
    pub fn accumulate_grads(&mut self, tape: &Tape<T>) -> Result<()> {
        for p in self.params_mut() {
            if let Some(g) = tape.param_grad(p.key()) {
                p.tensor.accumulate_grad(&g)?;
            }
        }
        Ok(())
    }

    pub fn zero_grads(&mut self) {
        for p in self.params_mut() {
            p.tensor.zero_grad();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::{model_param_count, Variant};
    use super::*;
    use crate::testutil::{assert_grad_close, central_difference, random_tensor};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tiny(variant: Variant) -> VariantConfig {
        VariantConfig {
            kernel: 3,
            expansion: 2,
            n_blocks: 2,
            n_features: 4,
            n_classes: 5,
            ..VariantConfig::new(variant, 6)
        }
    }

    #[test]
    fn default_scale_shapes_and_finiteness() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for v in Variant::ALL {
            let cfg = VariantConfig::new(v, 12);
            let model = Model::<f64>::new(&cfg, &mut rng).unwrap();
            let logits = model.logits(&Tensor::zeros(&[2, 40, 9])).unwrap();
            assert_eq!(logits.shape(), [2, 13, 9]);
            assert!(logits.all_finite());
            assert_eq!(model.blocks.len(), 5);
        }
    }

    #[test]
    fn built_count_matches_formula_and_numel() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for v in Variant::ALL {
            for (base, affine) in [(false, false), (true, true)] {
                let cfg = VariantConfig {
                    gkan_base_term: base,
                    channel_affine: affine,
                    ..VariantConfig::new(v, 7)
                };
                let model = Model::<f64>::new(&cfg, &mut rng).unwrap();
                let numel: usize = model
                    .params()
                    .iter()
                    .filter(|p| p.tensor.requires_grad())
                    .map(|p| p.numel())
                    .sum();
                assert_eq!(model.param_count(), numel, "{v}");
                assert_eq!(model_param_count(&cfg), numel, "{v}");
            }
        }
    }

    #[test]
    fn rejects_wrong_feature_dim() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let model = Model::<f64>::new(&VariantConfig::new(Variant::Mlp, 4), &mut rng).unwrap();
        assert!(matches!(
            model.logits(&Tensor::zeros(&[1, 39, 5])),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn identical_batch_rows_give_identical_logits() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let model = Model::<f64>::new(&tiny(Variant::GkanMid), &mut rng).unwrap();
        let one = random_tensor(&[1, 4, 8], 4);
        let mut two = one.data().to_vec();
        two.extend_from_slice(one.data());
        let logits = model.logits(&Tensor::new(&[2, 4, 8], two).unwrap()).unwrap();
        let (a, b) = logits.data().split_at(5 * 8);
        assert_eq!(a, b);
    }

    #[test]
    fn tiny_end_to_end_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = random_tensor(&[1, 4, 6], 6);
        let r = random_tensor(&[1, 5, 6], 7);
        for v in Variant::ALL {
            let model = Model::<f64>::new(&tiny(v), &mut rng).unwrap();
            let loss_of = |m: &Model<f64>| -> f64 {
                let l = m.logits(&x).unwrap();
                l.data().iter().zip(r.data()).map(|(a, b)| a * b).sum()
            };
            let tape = Tape::new();
            let out = model.forward(&tape, tape.leaf(x.clone())).unwrap();
            tape.backward(out.mul(tape.leaf(r.clone())).unwrap().sum()).unwrap();
            let grads = model.grads_from(&tape);
            let mut probe = model.clone();
            for (i, g) in grads.iter().enumerate() {
                let start = probe.params()[i].tensor.clone();
                let fd = central_difference(&start, 1e-5, |t| {
                    probe.params_mut()[i].tensor = t.clone();
                    loss_of(&probe)
                });
                probe.params_mut()[i].tensor = start;
                assert_grad_close(g, &fd, 1e-4);
            }
        }
    }

    #[test]
    fn accumulate_then_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut model = Model::<f64>::new(&tiny(Variant::Mlp), &mut rng).unwrap();
        let x = random_tensor(&[1, 4, 5], 1);
        let tape = Tape::new();
        let loss = model.forward(&tape, tape.leaf(x)).unwrap().sum();
        tape.backward(loss).unwrap();
        model.accumulate_grads(&tape).unwrap();
        let g = model.head.weight.tensor.grad().unwrap().to_vec();
        assert!(g.iter().any(|v| *v != 0.0));
        model.zero_grads();
        assert!(model.head.weight.tensor.grad().unwrap().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn f32_model_runs() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let model = Model::<f32>::new(&tiny(Variant::GkanPost), &mut rng).unwrap();
        let out = model.logits(&Tensor::zeros(&[1, 4, 3])).unwrap();
        assert!(out.all_finite());
    }
}
