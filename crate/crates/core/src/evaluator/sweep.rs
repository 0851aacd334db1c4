use std::fmt::Write as _;

use super::{evaluate, EvalConfig};
use crate::encoder::{width_for_budget, Model, Variant, VariantConfig};
use crate::error::{Error, Result};
use crate::frontend::{Manifest, Waveform};
use crate::rng::stream_rng;
use crate::trainer::{train, TrainConfig, TrainSet};

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    /// Architecture shared by every row; `variant` and `width` are replaced.
    pub template: VariantConfig,
    pub train: TrainConfig,
    pub eval: EvalConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub budget: usize,
    pub variant: Variant,
    pub width: Option<usize>,
    pub params: Option<usize>,
    /// Pooled FRR per target; empty for skipped rows.
    pub frr: Vec<f64>,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepTable {
    pub targets: Vec<f64>,
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    pub fn to_text(&self) -> String {
        let mut s = String::from("budget\tvariant\tw\tsize");
        for t in &self.targets {
            let _ = write!(s, "\tFRR@{t}");
        }
        s.push('\n');
        for r in &self.rows {
            let _ = write!(s, "{}\t{}", r.budget, r.variant);
            match (r.width, r.params) {
                (Some(w), Some(p)) => {
                    let _ = write!(s, "\t{w}\t{p}");
                    for f in &r.frr {
                        let _ = write!(s, "\t{:.2}", 100.0 * f);
                    }
                }
                _ => {
                    let _ = write!(s, "\t-\t-\t{}", r.note.as_deref().unwrap_or("skipped"));
                }
            }
            s.push('\n');
        }
        s
    }
}

/// For every budget and variant: solve the width, build, train, evaluate.
/// Infeasible budgets become skipped rows.
pub fn variant_sweep(
    budgets: &[usize],
    variants: &[Variant],
    cfg: &SweepConfig,
    train_set: &TrainSet,
    eval_pos: &Manifest,
    eval_neg: &Manifest,
    noise: &[Waveform],
) -> Result<SweepTable> {
    let mut rows = Vec::new();
    for &budget in budgets {
        for &variant in variants {
            let shape = VariantConfig {
                variant,
                ..cfg.template.clone()
            };
            let width = match width_for_budget(&shape, budget) {
                Ok(w) => w,
                Err(e @ Error::Infeasible { .. }) => {
                    rows.push(SweepRow {
                        budget,
                        variant,
                        width: None,
                        params: None,
                        frr: Vec::new(),
                        note: Some(format!("skipped: {e}")),
                    });
                    continue;
                }
                Err(e) => return Err(e),
            };
            let arch = shape.with_width(width);
            let mut model = Model::<f64>::new(&arch, &mut stream_rng(cfg.train.seed, "init", 0))?;
            train(&mut model, train_set, None, &cfg.train, None)?;
            let report = evaluate(&model, eval_pos, eval_neg, &cfg.eval, noise)?;
            rows.push(SweepRow {
                budget,
                variant,
                width: Some(width),
                params: Some(model.param_count()),
                frr: report.pooled_frr(),
                note: None,
            });
        }
    }
    Ok(SweepTable {
        targets: cfg.eval.targets.clone(),
        rows,
    })
}
