use super::block::wiring;
use super::{Slot, VariantConfig};
use crate::error::{Error, Result};
use crate::layers::Family;

fn conv_count(family: Family, in_ch: usize, out_ch: usize, kernel: usize, cfg: &VariantConfig) -> usize {
    let conn = in_ch * out_ch * kernel;
    match family {
        Family::Standard => conn + out_ch,
        Family::Gkan => conn * (cfg.degree + 1) + if cfg.gkan_base_term { conn } else { 0 },
    }
}

/// Learnable-scalar count of the encoder described by `cfg`, computed from
/// layer formulas without building it.
pub fn model_param_count(cfg: &VariantConfig) -> usize {
    let (w, inner) = (cfg.width, cfg.width * cfg.expansion);
    let ([fs, fe, fp], extra) = wiring(cfg.variant);
    let mut block = conv_count(fs, w, w, cfg.kernel, cfg)
        + conv_count(fe, w, inner, 1, cfg)
        + conv_count(fp, inner, w, 1, cfg);
    if let Some((slot, family)) = extra {
        debug_assert!(matches!(slot, Slot::Pre | Slot::Post | Slot::Mid));
        block += conv_count(family, w, w, 1, cfg);
    }
    if cfg.channel_affine {
        block += 2 * w;
    }
    conv_count(Family::Standard, cfg.n_features, w, 1, cfg)
        + cfg.n_blocks * block
        + conv_count(Family::Standard, w, cfg.n_classes, 1, cfg)
}

/// Largest width whose model fits in `budget` parameters; every other field
/// of `cfg` is held fixed.
pub fn width_for_budget(cfg: &VariantConfig, budget: usize) -> Result<usize> {
    let count = |w: usize| model_param_count(&cfg.with_width(w));
    let minimum = count(1);
    if minimum > budget {
        return Err(Error::Infeasible {
            variant: cfg.variant.to_string(),
            budget,
            minimum,
        });
    }
    // count is strictly increasing in w
    let mut hi = 2;
    while count(hi) <= budget {
        hi *= 2;
    }
    let mut lo = hi / 2;
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if count(mid) <= budget {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

#[cfg(test)]
mod tests {
    use super::super::Variant;
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn hand_computed_counts() {
        // stem 40·72+72, five blocks of (72·72·5+72) + (72·432+432) + (432·72+72), head 72·13+13
        assert_eq!(model_param_count(&VariantConfig::new(Variant::Mlp, 72)), 447_421);
        // stem 2542, five blocks of 19282 + 23436 + 23126 + 62·62·4, head 819
        assert_eq!(model_param_count(&VariantConfig::new(Variant::GkanPost, 62)), 409_461);
    }

    #[test]
    fn monotone_in_width_and_gkan_dominates() {
        for v in Variant::ALL {
            for w in 1..80 {
                let cfg = VariantConfig::new(v, w);
                assert!(model_param_count(&cfg.with_width(w + 1)) > model_param_count(&cfg));
            }
        }
        for w in 1..80 {
            assert!(
                model_param_count(&VariantConfig::new(Variant::Gkan, w))
                    > model_param_count(&VariantConfig::new(Variant::Mlp, w))
            );
        }
    }

    #[test]
    fn round_trip_width() {
        let cfg = VariantConfig::new(Variant::Mlp, 72);
        assert_eq!(width_for_budget(&cfg, model_param_count(&cfg)).unwrap(), 72);
    }

    #[test]
    fn infeasible_budget() {
        let cfg = VariantConfig::new(Variant::Gkan, 1);
        assert!(matches!(width_for_budget(&cfg, 10), Err(Error::Infeasible { .. })));
    }

    proptest! {
        #[test]
        fn solver_brackets_budget(budget in 1_000usize..600_000, vi in 0usize..8) {
            let cfg = VariantConfig::new(Variant::ALL[vi], 1);
            if let Ok(w) = width_for_budget(&cfg, budget) {
                prop_assert!(model_param_count(&cfg.with_width(w)) <= budget);
                prop_assert!(model_param_count(&cfg.with_width(w + 1)) > budget);
            }
        }
    }
}
