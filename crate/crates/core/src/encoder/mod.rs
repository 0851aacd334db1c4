//! LiCo-Net encoder: an input stem, a stack of LiCo-Blocks and a per-frame
//! classification head, in eight block layouts.

mod block;
mod budget;
mod checkpoint;
mod model;

use std::fmt;
use std::str::FromStr;

pub use block::{LicoBlock, Slot};
pub use budget::{model_param_count, width_for_budget};
pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, CHECKPOINT_MAGIC};
pub use model::Model;

use crate::error::{Error, Result};

/// Block layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Variant {
    /// All three convolutions standard.
    Mlp,
    /// Spatial convolution replaced by GKAN.
    GkanMlp,
    /// Both pointwise convolutions replaced by GKAN.
    MlpGkan,
    /// Every convolution GKAN.
    Gkan,
    /// Standard block plus a `w→w` GKAN layer before the expansion.
    GkanPre,
    /// Standard block plus a `w→w` GKAN layer after the projection.
    GkanPost,
    /// Standard block plus a `w→w` GKAN path parallel to the pointwise pair.
    GkanMid,
    /// Standard block plus a `w→w` standard layer after the projection.
    MlpPost,
}

impl Variant {
    pub const ALL: [Variant; 8] = [
        Variant::Mlp,
        Variant::GkanMlp,
        Variant::MlpGkan,
        Variant::Gkan,
        Variant::GkanPre,
        Variant::GkanPost,
        Variant::GkanMid,
        Variant::MlpPost,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Mlp => "MLP",
            Variant::GkanMlp => "GKAN_MLP",
            Variant::MlpGkan => "MLP_GKAN",
            Variant::Gkan => "GKAN",
            Variant::GkanPre => "GKAN_pre",
            Variant::GkanPost => "GKAN_post",
            Variant::GkanMid => "GKAN_mid",
            Variant::MlpPost => "MLP_post",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    /// Case-insensitive; `-` and `_` are interchangeable.
    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_uppercase().replace('-', "_");
        Variant::ALL
            .into_iter()
            .find(|v| v.name().to_ascii_uppercase() == norm)
            .ok_or_else(|| Error::contract(format!("unknown variant `{s}`")))
    }
}

/// Full architectural description of an encoder.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VariantConfig {
    pub variant: Variant,
    /// Spatial kernel size `K`.
    pub kernel: usize,
    /// Expansion ratio `e`.
    pub expansion: usize,
    /// Channel width `w`.
    pub width: usize,
    pub degree: usize,
    pub n_blocks: usize,
    pub n_classes: usize,
    pub n_features: usize,
    /// Adds the `w·silu(x)` base term to every GKAN connection.
    pub gkan_base_term: bool,
    /// Per-channel scale/offset before each residual add.
    pub channel_affine: bool,
}

impl VariantConfig {
    pub fn new(variant: Variant, width: usize) -> Self {
        VariantConfig {
            variant,
            kernel: 5,
            expansion: 6,
            width,
            degree: 3,
            n_blocks: 5,
            n_classes: 13,
            n_features: 40,
            gkan_base_term: false,
            channel_affine: false,
        }
    }

    pub fn with_width(&self, width: usize) -> Self {
        VariantConfig {
            width,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("kernel", self.kernel),
            ("expansion", self.expansion),
            ("width", self.width),
            ("degree", self.degree),
            ("n_blocks", self.n_blocks),
            ("n_classes", self.n_classes),
            ("n_features", self.n_features),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::contract(format!("{name} must be at least 1")));
            }
        }
        Ok(())
    }

    /// `key=value` lines, one per field.
    pub fn to_text(&self) -> String {
        format!(
            "variant={}\nkernel={}\nexpansion={}\nwidth={}\ndegree={}\nn_blocks={}\nn_classes={}\nn_features={}\ngkan_base_term={}\nchannel_affine={}\n",
            self.variant,
            self.kernel,
            self.expansion,
            self.width,
            self.degree,
            self.n_blocks,
            self.n_classes,
            self.n_features,
            self.gkan_base_term,
            self.channel_affine
        )
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |msg: String| Error::format("variant config", msg);
        let mut cfg = VariantConfig::new(Variant::Mlp, 1);
        let mut seen_variant = false;
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| bad(format!("expected key=value, got `{line}`")))?;
            let int = || {
                v.parse::<usize>()
                    .map_err(|_| bad(format!("`{k}` expects an integer, got `{v}`")))
            };
            let flag = || {
                v.parse::<bool>()
                    .map_err(|_| bad(format!("`{k}` expects true/false, got `{v}`")))
            };
            match k {
                "variant" => {
                    cfg.variant = v.parse()?;
                    seen_variant = true;
                }
                "kernel" => cfg.kernel = int()?,
                "expansion" => cfg.expansion = int()?,
                "width" => cfg.width = int()?,
                "degree" => cfg.degree = int()?,
                "n_blocks" => cfg.n_blocks = int()?,
                "n_classes" => cfg.n_classes = int()?,
                "n_features" => cfg.n_features = int()?,
                "gkan_base_term" => cfg.gkan_base_term = flag()?,
                "channel_affine" => cfg.channel_affine = flag()?,
                other => return Err(bad(format!("unknown key `{other}`"))),
            }
        }
        if !seen_variant {
            return Err(bad("missing `variant`".into()));
        }
        cfg.validate()?;
        Ok(cfg)
    }
}
