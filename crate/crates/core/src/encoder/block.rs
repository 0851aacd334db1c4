use rand::Rng;

use super::{Variant, VariantConfig};
use crate::error::Result;
use crate::layers::{residual_add, ChannelAffine, Conv1d, ConvLayer, Family, GkanConv1d, Layer};
use crate::scalar::Scalar;
use crate::tensor::{Param, Tape, Var};

/// Position of a convolution inside a block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Slot {
    Spatial,
    /// Extra layer before the expansion pointwise.
    Pre,
    Expand,
    Project,
    /// Extra layer after the projection pointwise.
    Post,
    /// Extra layer parallel to the pointwise pair.
    Mid,
}

/// One LiCo-Block: spatial conv (kernel `K`), expand pointwise (`w→e·w`),
/// project pointwise (`e·w→w`), an optional extra layer, and a residual
/// connection around the whole block.
///
/// Standard convolutions in the spatial and expand slots are followed by
/// ReLU; GKAN layers carry their own nonlinearity and are not.
#[derive(Debug, Clone)]
pub struct LicoBlock<T> {
    pub spatial: ConvLayer<T>,
    pub expand: ConvLayer<T>,
    pub project: ConvLayer<T>,
    pub extra: Option<(Slot, ConvLayer<T>)>,
    pub affine: Option<ChannelAffine<T>>,
}

fn make<T: Scalar>(
    family: Family,
    name: &str,
    in_ch: usize,
    out_ch: usize,
    kernel: usize,
    cfg: &VariantConfig,
    rng: &mut impl Rng,
) -> ConvLayer<T> {
    match family {
        Family::Standard => ConvLayer::Standard(Conv1d::new(name, in_ch, out_ch, kernel, true, rng)),
        Family::Gkan => ConvLayer::Gkan(GkanConv1d::new(
            name,
            in_ch,
            out_ch,
            kernel,
            cfg.degree,
            cfg.gkan_base_term,
            rng,
        )),
    }
}

/// Families of (spatial, expand, project) and the optional extra layer.
pub(super) fn wiring(variant: Variant) -> ([Family; 3], Option<(Slot, Family)>) {
    use Family::{Gkan, Standard};
    match variant {
        Variant::Mlp => ([Standard; 3], None),
        Variant::GkanMlp => ([Gkan, Standard, Standard], None),
        Variant::MlpGkan => ([Standard, Gkan, Gkan], None),
        Variant::Gkan => ([Gkan; 3], None),
        Variant::GkanPre => ([Standard; 3], Some((Slot::Pre, Gkan))),
        Variant::GkanPost => ([Standard; 3], Some((Slot::Post, Gkan))),
        Variant::GkanMid => ([Standard; 3], Some((Slot::Mid, Gkan))),
        Variant::MlpPost => ([Standard; 3], Some((Slot::Post, Standard))),
    }
}

impl<T: Scalar> LicoBlock<T> {
    pub fn new(name: &str, cfg: &VariantConfig, rng: &mut impl Rng) -> Self {
        let (w, inner) = (cfg.width, cfg.width * cfg.expansion);
        let ([fs, fe, fp], extra) = wiring(cfg.variant);
        let spatial = make(fs, &format!("{name}.spatial"), w, w, cfg.kernel, cfg, rng);
        let expand = make(fe, &format!("{name}.expand"), w, inner, 1, cfg, rng);
        let project = make(fp, &format!("{name}.project"), inner, w, 1, cfg, rng);
        let extra = extra.map(|(slot, family)| {
            let label = match slot {
                Slot::Pre => "pre",
                Slot::Post => "post",
                _ => "mid",
            };
            (slot, make(family, &format!("{name}.{label}"), w, w, 1, cfg, rng))
        });
        LicoBlock {
            spatial,
            expand,
            project,
            extra,
            affine: cfg
                .channel_affine
                .then(|| ChannelAffine::new(&format!("{name}.affine"), w)),
        }
    }

    /// (slot, family) of every convolution in execution order.
    pub fn layout(&self) -> Vec<(Slot, Family)> {
        let mut out = vec![(Slot::Spatial, self.spatial.family())];
        if let Some((Slot::Pre, l)) = &self.extra {
            out.push((Slot::Pre, l.family()));
        }
        out.push((Slot::Expand, self.expand.family()));
        out.push((Slot::Project, self.project.family()));
        if let Some((slot @ (Slot::Post | Slot::Mid), l)) = &self.extra {
            out.push((*slot, l.family()));
        }
        out
    }

    fn activate<'t>(layer: &ConvLayer<T>, v: Var<'t, T>) -> Var<'t, T> {
        match layer.family() {
            Family::Standard => v.relu(),
            Family::Gkan => v,
        }
    }
}

impl<T: Scalar> Layer<T> for LicoBlock<T> {
    fn forward<'t>(&self, tape: &'t Tape<T>, x: Var<'t, T>) -> Result<Var<'t, T>> {
        let mut h = Self::activate(&self.spatial, self.spatial.forward(tape, x)?);
        if let Some((Slot::Pre, pre)) = &self.extra {
            h = pre.forward(tape, h)?;
        }
        let p = Self::activate(&self.expand, self.expand.forward(tape, h)?);
        let mut p = self.project.forward(tape, p)?;
        match &self.extra {
            Some((Slot::Post, post)) => p = post.forward(tape, p)?,
            Some((Slot::Mid, mid)) => p = p.add(mid.forward(tape, h)?)?,
            _ => {}
        }
        if let Some(affine) = &self.affine {
            p = affine.forward(tape, p)?;
        }
        residual_add(x, p)
    }

    fn params(&self) -> Vec<&Param<T>> {
        let mut out = self.spatial.params();
        out.extend(self.expand.params());
        out.extend(self.project.params());
        if let Some((_, l)) = &self.extra {
            out.extend(l.params());
        }
        if let Some(a) = &self.affine {
            out.extend(a.params());
        }
        out
    }

    fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        let mut out = self.spatial.params_mut();
        out.extend(self.expand.params_mut());
        out.extend(self.project.params_mut());
        if let Some((_, l)) = &mut self.extra {
            out.extend(l.params_mut());
        }
        if let Some(a) = &mut self.affine {
            out.extend(a.params_mut());
        }
        out
    }

    fn param_count(&self) -> usize {
        self.spatial.param_count()
            + self.expand.param_count()
            + self.project.param_count()
            + self.extra.as_ref().map_or(0, |(_, l)| l.param_count())
            + self.affine.as_ref().map_or(0, |a| a.param_count())
    }
}
