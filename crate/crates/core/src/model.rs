//! Full model: common-space projections, an optional fusion mechanism and the
//! type-pair compatibility spaces, with the per-triplet training objective.

use alloc::collections::BTreeSet;
use alloc::format;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::compatibility::{self, LossTerms, LossWeights, TypePairSpaces};
use crate::dataset::{Dims, Item, TypePair};
use crate::embedding::{BoundProjector, CommonSpaceProjector};
use crate::error::{Error, Result};
use crate::fusion::{self, CoAttentionParams, StackedAttentionParams};
use crate::numerics::{ParamStore, Tape, Tensor, Var};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FusionKind {
    Baseline,
    DotProduct,
    Stacked,
    CoAttention,
}

impl FusionKind {
    pub const ALL: [FusionKind; 4] = [
        FusionKind::Baseline,
        FusionKind::DotProduct,
        FusionKind::Stacked,
        FusionKind::CoAttention,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            FusionKind::Baseline => "baseline",
            FusionKind::DotProduct => "dot_product",
            FusionKind::Stacked => "stacked",
            FusionKind::CoAttention => "coattention",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.as_str() == s)
    }

    pub fn is_attention(&self) -> bool {
        *self != FusionKind::Baseline
    }
}

impl core::fmt::Display for FusionKind {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelConfig {
    pub fusion: FusionKind,
    /// d_g
    pub common_dim: usize,
    /// d_c
    pub compat_dim: usize,
    /// h, the stacked attention hidden size
    pub hidden_dim: usize,
    /// R
    pub hops: usize,
    /// p, the MFB expansion factor
    pub factor: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            fusion: FusionKind::Baseline,
            common_dim: 512,
            compat_dim: 512,
            hidden_dim: 512,
            hops: 2,
            factor: 2,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("common_dim", self.common_dim),
            ("compat_dim", self.compat_dim),
            ("hidden_dim", self.hidden_dim),
            ("hops", self.hops),
            ("factor", self.factor),
        ] {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        Ok(())
    }

    /// Width of the item representation fed to the compatibility spaces.
    pub fn representation_dim(&self) -> usize {
        if self.fusion.is_attention() {
            2 * self.common_dim
        } else {
            self.common_dim
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FusionParams {
    None,
    Stacked(StackedAttentionParams),
    CoAttention(CoAttentionParams),
}

/// Parameter handles and shapes; the values live in a [`ParamStore`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelLayout {
    pub config: ModelConfig,
    pub dims: Dims,
    pub projector: CommonSpaceProjector,
    pub fusion: FusionParams,
    pub spaces: TypePairSpaces,
}

/// Common-space image and description embeddings of one item, and the
/// representation scored in the compatibility spaces.
#[derive(Debug, Clone, Copy)]
pub struct Encoded {
    pub image: Var,
    pub text: Var,
    pub representation: Var,
}

impl ModelLayout {
    pub fn encode_on(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        proj: &BoundProjector,
        item: &Item,
    ) -> Result<Encoded> {
        let words = item.words.as_ref().ok_or_else(|| {
            Error::domain("encode", format!("item '{}' has no description", item.name))
        })?;
        let regions = tape.constant(item.regions.clone());
        let words = tape.constant(words.clone());
        let regions = proj.regions(tape, regions)?;
        let words = proj.words(tape, words)?;
        let image = tape.mean_rows(regions)?;
        let text = tape.mean_rows(words)?;
        let representation = match (&self.config.fusion, &self.fusion) {
            (FusionKind::Baseline, FusionParams::None) => image,
            (FusionKind::DotProduct, FusionParams::None) => {
                fusion::fuse_dot_product_on(tape, regions, text)?.output
            }
            (FusionKind::Stacked, FusionParams::Stacked(p)) => {
                fusion::fuse_stacked_on(tape, store, p, regions, text)?.output
            }
            (FusionKind::CoAttention, FusionParams::CoAttention(p)) => {
                fusion::fuse_coattention_on(tape, store, p, regions, words)?.output
            }
            (kind, _) => {
                return Err(Error::Consistency(format!(
                    "fusion parameters do not match kind {kind}"
                )))
            }
        };
        Ok(Encoded {
            image,
            text,
            representation,
        })
    }

    /// The loss terms and weighted total for one `[anchor, positive, negative]`
    /// item triplet.
    pub fn objective_on(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        items: [&Item; 3],
        weights: &LossWeights,
    ) -> Result<(Var, LossTerms<Var>)> {
        let proj = self.projector.bind(tape, store);
        let a = self.encode_on(tape, store, &proj, items[0])?;
        let p = self.encode_on(tape, store, &proj, items[1])?;
        let n = self.encode_on(tape, store, &proj, items[2])?;
        let images = [a.image, p.image, n.image];
        let texts = [a.text, p.text, n.text];
        let reps = [a.representation, p.representation, n.representation];
        let terms = LossTerms {
            comp: compatibility::loss_comp_on(
                tape,
                store,
                reps,
                (items[0].kind, items[1].kind),
                &self.spaces,
                weights.margin,
            )?,
            vsim: compatibility::loss_vsim_on(tape, images, weights.margin)?,
            tsim: compatibility::loss_tsim_on(tape, texts, weights.margin)?,
            vse: compatibility::loss_vse_on(tape, images, texts, weights.margin)?,
        };
        let total = compatibility::total_loss_on(tape, &terms, weights)?;
        Ok((total, terms))
    }

    pub fn represent(&self, store: &ParamStore, item: &Item) -> Result<Tensor> {
        let mut tape = Tape::new();
        let proj = self.projector.bind(&mut tape, store);
        let enc = self.encode_on(&mut tape, store, &proj, item)?;
        Ok(tape.value(enc.representation).clone())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub layout: ModelLayout,
    pub store: ParamStore,
}

impl Model {
    /// Fresh parameters for the given feature dims and trained type pairs.
    pub fn init(
        config: ModelConfig,
        dims: Dims,
        pairs: &BTreeSet<TypePair>,
        seed: u64,
    ) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let d = config.common_dim;
        let projector =
            CommonSpaceProjector::init(&mut store, &mut rng, d, dims.region_dim, dims.word_dim);
        let fusion = match config.fusion {
            FusionKind::Baseline | FusionKind::DotProduct => FusionParams::None,
            FusionKind::Stacked => FusionParams::Stacked(StackedAttentionParams::init(
                &mut store,
                &mut rng,
                config.hops,
                d,
                config.hidden_dim,
            )?),
            FusionKind::CoAttention => FusionParams::CoAttention(CoAttentionParams::init(
                &mut store,
                &mut rng,
                config.hops,
                config.factor,
                d,
            )?),
        };
        let spaces = TypePairSpaces::init(
            &mut store,
            &mut rng,
            pairs.iter().copied(),
            config.compat_dim,
            config.representation_dim(),
        );
        Ok(Self {
            layout: ModelLayout {
                config,
                dims,
                projector,
                fusion,
                spaces,
            },
            store,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.layout.config
    }

    pub fn represent(&self, item: &Item) -> Result<Tensor> {
        self.layout.represent(&self.store, item)
    }

    /// Compatibility of two items, `None` when their type pair was not trained.
    pub fn pair_score(&self, a: &Item, b: &Item) -> Result<Option<f64>> {
        if self.layout.spaces.get(a.kind, b.kind).is_none() {
            return Ok(None);
        }
        let ra = self.represent(a)?;
        let rb = self.represent(b)?;
        self.score_representations((a.kind, &ra), (b.kind, &rb))
    }

    pub fn score_representations(
        &self,
        a: (usize, &Tensor),
        b: (usize, &Tensor),
    ) -> Result<Option<f64>> {
        compatibility::pair_score(a, b, &self.layout.spaces, &self.store)
    }

    /// Loss terms and total for one item triplet, evaluated without gradients.
    pub fn objective(
        &self,
        items: [&Item; 3],
        weights: &LossWeights,
    ) -> Result<(f64, LossTerms<f64>)> {
        let mut tape = Tape::new();
        let (total, t) = self
            .layout
            .objective_on(&mut tape, &self.store, items, weights)?;
        let v = |x: Var| tape.value(x).item();
        Ok((
            v(total),
            LossTerms {
                comp: v(t.comp),
                vsim: v(t.vsim),
                tsim: v(t.tsim),
                vse: v(t.vse),
            },
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;

    fn dims() -> Dims {
        Dims {
            regions: 3,
            words: 2,
            region_dim: 5,
            word_dim: 4,
        }
    }

    fn item(kind: usize, seed: f64) -> Item {
        Item {
            name: "i".to_string(),
            kind,
            regions: Tensor::from_fn(&[3, 5], |i| libm::sin(seed + i as f64)),
            words: Some(Tensor::from_fn(&[2, 4], |i| {
                libm::cos(seed * 2.0 + i as f64)
            })),
            description: Some("d".to_string()),
        }
    }

    #[test]
    fn every_kind_encodes_to_its_width() {
        let pairs: BTreeSet<_> = [TypePair::new(0, 1)].into_iter().collect();
        for kind in FusionKind::ALL {
            let config = ModelConfig {
                fusion: kind,
                common_dim: 4,
                compat_dim: 3,
                hidden_dim: 5,
                ..Default::default()
            };
            let model = Model::init(config, dims(), &pairs, 7).unwrap();
            let rep = model.represent(&item(0, 0.3)).unwrap();
            assert_eq!(rep.len(), config.representation_dim());
            let (a, b) = (item(0, 0.1), item(1, 0.9));
            let s = model.pair_score(&a, &b).unwrap().unwrap();
            assert_eq!(Some(s), model.pair_score(&b, &a).unwrap());
            assert_eq!(model.pair_score(&a, &item(2, 0.0)).unwrap(), None);
            let (total, terms) = model
                .objective([&a, &b, &item(1, 2.0)], &LossWeights::default())
                .unwrap();
            assert!(
                (total - compatibility::total_loss(&terms, &LossWeights::default())).abs() < 1e-12
            );
        }
    }

    #[test]
    fn init_is_seeded() {
        let pairs: BTreeSet<_> = [TypePair::new(0, 1)].into_iter().collect();
        let c = ModelConfig {
            fusion: FusionKind::Stacked,
            common_dim: 4,
            compat_dim: 4,
            hidden_dim: 4,
            ..Default::default()
        };
        let a = Model::init(c, dims(), &pairs, 1).unwrap();
        assert_eq!(a, Model::init(c, dims(), &pairs, 1).unwrap());
        assert_ne!(a, Model::init(c, dims(), &pairs, 2).unwrap());
    }

    #[test]
    fn undescribed_item_is_rejected() {
        let pairs = BTreeSet::new();
        let model = Model::init(
            ModelConfig {
                common_dim: 2,
                compat_dim: 2,
                hidden_dim: 2,
                ..Default::default()
            },
            dims(),
            &pairs,
            0,
        )
        .unwrap();
        let mut it = item(0, 0.0);
        it.words = None;
        it.description = None;
        assert!(model.represent(&it).is_err());
    }

    #[test]
    fn kind_names_round_trip() {
        for k in FusionKind::ALL {
            assert_eq!(FusionKind::parse(k.as_str()), Some(k));
        }
        assert_eq!(FusionKind::parse("self"), None);
    }
}
