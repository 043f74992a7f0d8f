//! Projection of region and word features into the common space, and
//! average pooling to image and description level.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::dataset::Item;
use crate::error::{Error, Result};
use crate::numerics::{self, ParamId, ParamStore, Tape, Tensor, Var};

/// Uniform in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`.
pub(crate) fn uniform_init(rng: &mut ChaCha8Rng, shape: &[usize], fan_in: usize) -> Tensor {
    let bound = 1.0 / libm::sqrt(fan_in as f64);
    Tensor::from_fn(shape, |_| rng.random_range(-bound..=bound))
}

/// `W_i` (d_g×d_i) and `W_s` (d_g×d_t).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CommonSpaceProjector {
    pub image: ParamId,
    pub text: ParamId,
}

impl CommonSpaceProjector {
    pub fn init(
        store: &mut ParamStore,
        rng: &mut ChaCha8Rng,
        common_dim: usize,
        region_dim: usize,
        word_dim: usize,
    ) -> Self {
        let image = store.add(
            "common.image",
            uniform_init(rng, &[common_dim, region_dim], region_dim),
        );
        let text = store.add(
            "common.text",
            uniform_init(rng, &[common_dim, word_dim], word_dim),
        );
        Self { image, text }
    }

    /// Transposed projections bound on a tape, so each row block is mapped by
    /// a single product `rows · Wᵀ`.
    pub fn bind(&self, tape: &mut Tape, store: &ParamStore) -> BoundProjector {
        let image = tape.param(store, self.image);
        let text = tape.param(store, self.text);
        BoundProjector {
            image_t: tape.transpose(image),
            text_t: tape.transpose(text),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct BoundProjector {
    image_t: Var,
    text_t: Var,
}

impl BoundProjector {
    pub fn regions(&self, tape: &mut Tape, regions: Var) -> Result<Var> {
        tape.matmul(regions, self.image_t)
    }

    pub fn words(&self, tape: &mut Tape, words: Var) -> Result<Var> {
        tape.matmul(words, self.text_t)
    }
}

/// Maps each region row of `item` by `W_i`, giving N×d_g.
pub fn project_regions(
    item: &Item,
    proj: &CommonSpaceProjector,
    store: &ParamStore,
) -> Result<Tensor> {
    numerics::matmul(&item.regions, &numerics::transpose(store.get(proj.image)))
}

/// Maps each word row of `item` by `W_s`, giving M×d_g.
pub fn project_words(
    item: &Item,
    proj: &CommonSpaceProjector,
    store: &ParamStore,
) -> Result<Tensor> {
    let words = item.words.as_ref().ok_or_else(|| {
        Error::domain(
            "project_words",
            alloc::format!("item '{}' has no description", item.name),
        )
    })?;
    numerics::matmul(words, &numerics::transpose(store.get(proj.text)))
}

/// Mean of the rows of a K×d matrix.
pub fn pool_average(rows: &Tensor) -> Result<Tensor> {
    numerics::mean_rows(rows)
}
