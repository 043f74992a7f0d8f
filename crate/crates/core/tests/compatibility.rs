mod common;

use std::collections::BTreeMap;
use std::f64::consts::FRAC_1_SQRT_2;

use common::*;
use outfitfuse_core::compatibility::{
    loss_comp, loss_vse, loss_vsim, pair_score, total_loss, triplet_loss, LossTerms, LossWeights,
    TypePairSpaces,
};
use outfitfuse_core::dataset::TypePair;
use outfitfuse_core::model::{FusionKind, Model};
use outfitfuse_core::numerics::{grad_check, ParamStore, Tensor};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn v(x: &[f64]) -> Tensor {
    Tensor::vector(x.to_vec())
}

fn nonzero_vec(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-5.0f64..5.0, n)
        .prop_filter("non-zero", |x| x.iter().any(|v| v.abs() > 1e-3))
}

proptest! {
    #[test]
    fn triplet_loss_is_bounded_and_zero_means_satisfied(
        (a, p, n) in (1usize..10).prop_flat_map(|d| (nonzero_vec(d), nonzero_vec(d), nonzero_vec(d))),
        m in 0.01f64..1.0,
    ) {
        let l = triplet_loss(&v(&a), &v(&p), &v(&n), m).unwrap();
        prop_assert!(l >= 0.0 && l <= m + 2.0);
        prop_assert!((l - triplet(&a, &p, &n, m)).abs() < 1e-12);
        if l == 0.0 {
            prop_assert!(cosine(&a, &p) - cosine(&a, &n) >= m - 1e-12);
        }
    }

    #[test]
    fn vsim_matches_two_term_oracle((x, pos, neg) in (1usize..8).prop_flat_map(|d| (nonzero_vec(d), nonzero_vec(d), nonzero_vec(d)))) {
        let got = loss_vsim([&v(&x), &v(&pos), &v(&neg)], 0.2).unwrap();
        let want = (triplet(&pos, &neg, &x, 0.2) + triplet(&neg, &pos, &x, 0.2)) / 2.0;
        prop_assert!((got - want).abs() < 1e-12);
        let swapped = loss_vsim([&v(&x), &v(&neg), &v(&pos)], 0.2).unwrap();
        prop_assert!((got - swapped).abs() < 1e-15);
    }

    #[test]
    fn comp_matches_project_then_triplet(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let spaces = TypePairSpaces::init(&mut store, &mut rng, [TypePair::new(0, 1)], 4, 6);
        let w = store.get(spaces.get(1, 0).unwrap()).clone();
        let reps: Vec<Tensor> = (0..3).map(|_| random_tensor(&mut rng, &[6], 1.0)).collect();
        let got = loss_comp([&reps[0], &reps[1], &reps[2]], (1, 0), &spaces, &store, 0.2).unwrap();
        let pr: Vec<Vec<f64>> = reps.iter().map(|r| mat_vec(&w, r.data())).collect();
        prop_assert!((got - triplet(&pr[0], &pr[1], &pr[2], 0.2)).abs() < 1e-12);
    }

    #[test]
    fn pair_score_is_symmetric_and_matches_pipeline(seed in any::<u64>(), kind in 0usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ds = random_dataset(&mut rng, tiny_dims(), 3, 2);
        let model = Model::init(small_config(FusionKind::ALL[kind], 6), tiny_dims(), &all_pairs(3), seed).unwrap();
        for a in ds.items() {
            for b in ds.items() {
                let ab = model.pair_score(a, b).unwrap().unwrap();
                prop_assert_eq!(ab, model.pair_score(b, a).unwrap().unwrap());
                prop_assert!((-1.0..=1.0).contains(&ab));
                prop_assert!((ab - pair_score_oracle(&model, a, b).unwrap()).abs() < 1e-10);
            }
        }
    }
}

#[test]
fn triplet_loss_examples() {
    assert!(
        (triplet_loss(&v(&[1.0, 2.0]), &v(&[0.3, 1.0]), &v(&[0.3, 1.0]), 0.2).unwrap() - 0.2).abs()
            < 1e-15
    );
    assert_eq!(
        triplet_loss(&v(&[1.0, 0.0]), &v(&[2.0, 0.0]), &v(&[-1.0, 0.0]), 0.2).unwrap(),
        0.0
    );
    let l = triplet_loss(
        &v(&[1.0, 0.0]),
        &v(&[0.0, 1.0]),
        &v(&[0.5, 0.75f64.sqrt()]),
        0.2,
    )
    .unwrap();
    assert!((l - 0.7).abs() < 1e-12);
    assert!(triplet_loss(&v(&[0.0, 0.0]), &v(&[1.0, 0.0]), &v(&[1.0, 0.0]), 0.2).is_err());
}

#[test]
fn vse_hand_built_case() {
    let images = [v(&[1.0, 0.0]), v(&[0.0, 1.0]), v(&[1.0, 1.0])];
    let texts = [v(&[0.0, 1.0]), v(&[1.0, 0.0]), v(&[1.0, 1.0])];
    let got = loss_vse(
        [&images[0], &images[1], &images[2]],
        [&texts[0], &texts[1], &texts[2]],
        0.2,
    )
    .unwrap();
    // images 0 and 1: own text orthogonal, the others at cosine 1 and 1/√2;
    // image 2: own text at cosine 1 keeps both terms at zero
    let per_image = ((1.0 + 0.2) + (FRAC_1_SQRT_2 + 0.2)) / 2.0;
    assert!((got - 2.0 * per_image / 3.0).abs() < 1e-12);
}

#[test]
fn vse_degenerate_and_aligned_geometry() {
    let e = |i: usize| Tensor::from_fn(&[3], |j| if i == j { 1.0 } else { 0.0 });
    let (e0, e1, e2) = (e(0), e(1), e(2));
    assert_eq!(
        loss_vse([&e0, &e1, &e2], [&e0, &e1, &e2], 0.2).unwrap(),
        0.0
    );
    let t = v(&[0.3, -1.0, 2.0]);
    let same = loss_vse([&e0, &e1, &e2], [&t, &t, &t], 0.2).unwrap();
    assert!((same - 0.2).abs() < 1e-15);
}

#[test]
fn comp_and_score_with_identity_space() {
    let mut store = ParamStore::new();
    let id = store.add("space", Tensor::identity(2));
    let spaces = TypePairSpaces::from_map(BTreeMap::from([(TypePair::new(0, 1), id)]));
    let (a, orth) = (v(&[1.0, 0.0]), v(&[0.0, 1.0]));
    assert_eq!(
        loss_comp([&a, &a, &orth], (0, 1), &spaces, &store, 0.2).unwrap(),
        0.0
    );
    assert!(
        (loss_comp([&a, &orth, &orth], (0, 1), &spaces, &store, 0.2).unwrap() - 0.2).abs() < 1e-15
    );
    assert!(loss_comp([&a, &a, &orth], (0, 2), &spaces, &store, 0.2).is_err());
    assert_eq!(
        pair_score((0, &a), (1, &a), &spaces, &store).unwrap(),
        Some(1.0)
    );
    assert_eq!(
        pair_score((0, &a), (1, &orth), &spaces, &store).unwrap(),
        Some(0.0)
    );
    assert_eq!(pair_score((0, &a), (0, &a), &spaces, &store).unwrap(), None);
}

#[test]
fn total_loss_weighting() {
    let ones = LossTerms {
        comp: 1.0,
        vsim: 1.0,
        tsim: 1.0,
        vse: 1.0,
    };
    assert!((total_loss(&ones, &LossWeights::default()) - 1.0051).abs() < 1e-15);
    let zero = LossWeights {
        vsim: 0.0,
        tsim: 0.0,
        vse: 0.0,
        margin: 0.2,
    };
    let terms = LossTerms {
        comp: 0.37,
        vsim: 5.0,
        tsim: 2.0,
        vse: 1.0,
    };
    assert_eq!(total_loss(&terms, &zero), 0.37);
}

#[test]
fn total_loss_gradients_for_every_kind() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let dims = tiny_dims();
    let ds = random_dataset(&mut rng, dims, 3, 2);
    let items = [&ds.items()[0], &ds.items()[2], &ds.items()[3]];
    let unit = LossWeights {
        vsim: 1.0,
        tsim: 1.0,
        vse: 1.0,
        margin: 0.2,
    };
    for kind in FusionKind::ALL {
        let model = Model::init(small_config(kind, 8), dims, &all_pairs(3), 9).unwrap();
        for weights in [LossWeights::default(), unit] {
            let report = grad_check(
                &model.store,
                |tape, s| Ok(model.layout.objective_on(tape, s, items, &weights)?.0),
                1e-6,
                1e-4,
            )
            .unwrap();
            assert!(
                report.passed(),
                "{kind}: {:?}",
                report.failures().collect::<Vec<_>>()
            );
        }
    }
}

#[test]
fn representations_have_the_fused_width() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let ds = random_dataset(&mut rng, tiny_dims(), 2, 1);
    for kind in FusionKind::ALL {
        let config = small_config(kind, 6);
        let model = Model::init(config, tiny_dims(), &all_pairs(2), 1).unwrap();
        let rep = model.represent(&ds.items()[0]).unwrap();
        assert_eq!(rep.len(), if kind.is_attention() { 12 } else { 6 });
        assert!(rep.is_finite());
    }
}
