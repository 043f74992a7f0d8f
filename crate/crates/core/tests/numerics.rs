mod common;

use common::naive_matmul;
use outfitfuse_core::numerics::{
    cosine_similarity, elementwise, matmul, softmax, softmax_slice, AdamConfig, AdamState,
    BinaryOp, ElementwiseOp, Gradients, ParamStore, Tensor, UnaryOp,
};
use proptest::prelude::*;

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = Tensor> {
    prop::collection::vec(-10.0f64..10.0, rows * cols)
        .prop_map(move |d| Tensor::matrix(rows, cols, d).unwrap())
}

fn vector(len: usize) -> impl Strategy<Value = Tensor> {
    prop::collection::vec(-10.0f64..10.0, len).prop_map(Tensor::vector)
}

fn product_pair() -> impl Strategy<Value = (Tensor, Tensor)> {
    (1usize..=16, 1usize..=16, 1usize..=16).prop_flat_map(|(m, k, n)| (matrix(m, k), matrix(k, n)))
}

proptest! {
    #[test]
    fn matmul_matches_triple_loop((a, b) in product_pair()) {
        let (m, k, n) = (a.rows(), a.cols(), b.cols());
        let got = matmul(&a, &b).unwrap();
        let want = naive_matmul(a.data(), m, k, b.data(), n);
        prop_assert_eq!(got.shape(), &[m, n][..]);
        for (g, w) in got.data().iter().zip(&want) {
            prop_assert!((g - w).abs() <= 1e-12 * (1.0 + w.abs()));
        }
    }

    #[test]
    fn matmul_vector_operands((a, v) in (1usize..=12, 1usize..=12).prop_flat_map(|(m, k)| (matrix(m, k), vector(k)))) {
        let got = matmul(&a, &v).unwrap();
        let want = naive_matmul(a.data(), a.rows(), a.cols(), v.data(), 1);
        prop_assert_eq!(got.shape(), &[a.rows()][..]);
        for (g, w) in got.data().iter().zip(&want) {
            prop_assert!((g - w).abs() <= 1e-12 * (1.0 + w.abs()));
        }
    }

    #[test]
    fn softmax_is_a_distribution(v in prop::collection::vec(-50.0f64..50.0, 1..40)) {
        let s = softmax_slice(&v).unwrap();
        prop_assert!(s.iter().all(|&p| p >= 0.0));
        prop_assert!((s.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn softmax_shift_invariant(v in prop::collection::vec(-20.0f64..20.0, 1..30), c in -100.0f64..100.0) {
        let a = softmax(&Tensor::vector(v.clone())).unwrap();
        let b = softmax(&Tensor::vector(v.iter().map(|x| x + c).collect())).unwrap();
        for (x, y) in a.data().iter().zip(b.data()) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn cosine_symmetric_bounded_scale_free(
        (x, y) in (1usize..20).prop_flat_map(|n| (vector(n), vector(n))),
        s in 0.01f64..100.0,
        t in 0.01f64..100.0,
    ) {
        prop_assume!(x.norm() > 1e-6 && y.norm() > 1e-6);
        let c = cosine_similarity(&x, &y).unwrap();
        prop_assert!((-1.0..=1.0).contains(&c));
        prop_assert!((c - cosine_similarity(&y, &x).unwrap()).abs() < 1e-15);
        let c2 = cosine_similarity(&x.map(|v| v * s), &y.map(|v| v * t)).unwrap();
        prop_assert!((c - c2).abs() < 1e-12);
    }

    #[test]
    fn broadcast_matches_loop((a, v) in (1usize..10, 1usize..10).prop_flat_map(|(r, c)| (matrix(r, c), vector(r)))) {
        for (op, f) in [
            (BinaryOp::Add, (|x, y| x + y) as fn(f64, f64) -> f64),
            (BinaryOp::Sub, |x, y| x - y),
            (BinaryOp::Mul, |x, y| x * y),
        ] {
            let got = elementwise(ElementwiseOp::Binary(op), &a, Some(&v)).unwrap();
            for i in 0..a.rows() {
                for j in 0..a.cols() {
                    prop_assert_eq!(got.at(i, j), f(a.at(i, j), v.data()[i]));
                }
            }
        }
    }
}

#[test]
fn documented_values() {
    let a = Tensor::matrix(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
    let b = Tensor::matrix(2, 2, vec![5.0, 6.0, 7.0, 8.0]).unwrap();
    assert_eq!(matmul(&a, &b).unwrap().data(), &[19.0, 22.0, 43.0, 50.0]);

    let s = softmax_slice(&[1.0, 2.0, 3.0]).unwrap();
    let e: Vec<f64> = [1.0f64, 2.0, 3.0].iter().map(|v| v.exp()).collect();
    let z: f64 = e.iter().sum();
    for (got, want) in s.iter().zip(e.iter().map(|v| v / z)) {
        assert!((got - want).abs() < 1e-15);
    }

    let c = cosine_similarity(
        &Tensor::vector(vec![1.0, 0.0]),
        &Tensor::vector(vec![1.0, 1.0]),
    )
    .unwrap();
    assert!((c - 1.0 / 2f64.sqrt()).abs() < 1e-15);

    let x = Tensor::vector(vec![-4.0, 0.0, 9.0]);
    let r = elementwise(ElementwiseOp::Unary(UnaryOp::SignedSqrt), &x, None).unwrap();
    assert_eq!(r.data(), &[-2.0, 0.0, 3.0]);
}

#[test]
fn zero_vector_cosine_and_empty_softmax_are_errors() {
    assert!(cosine_similarity(
        &Tensor::vector(vec![0.0, 0.0]),
        &Tensor::vector(vec![1.0, 0.0])
    )
    .is_err());
    assert!(softmax_slice(&[]).is_err());
    assert!(matmul(&Tensor::zeros(&[2, 3]), &Tensor::zeros(&[2, 3])).is_err());
}

#[test]
fn adam_matches_closed_form() {
    let mut store = ParamStore::new();
    let id = store.add("p", Tensor::vector(vec![1.0, -2.0]));
    let config = AdamConfig {
        learning_rate: 0.1,
        ..AdamConfig::default()
    };
    let mut state = AdamState::new(config, &store);
    let grads_seq = [[0.5, -1.0], [0.2, 0.3], [-0.4, 0.1]];
    let (mut m, mut v, mut p) = ([0.0f64; 2], [0.0f64; 2], [1.0f64, -2.0]);
    for (t, g) in grads_seq.iter().enumerate() {
        let mut grads = Gradients::new();
        grads.insert(id, Tensor::vector(g.to_vec()));
        state.step(&mut store, &grads).unwrap();
        let t = (t + 1) as i32;
        for i in 0..2 {
            m[i] = 0.9 * m[i] + 0.1 * g[i];
            v[i] = 0.999 * v[i] + 0.001 * g[i] * g[i];
            let mh = m[i] / (1.0 - 0.9f64.powi(t));
            let vh = v[i] / (1.0 - 0.999f64.powi(t));
            p[i] -= 0.1 * mh / (vh.sqrt() + 1e-8);
        }
        for (got, want) in store.get(id).data().iter().zip(&p) {
            assert!((got - want).abs() < 1e-14);
        }
    }
    assert_eq!(state.steps(), 3);
}
