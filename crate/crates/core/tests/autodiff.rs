mod common;

use std::rc::Rc;

use common::{fd_check, random_tensor, rng};
use hinimp::autodiff::{concat_cols, concat_rows, Adam, AdamConfig, ParamStore, Tape, Tensor};
use hinimp::Error;
use proptest::prelude::*;

fn t(rows: usize, cols: usize, d: &[f64]) -> Tensor {
    Tensor::new(rows, cols, d.to_vec()).unwrap()
}

#[test]
fn tanh_slope_at_zero() {
    let tape = Tape::new();
    let x = tape.leaf(Tensor::scalar(0.0));
    let g = tape.backward(x.tanh().sum()).unwrap();
    assert_eq!(g.wrt(x).unwrap().item(), 1.0);
}

#[test]
fn softmax_of_equal_entries() {
    let tape = Tape::new();
    let x = tape.constant(t(1, 3, &[2.5, 2.5, 2.5]));
    let y = x.softmax_rows().value();
    for &p in y.data() {
        assert!((p - 1.0 / 3.0).abs() < 1e-15);
    }
}

#[test]
fn gather_and_scatter_back() {
    let tape = Tape::new();
    let x = tape.leaf(t(1, 3, &[10.0, 20.0, 30.0]));
    let y = x.gather_cols(vec![2, 0, 1], 3).unwrap();
    assert_eq!(y.value().data(), &[30.0, 10.0, 20.0]);
    let g = tape.backward(y.sum()).unwrap();
    assert_eq!(g.wrt(x).unwrap().data(), &[1.0, 1.0, 1.0]);
}

#[test]
fn gather_inverse_gather_is_identity() {
    let tape = Tape::new();
    let x = tape.leaf(t(1, 4, &[1.0, 2.0, 3.0, 4.0]));
    let perm = vec![3, 1, 0, 2];
    let mut inv = vec![0; 4];
    for (i, &p) in perm.iter().enumerate() {
        inv[p] = i;
    }
    let y = x.gather_cols(perm, 4).unwrap().gather_cols(inv, 4).unwrap();
    assert_eq!(y.value().data(), x.value().data());
    let w = tape.constant(t(1, 4, &[5.0, 6.0, 7.0, 8.0]));
    let g = tape.backward(y.dot(w).unwrap()).unwrap();
    assert_eq!(g.wrt(x).unwrap().data(), &[5.0, 6.0, 7.0, 8.0]);
}

#[test]
fn sum_and_dot_gradients() {
    let tape = Tape::new();
    let p = tape.leaf(t(1, 3, &[0.3, -1.0, 2.0]));
    let g = tape.backward(p.sum()).unwrap();
    assert_eq!(g.wrt(p).unwrap().data(), &[1.0, 1.0, 1.0]);

    let tape = Tape::new();
    let a = tape.leaf(t(1, 3, &[1.0, 2.0, 3.0]));
    let b = tape.leaf(t(1, 3, &[4.0, -5.0, 6.0]));
    let g = tape.backward(a.dot(b).unwrap()).unwrap();
    assert_eq!(g.wrt(a).unwrap().data(), b.value().data());
}

#[test]
fn backward_twice_fails() {
    let tape = Tape::new();
    let p = tape.leaf(Tensor::scalar(1.0));
    let s = p.sum();
    tape.backward(s).unwrap();
    assert!(matches!(tape.backward(s), Err(Error::Tape(_))));
}

#[test]
fn shape_errors_name_both_shapes() {
    let tape = Tape::new();
    let a = tape.leaf(Tensor::zeros(2, 3));
    let b = tape.leaf(Tensor::zeros(2, 3));
    let err = a.matmul(b).unwrap_err().to_string();
    assert!(err.contains("[2, 3]"), "{err}");
    assert!(a.add(tape.leaf(Tensor::zeros(3, 2))).is_err());
}

#[test]
fn composite_graph_matches_finite_differences() {
    let mut r = rng(11);
    let ins = vec![
        random_tensor(&mut r, 3, 4),
        random_tensor(&mut r, 4, 2),
        random_tensor(&mut r, 1, 2),
        random_tensor(&mut r, 3, 2),
        random_tensor(&mut r, 1, 1),
    ];
    let err = fd_check(&ins, 1e-6, 1e-3, |_, v| {
        let h = v[0].matmul(v[1]).unwrap().add_row(v[2]).unwrap().tanh();
        let s = h.mul(v[3]).unwrap().softmax_rows();
        let c = concat_cols(&[s, h.square()]).unwrap();
        c.mul_scalar(v[4]).unwrap().mean()
    });
    assert!(err < 1e-5, "max rel err {err}");
}

#[test]
fn indexed_ops_match_finite_differences() {
    let mut r = rng(12);
    let ins = vec![random_tensor(&mut r, 5, 6), random_tensor(&mut r, 7, 2), random_tensor(&mut r, 5, 6)];
    let err = fd_check(&ins, 1e-6, 1e-3, |tape, v| {
        let rows = Rc::new(vec![0, 2, 2, 4, 1, 3, 0]);
        let g = v[0].gather_rows(rows.clone()).unwrap(); // 7x6
        let seg = Rc::new(vec![0, 0, 1, 1, 1, 2, 2]);
        let att = v[1].segment_softmax(seg, 3).unwrap(); // 7x2
        let scaled = g.scale_blocks(att).unwrap();
        let back = scaled.scatter_add_rows(rows, 5).unwrap(); // 5x6
        let d = back.block_row_dot(v[2], 3).unwrap(); // 5x3
        let sl = v[2].slice_cols(1, 4).unwrap().reshape(3, 5).unwrap();
        let z = concat_rows(&[d.reshape(3, 5).unwrap(), sl]).unwrap();
        let k = Rc::new(vec![1.0, -2.0, 0.5, 3.0, 1.5, 0.25]);
        let w = tape.constant(Tensor::filled(6, 5, 0.3));
        z.scale_rows_const(k).unwrap().tanh().dot(w).unwrap().scale(2.0).sub(v[0].gather_cols(vec![5; 5], 1).unwrap().sum()).unwrap()
    });
    assert!(err < 1e-5, "max rel err {err}");
}

#[test]
fn adam_zero_gradient_is_a_no_op() {
    let mut store = ParamStore::new();
    let id = store.add("w", t(1, 2, &[1.0, -1.0]), true);
    let mut adam = Adam::new(&store, AdamConfig::default());
    let tape = Tape::new();
    let w = tape.param(&store, id);
    let g = tape.backward(w.scale(0.0).sum()).unwrap();
    adam.step(&mut store, g).unwrap();
    assert_eq!(store.value(id).data(), &[1.0, -1.0]);
    assert_eq!(adam.step_count(), 1);
}

#[test]
fn adam_constant_gradient_step_tends_to_lr() {
    let mut store = ParamStore::new();
    let id = store.add("w", Tensor::scalar(0.0), true);
    let mut adam = Adam::new(&store, AdamConfig::default());
    let mut last = 0.0;
    for _ in 0..1000 {
        let before = store.value(id).item();
        let tape = Tape::new();
        let w = tape.param(&store, id);
        let g = tape.backward(w.scale(3.0).sum()).unwrap();
        adam.step(&mut store, g).unwrap();
        last = before - store.value(id).item();
    }
    assert!((last - 1e-3).abs() < 1e-5, "{last}");
    assert_eq!(adam.step_count(), 1000);
}

#[test]
fn adam_rejects_nan_with_name() {
    let mut store = ParamStore::new();
    let id = store.add("encoder.w_out", Tensor::scalar(0.0), true);
    let mut adam = Adam::new(&store, AdamConfig::default());
    let tape = Tape::new();
    let w = tape.param(&store, id);
    let g = tape.backward(w.scale(f64::NAN).sum()).unwrap();
    let err = adam.step(&mut store, g).unwrap_err().to_string();
    assert!(err.contains("encoder.w_out"), "{err}");
}

#[test]
fn frozen_params_get_no_gradient() {
    let mut store = ParamStore::new();
    let id = store.add("ref", Tensor::scalar(2.0), false);
    let tape = Tape::new();
    let w = tape.param(&store, id);
    let x = tape.leaf(Tensor::scalar(1.0));
    let g = tape.backward(w.mul(x).unwrap().sum()).unwrap();
    assert!(g.param(id).is_none());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn random_shapes_match_finite_differences(seed in 0u64..1_000_000, m in 1usize..4, k in 1usize..4, n in 1usize..4) {
        let mut r = rng(seed);
        let ins = vec![random_tensor(&mut r, m, k), random_tensor(&mut r, k, n), random_tensor(&mut r, m, n)];
        let err = fd_check(&ins, 1e-6, 1e-3, |_, v| {
            let p = v[0].matmul(v[1]).unwrap();
            let q = p.sub(v[2]).unwrap().tanh().softmax_rows();
            q.mul(p).unwrap().square().sum()
        });
        prop_assert!(err < 1e-5, "max rel err {}", err);
    }

    #[test]
    fn softmax_rows_are_distributions(seed in 0u64..1_000_000, m in 1usize..6, n in 1usize..8) {
        let mut r = rng(seed);
        let tape = Tape::new();
        let y = tape.constant(random_tensor(&mut r, m, n).clone()).scale(30.0).softmax_rows().value();
        for i in 0..m {
            let s: f64 = y.row(i).iter().sum();
            prop_assert!((s - 1.0).abs() < 1e-12);
            prop_assert!(y.row(i).iter().all(|&p| p > 0.0));
        }
    }
}
