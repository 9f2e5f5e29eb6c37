use hinimp::metrics::*;
use proptest::prelude::*;

fn pairs() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (2usize..40).prop_flat_map(|n| (prop::collection::vec(-10.0f64..10.0, n), prop::collection::vec(-10.0f64..10.0, n)))
}

#[test]
fn worked_examples() {
    let (mae, rmse, nrmse) = regression_metrics(&[1.0, 2.0, 3.0], &[1.0, 2.0, 5.0], NrmseNorm::Range).unwrap();
    assert!((mae - 2.0 / 3.0).abs() < 1e-12);
    assert!((rmse - (4.0f64 / 3.0).sqrt()).abs() < 1e-12);
    assert!((nrmse - rmse / 4.0).abs() < 1e-12);
    assert!(regression_metrics(&[1.0, 1.0], &[2.0, 2.0], NrmseNorm::Range).unwrap().2.is_nan());
    assert_eq!(average_ranks(&[3.0, 1.0, 3.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
    assert!(regression_metrics(&[1.0], &[1.0, 2.0], NrmseNorm::Range).is_err());
}

proptest! {
    #[test]
    fn errors_are_ordered((p, y) in pairs()) {
        let (mae, rmse, _) = regression_metrics(&p, &y, NrmseNorm::Range).unwrap();
        prop_assert!(mae >= 0.0 && mae <= rmse + 1e-12);
        prop_assert_eq!(regression_metrics(&y, &y, NrmseNorm::Range).unwrap().0, 0.0);
    }

    #[test]
    fn spearman_is_bounded_and_rank_only((p, y) in pairs()) {
        let s = spearman(&p, &y).unwrap();
        prop_assert!(s.is_nan() || (-1.0 - 1e-12..=1.0 + 1e-12).contains(&s));
        let warped: Vec<f64> = p.iter().map(|x| x.exp()).collect();
        let s2 = spearman(&warped, &y).unwrap();
        prop_assert!((s.is_nan() && s2.is_nan()) || (s - s2).abs() < 1e-12);
        let self_s = spearman(&y, &y).unwrap();
        prop_assert!(self_s.is_nan() || (self_s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ndcg_is_a_normalized_gain((p, y) in pairs(), k in 1usize..50) {
        let v = ndcg(&p, &y, k).unwrap();
        prop_assert!(v.is_nan() || (-1e-12..=1.0 + 1e-12).contains(&v));
        let ideal = ndcg(&y, &y, k).unwrap();
        prop_assert!(ideal.is_nan() || (ideal - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ranks_are_a_permutation_average(x in prop::collection::vec(-3i32..3, 1..30)) {
        let xf: Vec<f64> = x.iter().map(|&v| v as f64).collect();
        let r = average_ranks(&xf);
        let n = xf.len() as f64;
        prop_assert!((r.iter().sum::<f64>() - n * (n + 1.0) / 2.0).abs() < 1e-9);
    }
}
