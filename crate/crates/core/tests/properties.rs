use mvgcca::eval::{
    clustering_accuracy, kmeans, precision_recall_mrr, rank_by_cosine, zscore, ClusterAssignment,
};
use mvgcca::Matrix;
use proptest::prelude::*;

fn matrix(rows: usize, cols: std::ops::Range<usize>) -> impl Strategy<Value = Matrix> {
    cols.prop_flat_map(move |c| {
        prop::collection::vec(-10.0f64..10.0, rows * c)
            .prop_map(move |v| Matrix::from_vec(rows, c, v))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn zscore_is_idempotent(e in matrix(3, 4..30)) {
        let z = zscore(&e);
        prop_assert!((zscore(&z) - &z).amax() <= 1e-9);
    }

    #[test]
    fn ranking_ignores_positive_query_scale(e in matrix(3, 5..30), q in prop::collection::vec(-1.0f64..1.0, 3), s in 0.01f64..100.0) {
        let a = rank_by_cosine(&q, &e).unwrap();
        let scaled: Vec<f64> = q.iter().map(|v| v * s).collect();
        let b = rank_by_cosine(&scaled, &e).unwrap();
        for (x, y) in a.similarity.iter().zip(&b.similarity) {
            prop_assert!((x - y).abs() <= 1e-12);
        }
    }

    #[test]
    fn metrics_stay_in_range_and_recall_grows(e in matrix(2, 6..25), q in prop::collection::vec(-1.0f64..1.0, 2), step in 2usize..4) {
        let n = e.ncols();
        let relevant: Vec<usize> = (0..n).step_by(step).collect();
        let r = rank_by_cosine(&q, &e).unwrap().with_relevant(&relevant);
        let mut prev = 0.0;
        for l in 1..=n {
            let m = precision_recall_mrr(std::slice::from_ref(&r), l).unwrap();
            for v in [m.precision, m.recall, m.mrr] {
                prop_assert!((0.0..=1.0).contains(&v));
            }
            prop_assert!(m.recall >= prev);
            prev = m.recall;
        }
        prop_assert!((prev - 1.0).abs() < 1e-12);
    }

    #[test]
    fn accuracy_ignores_label_names(labels in prop::collection::vec(0usize..3, 6..40), perm in Just([2usize, 0, 1])) {
        let truth: Vec<usize> = labels.iter().map(|&l| (l + 1) % 3).collect();
        let pred = ClusterAssignment::new(labels.clone(), 3).unwrap();
        let renamed = ClusterAssignment::new(labels.iter().map(|&l| perm[l]).collect(), 3).unwrap();
        let a = clustering_accuracy(&pred, &truth).unwrap();
        prop_assert!((a - 1.0).abs() < 1e-12);
        prop_assert!((clustering_accuracy(&renamed, &truth).unwrap() - a).abs() < 1e-12);
    }

    #[test]
    fn kmeans_is_deterministic(e in matrix(2, 6..40), seed in any::<u64>()) {
        prop_assert_eq!(kmeans(&e, 3, seed).unwrap(), kmeans(&e, 3, seed).unwrap());
    }
}
