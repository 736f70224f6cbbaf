use mvgcca::dual::{
    fit_gdmcca, fit_gkmcca_from_data, implied_loadings, transform_dual, transform_kernel,
};
use mvgcca::eval::{classification_accuracy, clustering_accuracy, fit_pca, kmeans, knn_classify};
use mvgcca::io::{load_dataset, read_labels, save_dataset, write_labels};
use mvgcca::kernels::{center_kernel, kernel_from_spec};
use mvgcca::mcca::{fit_gmcca, fit_mcca, transform_primal};
use mvgcca::synth::{generate, SynthSpec};
use mvgcca::{CdForm, KernelSpec, Matrix, Model};

fn separable() -> mvgcca::synth::SynthData {
    generate(&SynthSpec {
        n: 120,
        dims: vec![8, 6, 5],
        noise_std: 0.3,
        separation: 6.0,
        p_in: 0.2,
        seed: 11,
        ..Default::default()
    })
    .unwrap()
}

#[test]
fn separable_data_clusters_cleanly() {
    let s = separable();
    let model = fit_gmcca(&s.data, &s.graph.laplacian(), 1.0, 2).unwrap();
    let acc = clustering_accuracy(&kmeans(&model.s_hat, 2, 3).unwrap(), &s.labels).unwrap();
    assert!(acc >= 0.95, "accuracy {acc}");
    let pca = fit_pca(&s.data, 2).unwrap();
    let acc = clustering_accuracy(&kmeans(&pca.s_hat, 2, 3).unwrap(), &s.labels).unwrap();
    assert!(acc >= 0.95, "pca accuracy {acc}");
}

#[test]
fn disk_round_trip_preserves_embedding() {
    let s = separable();
    let dir = tempfile::tempdir().unwrap();
    let paths = save_dataset(&s.data, dir.path(), "view").unwrap();
    let loaded = load_dataset(&paths).unwrap();
    assert_eq!(loaded.views(), s.data.views());
    let labels = dir.path().join("labels.csv");
    write_labels(&labels, &s.labels).unwrap();
    assert_eq!(read_labels(&labels, s.labels.len()).unwrap(), s.labels);

    let model = fit_gmcca(&loaded, &s.graph.laplacian(), 0.5, 2).unwrap();
    let path = dir.path().join("model.json");
    Model::from(model.clone()).save(&path).unwrap();
    let Model::Primal(back) = Model::load(&path).unwrap() else {
        panic!("expected a primal model");
    };
    let centered = loaded.center_with(&model.view_means).unwrap();
    assert_eq!(
        transform_primal(&model, centered.views()).unwrap(),
        transform_primal(&back, centered.views()).unwrap()
    );
}

#[test]
fn dual_transform_matches_implied_primal() {
    let s = separable();
    let train = s.data.center().0;
    let model = fit_gdmcca(
        &train,
        &s.graph.laplacian(),
        0.1,
        &[0.05],
        2,
        CdForm::Derived,
    )
    .unwrap();
    let u = implied_loadings(&model, &train).unwrap();
    let direct: Matrix = u
        .iter()
        .zip(train.views())
        .map(|(u, x)| u.transpose() * x)
        .sum();
    let via = transform_dual(&model, &train, train.views()).unwrap();
    assert!((direct - via).amax() < 1e-9);
}

#[test]
fn kernel_transform_of_training_samples_uses_centered_kernels() {
    let s = separable();
    let specs = [
        KernelSpec::Gaussian { sigma: 3.0 },
        KernelSpec::Linear,
        KernelSpec::Gaussian { sigma: 2.0 },
    ];
    let model =
        fit_gkmcca_from_data(&s.data, &specs, &s.graph.laplacian(), 0.1, &[0.1], 2).unwrap();
    let mut expected = Matrix::zeros(2, s.data.num_samples());
    for ((x, spec), a) in s.data.views().iter().zip(specs).zip(&model.duals) {
        let k = center_kernel(&kernel_from_spec(x, spec).unwrap()).unwrap();
        expected += a.transpose() * k.matrix();
    }
    let got = transform_kernel(&model, &s.data, s.data.views()).unwrap();
    assert!((expected - got).amax() < 1e-8);
}

#[test]
fn classification_on_held_out_half() {
    let s = separable();
    let model = fit_mcca(&s.data, 2).unwrap();
    let centered = s.data.center_with(&model.view_means).unwrap();
    let emb = transform_primal(&model, centered.views()).unwrap();
    let train: Vec<usize> = (0..emb.ncols()).step_by(2).collect();
    let test: Vec<usize> = (1..emb.ncols()).step_by(2).collect();
    let pick = |idx: &[usize]| Matrix::from_fn(2, idx.len(), |r, c| emb[(r, idx[c])]);
    let pred = knn_classify(
        &pick(&train),
        &train.iter().map(|&i| s.labels[i]).collect::<Vec<_>>(),
        &pick(&test),
        3,
    )
    .unwrap();
    let truth: Vec<usize> = test.iter().map(|&i| s.labels[i]).collect();
    assert!(classification_accuracy(&pred, &truth).unwrap() >= 0.95);
}
