use std::path::PathBuf;

use ssvr_core::data::{fit_scaling, load_csv, make_folds, similarity_split};
use ssvr_core::model::{from_text, to_text};
use ssvr_core::{
    cross_validate, fit, grid_search, minimize, predict, synth, ColumnRef, CvScheme, Dataset, GridSpec, Hyperparams,
    KernelKind, KernelSpec, ModelParams, Problem, SolverConfig, Termination,
};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(name)
}

fn target() -> ColumnRef {
    ColumnRef::Name("pIC50".into())
}

fn gaussian(c: f64, gamma: f64) -> Hyperparams {
    Hyperparams::new(c, 0.1, 5.0, KernelSpec::gaussian(gamma).unwrap()).unwrap()
}

#[test]
fn shipped_descriptor_tables_have_the_expected_shape() {
    let full = load_csv(&fixture("descriptors_full.csv"), &target()).unwrap();
    assert_eq!((full.len(), full.n_features()), (100, 254));
    let reduced = load_csv(&fixture("descriptors_reduced.csv"), &target()).unwrap();
    assert_eq!((reduced.len(), reduced.n_features()), (100, 71));
    assert_eq!(full.targets, reduced.targets);

    let plan = similarity_split(&full, 0.25, 0).unwrap();
    assert_eq!((plan.train_indices.len(), plan.test_indices.len()), (75, 25));
}

#[test]
fn shipped_fixtures_match_their_generators() {
    let regenerated = synth::descriptor_table(100, 254, 2024);
    let loaded = load_csv(&fixture("descriptors_full.csv"), &target()).unwrap();
    assert_eq!(loaded.features.max_abs_diff(&regenerated.features), 0.0);
    assert_eq!(loaded.targets, regenerated.targets);

    let sinc = load_csv(&fixture("sinc.csv"), &ColumnRef::Name("y".into())).unwrap();
    assert_eq!(sinc.targets, synth::sinc(100, 0.05, 0).targets);
}

#[test]
fn table_shaped_train_evaluate_round_trip() {
    let d = load_csv(&fixture("descriptors_reduced.csv"), &target()).unwrap();
    let plan = similarity_split(&d, 0.25, 3).unwrap();
    let (train, test) = (d.select(&plan.train_indices), d.select(&plan.test_indices));
    let model = fit(&train, &gaussian(1e3, 0.01), &SolverConfig::default()).unwrap();
    assert_eq!(model.summary.termination, Termination::GradToleranceMet);
    assert_eq!(model.anchors.rows(), model.params.coeffs.len());

    let restored = from_text(&to_text(&model)).unwrap();
    let a = predict(&model, &test.features).unwrap();
    let b = predict(&restored, &test.features).unwrap();
    for (x, y) in a.iter().zip(b.iter()) {
        assert!((x - y).abs() <= 1e-12);
    }
}

#[test]
fn grid_best_is_consistent_with_its_folds() {
    let d = synth::descriptor_table(40, 15, 8);
    let spec = GridSpec {
        c_values: vec![10.0, 1e3],
        epsilon_values: vec![0.1],
        gamma_values: vec![0.02, 0.05, 0.1],
        alpha: 5.0,
        kernel: KernelKind::Gaussian,
        cv: CvScheme::KFold(5),
        seed: 4,
    };
    let result = grid_search(&d, &spec, &SolverConfig::default()).unwrap();
    assert_eq!(result.cells.len(), 6);
    let best = result.best();
    let outcome = best.outcome.as_ref().unwrap();
    let recomputed = outcome.per_fold.iter().sum::<f64>() / outcome.per_fold.len() as f64;
    assert!((recomputed - outcome.mean_rmse).abs() <= 1e-12);
    for cell in &result.cells {
        if let Some(r) = cell.mean_rmse() {
            assert!(best.mean_rmse().unwrap() <= r);
        }
    }

    let folds = make_folds(&d, 5, 4).unwrap();
    let direct = cross_validate(&d, &best.hyper, &folds, &SolverConfig::default()).unwrap();
    assert_eq!(direct.per_fold, outcome.per_fold);
}

#[test]
fn leave_one_out_has_one_fold_per_row() {
    let d = synth::linear(12, 2, 0.0, 1);
    let folds = CvScheme::LeaveOneOut.folds(&d, 0).unwrap();
    assert_eq!(folds.k, 12);
    let hyper = Hyperparams::new(1e3, 0.1, 5.0, KernelSpec::Linear).unwrap();
    let out = cross_validate(&d, &hyper, &folds, &SolverConfig::default()).unwrap();
    assert_eq!(out.per_fold.len(), 12);
    assert!(out.mean_rmse < 0.2);
}

#[test]
fn scaling_fit_on_training_rows_ignores_test_rows() {
    let d = synth::descriptor_table(30, 8, 5);
    let plan = similarity_split(&d, 0.3, 5).unwrap();
    let stats = fit_scaling(&d, &plan.train_indices).unwrap();
    let train_only: Dataset = d.select(&plan.train_indices);
    let all_train_rows: Vec<usize> = (0..train_only.len()).collect();
    assert_eq!(stats, fit_scaling(&train_only, &all_train_rows).unwrap());
}

#[test]
fn converged_runs_show_a_quadratic_tail() {
    let d = synth::sinc(80, 0.05, 2);
    let rows: Vec<usize> = (0..d.len()).collect();
    let z = fit_scaling(&d, &rows).unwrap().scale(&d.features).unwrap();
    let hyper = gaussian(100.0, 0.5);
    let design = ssvr_core::kernel::gram_matrix(&z, hyper.kernel());
    let p = Problem::new(design, d.targets.clone(), hyper).unwrap();
    let cfg = SolverConfig::default().with_grad_tol(1e-9).unwrap();
    let (_, report) = minimize(&p, ModelParams::zeros(p.design().cols()), &cfg).unwrap();
    assert_eq!(report.termination, Termination::GradToleranceMet);
    let ratios = report.quadratic_ratios();
    let tail = &ratios[ratios.len().saturating_sub(2)..];
    assert!(tail.iter().all(|r| *r < 1e6), "ratios {ratios:?}");
}
