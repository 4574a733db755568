use randprior::counterexamples::*;
use randprior::ensemble::EnsembleConfig;

fn quick_dropout(keep: f64) -> DropoutTraining {
    DropoutTraining {
        keep_probability: keep,
        steps: 300,
        samples: 200,
        ..Default::default()
    }
}

#[test]
fn full_keep_probability_has_no_spread() {
    let r = dropout_duplication_check(&quick_dropout(1.0), &gallery_data(), 10, 0.9, 3).unwrap();
    assert!(r.base.std < 1e-12 && r.duplicated.std < 1e-12);
}

#[test]
fn duplication_check_is_deterministic_and_rejects_factor_one() {
    let a = dropout_duplication_check(&quick_dropout(0.5), &gallery_data(), 2, 0.9, 8).unwrap();
    let b = dropout_duplication_check(&quick_dropout(0.5), &gallery_data(), 2, 0.9, 8).unwrap();
    assert_eq!(a, b);
    assert!(dropout_duplication_check(&quick_dropout(0.5), &gallery_data(), 1, 0.9, 8).is_err());
}

#[test]
fn suite_emits_one_row_per_method_scale_and_probe() {
    let cfg = SuiteConfig {
        probes: vec![-2.0, 0.0, 2.0],
        data_scales: vec![1, 10],
        ensemble_size: 3,
        ensemble: EnsembleConfig {
            steps: 50,
            ..Default::default()
        },
        dropout: quick_dropout(0.5),
        ..Default::default()
    };
    let rows = regression_uncertainty_suite(&cfg).unwrap();
    assert_eq!(rows.len(), 4 * 2 * 3);
    assert!(rows.iter().all(|r| r.summary.std >= 0.0));
    let csv: Vec<Vec<String>> = rows.iter().flat_map(|r| r.rows()).collect();
    assert!(csv
        .iter()
        .all(|row| row.len() == GalleryRow::header().len()));
}

#[test]
fn half_lambda_variant_disagreement_is_reported() {
    let c = dropout_closed_form(10, 0.5, 0.1, 2.0).unwrap();
    assert!((c.theta_bar - dropout_theta_bar(10, 0.5, 0.1, 2.0)).abs() < 1e-8);
    assert!((c.half_lambda_theta_bar - half_lambda_theta_bar(10, 0.5, 0.1, 2.0)).abs() < 1e-15);
    assert!(!c.agrees_with_half_lambda);
}
