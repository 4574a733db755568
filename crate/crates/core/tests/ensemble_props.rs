use nalgebra::DVector;
use proptest::prelude::*;
use rand_distr::{Distribution, StandardNormal};
use randprior::ensemble::{
    data_noise, fit_ensemble, fit_member, EnsembleConfig, EnsembleMember, NoiseProcedure, PriorFn,
    RegressionData,
};
use randprior::linear::{
    exact_posterior, prior_function_fit, Dataset, LinearGaussianModel, MomentReport, Perturbation,
};
use randprior::rng::rng_from_seed;
use randprior::{AdamConfig, Mlp};

/// Inputs plus a constant column, so the linear net's bias is an ordinary
/// coefficient for the closed-form oracle.
fn linear_problem(n: usize, seed: u64) -> (Vec<Vec<f64>>, Dataset) {
    let mut rng = rng_from_seed(seed);
    let truth = [0.7, -1.3, 0.4];
    let mut rows = Vec::new();
    let mut aug = Vec::new();
    let mut ys = Vec::new();
    for _ in 0..n {
        let x: Vec<f64> = (0..2).map(|_| StandardNormal.sample(&mut rng)).collect();
        let z: f64 = StandardNormal.sample(&mut rng);
        ys.push(truth[0] * x[0] + truth[1] * x[1] + truth[2] + z);
        aug.push(vec![x[0], x[1], 1.0]);
        rows.push(x);
    }
    (rows, Dataset::from_rows(&aug, &ys).unwrap())
}

/// Fit a linear member to one perturbation and return its effective
/// coefficients (trained + prior), laid out as (w1, w2, bias).
fn fit_linear_member(
    rows: &[Vec<f64>],
    model: &LinearGaussianModel,
    pert: &Perturbation,
) -> DVector<f64> {
    let n = rows.len();
    let prior_net = Mlp::from_params(&[2, 1], pert.prior_draw.iter().cloned().collect()).unwrap();
    let member = EnsembleMember::new(
        Mlp::zeros(&[2, 1]).unwrap(),
        PriorFn::from_net(prior_net, 1.0).unwrap(),
        AdamConfig::with_learning_rate(0.01),
    )
    .unwrap();
    // Mean loss + c‖θ‖² has the same minimiser as Σ loss/σ² + ‖θ‖²/λ when c = σ²/(λn).
    let mut member = member.anchored_to(vec![0.0; 3], model.ridge() / n as f64);
    let targets = pert.targets.iter().map(|y| vec![*y]).collect();
    let data = RegressionData::new(rows.to_vec(), targets).unwrap();
    fit_member(&mut member, &data, 6000, n, 0).unwrap();
    let theta: Vec<f64> = member
        .net
        .params()
        .iter()
        .zip(member.prior.net().params())
        .map(|(a, b)| a + b)
        .collect();
    DVector::from_vec(theta)
}

#[test]
fn linear_member_converges_to_closed_form_sample() {
    let (rows, data) = linear_problem(20, 3);
    let model = LinearGaussianModel::isotropic(3, 1.0, 1.0).unwrap();
    for s in 0..5 {
        let pert = Perturbation::draw(&model, &data, s);
        let oracle = prior_function_fit(&model, &data, &pert).unwrap();
        let fitted = fit_linear_member(&rows, &model, &pert);
        let err = (&fitted - &oracle).amax();
        assert!(err < 1e-3, "seed {s}: fitted {fitted} oracle {oracle}");
    }
}

#[test]
fn linear_members_reproduce_posterior_moments() {
    let (rows, data) = linear_problem(20, 8);
    let model = LinearGaussianModel::isotropic(3, 1.0, 1.0).unwrap();
    let samples: Vec<DVector<f64>> = (0..400)
        .map(|s| fit_linear_member(&rows, &model, &Perturbation::draw(&model, &data, 1000 + s)))
        .collect();
    let post = exact_posterior(&model, &data).unwrap();
    let report = MomentReport::compare(&samples, &post);
    assert!(report.max_mean_z() < 4.0, "{report:?}");
    assert!(report.covariance_rel_error < 0.25, "{report:?}");
}

fn gallery_data() -> RegressionData {
    let xs: Vec<f64> = (0..=10).map(|i| (i as f64 - 5.0) / 5.0).collect();
    let ys: Vec<f64> = (0..=10).map(|i| if i == 10 { 5.0 } else { 0.0 }).collect();
    RegressionData::scalar(&xs, &ys).unwrap()
}

#[test]
fn prior_ensemble_interpolates_and_disagrees_off_data() {
    let cfg = EnsembleConfig {
        prior_scale: 3.0,
        seed: 11,
        ..Default::default()
    };
    let ens = fit_ensemble(&gallery_data(), 20, &cfg).unwrap();
    for r in &ens.train_residuals {
        assert!(*r < 1e-2, "residual {r}");
    }
    let on = ens.predict(&[0.0]).unwrap().std[0];
    let off = ens.predict(&[-2.0]).unwrap().std[0];
    assert!(off > 10.0 * on, "off-data std {off}, on-data std {on}");
}

#[test]
fn priors_are_untouched_by_training() {
    let cfg = EnsembleConfig {
        prior_scale: 3.0,
        steps: 200,
        seed: 5,
        ..Default::default()
    };
    let ens = fit_ensemble(&gallery_data(), 4, &cfg).unwrap();
    for (k, m) in ens.members.iter().enumerate() {
        let fresh = cfg.build_member(k, 1, 1).unwrap();
        assert_eq!(m.prior, fresh.prior);
        assert_ne!(m.net.params(), fresh.net.params());
    }
}

#[test]
fn ensemble_is_deterministic_in_seed() {
    let cfg = EnsembleConfig {
        prior_scale: 1.0,
        steps: 100,
        seed: 9,
        ..Default::default()
    };
    let a = fit_ensemble(&gallery_data(), 3, &cfg).unwrap();
    let b = fit_ensemble(&gallery_data(), 3, &cfg).unwrap();
    for (x, y) in a.members.iter().zip(&b.members) {
        assert_eq!(x.net.params(), y.net.params());
    }
}

#[test]
fn posterior_covariance_shrinks_with_duplicated_data() {
    let (_, data) = linear_problem(10, 1);
    let model = LinearGaussianModel::isotropic(3, 1.0, 1.0).unwrap();
    let once = exact_posterior(&model, &data).unwrap();
    let ten = exact_posterior(&model, &data.repeated(10)).unwrap();
    let ratio = ten.covariance.trace() / once.covariance.trace();
    assert!(ratio < 0.2, "trace ratio {ratio}");
}

proptest! {
    #[test]
    fn bootstrap_rows_come_from_the_data(seed in any::<u64>(), n in 1usize..30) {
        let xs: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 * x).collect();
        let data = RegressionData::scalar(&xs, &ys).unwrap();
        let boot = data_noise(&data, NoiseProcedure::Bootstrap, seed);
        prop_assert_eq!(boot.len(), n);
        for (x, y) in boot.inputs().iter().zip(boot.targets()) {
            prop_assert_eq!(y[0], 2.0 * x[0]);
            prop_assert!(xs.contains(&x[0]));
        }
    }

    #[test]
    fn gaussian_noise_keeps_inputs(seed in any::<u64>(), sigma in 0.0f64..3.0) {
        let data = gallery_data();
        let noisy = data_noise(&data, NoiseProcedure::Gaussian { sigma }, seed);
        prop_assert_eq!(noisy.inputs(), data.inputs());
    }
}
