mod common;

use common::{gaussian_matrix, random_spd, rng};
use fwda_core::classifier::{
    fwda_score_with_log_weights, member_votes, raw_mean_vote, stabilized_mean_vote,
    training_moments,
};
use fwda_core::wishart::sample;
use fwda_core::{
    fit, fwda_score, gaussian_log_weight, lda_discriminant, plain_lda_predict, CovarianceMode,
    Ensemble, FitConfig, FwdaModel, Label, LabeledDataset, MemberVote, ModelParts, PrecisionSample,
    Variant,
};
use nalgebra::DVector;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;

/// Two Gaussian classes with means ±shift·e₁ and identity-plus-noise covariance.
fn two_gaussians(seed: u64, p: usize, per_class: usize, shift: f64) -> LabeledDataset {
    let mut r = rng(seed);
    let z = gaussian_matrix(&mut r, 2 * per_class, p);
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for i in 0..2 * per_class {
        let label = if i < per_class {
            Label::Positive
        } else {
            Label::Negative
        };
        let mut row: Vec<f64> = z.row(i).iter().copied().collect();
        row[0] += shift * label.as_f64();
        rows.push(row);
        labels.push(label);
    }
    LabeledDataset::from_rows(&rows, labels).unwrap()
}

fn random_model(seed: u64, p: usize, m: usize) -> FwdaModel {
    let mut r = rng(seed);
    let mut v = || {
        (0..p)
            .map(|_| r.random_range(-1.0..1.0))
            .collect::<Vec<f64>>()
    };
    let (g, a, b) = (v(), v(), v());
    let scale = random_spd(&mut rng(seed + 1), p, p + 3, 0.3);
    FwdaModel::from_parts(ModelParts {
        variant: Variant::Fwda,
        lambda: 1.0,
        ensemble_size: m,
        seed,
        dof_requested: (p + 2) as f64,
        global_mean: g,
        pos_mean: a,
        neg_mean: b,
        scale,
    })
    .unwrap()
}

#[test]
fn discriminant_matches_dense_oracle() {
    let mut r = rng(31);
    let theta = random_spd(&mut r, 4, 7, 0.1);
    let vecs: Vec<DVector<f64>> = (0..4)
        .map(|_| DVector::from_fn(4, |_, _| r.random_range(-2.0..2.0)))
        .collect();
    let (x, g, a, b) = (&vecs[0], &vecs[1], &vecs[2], &vecs[3]);
    let oracle = (x - g).dot(&(theta.as_matrix() * (a - b)));
    let got = lda_discriminant(
        x.as_slice(),
        &theta,
        g.as_slice(),
        a.as_slice(),
        b.as_slice(),
    )
    .unwrap();
    assert!((got - oracle).abs() < 1e-12);
}

#[test]
fn log_weight_matches_normal_density_oracle() {
    let mut r = rng(32);
    for _ in 0..5 {
        let theta = random_spd(&mut r, 3, 5, 0.2);
        let sample = PrecisionSample::new(theta.clone()).unwrap();
        let mean = [0.2, -1.0, 0.5];
        let x = [
            r.random_range(-2.0..2.0),
            r.random_range(-2.0..2.0),
            r.random_range(-2.0..2.0),
        ];
        let cov = theta.as_matrix().clone().try_inverse().unwrap();
        let y = DVector::from_column_slice(&x) - DVector::from_column_slice(&mean);
        let q = y.dot(&(cov.clone().try_inverse().unwrap() * &y));
        let oracle = -0.5 * (3.0 * (2.0 * std::f64::consts::PI).ln() + cov.determinant().ln() + q);
        let got = gaussian_log_weight(&x, &sample, &mean).unwrap();
        assert!((got - oracle).abs() < 1e-10);
    }
}

#[test]
fn labels_survive_positive_weight_scaling() {
    let mut r = rng(33);
    for case in 0..1000 {
        let m = r.random_range(1..40);
        let votes: Vec<MemberVote> = (0..m)
            .map(|_| MemberVote {
                discriminant: r.random_range(-1.0..1.0),
                log_weight: r.random_range(-50.0..50.0),
            })
            .collect();
        let shift = r.random_range(-300.0..300.0);
        let shifted: Vec<MemberVote> = votes
            .iter()
            .map(|v| MemberVote {
                log_weight: v.log_weight + shift,
                ..*v
            })
            .collect();
        assert_eq!(
            Label::from_score(stabilized_mean_vote(&votes)),
            Label::from_score(stabilized_mean_vote(&shifted)),
            "case {case}"
        );
    }
}

#[test]
fn stabilization_matches_unstabilized_labels_at_small_dimension() {
    let model = random_model(34, 2, 300);
    let ens = model.ensemble();
    let mut r = rng(35);
    for _ in 0..200 {
        let x = [r.random_range(-2.0..2.0), r.random_range(-2.0..2.0)];
        let votes = member_votes(&x, &model, &ens).unwrap();
        let raw = raw_mean_vote(&votes);
        assert!(raw.abs() > 0.0);
        let pred = fwda_score(&x, &model, &ens).unwrap();
        assert_eq!(pred.label, Label::from_score(raw));
    }
}

#[test]
fn equal_weights_reduce_to_majority_vote() {
    let model = random_model(36, 3, 51);
    let ens = model.ensemble();
    let mut r = rng(37);
    for _ in 0..100 {
        let x: Vec<f64> = (0..3).map(|_| r.random_range(-3.0..3.0)).collect();
        let pred = fwda_score_with_log_weights(&x, &model, &ens, |_, _| 0.0).unwrap();
        let ayes = ens
            .members()
            .iter()
            .filter(|m| {
                lda_discriminant(
                    &x,
                    m.sample().theta(),
                    model.global_mean(),
                    model.pos_mean(),
                    model.neg_mean(),
                )
                .unwrap()
                    >= 0.0
            })
            .count();
        let majority = if 2 * ayes >= ens.len() {
            Label::Positive
        } else {
            Label::Negative
        };
        assert_eq!(pred.label, majority);
        assert!((pred.score - (2.0 * ayes as f64 - 51.0) / 51.0).abs() < 1e-12);
    }
}

#[test]
fn fits_are_deterministic_and_permutation_invariant() {
    let data = two_gaussians(38, 6, 30, 1.0);
    let config = FitConfig {
        lambda: 0.1,
        ensemble_size: 50,
        ..FitConfig::default()
    };
    let a = fit(&data, &config).unwrap();
    let b = fit(&data, &config).unwrap();
    assert_eq!(a, b);

    let mut order: Vec<usize> = (0..data.len()).collect();
    order.shuffle(&mut rng(39));
    let shuffled = data.subset(&order);
    let m1 = training_moments(&data).unwrap();
    let m2 = training_moments(&shuffled).unwrap();
    assert_eq!(m1, m2);
    assert_eq!(fit(&shuffled, &config).unwrap(), a);

    let xs: Vec<Vec<f64>> = (0..20).map(|i| data.row(i).to_vec()).collect();
    let pa = a.predict(xs.iter().map(Vec::as_slice)).unwrap();
    let pb = b.predict(xs.iter().map(Vec::as_slice)).unwrap();
    for (x, y) in pa.iter().zip(&pb) {
        assert_eq!(x.score.to_bits(), y.score.to_bits());
    }
}

#[test]
fn batch_prediction_equals_pointwise() {
    let data = two_gaussians(40, 4, 25, 1.5);
    let model = fit(
        &data,
        &FitConfig {
            lambda: 0.05,
            ensemble_size: 40,
            ..FitConfig::default()
        },
    )
    .unwrap();
    let batch = model.predict(data.rows()).unwrap();
    for (i, pred) in batch.iter().enumerate() {
        let single = model.predict([data.row(i)]).unwrap();
        assert_eq!(&single[0], pred);
    }
}

#[test]
fn dimension_mismatch_is_a_shape_error() {
    let model = random_model(41, 3, 5);
    let bad: [&[f64]; 1] = [&[1.0, 2.0]];
    assert!(matches!(
        model.predict(bad),
        Err(fwda_core::FwdaError::ShapeError { .. })
    ));
}

#[test]
fn plain_lda_bisects_class_means_under_identity() {
    // symmetric design: sample covariance proportional to identity
    let rows = vec![
        vec![1.0, 1.0],
        vec![1.0, -1.0],
        vec![3.0, 1.0],
        vec![3.0, -1.0],
        vec![-1.0, 1.0],
        vec![-1.0, -1.0],
        vec![-3.0, 1.0],
        vec![-3.0, -1.0],
    ];
    let labels = [Label::Positive; 4]
        .into_iter()
        .chain([Label::Negative; 4])
        .collect();
    let data = LabeledDataset::from_rows(&rows, labels).unwrap();
    let points: Vec<Vec<f64>> = vec![
        vec![2.0, 0.0],
        vec![-2.0, 0.0],
        vec![0.1, 5.0],
        vec![-0.1, -5.0],
    ];
    let preds = plain_lda_predict(
        &data,
        points.iter().map(Vec::as_slice),
        CovarianceMode::PseudoInverse,
    )
    .unwrap();
    let labels: Vec<Label> = preds.iter().map(|p| p.label).collect();
    assert_eq!(
        labels,
        vec![
            Label::Positive,
            Label::Negative,
            Label::Positive,
            Label::Negative
        ]
    );
}

#[test]
fn score_converges_as_ensemble_grows() {
    let model = random_model(42, 2, 10);
    let grid = [10usize, 100, 1000, 10_000];
    let x = [0.4, -0.3];
    let mut diffs = vec![Vec::new(); grid.len() - 1];
    for seed in 0..50u64 {
        let samples = sample(model.wishart(), 5000 + seed, *grid.last().unwrap());
        let full = Ensemble::new(&model, samples, false);
        let scores: Vec<f64> = grid
            .iter()
            .map(|&m| raw_mean_vote(&member_votes(&x, &model, &full.prefix(m)).unwrap()))
            .collect();
        for k in 0..diffs.len() {
            diffs[k].push((scores[k + 1] - scores[k]).abs());
        }
    }
    let medians: Vec<f64> = diffs
        .iter_mut()
        .map(|d| {
            d.sort_by(f64::total_cmp);
            d[d.len() / 2]
        })
        .collect();
    assert!(medians.windows(2).all(|w| w[1] < w[0]), "{medians:?}");
}

proptest! {
    #[test]
    fn prediction_label_follows_score_sign(seed in 0u64..200, x0 in -3.0f64..3.0, x1 in -3.0f64..3.0) {
        let model = random_model(seed, 2, 15);
        let pred = fwda_score(&[x0, x1], &model, &model.ensemble()).unwrap();
        prop_assert_eq!(pred.label == Label::Positive, pred.score >= 0.0);
        prop_assert!(pred.score.abs() <= 1.0);
    }
}

#[test]
fn shrinkage_and_pinv_agree_on_well_conditioned_data() {
    let data = two_gaussians(43, 3, 200, 1.0);
    let test = two_gaussians(44, 3, 100, 1.0);
    let a = plain_lda_predict(&data, test.rows(), CovarianceMode::PseudoInverse).unwrap();
    let b = plain_lda_predict(&data, test.rows(), CovarianceMode::Shrinkage(0.0)).unwrap();
    for (x, y) in a.iter().zip(&b) {
        assert!((x.score - y.score).abs() < 1e-8 * (1.0 + x.score.abs()));
    }
}
