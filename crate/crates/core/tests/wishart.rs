mod common;

use common::{random_spd, rng};
use fwda_core::wishart::{log_density, log_multivariate_gamma, sample, sample_one};
use fwda_core::{SymmetricMatrix, WishartModel};
use statrs::function::gamma::{gamma, ln_gamma};

fn chi_square_log_pdf(k: f64, x: f64) -> f64 {
    (k / 2.0 - 1.0) * x.ln() - x / 2.0 - k / 2.0 * 2f64.ln() - ln_gamma(k / 2.0)
}

/// `Γ_p(a) = π^{(p-1)/2} Γ(a) Γ_{p-1}(a - 1/2)`, `Γ_1 = Γ`.
fn log_mv_gamma_recursive(p: usize, a: f64) -> f64 {
    if p == 1 {
        ln_gamma(a)
    } else {
        (p as f64 - 1.0) / 2.0 * std::f64::consts::PI.ln()
            + ln_gamma(a)
            + log_mv_gamma_recursive(p - 1, a - 0.5)
    }
}

#[test]
fn scalar_density_is_chi_square() {
    let model = WishartModel::new(SymmetricMatrix::identity(1), 4.0).unwrap();
    for x in [1.0f64, 2.0, 5.0] {
        let expected = (x * (-x / 2.0).exp() / 4.0).ln();
        let got = log_density(&SymmetricMatrix::from_diagonal(&[x]), &model).unwrap();
        assert!((got - expected).abs() < 1e-12, "x={x}: {got} vs {expected}");
    }
    for v in [1.5, 3.0, 7.0, 12.5] {
        let model = WishartModel::new(SymmetricMatrix::identity(1), v).unwrap();
        for x in [0.3, 4.0, 11.0] {
            let got = log_density(&SymmetricMatrix::from_diagonal(&[x]), &model).unwrap();
            assert!((got - chi_square_log_pdf(v, x)).abs() < 1e-10);
        }
    }
}

#[test]
fn multivariate_gamma_matches_recursion() {
    assert!(
        (log_multivariate_gamma(3, 5.0).unwrap() - log_mv_gamma_recursive(3, 5.0)).abs() < 1e-10
    );
    for p in 1..=5 {
        for a in [2.7, 4.0, 9.25] {
            let got = log_multivariate_gamma(p, a).unwrap();
            assert!((got - log_mv_gamma_recursive(p, a)).abs() < 1e-10);
        }
    }
}

#[test]
fn bivariate_density_matches_direct_formula() {
    let mut r = rng(21);
    for _ in 0..5 {
        let t = random_spd(&mut r, 2, 6, 0.2);
        let theta = random_spd(&mut r, 2, 6, 0.5);
        let v = 6.0;
        let model = WishartModel::new(t.clone(), v).unwrap();
        let tm = t.as_matrix();
        let th = theta.as_matrix();
        let det_t = tm.determinant();
        let det_th = th.determinant();
        let tr = (tm.clone().try_inverse().unwrap() * th).trace();
        let gamma2 = std::f64::consts::PI.sqrt() * gamma(v / 2.0) * gamma(v / 2.0 - 0.5);
        let density = det_th.powf((v - 3.0) / 2.0) * (-0.5 * tr).exp()
            / (2f64.powf(v) * det_t.powf(v / 2.0) * gamma2);
        let got = log_density(&theta, &model).unwrap();
        assert!((got - density.ln()).abs() < 1e-8);
    }
}

#[test]
fn scalar_samples_have_chi_square_mean() {
    let model = WishartModel::new(SymmetricMatrix::identity(1), 10.0).unwrap();
    let draws = sample(&model, 99, 50_000);
    let mean = draws.iter().map(|s| s.theta().get(0, 0)).sum::<f64>() / 50_000.0;
    let se = (20.0f64 / 50_000.0).sqrt();
    assert!((mean - 10.0).abs() < 3.0 * se, "mean {mean}");
}

#[test]
fn sampling_is_deterministic() {
    let mut r = rng(22);
    let model = WishartModel::new(random_spd(&mut r, 4, 6, 0.1), 7.0).unwrap();
    let a = sample(&model, 1234, 25);
    let b = sample(&model, 1234, 25);
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.theta().to_row_major(), y.theta().to_row_major());
        assert_eq!(x.log_det().to_bits(), y.log_det().to_bits());
    }
    assert_ne!(a[0].theta(), sample(&model, 1235, 1)[0].theta());
}

#[test]
fn sampling_is_scale_equivariant() {
    let mut r = rng(23);
    let t = random_spd(&mut r, 3, 6, 0.2);
    let c = 3.7;
    let base = WishartModel::new(t.clone(), 5.0).unwrap();
    let scaled = WishartModel::new(t.scale(c), 5.0).unwrap();
    for i in 0..20 {
        let a = sample_one(&base, 8, i);
        let b = sample_one(&scaled, 8, i);
        let diff = (a.theta().as_matrix() * c - b.theta().as_matrix())
            .abs()
            .max();
        assert!(diff <= 1e-12 * b.theta().as_matrix().abs().max());
    }
}

#[test]
fn density_along_ray_peaks_at_stationary_point() {
    let mut r = rng(24);
    let p = 3;
    let v = 9.0;
    let t = random_spd(&mut r, p, 6, 0.2);
    let theta0 = random_spd(&mut r, p, 6, 0.2);
    let model = WishartModel::new(t.clone(), v).unwrap();
    let tr = (t.as_matrix().clone().try_inverse().unwrap() * theta0.as_matrix()).trace();
    let analytic = (v - p as f64 - 1.0) * p as f64 / tr;
    let step = analytic / 1000.0;
    let (best_t, _) = (1..=3000)
        .map(|i| {
            let s = i as f64 * step;
            (s, log_density(&theta0.scale(s), &model).unwrap())
        })
        .fold(
            (0.0, f64::NEG_INFINITY),
            |acc, x| if x.1 > acc.1 { x } else { acc },
        );
    assert!((best_t - analytic).abs() <= step);
}

#[test]
fn monte_carlo_mean_error_decays_at_root_rate() {
    let mut r = rng(25);
    let t = random_spd(&mut r, 3, 6, 0.2);
    let v = 8.0;
    let model = WishartModel::new(t.clone(), v).unwrap();
    let target = t.as_matrix() * v;
    let counts = [100usize, 400, 1600, 6400, 25_600];
    let seeds = 20u64;
    let mut log_err = Vec::new();
    for &count in &counts {
        let mut total = 0.0;
        for seed in 0..seeds {
            let draws = sample(&model, 1000 + seed, count);
            let mut mean = nalgebra::DMatrix::<f64>::zeros(3, 3);
            for d in &draws {
                mean += d.theta().as_matrix();
            }
            mean /= count as f64;
            total += (mean - &target).norm();
        }
        log_err.push((total / seeds as f64).ln());
    }
    let xs: Vec<f64> = counts.iter().map(|&c| (c as f64).ln()).collect();
    let slope = least_squares_slope(&xs, &log_err);
    assert!((slope + 0.5).abs() <= 0.15, "slope {slope}");
}

fn least_squares_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}
