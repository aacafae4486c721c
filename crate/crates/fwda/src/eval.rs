//! Metrics, the repeated-split experiment harness, the ensemble-size
//! convergence study and the lazy vs per-input resampling timing.

use std::collections::HashMap;
use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use fwda_core::classifier::member_votes;
use fwda_core::rng::derive_seed;
use fwda_core::wishart::sample;
use fwda_core::{
    fit, plain_lda_predict, CovarianceMode, Ensemble, FitConfig, FwdaError, FwdaModel,
    GlassoOptions, Label, LabeledDataset, Prediction, Variant,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data_io::{generate_synthetic, load_csv, train_test_split, ColumnRef, SyntheticSpec};
use crate::error::{Error, Result};

/// Confusion counts with `+1` as the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub f1: f64,
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl Metrics {
    pub fn from_counts(tp: usize, fp: usize, tn: usize, fn_: usize) -> Self {
        let total = tp + fp + tn + fn_;
        let accuracy = if total == 0 {
            0.0
        } else {
            (tp + tn) as f64 / total as f64
        };
        let denom = 2 * tp + fp + fn_;
        let f1 = if denom == 0 {
            0.0
        } else {
            (2 * tp) as f64 / denom as f64
        };
        Self {
            accuracy,
            f1,
            tp,
            fp,
            tn,
            fn_,
        }
    }
}

pub fn score_metrics(predicted: &[Label], actual: &[Label]) -> Result<Metrics> {
    if predicted.len() != actual.len() {
        return Err(Error::ShapeError {
            what: "prediction count".into(),
            expected: actual.len(),
            found: predicted.len(),
        });
    }
    if predicted.is_empty() {
        return Err(Error::EmptyInput("no predictions to score"));
    }
    let (mut tp, mut fp, mut tn, mut fn_) = (0, 0, 0, 0);
    for (p, a) in predicted.iter().zip(actual) {
        match (p, a) {
            (Label::Positive, Label::Positive) => tp += 1,
            (Label::Positive, Label::Negative) => fp += 1,
            (Label::Negative, Label::Negative) => tn += 1,
            (Label::Negative, Label::Positive) => fn_ += 1,
        }
    }
    Ok(Metrics::from_counts(tp, fp, tn, fn_))
}

fn fresh_ensemble(model: &FwdaModel, seed: u64, size: usize) -> Result<Ensemble> {
    if size == 0 {
        return Err(FwdaError::InvalidParameter {
            name: "oracle_m",
            value: 0.0,
        }
        .into());
    }
    Ok(Ensemble::new(
        model,
        sample(model.wishart(), seed, size),
        false,
    ))
}

/// Self-normalized vote `Σ sign(d_i) w̃_i / Σ w̃_i` over a fresh ensemble of
/// `oracle_m` draws, with `w̃_i = exp(w_i - max w)`. Lies in `[-1, 1]`.
pub fn adaptive_reference_score(
    x: &[f64],
    model: &FwdaModel,
    oracle_m: usize,
    seed: u64,
) -> Result<f64> {
    let ensemble = fresh_ensemble(model, seed, oracle_m)?;
    let votes = member_votes(x, model, &ensemble)?;
    let w_max = votes
        .iter()
        .map(|v| v.log_weight)
        .fold(f64::NEG_INFINITY, f64::max);
    let (mut num, mut den) = (0.0, 0.0);
    for v in &votes {
        let w = (v.log_weight - w_max).exp();
        num += v.sign() * w;
        den += w;
    }
    Ok(num / den)
}

/// Per-member contribution averaged by the convergence study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Integrand {
    /// `sign(d_i)·exp(w_i)`, the unnormalized vote in absolute units.
    #[default]
    Raw,
    /// The raw contribution clamped to `[0, 1]`.
    Clamped,
}

impl Integrand {
    fn apply(self, sign: f64, log_weight: f64) -> f64 {
        let raw = sign * log_weight.exp();
        match self {
            Integrand::Raw => raw,
            Integrand::Clamped => raw.clamp(0.0, 1.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRun {
    pub m: usize,
    pub seed: u64,
    /// Mean over test points of `|ḡ_m(x) - ḡ_ref(x)|`.
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub m_grid: Vec<usize>,
    pub reference_m: usize,
    pub reference_seed: u64,
    pub seeds: Vec<u64>,
    pub points: usize,
    pub integrand: Integrand,
    /// Mean error over seeds, per grid point.
    pub errors: Vec<f64>,
    /// Median error over seeds, per grid point.
    pub median_errors: Vec<f64>,
    /// Least-squares slope of `ln(error)` against `ln(m)`.
    pub fitted_slope: f64,
    /// Variance of the per-member contribution over the reference ensemble,
    /// averaged over test points.
    pub empirical_variance: f64,
    pub runs: Vec<ConvergenceRun>,
}

impl ConvergenceReport {
    /// Fraction of runs whose error is within `sqrt(-ln(η/2) / 2m)`.
    pub fn hoeffding_coverage(&self, eta: f64) -> f64 {
        let inside = self
            .runs
            .iter()
            .filter(|r| r.error <= (-(eta / 2.0).ln() / (2.0 * r.m as f64)).sqrt())
            .count();
        inside as f64 / self.runs.len() as f64
    }
}

/// Least-squares slope of `ys` on `xs`.
pub fn ols_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

fn contributions(
    x: &[f64],
    model: &FwdaModel,
    ensemble: &Ensemble,
    integrand: Integrand,
) -> Result<Vec<f64>> {
    Ok(member_votes(x, model, ensemble)?
        .iter()
        .map(|v| integrand.apply(v.sign(), v.log_weight))
        .collect())
}

/// Score error against a large reference ensemble as the ensemble grows.
///
/// The reference uses `reference_m` draws under the model's own seed. For each
/// entry of `seeds` one ensemble of `max(m_grid)` draws is generated and its
/// nested prefixes give the estimates for every `m`.
pub fn convergence_study(
    model: &FwdaModel,
    test_points: &[Vec<f64>],
    m_grid: &[usize],
    reference_m: usize,
    seeds: &[u64],
    integrand: Integrand,
) -> Result<ConvergenceReport> {
    if m_grid.is_empty() || m_grid[0] == 0 || m_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(FwdaError::InvalidParameter {
            name: "m_grid",
            value: m_grid.first().map_or(0.0, |&m| m as f64),
        }
        .into());
    }
    let m_max = *m_grid.last().expect("non-empty");
    if reference_m < m_max {
        return Err(FwdaError::InvalidParameter {
            name: "reference_m",
            value: reference_m as f64,
        }
        .into());
    }
    if seeds.is_empty() {
        return Err(Error::EmptyInput("no seeds for the convergence study"));
    }
    if test_points.is_empty() {
        return Err(Error::EmptyInput(
            "no test points for the convergence study",
        ));
    }

    let reference = fresh_ensemble(model, model.seed(), reference_m)?;
    let ref_stats: Vec<(f64, f64)> = test_points
        .par_iter()
        .map(|x| {
            let c = contributions(x, model, &reference, integrand)?;
            let n = c.len() as f64;
            let mean = c.iter().sum::<f64>() / n;
            let var = if c.len() > 1 {
                c.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
            } else {
                0.0
            };
            Ok((mean, var))
        })
        .collect::<Result<_>>()?;

    let per_seed: Vec<Vec<f64>> = seeds
        .par_iter()
        .map(|&seed| {
            let ensemble = fresh_ensemble(model, seed, m_max)?;
            let mut errors = vec![0.0; m_grid.len()];
            for (x, &(g_ref, _)) in test_points.iter().zip(&ref_stats) {
                let c = contributions(x, model, &ensemble, integrand)?;
                // Summed from scratch per prefix so the rounding matches the
                // reference when `m == reference_m` and the seeds coincide.
                for (slot, &m) in m_grid.iter().enumerate() {
                    let mean = c[..m].iter().sum::<f64>() / m as f64;
                    errors[slot] += (mean - g_ref).abs();
                }
            }
            errors
                .iter_mut()
                .for_each(|e| *e /= test_points.len() as f64);
            Ok(errors)
        })
        .collect::<Result<_>>()?;

    let mut runs = Vec::with_capacity(m_grid.len() * seeds.len());
    let mut errors = Vec::with_capacity(m_grid.len());
    let mut median_errors = Vec::with_capacity(m_grid.len());
    for (slot, &m) in m_grid.iter().enumerate() {
        let mut column: Vec<f64> = per_seed.iter().map(|e| e[slot]).collect();
        for (&seed, &error) in seeds.iter().zip(&column) {
            runs.push(ConvergenceRun { m, seed, error });
        }
        errors.push(column.iter().sum::<f64>() / column.len() as f64);
        median_errors.push(median(&mut column));
    }
    let log_m: Vec<f64> = m_grid.iter().map(|&m| (m as f64).ln()).collect();
    let log_e: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let fitted_slope = if m_grid.len() > 1 {
        ols_slope(&log_m, &log_e)
    } else {
        f64::NAN
    };
    let empirical_variance = ref_stats.iter().map(|s| s.1).sum::<f64>() / ref_stats.len() as f64;
    Ok(ConvergenceReport {
        m_grid: m_grid.to_vec(),
        reference_m,
        reference_seed: model.seed(),
        seeds: seeds.to_vec(),
        points: test_points.len(),
        integrand,
        errors,
        median_errors,
        fitted_slope,
        empirical_variance,
        runs,
    })
}

/// Wall-clock comparison of one shared ensemble against per-input resampling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingReport {
    pub points: usize,
    pub ensemble_size: usize,
    pub oracle_m: usize,
    /// Ensemble generation plus scoring of every point.
    pub lazy_total_seconds: f64,
    /// Scoring time for the first and second half of the points.
    pub lazy_first_half_seconds: f64,
    pub lazy_second_half_seconds: f64,
    pub adaptive_total_seconds: f64,
    pub ratio: f64,
}

/// Times `model.predict(xs)` against [`adaptive_reference_score`] with a fresh
/// `oracle_m`-member ensemble for every input.
pub fn timing_comparison(
    model: &FwdaModel,
    xs: &[Vec<f64>],
    oracle_m: usize,
    seed: u64,
) -> Result<TimingReport> {
    if xs.is_empty() {
        return Err(Error::EmptyInput("no points to time"));
    }
    let start = Instant::now();
    let predictions = model.predict(xs.iter().map(Vec::as_slice))?;
    let lazy_total_seconds = start.elapsed().as_secs_f64();
    std::hint::black_box(&predictions);

    let ensemble = model.ensemble();
    let half = xs.len() / 2;
    let mut halves = [0.0; 2];
    for (slot, chunk) in [&xs[..half], &xs[half..]].into_iter().enumerate() {
        let start = Instant::now();
        for x in chunk {
            std::hint::black_box(model.predict_with(&ensemble, x)?);
        }
        halves[slot] = start.elapsed().as_secs_f64();
    }

    let start = Instant::now();
    for (i, x) in xs.iter().enumerate() {
        let s = adaptive_reference_score(x, model, oracle_m, derive_seed(seed, &[i as u64]))?;
        std::hint::black_box(s);
    }
    let adaptive_total_seconds = start.elapsed().as_secs_f64();
    Ok(TimingReport {
        points: xs.len(),
        ensemble_size: model.ensemble_size(),
        oracle_m,
        lazy_total_seconds,
        lazy_first_half_seconds: halves[0],
        lazy_second_half_seconds: halves[1],
        adaptive_total_seconds,
        ratio: adaptive_total_seconds / lazy_total_seconds,
    })
}

/// Where the experiment's data comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DataSource {
    /// A fresh draw from the banded two-Gaussian generator for every repeat.
    Synthetic {
        dim: usize,
        #[serde(default = "default_rho")]
        rho: f64,
        #[serde(default = "default_separation")]
        mean_separation: f64,
    },
    /// One CSV file, re-split for every repeat.
    Csv { path: PathBuf, label_column: String },
}

fn default_rho() -> f64 {
    0.4
}

fn default_separation() -> f64 {
    3.0
}

/// A classifier to evaluate. Unset FWDA parameters fall back to the
/// experiment-wide `lambda` and `ensemble_size`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Method {
    Fwda {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        lambda: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        ensemble_size: Option<usize>,
    },
    DiscreteFwda {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        lambda: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        ensemble_size: Option<usize>,
    },
    SampleFwda {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        ensemble_size: Option<usize>,
    },
    PinvLda,
    ShrinkageLda {
        gamma: f64,
    },
}

impl Method {
    pub fn fwda(lambda: f64, ensemble_size: usize) -> Self {
        Method::Fwda {
            lambda: Some(lambda),
            ensemble_size: Some(ensemble_size),
        }
    }

    pub fn discrete_fwda(lambda: f64, ensemble_size: usize) -> Self {
        Method::DiscreteFwda {
            lambda: Some(lambda),
            ensemble_size: Some(ensemble_size),
        }
    }

    /// Report name with defaults filled in, e.g. `fwda(200,1)`.
    pub fn name(&self, config: &ExperimentConfig) -> String {
        match self.resolved(config) {
            Resolved::Fwda(variant, m, lambda) => match variant {
                Variant::SampleFwda => format!("{variant}({m})"),
                _ => format!("{variant}({m},{lambda})"),
            },
            Resolved::Lda(CovarianceMode::PseudoInverse) => "pinv-lda".into(),
            Resolved::Lda(CovarianceMode::Shrinkage(g)) => format!("shrinkage-lda({g})"),
        }
    }

    fn resolved(&self, config: &ExperimentConfig) -> Resolved {
        let m = |e: &Option<usize>| e.unwrap_or(config.ensemble_size);
        let l = |l: &Option<f64>| l.unwrap_or(config.lambda);
        match self {
            Method::Fwda {
                lambda,
                ensemble_size,
            } => Resolved::Fwda(Variant::Fwda, m(ensemble_size), l(lambda)),
            Method::DiscreteFwda {
                lambda,
                ensemble_size,
            } => Resolved::Fwda(Variant::DiscreteFwda, m(ensemble_size), l(lambda)),
            Method::SampleFwda { ensemble_size } => {
                Resolved::Fwda(Variant::SampleFwda, m(ensemble_size), config.lambda)
            }
            Method::PinvLda => Resolved::Lda(CovarianceMode::PseudoInverse),
            Method::ShrinkageLda { gamma } => Resolved::Lda(CovarianceMode::Shrinkage(*gamma)),
        }
    }
}

enum Resolved {
    Fwda(Variant, usize, f64),
    Lda(CovarianceMode),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub source: DataSource,
    /// Training samples per class; every size is run for every repeat.
    pub train_sizes: Vec<usize>,
    pub test_per_class: usize,
    pub methods: Vec<Method>,
    pub lambda: f64,
    pub ensemble_size: usize,
    pub repeats: usize,
    pub seed: u64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            source: DataSource::Synthetic {
                dim: 50,
                rho: default_rho(),
                mean_separation: default_separation(),
            },
            train_sizes: vec![50],
            test_per_class: 200,
            methods: vec![
                Method::Fwda {
                    lambda: None,
                    ensemble_size: None,
                },
                Method::PinvLda,
            ],
            lambda: 1.0,
            ensemble_size: 200,
            repeats: 30,
            seed: 42,
            tol: GlassoOptions::default().tol,
            max_iter: GlassoOptions::default().max_iter,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub repeat: usize,
    pub train_per_class: usize,
    pub method: String,
    pub metrics: Metrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: String,
    pub train_per_class: usize,
    pub repeats: usize,
    pub mean_accuracy: f64,
    pub sd_accuracy: f64,
    pub mean_f1: f64,
    pub sd_f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    /// Bayes-rule accuracy of the synthetic generator, if one was used.
    pub bayes_accuracy: Option<f64>,
    pub summary: Vec<MethodSummary>,
    pub records: Vec<RunRecord>,
}

impl ExperimentReport {
    pub fn summary_for(&self, method: &str, train_per_class: usize) -> Option<&MethodSummary> {
        self.summary
            .iter()
            .find(|s| s.method == method && s.train_per_class == train_per_class)
    }

    /// One row per repeat, train size and method.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let to_err = |e: csv::Error| Error::io("<report>", std::io::Error::other(e.to_string()));
        w.write_record([
            "repeat",
            "train_per_class",
            "method",
            "accuracy",
            "f1",
            "tp",
            "fp",
            "tn",
            "fn",
        ])
        .map_err(to_err)?;
        for r in &self.records {
            let m = &r.metrics;
            w.write_record([
                r.repeat.to_string(),
                r.train_per_class.to_string(),
                r.method.clone(),
                format!("{:?}", m.accuracy),
                format!("{:?}", m.f1),
                m.tp.to_string(),
                m.fp.to_string(),
                m.tn.to_string(),
                m.fn_.to_string(),
            ])
            .map_err(to_err)?;
        }
        w.flush().map_err(|e| Error::io("<report>", e))
    }
}

fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let sd = if values.len() > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    (mean, sd)
}

fn validate(config: &ExperimentConfig) -> Result<Vec<String>> {
    if config.repeats == 0 {
        return Err(Error::InvalidConfig("repeats must be at least 1".into()));
    }
    if config.train_sizes.is_empty() || config.methods.is_empty() {
        return Err(Error::InvalidConfig(
            "train_sizes and methods must be non-empty".into(),
        ));
    }
    if config.test_per_class == 0 || config.train_sizes.contains(&0) {
        return Err(Error::InvalidConfig(
            "train and test sizes must be positive".into(),
        ));
    }
    let names: Vec<String> = config.methods.iter().map(|m| m.name(config)).collect();
    for (i, n) in names.iter().enumerate() {
        if names[..i].contains(n) {
            return Err(Error::InvalidConfig(format!("method {n} listed twice")));
        }
    }
    Ok(names)
}

/// Runs every method on every (repeat, train size) split.
///
/// Each split is an independent job with seeds derived from the master seed,
/// so results do not depend on scheduling. All FWDA-family methods within a
/// split share one ensemble seed, which makes an `m`-member ensemble a prefix
/// of any larger one.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    let names = validate(config)?;
    let max_train = *config
        .train_sizes
        .iter()
        .max()
        .expect("validated non-empty");
    let csv_data = match &config.source {
        DataSource::Csv { path, label_column } => {
            let col: ColumnRef = label_column.parse().expect("infallible");
            Some(load_csv(path, &col).map_err(|e| e.context("loading experiment data"))?)
        }
        DataSource::Synthetic { .. } => None,
    };
    let synth_spec = |seed: u64| match &config.source {
        DataSource::Synthetic {
            dim,
            rho,
            mean_separation,
        } => Some(SyntheticSpec {
            dim: *dim,
            n_per_class: max_train + config.test_per_class,
            true_precision: None,
            rho: *rho,
            mean_separation: *mean_separation,
            seed,
        }),
        DataSource::Csv { .. } => None,
    };
    let bayes_accuracy = match synth_spec(config.seed) {
        Some(mut spec) => {
            spec.n_per_class = 0;
            Some(generate_synthetic(&spec)?.bayes_accuracy())
        }
        None => None,
    };

    let jobs: Vec<(usize, usize)> = (0..config.repeats)
        .flat_map(|r| (0..config.train_sizes.len()).map(move |s| (r, s)))
        .collect();
    let results: Vec<Vec<RunRecord>> = jobs
        .par_iter()
        .map(|&(repeat, size_idx)| {
            let n_train = config.train_sizes[size_idx];
            let r = repeat as u64;
            let pool = match (&csv_data, synth_spec(derive_seed(config.seed, &[r, 0]))) {
                (Some(d), _) => d.clone(),
                (None, Some(spec)) => generate_synthetic(&spec)?.data,
                (None, None) => unreachable!("source is csv or synthetic"),
            };
            let context = |what: &str| format!("repeat {repeat}, train size {n_train}: {what}");
            let (train, test) = train_test_split(
                &pool,
                n_train,
                config.test_per_class,
                derive_seed(config.seed, &[r, 1]),
            )
            .map_err(|e| e.context(context("split")))?;
            let ensemble_seed = derive_seed(config.seed, &[r, 2]);
            run_methods(config, &names, &train, &test, ensemble_seed)
                .map_err(|(name, e)| e.context(context(&name)))
                .map(|metrics| {
                    names
                        .iter()
                        .zip(metrics)
                        .map(|(name, metrics)| RunRecord {
                            repeat,
                            train_per_class: n_train,
                            method: name.clone(),
                            metrics,
                        })
                        .collect()
                })
        })
        .collect::<Result<_>>()?;

    let records: Vec<RunRecord> = results.into_iter().flatten().collect();
    let mut summary = Vec::new();
    for &size in &config.train_sizes {
        for name in &names {
            let sel: Vec<&Metrics> = records
                .iter()
                .filter(|r| r.train_per_class == size && &r.method == name)
                .map(|r| &r.metrics)
                .collect();
            let (mean_accuracy, sd_accuracy) =
                mean_sd(&sel.iter().map(|m| m.accuracy).collect::<Vec<_>>());
            let (mean_f1, sd_f1) = mean_sd(&sel.iter().map(|m| m.f1).collect::<Vec<_>>());
            summary.push(MethodSummary {
                method: name.clone(),
                train_per_class: size,
                repeats: sel.len(),
                mean_accuracy,
                sd_accuracy,
                mean_f1,
                sd_f1,
            });
        }
    }
    Ok(ExperimentReport {
        config: config.clone(),
        bayes_accuracy,
        summary,
        records,
    })
}

fn run_methods(
    config: &ExperimentConfig,
    names: &[String],
    train: &LabeledDataset,
    test: &LabeledDataset,
    ensemble_seed: u64,
) -> std::result::Result<Vec<Metrics>, (String, Error)> {
    // glasso fits keyed by (lambda bits, sample variant)
    let mut fits: HashMap<(u64, bool), FwdaModel> = HashMap::new();
    let mut out = Vec::with_capacity(names.len());
    for (method, name) in config.methods.iter().zip(names) {
        let tag = |e: Error| (name.clone(), e);
        let predictions: Vec<Prediction> = match method.resolved(config) {
            Resolved::Fwda(variant, m, lambda) => {
                let sample_variant = variant == Variant::SampleFwda;
                let key = (lambda.to_bits(), sample_variant);
                if !fits.contains_key(&key) {
                    let fit_config = FitConfig {
                        lambda,
                        ensemble_size: m,
                        seed: ensemble_seed,
                        variant: if sample_variant {
                            Variant::SampleFwda
                        } else {
                            Variant::Fwda
                        },
                        glasso: GlassoOptions {
                            tol: config.tol,
                            max_iter: config.max_iter,
                        },
                        ..FitConfig::default()
                    };
                    let model = fit(train, &fit_config).map_err(|e| tag(e.into()))?;
                    fits.insert(key, model);
                }
                let model = fits[&key]
                    .with_ensemble(m, ensemble_seed)
                    .map_err(|e| tag(e.into()))?
                    .with_variant(variant);
                model.predict(test.rows()).map_err(|e| tag(e.into()))?
            }
            Resolved::Lda(mode) => {
                plain_lda_predict(train, test.rows(), mode).map_err(|e| tag(e.into()))?
            }
        };
        let labels: Vec<Label> = predictions.iter().map(|p| p.label).collect();
        out.push(score_metrics(&labels, test.labels()).map_err(tag)?);
    }
    Ok(out)
}
