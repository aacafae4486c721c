//! Ensemble discriminant analysis over sampled precision matrices.
//!
//! A fitted [`FwdaModel`] stores only the Wishart parameters and a seed. The
//! ensemble of precision matrices is regenerated from `(wishart, seed, m)`
//! whenever predictions are needed and then shared by every query point.
//! Each member `Θ_i` casts the LDA vote `sign((x - x̄)ᵀ Θ_i (x̄₊ - x̄₋))`,
//! weighted by the Gaussian likelihood of `x` under precision `Θ_i` centered
//! on the global training mean.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::f64::consts::PI;
use core::fmt;
use core::str::FromStr;

use nalgebra::DMatrix;

use crate::covariance::{
    desparsify, graphical_lasso, project_pd, pseudo_inverse, ridge_degenerate_diagonal,
    sample_covariance, shrinkage_covariance, GlassoOptions, DEFAULT_FLOOR_RATIO, DEFAULT_RANK_TOL,
};
use crate::dataset::{Label, LabeledDataset};
use crate::error::{check_len, FwdaError, Result};
use crate::linalg::{dot, mat_vec, SymmetricMatrix};
use crate::wishart::{self, log_density_factored, PrecisionSample, WishartModel};

/// Which voting rule and Wishart scale a model uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    /// Likelihood-weighted vote, scale from the de-sparsified graphical lasso.
    Fwda,
    /// Vote additionally weighted by each member's Wishart density.
    DiscreteFwda,
    /// Likelihood-weighted vote, scale from the pseudo-inverse sample covariance.
    SampleFwda,
}

impl Variant {
    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Fwda => "fwda",
            Variant::DiscreteFwda => "discrete-fwda",
            Variant::SampleFwda => "sample-fwda",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = FwdaError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fwda" => Ok(Variant::Fwda),
            "discrete-fwda" => Ok(Variant::DiscreteFwda),
            "sample-fwda" => Ok(Variant::SampleFwda),
            other => Err(FwdaError::InvalidModel(format!(
                "unknown variant {other:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitConfig {
    pub lambda: f64,
    pub ensemble_size: usize,
    pub seed: u64,
    pub variant: Variant,
    pub glasso: GlassoOptions,
    pub floor_ratio: f64,
    pub rank_tol: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            ensemble_size: 200,
            seed: 42,
            variant: Variant::Fwda,
            glasso: GlassoOptions::default(),
            floor_ratio: DEFAULT_FLOOR_RATIO,
            rank_tol: DEFAULT_RANK_TOL,
        }
    }
}

/// Means and pooled sample covariance of a training set.
///
/// Rows are visited in a canonical order (sorted by value) so the result is
/// bitwise independent of the order the rows were supplied in.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingMoments {
    pub n: usize,
    pub global_mean: Vec<f64>,
    pub pos_mean: Vec<f64>,
    pub neg_mean: Vec<f64>,
    pub sigma_bar: SymmetricMatrix,
}

pub fn training_moments(data: &LabeledDataset) -> Result<TrainingMoments> {
    let n = data.len();
    if n < 2 {
        return Err(FwdaError::InsufficientSamples { have: n, need: 2 });
    }
    for label in [Label::Positive, Label::Negative] {
        if data.count(label) == 0 {
            return Err(FwdaError::MissingClass(label));
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        compare_rows(data.row(a), data.row(b)).then(data.labels()[a].cmp(&data.labels()[b]))
    });
    let p = data.dim();
    let mut rows = DMatrix::<f64>::zeros(n, p);
    for (i, &src) in order.iter().enumerate() {
        for (k, &v) in data.row(src).iter().enumerate() {
            rows[(i, k)] = v;
        }
    }
    let class_mean = |label: Label| {
        let mut acc = alloc::vec![0.0; p];
        let mut count = 0usize;
        for &i in &order {
            if data.labels()[i] == label {
                count += 1;
                for (a, v) in acc.iter_mut().zip(data.row(i)) {
                    *a += v;
                }
            }
        }
        acc.iter_mut().for_each(|a| *a /= count as f64);
        acc
    };
    Ok(TrainingMoments {
        n,
        global_mean: crate::covariance::column_mean(&rows),
        pos_mean: class_mean(Label::Positive),
        neg_mean: class_mean(Label::Negative),
        sigma_bar: sample_covariance(&rows)?,
    })
}

fn compare_rows(a: &[f64], b: &[f64]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| *o != Ordering::Equal)
        .unwrap_or(Ordering::Equal)
}

/// A trained classifier. The ensemble itself is not stored.
#[derive(Debug, Clone, PartialEq)]
pub struct FwdaModel {
    dim: usize,
    global_mean: Vec<f64>,
    pos_mean: Vec<f64>,
    neg_mean: Vec<f64>,
    wishart: WishartModel,
    lambda: f64,
    ensemble_size: usize,
    seed: u64,
    variant: Variant,
}

/// Everything needed to rebuild a model, e.g. from a file.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParts {
    pub variant: Variant,
    pub lambda: f64,
    pub ensemble_size: usize,
    pub seed: u64,
    pub dof_requested: f64,
    pub global_mean: Vec<f64>,
    pub pos_mean: Vec<f64>,
    pub neg_mean: Vec<f64>,
    pub scale: SymmetricMatrix,
}

impl FwdaModel {
    pub fn from_parts(parts: ModelParts) -> Result<Self> {
        let dim = parts.scale.dim();
        check_len("global mean length", dim, parts.global_mean.len())?;
        check_len("positive mean length", dim, parts.pos_mean.len())?;
        check_len("negative mean length", dim, parts.neg_mean.len())?;
        if parts.ensemble_size == 0 {
            return Err(FwdaError::InvalidModel(
                "ensemble size must be at least 1".into(),
            ));
        }
        let wishart = WishartModel::new(parts.scale, parts.dof_requested)?;
        Ok(Self {
            dim,
            global_mean: parts.global_mean,
            pos_mean: parts.pos_mean,
            neg_mean: parts.neg_mean,
            wishart,
            lambda: parts.lambda,
            ensemble_size: parts.ensemble_size,
            seed: parts.seed,
            variant: parts.variant,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn global_mean(&self) -> &[f64] {
        &self.global_mean
    }
    pub fn pos_mean(&self) -> &[f64] {
        &self.pos_mean
    }
    pub fn neg_mean(&self) -> &[f64] {
        &self.neg_mean
    }
    pub fn wishart(&self) -> &WishartModel {
        &self.wishart
    }
    pub fn lambda(&self) -> f64 {
        self.lambda
    }
    pub fn ensemble_size(&self) -> usize {
        self.ensemble_size
    }
    pub fn seed(&self) -> u64 {
        self.seed
    }
    pub fn variant(&self) -> Variant {
        self.variant
    }

    /// Same model with a different ensemble size and seed.
    pub fn with_ensemble(&self, ensemble_size: usize, seed: u64) -> Result<Self> {
        if ensemble_size == 0 {
            return Err(FwdaError::InvalidModel(
                "ensemble size must be at least 1".into(),
            ));
        }
        Ok(Self {
            ensemble_size,
            seed,
            ..self.clone()
        })
    }

    pub fn with_variant(&self, variant: Variant) -> Self {
        Self {
            variant,
            ..self.clone()
        }
    }

    /// Regenerates the model's ensemble.
    pub fn ensemble(&self) -> Ensemble {
        self.ensemble_from(self.seed, self.ensemble_size)
    }

    /// A fresh ensemble drawn from this model's Wishart distribution.
    pub fn ensemble_from(&self, seed: u64, size: usize) -> Ensemble {
        let samples = wishart::sample(&self.wishart, seed, size);
        Ensemble::new(self, samples, self.variant == Variant::DiscreteFwda)
    }

    /// Scores `xs` against one regenerated ensemble.
    pub fn predict<'a, I>(&self, xs: I) -> Result<Vec<Prediction>>
    where
        I: IntoIterator<Item = &'a [f64]>,
    {
        let mut iter = xs.into_iter().peekable();
        if iter.peek().is_none() {
            return Ok(Vec::new());
        }
        let ensemble = self.ensemble();
        iter.map(|x| self.predict_with(&ensemble, x)).collect()
    }

    /// Scores one point against an existing ensemble, per the model's variant.
    pub fn predict_with(&self, ensemble: &Ensemble, x: &[f64]) -> Result<Prediction> {
        match self.variant {
            Variant::Fwda | Variant::SampleFwda => fwda_score(x, self, ensemble),
            Variant::DiscreteFwda => discrete_fwda_score(x, self, ensemble),
        }
    }

    fn mean_difference(&self) -> Vec<f64> {
        self.pos_mean
            .iter()
            .zip(&self.neg_mean)
            .map(|(a, b)| a - b)
            .collect()
    }

    fn centered(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len("input dimension", self.dim, x.len())?;
        Ok(x.iter()
            .zip(&self.global_mean)
            .map(|(a, b)| a - b)
            .collect())
    }
}

/// One ensemble member with the per-member quantities that do not depend on
/// the query point.
#[derive(Debug, Clone, PartialEq)]
pub struct Member {
    sample: PrecisionSample,
    /// `Θ_i (x̄₊ - x̄₋)`
    direction: Vec<f64>,
    log_density: Option<f64>,
}

impl Member {
    pub fn sample(&self) -> &PrecisionSample {
        &self.sample
    }
    pub fn direction(&self) -> &[f64] {
        &self.direction
    }
    pub fn log_density(&self) -> Option<f64> {
        self.log_density
    }
}

/// The sampled precision matrices a model votes with.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    members: Vec<Member>,
}

impl Ensemble {
    pub fn new(model: &FwdaModel, samples: Vec<PrecisionSample>, with_density: bool) -> Self {
        let diff = model.mean_difference();
        let members = samples
            .into_iter()
            .map(|sample| {
                let direction = mat_vec(sample.theta().as_matrix(), &diff);
                let log_density = if with_density {
                    log_density_factored(sample.chol(), &model.wishart).ok()
                } else {
                    None
                };
                Member {
                    sample,
                    direction,
                    log_density,
                }
            })
            .collect();
        Self { members }
    }

    pub fn members(&self) -> &[Member] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// The first `m` members.
    pub fn prefix(&self, m: usize) -> Ensemble {
        Ensemble {
            members: self.members[..m.min(self.members.len())].to_vec(),
        }
    }
}

/// One member's discriminant value and log weight at a query point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MemberVote {
    pub discriminant: f64,
    pub log_weight: f64,
}

impl MemberVote {
    /// The member classifier's output in `{-1, +1}`; zero votes `+1`.
    pub fn sign(&self) -> f64 {
        if self.discriminant >= 0.0 {
            1.0
        } else {
            -1.0
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub label: Label,
    /// Ensemble score, rescaled by `exp(-max log weight)`.
    pub score: f64,
    pub members: Option<Vec<MemberVote>>,
}

impl Prediction {
    fn from_score(score: f64) -> Self {
        Self {
            label: Label::from_score(score),
            score,
            members: None,
        }
    }
}

/// `(x - x̄)ᵀ Θ (x̄₊ - x̄₋)`.
pub fn lda_discriminant(
    x: &[f64],
    theta: &SymmetricMatrix,
    global_mean: &[f64],
    pos_mean: &[f64],
    neg_mean: &[f64],
) -> Result<f64> {
    let p = theta.dim();
    check_len("input dimension", p, x.len())?;
    check_len("global mean length", p, global_mean.len())?;
    check_len("positive mean length", p, pos_mean.len())?;
    check_len("negative mean length", p, neg_mean.len())?;
    let diff: Vec<f64> = pos_mean.iter().zip(neg_mean).map(|(a, b)| a - b).collect();
    let centered: Vec<f64> = x.iter().zip(global_mean).map(|(a, b)| a - b).collect();
    Ok(dot(&centered, &mat_vec(theta.as_matrix(), &diff)))
}

/// Multivariate normal log-density of `x` with mean `global_mean` and
/// precision `sample.theta()`.
pub fn gaussian_log_weight(
    x: &[f64],
    sample: &PrecisionSample,
    global_mean: &[f64],
) -> Result<f64> {
    let p = sample.dim();
    check_len("input dimension", p, x.len())?;
    check_len("global mean length", p, global_mean.len())?;
    let centered: Vec<f64> = x.iter().zip(global_mean).map(|(a, b)| a - b).collect();
    Ok(log_weight_centered(&centered, sample))
}

fn log_weight_centered(centered: &[f64], sample: &PrecisionSample) -> f64 {
    let p = centered.len() as f64;
    -0.5 * p * libm::log(2.0 * PI) + 0.5 * sample.log_det()
        - 0.5 * sample.chol().quadratic_form(centered)
}

/// Discriminant and log weight of every member at `x`, in member order.
pub fn member_votes(x: &[f64], model: &FwdaModel, ensemble: &Ensemble) -> Result<Vec<MemberVote>> {
    member_votes_with(x, model, ensemble, |m, c| {
        log_weight_centered(c, m.sample())
    })
}

fn member_votes_with<F>(
    x: &[f64],
    model: &FwdaModel,
    ensemble: &Ensemble,
    log_weight: F,
) -> Result<Vec<MemberVote>>
where
    F: Fn(&Member, &[f64]) -> f64,
{
    if ensemble.is_empty() {
        return Err(FwdaError::InvalidModel("empty ensemble".into()));
    }
    let centered = model.centered(x)?;
    Ok(ensemble
        .members
        .iter()
        .map(|m| MemberVote {
            discriminant: dot(&centered, &m.direction),
            log_weight: log_weight(m, &centered),
        })
        .collect())
}

/// `(1/m) Σ sign(d_i) exp(w_i - max_j w_j)`, accumulated in member order.
pub fn stabilized_mean_vote(votes: &[MemberVote]) -> f64 {
    let w_max = votes
        .iter()
        .map(|v| v.log_weight)
        .fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = votes
        .iter()
        .map(|v| v.sign() * libm::exp(v.log_weight - w_max))
        .sum();
    sum / votes.len() as f64
}

/// `(1/m) Σ sign(d_i) exp(w_i)` without rescaling. Underflows for large `p`.
pub fn raw_mean_vote(votes: &[MemberVote]) -> f64 {
    let sum: f64 = votes
        .iter()
        .map(|v| v.sign() * libm::exp(v.log_weight))
        .sum();
    sum / votes.len() as f64
}

/// Likelihood-weighted ensemble vote at `x`.
pub fn fwda_score(x: &[f64], model: &FwdaModel, ensemble: &Ensemble) -> Result<Prediction> {
    let votes = member_votes(x, model, ensemble)?;
    Ok(Prediction::from_score(stabilized_mean_vote(&votes)))
}

/// [`fwda_score`] with the member log weight supplied by the caller. The
/// callback receives the member and the centered point `x - x̄`.
pub fn fwda_score_with_log_weights<F>(
    x: &[f64],
    model: &FwdaModel,
    ensemble: &Ensemble,
    log_weight: F,
) -> Result<Prediction>
where
    F: Fn(&Member, &[f64]) -> f64,
{
    let votes = member_votes_with(x, model, ensemble, log_weight)?;
    Ok(Prediction::from_score(stabilized_mean_vote(&votes)))
}

/// Vote weighted by likelihood times the member's Wishart density:
/// `Σ sign(d_i) exp(w_i + ℓ_i - c)` with `c = max(w_i + ℓ_i)`.
pub fn discrete_fwda_score(
    x: &[f64],
    model: &FwdaModel,
    ensemble: &Ensemble,
) -> Result<Prediction> {
    let mut votes = member_votes(x, model, ensemble)?;
    for (vote, member) in votes.iter_mut().zip(&ensemble.members) {
        let density = match member.log_density {
            Some(d) => d,
            None => log_density_factored(member.sample.chol(), &model.wishart)?,
        };
        vote.log_weight += density;
    }
    let score = stabilized_mean_vote(&votes) * votes.len() as f64;
    Ok(Prediction::from_score(score))
}

/// Scores plus the per-member diagnostics.
pub fn explain(x: &[f64], model: &FwdaModel, ensemble: &Ensemble) -> Result<Prediction> {
    let mut pred = model.predict_with(ensemble, x)?;
    pred.members = Some(member_votes(x, model, ensemble)?);
    Ok(pred)
}

/// Solver diagnostics from [`fit_with_report`].
#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub n: usize,
    pub dim: usize,
    pub dof_requested: f64,
    pub dof: f64,
    pub ridge_applied: bool,
    /// `None` for [`Variant::SampleFwda`], which skips the graphical lasso.
    pub kkt_residual: Option<f64>,
    pub outer_iterations: usize,
    pub converged: bool,
}

pub fn fit(data: &LabeledDataset, config: &FitConfig) -> Result<FwdaModel> {
    fit_with_report(data, config).map(|(m, _)| m)
}

pub fn fit_with_report(
    data: &LabeledDataset,
    config: &FitConfig,
) -> Result<(FwdaModel, FitReport)> {
    if !(config.lambda >= 0.0) || !config.lambda.is_finite() {
        return Err(FwdaError::InvalidParameter {
            name: "lambda",
            value: config.lambda,
        });
    }
    if config.ensemble_size == 0 {
        return Err(FwdaError::InvalidParameter {
            name: "ensemble_size",
            value: 0.0,
        });
    }
    let moments = training_moments(data)?;
    let (sigma, ridge_applied) = ridge_degenerate_diagonal(&moments.sigma_bar);
    let (scale, kkt, iterations, converged) = match config.variant {
        Variant::Fwda | Variant::DiscreteFwda => {
            let est = graphical_lasso(&sigma, config.lambda, config.glasso)?;
            let t = desparsify(&est.theta, &sigma)?;
            (
                project_pd(&t, config.floor_ratio),
                Some(est.kkt_residual),
                est.outer_iterations,
                est.converged,
            )
        }
        Variant::SampleFwda => (
            project_pd(&pseudo_inverse(&sigma, config.rank_tol), config.floor_ratio),
            None,
            0,
            true,
        ),
    };
    let dof_requested = (moments.n - 1) as f64;
    let model = FwdaModel::from_parts(ModelParts {
        variant: config.variant,
        lambda: config.lambda,
        ensemble_size: config.ensemble_size,
        seed: config.seed,
        dof_requested,
        global_mean: moments.global_mean,
        pos_mean: moments.pos_mean,
        neg_mean: moments.neg_mean,
        scale,
    })?;
    let report = FitReport {
        n: moments.n,
        dim: model.dim,
        dof_requested,
        dof: model.wishart.dof(),
        ridge_applied,
        kkt_residual: kkt,
        outer_iterations: iterations,
        converged,
    };
    Ok((model, report))
}

/// Covariance estimate used by the single-matrix LDA baselines.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CovarianceMode {
    PseudoInverse,
    Shrinkage(f64),
}

/// Plain LDA with one precision matrix estimated from `data`.
pub fn plain_lda_predict<'a, I>(
    data: &LabeledDataset,
    xs: I,
    mode: CovarianceMode,
) -> Result<Vec<Prediction>>
where
    I: IntoIterator<Item = &'a [f64]>,
{
    let moments = training_moments(data)?;
    let theta = match mode {
        CovarianceMode::PseudoInverse => pseudo_inverse(&moments.sigma_bar, DEFAULT_RANK_TOL),
        CovarianceMode::Shrinkage(gamma) => shrinkage_covariance(&moments.sigma_bar, gamma)?
            .cholesky()?
            .inverse(),
    };
    let diff: Vec<f64> = moments
        .pos_mean
        .iter()
        .zip(&moments.neg_mean)
        .map(|(a, b)| a - b)
        .collect();
    let direction = mat_vec(theta.as_matrix(), &diff);
    xs.into_iter()
        .map(|x| {
            check_len("input dimension", data.dim(), x.len())?;
            let centered: Vec<f64> = x
                .iter()
                .zip(&moments.global_mean)
                .map(|(a, b)| a - b)
                .collect();
            Ok(Prediction::from_score(dot(&centered, &direction)))
        })
        .collect()
}

impl fmt::Display for FitReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kkt: String = match self.kkt_residual {
            Some(v) => format!("{v:e}"),
            None => "n/a".into(),
        };
        write!(
            f,
            "n={} p={} dof={} (requested {}) kkt={} iterations={} converged={}",
            self.n,
            self.dim,
            self.dof,
            self.dof_requested,
            kkt,
            self.outer_iterations,
            self.converged
        )
    }
}
