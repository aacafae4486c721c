//! The Wishart distribution `W(T, v)` over `p x p` precision matrices.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::{LN_2, PI};

use nalgebra::DMatrix;
use rand_distr::{ChiSquared, Distribution, StandardNormal};

use crate::error::{check_len, FwdaError, Result};
use crate::linalg::{CholeskyFactor, SymmetricMatrix};
use crate::rng::substream;

/// `W(scale, dof)` with the scale's Cholesky factor cached.
///
/// Degrees of freedom below the dimension make the distribution singular, so
/// `dof` is clamped to at least `p`; the caller's value is kept in
/// `dof_requested`.
#[derive(Debug, Clone, PartialEq)]
pub struct WishartModel {
    scale: SymmetricMatrix,
    scale_chol: CholeskyFactor,
    dof: f64,
    dof_requested: f64,
}

impl WishartModel {
    pub fn new(scale: SymmetricMatrix, dof_requested: f64) -> Result<Self> {
        if !(dof_requested > 0.0) || !dof_requested.is_finite() {
            return Err(FwdaError::DomainError(format!(
                "degrees of freedom must be positive and finite, got {dof_requested}"
            )));
        }
        let scale_chol = scale.cholesky()?;
        let dof = dof_requested.max(scale.dim() as f64);
        Ok(Self {
            scale,
            scale_chol,
            dof,
            dof_requested,
        })
    }

    pub fn dim(&self) -> usize {
        self.scale.dim()
    }

    pub fn scale(&self) -> &SymmetricMatrix {
        &self.scale
    }

    pub fn scale_chol(&self) -> &CholeskyFactor {
        &self.scale_chol
    }

    pub fn dof(&self) -> f64 {
        self.dof
    }

    pub fn dof_requested(&self) -> f64 {
        self.dof_requested
    }
}

/// A sampled precision matrix with its Cholesky factor and log-determinant.
#[derive(Debug, Clone, PartialEq)]
pub struct PrecisionSample {
    theta: SymmetricMatrix,
    chol: CholeskyFactor,
    log_det: f64,
}

impl PrecisionSample {
    /// Factorizes `theta`; fails unless it is positive definite.
    pub fn new(theta: SymmetricMatrix) -> Result<Self> {
        let chol = theta.cholesky()?;
        let log_det = chol.log_det();
        Ok(Self {
            theta,
            chol,
            log_det,
        })
    }

    pub fn theta(&self) -> &SymmetricMatrix {
        &self.theta
    }

    pub fn chol(&self) -> &CholeskyFactor {
        &self.chol
    }

    pub fn log_det(&self) -> f64 {
        self.log_det
    }

    pub fn dim(&self) -> usize {
        self.theta.dim()
    }
}

/// `log Γ_p(a) = p(p-1)/4 log π + Σ_{j=1..p} log Γ(a + (1-j)/2)`.
pub fn log_multivariate_gamma(p: usize, a: f64) -> Result<f64> {
    if p == 0 {
        return Err(FwdaError::DomainError("dimension must be positive".into()));
    }
    let bound = (p as f64 - 1.0) / 2.0;
    if !(a > bound) {
        return Err(FwdaError::DomainError(format!(
            "multivariate gamma needs a > {bound}, got {a}"
        )));
    }
    let pf = p as f64;
    let mut acc = pf * (pf - 1.0) / 4.0 * libm::log(PI);
    for j in 1..=p {
        acc += libm::lgamma(a + (1.0 - j as f64) / 2.0);
    }
    Ok(acc)
}

/// Log-density of `theta` under `model`, evaluated through Cholesky factors.
pub fn log_density(theta: &SymmetricMatrix, model: &WishartModel) -> Result<f64> {
    let chol = theta.cholesky()?;
    log_density_factored(&chol, model)
}

pub(crate) fn log_density_factored(
    theta_chol: &CholeskyFactor,
    model: &WishartModel,
) -> Result<f64> {
    let p = model.dim();
    check_len("matrix dimension", p, theta_chol.dim())?;
    let v = model.dof;
    let pf = p as f64;
    if !(v > pf - 1.0) {
        return Err(FwdaError::DomainError(format!(
            "degrees of freedom {v} must exceed p - 1 = {}",
            pf - 1.0
        )));
    }
    // tr(T^{-1} Θ) = ||L_T^{-1} L_Θ||_F^2
    let lt = model.scale_chol.lower();
    let lth = theta_chol.lower();
    let mut col = alloc::vec![0.0; p];
    let mut trace = 0.0;
    for c in 0..p {
        for j in 0..p {
            col[j] = lth[(j, c)];
        }
        solve_lower(lt, &mut col);
        trace += col.iter().map(|x| x * x).sum::<f64>();
    }
    let log_det_theta = theta_chol.log_det();
    let log_det_scale = model.scale_chol.log_det();
    Ok((v - pf - 1.0) / 2.0 * log_det_theta
        - 0.5 * trace
        - v * pf / 2.0 * LN_2
        - v / 2.0 * log_det_scale
        - log_multivariate_gamma(p, v / 2.0)?)
}

fn solve_lower(l: &DMatrix<f64>, b: &mut [f64]) {
    for j in 0..b.len() {
        let mut s = b[j];
        for k in 0..j {
            s -= l[(j, k)] * b[k];
        }
        b[j] = s / l[(j, j)];
    }
}

/// Draw number `index` of the ensemble identified by `seed`.
///
/// Bartlett decomposition: `A` is lower triangular with
/// `A_jj = sqrt(χ²(v - j))` (0-based `j`) and standard normal entries below
/// the diagonal; the draw is `Θ = (L A)(L A)^T` where `T = L L^T`. Since `L A`
/// is lower triangular with a positive diagonal it is the Cholesky factor of
/// `Θ` and is kept as such.
pub fn sample_one(model: &WishartModel, seed: u64, index: u64) -> PrecisionSample {
    let p = model.dim();
    let mut rng = substream(seed, index);
    let mut a = DMatrix::<f64>::zeros(p, p);
    for j in 0..p {
        let k = model.dof - j as f64;
        let chi = ChiSquared::new(k).expect("dof >= p keeps chi-square shape positive");
        a[(j, j)] = libm::sqrt(chi.sample(&mut rng));
        for c in 0..j {
            a[(j, c)] = StandardNormal.sample(&mut rng);
        }
    }
    let l = model.scale_chol.lower();
    let mut b = DMatrix::<f64>::zeros(p, p);
    for j in 0..p {
        for c in 0..=j {
            let mut s = 0.0;
            for m in c..=j {
                s += l[(j, m)] * a[(m, c)];
            }
            b[(j, c)] = s;
        }
    }
    let chol = CholeskyFactor::from_lower_unchecked(b);
    let theta = chol.reconstruct();
    let log_det = chol.log_det();
    PrecisionSample {
        theta,
        chol,
        log_det,
    }
}

/// `count` independent draws, ordered by draw index.
pub fn sample(model: &WishartModel, seed: u64, count: usize) -> Vec<PrecisionSample> {
    (0..count as u64)
        .map(|i| sample_one(model, seed, i))
        .collect()
}
