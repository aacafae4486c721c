//! Covariance and precision estimation.
//!
//! The graphical lasso minimizes
//!
//! ```text
//! tr(S Θ) - log|Θ| + λ Σ_{j≠k} |Θ_jk|
//! ```
//!
//! over positive-definite `Θ`, leaving the diagonal unpenalized. It is solved
//! by block coordinate descent on the covariance estimate `W = Θ^{-1}`: each
//! column of `W` is updated through a lasso subproblem solved by cyclic
//! coordinate descent, and `Θ` is read off the converged coefficients.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::error::{check_len, FwdaError, Result};
use crate::linalg::{symmetrize, SymmetricMatrix};

/// Diagonal entries below this are treated as degenerate features.
pub const DEGENERATE_DIAGONAL: f64 = 1e-12;
/// Ridge added to the whole diagonal when a degenerate feature is present.
pub const DEGENERATE_RIDGE: f64 = 1e-8;
/// Default eigenvalue floor ratio for [`project_pd`].
pub const DEFAULT_FLOOR_RATIO: f64 = 1e-6;
/// Default relative rank cutoff for [`pseudo_inverse`].
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

const INNER_MAX_SWEEPS: usize = 10_000;

/// Unbiased sample covariance of the rows of an `n x p` matrix, centered on
/// the column mean.
pub fn sample_covariance(rows: &DMatrix<f64>) -> Result<SymmetricMatrix> {
    let (n, p) = rows.shape();
    if n < 2 {
        return Err(FwdaError::InsufficientSamples { have: n, need: 2 });
    }
    let mean = column_mean(rows);
    let mut acc = DMatrix::<f64>::zeros(p, p);
    let mut centered = vec![0.0; p];
    for i in 0..n {
        for k in 0..p {
            centered[k] = rows[(i, k)] - mean[k];
        }
        for j in 0..p {
            let cj = centered[j];
            for k in j..p {
                acc[(j, k)] += cj * centered[k];
            }
        }
    }
    let denom = (n - 1) as f64;
    for j in 0..p {
        for k in j..p {
            let v = acc[(j, k)] / denom;
            acc[(j, k)] = v;
            acc[(k, j)] = v;
        }
    }
    SymmetricMatrix::new(acc)
}

/// Column means, summed in row order.
pub fn column_mean(rows: &DMatrix<f64>) -> Vec<f64> {
    let (n, p) = rows.shape();
    let mut mean = vec![0.0; p];
    for i in 0..n {
        for k in 0..p {
            mean[k] += rows[(i, k)];
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    mean
}

/// Adds [`DEGENERATE_RIDGE`] to the diagonal if any entry is below
/// [`DEGENERATE_DIAGONAL`]. Returns whether the ridge was applied.
pub fn ridge_degenerate_diagonal(sigma: &SymmetricMatrix) -> (SymmetricMatrix, bool) {
    let degenerate = sigma.diagonal().iter().any(|&d| d < DEGENERATE_DIAGONAL);
    if !degenerate {
        return (sigma.clone(), false);
    }
    let mut m = sigma.as_matrix().clone();
    for j in 0..sigma.dim() {
        m[(j, j)] += DEGENERATE_RIDGE;
    }
    (SymmetricMatrix::new(m).expect("square input"), true)
}

/// Stopping rule for [`graphical_lasso`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GlassoOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for GlassoOptions {
    fn default() -> Self {
        Self {
            tol: 1e-4,
            max_iter: 100,
        }
    }
}

/// Graphical lasso solution plus solver diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct PrecisionEstimate {
    pub theta: SymmetricMatrix,
    pub lambda: f64,
    pub outer_iterations: usize,
    /// Max violation of the subgradient optimality conditions at `theta`.
    pub kkt_residual: f64,
    pub converged: bool,
}

/// Solves the graphical lasso for covariance `sigma_bar` and penalty `lambda`.
///
/// `converged` is set once the mean absolute change of the off-diagonal of
/// `W` over a sweep drops below `tol * mean|S_jk|` and the KKT residual is at
/// most `tol`. Running out of iterations is not an error.
pub fn graphical_lasso(
    sigma_bar: &SymmetricMatrix,
    lambda: f64,
    opts: GlassoOptions,
) -> Result<PrecisionEstimate> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(FwdaError::InvalidParameter {
            name: "lambda",
            value: lambda,
        });
    }
    if !(opts.tol > 0.0) {
        return Err(FwdaError::InvalidParameter {
            name: "tol",
            value: opts.tol,
        });
    }
    if opts.max_iter == 0 {
        return Err(FwdaError::InvalidParameter {
            name: "max_iter",
            value: 0.0,
        });
    }
    for (index, &value) in sigma_bar.diagonal().iter().enumerate() {
        if !(value > 0.0) || !value.is_finite() {
            return Err(FwdaError::DegenerateCovariance { index, value });
        }
    }
    let (s, _) = ridge_degenerate_diagonal(sigma_bar);
    let p = s.dim();
    let sm = s.as_matrix();

    if p == 1 {
        let theta = SymmetricMatrix::from_diagonal(&[1.0 / sm[(0, 0)]]);
        let kkt = kkt_residual(&s, &theta, lambda)?;
        return Ok(PrecisionEstimate {
            theta,
            lambda,
            outer_iterations: 0,
            kkt_residual: kkt,
            converged: kkt <= opts.tol,
        });
    }

    let off_count = (p * (p - 1)) as f64;
    let mean_abs_off = (0..p)
        .flat_map(|j| (0..p).filter(move |&k| k != j).map(move |k| (j, k)))
        .map(|(j, k)| sm[(j, k)].abs())
        .sum::<f64>()
        / off_count;
    let mean_diag = s.trace() / p as f64;
    let inner_tol = 1e-3 * opts.tol * mean_diag.max(f64::MIN_POSITIVE);

    let mut w = sm.clone();
    // beta[(k, j)]: coefficient of variable k in the lasso for column j
    let mut beta = DMatrix::<f64>::zeros(p, p);
    let mut w12 = vec![0.0; p];

    let mut theta = SymmetricMatrix::identity(p);
    let mut kkt = f64::INFINITY;
    let mut converged = false;
    let mut iterations = 0;

    for iter in 1..=opts.max_iter {
        iterations = iter;
        let mut change = 0.0;
        for j in 0..p {
            // w12 = W11 * beta_j, maintained incrementally
            for k in 0..p {
                if k == j {
                    w12[k] = 0.0;
                    continue;
                }
                let mut acc = 0.0;
                for l in 0..p {
                    if l != j {
                        acc += w[(k, l)] * beta[(l, j)];
                    }
                }
                w12[k] = acc;
            }
            for _ in 0..INNER_MAX_SWEEPS {
                let mut max_step: f64 = 0.0;
                for k in 0..p {
                    if k == j {
                        continue;
                    }
                    let wkk = w[(k, k)];
                    let old = beta[(k, j)];
                    let r = sm[(k, j)] - (w12[k] - wkk * old);
                    let new = soft_threshold(r, lambda) / wkk;
                    let delta = new - old;
                    if delta != 0.0 {
                        beta[(k, j)] = new;
                        for l in 0..p {
                            if l != j {
                                w12[l] += w[(l, k)] * delta;
                            }
                        }
                        max_step = max_step.max(delta.abs() * wkk);
                    }
                }
                if max_step <= inner_tol {
                    break;
                }
            }
            for k in 0..p {
                if k != j {
                    change += (w[(k, j)] - w12[k]).abs() * 2.0;
                    w[(k, j)] = w12[k];
                    w[(j, k)] = w12[k];
                }
            }
        }
        let mean_change = change / off_count;
        if mean_change <= opts.tol * mean_abs_off {
            theta = precision_from_coefficients(&w, &beta);
            kkt = kkt_residual(&s, &theta, lambda).unwrap_or(f64::INFINITY);
            if kkt <= opts.tol {
                converged = true;
                break;
            }
        }
    }
    if !converged {
        theta = precision_from_coefficients(&w, &beta);
        kkt = kkt_residual(&s, &theta, lambda).unwrap_or(f64::INFINITY);
    }
    if !theta.is_positive_definite() {
        theta = project_pd(&theta, DEFAULT_FLOOR_RATIO);
        kkt = kkt_residual(&s, &theta, lambda).unwrap_or(f64::INFINITY);
        converged = false;
    }
    Ok(PrecisionEstimate {
        theta,
        lambda,
        outer_iterations: iterations,
        kkt_residual: kkt,
        converged,
    })
}

fn soft_threshold(x: f64, t: f64) -> f64 {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}

/// `Θ_jj = 1 / (W_jj - w12ᵀβ)`, `Θ_kj = -β_k Θ_jj`.
fn precision_from_coefficients(w: &DMatrix<f64>, beta: &DMatrix<f64>) -> SymmetricMatrix {
    let p = w.nrows();
    let mut theta = DMatrix::<f64>::zeros(p, p);
    for j in 0..p {
        let mut wb = 0.0;
        for k in 0..p {
            if k != j {
                wb += w[(j, k)] * beta[(k, j)];
            }
        }
        let tjj = 1.0 / (w[(j, j)] - wb);
        theta[(j, j)] = tjj;
        for k in 0..p {
            if k != j {
                theta[(k, j)] = -beta[(k, j)] * tjj;
            }
        }
    }
    SymmetricMatrix::new(symmetrize(theta)).expect("square")
}

/// Graphical lasso objective `tr(SΘ) - log|Θ| + λ Σ_{j≠k}|Θ_jk|`.
pub fn glasso_objective(
    sigma: &SymmetricMatrix,
    theta: &SymmetricMatrix,
    lambda: f64,
) -> Result<f64> {
    check_len("matrix dimension", sigma.dim(), theta.dim())?;
    let p = sigma.dim();
    let log_det = theta.cholesky()?.log_det();
    let mut tr = 0.0;
    let mut l1 = 0.0;
    for j in 0..p {
        for k in 0..p {
            tr += sigma.get(j, k) * theta.get(k, j);
            if j != k {
                l1 += theta.get(j, k).abs();
            }
        }
    }
    Ok(tr - log_det + lambda * l1)
}

/// Largest violation of the graphical lasso optimality conditions at `theta`.
pub fn kkt_residual(sigma: &SymmetricMatrix, theta: &SymmetricMatrix, lambda: f64) -> Result<f64> {
    check_len("matrix dimension", sigma.dim(), theta.dim())?;
    let cov = theta.cholesky()?.inverse();
    let p = sigma.dim();
    let mut worst: f64 = 0.0;
    for j in 0..p {
        for k in 0..p {
            let g = sigma.get(j, k) - cov.get(j, k);
            let t = theta.get(j, k);
            let v = if j == k {
                g.abs()
            } else if t != 0.0 {
                (g + lambda * t.signum()).abs()
            } else {
                (g.abs() - lambda).max(0.0)
            };
            worst = worst.max(v);
        }
    }
    Ok(worst)
}

/// De-sparsified estimator `2Θ - ΘSΘ`.
pub fn desparsify(
    theta_hat: &SymmetricMatrix,
    sigma_bar: &SymmetricMatrix,
) -> Result<SymmetricMatrix> {
    check_len("matrix dimension", theta_hat.dim(), sigma_bar.dim())?;
    let t = theta_hat.as_matrix();
    let product = t * sigma_bar.as_matrix() * t;
    SymmetricMatrix::new(t * 2.0 - product)
}

/// Clips eigenvalues below `floor_ratio * max(λ_max, 1)` up to that floor.
pub fn project_pd(m: &SymmetricMatrix, floor_ratio: f64) -> SymmetricMatrix {
    let (mut values, vectors) = m.eigen();
    let floor = floor_ratio * values.max().max(1.0);
    if values.iter().all(|&v| v >= floor) {
        return m.clone();
    }
    values.iter_mut().for_each(|v| *v = v.max(floor));
    SymmetricMatrix::from_eigen(&values, &vectors)
}

/// `(1-γ)S + γ (tr(S)/p) I`.
pub fn shrinkage_covariance(sigma_bar: &SymmetricMatrix, gamma: f64) -> Result<SymmetricMatrix> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(FwdaError::InvalidParameter {
            name: "gamma",
            value: gamma,
        });
    }
    let p = sigma_bar.dim();
    let target = sigma_bar.trace() / p as f64;
    let mut m = sigma_bar.as_matrix() * (1.0 - gamma);
    for j in 0..p {
        m[(j, j)] += gamma * target;
    }
    SymmetricMatrix::new(m)
}

/// Moore-Penrose pseudo-inverse via the eigendecomposition; eigenvalues at or
/// below `rank_tol * λ_max` are treated as zero.
pub fn pseudo_inverse(m: &SymmetricMatrix, rank_tol: f64) -> SymmetricMatrix {
    let (mut values, vectors) = m.eigen();
    let cutoff = rank_tol * values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    values.iter_mut().for_each(|v| {
        *v = if v.abs() > cutoff && *v != 0.0 {
            1.0 / *v
        } else {
            0.0
        }
    });
    SymmetricMatrix::from_eigen(&values, &vectors)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sym(p: usize, e: &[f64]) -> SymmetricMatrix {
        SymmetricMatrix::from_row_slice(p, e).unwrap()
    }

    #[test]
    fn sample_covariance_hand_cases() {
        let zero =
            sample_covariance(&DMatrix::from_row_slice(2, 2, &[1.0, 3.0, 1.0, 3.0])).unwrap();
        assert!(zero.as_matrix().iter().all(|&v| v == 0.0));
        let c = sample_covariance(&DMatrix::from_row_slice(2, 1, &[0.0, 2.0])).unwrap();
        assert_eq!(c.get(0, 0), 2.0);
    }

    #[test]
    fn sample_covariance_needs_two_rows() {
        let err = sample_covariance(&DMatrix::from_row_slice(1, 2, &[1.0, 2.0])).unwrap_err();
        assert_eq!(err, FwdaError::InsufficientSamples { have: 1, need: 2 });
    }

    #[test]
    fn glasso_diagonal_input() {
        let s = SymmetricMatrix::from_diagonal(&[2.0, 4.0]);
        for lambda in [0.0, 0.3, 5.0] {
            let est = graphical_lasso(&s, lambda, GlassoOptions::default()).unwrap();
            assert!(est.converged);
            assert!((est.theta.get(0, 0) - 0.5).abs() < 1e-10);
            assert!((est.theta.get(1, 1) - 0.25).abs() < 1e-10);
            assert_eq!(est.theta.get(0, 1), 0.0);
        }
    }

    #[test]
    fn glasso_full_shrinkage() {
        let s = sym(3, &[2.0, 0.5, -0.3, 0.5, 1.0, 0.2, -0.3, 0.2, 3.0]);
        let est = graphical_lasso(&s, 0.5, GlassoOptions::default()).unwrap();
        assert!(est.converged);
        for j in 0..3 {
            for k in 0..3 {
                if j == k {
                    assert!((est.theta.get(j, j) - 1.0 / s.get(j, j)).abs() < 1e-10);
                } else {
                    assert_eq!(est.theta.get(j, k), 0.0);
                }
            }
        }
    }

    #[test]
    fn glasso_lambda_zero_inverts() {
        let s = sym(3, &[2.0, 0.5, -0.3, 0.5, 1.0, 0.2, -0.3, 0.2, 3.0]);
        let opts = GlassoOptions {
            tol: 1e-9,
            max_iter: 500,
        };
        let est = graphical_lasso(&s, 0.0, opts).unwrap();
        assert!(est.converged);
        let inv = s.cholesky().unwrap().inverse();
        for j in 0..3 {
            for k in 0..3 {
                assert!((est.theta.get(j, k) - inv.get(j, k)).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn glasso_rejects_nonpositive_diagonal() {
        let s = SymmetricMatrix::from_diagonal(&[1.0, 0.0]);
        assert!(matches!(
            graphical_lasso(&s, 0.1, GlassoOptions::default()),
            Err(FwdaError::DegenerateCovariance { index: 1, .. })
        ));
        let s = SymmetricMatrix::from_diagonal(&[-1.0, 1.0]);
        assert!(graphical_lasso(&s, 0.1, GlassoOptions::default()).is_err());
    }

    #[test]
    fn glasso_reports_nonconvergence() {
        let s = sym(3, &[2.0, 0.9, 0.7, 0.9, 1.0, 0.6, 0.7, 0.6, 3.0]);
        let est = graphical_lasso(
            &s,
            0.01,
            GlassoOptions {
                tol: 1e-14,
                max_iter: 1,
            },
        )
        .unwrap();
        assert!(!est.converged);
        assert_eq!(est.outer_iterations, 1);
        assert!(est.theta.is_positive_definite());
    }

    #[test]
    fn tiny_diagonal_gets_ridge() {
        let s = SymmetricMatrix::from_diagonal(&[1.0, 1e-14]);
        let (r, applied) = ridge_degenerate_diagonal(&s);
        assert!(applied);
        assert_eq!(r.get(1, 1), 1e-14 + DEGENERATE_RIDGE);
        let est = graphical_lasso(&s, 0.1, GlassoOptions::default()).unwrap();
        assert!(est.theta.is_positive_definite());
    }

    #[test]
    fn desparsify_fixed_points() {
        let s = sym(2, &[2.0, 0.5, 0.5, 1.0]);
        let inv = s.cholesky().unwrap().inverse();
        let t = desparsify(&inv, &s).unwrap();
        for j in 0..2 {
            for k in 0..2 {
                assert!((t.get(j, k) - inv.get(j, k)).abs() < 1e-12);
            }
        }
        let i = SymmetricMatrix::identity(3);
        assert_eq!(desparsify(&i, &i).unwrap(), i);
        assert!(matches!(
            desparsify(&i, &SymmetricMatrix::identity(2)),
            Err(FwdaError::ShapeError { .. })
        ));
    }

    #[test]
    fn project_pd_cases() {
        let pd = sym(2, &[2.0, 0.3, 0.3, 1.0]);
        assert_eq!(project_pd(&pd, 1e-6), pd);
        let clipped = project_pd(&SymmetricMatrix::from_diagonal(&[1.0, -1.0]), 1e-6);
        assert!((clipped.get(0, 0) - 1.0).abs() < 1e-15);
        assert!((clipped.get(1, 1) - 1e-6).abs() < 1e-15);
        assert!(clipped.get(0, 1).abs() < 1e-15);
    }

    #[test]
    fn shrinkage_cases() {
        let s = SymmetricMatrix::from_diagonal(&[1.0, 3.0]);
        assert_eq!(shrinkage_covariance(&s, 0.0).unwrap(), s);
        assert_eq!(
            shrinkage_covariance(&s, 1.0).unwrap(),
            SymmetricMatrix::from_diagonal(&[2.0, 2.0])
        );
        assert_eq!(
            shrinkage_covariance(&s, 0.5).unwrap(),
            SymmetricMatrix::from_diagonal(&[1.5, 2.5])
        );
        assert!(matches!(
            shrinkage_covariance(&s, 1.5),
            Err(FwdaError::InvalidParameter { name: "gamma", .. })
        ));
    }

    #[test]
    fn pseudo_inverse_diagonal() {
        let full = pseudo_inverse(
            &SymmetricMatrix::from_diagonal(&[2.0, 4.0]),
            DEFAULT_RANK_TOL,
        );
        assert!((full.get(0, 0) - 0.5).abs() < 1e-15);
        assert!((full.get(1, 1) - 0.25).abs() < 1e-15);
        let def = pseudo_inverse(
            &SymmetricMatrix::from_diagonal(&[2.0, 0.0]),
            DEFAULT_RANK_TOL,
        );
        assert!((def.get(0, 0) - 0.5).abs() < 1e-15);
        assert_eq!(def.get(1, 1), 0.0);
    }
}
