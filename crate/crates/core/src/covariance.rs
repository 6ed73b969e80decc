//! Exponentially decaying correlation matrices over a time index, with the
//! factorizations the sampler and forecaster need: Cholesky solves, log
//! determinants, quadratic forms, and cross-correlation vectors for new
//! time points.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};
use crate::series::TimeIndex;

/// One diagonal bump is attempted when the factorization fails on
/// near-duplicate time points; a second failure is a hard error.
const JITTER: f64 = 1e-10;

/// Smallest eigenvalue admitted into the cached spectral decomposition.
const EIGEN_FLOOR: f64 = 1e-12;

/// Correlation matrix entry (i, j) = exp(-phi |t_i - t_j|), factored once and
/// shared read-only afterwards. Alongside the Cholesky factor we cache the
/// symmetric eigendecomposition: the latent-process update needs
/// (c1 I + c2 S^-1)^-1 with fresh scalars every sweep, which the eigenbasis
/// turns into a diagonal rescale instead of a new O(T^3) factorization.
#[derive(Debug, Clone)]
pub struct CorrelationFactor {
    phi: f64,
    times: Vec<f64>,
    matrix: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
    logdet: f64,
    eigvecs: DMatrix<f64>,
    eigvals: DVector<f64>,
}

/// Builds and factors the correlation matrix for a time index and decay
/// parameter. Deterministic; fails only if the matrix is numerically
/// singular even after one jitter retry.
pub fn build_correlation(index: &TimeIndex, phi: f64) -> Result<CorrelationFactor> {
    if !(phi > 0.0) || !phi.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "phi must be a positive real (got {phi})"
        )));
    }
    if index.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "correlation matrix needs T >= 2 (got {})",
            index.len()
        )));
    }
    let t = index.len();
    let times = index.times().to_vec();
    let matrix = DMatrix::from_fn(t, t, |i, j| (-phi * (times[i] - times[j]).abs()).exp());

    let (matrix, chol) = match Cholesky::new(matrix.clone()) {
        Some(c) => (matrix, c),
        None => {
            let mut bumped = matrix;
            for i in 0..t {
                bumped[(i, i)] += JITTER;
            }
            let c = Cholesky::new(bumped.clone()).ok_or_else(|| {
                Error::CholeskyFailure(format!(
                    "correlation matrix not positive definite at phi={phi} \
                     (near-duplicate time points?)"
                ))
            })?;
            (bumped, c)
        }
    };

    let logdet = 2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    let eig = matrix.clone().symmetric_eigen();
    let eigvals = eig.eigenvalues.map(|l| l.max(EIGEN_FLOOR));

    Ok(CorrelationFactor {
        phi,
        times,
        matrix,
        chol,
        logdet,
        eigvecs: eig.eigenvectors,
        eigvals,
    })
}

impl CorrelationFactor {
    pub fn dim(&self) -> usize {
        self.times.len()
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn logdet(&self) -> f64 {
        self.logdet
    }

    /// Eigenvectors Q and eigenvalues of the correlation matrix (S = Q L Q').
    pub fn eigen(&self) -> (&DMatrix<f64>, &DVector<f64>) {
        (&self.eigvecs, &self.eigvals)
    }

    /// S^-1 v via the Cholesky factor.
    pub fn solve(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_dim(v.len())?;
        Ok(self.chol.solve(v))
    }

    /// w' S^-1 w, computed as the squared norm of L^-1 w; nonnegative by
    /// construction.
    pub fn quadratic_form(&self, w: &DVector<f64>) -> Result<f64> {
        self.check_dim(w.len())?;
        let half = self
            .chol
            .l_dirty()
            .solve_lower_triangular(w)
            .expect("Cholesky factor has positive diagonal");
        Ok(half.norm_squared())
    }

    /// Correlation of a new time point with every observed one.
    pub fn cross_correlation(&self, t_new: f64) -> DVector<f64> {
        DVector::from_iterator(
            self.times.len(),
            self.times.iter().map(|&t| (-self.phi * (t - t_new).abs()).exp()),
        )
    }

    fn check_dim(&self, got: usize) -> Result<()> {
        if got != self.times.len() {
            return Err(Error::DimensionMismatch {
                expected: self.times.len(),
                got,
            });
        }
        Ok(())
    }
}

/// Free-standing variant of [`CorrelationFactor::cross_correlation`] for
/// callers that have not built a factor.
pub fn cross_correlation(index: &TimeIndex, phi: f64, t_new: f64) -> DVector<f64> {
    DVector::from_iterator(
        index.len(),
        index.times().iter().map(|&t| (-phi * (t - t_new).abs()).exp()),
    )
}
