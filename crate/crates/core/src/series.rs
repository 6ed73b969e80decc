//! Domain types shared by the whole crate: time indices, observed count
//! series with their design matrices, sampler configuration, and posterior
//! sample containers.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Real-valued time stamps in the data's native resolution (months, days, ...).
/// Gaps may be irregular; only the pairwise distances |t_i - t_j| matter.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeIndex {
    times: Vec<f64>,
}

impl TimeIndex {
    /// Wraps raw time stamps. Monotonicity is reported by
    /// [`validate_series`], not enforced here, so that diagnostics can be
    /// collected on malformed input.
    pub fn new(times: Vec<f64>) -> Self {
        Self { times }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn last(&self) -> f64 {
        *self.times.last().expect("non-empty index")
    }

    pub fn is_strictly_increasing(&self) -> bool {
        self.times.windows(2).all(|w| w[0] < w[1])
    }

    /// Smallest gap between consecutive time points.
    pub fn min_gap(&self) -> f64 {
        self.times
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min)
    }
}

/// Counts paired with a design matrix over a time index.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservedSeries {
    pub index: TimeIndex,
    pub counts: Vec<u64>,
    /// T x p design matrix; the first column may be an all-ones intercept.
    pub design: DMatrix<f64>,
}

impl ObservedSeries {
    /// Structural constructor: only checks that the three parts agree in
    /// length. Content invariants are reported by [`validate_series`].
    pub fn new(index: TimeIndex, counts: Vec<u64>, design: DMatrix<f64>) -> Result<Self> {
        if counts.len() != index.len() {
            return Err(Error::DimensionMismatch {
                expected: index.len(),
                got: counts.len(),
            });
        }
        if design.nrows() != index.len() {
            return Err(Error::DimensionMismatch {
                expected: index.len(),
                got: design.nrows(),
            });
        }
        Ok(Self {
            index,
            counts,
            design,
        })
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// Number of design columns.
    pub fn p(&self) -> usize {
        self.design.ncols()
    }

    pub fn counts_f64(&self) -> DVector<f64> {
        DVector::from_iterator(self.len(), self.counts.iter().map(|&c| c as f64))
    }

    /// Covariate row at position i as a column vector.
    pub fn x_row(&self, i: usize) -> DVector<f64> {
        self.design.row(i).transpose()
    }

    /// Chronological split: first `n_head` observations and the rest.
    pub fn split_at(&self, n_head: usize) -> Result<(ObservedSeries, ObservedSeries)> {
        if n_head == 0 || n_head >= self.len() {
            return Err(Error::InsufficientData(format!(
                "cannot split a series of length {} at {}",
                self.len(),
                n_head
            )));
        }
        let head = ObservedSeries::new(
            TimeIndex::new(self.index.times()[..n_head].to_vec()),
            self.counts[..n_head].to_vec(),
            self.design.rows(0, n_head).into_owned(),
        )?;
        let tail = ObservedSeries::new(
            TimeIndex::new(self.index.times()[n_head..].to_vec()),
            self.counts[n_head..].to_vec(),
            self.design.rows(n_head, self.len() - n_head).into_owned(),
        )?;
        Ok((head, tail))
    }
}

/// A single invariant violation found by [`validate_series`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    TimesNotStrictlyIncreasing,
    SeriesTooShort { len: usize },
    DesignRankDeficient,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Violation::TimesNotStrictlyIncreasing => write!(f, "times not strictly increasing"),
            Violation::SeriesTooShort { len } => write!(f, "series too short (T={len}, need >=2)"),
            Violation::DesignRankDeficient => write!(f, "design rank-deficient"),
        }
    }
}

/// Collects every violated invariant without mutating the input. Duplicate
/// time stamps fall under the strict-increase check: they would make the
/// correlation matrix singular downstream.
pub fn validate_series(series: &ObservedSeries) -> Vec<Violation> {
    let mut out = Vec::new();
    if series.len() < 2 {
        out.push(Violation::SeriesTooShort { len: series.len() });
    }
    if !series.index.is_strictly_increasing() {
        out.push(Violation::TimesNotStrictlyIncreasing);
    }
    let p = series.p();
    let rank_deficient = p > series.len() || {
        let svd = series.design.clone().svd(false, false);
        svd.rank(1e-10 * series.design.amax().max(1.0)) < p
    };
    if rank_deficient {
        out.push(Violation::DesignRankDeficient);
    }
    out
}

/// Convenience: error out unless the series passes every check.
pub fn require_valid(series: &ObservedSeries) -> Result<()> {
    let violations = validate_series(series);
    if violations.is_empty() {
        Ok(())
    } else {
        Err(Error::InvalidSeries(violations))
    }
}

/// Priors, decay parameter, and chain settings for one fit.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    /// Inverse gamma prior shape a (> 2 so the prior has finite mean and variance).
    pub prior_shape: f64,
    /// Inverse gamma prior scale b (> 0).
    pub prior_scale: f64,
    /// Correlation decay parameter, fixed for the fit.
    pub phi: f64,
    /// Candidate grid for cross-validated selection of phi.
    pub phi_grid: Vec<f64>,
    pub n_chains: usize,
    /// Convergence threshold on the largest potential scale reduction factor.
    pub gr_threshold: f64,
    /// Sweeps between convergence checks.
    pub gr_check_interval: usize,
    pub max_burn_sweeps: usize,
    /// Thinning interval m (> 10): every m-th post-burn state is stored.
    pub thin: usize,
    /// Total number of stored posterior draws, pooled across chains.
    pub posterior_size: usize,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            prior_shape: 3.0,
            prior_scale: 1.0,
            phi: 1.0,
            phi_grid: vec![0.01, 0.1, 0.25, 0.5, 1.0, 1.5, 3.0],
            n_chains: 2,
            gr_threshold: 1.5,
            gr_check_interval: 100,
            max_burn_sweeps: 50_000,
            thin: 20,
            posterior_size: 1000,
            seed: 0,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidConfig(msg));
        if !(self.prior_shape > 2.0) {
            return fail(format!("prior shape a must be > 2 (got {})", self.prior_shape));
        }
        if !(self.prior_scale > 0.0) {
            return fail(format!("prior scale b must be > 0 (got {})", self.prior_scale));
        }
        if !(self.phi > 0.0) || !self.phi.is_finite() {
            return fail(format!("phi must be a positive real (got {})", self.phi));
        }
        if self.phi_grid.iter().any(|&p| !(p > 0.0) || !p.is_finite()) {
            return fail("every phi grid value must be a positive real".into());
        }
        if self.n_chains < 2 {
            return fail(format!("need at least 2 chains (got {})", self.n_chains));
        }
        if self.thin <= 10 {
            return fail(format!("thinning interval must be > 10 (got {})", self.thin));
        }
        if self.posterior_size < 1 {
            return fail("posterior size must be >= 1".into());
        }
        if self.gr_check_interval == 0 {
            return fail("Gelman-Rubin check interval must be >= 1".into());
        }
        Ok(())
    }
}

/// One full parameter configuration of the model.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainState {
    pub beta: DVector<f64>,
    pub sigma2: f64,
    pub sigmaw2: f64,
    pub w: DVector<f64>,
    pub mu: DVector<f64>,
}

/// Thinned posterior draws pooled across chains, plus burn-in diagnostics.
#[derive(Debug, Clone)]
pub struct PosteriorSamples {
    pub draws: Vec<ChainState>,
    pub phi_used: f64,
    pub burn_sweeps_used: usize,
    /// (sweep, max R-hat) recorded at each convergence check.
    pub gr_history: Vec<(usize, f64)>,
}

impl PosteriorSamples {
    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }

    pub fn beta_mean(&self) -> Result<DVector<f64>> {
        let first = self.draws.first().ok_or(Error::EmptyPosterior)?;
        let mut acc = DVector::zeros(first.beta.len());
        for d in &self.draws {
            acc += &d.beta;
        }
        Ok(acc / self.draws.len() as f64)
    }

    pub fn mu_mean(&self) -> Result<DVector<f64>> {
        let first = self.draws.first().ok_or(Error::EmptyPosterior)?;
        let mut acc = DVector::zeros(first.mu.len());
        for d in &self.draws {
            acc += &d.mu;
        }
        Ok(acc / self.draws.len() as f64)
    }

    pub fn sigma2_mean(&self) -> Result<f64> {
        if self.draws.is_empty() {
            return Err(Error::EmptyPosterior);
        }
        Ok(self.draws.iter().map(|d| d.sigma2).sum::<f64>() / self.draws.len() as f64)
    }

    pub fn sigmaw2_mean(&self) -> Result<f64> {
        if self.draws.is_empty() {
            return Err(Error::EmptyPosterior);
        }
        Ok(self.draws.iter().map(|d| d.sigmaw2).sum::<f64>() / self.draws.len() as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(times: Vec<f64>, counts: Vec<u64>, design: DMatrix<f64>) -> ObservedSeries {
        ObservedSeries::new(TimeIndex::new(times), counts, design).unwrap()
    }

    #[test]
    fn valid_series_has_no_violations() {
        let t: Vec<f64> = (1..=10).map(|i| i as f64).collect();
        let design = DMatrix::from_fn(10, 2, |i, j| if j == 0 { 1.0 } else { i as f64 });
        let s = series(t, vec![3; 10], design);
        assert!(validate_series(&s).is_empty());
        // pure: same input, same answer
        assert_eq!(validate_series(&s), validate_series(&s));
    }

    #[test]
    fn repeated_time_stamp_is_flagged() {
        let design = DMatrix::from_element(3, 1, 1.0);
        let s = series(vec![1.0, 1.0, 2.0], vec![0, 1, 2], design);
        assert_eq!(
            validate_series(&s),
            vec![Violation::TimesNotStrictlyIncreasing]
        );
        assert_eq!(
            Violation::TimesNotStrictlyIncreasing.to_string(),
            "times not strictly increasing"
        );
    }

    #[test]
    fn duplicated_column_is_rank_deficient() {
        let design = DMatrix::from_fn(5, 3, |i, j| match j {
            0 => 1.0,
            _ => (i + 2) as f64, // columns 1 and 2 identical
        });
        let s = series((1..=5).map(|i| i as f64).collect(), vec![1; 5], design);
        assert_eq!(validate_series(&s), vec![Violation::DesignRankDeficient]);
    }

    #[test]
    fn too_few_rows_and_wide_design_flagged() {
        let design = DMatrix::from_fn(1, 2, |_, j| (j + 1) as f64);
        let s = series(vec![1.0], vec![2], design);
        let v = validate_series(&s);
        assert!(v.contains(&Violation::SeriesTooShort { len: 1 }));
        assert!(v.contains(&Violation::DesignRankDeficient));
    }

    #[test]
    fn mismatched_lengths_rejected_at_construction() {
        let r = ObservedSeries::new(
            TimeIndex::new(vec![1.0, 2.0]),
            vec![1, 2, 3],
            DMatrix::from_element(2, 1, 1.0),
        );
        assert!(matches!(r, Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn config_bounds_are_enforced() {
        let ok = ModelConfig::default();
        assert!(ok.validate().is_ok());
        assert!(ModelConfig { prior_shape: 2.0, ..ok.clone() }.validate().is_err());
        assert!(ModelConfig { prior_scale: 0.0, ..ok.clone() }.validate().is_err());
        assert!(ModelConfig { phi: -1.0, ..ok.clone() }.validate().is_err());
        assert!(ModelConfig { thin: 10, ..ok.clone() }.validate().is_err());
        assert!(ModelConfig { n_chains: 1, ..ok.clone() }.validate().is_err());
        assert!(ModelConfig { posterior_size: 0, ..ok }.validate().is_err());
    }

    #[test]
    fn split_is_chronological() {
        let design = DMatrix::from_fn(6, 1, |_, _| 1.0);
        let s = series((1..=6).map(|i| i as f64).collect(), vec![1, 2, 3, 4, 5, 6], design);
        let (head, tail) = s.split_at(4).unwrap();
        assert_eq!(head.counts, vec![1, 2, 3, 4]);
        assert_eq!(tail.counts, vec![5, 6]);
        assert_eq!(tail.index.times(), &[5.0, 6.0]);
        assert!(s.split_at(0).is_err());
        assert!(s.split_at(6).is_err());
    }
}
