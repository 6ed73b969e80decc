//! The blocked Gibbs sampler: inverse-gamma updates for the two variance
//! components, a conjugate normal update for the regression coefficients,
//! an eigenbasis-rescaled normal update for the latent correlated process,
//! and per-component ARMS updates for the log intensities. Multiple chains
//! run until the largest potential scale reduction factor drops below the
//! configured threshold, then thinned draws are pooled round-robin.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::covariance::CorrelationFactor;
use crate::error::{Error, Result};
use crate::exec;
use crate::rng::{purpose, sample_inverse_gamma, sample_arms, ArmsTarget, RngStream};
use crate::series::{
    require_valid, ChainState, ModelConfig, ObservedSeries, PosteriorSamples,
};

/// Read-only quantities shared by every chain: the data, the factored
/// correlation matrix, and design-matrix products that stay constant across
/// sweeps.
pub struct ConditionalContext<'a> {
    pub series: &'a ObservedSeries,
    pub factor: &'a CorrelationFactor,
    pub config: &'a ModelConfig,
    y: DVector<f64>,
    xtx_inv: DMatrix<f64>,
    /// Lower Cholesky factor of (X'X)^-1, for coefficient draws.
    xtx_inv_chol: DMatrix<f64>,
}

impl<'a> ConditionalContext<'a> {
    pub fn new(
        series: &'a ObservedSeries,
        factor: &'a CorrelationFactor,
        config: &'a ModelConfig,
    ) -> Result<Self> {
        require_valid(series)?;
        config.validate()?;
        if factor.times() != series.index.times() {
            return Err(Error::InvalidParameter(
                "correlation factor was built on a different time index".into(),
            ));
        }
        if factor.phi() != config.phi {
            return Err(Error::InvalidParameter(format!(
                "correlation factor phi {} does not match config phi {}",
                factor.phi(),
                config.phi
            )));
        }
        let x = &series.design;
        let xtx = x.transpose() * x;
        let chol = Cholesky::new(xtx).ok_or(Error::RankDeficient)?;
        let xtx_inv = chol.inverse();
        let xtx_inv_chol = Cholesky::new(xtx_inv.clone())
            .ok_or(Error::RankDeficient)?
            .l();
        Ok(Self {
            series,
            factor,
            config,
            y: series.counts_f64(),
            xtx_inv,
            xtx_inv_chol,
        })
    }

    fn t_len(&self) -> usize {
        self.series.len()
    }
}

/// sigma^2 | rest ~ IG(a + T/2, b + ||mu - X beta - w||^2 / 2)
pub fn update_sigma2(rng: &mut RngStream, ctx: &ConditionalContext, state: &ChainState) -> Result<f64> {
    let resid = &state.mu - &ctx.series.design * &state.beta - &state.w;
    let shape = ctx.config.prior_shape + ctx.t_len() as f64 / 2.0;
    let scale = ctx.config.prior_scale + 0.5 * resid.norm_squared();
    sample_inverse_gamma(rng, shape, scale)
}

/// sigma_w^2 | rest ~ IG(a + T/2, b + w' S^-1 w / 2)
pub fn update_sigmaw2(rng: &mut RngStream, ctx: &ConditionalContext, state: &ChainState) -> Result<f64> {
    let shape = ctx.config.prior_shape + ctx.t_len() as f64 / 2.0;
    let scale = ctx.config.prior_scale + 0.5 * ctx.factor.quadratic_form(&state.w)?;
    sample_inverse_gamma(rng, shape, scale)
}

/// beta | rest ~ N((X'X)^-1 X'(mu - w), sigma^2 (X'X)^-1)
pub fn update_beta(
    rng: &mut RngStream,
    ctx: &ConditionalContext,
    state: &ChainState,
) -> Result<DVector<f64>> {
    let resid = &state.mu - &state.w;
    let mean = &ctx.xtx_inv * (ctx.series.design.transpose() * resid);
    let z = rng.normal_vector(mean.len());
    Ok(mean + state.sigma2.sqrt() * (&ctx.xtx_inv_chol * z))
}

/// w | rest ~ N(M, V) with V = (I/sigma^2 + S^-1/sigma_w^2)^-1 and
/// M = V (mu - X beta) / sigma^2. In the cached eigenbasis S = Q L Q' this
/// is a diagonal rescale per sweep instead of a fresh factorization.
pub fn update_w(
    rng: &mut RngStream,
    ctx: &ConditionalContext,
    state: &ChainState,
) -> Result<DVector<f64>> {
    let (q, lam) = ctx.factor.eigen();
    let r = &state.mu - &ctx.series.design * &state.beta;
    let proj = q.transpose() * r;
    let mut draw = DVector::zeros(proj.len());
    for i in 0..proj.len() {
        let v_i = 1.0 / (1.0 / state.sigma2 + 1.0 / (state.sigmaw2 * lam[i]));
        draw[i] = v_i * proj[i] / state.sigma2 + v_i.sqrt() * rng.standard_normal();
    }
    Ok(q * draw)
}

/// Mode of the conditional log density
/// -(mu - c)^2 / (2 sigma^2) - e^mu, i.e. the root of mu + sigma^2 e^mu = c.
/// Safeguarded Newton; the function is strictly increasing so the bracket
/// always tightens.
fn conditional_mode(c: f64, sigma2: f64) -> f64 {
    let g = |m: f64| m + sigma2 * m.exp() - c;
    let hi0 = c.min(709.0);
    let mut lo = hi0 - 1.0;
    let mut step = 1.0;
    while g(lo) > 0.0 {
        step *= 2.0;
        lo -= step;
        if lo < -1e12 {
            return c; // sigma2 underflowed to 0; the quadratic term pins the mode at c
        }
    }
    // bisection with Newton steps whenever they stay in the bracket and keep
    // shrinking it; plain Newton creeps when the exponential dominates
    let mut hi = hi0;
    let mut x = 0.5 * (lo + hi);
    let mut dx_old = hi - lo;
    for _ in 0..200 {
        let ex = sigma2 * x.exp();
        let gx = x + ex - c;
        if gx > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        let newton = x - gx / (1.0 + ex);
        let next = if newton > lo && newton < hi && (newton - x).abs() < 0.5 * dx_old {
            newton
        } else {
            0.5 * (lo + hi)
        };
        dx_old = (next - x).abs();
        x = next;
        if dx_old <= 1e-13 * (1.0 + x.abs()) {
            break;
        }
    }
    x
}

/// mu | rest, componentwise: each mu_t has log density
/// K - (mu_t - (x_t' beta + w_t + sigma^2 y_t))^2 / (2 sigma^2) - e^{mu_t},
/// drawn by ARMS with abscissae spread around the conditional mode at the
/// local curvature scale.
pub fn update_mu(
    rng: &mut RngStream,
    ctx: &ConditionalContext,
    state: &ChainState,
) -> Result<DVector<f64>> {
    let xb = &ctx.series.design * &state.beta;
    let sigma2 = state.sigma2;
    let mut mu = DVector::zeros(ctx.t_len());
    for t in 0..ctx.t_len() {
        let c = xb[t] + state.w[t] + sigma2 * ctx.y[t];
        let mode = conditional_mode(c, sigma2);
        let curvature = 1.0 / sigma2 + mode.exp().min(f64::MAX / 4.0);
        let s = (1.0 / curvature).sqrt().max(1e-154);
        let (lower, upper) = (mode - 30.0 * s, mode + 30.0 * s);
        let target = ArmsTarget::new(
            |m: f64| {
                let d = m - c;
                let pen = m.exp();
                let pen = if pen.is_finite() { pen } else { f64::MAX / 4.0 };
                -0.5 * d * d / sigma2 - pen
            },
            lower,
            upper,
            vec![
                mode - 4.0 * s,
                mode - 2.0 * s,
                mode,
                mode + 2.0 * s,
                mode + 4.0 * s,
            ],
        );
        let current = state.mu[t].clamp(lower, upper);
        mu[t] = sample_arms(rng, &target, current)?;
    }
    Ok(mu)
}

/// One full sweep in the fixed update order: variances, coefficients,
/// latent process, log intensities.
pub fn sweep(rng: &mut RngStream, ctx: &ConditionalContext, state: &mut ChainState) -> Result<()> {
    state.sigma2 = update_sigma2(rng, ctx, state)?;
    state.sigmaw2 = update_sigmaw2(rng, ctx, state)?;
    state.beta = update_beta(rng, ctx, state)?;
    state.w = update_w(rng, ctx, state)?;
    state.mu = update_mu(rng, ctx, state)?;
    Ok(())
}

/// Potential scale reduction factor of one scalar across chains:
/// sqrt(((L-1)/L * W + B/L) / W) with W the mean within-chain variance and
/// B/L the between-chain variance of the chain means. Chains are trimmed to
/// the shortest length from the front.
pub fn gelman_rubin(chains: &[Vec<f64>]) -> Result<f64> {
    if chains.len() < 2 {
        return Err(Error::InsufficientData(
            "Gelman-Rubin needs at least two chains".into(),
        ));
    }
    let l = chains.iter().map(|c| c.len()).min().unwrap_or(0);
    if l < 10 {
        return Err(Error::InsufficientData(format!(
            "Gelman-Rubin needs at least 10 values per chain (got {l})"
        )));
    }
    let tails: Vec<&[f64]> = chains.iter().map(|c| &c[c.len() - l..]).collect();
    let means: Vec<f64> = tails
        .iter()
        .map(|t| t.iter().sum::<f64>() / l as f64)
        .collect();
    let vars: Vec<f64> = tails
        .iter()
        .zip(&means)
        .map(|(t, &m)| t.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (l as f64 - 1.0))
        .collect();
    let w = vars.iter().sum::<f64>() / vars.len() as f64;
    let grand = means.iter().sum::<f64>() / means.len() as f64;
    let b_over_l = means
        .iter()
        .map(|m| (m - grand) * (m - grand))
        .sum::<f64>()
        / (means.len() as f64 - 1.0);
    if w < 1e-300 {
        return Ok(if b_over_l < 1e-300 { 1.0 } else { f64::INFINITY });
    }
    let lf = l as f64;
    Ok((((lf - 1.0) / lf * w + b_over_l) / w).sqrt())
}

/// Per-parameter scale reduction factors at one convergence check.
#[derive(Debug, Clone)]
pub struct GelmanRubinReport {
    pub per_parameter: Vec<f64>,
    pub max_statistic: f64,
    pub sweep: usize,
}

struct ChainWorker {
    state: ChainState,
    rng: RngStream,
    /// Monitored scalar traces: one vector per beta component plus
    /// log sigma^2 and log sigma_w^2.
    monitor: Vec<Vec<f64>>,
    stored: Vec<ChainState>,
}

impl ChainWorker {
    fn record(&mut self) {
        let p = self.state.beta.len();
        for j in 0..p {
            self.monitor[j].push(self.state.beta[j]);
        }
        self.monitor[p].push(self.state.sigma2.ln());
        self.monitor[p + 1].push(self.state.sigmaw2.ln());
    }
}

/// Convergence is judged on the most recent half of each monitored trace,
/// which discards the influence of the deliberately overdispersed starts.
fn check_report(workers: &[ChainWorker], sweep_count: usize) -> Result<GelmanRubinReport> {
    let n_scalars = workers[0].monitor.len();
    let half = sweep_count / 2;
    let mut per_parameter = Vec::with_capacity(n_scalars);
    for j in 0..n_scalars {
        let traces: Vec<Vec<f64>> = workers
            .iter()
            .map(|w| w.monitor[j][half..].to_vec())
            .collect();
        per_parameter.push(gelman_rubin(&traces)?);
    }
    let max_statistic = per_parameter.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok(GelmanRubinReport {
        per_parameter,
        max_statistic,
        sweep: sweep_count,
    })
}

/// Runs the full sampler: overdispersed initialization, burn-in monitored by
/// the Gelman-Rubin statistic, then thinned collection pooled round-robin
/// across chains.
pub fn run_sampler(
    series: &ObservedSeries,
    config: &ModelConfig,
    factor: &CorrelationFactor,
) -> Result<PosteriorSamples> {
    run_sampler_ns(series, config, factor, 0)
}

/// As [`run_sampler`] but under a stream namespace, so that independent fits
/// (cross-validation candidates, study replications) sharing one root seed
/// draw from disjoint substreams.
pub fn run_sampler_ns(
    series: &ObservedSeries,
    config: &ModelConfig,
    factor: &CorrelationFactor,
    namespace: u64,
) -> Result<PosteriorSamples> {
    let ctx = ConditionalContext::new(series, factor, config)?;
    let p = series.p();
    let n_chains = config.n_chains;

    // least-squares fit of log(Y+1) anchors the coefficient starts
    let log_y: DVector<f64> = series.counts_f64().map(|y| (y + 1.0).ln());
    let beta_ls = &ctx.xtx_inv * (series.design.transpose() * log_y);

    let mut workers: Vec<ChainWorker> = (0..n_chains)
        .map(|c| -> Result<ChainWorker> {
            let mut init_rng =
                RngStream::derive(config.seed, namespace, &[purpose::CHAIN_INIT, c as u64]);
            let beta = &beta_ls + 0.5 * init_rng.normal_vector(p);
            let sigma2 =
                sample_inverse_gamma(&mut init_rng, config.prior_shape, config.prior_scale)?;
            let sigmaw2 =
                sample_inverse_gamma(&mut init_rng, config.prior_shape, config.prior_scale)?;
            let mu = &series.design * &beta;
            Ok(ChainWorker {
                state: ChainState {
                    beta,
                    sigma2,
                    sigmaw2,
                    w: DVector::zeros(series.len()),
                    mu,
                },
                rng: RngStream::derive(config.seed, namespace, &[purpose::CHAIN_SWEEP, c as u64]),
                monitor: vec![Vec::new(); p + 2],
                stored: Vec::new(),
            })
        })
        .collect::<Result<_>>()?;

    // burn-in: advance all chains in lockstep blocks, checking convergence
    // at each block boundary
    let mut sweeps_done = 0usize;
    let mut gr_history: Vec<(usize, f64)> = Vec::new();
    let burn_sweeps_used = loop {
        let block = config.gr_check_interval;
        workers = run_block(workers, &ctx, block, true)?;
        sweeps_done += block;
        if sweeps_done < 20 {
            continue; // too short for a meaningful split
        }
        let report = check_report(&workers, sweeps_done)?;
        gr_history.push((sweeps_done, report.max_statistic));
        if report.max_statistic <= config.gr_threshold {
            break sweeps_done;
        }
        if sweeps_done >= config.max_burn_sweeps {
            return Err(Error::ConvergenceFailure {
                sweeps: sweeps_done,
                last_rhat: report.max_statistic,
                threshold: config.gr_threshold,
                history: gr_history,
            });
        }
    };

    // collection: every chain stores one state per `thin` sweeps until the
    // pooled draw count is reached
    let per_chain = config.posterior_size.div_ceil(n_chains);
    let thin = config.thin;
    workers = exec::map_move(workers, |mut w: ChainWorker| -> Result<ChainWorker> {
        w.stored.reserve(per_chain);
        for _ in 0..per_chain {
            for _ in 0..thin {
                sweep(&mut w.rng, &ctx, &mut w.state)?;
            }
            w.stored.push(w.state.clone());
        }
        Ok(w)
    })
    .into_iter()
    .collect::<Result<_>>()?;

    let mut draws = Vec::with_capacity(config.posterior_size);
    'pool: for slot in 0..per_chain {
        for worker in &workers {
            if draws.len() == config.posterior_size {
                break 'pool;
            }
            draws.push(worker.stored[slot].clone());
        }
    }

    Ok(PosteriorSamples {
        draws,
        phi_used: config.phi,
        burn_sweeps_used,
        gr_history,
    })
}

fn run_block(
    workers: Vec<ChainWorker>,
    ctx: &ConditionalContext,
    block: usize,
    record: bool,
) -> Result<Vec<ChainWorker>> {
    exec::map_move(workers, |mut w: ChainWorker| -> Result<ChainWorker> {
        for _ in 0..block {
            sweep(&mut w.rng, ctx, &mut w.state)?;
            if record {
                w.record();
            }
        }
        Ok(w)
    })
    .into_iter()
    .collect()
}
