//! Adaptive random-walk Metropolis over user-supplied log densities.
//!
//! Sampling happens in an unconstrained space. Lower-bounded coordinates use
//! a log transform and intervals use a logit transform, each with its Jacobian
//! added to the target. During warmup the proposal covariance is re-estimated
//! at fixed checkpoints and the global step scale follows a Robbins-Monro
//! recursion; both are frozen for the post-warmup draws.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prob::StreamRng;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Support {
    Unbounded,
    LowerBounded(f64),
    Interval(f64, f64),
}

impl Support {
    /// Support matching a univariate interval `(lo, hi)`.
    pub fn from_bounds(lo: f64, hi: f64) -> Self {
        match (lo.is_finite(), hi.is_finite()) {
            (true, true) => Support::Interval(lo, hi),
            (true, false) => Support::LowerBounded(lo),
            _ => Support::Unbounded,
        }
    }

    fn to_constrained(self, z: f64) -> (f64, f64) {
        match self {
            Support::Unbounded => (z, 0.0),
            Support::LowerBounded(lo) => (lo + z.exp(), z),
            Support::Interval(lo, hi) => {
                // log sigmoid(z) and log(1 - sigmoid(z)) without cancellation
                let ls = -softplus(-z);
                let l1s = -softplus(z);
                (lo + (hi - lo) * ls.exp(), (hi - lo).ln() + ls + l1s)
            }
        }
    }

    fn to_unconstrained(self, x: f64) -> f64 {
        match self {
            Support::Unbounded => x,
            Support::LowerBounded(lo) => (x - lo).ln(),
            Support::Interval(lo, hi) => {
                let u = (x - lo) / (hi - lo);
                (u / (1.0 - u)).ln()
            }
        }
    }

    fn interior(self, x: f64) -> bool {
        match self {
            Support::Unbounded => x.is_finite(),
            Support::LowerBounded(lo) => x > lo && x.is_finite(),
            Support::Interval(lo, hi) => x > lo && x < hi,
        }
    }

    pub fn contains(self, x: f64) -> bool {
        match self {
            Support::Unbounded => x.is_finite(),
            Support::LowerBounded(lo) => x >= lo && x.is_finite(),
            Support::Interval(lo, hi) => x >= lo && x <= hi,
        }
    }
}

fn softplus(x: f64) -> f64 {
    if x > 35.0 {
        x
    } else {
        x.exp().ln_1p()
    }
}

/// Initial point generator: draws a constrained-space point.
pub type InitFn<'a> = Box<dyn Fn(&mut StreamRng) -> Vec<f64> + Send + Sync + 'a>;

pub enum Init<'a> {
    /// Draw from the given generator (typically the prior).
    Draw(InitFn<'a>),
    /// Zeros in unconstrained space, jittered uniformly in (-2, 2) on retries.
    Zeros,
    /// A fixed constrained-space point.
    Point(Vec<f64>),
}

pub type LogProbFn<'a> = Box<dyn Fn(&[f64]) -> f64 + Send + Sync + 'a>;

/// Log density over constrained coordinates with per-coordinate supports.
pub struct TargetDensity<'a> {
    pub supports: Vec<Support>,
    pub log_prob: LogProbFn<'a>,
}

impl<'a> TargetDensity<'a> {
    pub fn new<F>(supports: Vec<Support>, log_prob: F) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'a,
    {
        Self {
            supports,
            log_prob: Box::new(log_prob),
        }
    }

    pub fn dim(&self) -> usize {
        self.supports.len()
    }

    /// Log density in unconstrained space (target plus Jacobian), the
    /// constrained point, and the target value alone.
    fn eval_unconstrained(&self, z: &[f64], x: &mut [f64]) -> Result<(f64, f64)> {
        let mut jac = 0.0;
        for (k, (s, zk)) in self.supports.iter().zip(z).enumerate() {
            let (xk, j) = s.to_constrained(*zk);
            if !s.interior(xk) {
                return Ok((f64::NEG_INFINITY, f64::NEG_INFINITY));
            }
            x[k] = xk;
            jac += j;
        }
        let lp = (self.log_prob)(x);
        if lp.is_nan() {
            return Err(Error::NanLogDensity { point: x.to_vec() });
        }
        Ok((lp + jac, lp))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplerConfig {
    pub n_chains: usize,
    pub n_warmup: usize,
    pub n_post: usize,
    /// Keep every `thin`-th post-warmup draw.
    pub thin: usize,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            n_chains: 4,
            n_warmup: 500,
            n_post: 500,
            thin: 1,
        }
    }
}

impl SamplerConfig {
    pub fn new(n_chains: usize, n_warmup: usize, n_post: usize) -> Self {
        Self {
            n_chains,
            n_warmup,
            n_post,
            thin: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_chains == 0 || self.n_post == 0 || self.thin == 0 {
            return Err(Error::invalid("n_chains, n_post and thin must all be >= 1"));
        }
        Ok(())
    }
}

/// Post-warmup draws in constrained space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Chains {
    /// `[chain][iteration][coordinate]`
    pub draws: Vec<Vec<Vec<f64>>>,
    /// Target log density (without Jacobian) of every kept draw.
    pub log_probs: Vec<Vec<f64>>,
    /// Post-warmup acceptance rate per chain.
    pub acceptance: Vec<f64>,
    pub n_warmup: usize,
    pub seed: u64,
    pub stream: u64,
}

impl Chains {
    pub fn n_chains(&self) -> usize {
        self.draws.len()
    }

    pub fn dim(&self) -> usize {
        self.draws
            .first()
            .and_then(|c| c.first())
            .map_or(0, Vec::len)
    }

    pub fn n_draws(&self) -> usize {
        self.draws.iter().map(Vec::len).sum()
    }

    /// All draws, chain by chain.
    pub fn flatten(&self) -> Vec<Vec<f64>> {
        self.draws.iter().flatten().cloned().collect()
    }

    pub fn flat_log_probs(&self) -> Vec<f64> {
        self.log_probs.iter().flatten().copied().collect()
    }

    /// Values of coordinate `k` across all chains.
    pub fn column(&self, k: usize) -> Vec<f64> {
        self.draws.iter().flatten().map(|d| d[k]).collect()
    }

    pub fn split_rhat(&self) -> Vec<Rhat> {
        (0..self.dim())
            .map(|k| {
                let per_chain: Vec<Vec<f64>> = self
                    .draws
                    .iter()
                    .map(|c| c.iter().map(|d| d[k]).collect())
                    .collect();
                split_rhat(&per_chain)
            })
            .collect()
    }

    /// Largest finite R-hat, infinity when any coordinate is infinite, and
    /// `None` when every coordinate is degenerate or fewer than 2 chains exist.
    pub fn max_rhat(&self) -> Option<f64> {
        max_rhat(&self.split_rhat())
    }

    pub fn write_csv<W: Write>(&self, out: W, names: &[String]) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["chain".to_string(), "iter".to_string()];
        header.extend(names.iter().cloned());
        w.write_record(&header)?;
        for (c, chain) in self.draws.iter().enumerate() {
            for (i, d) in chain.iter().enumerate() {
                let mut row = vec![c.to_string(), i.to_string()];
                row.extend(d.iter().map(|v| format!("{v:e}")));
                w.write_record(&row)?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Split-chain potential scale reduction factor.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Rhat {
    Value(f64),
    /// Every split has zero variance and all splits agree.
    Degenerate,
}

impl Rhat {
    pub fn value(self) -> Option<f64> {
        match self {
            Rhat::Value(v) => Some(v),
            Rhat::Degenerate => None,
        }
    }
}

pub fn max_rhat(values: &[Rhat]) -> Option<f64> {
    values.iter().filter_map(|r| r.value()).reduce(f64::max)
}

/// Split R-hat of one scalar quantity given per-chain draws.
///
/// Each chain is cut into two halves (dropping the middle draw of odd
/// lengths). Needs at least one chain with four draws; otherwise reported as
/// degenerate.
pub fn split_rhat(chains: &[Vec<f64>]) -> Rhat {
    let n = chains.iter().map(Vec::len).min().unwrap_or(0);
    if chains.is_empty() || n < 4 {
        return Rhat::Degenerate;
    }
    let half = n / 2;
    let mut splits: Vec<&[f64]> = Vec::with_capacity(2 * chains.len());
    for c in chains {
        splits.push(&c[..half]);
        splits.push(&c[n - half..n]);
    }
    gelman_rubin(&splits)
}

/// Split R-hat over many independent fits that share a chain count.
///
/// Each fit is centered on its own mean, then half `h` of chain `c` is
/// concatenated across fits in fit order. Returns one value per coordinate.
pub fn pooled_split_rhat(fits: &[&Chains]) -> Vec<Rhat> {
    let Some(first) = fits.first() else {
        return Vec::new();
    };
    let n_chains = first.n_chains();
    let n = fits
        .iter()
        .flat_map(|f| f.draws.iter().map(Vec::len))
        .min()
        .unwrap_or(0);
    if n_chains == 0 || n < 4 || fits.iter().any(|f| f.n_chains() != n_chains) {
        return vec![Rhat::Degenerate; first.dim()];
    }
    let half = n / 2;
    (0..first.dim())
        .map(|k| {
            let mut seqs = vec![Vec::with_capacity(half * fits.len()); 2 * n_chains];
            for f in fits {
                let col = f.column(k);
                let center = col.iter().sum::<f64>() / col.len() as f64;
                for (c, chain) in f.draws.iter().enumerate() {
                    let len = chain.len();
                    seqs[2 * c].extend(chain[..half].iter().map(|d| d[k] - center));
                    seqs[2 * c + 1].extend(chain[len - half..].iter().map(|d| d[k] - center));
                }
            }
            let refs: Vec<&[f64]> = seqs.iter().map(Vec::as_slice).collect();
            gelman_rubin(&refs)
        })
        .collect()
}

/// Potential scale reduction over equal-length sequences.
fn gelman_rubin(splits: &[&[f64]]) -> Rhat {
    let m = splits.len() as f64;
    let nh = splits[0].len() as f64;
    let means: Vec<f64> = splits.iter().map(|s| s.iter().sum::<f64>() / nh).collect();
    let grand = means.iter().sum::<f64>() / m;
    let b = nh / (m - 1.0) * means.iter().map(|mu| (mu - grand).powi(2)).sum::<f64>();
    let w = splits
        .iter()
        .zip(&means)
        .map(|(s, mu)| s.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / (nh - 1.0))
        .sum::<f64>()
        / m;
    if w == 0.0 {
        return if b == 0.0 {
            Rhat::Degenerate
        } else {
            Rhat::Value(f64::INFINITY)
        };
    }
    let var_plus = (nh - 1.0) / nh * w + b / nh;
    Rhat::Value((var_plus / w).sqrt())
}

const INIT_ATTEMPTS: usize = 10;

fn target_acceptance(dim: usize) -> f64 {
    match dim {
        1 => 0.44,
        2 => 0.35,
        3 | 4 => 0.30,
        _ => 0.234,
    }
}

fn empirical_covariance(points: &[Vec<f64>], dim: usize) -> DMatrix<f64> {
    let n = points.len() as f64;
    let mut mean = DVector::zeros(dim);
    for p in points {
        mean += DVector::from_column_slice(p);
    }
    mean /= n;
    let mut cov = DMatrix::zeros(dim, dim);
    for p in points {
        let d = DVector::from_column_slice(p) - &mean;
        cov += &d * d.transpose();
    }
    cov /= (n - 1.0).max(1.0);
    // Shrink towards a small diagonal, as in common warmup schemes.
    let w = n / (n + 5.0);
    cov * w + DMatrix::identity(dim, dim) * (1e-3 * (1.0 - w))
}

struct ChainResult {
    draws: Vec<Vec<f64>>,
    log_probs: Vec<f64>,
    acceptance: f64,
}

fn initial_point(target: &TargetDensity, init: &Init, rng: &mut StreamRng) -> Result<Vec<f64>> {
    let dim = target.dim();
    let mut x = vec![0.0; dim];
    for attempt in 0..INIT_ATTEMPTS {
        let z: Vec<f64> = match init {
            Init::Draw(f) => {
                let p = f(rng);
                if p.len() != dim {
                    return Err(Error::DimensionMismatch {
                        expected: dim,
                        got: p.len(),
                    });
                }
                target
                    .supports
                    .iter()
                    .zip(&p)
                    .map(|(s, v)| s.to_unconstrained(*v))
                    .collect()
            }
            Init::Zeros if attempt == 0 => vec![0.0; dim],
            Init::Zeros => (0..dim).map(|_| rng.random_range(-2.0..2.0)).collect(),
            Init::Point(p) => {
                if p.len() != dim {
                    return Err(Error::DimensionMismatch {
                        expected: dim,
                        got: p.len(),
                    });
                }
                target
                    .supports
                    .iter()
                    .zip(p)
                    .map(|(s, v)| s.to_unconstrained(*v))
                    .collect()
            }
        };
        if z.iter().all(|v| v.is_finite()) && target.eval_unconstrained(&z, &mut x)?.0.is_finite() {
            return Ok(z);
        }
        if matches!(init, Init::Point(_)) {
            break;
        }
    }
    Err(Error::InitializationFailed {
        attempts: INIT_ATTEMPTS,
    })
}

fn run_chain(
    target: &TargetDensity,
    init: &Init,
    cfg: &SamplerConfig,
    mut rng: StreamRng,
) -> Result<ChainResult> {
    let dim = target.dim();
    let mut z = initial_point(target, init, &mut rng)?;
    let mut x = vec![0.0; dim];
    let (mut lp, mut lp_target) = target.eval_unconstrained(&z, &mut x)?;
    let mut x_current = x.clone();

    let base_scale = 2.38 / (dim as f64).sqrt();
    let mut log_scale = (0.1 * base_scale).ln();
    let mut chol = DMatrix::<f64>::identity(dim, dim);
    let mut rm_t = 0usize;
    let target_rate = target_acceptance(dim);

    let w = cfg.n_warmup;
    // Covariance checkpoints: each estimate uses the draws since the previous one.
    let checkpoints = [w / 4, w / 2, 3 * w / 4];
    let mut window: Vec<Vec<f64>> = Vec::new();

    let mut draws = Vec::with_capacity(cfg.n_post / cfg.thin + 1);
    let mut log_probs = Vec::with_capacity(cfg.n_post / cfg.thin + 1);
    let mut accepted_post = 0usize;
    let mut proposal = vec![0.0; dim];
    let mut x_prop = vec![0.0; dim];

    for iter in 0..(w + cfg.n_post) {
        let warm = iter < w;
        let eps =
            DVector::from_iterator(dim, (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)));
        let step = &chol * eps * log_scale.exp();
        for k in 0..dim {
            proposal[k] = z[k] + step[k];
        }
        let (lp_prop, lp_target_prop) = target.eval_unconstrained(&proposal, &mut x_prop)?;
        let log_alpha = if lp_prop.is_finite() {
            (lp_prop - lp).min(0.0)
        } else {
            f64::NEG_INFINITY
        };
        let u: f64 = rng.random();
        let accept = u.ln() < log_alpha;
        if accept {
            z.copy_from_slice(&proposal);
            x_current.copy_from_slice(&x_prop);
            lp = lp_prop;
            lp_target = lp_target_prop;
        }
        if warm {
            rm_t += 1;
            let gain = (rm_t as f64).powf(-0.6);
            log_scale += gain * (log_alpha.exp() - target_rate);
            window.push(z.clone());
            if checkpoints.contains(&(iter + 1)) && window.len() > dim + 2 {
                let cov = empirical_covariance(&window, dim);
                if let Some(c) = cov.cholesky() {
                    chol = c.l();
                    log_scale = base_scale.ln();
                    rm_t = 0;
                }
                window.clear();
            }
        } else {
            if accept {
                accepted_post += 1;
            }
            if (iter - w).is_multiple_of(cfg.thin) {
                draws.push(x_current.clone());
                log_probs.push(lp_target);
            }
        }
    }
    Ok(ChainResult {
        draws,
        log_probs,
        acceptance: accepted_post as f64 / cfg.n_post as f64,
    })
}

/// Run `cfg.n_chains` chains in parallel, chain `k` on `rng.child(k)`.
pub fn sample(
    target: &TargetDensity,
    cfg: &SamplerConfig,
    init: &Init,
    rng: &StreamRng,
) -> Result<Chains> {
    cfg.validate()?;
    if target.dim() == 0 {
        return Err(Error::EmptyInput("target dimension"));
    }
    for s in &target.supports {
        if let Support::Interval(lo, hi) = s {
            if !(lo < hi) {
                return Err(Error::invalid(format!(
                    "empty support interval [{lo}, {hi}]"
                )));
            }
        }
    }
    let results: Vec<Result<ChainResult>> = (0..cfg.n_chains)
        .into_par_iter()
        .map(|k| run_chain(target, init, cfg, rng.child(k as u64)))
        .collect();
    let mut chains = Chains {
        draws: Vec::with_capacity(cfg.n_chains),
        log_probs: Vec::with_capacity(cfg.n_chains),
        acceptance: Vec::with_capacity(cfg.n_chains),
        n_warmup: cfg.n_warmup,
        seed: rng.seed(),
        stream: rng.stream(),
    };
    for r in results {
        let r = r?;
        chains.draws.push(r.draws);
        chains.log_probs.push(r.log_probs);
        chains.acceptance.push(r.acceptance);
    }
    Ok(chains)
}
