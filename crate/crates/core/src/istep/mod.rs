//! Inference of simulator inputs from measurements through a trained surrogate.
//!
//! Four ways of propagating the training posterior are offered: plug-in
//! (`Point`), a mixture of per-draw posteriors (`EPost`), a marginal
//! likelihood averaged over draws (`ELik`) and an averaged log-likelihood
//! (`ELogLik`).

mod analytic;
mod cluster;
mod discrete;

pub use analytic::{
    analytic_linear_iposterior, epost_linear_moments, AnalyticIPosterior, EPostNormalizer,
    LinearIPriors,
};
pub use cluster::{cluster_draws, ClusterSet};
pub use discrete::{discrete_posterior, reference_counterexample, DiscreteMethod, DiscreteTables};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{measurements_hash, tposterior_hash};
use crate::mcmc::{pooled_split_rhat, sample, Chains, Init, SamplerConfig, Support, TargetDensity};
use crate::prob::{normal_ln_pdf, Dist, DistSpec, StreamRng, LN_SQRT_2PI};
use crate::quadrature::integrate_checked;
use crate::simulators::{sir_solve, Measurements, SimulatorKind, SimulatorSpec};
use crate::surrogates::{dot, LikelihoodFamily, Surrogate, SurrogateParams};
use crate::tstep::{TPosterior, RHAT_LIMIT};

/// Largest fraction of E-Post component fits allowed to fail.
pub const EPOST_MAX_FAILURE_FRACTION: f64 = 0.05;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PointEstimator {
    #[default]
    Mean,
    Median,
    /// Draw with the highest recorded training log posterior.
    ModeProxy,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum UpMethod {
    Point {
        #[serde(default)]
        estimator: PointEstimator,
    },
    #[serde(rename = "epost")]
    EPost,
    #[serde(rename = "elik")]
    ELik,
    #[serde(rename = "eloglik")]
    ELogLik,
}

impl UpMethod {
    pub const POINT: UpMethod = UpMethod::Point {
        estimator: PointEstimator::Mean,
    };
    pub const ALL: [UpMethod; 4] = [
        UpMethod::POINT,
        UpMethod::EPost,
        UpMethod::ELik,
        UpMethod::ELogLik,
    ];

    /// Short label used in file names.
    pub fn label(&self) -> &'static str {
        match self {
            UpMethod::Point { .. } => "point",
            UpMethod::EPost => "epost",
            UpMethod::ELik => "elik",
            UpMethod::ELogLik => "eloglik",
        }
    }

    pub fn from_label(s: &str) -> Option<Self> {
        match s {
            "point" => Some(UpMethod::POINT),
            "epost" => Some(UpMethod::EPost),
            "elik" => Some(UpMethod::ELik),
            "eloglik" => Some(UpMethod::ELogLik),
            _ => None,
        }
    }
}

/// Measurement noise scale: fixed, or sampled jointly with the inputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SigmaI {
    Fixed(f64),
    Prior(DistSpec),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IStepPriors {
    /// One univariate prior per input dimension.
    pub omega: Vec<DistSpec>,
    pub sigma_i: SigmaI,
}

#[derive(Clone, Debug)]
struct PreparedPriors {
    omega: Vec<Dist>,
    sigma_fixed: Option<f64>,
    sigma_prior: Option<Dist>,
}

impl PreparedPriors {
    fn new(p: &IStepPriors) -> Result<Self> {
        if p.omega.is_empty() {
            return Err(Error::EmptyInput("input priors"));
        }
        let omega = p
            .omega
            .iter()
            .map(|s| Dist::new(s.clone()))
            .collect::<Result<Vec<_>>>()?;
        if omega.iter().any(|d| d.dim() != 1) {
            return Err(Error::invalid("input priors must be univariate"));
        }
        let (sigma_fixed, sigma_prior) = match &p.sigma_i {
            SigmaI::Fixed(s) => {
                if !(s.is_finite() && *s > 0.0) {
                    return Err(Error::invalid(format!("sigma_i must be > 0, got {s}")));
                }
                (Some(*s), None)
            }
            SigmaI::Prior(spec) => {
                let d = Dist::new(spec.clone())?;
                if d.bounds().0 < 0.0 {
                    return Err(Error::invalid(
                        "sigma_i prior must be supported on positive values",
                    ));
                }
                (None, Some(d))
            }
        };
        Ok(Self {
            omega,
            sigma_fixed,
            sigma_prior,
        })
    }

    fn n_omega(&self) -> usize {
        self.omega.len()
    }

    fn dim(&self) -> usize {
        self.omega.len() + usize::from(self.sigma_prior.is_some())
    }

    fn supports(&self) -> Vec<Support> {
        let mut s: Vec<Support> = self
            .omega
            .iter()
            .map(|d| {
                let (lo, hi) = d.bounds();
                Support::from_bounds(lo, hi)
            })
            .collect();
        if let Some(d) = &self.sigma_prior {
            let (lo, hi) = d.bounds();
            s.push(Support::from_bounds(lo.max(0.0), hi));
        }
        s
    }

    fn sigma(&self, x: &[f64]) -> f64 {
        self.sigma_fixed.unwrap_or_else(|| x[self.omega.len()])
    }

    fn log_prior(&self, x: &[f64]) -> f64 {
        let mut lp: f64 = self.omega.iter().zip(x).map(|(d, v)| d.ln_pdf(*v)).sum();
        if let Some(d) = &self.sigma_prior {
            lp += d.ln_pdf(x[self.omega.len()]);
        }
        lp
    }

    fn draw(&self, rng: &mut StreamRng) -> Vec<f64> {
        let mut v: Vec<f64> = self.omega.iter().map(|d| d.draw_f64(rng)).collect();
        if let Some(d) = &self.sigma_prior {
            v.push(d.draw_f64(rng));
        }
        v
    }

    fn names(&self) -> Vec<String> {
        let mut n: Vec<String> = (0..self.omega.len()).map(|k| format!("omega{k}")).collect();
        if self.sigma_prior.is_some() {
            n.push("sigma_i".into());
        }
        n
    }
}

/// Weighted set of propagated surrogate parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Components {
    /// Coefficients, followed by `sigma_a` when it is propagated.
    pub thetas: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    pub n_coeffs: usize,
    pub with_sigma_a: bool,
}

impl Components {
    /// Every training-posterior draw with weight `1/S`.
    pub fn from_tposterior(t: &TPosterior) -> Self {
        let s = t.n_draws();
        Self {
            thetas: t.theta_rows(),
            weights: vec![1.0 / s as f64; s],
            n_coeffs: t.n_coeffs,
            with_sigma_a: t.theta_dim() > t.n_coeffs,
        }
    }

    /// Cluster centroids with their occupancy weights.
    pub fn from_clusters(c: &ClusterSet, t: &TPosterior) -> Self {
        Self {
            thetas: c.centroids.clone(),
            weights: c.weights.clone(),
            n_coeffs: t.n_coeffs,
            with_sigma_a: t.theta_dim() > t.n_coeffs,
        }
    }

    pub fn single(p: &SurrogateParams) -> Self {
        let mut theta = p.c.clone();
        if let Some(s) = p.sigma_a {
            theta.push(s);
        }
        Self {
            thetas: vec![theta],
            weights: vec![1.0],
            n_coeffs: p.c.len(),
            with_sigma_a: p.sigma_a.is_some(),
        }
    }

    pub fn len(&self) -> usize {
        self.thetas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.thetas.is_empty()
    }

    pub fn params(&self, s: usize) -> SurrogateParams {
        let t = &self.thetas[s];
        SurrogateParams::new(
            t[..self.n_coeffs].to_vec(),
            self.with_sigma_a.then(|| t[self.n_coeffs]),
        )
    }

    fn validate(&self, surrogate: &Surrogate) -> Result<()> {
        if self.is_empty() {
            return Err(Error::EmptyInput("propagated components"));
        }
        if self.weights.len() != self.thetas.len() {
            return Err(Error::DimensionMismatch {
                expected: self.thetas.len(),
                got: self.weights.len(),
            });
        }
        if self.n_coeffs != surrogate.n_coeffs() {
            return Err(Error::DimensionMismatch {
                expected: surrogate.n_coeffs(),
                got: self.n_coeffs,
            });
        }
        let width = self.n_coeffs + usize::from(self.with_sigma_a);
        if self.thetas.iter().any(|t| t.len() != width) {
            return Err(Error::invalid("component rows have inconsistent widths"));
        }
        if self.weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::invalid(
                "component weights must be finite and nonnegative",
            ));
        }
        let total: f64 = self.weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!(
                "component weights sum to {total}, expected 1"
            )));
        }
        Ok(())
    }
}

/// Plug-in surrogate parameters summarizing a training posterior.
pub fn point_estimate(t: &TPosterior, estimator: PointEstimator) -> Result<SurrogateParams> {
    if t.n_draws() == 0 {
        return Err(Error::EmptyInput("training posterior draws"));
    }
    let d = t.theta_dim();
    let theta: Vec<f64> = match estimator {
        PointEstimator::Mean => match &t.analytic {
            Some(g) if g.mean.len() == d => g.mean.clone(),
            _ => {
                let n = t.n_draws() as f64;
                (0..d)
                    .map(|k| t.draws.iter().map(|r| r[k]).sum::<f64>() / n)
                    .collect()
            }
        },
        PointEstimator::Median => (0..d)
            .map(|k| {
                let mut col: Vec<f64> = t.draws.iter().map(|r| r[k]).collect();
                col.sort_by(f64::total_cmp);
                let m = col.len();
                if m % 2 == 1 {
                    col[m / 2]
                } else {
                    0.5 * (col[m / 2 - 1] + col[m / 2])
                }
            })
            .collect(),
        PointEstimator::ModeProxy => match (&t.log_probs, &t.analytic) {
            (Some(lp), _) => {
                let best = (0..lp.len()).fold(0, |b, i| if lp[i] > lp[b] { i } else { b });
                t.draws[best][..d].to_vec()
            }
            (None, Some(g)) if g.mean.len() == d => g.mean.clone(),
            (None, _) if t.n_draws() == 1 => t.draws[0][..d].to_vec(),
            (None, _) => {
                return Err(Error::Unsupported(
                    "mode proxy needs recorded training log densities".into(),
                ))
            }
        },
    };
    Ok(SurrogateParams::new(
        theta[..t.n_coeffs].to_vec(),
        (d > t.n_coeffs).then(|| theta[t.n_coeffs]),
    ))
}

/// Running `log(sum w exp(v))` over a stream of values, in push order.
#[derive(Clone, Copy, Debug)]
pub struct LogSumExpAcc {
    max: f64,
    acc: f64,
}

impl Default for LogSumExpAcc {
    fn default() -> Self {
        Self {
            max: f64::NEG_INFINITY,
            acc: 0.0,
        }
    }
}

impl LogSumExpAcc {
    #[inline]
    pub fn push(&mut self, v: f64, w: f64) {
        if w == 0.0 || v == f64::NEG_INFINITY {
            return;
        }
        if v <= self.max {
            let d = v - self.max;
            // exp(-60) is below the f64 resolution of any plausible sum.
            if d > -60.0 {
                self.acc += w * d.exp();
            }
        } else {
            self.acc = self.acc * (self.max - v).exp() + w;
            self.max = v;
        }
    }

    pub fn finish(self) -> f64 {
        if self.max == f64::NEG_INFINITY {
            f64::NEG_INFINITY
        } else {
            self.max + self.acc.ln()
        }
    }
}

/// Log densities of the I-step targets at constrained points `x = (omega[, sigma_i])`.
pub struct IDensity<'a> {
    surrogate: &'a Surrogate,
    comps: &'a Components,
    meas: &'a Measurements,
    priors: PreparedPriors,
    /// Transformed observations (log counts for the log-normal family).
    y_eff: Vec<f64>,
    log_jac_y: f64,
}

impl<'a> IDensity<'a> {
    pub fn new(
        surrogate: &'a Surrogate,
        comps: &'a Components,
        meas: &'a Measurements,
        priors: &IStepPriors,
    ) -> Result<Self> {
        comps.validate(surrogate)?;
        let priors = PreparedPriors::new(priors)?;
        let expected = surrogate.input_dim() - meas.times.as_ref().map_or(0, |_| 1);
        if priors.n_omega() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                got: priors.n_omega(),
            });
        }
        if let Some(t) = &meas.times {
            if t.len() != meas.len() {
                return Err(Error::DimensionMismatch {
                    expected: meas.len(),
                    got: t.len(),
                });
            }
        }
        let (y_eff, log_jac_y) = match surrogate.likelihood() {
            LikelihoodFamily::Normal => (meas.ys.clone(), 0.0),
            LikelihoodFamily::LogNormal => {
                let logs: Vec<f64> = meas
                    .ys
                    .iter()
                    .map(|y| if *y > 0.0 { y.ln() } else { f64::NEG_INFINITY })
                    .collect();
                let jac = -logs.iter().sum::<f64>();
                (logs, jac)
            }
        };
        Ok(Self {
            surrogate,
            comps,
            meas,
            priors,
            y_eff,
            log_jac_y,
        })
    }

    pub fn dim(&self) -> usize {
        self.priors.dim()
    }

    pub fn names(&self) -> Vec<String> {
        self.priors.names()
    }

    pub fn log_prior(&self, x: &[f64]) -> f64 {
        self.priors.log_prior(x)
    }

    /// Calls `f(s, log p(y | omega, theta_s))` for every component in order.
    pub fn for_each_loglik(&self, x: &[f64], f: impl FnMut(usize, f64)) {
        self.for_each_loglik_in(x, 0..self.comps.len(), f)
    }

    fn for_each_loglik_in(
        &self,
        x: &[f64],
        range: std::ops::Range<usize>,
        mut f: impl FnMut(usize, f64),
    ) {
        let n_omega = self.priors.n_omega();
        let omega = &x[..n_omega];
        let sigma_i = self.priors.sigma(x);
        let n = self.meas.len() as f64;
        if !self.log_jac_y.is_finite() {
            range.for_each(|s| f(s, f64::NEG_INFINITY));
            return;
        }
        let inputs: Vec<Vec<f64>> = (0..self.meas.len())
            .map(|i| self.meas.input_at(i, omega))
            .collect();
        let features: Option<Vec<Vec<f64>>> =
            inputs.iter().map(|w| self.surrogate.features(w)).collect();
        let nc = self.comps.n_coeffs;
        let shared_ln_scale = (!self.comps.with_sigma_a).then(|| sigma_i.ln());
        for s in range {
            let theta = &self.comps.thetas[s];
            let c = &theta[..nc];
            let (scale, ln_scale) = match shared_ln_scale {
                Some(l) => (sigma_i, l),
                None => {
                    let sc = (sigma_i * sigma_i + theta[nc] * theta[nc]).sqrt();
                    (sc, sc.ln())
                }
            };
            let mut sq = 0.0;
            for (i, y) in self.y_eff.iter().enumerate() {
                let loc = match &features {
                    Some(fs) => dot(&fs[i], c),
                    None => self.surrogate.eval_unchecked(c, &inputs[i]),
                };
                let r = (y - loc) / scale;
                sq += r * r;
            }
            f(s, -n * (LN_SQRT_2PI + ln_scale) - 0.5 * sq + self.log_jac_y);
        }
    }

    pub fn component_logliks(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.comps.len()];
        self.for_each_loglik(x, |s, v| out[s] = v);
        out
    }

    /// Log prior plus the log-likelihood of component `s` alone.
    pub fn component_log_density(&self, s: usize, x: &[f64]) -> f64 {
        let lp = self.log_prior(x);
        if lp == f64::NEG_INFINITY {
            return lp;
        }
        let mut ll = 0.0;
        self.for_each_loglik_in(x, s..s + 1, |_, v| ll = v);
        lp + ll
    }

    /// Log prior plus the weighted log-sum-exp of per-component log-likelihoods.
    pub fn elik(&self, x: &[f64]) -> f64 {
        let lp = self.log_prior(x);
        if lp == f64::NEG_INFINITY {
            return lp;
        }
        let mut acc = LogSumExpAcc::default();
        let w = &self.comps.weights;
        self.for_each_loglik(x, |s, v| acc.push(v, w[s]));
        lp + acc.finish()
    }

    /// Log prior plus the weighted average of per-component log-likelihoods.
    pub fn eloglik(&self, x: &[f64]) -> f64 {
        let lp = self.log_prior(x);
        if lp == f64::NEG_INFINITY {
            return lp;
        }
        let w = &self.comps.weights;
        let mut total = 0.0;
        self.for_each_loglik(x, |s, v| {
            if w[s] > 0.0 {
                total += w[s] * v
            }
        });
        lp + total
    }

    /// Log normalizer of each component posterior, by adaptive quadrature
    /// over the single input dimension. Requires a fixed `sigma_i`.
    pub fn component_log_normalizers(&self) -> Result<Vec<f64>> {
        if self.priors.n_omega() != 1 || self.priors.sigma_prior.is_some() {
            return Err(Error::Unsupported(
                "component normalizers need a single input and a fixed sigma_i".into(),
            ));
        }
        let prior = &self.priors.omega[0];
        let (lo, hi) = match prior.bounds() {
            (lo, hi) if lo.is_finite() && hi.is_finite() => (lo, hi),
            _ => {
                let (m, sd) = match prior.spec() {
                    DistSpec::Normal { mu, sigma } => (*mu, *sigma),
                    _ => {
                        return Err(Error::Unsupported(
                            "component normalizers need a normal or bounded prior".into(),
                        ))
                    }
                };
                (m - 12.0 * sd, m + 12.0 * sd)
            }
        };
        (0..self.comps.len())
            .map(|s| {
                let f = |w: f64| self.component_log_density(s, &[w]);
                let n = 800;
                let grid: Vec<f64> = (0..=n)
                    .map(|k| lo + (hi - lo) * k as f64 / n as f64)
                    .collect();
                let vals: Vec<f64> = grid.iter().map(|w| f(*w)).collect();
                let shift = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                if !shift.is_finite() {
                    return Err(Error::Quadrature(format!(
                        "component {s} has no finite density on its grid"
                    )));
                }
                // Integrate only where the density is within e^-40 of its peak.
                let first = vals.iter().position(|v| *v - shift > -40.0).unwrap_or(0);
                let last = vals.iter().rposition(|v| *v - shift > -40.0).unwrap_or(n);
                let (a, b) = (grid[first.saturating_sub(1)], grid[(last + 1).min(n)]);
                let z = integrate_checked(|w| (f(w) - shift).exp(), a, b, 32, 1e-9, 1e-6)?;
                Ok(shift + z.ln())
            })
            .collect()
    }

    /// Log of the weighted mixture of normalized component posteriors.
    pub fn epost(&self, x: &[f64], log_normalizers: &[f64]) -> f64 {
        let lp = self.log_prior(x);
        if lp == f64::NEG_INFINITY {
            return lp;
        }
        let mut acc = LogSumExpAcc::default();
        let w = &self.comps.weights;
        self.for_each_loglik(x, |s, v| acc.push(v - log_normalizers[s], w[s]));
        lp + acc.finish()
    }

    /// Weighted average of normalized component log posteriors.
    pub fn elogpost(&self, x: &[f64], log_normalizers: &[f64]) -> f64 {
        let lp = self.log_prior(x);
        if lp == f64::NEG_INFINITY {
            return lp;
        }
        let w = &self.comps.weights;
        let mut total = 0.0;
        self.for_each_loglik(x, |s, v| {
            if w[s] > 0.0 {
                total += w[s] * (lp + v - log_normalizers[s])
            }
        });
        total
    }

    fn init(&self) -> Init<'_> {
        Init::Draw(Box::new(|r: &mut StreamRng| self.priors.draw(r)))
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct IDiagnostics {
    /// Largest split R-hat. E-Post pools the component fits chain by chain.
    pub max_rhat: Option<f64>,
    pub rhat_ok: bool,
    pub n_fits: usize,
    pub n_failed: usize,
    /// Individual fits whose own R-hat exceeds the limit.
    pub n_rhat_exceeded: usize,
    pub mean_acceptance: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct IProvenance {
    pub tposterior_hash: Option<String>,
    pub measurements_hash: String,
    pub seed: u64,
    pub stream: u64,
}

/// Draws of `(omega[, sigma_i])` from an I-posterior.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IPosterior {
    pub draws: Vec<Vec<f64>>,
    pub names: Vec<String>,
    pub method: String,
    pub diagnostics: IDiagnostics,
    pub provenance: IProvenance,
}

impl IPosterior {
    pub fn column(&self, k: usize) -> Vec<f64> {
        self.draws.iter().map(|d| d[k]).collect()
    }

    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }
}

fn single_fit(
    chains: Chains,
    names: Vec<String>,
    method: &str,
    tpost_hash: Option<String>,
    meas: &Measurements,
    rng: &StreamRng,
) -> IPosterior {
    let max_rhat = chains.max_rhat();
    let rhat_ok = max_rhat.is_none_or(|r| r <= RHAT_LIMIT);
    let mean_acceptance = chains.acceptance.iter().sum::<f64>() / chains.acceptance.len() as f64;
    IPosterior {
        draws: chains.flatten(),
        names,
        method: method.into(),
        diagnostics: IDiagnostics {
            max_rhat,
            rhat_ok,
            n_fits: 1,
            n_failed: 0,
            n_rhat_exceeded: usize::from(!rhat_ok),
            mean_acceptance,
        },
        provenance: IProvenance {
            tposterior_hash: tpost_hash,
            measurements_hash: measurements_hash(meas),
            seed: rng.seed(),
            stream: rng.stream(),
        },
    }
}

fn run_density<F>(
    density: &IDensity,
    log_prob: F,
    cfg: &SamplerConfig,
    rng: &StreamRng,
) -> Result<Chains>
where
    F: Fn(&[f64]) -> f64 + Send + Sync,
{
    let target = TargetDensity::new(density.priors.supports(), log_prob);
    sample(&target, cfg, &density.init(), rng)
}

/// Plug-in inference with `theta` fixed at a point estimate of the training posterior.
pub fn infer_point(
    surrogate: &Surrogate,
    tpost: &TPosterior,
    estimator: PointEstimator,
    meas: &Measurements,
    priors: &IStepPriors,
    cfg: &SamplerConfig,
    rng: &StreamRng,
) -> Result<IPosterior> {
    let theta = point_estimate(tpost, estimator)?;
    let comps = Components::single(&theta);
    let density = IDensity::new(surrogate, &comps, meas, priors)?;
    let chains = run_density(&density, |x| density.elik(x), cfg, rng)?;
    Ok(single_fit(
        chains,
        density.names(),
        "point",
        Some(tposterior_hash(tpost)),
        meas,
        rng,
    ))
}

/// Inference under the likelihood averaged over the propagated components.
pub fn infer_elik(
    surrogate: &Surrogate,
    comps: &Components,
    meas: &Measurements,
    priors: &IStepPriors,
    cfg: &SamplerConfig,
    rng: &StreamRng,
) -> Result<IPosterior> {
    let density = IDensity::new(surrogate, comps, meas, priors)?;
    let chains = run_density(&density, |x| density.elik(x), cfg, rng)?;
    Ok(single_fit(
        chains,
        density.names(),
        "elik",
        Some(components_hash(comps)),
        meas,
        rng,
    ))
}

/// Inference under the log-likelihood averaged over the propagated components.
pub fn infer_eloglik(
    surrogate: &Surrogate,
    comps: &Components,
    meas: &Measurements,
    priors: &IStepPriors,
    cfg: &SamplerConfig,
    rng: &StreamRng,
) -> Result<IPosterior> {
    let density = IDensity::new(surrogate, comps, meas, priors)?;
    let chains = run_density(&density, |x| density.eloglik(x), cfg, rng)?;
    Ok(single_fit(
        chains,
        density.names(),
        "eloglik",
        Some(components_hash(comps)),
        meas,
        rng,
    ))
}

fn components_hash(c: &Components) -> String {
    let mut bytes = Vec::with_capacity(8 * c.len() * (c.n_coeffs + 2));
    for (t, w) in c.thetas.iter().zip(&c.weights) {
        for v in t.iter().chain(std::iter::once(w)) {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    crate::io::sha256_hex(&bytes)
}

/// One separate fit per component; draws pooled according to the weights.
///
/// Component `l` runs on `rng.child(l)`. Equal weights concatenate the
/// component draws; unequal weights resample them multinomially to the same
/// pool size. Fails when more than [`EPOST_MAX_FAILURE_FRACTION`] of the
/// fits fail.
pub fn infer_epost(
    surrogate: &Surrogate,
    comps: &Components,
    meas: &Measurements,
    priors: &IStepPriors,
    cfg: &SamplerConfig,
    rng: &StreamRng,
) -> Result<IPosterior> {
    let density = IDensity::new(surrogate, comps, meas, priors)?;
    let names = density.names();
    let fits: Vec<Result<Chains>> = (0..comps.len())
        .into_par_iter()
        .map(|l| {
            let single = Components::single(&comps.params(l));
            let d = IDensity::new(surrogate, &single, meas, priors)?;
            run_density(&d, |x| d.elik(x), cfg, &rng.child(l as u64))
        })
        .collect();
    let total = fits.len();
    let mut ok: Vec<(usize, Chains)> = Vec::with_capacity(total);
    let mut n_failed = 0;
    for (l, f) in fits.into_iter().enumerate() {
        match f {
            Ok(c) => ok.push((l, c)),
            Err(e) => {
                log::warn!("E-Post component {l} failed: {e}");
                n_failed += 1;
            }
        }
    }
    if n_failed as f64 > EPOST_MAX_FAILURE_FRACTION * total as f64 || ok.is_empty() {
        return Err(Error::TooManyFailures {
            failed: n_failed,
            total,
        });
    }
    let n_rhat_exceeded = ok
        .iter()
        .filter(|(_, c)| c.max_rhat().is_some_and(|v| v > RHAT_LIMIT))
        .count();
    let fits: Vec<&Chains> = ok.iter().map(|(_, c)| c).collect();
    let max_rhat = crate::mcmc::max_rhat(&pooled_split_rhat(&fits));
    let mean_acceptance = ok
        .iter()
        .map(|(_, c)| c.acceptance.iter().sum::<f64>() / c.acceptance.len() as f64)
        .sum::<f64>()
        / ok.len() as f64;

    let w0 = comps.weights[0];
    let equal = comps
        .weights
        .iter()
        .all(|w| (w - w0).abs() <= 1e-12 * w0.abs());
    let per_fit = ok[0].1.n_draws();
    let draws = if equal {
        ok.iter().flat_map(|(_, c)| c.flatten()).collect()
    } else {
        let weights: Vec<f64> = ok.iter().map(|(l, _)| comps.weights[*l]).collect();
        let pool = per_fit * comps.len();
        let mut pick_rng = rng.child(u64::MAX);
        multinomial_pool(
            &ok.iter().map(|(_, c)| c.flatten()).collect::<Vec<_>>(),
            &weights,
            pool,
            &mut pick_rng,
        )
    };
    Ok(IPosterior {
        draws,
        names,
        method: "epost".into(),
        diagnostics: IDiagnostics {
            max_rhat,
            rhat_ok: max_rhat.is_none_or(|v| v <= RHAT_LIMIT),
            n_fits: total,
            n_failed,
            n_rhat_exceeded,
            mean_acceptance,
        },
        provenance: IProvenance {
            tposterior_hash: Some(components_hash(comps)),
            measurements_hash: measurements_hash(meas),
            seed: rng.seed(),
            stream: rng.stream(),
        },
    })
}

fn multinomial_pool(
    sets: &[Vec<Vec<f64>>],
    weights: &[f64],
    pool: usize,
    rng: &mut StreamRng,
) -> Vec<Vec<f64>> {
    let total: f64 = weights.iter().sum();
    let mut cdf = Vec::with_capacity(weights.len());
    let mut run = 0.0;
    for w in weights {
        run += w / total;
        cdf.push(run);
    }
    let mut out = Vec::with_capacity(pool);
    for _ in 0..pool {
        let u: f64 = rng.random();
        let l = cdf.partition_point(|c| *c < u).min(sets.len() - 1);
        let k = rng.random_range(0..sets[l].len());
        out.push(sets[l][k].clone());
    }
    out
}

/// Run inference with any propagation method. Point estimates use the full
/// training posterior; the other methods use `comps`.
#[allow(clippy::too_many_arguments)]
pub fn infer(
    method: UpMethod,
    surrogate: &Surrogate,
    tpost: &TPosterior,
    comps: &Components,
    meas: &Measurements,
    priors: &IStepPriors,
    cfg: &SamplerConfig,
    epost_cfg: &SamplerConfig,
    rng: &StreamRng,
) -> Result<IPosterior> {
    match method {
        UpMethod::Point { estimator } => {
            infer_point(surrogate, tpost, estimator, meas, priors, cfg, rng)
        }
        UpMethod::ELik => infer_elik(surrogate, comps, meas, priors, cfg, rng),
        UpMethod::ELogLik => infer_eloglik(surrogate, comps, meas, priors, cfg, rng),
        UpMethod::EPost => infer_epost(surrogate, comps, meas, priors, epost_cfg, rng),
    }
}

/// Likelihood family for inference against the simulator itself.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum SimulatorLikelihood {
    /// `Normal(M(omega), sigma_i)`
    Normal,
    /// `NegBin(I(t), phi)` counts for SIR.
    NegBin { phi: f64 },
}

/// Reference posterior using the simulator in place of a surrogate.
pub fn infer_simulator(
    sim: &SimulatorSpec,
    likelihood: &SimulatorLikelihood,
    meas: &Measurements,
    priors: &IStepPriors,
    cfg: &SamplerConfig,
    rng: &StreamRng,
) -> Result<IPosterior> {
    sim.validate()?;
    let prepared = PreparedPriors::new(priors)?;
    let n_omega = prepared.n_omega();
    let sir = match &sim.kind {
        SimulatorKind::Sir(c) => Some(c.clone()),
        _ => None,
    };
    let expected = if sir.is_some() { 2 } else { sim.input_dim() };
    if n_omega != expected {
        return Err(Error::DimensionMismatch {
            expected,
            got: n_omega,
        });
    }
    if sir.is_some() && meas.times.is_none() && !meas.is_empty() {
        return Err(Error::invalid("SIR measurements need observation times"));
    }
    if let SimulatorLikelihood::NegBin { phi } = likelihood {
        if !(phi.is_finite() && *phi > 0.0) {
            return Err(Error::invalid(format!("phi must be > 0, got {phi}")));
        }
    }
    let log_prob = |x: &[f64]| -> f64 {
        let lp = prepared.log_prior(x);
        if lp == f64::NEG_INFINITY || meas.is_empty() {
            return lp;
        }
        let omega = &x[..n_omega];
        let means: Vec<f64> = match (&sir, &meas.times) {
            (Some(cfg), Some(t)) => match sir_solve(cfg, omega[0], omega[1], t) {
                Ok(traj) => traj.i,
                Err(_) => return f64::NEG_INFINITY,
            },
            _ => match sim.response(omega) {
                Ok(y) => vec![y; meas.len()],
                Err(_) => return f64::NEG_INFINITY,
            },
        };
        let ll: f64 = match likelihood {
            SimulatorLikelihood::Normal => {
                let s = prepared.sigma(x);
                meas.ys
                    .iter()
                    .zip(&means)
                    .map(|(y, m)| normal_ln_pdf(*y, *m, s))
                    .sum()
            }
            SimulatorLikelihood::NegBin { phi } => meas
                .ys
                .iter()
                .zip(&means)
                .map(|(y, m)| {
                    if *y < 0.0 || y.fract() != 0.0 {
                        f64::NEG_INFINITY
                    } else {
                        crate::prob::negbin_ln_pmf(*y as u64, m.max(1e-300), *phi)
                    }
                })
                .sum(),
        };
        lp + ll
    };
    let target = TargetDensity::new(prepared.supports(), log_prob);
    let init = Init::Draw(Box::new(|r: &mut StreamRng| prepared.draw(r)));
    let chains = sample(&target, cfg, &init, rng)?;
    Ok(single_fit(
        chains,
        prepared.names(),
        "simulator",
        None,
        meas,
        rng,
    ))
}
