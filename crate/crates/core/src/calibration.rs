//! Simulation-based calibration of the two-step procedure.
//!
//! Each T-trial draws a training set and fits the surrogate; each of its
//! I-trials draws a ground truth from the prior, simulates measurements and
//! ranks the truth among thinned I-posterior draws.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Binomial, DiscreteCDF};

use crate::error::{Error, Result};
use crate::istep::{cluster_draws, infer, Components, IStepPriors, SigmaI, UpMethod};
use crate::mcmc::SamplerConfig;
use crate::prob::{Dist, StreamRng};
use crate::simulators::{generate_measurements, MeasurementNoise, SimulatorSpec};
use crate::surrogates::{Surrogate, SurrogateSpec};
use crate::tstep::{run_training_plan, TrainingPlan};

pub const DEFAULT_K_EFF: usize = 99;
pub const DEFAULT_N_SIM: usize = 1000;
/// Largest fraction of trials that may fail before a run is rejected.
pub const MAX_EXCLUDED_FRACTION: f64 = 0.10;
/// Floor for reported log-gamma values whose gamma underflows.
/// Central interval probability used for per-trial sharpness.
pub const SHARPNESS_LEVEL: f64 = 0.9;
pub const LOG_GAMMA_FLOOR: f64 = -708.0;

fn default_k_eff() -> usize {
    DEFAULT_K_EFF
}

/// Number of draws at least `omega_star`, with ties split uniformly at random.
pub fn rank_statistic<R: Rng + ?Sized>(omega_star: f64, draws: &[f64], rng: &mut R) -> usize {
    let above = draws.iter().filter(|d| **d > omega_star).count();
    let ties = draws.iter().filter(|d| **d == omega_star).count();
    above
        + if ties > 0 {
            rng.random_range(0..=ties)
        } else {
            0
        }
}

/// `k` draws evenly spaced through `draws`.
pub fn thin_evenly<T: Clone>(draws: &[T], k: usize) -> Result<Vec<T>> {
    if k == 0 || draws.len() < k {
        return Err(Error::invalid(format!(
            "cannot thin {} draws to {k}",
            draws.len()
        )));
    }
    let n = draws.len();
    Ok((0..k).map(|j| draws[j * n / k].clone()).collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SbcConfig {
    pub n_t_trials: usize,
    pub n_i_trials: usize,
    /// Draws kept per I-posterior before ranking; ranks lie in `0..=k_eff`.
    #[serde(default = "default_k_eff")]
    pub k_eff: usize,
    pub simulator: SimulatorSpec,
    pub surrogate: SurrogateSpec,
    pub training: TrainingPlan,
    /// Used both to draw ground truths and for inference.
    pub priors: IStepPriors,
    /// Measurements per I-trial.
    pub n_i: usize,
    #[serde(default)]
    pub time_span: Option<(f64, f64)>,
    /// Overrides the default `Normal(0, sigma_i)` measurement noise.
    #[serde(default)]
    pub measurement_noise: Option<MeasurementNoise>,
    pub method: UpMethod,
    #[serde(default)]
    pub sampler: SamplerConfig,
    #[serde(default)]
    pub epost_sampler: Option<SamplerConfig>,
    /// Number of k-means centroids E-Post fits instead of every draw.
    #[serde(default)]
    pub clusters: Option<usize>,
}

impl SbcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_t_trials == 0 || self.n_i_trials == 0 || self.k_eff == 0 {
            return Err(Error::invalid("trial counts and k_eff must be >= 1"));
        }
        if self.clusters == Some(0) {
            return Err(Error::invalid("clusters must be >= 1"));
        }
        self.simulator.validate()?;
        self.sampler.validate()?;
        if let Some(e) = &self.epost_sampler {
            e.validate()?;
        }
        Surrogate::new(self.surrogate.clone())?;
        for p in &self.priors.omega {
            Dist::new(p.clone())?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SbcRecord {
    pub t_trial: usize,
    pub i_trial: usize,
    pub dim: usize,
    pub omega_star: f64,
    pub rank: usize,
    pub k_eff: usize,
    pub rhat_max: Option<f64>,
    /// Width of the central [`SHARPNESS_LEVEL`] interval of the full I-posterior.
    pub sharpness: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialFailure {
    pub t_trial: usize,
    /// `None` when the T-step itself failed and all its I-trials were lost.
    pub i_trial: Option<usize>,
    pub error: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SbcRun {
    pub records: Vec<SbcRecord>,
    pub failures: Vec<TrialFailure>,
    pub n_trials: usize,
    pub n_excluded: usize,
    pub k_eff: usize,
}

impl SbcRun {
    pub fn n_dims(&self) -> usize {
        self.records.iter().map(|r| r.dim + 1).max().unwrap_or(0)
    }

    pub fn ranks(&self, dim: usize) -> Vec<usize> {
        self.records
            .iter()
            .filter(|r| r.dim == dim)
            .map(|r| r.rank)
            .collect()
    }
}

type TrialResult = std::result::Result<Vec<SbcRecord>, TrialFailure>;

fn run_i_trial(
    cfg: &SbcConfig,
    surrogate: &Surrogate,
    tpost: &crate::tstep::TPosterior,
    comps: &Components,
    t: usize,
    i: usize,
    rng: &StreamRng,
) -> Result<Vec<SbcRecord>> {
    let mut truth_rng = rng.child(0);
    let omega_star: Vec<f64> = cfg
        .priors
        .omega
        .iter()
        .map(|p| Dist::new(p.clone()).map(|d| d.draw_f64(&mut truth_rng)))
        .collect::<Result<_>>()?;
    let noise = match (&cfg.measurement_noise, &cfg.priors.sigma_i) {
        (Some(n), _) => n.clone(),
        (None, SigmaI::Fixed(s)) => MeasurementNoise::Normal { sigma: *s },
        (None, SigmaI::Prior(p)) => MeasurementNoise::Normal {
            sigma: Dist::new(p.clone())?.draw_f64(&mut truth_rng),
        },
    };
    let meas = generate_measurements(
        &cfg.simulator,
        &omega_star,
        &noise,
        cfg.n_i,
        cfg.time_span,
        &mut rng.child(1),
    )?;
    let epost_cfg = cfg.epost_sampler.as_ref().unwrap_or(&cfg.sampler);
    let post = infer(
        cfg.method,
        surrogate,
        tpost,
        comps,
        &meas,
        &cfg.priors,
        &cfg.sampler,
        epost_cfg,
        &rng.child(2),
    )?;
    let mut tie_rng = rng.child(3);
    let thinned = thin_evenly(&post.draws, cfg.k_eff)?;
    omega_star
        .iter()
        .enumerate()
        .map(|(dim, w)| {
            let col: Vec<f64> = thinned.iter().map(|d| d[dim]).collect();
            let full: Vec<f64> = post.draws.iter().map(|d| d[dim]).collect();
            Ok(SbcRecord {
                t_trial: t,
                i_trial: i,
                dim,
                omega_star: *w,
                rank: rank_statistic(*w, &col, &mut tie_rng),
                k_eff: cfg.k_eff,
                rhat_max: post.diagnostics.max_rhat,
                sharpness: sharpness(&full, SHARPNESS_LEVEL)?,
            })
        })
        .collect()
}

fn run_t_trial(
    cfg: &SbcConfig,
    surrogate: &Surrogate,
    t: usize,
    rng: &StreamRng,
) -> Vec<TrialResult> {
    let fail_all = |e: Error| {
        vec![Err(TrialFailure {
            t_trial: t,
            i_trial: None,
            error: e.to_string(),
        })]
    };
    let tpost = match run_training_plan(&cfg.training, &cfg.simulator, surrogate, &rng.child(0)) {
        Ok((_, tp)) => tp,
        Err(e) => return fail_all(e),
    };
    let comps = match (cfg.method, cfg.clusters) {
        (UpMethod::EPost, Some(l)) if tpost.n_draws() > l => {
            match cluster_draws(&tpost.theta_rows(), l, &mut rng.child(1)) {
                Ok(c) => Components::from_clusters(&c, &tpost),
                Err(e) => return fail_all(e),
            }
        }
        _ => Components::from_tposterior(&tpost),
    };
    (0..cfg.n_i_trials)
        .into_par_iter()
        .map(|i| {
            run_i_trial(
                cfg,
                surrogate,
                &tpost,
                &comps,
                t,
                i,
                &rng.child(2 + i as u64),
            )
            .map_err(|e| TrialFailure {
                t_trial: t,
                i_trial: Some(i),
                error: e.to_string(),
            })
        })
        .collect()
}

/// Run the calibration loop. T-trial `t` uses `rng.child(t)`.
///
/// Failed trials are excluded and reported; more than
/// [`MAX_EXCLUDED_FRACTION`] of `n_t_trials * n_i_trials` failing is an error.
pub fn sbc_run(cfg: &SbcConfig, rng: &StreamRng) -> Result<SbcRun> {
    cfg.validate()?;
    let surrogate = Surrogate::new(cfg.surrogate.clone())?;
    let per_t: Vec<Vec<TrialResult>> = (0..cfg.n_t_trials)
        .into_par_iter()
        .map(|t| run_t_trial(cfg, &surrogate, t, &rng.child(t as u64)))
        .collect();
    let n_trials = cfg.n_t_trials * cfg.n_i_trials;
    let mut records = Vec::new();
    let mut failures = Vec::new();
    let mut n_excluded = 0;
    for results in per_t {
        for r in results {
            match r {
                Ok(mut recs) => records.append(&mut recs),
                Err(f) => {
                    n_excluded += if f.i_trial.is_none() {
                        cfg.n_i_trials
                    } else {
                        1
                    };
                    log::warn!(
                        "SBC trial {}/{:?} excluded: {}",
                        f.t_trial,
                        f.i_trial,
                        f.error
                    );
                    failures.push(f);
                }
            }
        }
    }
    if n_excluded as f64 > MAX_EXCLUDED_FRACTION * n_trials as f64 {
        return Err(Error::TooManyFailures {
            failed: n_excluded,
            total: n_trials,
        });
    }
    Ok(SbcRun {
        records,
        failures,
        n_trials,
        n_excluded,
        k_eff: cfg.k_eff,
    })
}

/// Counts `#{r < j}` at `j = 1..=k_eff`.
fn ecdf_counts(ranks: &[usize], k_eff: usize) -> Vec<u64> {
    let mut hist = vec![0u64; k_eff + 1];
    for &r in ranks {
        hist[r.min(k_eff)] += 1;
    }
    let mut run = 0;
    (0..k_eff)
        .map(|j| {
            run += hist[j];
            run
        })
        .collect()
}

fn eval_points(k_eff: usize) -> Vec<f64> {
    (1..=k_eff).map(|j| j as f64 / (k_eff + 1) as f64).collect()
}

fn two_sided_tail(count: u64, n: u64, z: f64) -> f64 {
    let b = Binomial::new(z, n).expect("valid binomial");
    let lower = b.cdf(count);
    let upper = if count == 0 { 1.0 } else { b.sf(count - 1) };
    (2.0 * lower.min(upper)).min(1.0)
}

/// `log(gamma)`: the smallest two-sided binomial tail probability of the
/// rank ECDF over the evaluation points `j / (k_eff + 1)`, floored at
/// [`LOG_GAMMA_FLOOR`].
pub fn log_gamma(ranks: &[usize], k_eff: usize) -> Result<f64> {
    if ranks.is_empty() || k_eff == 0 {
        return Err(Error::EmptyInput("ranks"));
    }
    let n = ranks.len() as u64;
    let g = ecdf_counts(ranks, k_eff)
        .iter()
        .zip(eval_points(k_eff))
        .map(|(c, z)| two_sided_tail(*c, n, z))
        .fold(1.0, f64::min);
    Ok(g.ln().max(LOG_GAMMA_FLOOR))
}

/// Sorted `log(gamma)` of `n_sim` sets of `n` uniform ranks; set `s` uses `rng.child(s)`.
fn simulate_log_gamma(n: usize, k_eff: usize, n_sim: usize, rng: &StreamRng) -> Result<Vec<f64>> {
    if n == 0 || n_sim == 0 {
        return Err(Error::EmptyInput("rank simulations"));
    }
    let mut sims = (0..n_sim)
        .into_par_iter()
        .map(|s| {
            let mut r = rng.child(s as u64);
            let ranks: Vec<usize> = (0..n).map(|_| r.random_range(0..=k_eff)).collect();
            log_gamma(&ranks, k_eff)
        })
        .collect::<Result<Vec<_>>>()?;
    sims.sort_by(f64::total_cmp);
    Ok(sims)
}

/// Type-7 (linear interpolation) sample quantile of sorted values.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// `log(gamma)` below this value rejects uniformity at level `confidence`.
pub fn log_gamma_threshold(
    n: usize,
    k_eff: usize,
    confidence: f64,
    n_sim: usize,
    rng: &StreamRng,
) -> Result<f64> {
    if !(0.0 < confidence && confidence < 1.0) {
        return Err(Error::invalid(format!(
            "confidence must be in (0, 1), got {confidence}"
        )));
    }
    let sims = simulate_log_gamma(n, k_eff, n_sim, rng)?;
    Ok(quantile_sorted(&sims, 1.0 - confidence))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EcdfEnvelope {
    pub z: Vec<f64>,
    /// Band around zero on the ECDF-difference scale.
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Observed ECDF minus the uniform CDF.
    pub observed: Vec<f64>,
    pub log_gamma: f64,
    pub threshold: f64,
}

impl EcdfEnvelope {
    pub fn inside(&self) -> bool {
        self.observed
            .iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(o, (l, u))| *o >= *l - 1e-12 && *o <= *u + 1e-12)
    }
}

fn binomial_quantile(b: &Binomial, n: u64, p: f64) -> u64 {
    let (mut lo, mut hi) = (0u64, n);
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if b.cdf(mid) >= p {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    lo
}

/// Simultaneous ECDF-difference band for uniform ranks, from the
/// Monte Carlo `log(gamma)` threshold.
pub fn ecdf_envelope(
    ranks: &[usize],
    k_eff: usize,
    confidence: f64,
    n_sim: usize,
    rng: &StreamRng,
) -> Result<EcdfEnvelope> {
    let threshold = log_gamma_threshold(ranks.len(), k_eff, confidence, n_sim, rng)?;
    let gamma = threshold.exp();
    let n = ranks.len() as u64;
    let z = eval_points(k_eff);
    let counts = ecdf_counts(ranks, k_eff);
    let mut lower = Vec::with_capacity(k_eff);
    let mut upper = Vec::with_capacity(k_eff);
    let mut observed = Vec::with_capacity(k_eff);
    for (c, zj) in counts.iter().zip(&z) {
        let b = Binomial::new(*zj, n).expect("valid binomial");
        lower.push(binomial_quantile(&b, n, gamma / 2.0) as f64 / n as f64 - zj);
        upper.push(binomial_quantile(&b, n, 1.0 - gamma / 2.0) as f64 / n as f64 - zj);
        observed.push(*c as f64 / n as f64 - zj);
    }
    Ok(EcdfEnvelope {
        z,
        lower,
        upper,
        observed,
        log_gamma: log_gamma(ranks, k_eff)?,
        threshold,
    })
}

/// Width of the central `q` interval of `draws`.
pub fn sharpness(draws: &[f64], q: f64) -> Result<f64> {
    if draws.is_empty() {
        return Err(Error::EmptyInput("draws"));
    }
    if !(0.0 < q && q < 1.0) {
        return Err(Error::invalid(format!("q must be in (0, 1), got {q}")));
    }
    let mut s = draws.to_vec();
    s.sort_by(f64::total_cmp);
    Ok(quantile_sorted(&s, 0.5 + q / 2.0) - quantile_sorted(&s, 0.5 - q / 2.0))
}

/// Two-sample Kolmogorov-Smirnov statistic.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyInput("KS samples"));
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::istep::PointEstimator;
    use crate::prob::DistSpec;
    use crate::simulators::{Design, SimulatorKind};
    use crate::surrogates::{default_logistic_priors, LikelihoodFamily, SigmaA, SurrogateKind};
    use rand_distr::{Distribution, StandardNormal};
    use statrs::distribution::{ChiSquared, ContinuousCDF};

    #[test]
    fn rank_extremes() {
        let mut r = StreamRng::new(0, 0);
        let d = [1.0, 2.0, 3.0];
        assert_eq!(rank_statistic(0.0, &d, &mut r), 3);
        assert_eq!(rank_statistic(5.0, &d, &mut r), 0);
        for _ in 0..20 {
            let k = rank_statistic(2.0, &[2.0, 2.0, 3.0], &mut r);
            assert!((1..=3).contains(&k));
        }
    }

    #[test]
    fn rank_is_uniform_for_exchangeable_draws() {
        let mut r = StreamRng::new(1, 0);
        let k = 9;
        let mut hist = [0usize; 10];
        let n = 10_000;
        for _ in 0..n {
            let star: f64 = StandardNormal.sample(&mut r);
            let draws: Vec<f64> = (0..k).map(|_| StandardNormal.sample(&mut r)).collect();
            hist[rank_statistic(star, &draws, &mut r)] += 1;
        }
        let e = n as f64 / 10.0;
        let chi2: f64 = hist.iter().map(|h| (*h as f64 - e).powi(2) / e).sum();
        let p = 1.0 - ChiSquared::new(9.0).unwrap().cdf(chi2);
        assert!(p > 0.01, "chi2 = {chi2}, p = {p}");
    }

    #[test]
    fn thinning() {
        let x: Vec<usize> = (0..10).collect();
        assert_eq!(thin_evenly(&x, 5).unwrap(), vec![0, 2, 4, 6, 8]);
        assert_eq!(thin_evenly(&x, 10).unwrap(), x);
        assert!(thin_evenly(&x, 11).is_err());
    }

    #[test]
    fn log_gamma_extremes() {
        let k = 99;
        let rng = StreamRng::new(2, 0);
        let stratified: Vec<usize> = (0..5).flat_map(|_| 0..=k).collect();
        let th = log_gamma_threshold(stratified.len(), k, 0.95, 1000, &rng).unwrap();
        assert!(log_gamma(&stratified, k).unwrap() > th);
        let constant = vec![0usize; stratified.len()];
        assert!(log_gamma(&constant, k).unwrap() < th - 10.0);
        let th99 = log_gamma_threshold(stratified.len(), k, 0.99, 1000, &rng).unwrap();
        assert!(th99 < th);
    }

    #[test]
    fn envelope_coverage_for_uniform_ranks() {
        let k = 99;
        let n = 10_000;
        let env_rng = StreamRng::new(3, 0);
        let mut r = StreamRng::new(4, 0);
        let sample = |r: &mut StreamRng| (0..n).map(|_| r.random_range(0..=k)).collect::<Vec<_>>();
        let env = ecdf_envelope(&sample(&mut r), k, 0.95, 1000, &env_rng).unwrap();
        let inside = (0..200)
            .filter(|_| {
                let ranks = sample(&mut r);
                let counts = ecdf_counts(&ranks, k);
                counts.iter().enumerate().all(|(j, c)| {
                    let o = *c as f64 / n as f64 - env.z[j];
                    o >= env.lower[j] - 1e-12 && o <= env.upper[j] + 1e-12
                })
            })
            .count();
        assert!(inside >= 186, "{inside} of 200 inside");
    }

    #[test]
    fn envelope_rejects_point_mass_and_narrows_with_n() {
        let k = 99;
        let rng = StreamRng::new(5, 0);
        let env = ecdf_envelope(&vec![0; 100], k, 0.95, 500, &rng).unwrap();
        assert!(!env.inside());
        assert!(env.observed[0] > env.upper[0]);
        let stratified = |reps: usize| (0..reps).flat_map(|_| 0..=k).collect::<Vec<_>>();
        let small = ecdf_envelope(&stratified(1), k, 0.95, 500, &rng).unwrap();
        let big = ecdf_envelope(&stratified(4), k, 0.95, 500, &rng).unwrap();
        for j in 0..k {
            assert!(
                big.upper[j] - big.lower[j] < small.upper[j] - small.lower[j],
                "j = {j}"
            );
        }
    }

    #[test]
    fn sharpness_cases() {
        assert_eq!(sharpness(&[2.0; 10], 0.9).unwrap(), 0.0);
        let mut r = StreamRng::new(6, 0);
        let x: Vec<f64> = (0..100_000)
            .map(|_| StandardNormal.sample(&mut r))
            .collect();
        let w = sharpness(&x, 0.9).unwrap();
        assert!((w - 3.2897).abs() < 0.02 * 3.2897, "{w}");
        let x2: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
        assert_eq!(sharpness(&x2, 0.9).unwrap(), 2.0 * w);
        assert!(sharpness(&[], 0.9).is_err());
        assert!(sharpness(&x, 1.0).is_err());
    }

    #[test]
    fn ks_basics() {
        assert_eq!(ks_statistic(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(ks_statistic(&[1.0, 2.0], &[3.0, 4.0]).unwrap(), 1.0);
        assert!((ks_statistic(&[1.0, 2.0, 3.0, 4.0], &[3.5, 4.5]).unwrap() - 0.75).abs() < 1e-15);
    }

    pub(crate) fn cheat_config(n_t: usize, n_i: usize) -> SbcConfig {
        SbcConfig {
            n_t_trials: n_t,
            n_i_trials: n_i,
            k_eff: 99,
            simulator: SimulatorSpec::new(SimulatorKind::Logistic),
            surrogate: SurrogateSpec {
                kind: SurrogateKind::Logistic,
                coeff_priors: default_logistic_priors(),
                sigma_a: SigmaA::Sampled {
                    prior: DistSpec::HalfNormal { sigma: 1.0 },
                    propagate: false,
                },
                likelihood: LikelihoodFamily::Normal,
            },
            training: TrainingPlan::Fixed {
                c: vec![2.0, 10.0, 0.0, -1.0],
                sigma_a: None,
            },
            priors: IStepPriors {
                omega: vec![DistSpec::TruncatedNormal {
                    mu: 0.0,
                    sigma: 0.5,
                    lo: -1.0,
                    hi: 1.0,
                }],
                sigma_i: SigmaI::Prior(DistSpec::Uniform { lo: 0.0, hi: 0.05 }),
            },
            n_i: 5,
            time_span: None,
            measurement_noise: None,
            method: UpMethod::Point {
                estimator: PointEstimator::Mean,
            },
            sampler: SamplerConfig::new(4, 500, 500),
            epost_sampler: None,
            clusters: None,
        }
    }

    #[test]
    fn minimal_run_has_one_record() {
        let run = sbc_run(&cheat_config(1, 1), &StreamRng::new(0, 0)).unwrap();
        assert_eq!(run.records.len(), 1);
        assert!(run.records[0].rank <= 99);
        assert_eq!(run.n_excluded, 0);
    }

    #[test]
    fn runs_are_reproducible() {
        let cfg = cheat_config(2, 3);
        let a = sbc_run(&cfg, &StreamRng::new(7, 0)).unwrap();
        let b = sbc_run(&cfg, &StreamRng::new(7, 0)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.records.len(), 6);
    }

    #[test]
    fn failing_trials_are_counted() {
        let mut cfg = cheat_config(1, 2);
        // More draws kept than the sampler produces: every I-trial fails.
        cfg.k_eff = 5000;
        let err = sbc_run(&cfg, &StreamRng::new(0, 0));
        assert!(matches!(
            err,
            Err(Error::TooManyFailures {
                failed: 2,
                total: 2
            })
        ));
    }

    #[test]
    fn mcmc_training_plan_runs() {
        let mut cfg = cheat_config(1, 2);
        cfg.training = TrainingPlan::Mcmc {
            design: Design::Halton { n: 5 },
            sigma_s: 0.01,
            sampler: SamplerConfig::new(2, 300, 200),
        };
        cfg.method = UpMethod::EPost;
        cfg.clusters = Some(5);
        cfg.sampler = SamplerConfig::new(2, 200, 100);
        let run = sbc_run(&cfg, &StreamRng::new(1, 0)).unwrap();
        assert_eq!(run.records.len(), 2);
    }
}
