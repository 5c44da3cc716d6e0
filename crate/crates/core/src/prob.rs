//! Probability kernels, stable log-space arithmetic and seeded random streams.
//!
//! Every distribution used by the rest of the crate is described by a
//! serializable [`DistSpec`] and validated once into a [`Dist`]. Evaluation of
//! a validated distribution never fails: points outside the support get a log
//! density of negative infinity so that samplers can simply reject them.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal as StdNormalCdf};
use statrs::function::erf::erfc;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

pub const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Counter-based random stream identified by `(seed, stream)`.
///
/// Two instances with the same pair produce the same sequence. Child streams
/// are derived from identifiers only, never from consumed state, so a parallel
/// job gets the same numbers regardless of scheduling.
#[derive(Clone, Debug)]
pub struct StreamRng {
    seed: u64,
    stream: u64,
    inner: ChaCha8Rng,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl StreamRng {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Self {
            seed,
            stream,
            inner,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    /// Independent stream for sub-job `index` of this stream.
    pub fn child(&self, index: u64) -> StreamRng {
        let id = splitmix64(splitmix64(self.stream) ^ splitmix64(index.wrapping_add(0xA5A5)));
        StreamRng::new(self.seed, id)
    }
}

impl RngCore for StreamRng {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

/// Distribution families, with their raw parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum DistSpec {
    Normal {
        mu: f64,
        sigma: f64,
    },
    MultivariateNormal {
        mean: Vec<f64>,
        cov: Vec<Vec<f64>>,
    },
    TruncatedNormal {
        mu: f64,
        sigma: f64,
        lo: f64,
        hi: f64,
    },
    HalfNormal {
        sigma: f64,
    },
    Uniform {
        lo: f64,
        hi: f64,
    },
    LogNormal {
        mu: f64,
        sigma: f64,
    },
    NegativeBinomial {
        mu: f64,
        phi: f64,
    },
}

/// A value in the support of some distribution.
#[derive(Clone, Debug, PartialEq)]
pub enum Sample {
    Real(f64),
    Vector(Vec<f64>),
    Count(u64),
}

impl Sample {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Sample::Real(x) => Some(*x),
            Sample::Count(n) => Some(*n as f64),
            Sample::Vector(v) if v.len() == 1 => Some(v[0]),
            Sample::Vector(_) => None,
        }
    }
}

#[derive(Clone, Debug)]
enum Cache {
    None,
    Mvn {
        chol: DMatrix<f64>,
        half_log_det: f64,
    },
    Truncated {
        cdf_lo: f64,
        cdf_hi: f64,
        log_mass: f64,
    },
}

/// A validated distribution.
#[derive(Clone, Debug)]
pub struct Dist {
    spec: DistSpec,
    cache: Cache,
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "{name} must be finite and > 0, got {v}"
        )))
    }
}

fn finite(name: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name} must be finite, got {v}")))
    }
}

/// Standard normal CDF.
pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Standard normal quantile function.
pub fn std_normal_quantile(p: f64) -> f64 {
    StdNormalCdf::standard().inverse_cdf(p)
}

/// Log density of `Normal(mu, sigma)` at `x`.
#[inline]
pub fn normal_ln_pdf(x: f64, mu: f64, sigma: f64) -> f64 {
    let z = (x - mu) / sigma;
    -LN_SQRT_2PI - sigma.ln() - 0.5 * z * z
}

/// Log density of `LogNormal(mu, sigma)` at `y`; negative infinity for `y <= 0`.
#[inline]
pub fn lognormal_ln_pdf(y: f64, mu: f64, sigma: f64) -> f64 {
    if y <= 0.0 {
        return f64::NEG_INFINITY;
    }
    let ly = y.ln();
    normal_ln_pdf(ly, mu, sigma) - ly
}

/// Log mass of the mean/shape parameterized negative binomial at count `n`.
pub fn negbin_ln_pmf(n: u64, mu: f64, phi: f64) -> f64 {
    let n = n as f64;
    let denom = (mu + phi).ln();
    ln_gamma(n + phi) - ln_gamma(phi) - ln_gamma(n + 1.0)
        + n * (mu.ln() - denom)
        + phi * (phi.ln() - denom)
}

impl Dist {
    pub fn new(spec: DistSpec) -> Result<Self> {
        let cache = match &spec {
            DistSpec::Normal { mu, sigma } | DistSpec::LogNormal { mu, sigma } => {
                finite("mu", *mu)?;
                positive("sigma", *sigma)?;
                Cache::None
            }
            DistSpec::HalfNormal { sigma } => {
                positive("sigma", *sigma)?;
                Cache::None
            }
            DistSpec::Uniform { lo, hi } => {
                finite("lo", *lo)?;
                finite("hi", *hi)?;
                if lo >= hi {
                    return Err(Error::invalid(format!(
                        "uniform bounds must satisfy lo < hi, got [{lo}, {hi}]"
                    )));
                }
                Cache::None
            }
            DistSpec::TruncatedNormal { mu, sigma, lo, hi } => {
                finite("mu", *mu)?;
                positive("sigma", *sigma)?;
                finite("lo", *lo)?;
                finite("hi", *hi)?;
                if lo >= hi {
                    return Err(Error::invalid(format!(
                        "truncation bounds must satisfy lo < hi, got [{lo}, {hi}]"
                    )));
                }
                let a = (lo - mu) / sigma;
                let b = (hi - mu) / sigma;
                let cdf_lo = std_normal_cdf(a);
                let cdf_hi = std_normal_cdf(b);
                // Upper-tail masses are more accurate when the interval sits right of the mean.
                let mass = if a > 0.0 {
                    std_normal_cdf(-a) - std_normal_cdf(-b)
                } else {
                    cdf_hi - cdf_lo
                };
                if !(mass > 0.0) {
                    return Err(Error::invalid(
                        "truncated normal has zero mass on its interval",
                    ));
                }
                Cache::Truncated {
                    cdf_lo,
                    cdf_hi,
                    log_mass: mass.ln(),
                }
            }
            DistSpec::NegativeBinomial { mu, phi } => {
                positive("mu", *mu)?;
                positive("phi", *phi)?;
                Cache::None
            }
            DistSpec::MultivariateNormal { mean, cov } => {
                let d = mean.len();
                if d == 0 {
                    return Err(Error::EmptyInput("multivariate normal mean"));
                }
                if cov.len() != d || cov.iter().any(|r| r.len() != d) {
                    return Err(Error::invalid(format!("covariance must be {d}x{d}")));
                }
                for v in mean.iter().chain(cov.iter().flatten()) {
                    finite("covariance/mean entry", *v)?;
                }
                for i in 0..d {
                    for j in 0..i {
                        let (a, b) = (cov[i][j], cov[j][i]);
                        if (a - b).abs() > 1e-12 * (1.0 + a.abs().max(b.abs())) {
                            return Err(Error::invalid("covariance is not symmetric"));
                        }
                    }
                }
                let m = DMatrix::from_fn(d, d, |i, j| cov[i][j]);
                let chol = m
                    .cholesky()
                    .ok_or_else(|| Error::invalid("covariance is not positive-definite"))?
                    .l();
                let half_log_det = (0..d).map(|i| chol[(i, i)].ln()).sum();
                Cache::Mvn { chol, half_log_det }
            }
        };
        Ok(Self { spec, cache })
    }

    pub fn normal(mu: f64, sigma: f64) -> Result<Self> {
        Self::new(DistSpec::Normal { mu, sigma })
    }

    pub fn spec(&self) -> &DistSpec {
        &self.spec
    }

    pub fn dim(&self) -> usize {
        match &self.spec {
            DistSpec::MultivariateNormal { mean, .. } => mean.len(),
            _ => 1,
        }
    }

    /// Support interval of a univariate family.
    pub fn bounds(&self) -> (f64, f64) {
        match &self.spec {
            DistSpec::TruncatedNormal { lo, hi, .. } | DistSpec::Uniform { lo, hi } => (*lo, *hi),
            DistSpec::HalfNormal { .. }
            | DistSpec::LogNormal { .. }
            | DistSpec::NegativeBinomial { .. } => (0.0, f64::INFINITY),
            _ => (f64::NEG_INFINITY, f64::INFINITY),
        }
    }

    /// Log density of a univariate value. Counts are accepted as integral reals.
    pub fn ln_pdf(&self, x: f64) -> f64 {
        if x.is_nan() {
            return f64::NAN;
        }
        match (&self.spec, &self.cache) {
            (DistSpec::Normal { mu, sigma }, _) => normal_ln_pdf(x, *mu, *sigma),
            (DistSpec::LogNormal { mu, sigma }, _) => lognormal_ln_pdf(x, *mu, *sigma),
            (DistSpec::HalfNormal { sigma }, _) => {
                if x < 0.0 {
                    f64::NEG_INFINITY
                } else {
                    std::f64::consts::LN_2 + normal_ln_pdf(x, 0.0, *sigma)
                }
            }
            (DistSpec::Uniform { lo, hi }, _) => {
                if x < *lo || x > *hi {
                    f64::NEG_INFINITY
                } else {
                    -(hi - lo).ln()
                }
            }
            (
                DistSpec::TruncatedNormal { mu, sigma, lo, hi },
                Cache::Truncated { log_mass, .. },
            ) => {
                if x < *lo || x > *hi {
                    f64::NEG_INFINITY
                } else {
                    normal_ln_pdf(x, *mu, *sigma) - log_mass
                }
            }
            (DistSpec::NegativeBinomial { mu, phi }, _) => {
                if x < 0.0 || x.fract() != 0.0 || !x.is_finite() {
                    f64::NEG_INFINITY
                } else {
                    negbin_ln_pmf(x as u64, *mu, *phi)
                }
            }
            (DistSpec::MultivariateNormal { .. }, _) => self.ln_pdf_vec(&[x]),
            _ => unreachable!("cache always matches spec"),
        }
    }

    /// Log density of a vector value. Univariate families accept length-1 slices.
    pub fn ln_pdf_vec(&self, x: &[f64]) -> f64 {
        match (&self.spec, &self.cache) {
            (DistSpec::MultivariateNormal { mean, .. }, Cache::Mvn { chol, half_log_det }) => {
                if x.len() != mean.len() {
                    return f64::NEG_INFINITY;
                }
                let diff = DVector::from_iterator(x.len(), x.iter().zip(mean).map(|(a, b)| a - b));
                let z = chol
                    .solve_lower_triangular(&diff)
                    .expect("Cholesky factor has a positive diagonal");
                -(x.len() as f64) * LN_SQRT_2PI - half_log_det - 0.5 * z.norm_squared()
            }
            _ if x.len() == 1 => self.ln_pdf(x[0]),
            _ => f64::NEG_INFINITY,
        }
    }

    pub fn log_density(&self, x: &Sample) -> f64 {
        match x {
            Sample::Real(v) => self.ln_pdf(*v),
            Sample::Count(n) => match &self.spec {
                DistSpec::NegativeBinomial { mu, phi } => negbin_ln_pmf(*n, *mu, *phi),
                _ => self.ln_pdf(*n as f64),
            },
            Sample::Vector(v) => self.ln_pdf_vec(v),
        }
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Sample {
        match (&self.spec, &self.cache) {
            (DistSpec::MultivariateNormal { mean, .. }, Cache::Mvn { chol, .. }) => {
                let z = DVector::from_iterator(
                    mean.len(),
                    (0..mean.len()).map(|_| rng.sample::<f64, _>(StandardNormal)),
                );
                let x = chol * z;
                Sample::Vector(mean.iter().zip(x.iter()).map(|(m, v)| m + v).collect())
            }
            (DistSpec::NegativeBinomial { mu, phi }, _) => {
                let rate = Gamma::new(*phi, mu / phi)
                    .expect("validated shape and scale")
                    .sample(rng);
                if rate <= 0.0 {
                    return Sample::Count(0);
                }
                let n: f64 = Poisson::new(rate).expect("positive rate").sample(rng);
                Sample::Count(n as u64)
            }
            _ => Sample::Real(self.draw_f64(rng)),
        }
    }

    /// Draw from a univariate family. Negative binomial counts are returned as reals.
    ///
    /// Panics when called on a multivariate normal of dimension > 1.
    pub fn draw_f64<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match (&self.spec, &self.cache) {
            (DistSpec::Normal { mu, sigma }, _) => {
                mu + sigma * rng.sample::<f64, _>(StandardNormal)
            }
            (DistSpec::LogNormal { mu, sigma }, _) => {
                (mu + sigma * rng.sample::<f64, _>(StandardNormal)).exp()
            }
            (DistSpec::HalfNormal { sigma }, _) => {
                (sigma * rng.sample::<f64, _>(StandardNormal)).abs()
            }
            (DistSpec::Uniform { lo, hi }, _) => lo + (hi - lo) * rng.random::<f64>(),
            (
                DistSpec::TruncatedNormal { mu, sigma, lo, hi },
                Cache::Truncated { cdf_lo, cdf_hi, .. },
            ) => {
                let a = (lo - mu) / sigma;
                let u: f64 = rng.random();
                let z = if a > 0.0 {
                    // Mirror onto the left tail where the CDF has full precision.
                    let (p_lo, p_hi) = (std_normal_cdf(-(hi - mu) / sigma), std_normal_cdf(-a));
                    -std_normal_quantile(p_lo + u * (p_hi - p_lo))
                } else {
                    std_normal_quantile(cdf_lo + u * (cdf_hi - cdf_lo))
                };
                (mu + sigma * z).clamp(*lo, *hi)
            }
            (DistSpec::NegativeBinomial { .. }, _) => match self.draw(rng) {
                Sample::Count(n) => n as f64,
                _ => unreachable!(),
            },
            (DistSpec::MultivariateNormal { .. }, _) => {
                assert_eq!(
                    self.dim(),
                    1,
                    "draw_f64 called on a multivariate distribution"
                );
                match self.draw(rng) {
                    Sample::Vector(v) => v[0],
                    _ => unreachable!(),
                }
            }
            _ => unreachable!("cache always matches spec"),
        }
    }

    /// Mean of a univariate family (used for initial points).
    pub fn mean(&self) -> f64 {
        match (&self.spec, &self.cache) {
            (DistSpec::Normal { mu, .. }, _) => *mu,
            (DistSpec::LogNormal { mu, sigma }, _) => (mu + 0.5 * sigma * sigma).exp(),
            (DistSpec::HalfNormal { sigma }, _) => sigma * (2.0 / std::f64::consts::PI).sqrt(),
            (DistSpec::Uniform { lo, hi }, _) => 0.5 * (lo + hi),
            (DistSpec::NegativeBinomial { mu, .. }, _) => *mu,
            (
                DistSpec::TruncatedNormal { mu, sigma, lo, hi },
                Cache::Truncated { log_mass, .. },
            ) => {
                let a = (lo - mu) / sigma;
                let b = (hi - mu) / sigma;
                let phi = |z: f64| (-0.5 * z * z - LN_SQRT_2PI).exp();
                mu + sigma * (phi(a) - phi(b)) / log_mass.exp()
            }
            (DistSpec::MultivariateNormal { mean, .. }, _) => mean[0],
            _ => unreachable!(),
        }
    }
}

/// `log(sum_i w_i * exp(v_i))`, computed after subtracting the maximum.
///
/// Without weights every term has unit weight. Entries with zero weight are
/// ignored when picking the shift. The reduction runs in index order, so the
/// result does not depend on thread scheduling.
pub fn log_sum_exp(values: &[f64], weights: Option<&[f64]>) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyInput("log_sum_exp values"));
    }
    if let Some(w) = weights {
        if w.len() != values.len() {
            return Err(Error::DimensionMismatch {
                expected: values.len(),
                got: w.len(),
            });
        }
        if w.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(Error::invalid(
                "log_sum_exp weights must be finite and nonnegative",
            ));
        }
        if w.iter().all(|x| *x == 0.0) {
            return Err(Error::invalid("log_sum_exp weights are all zero"));
        }
    }
    let weight = |i: usize| weights.map_or(1.0, |w| w[i]);
    let shift = values
        .iter()
        .enumerate()
        .filter(|(i, _)| weight(*i) > 0.0)
        .map(|(_, v)| *v)
        .fold(f64::NEG_INFINITY, f64::max);
    if !shift.is_finite() {
        return Ok(shift);
    }
    let mut acc = 0.0;
    for (i, v) in values.iter().enumerate() {
        let w = weight(i);
        if w > 0.0 {
            acc += w * (v - shift).exp();
        }
    }
    Ok(shift + acc.ln())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rng() -> StreamRng {
        StreamRng::new(7, 0)
    }

    #[test]
    fn standard_normal_at_mode() {
        let d = Dist::normal(0.0, 1.0).unwrap();
        assert!((d.ln_pdf(0.0) + 0.918_938_533_204_672_7).abs() < 1e-15);
    }

    #[test]
    fn construction_rejects_bad_parameters() {
        assert!(Dist::normal(0.0, 0.0).is_err());
        assert!(Dist::new(DistSpec::HalfNormal { sigma: -1.0 }).is_err());
        assert!(Dist::new(DistSpec::Uniform { lo: 1.0, hi: 1.0 }).is_err());
        assert!(Dist::new(DistSpec::TruncatedNormal {
            mu: 0.0,
            sigma: 1.0,
            lo: 2.0,
            hi: -1.0
        })
        .is_err());
        assert!(Dist::new(DistSpec::TruncatedNormal {
            mu: 0.0,
            sigma: 1.0,
            lo: f64::NEG_INFINITY,
            hi: 1.0
        })
        .is_err());
        assert!(Dist::new(DistSpec::NegativeBinomial { mu: 3.0, phi: 0.0 }).is_err());
        let not_pd = DistSpec::MultivariateNormal {
            mean: vec![0.0, 0.0],
            cov: vec![vec![1.0, 2.0], vec![2.0, 1.0]],
        };
        assert!(Dist::new(not_pd).is_err());
    }

    #[test]
    fn out_of_support_is_negative_infinity() {
        let ln = Dist::new(DistSpec::LogNormal {
            mu: 0.0,
            sigma: 0.5,
        })
        .unwrap();
        assert_eq!(ln.ln_pdf(-1.0), f64::NEG_INFINITY);
        let tn = Dist::new(DistSpec::TruncatedNormal {
            mu: 0.0,
            sigma: 0.5,
            lo: -1.0,
            hi: 1.0,
        })
        .unwrap();
        assert_eq!(tn.ln_pdf(1.5), f64::NEG_INFINITY);
        let nb = Dist::new(DistSpec::NegativeBinomial { mu: 3.0, phi: 9.6 }).unwrap();
        assert_eq!(nb.ln_pdf(-1.0), f64::NEG_INFINITY);
        assert_eq!(nb.ln_pdf(1.5), f64::NEG_INFINITY);
        let hn = Dist::new(DistSpec::HalfNormal { sigma: 0.5 }).unwrap();
        assert_eq!(hn.ln_pdf(-0.1), f64::NEG_INFINITY);
    }

    #[test]
    fn negbin_mass_sums_to_one() {
        let nb = Dist::new(DistSpec::NegativeBinomial { mu: 3.0, phi: 9.6 }).unwrap();
        let total: f64 = (0..=200u64)
            .map(|n| nb.log_density(&Sample::Count(n)).exp())
            .sum();
        assert!(
            (1.0 - 1e-8..=1.0 + 1e-10).contains(&total),
            "total = {total}"
        );
    }

    #[test]
    fn uniform_draws_stay_in_support() {
        let d = Dist::new(DistSpec::Uniform { lo: 0.0, hi: 0.05 }).unwrap();
        let mut r = rng();
        assert!((0..10_000)
            .map(|_| d.draw_f64(&mut r))
            .all(|x| (0.0..=0.05).contains(&x)));
    }

    #[test]
    fn truncated_draws_respect_bounds_and_symmetry() {
        let d = Dist::new(DistSpec::TruncatedNormal {
            mu: 0.0,
            sigma: 0.5,
            lo: -1.0,
            hi: 1.0,
        })
        .unwrap();
        let mut r = rng();
        let xs: Vec<f64> = (0..100_000).map(|_| d.draw_f64(&mut r)).collect();
        assert!(xs.iter().all(|x| (-1.0..=1.0).contains(x)));
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        // sd of the truncated law is below 0.5, so 5 standard errors is < 0.008.
        assert!(mean.abs() < 0.008, "mean = {mean}");
    }

    #[test]
    fn truncated_right_tail_interval() {
        let d = Dist::new(DistSpec::TruncatedNormal {
            mu: 0.0,
            sigma: 1.0,
            lo: 6.0,
            hi: 7.0,
        })
        .unwrap();
        let mut r = rng();
        let xs: Vec<f64> = (0..1000).map(|_| d.draw_f64(&mut r)).collect();
        assert!(xs.iter().all(|x| (6.0..=7.0).contains(x)));
        assert!(d.ln_pdf(6.1).is_finite());
    }

    #[test]
    fn fixed_seed_gives_identical_sequences() {
        let d = Dist::normal(2.0, 0.5).unwrap();
        let a: Vec<f64> = {
            let mut r = StreamRng::new(11, 3);
            (0..100).map(|_| d.draw_f64(&mut r)).collect()
        };
        let b: Vec<f64> = {
            let mut r = StreamRng::new(11, 3);
            (0..100).map(|_| d.draw_f64(&mut r)).collect()
        };
        assert_eq!(a, b);
        let c: Vec<f64> = {
            let mut r = StreamRng::new(11, 4);
            (0..100).map(|_| d.draw_f64(&mut r)).collect()
        };
        assert_ne!(a, c);
    }

    #[test]
    fn child_streams_do_not_depend_on_parent_state() {
        let parent = StreamRng::new(5, 9);
        let mut used = parent.clone();
        let _ = used.next_u64();
        let mut a = parent.child(2);
        let mut b = used.child(2);
        assert_eq!(a.next_u64(), b.next_u64());
        assert_ne!(parent.child(1).next_u64(), parent.child(2).next_u64());
    }

    #[test]
    fn mvn_matches_product_of_normals_when_diagonal() {
        let d = Dist::new(DistSpec::MultivariateNormal {
            mean: vec![1.0, -1.0],
            cov: vec![vec![4.0, 0.0], vec![0.0, 0.25]],
        })
        .unwrap();
        let x = [0.3, -0.8];
        let expect = normal_ln_pdf(0.3, 1.0, 2.0) + normal_ln_pdf(-0.8, -1.0, 0.5);
        assert!((d.ln_pdf_vec(&x) - expect).abs() < 1e-12);
    }

    #[test]
    fn log_sum_exp_small_cases() {
        assert!((log_sum_exp(&[3f64.ln()], None).unwrap() - 3f64.ln()).abs() < 1e-15);
        assert!((log_sum_exp(&[2f64.ln(), 5f64.ln()], None).unwrap() - 7f64.ln()).abs() < 1e-15);
        assert_eq!(
            log_sum_exp(&[1000.0, 1000.0], Some(&[0.5, 0.5])).unwrap(),
            1000.0
        );
        assert_eq!(
            log_sum_exp(&[f64::NEG_INFINITY, f64::NEG_INFINITY], None).unwrap(),
            f64::NEG_INFINITY
        );
        assert!(log_sum_exp(&[], None).is_err());
        assert!(log_sum_exp(&[1.0], Some(&[0.0])).is_err());
        assert!(log_sum_exp(&[1.0, 2.0], Some(&[1.0])).is_err());
    }
}
