//! Parametric surrogate families and their likelihoods.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prob::{lognormal_ln_pdf, normal_ln_pdf, Dist, DistSpec};

/// Legendre polynomial `P_k(x)` by the three-term recurrence.
pub fn legendre(k: usize, x: f64) -> f64 {
    let (mut p0, mut p1) = (1.0, x);
    if k == 0 {
        return p0;
    }
    for n in 1..k {
        let n = n as f64;
        let p2 = ((2.0 * n + 1.0) * x * p1 - n * p0) / (n + 1.0);
        p0 = p1;
        p1 = p2;
    }
    p1
}

/// `P_0(x) ..= P_max(x)`.
pub fn legendre_all(max: usize, x: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(max + 1);
    out.push(1.0);
    if max >= 1 {
        out.push(x);
    }
    for n in 1..max {
        let nf = n as f64;
        out.push(((2.0 * nf + 1.0) * x * out[n] - nf * out[n - 1]) / (nf + 1.0));
    }
    out
}

/// Multi-indices of total degree at most `degree`, ordered by total degree and
/// then lexicographically with larger leading exponents first.
pub fn pce_index_set(input_dim: usize, degree: usize) -> Vec<Vec<usize>> {
    fn fill(prefix: &mut Vec<usize>, dim: usize, budget: usize, out: &mut Vec<Vec<usize>>) {
        if prefix.len() == dim {
            out.push(prefix.clone());
            return;
        }
        for k in (0..=budget).rev() {
            prefix.push(k);
            fill(prefix, dim, budget - k, out);
            prefix.pop();
        }
    }
    if input_dim == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for total in 0..=degree {
        let mut level = Vec::new();
        fill(
            &mut Vec::with_capacity(input_dim),
            input_dim,
            total,
            &mut level,
        );
        out.extend(
            level
                .into_iter()
                .filter(|a| a.iter().sum::<usize>() == total),
        );
    }
    out
}

/// Affine map of `x` from `[lo, hi]` onto `[-1, 1]`, clamping values outside.
/// The flag reports whether any coordinate was clamped.
pub fn scale_inputs(bounds: &[(f64, f64)], x: &[f64]) -> (Vec<f64>, bool) {
    let mut clamped = false;
    let v = bounds
        .iter()
        .zip(x)
        .map(|((lo, hi), xi)| {
            let z = 2.0 * (xi - lo) / (hi - lo) - 1.0;
            if !(-1.0..=1.0).contains(&z) {
                clamped = true;
            }
            z.clamp(-1.0, 1.0)
        })
        .collect();
    (v, clamped)
}

pub fn unscale_inputs(bounds: &[(f64, f64)], z: &[f64]) -> Vec<f64> {
    bounds
        .iter()
        .zip(z)
        .map(|((lo, hi), zi)| lo + 0.5 * (zi + 1.0) * (hi - lo))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SurrogateKind {
    /// `c1 + c2 w`
    Linear,
    /// `c w`
    SlopeOnly,
    /// `alpha / (1 + exp(-beta (w - gamma))) + delta`
    Logistic,
    /// Total-degree Legendre expansion. Raw inputs are mapped from `bounds`
    /// onto `[-1, 1]` when given, otherwise they are taken as already scaled.
    Pce {
        input_dim: usize,
        max_degree: usize,
        #[serde(default)]
        bounds: Option<Vec<(f64, f64)>>,
    },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LikelihoodFamily {
    #[default]
    Normal,
    /// Log-normal with the surrogate output as log-scale location.
    LogNormal,
}

/// How the approximation-error scale is handled.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum SigmaA {
    /// Held constant during training and not propagated.
    Fixed { value: f64 },
    /// Sampled during training. When `propagate` is set its draws enter the
    /// I-likelihood scale, otherwise only `c` is propagated.
    Sampled {
        prior: DistSpec,
        #[serde(default)]
        propagate: bool,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurrogateSpec {
    pub kind: SurrogateKind,
    /// One prior per coefficient, or a single multivariate normal over all of them.
    pub coeff_priors: Vec<DistSpec>,
    pub sigma_a: SigmaA,
    #[serde(default)]
    pub likelihood: LikelihoodFamily,
}

/// Surrogate parameters `theta = (c, sigma_a)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurrogateParams {
    pub c: Vec<f64>,
    pub sigma_a: Option<f64>,
}

impl SurrogateParams {
    pub fn new(c: Vec<f64>, sigma_a: Option<f64>) -> Self {
        Self { c, sigma_a }
    }
}

#[derive(Clone, Debug)]
enum CoeffPrior {
    Joint(Dist),
    Independent(Vec<Dist>),
}

/// A validated surrogate, with its basis and priors prepared for evaluation.
#[derive(Clone, Debug)]
pub struct Surrogate {
    spec: SurrogateSpec,
    index_set: Vec<Vec<usize>>,
    prior: CoeffPrior,
    sigma_a_prior: Option<Dist>,
}

impl Surrogate {
    pub fn new(spec: SurrogateSpec) -> Result<Self> {
        let index_set = match &spec.kind {
            SurrogateKind::Pce {
                input_dim,
                max_degree,
                bounds,
            } => {
                if *input_dim == 0 {
                    return Err(Error::invalid("PCE input_dim must be >= 1"));
                }
                if let Some(b) = bounds {
                    if b.len() != *input_dim {
                        return Err(Error::DimensionMismatch {
                            expected: *input_dim,
                            got: b.len(),
                        });
                    }
                    if b.iter()
                        .any(|(lo, hi)| !(lo.is_finite() && hi.is_finite() && lo < hi))
                    {
                        return Err(Error::invalid("PCE bounds must be finite with lo < hi"));
                    }
                }
                pce_index_set(*input_dim, *max_degree)
            }
            _ => vec![],
        };
        let n = match &spec.kind {
            SurrogateKind::Linear => 2,
            SurrogateKind::SlopeOnly => 1,
            SurrogateKind::Logistic => 4,
            SurrogateKind::Pce { .. } => index_set.len(),
        };
        let prior = match spec.coeff_priors.as_slice() {
            [joint @ DistSpec::MultivariateNormal { mean, .. }] if mean.len() == n && n > 1 => {
                CoeffPrior::Joint(Dist::new(joint.clone())?)
            }
            specs if specs.len() == n => {
                let dists = specs
                    .iter()
                    .map(|s| Dist::new(s.clone()))
                    .collect::<Result<Vec<_>>>()?;
                if dists.iter().any(|d| d.dim() != 1) {
                    return Err(Error::invalid("per-coefficient priors must be univariate"));
                }
                CoeffPrior::Independent(dists)
            }
            specs => {
                return Err(Error::invalid(format!(
                    "surrogate has {n} coefficients but {} priors were given",
                    specs.len()
                )))
            }
        };
        let sigma_a_prior = match &spec.sigma_a {
            SigmaA::Fixed { value } => {
                if !(value.is_finite() && *value > 0.0) {
                    return Err(Error::invalid(format!(
                        "fixed sigma_a must be > 0, got {value}"
                    )));
                }
                None
            }
            SigmaA::Sampled { prior, .. } => {
                let d = Dist::new(prior.clone())?;
                if d.bounds().0 < 0.0 {
                    return Err(Error::invalid(
                        "sigma_a prior must be supported on positive values",
                    ));
                }
                Some(d)
            }
        };
        Ok(Self {
            spec,
            index_set,
            prior,
            sigma_a_prior,
        })
    }

    pub fn spec(&self) -> &SurrogateSpec {
        &self.spec
    }

    pub fn n_coeffs(&self) -> usize {
        match &self.spec.kind {
            SurrogateKind::Linear => 2,
            SurrogateKind::SlopeOnly => 1,
            SurrogateKind::Logistic => 4,
            SurrogateKind::Pce { .. } => self.index_set.len(),
        }
    }

    pub fn input_dim(&self) -> usize {
        match &self.spec.kind {
            SurrogateKind::Pce { input_dim, .. } => *input_dim,
            _ => 1,
        }
    }

    pub fn index_set(&self) -> &[Vec<usize>] {
        &self.index_set
    }

    pub fn likelihood(&self) -> LikelihoodFamily {
        self.spec.likelihood
    }

    /// Whether training samples `sigma_a`.
    pub fn samples_sigma_a(&self) -> bool {
        self.sigma_a_prior.is_some()
    }

    /// Whether `sigma_a` draws enter the I-likelihood.
    pub fn propagates_sigma_a(&self) -> bool {
        matches!(
            self.spec.sigma_a,
            SigmaA::Sampled {
                propagate: true,
                ..
            }
        )
    }

    pub fn sigma_a_prior(&self) -> Option<&Dist> {
        self.sigma_a_prior.as_ref()
    }

    pub fn fixed_sigma_a(&self) -> Option<f64> {
        match self.spec.sigma_a {
            SigmaA::Fixed { value } => Some(value),
            SigmaA::Sampled { .. } => None,
        }
    }

    /// Log prior density of the coefficients.
    pub fn coeff_log_prior(&self, c: &[f64]) -> f64 {
        match &self.prior {
            CoeffPrior::Joint(d) => d.ln_pdf_vec(c),
            CoeffPrior::Independent(ds) => ds.iter().zip(c).map(|(d, x)| d.ln_pdf(*x)).sum(),
        }
    }

    /// Prior draws of the coefficients.
    pub fn draw_coeffs<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        match &self.prior {
            CoeffPrior::Joint(d) => match d.draw(rng) {
                crate::prob::Sample::Vector(v) => v,
                other => vec![other.as_f64().unwrap_or(0.0)],
            },
            CoeffPrior::Independent(ds) => ds.iter().map(|d| d.draw_f64(rng)).collect(),
        }
    }

    /// Basis vector for surrogates that are linear in `c`; `None` for the logistic family.
    pub fn features(&self, omega: &[f64]) -> Option<Vec<f64>> {
        match &self.spec.kind {
            SurrogateKind::Linear => Some(vec![1.0, omega[0]]),
            SurrogateKind::SlopeOnly => Some(vec![omega[0]]),
            SurrogateKind::Logistic => None,
            SurrogateKind::Pce {
                max_degree, bounds, ..
            } => {
                let z = match bounds {
                    Some(b) => scale_inputs(b, omega).0,
                    None => omega.to_vec(),
                };
                let tables: Vec<Vec<f64>> =
                    z.iter().map(|x| legendre_all(*max_degree, *x)).collect();
                Some(
                    self.index_set
                        .iter()
                        .map(|alpha| {
                            alpha
                                .iter()
                                .enumerate()
                                .map(|(d, k)| tables[d][*k])
                                .product()
                        })
                        .collect(),
                )
            }
        }
    }

    /// Surrogate mean response at raw input `omega`.
    pub fn eval(&self, c: &[f64], omega: &[f64]) -> Result<f64> {
        if c.len() != self.n_coeffs() {
            return Err(Error::DimensionMismatch {
                expected: self.n_coeffs(),
                got: c.len(),
            });
        }
        if omega.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                got: omega.len(),
            });
        }
        Ok(self.eval_unchecked(c, omega))
    }

    pub(crate) fn eval_unchecked(&self, c: &[f64], omega: &[f64]) -> f64 {
        match &self.spec.kind {
            SurrogateKind::Logistic => c[0] / (1.0 + (-c[1] * (omega[0] - c[2])).exp()) + c[3],
            _ => {
                let f = self.features(omega).expect("linear-in-c family");
                dot(&f, c)
            }
        }
    }

    /// `log p(y | location, scale)` under the configured likelihood family.
    #[inline]
    pub fn ln_lik_at(&self, y: f64, location: f64, scale: f64) -> f64 {
        match self.spec.likelihood {
            LikelihoodFamily::Normal => normal_ln_pdf(y, location, scale),
            LikelihoodFamily::LogNormal => lognormal_ln_pdf(y, location, scale),
        }
    }

    /// Training log-likelihood of one observation with scale `params.sigma_a`
    /// (or the fixed value when the surrogate holds it constant).
    pub fn log_likelihood(&self, params: &SurrogateParams, omega: &[f64], y: f64) -> Result<f64> {
        let scale = match (params.sigma_a, self.fixed_sigma_a()) {
            (Some(s), _) | (None, Some(s)) => s,
            (None, None) => return Err(Error::invalid("sigma_a is required by this surrogate")),
        };
        if !(scale > 0.0) {
            return Err(Error::invalid(format!("sigma_a must be > 0, got {scale}")));
        }
        Ok(self.ln_lik_at(y, self.eval(&params.c, omega)?, scale))
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Priors centered on the generating logistic parameters `(2, 10, 0, -1)`.
pub fn default_logistic_priors() -> Vec<DistSpec> {
    [(2.0, 1.0), (10.0, 10.0), (0.0, 1.0), (-1.0, 1.0)]
        .into_iter()
        .map(|(mu, sigma)| DistSpec::Normal { mu, sigma })
        .collect()
}

/// Independent `Normal(0, 5)` priors for `n` PCE coefficients.
pub fn default_pce_priors(n: usize) -> Vec<DistSpec> {
    vec![
        DistSpec::Normal {
            mu: 0.0,
            sigma: 5.0
        };
        n
    ]
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    // Nodes from Newton iteration on P_n, weights from the derivative formula.
    let mut nodes = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let p = legendre_all(n, x);
            dp = n as f64 * (x * p[n] - p[n - 1]) / (x * x - 1.0);
            let dx = p[n] / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes.push(x);
        weights.push(2.0 / ((1.0 - x * x) * dp * dp));
    }
    (nodes, weights)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulators::logistic;

    #[test]
    fn legendre_values() {
        assert_eq!(legendre(0, 0.3), 1.0);
        assert_eq!(legendre(2, 1.0), 1.0);
        let x = 0.37;
        assert!((legendre(2, x) - (3.0 * x * x - 1.0) / 2.0).abs() < 1e-15);
        assert!((legendre(3, x) - (5.0 * x.powi(3) - 3.0 * x) / 2.0).abs() < 1e-15);
        for k in 0..10 {
            assert!((legendre(k, 1.0) - 1.0).abs() < 1e-14);
            assert!((legendre(k, 0.62) - legendre_all(9, 0.62)[k]).abs() < 1e-15);
        }
    }

    #[test]
    fn legendre_orthogonality() {
        let (nodes, weights) = gauss_legendre(64);
        for i in 0..10 {
            for j in 0..10 {
                let v: f64 = nodes
                    .iter()
                    .zip(&weights)
                    .map(|(x, w)| w * legendre(i, *x) * legendre(j, *x))
                    .sum();
                let expect = if i == j {
                    2.0 / (2 * i + 1) as f64
                } else {
                    0.0
                };
                assert!((v - expect).abs() < 1e-10, "({i},{j}) -> {v}");
            }
        }
    }

    #[test]
    fn index_set_sizes_and_order() {
        assert_eq!(
            pce_index_set(1, 5),
            (0..=5).map(|k| vec![k]).collect::<Vec<_>>()
        );
        assert_eq!(pce_index_set(3, 4).len(), 35);
        assert_eq!(pce_index_set(2, 0), vec![vec![0, 0]]);
        let set = pce_index_set(3, 4);
        for w in set.windows(2) {
            let (a, b) = (w[0].iter().sum::<usize>(), w[1].iter().sum::<usize>());
            assert!(a < b || (a == b && w[0] > w[1]));
        }
        assert_eq!(
            pce_index_set(2, 1),
            vec![vec![0, 0], vec![1, 0], vec![0, 1]]
        );
    }

    #[test]
    fn scaling_round_trip() {
        let b = [(1.0, 14.0)];
        assert_eq!(scale_inputs(&b, &[1.0]).0, vec![-1.0]);
        assert_eq!(scale_inputs(&b, &[7.5]).0, vec![0.0]);
        let (z, clamped) = scale_inputs(&b, &[20.0]);
        assert!(clamped && z == vec![1.0]);
        let x = [3.3];
        assert!((unscale_inputs(&b, &scale_inputs(&b, &x).0)[0] - x[0]).abs() < 1e-12);
    }

    fn logistic_surrogate() -> Surrogate {
        Surrogate::new(SurrogateSpec {
            kind: SurrogateKind::Logistic,
            coeff_priors: default_logistic_priors(),
            sigma_a: SigmaA::Sampled {
                prior: DistSpec::HalfNormal { sigma: 1.0 },
                propagate: false,
            },
            likelihood: LikelihoodFamily::Normal,
        })
        .unwrap()
    }

    #[test]
    fn logistic_with_true_parameters_reproduces_simulator() {
        let s = logistic_surrogate();
        let c = [2.0, 10.0, 0.0, -1.0];
        let worst = (0..=1000)
            .map(|k| -1.0 + 2.0 * k as f64 / 1000.0)
            .map(|w| (s.eval(&c, &[w]).unwrap() - logistic(w)).abs())
            .fold(0.0, f64::max);
        assert!(worst < 1e-12);
    }

    #[test]
    fn linear_and_constant_pce() {
        let lin = Surrogate::new(SurrogateSpec {
            kind: SurrogateKind::Linear,
            coeff_priors: vec![
                DistSpec::Normal {
                    mu: 0.0,
                    sigma: 10.0
                };
                2
            ],
            sigma_a: SigmaA::Fixed { value: 0.1 },
            likelihood: LikelihoodFamily::Normal,
        })
        .unwrap();
        assert!((lin.eval(&[0.5, 2.0], &[-0.9]).unwrap() + 1.3).abs() < 1e-15);
        let pce = Surrogate::new(SurrogateSpec {
            kind: SurrogateKind::Pce {
                input_dim: 3,
                max_degree: 4,
                bounds: None,
            },
            coeff_priors: default_pce_priors(35),
            sigma_a: SigmaA::Fixed { value: 0.1 },
            likelihood: LikelihoodFamily::Normal,
        })
        .unwrap();
        let mut c = vec![0.0; 35];
        c[0] = 1.0;
        for w in [[0.1, -0.4, 0.9], [-1.0, 1.0, 0.0]] {
            assert_eq!(pce.eval(&c, &w).unwrap(), 1.0);
        }
        assert!(pce.eval(&c[..34], &[0.0; 3]).is_err());
    }

    #[test]
    fn pce_is_linear_in_coefficients() {
        let pce = Surrogate::new(SurrogateSpec {
            kind: SurrogateKind::Pce {
                input_dim: 2,
                max_degree: 3,
                bounds: Some(vec![(0.0, 2.0), (-5.0, 5.0)]),
            },
            coeff_priors: default_pce_priors(10),
            sigma_a: SigmaA::Fixed { value: 0.1 },
            likelihood: LikelihoodFamily::Normal,
        })
        .unwrap();
        let a: Vec<f64> = (0..10).map(|i| (i as f64 * 0.7).sin()).collect();
        let b: Vec<f64> = (0..10).map(|i| (i as f64 * 1.3).cos()).collect();
        let ab: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
        let w = [0.7, 2.2];
        let (ea, eb, eab) = (
            pce.eval(&a, &w).unwrap(),
            pce.eval(&b, &w).unwrap(),
            pce.eval(&ab, &w).unwrap(),
        );
        assert!((eab - ea - eb).abs() < 1e-12);
        let scaled: Vec<f64> = a.iter().map(|x| 3.0 * x).collect();
        assert!((pce.eval(&scaled, &w).unwrap() - 3.0 * ea).abs() < 1e-12);
    }

    #[test]
    fn likelihood_delegates_to_kernels() {
        let s = logistic_surrogate();
        let p = SurrogateParams::new(vec![2.0, 10.0, 0.0, -1.0], Some(0.2));
        let at_mode = s.log_likelihood(&p, &[0.0], 0.0).unwrap();
        assert!((at_mode - (-(0.2f64).ln() - crate::prob::LN_SQRT_2PI)).abs() < 1e-14);
        let d = Dist::normal(logistic(0.3), 0.2).unwrap();
        assert_eq!(s.log_likelihood(&p, &[0.3], 0.5).unwrap(), d.ln_pdf(0.5));
        assert!(s
            .log_likelihood(&SurrogateParams::new(p.c.clone(), None), &[0.0], 0.0)
            .is_err());
    }

    #[test]
    fn lognormal_likelihood_matches_direct_formula() {
        let s = Surrogate::new(SurrogateSpec {
            kind: SurrogateKind::SlopeOnly,
            coeff_priors: vec![DistSpec::Normal {
                mu: 0.0,
                sigma: 1.0,
            }],
            sigma_a: SigmaA::Fixed { value: 0.3 },
            likelihood: LikelihoodFamily::LogNormal,
        })
        .unwrap();
        let (c, w, y, sd) = (1.7, 0.8, 3.1, 0.3);
        let mu: f64 = c * w;
        let direct = -(y * sd * (2.0 * std::f64::consts::PI).sqrt()).ln()
            - (y.ln() - mu).powi(2) / (2.0 * sd * sd);
        let got = s
            .log_likelihood(&SurrogateParams::new(vec![c], None), &[w], y)
            .unwrap();
        assert!((got - direct).abs() < 1e-13);
        assert_eq!(
            s.log_likelihood(&SurrogateParams::new(vec![c], None), &[w], 0.0)
                .unwrap(),
            f64::NEG_INFINITY
        );
    }

    #[test]
    fn prior_count_must_match() {
        let spec = SurrogateSpec {
            kind: SurrogateKind::Logistic,
            coeff_priors: default_pce_priors(3),
            sigma_a: SigmaA::Fixed { value: 0.1 },
            likelihood: LikelihoodFamily::Normal,
        };
        assert!(Surrogate::new(spec).is_err());
    }
}
