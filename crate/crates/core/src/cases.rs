//! Ready-made experiment setups: the linear case, the logistic case with a
//! parametric or polynomial surrogate, and the SIR epidemic.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::istep::{IStepPriors, LinearIPriors, SigmaI};
use crate::mcmc::SamplerConfig;
use crate::prob::DistSpec;
use crate::simulators::{
    generate_training_data, Design, Measurements, SimulatorKind, SimulatorSpec, SirConfig,
    TrainingDataset, SIR_BOUNDS,
};
use crate::surrogates::{
    default_logistic_priors, default_pce_priors, pce_index_set, LikelihoodFamily, SigmaA,
    SurrogateKind, SurrogateSpec,
};
use crate::tstep::{train_conjugate_linear, TPosterior, TrainingPlan};

/// Linear simulator `a + b w` with a conjugate linear surrogate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LinearCase {
    pub omega_t: Vec<f64>,
    pub a: f64,
    pub b: f64,
    /// Independent `Normal(0, prior_sd)` priors on both coefficients.
    pub prior_sd: f64,
    pub sigma_a: f64,
    pub y_i: f64,
    pub mu_i0: f64,
    pub sd_i0: f64,
    pub sigma_i: f64,
}

impl Default for LinearCase {
    fn default() -> Self {
        Self {
            omega_t: vec![-0.9, -0.3],
            a: 0.5,
            b: 2.0,
            prior_sd: 10.0,
            sigma_a: 0.1,
            y_i: -0.5,
            mu_i0: 0.0,
            sd_i0: 1.0,
            sigma_i: 0.1,
        }
    }
}

impl LinearCase {
    pub fn with_sigma_a(sigma_a: f64) -> Self {
        Self {
            sigma_a,
            ..Self::default()
        }
    }

    pub fn simulator(&self) -> SimulatorSpec {
        SimulatorSpec::new(SimulatorKind::Linear {
            a: self.a,
            b: self.b,
        })
    }

    /// Noiseless simulator outputs at `omega_t`.
    pub fn training_data(&self) -> Result<TrainingDataset> {
        let design: Vec<Vec<f64>> = self.omega_t.iter().map(|w| vec![*w]).collect();
        generate_training_data(
            &self.simulator(),
            &design,
            0.0,
            &mut crate::prob::StreamRng::new(0, 0),
        )
    }

    pub fn tposterior(&self) -> Result<TPosterior> {
        let v = self.prior_sd * self.prior_sd;
        train_conjugate_linear(
            &self.training_data()?,
            &[0.0, 0.0],
            &[[v, 0.0], [0.0, v]],
            self.sigma_a,
        )
    }

    pub fn surrogate(&self) -> SurrogateSpec {
        SurrogateSpec {
            kind: SurrogateKind::Linear,
            coeff_priors: vec![
                DistSpec::Normal {
                    mu: 0.0,
                    sigma: self.prior_sd
                };
                2
            ],
            sigma_a: SigmaA::Fixed {
                value: self.sigma_a,
            },
            likelihood: LikelihoodFamily::Normal,
        }
    }

    pub fn measurements(&self) -> Measurements {
        Measurements::new(vec![self.y_i])
    }

    pub fn istep_priors(&self) -> IStepPriors {
        IStepPriors {
            omega: vec![DistSpec::Normal {
                mu: self.mu_i0,
                sigma: self.sd_i0,
            }],
            sigma_i: SigmaI::Fixed(self.sigma_i),
        }
    }

    pub fn linear_priors(&self) -> LinearIPriors {
        LinearIPriors {
            mu0: self.mu_i0,
            sd0: self.sd_i0,
            sigma_i: self.sigma_i,
        }
    }
}

/// True logistic parameters `(alpha, beta, gamma, delta)`.
pub const LOGISTIC_TRUTH: [f64; 4] = [2.0, 10.0, 0.0, -1.0];

/// Parametric logistic surrogate with `sigma_a` sampled during training only.
pub fn logistic_surrogate() -> SurrogateSpec {
    SurrogateSpec {
        kind: SurrogateKind::Logistic,
        coeff_priors: default_logistic_priors(),
        sigma_a: SigmaA::Sampled {
            prior: DistSpec::HalfNormal { sigma: 1.0 },
            propagate: false,
        },
        likelihood: LikelihoodFamily::Normal,
    }
}

/// Univariate Legendre expansion on `[-1, 1]` for the logistic simulator.
pub fn logistic_pce_surrogate(max_degree: usize) -> SurrogateSpec {
    SurrogateSpec {
        kind: SurrogateKind::Pce {
            input_dim: 1,
            max_degree,
            bounds: None,
        },
        coeff_priors: default_pce_priors(max_degree + 1),
        sigma_a: SigmaA::Sampled {
            prior: DistSpec::HalfNormal { sigma: 1.0 },
            propagate: false,
        },
        likelihood: LikelihoodFamily::Normal,
    }
}

/// Input prior `Normal(0, 0.5)` truncated to `[-1, 1]` and `sigma_i ~ Uniform(0, 0.05)`.
pub fn logistic_istep_priors() -> IStepPriors {
    IStepPriors {
        omega: vec![DistSpec::TruncatedNormal {
            mu: 0.0,
            sigma: 0.5,
            lo: -1.0,
            hi: 1.0,
        }],
        sigma_i: SigmaI::Prior(DistSpec::Uniform { lo: 0.0, hi: 0.05 }),
    }
}

pub const LOGISTIC_SIGMA_S: f64 = 0.01;
pub const LOGISTIC_N_I: usize = 5;
pub const LOGISTIC_CLUSTERS: usize = 25;

pub fn logistic_training(n_t: usize, sampler: SamplerConfig) -> TrainingPlan {
    TrainingPlan::Mcmc {
        design: Design::Halton { n: n_t },
        sigma_s: LOGISTIC_SIGMA_S,
        sampler,
    }
}

pub const SIR_N_T: usize = 38;
pub const SIR_DEGREE: usize = 4;
pub const SIR_N_I: usize = 50;
pub const SIR_PHI: f64 = 9.6;
pub const SIR_TIME_SPAN: (f64, f64) = (1.0, 14.0);
pub const SIR_TRUTH: [f64; 2] = [1.6, 0.4];

pub fn sir_simulator(cfg: SirConfig) -> SimulatorSpec {
    SimulatorSpec::new(SimulatorKind::Sir(cfg))
}

/// Legendre expansion in `(t, beta, gamma)` of `log I`, scaled from the training box.
pub fn sir_surrogate(max_degree: usize) -> SurrogateSpec {
    let n = pce_index_set(3, max_degree).len();
    SurrogateSpec {
        kind: SurrogateKind::Pce {
            input_dim: 3,
            max_degree,
            bounds: Some(SIR_BOUNDS.to_vec()),
        },
        coeff_priors: default_pce_priors(n),
        sigma_a: SigmaA::Sampled {
            prior: DistSpec::HalfNormal { sigma: 1.0 },
            propagate: false,
        },
        likelihood: LikelihoodFamily::LogNormal,
    }
}

pub fn sir_training(n_t: usize, sampler: SamplerConfig) -> TrainingPlan {
    TrainingPlan::Mcmc {
        design: Design::Sobol {
            n: n_t,
            bounds: SIR_BOUNDS,
        },
        sigma_s: 0.0,
        sampler,
    }
}

/// `beta ~ Normal(2, 0.5)` on `[1, 3]`, `gamma ~ Normal(0.5, 0.25)` on
/// `[0.1, 0.9]`, `sigma_i ~ HalfNormal(0.5)`.
pub fn sir_istep_priors() -> IStepPriors {
    IStepPriors {
        omega: vec![
            DistSpec::TruncatedNormal {
                mu: 2.0,
                sigma: 0.5,
                lo: 1.0,
                hi: 3.0,
            },
            DistSpec::TruncatedNormal {
                mu: 0.5,
                sigma: 0.25,
                lo: 0.1,
                hi: 0.9,
            },
        ],
        sigma_i: SigmaI::Prior(DistSpec::HalfNormal { sigma: 0.5 }),
    }
}
