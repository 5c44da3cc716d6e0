use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use twostep_core::cases::{self, LinearCase};
use twostep_core::istep::{DiscreteTables, EPostNormalizer, UpMethod};
use twostep_core::mcmc::SamplerConfig;
use twostep_core::simulators::SirConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    Case1,
    Case2Logistic,
    Case2Pce,
    Case3Sir,
    Sbc,
    Counterexample,
}

/// Top-level experiment file. Only the section matching `kind` may be present.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: Kind,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub jobs: Option<usize>,
    #[serde(default)]
    pub case1: Option<Case1Section>,
    #[serde(default)]
    pub logistic: Option<LogisticSection>,
    #[serde(default)]
    pub sir: Option<SirSection>,
    #[serde(default)]
    pub sbc: Option<SbcSection>,
    #[serde(default)]
    pub counterexample: Option<CounterexampleSection>,
    #[serde(default)]
    pub timing: Option<TimingSection>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Case1Section {
    pub sigma_a: Vec<f64>,
    pub omega_t: Vec<f64>,
    pub a: f64,
    pub b: f64,
    pub prior_sd: f64,
    pub y_i: f64,
    pub mu_i0: f64,
    pub sd_i0: f64,
    pub sigma_i: f64,
    pub methods: Vec<String>,
    /// Quasi-random T-posterior draws propagated into the I-step.
    pub n_components: usize,
    pub sampler: SamplerConfig,
    pub epost_sampler: SamplerConfig,
    pub normalizer: EPostNormalizer,
    pub grid_points: usize,
    pub grid_half_width: f64,
}

impl Default for Case1Section {
    fn default() -> Self {
        let c = LinearCase::default();
        Self {
            sigma_a: vec![0.1, 0.5, 1.0],
            omega_t: c.omega_t,
            a: c.a,
            b: c.b,
            prior_sd: c.prior_sd,
            y_i: c.y_i,
            mu_i0: c.mu_i0,
            sd_i0: c.sd_i0,
            sigma_i: c.sigma_i,
            methods: all_methods(),
            n_components: 4096,
            sampler: SamplerConfig::default(),
            epost_sampler: SamplerConfig::new(2, 300, 10),
            normalizer: EPostNormalizer::Exact,
            grid_points: 401,
            grid_half_width: 3.0,
        }
    }
}

impl Case1Section {
    pub fn case(&self, sigma_a: f64) -> LinearCase {
        LinearCase {
            omega_t: self.omega_t.clone(),
            a: self.a,
            b: self.b,
            prior_sd: self.prior_sd,
            sigma_a,
            y_i: self.y_i,
            mu_i0: self.mu_i0,
            sd_i0: self.sd_i0,
            sigma_i: self.sigma_i,
        }
    }
}

/// Logistic simulator with either the parametric or the polynomial surrogate.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LogisticSection {
    pub n_t: usize,
    /// Polynomial degree; used by `case2-pce` only.
    pub degree: usize,
    pub omega_star: f64,
    pub sigma_i_star: f64,
    pub n_i: usize,
    pub methods: Vec<String>,
    pub clusters: Option<usize>,
    pub train_sampler: SamplerConfig,
    pub sampler: SamplerConfig,
    pub epost_sampler: SamplerConfig,
}

impl Default for LogisticSection {
    fn default() -> Self {
        Self {
            n_t: 5,
            degree: 5,
            omega_star: 0.3,
            sigma_i_star: 0.02,
            n_i: cases::LOGISTIC_N_I,
            methods: all_methods(),
            clusters: Some(cases::LOGISTIC_CLUSTERS),
            train_sampler: SamplerConfig::default(),
            sampler: SamplerConfig::default(),
            epost_sampler: SamplerConfig::new(2, 300, 20),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SirSection {
    pub n_t: usize,
    pub degree: usize,
    pub beta_star: f64,
    pub gamma_star: f64,
    pub phi: f64,
    pub n_i: usize,
    pub time_span: (f64, f64),
    pub solver: SirConfig,
    pub methods: Vec<String>,
    pub clusters: Option<usize>,
    pub train_sampler: SamplerConfig,
    pub sampler: SamplerConfig,
    pub epost_sampler: SamplerConfig,
}

impl Default for SirSection {
    fn default() -> Self {
        Self {
            n_t: cases::SIR_N_T,
            degree: cases::SIR_DEGREE,
            beta_star: cases::SIR_TRUTH[0],
            gamma_star: cases::SIR_TRUTH[1],
            phi: cases::SIR_PHI,
            n_i: cases::SIR_N_I,
            time_span: cases::SIR_TIME_SPAN,
            solver: SirConfig::default(),
            methods: all_methods(),
            clusters: Some(cases::LOGISTIC_CLUSTERS),
            train_sampler: SamplerConfig {
                thin: 20,
                ..SamplerConfig::new(4, 20_000, 20_000)
            },
            sampler: SamplerConfig::default(),
            epost_sampler: SamplerConfig::new(2, 300, 50),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SbcCase {
    /// Logistic surrogate trained on a Halton design.
    Logistic,
    /// Legendre surrogate trained on a Halton design.
    LogisticPce,
    /// Surrogate fixed at the true logistic parameters.
    LogisticCheat,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SbcSection {
    pub case: SbcCase,
    pub n_t_trials: usize,
    pub n_i_trials: usize,
    pub k_eff: usize,
    pub n_t: usize,
    pub degree: usize,
    pub methods: Vec<String>,
    pub clusters: Option<usize>,
    pub train_sampler: SamplerConfig,
    pub sampler: SamplerConfig,
    pub epost_sampler: SamplerConfig,
    pub confidence: f64,
    pub n_sim: usize,
}

impl Default for SbcSection {
    fn default() -> Self {
        Self {
            case: SbcCase::Logistic,
            n_t_trials: 5,
            n_i_trials: 10,
            k_eff: 99,
            n_t: 5,
            degree: 5,
            methods: all_methods(),
            clusters: Some(cases::LOGISTIC_CLUSTERS),
            train_sampler: SamplerConfig::default(),
            sampler: SamplerConfig::default(),
            epost_sampler: SamplerConfig::new(2, 300, 10),
            confidence: 0.95,
            n_sim: 1000,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CounterexampleSection {
    #[serde(default)]
    pub tables: Option<DiscreteTables>,
    #[serde(default)]
    pub y_obs: usize,
}

/// Sampling-time grid over polynomial degree and cluster count, on the
/// logistic simulator with the Legendre surrogate.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TimingSection {
    pub degrees: Vec<usize>,
    pub clusters: Vec<usize>,
    pub methods: Vec<String>,
    pub n_t: usize,
    pub repeats: usize,
    pub train_sampler: SamplerConfig,
    pub sampler: SamplerConfig,
    pub epost_sampler: SamplerConfig,
}

impl Default for TimingSection {
    fn default() -> Self {
        Self {
            degrees: vec![2, 5],
            clusters: vec![2, 5, 25, 100],
            methods: all_methods(),
            n_t: 10,
            repeats: 5,
            train_sampler: SamplerConfig {
                thin: 5,
                ..SamplerConfig::new(4, 5000, 5000)
            },
            sampler: SamplerConfig::new(2, 2500, 2500),
            epost_sampler: SamplerConfig::new(2, 200, 20),
        }
    }
}

fn all_methods() -> Vec<String> {
    UpMethod::ALL
        .iter()
        .map(|m| m.label().to_string())
        .collect()
}

pub fn parse_methods(labels: &[String]) -> Result<Vec<UpMethod>, String> {
    if labels.is_empty() {
        return Err("methods must not be empty".into());
    }
    let mut out: Vec<UpMethod> = Vec::new();
    for l in labels {
        let m = UpMethod::from_label(l).ok_or_else(|| {
            format!("unknown method {l:?}; expected one of point, epost, elik, eloglik")
        })?;
        if out.contains(&m) {
            return Err(format!("method {l:?} listed twice"));
        }
        out.push(m);
    }
    Ok(out)
}

fn check_sampler(name: &str, s: &SamplerConfig) -> Result<(), String> {
    s.validate().map_err(|e| format!("{name}: {e}"))
}

fn positive(name: &str, v: f64) -> Result<(), String> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(format!("{name} must be > 0, got {v}"))
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, String> {
        let cfg: Self = toml::from_str(text).map_err(|e| e.to_string())?;
        Ok(cfg)
    }

    /// Checks that do not need any computation. `timing` marks the `timing` command.
    pub fn validate(&self, timing: bool) -> Result<(), String> {
        if self.jobs == Some(0) {
            return Err("jobs must be >= 1".into());
        }
        let present = [
            ("case1", self.case1.is_some()),
            ("logistic", self.logistic.is_some()),
            ("sir", self.sir.is_some()),
            ("sbc", self.sbc.is_some()),
            ("counterexample", self.counterexample.is_some()),
            ("timing", self.timing.is_some()),
        ];
        let allowed: &[&str] = match self.kind {
            Kind::Case1 => &["case1"],
            Kind::Case2Logistic | Kind::Case2Pce => &["logistic", "timing"],
            Kind::Case3Sir => &["sir"],
            Kind::Sbc => &["sbc"],
            Kind::Counterexample => &["counterexample"],
        };
        for (name, here) in present {
            if here && !allowed.contains(&name) {
                return Err(format!(
                    "section [{name}] does not apply to kind {:?}",
                    self.kind
                ));
            }
        }
        if timing && self.kind != Kind::Case2Pce {
            return Err("the timing command needs kind = \"case2-pce\"".into());
        }
        match self.kind {
            Kind::Case1 => {
                let c = self.case1.clone().unwrap_or_default();
                if c.sigma_a.is_empty() {
                    return Err("case1.sigma_a must not be empty".into());
                }
                for s in &c.sigma_a {
                    positive("case1.sigma_a", *s)?;
                }
                positive("case1.prior_sd", c.prior_sd)?;
                positive("case1.sd_i0", c.sd_i0)?;
                positive("case1.sigma_i", c.sigma_i)?;
                if c.omega_t.is_empty() {
                    return Err("case1.omega_t must not be empty".into());
                }
                if c.n_components == 0 || c.grid_points < 2 {
                    return Err("case1.n_components must be >= 1 and grid_points >= 2".into());
                }
                positive("case1.grid_half_width", c.grid_half_width)?;
                parse_methods(&c.methods)?;
                check_sampler("case1.sampler", &c.sampler)?;
                check_sampler("case1.epost_sampler", &c.epost_sampler)?;
            }
            Kind::Case2Logistic | Kind::Case2Pce => {
                let c = self.logistic.clone().unwrap_or_default();
                if c.n_t == 0 || c.n_i == 0 {
                    return Err("logistic.n_t and logistic.n_i must be >= 1".into());
                }
                if !(-1.0..=1.0).contains(&c.omega_star) {
                    return Err(format!(
                        "logistic.omega_star must lie in [-1, 1], got {}",
                        c.omega_star
                    ));
                }
                if !(c.sigma_i_star >= 0.0 && c.sigma_i_star.is_finite()) {
                    return Err(format!(
                        "logistic.sigma_i_star must be >= 0, got {}",
                        c.sigma_i_star
                    ));
                }
                if c.clusters == Some(0) {
                    return Err("logistic.clusters must be >= 1".into());
                }
                parse_methods(&c.methods)?;
                check_sampler("logistic.train_sampler", &c.train_sampler)?;
                check_sampler("logistic.sampler", &c.sampler)?;
                check_sampler("logistic.epost_sampler", &c.epost_sampler)?;
                if timing {
                    let t = self.timing.clone().unwrap_or_default();
                    if t.degrees.is_empty() || t.clusters.is_empty() || t.repeats == 0 {
                        return Err(
                            "timing.degrees, timing.clusters and timing.repeats must be non-empty"
                                .into(),
                        );
                    }
                    if t.clusters.contains(&0) || t.n_t == 0 {
                        return Err("timing.clusters and timing.n_t must be >= 1".into());
                    }
                    parse_methods(&t.methods)?;
                    check_sampler("timing.train_sampler", &t.train_sampler)?;
                    check_sampler("timing.sampler", &t.sampler)?;
                    check_sampler("timing.epost_sampler", &t.epost_sampler)?;
                }
            }
            Kind::Case3Sir => {
                let c = self.sir.clone().unwrap_or_default();
                c.solver
                    .validate()
                    .map_err(|e| format!("sir.solver: {e}"))?;
                positive("sir.phi", c.phi)?;
                positive("sir.beta_star", c.beta_star)?;
                positive("sir.gamma_star", c.gamma_star)?;
                if c.n_t == 0 || c.n_i == 0 {
                    return Err("sir.n_t and sir.n_i must be >= 1".into());
                }
                if !(c.time_span.0 >= 0.0 && c.time_span.1 > c.time_span.0) {
                    return Err("sir.time_span must satisfy 0 <= start < end".into());
                }
                if c.clusters == Some(0) {
                    return Err("sir.clusters must be >= 1".into());
                }
                parse_methods(&c.methods)?;
                check_sampler("sir.train_sampler", &c.train_sampler)?;
                check_sampler("sir.sampler", &c.sampler)?;
                check_sampler("sir.epost_sampler", &c.epost_sampler)?;
            }
            Kind::Sbc => {
                let c = self.sbc.clone().unwrap_or_default();
                if c.n_t_trials == 0 || c.n_i_trials == 0 || c.k_eff == 0 || c.n_t == 0 {
                    return Err("sbc trial counts, k_eff and n_t must be >= 1".into());
                }
                if !(c.confidence > 0.0 && c.confidence < 1.0) {
                    return Err(format!(
                        "sbc.confidence must be in (0, 1), got {}",
                        c.confidence
                    ));
                }
                if c.n_sim == 0 || c.clusters == Some(0) {
                    return Err("sbc.n_sim and sbc.clusters must be >= 1".into());
                }
                parse_methods(&c.methods)?;
                check_sampler("sbc.train_sampler", &c.train_sampler)?;
                check_sampler("sbc.sampler", &c.sampler)?;
                check_sampler("sbc.epost_sampler", &c.epost_sampler)?;
            }
            Kind::Counterexample => {}
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_configs_parse() {
        for kind in [
            "case1",
            "case2-logistic",
            "case2-pce",
            "case3-sir",
            "sbc",
            "counterexample",
        ] {
            let c = ExperimentConfig::parse(&format!("kind = \"{kind}\"\n")).unwrap();
            c.validate(false).unwrap();
        }
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(ExperimentConfig::parse("kind = \"case1\"\nfoo = 1\n").is_err());
        assert!(ExperimentConfig::parse("kind = \"case1\"\n[case1]\nsigma = 1\n").is_err());
        assert!(ExperimentConfig::parse("kind = \"case9\"\n").is_err());
    }

    #[test]
    fn negative_sigma_a_is_a_schema_error() {
        let c =
            ExperimentConfig::parse("kind = \"case1\"\n[case1]\nsigma_a = [0.1, -1.0]\n").unwrap();
        assert!(c.validate(false).unwrap_err().contains("sigma_a"));
    }

    #[test]
    fn sections_must_match_kind() {
        let c = ExperimentConfig::parse("kind = \"case1\"\n[sir]\nn_t = 3\n").unwrap();
        assert!(c.validate(false).is_err());
        let c = ExperimentConfig::parse("kind = \"case1\"\n").unwrap();
        assert!(c.validate(true).is_err());
    }

    #[test]
    fn method_labels() {
        assert_eq!(
            parse_methods(&["point".into(), "elik".into()])
                .unwrap()
                .len(),
            2
        );
        assert!(parse_methods(&["bogus".into()]).is_err());
        assert!(parse_methods(&["elik".into(), "elik".into()]).is_err());
        assert!(parse_methods(&[]).is_err());
    }
}
