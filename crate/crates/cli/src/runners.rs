use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use serde_json::{json, Value};
use twostep_core::calibration::{ecdf_envelope, log_gamma, sbc_run, SbcConfig, SbcRun};
use twostep_core::cases;
use twostep_core::io::{draws_table, fmt_f64, sbc_table, sha256_hex, Table};
use twostep_core::istep::{
    analytic_linear_iposterior, cluster_draws, discrete_posterior, infer, reference_counterexample,
    Components, DiscreteMethod, IPosterior, IStepPriors, UpMethod,
};
use twostep_core::mcmc::SamplerConfig;
use twostep_core::simulators::{
    generate_measurements, MeasurementNoise, SimulatorKind, SimulatorSpec,
};
use twostep_core::surrogates::{Surrogate, SurrogateSpec};
use twostep_core::tstep::{run_training_plan, DrawScheme, TPosterior, TrainingPlan, RHAT_LIMIT};
use twostep_core::{Error, StreamRng};

use crate::config::{parse_methods, ExperimentConfig, Kind, SbcCase};

pub enum Failure {
    Numerical(String),
    Io(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Io(e) => Failure::Io(e.to_string()),
            other => Failure::Numerical(other.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

/// Output directory that remembers the hash of every file written.
pub struct Out {
    dir: PathBuf,
    pub files: Vec<(String, String)>,
    /// Convergence problems worth a non-zero exit.
    pub diagnostics: Vec<String>,
}

impl Out {
    pub fn new(dir: &Path) -> Result<Self, Failure> {
        fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
            diagnostics: Vec::new(),
        })
    }

    fn put(&mut self, name: &str, bytes: Vec<u8>) -> Result<(), Failure> {
        fs::write(self.dir.join(name), &bytes)?;
        self.files.push((name.to_string(), sha256_hex(&bytes)));
        Ok(())
    }

    pub fn table(&mut self, name: &str, t: &Table) -> Result<(), Failure> {
        let mut buf = Vec::new();
        t.write_csv(&mut buf)?;
        self.put(name, buf)
    }

    pub fn json<T: Serialize>(&mut self, name: &str, v: &T) -> Result<(), Failure> {
        let mut buf = Vec::new();
        twostep_core::io::write_json(v, &mut buf)?;
        self.put(name, buf)
    }

    fn check_posterior(&mut self, label: &str, post: &IPosterior) {
        if !post.diagnostics.rhat_ok {
            self.diagnostics.push(format!(
                "{label}: R-hat {} exceeds {RHAT_LIMIT} ({} of {} fits)",
                post.diagnostics.max_rhat.map_or("n/a".into(), fmt_f64),
                post.diagnostics.n_rhat_exceeded,
                post.diagnostics.n_fits
            ));
        }
    }

    fn check_training(&mut self, label: &str, t: &TPosterior) {
        if !t.provenance.rhat_ok {
            self.diagnostics.push(format!(
                "{label}: training R-hat {} exceeds {RHAT_LIMIT}",
                t.provenance.max_rhat.map_or("n/a".into(), fmt_f64)
            ));
        }
    }
}

/// Stream index of a method, stable under reordering of the configured list.
fn method_stream(m: UpMethod) -> u64 {
    UpMethod::ALL
        .iter()
        .position(|x| x.label() == m.label())
        .expect("method listed in ALL") as u64
}

fn tposterior_table(keys: &[(&str, String)], t: &TPosterior) -> Result<Table, Failure> {
    let mut names = t.column_names();
    let mut rows = t.draws.clone();
    if let Some(lp) = &t.log_probs {
        names.push("log_prob".into());
        for (r, v) in rows.iter_mut().zip(lp) {
            r.push(*v);
        }
    }
    Ok(draws_table(keys, &names, &rows)?)
}

fn append(tables: &mut Vec<(UpMethod, Table)>, m: UpMethod, t: Table) -> Result<(), Failure> {
    match tables.iter_mut().find(|(k, _)| *k == m) {
        Some((_, existing)) => existing.extend(t)?,
        None => tables.push((m, t)),
    }
    Ok(())
}

pub fn run(cfg: &ExperimentConfig, out: &mut Out) -> Result<Value, Failure> {
    let root = StreamRng::new(cfg.seed, 0);
    match cfg.kind {
        Kind::Case1 => run_case1(cfg, &root, out),
        Kind::Case2Logistic | Kind::Case2Pce => run_logistic(cfg, &root, out),
        Kind::Case3Sir => run_sir(cfg, &root, out),
        Kind::Sbc => run_sbc(cfg, &root, out),
        Kind::Counterexample => run_counterexample(cfg, out),
    }
}

fn run_case1(cfg: &ExperimentConfig, root: &StreamRng, out: &mut Out) -> Result<Value, Failure> {
    let sec = cfg.case1.clone().unwrap_or_default();
    let methods = parse_methods(&sec.methods).map_err(Failure::Numerical)?;
    let mut tpost_table = Table::default();
    let mut grid = Table::new(["sigma_a", "method", "omega", "density"]);
    let mut per_method: Vec<(UpMethod, Table)> = Vec::new();
    let mut moments = Vec::new();
    let omegas: Vec<f64> = (0..sec.grid_points)
        .map(|k| {
            let hw = sec.grid_half_width * sec.sd_i0;
            sec.mu_i0 - hw + 2.0 * hw * k as f64 / (sec.grid_points - 1) as f64
        })
        .collect();
    for (k, sa) in sec.sigma_a.iter().enumerate() {
        let case = sec.case(*sa);
        let s = Surrogate::new(case.surrogate())?;
        let rng = root.child(k as u64);
        let exact = case.tposterior()?;
        let g = exact.analytic.clone().expect("conjugate posterior");
        let t =
            exact.with_gaussian_draws(sec.n_components, DrawScheme::Quasi, &mut rng.child(0))?;
        let key = [("sigma_a", fmt_f64(*sa))];
        tpost_table.extend(tposterior_table(&key, &t)?)?;
        let comps = Components::from_tposterior(&t);
        let (meas, priors) = (case.measurements(), case.istep_priors());
        for m in &methods {
            let post = infer(
                *m,
                &s,
                &t,
                &comps,
                &meas,
                &priors,
                &sec.sampler,
                &sec.epost_sampler,
                &rng.child(1 + method_stream(*m)),
            )?;
            out.check_posterior(&format!("sigma_a={sa} {}", m.label()), &post);
            append(
                &mut per_method,
                *m,
                draws_table(&key, &post.names, &post.draws)?,
            )?;
            let closed = analytic_linear_iposterior(
                *m,
                &g,
                &meas.ys,
                &case.linear_priors(),
                sec.normalizer,
            )?;
            for w in &omegas {
                grid.push(vec![
                    fmt_f64(*sa),
                    m.label().into(),
                    fmt_f64(*w),
                    fmt_f64(closed.pdf(*w)),
                ])?;
            }
            let col = post.column(0);
            let n = col.len() as f64;
            let mean = col.iter().sum::<f64>() / n;
            let sd = (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
            moments.push(json!({
                "sigma_a": sa,
                "method": m.label(),
                "mcmc_mean": mean,
                "mcmc_sd": sd,
                "closed_form_mean": closed.mean(),
                "closed_form_sd": closed.sd(),
            }));
        }
    }
    out.table("tposterior.csv", &tpost_table)?;
    for (m, t) in &per_method {
        out.table(&format!("iposterior_{}.csv", m.label()), t)?;
    }
    out.table("density_grid.csv", &grid)?;
    Ok(json!({ "moments": moments }))
}

struct Trained {
    surrogate: Surrogate,
    tpost: TPosterior,
}

fn train(
    sim: &SimulatorSpec,
    spec: SurrogateSpec,
    plan: &TrainingPlan,
    rng: &StreamRng,
    out: &mut Out,
) -> Result<Trained, Failure> {
    let surrogate = Surrogate::new(spec)?;
    let (_, tpost) = run_training_plan(plan, sim, &surrogate, rng)?;
    out.check_training("T-step", &tpost);
    Ok(Trained { surrogate, tpost })
}

#[allow(clippy::too_many_arguments)]
fn run_methods(
    methods: &[UpMethod],
    trained: &Trained,
    meas: &twostep_core::simulators::Measurements,
    priors: &IStepPriors,
    clusters: Option<usize>,
    sampler: &SamplerConfig,
    epost_sampler: &SamplerConfig,
    root: &StreamRng,
    out: &mut Out,
) -> Result<Vec<Value>, Failure> {
    let t = &trained.tpost;
    let full = Components::from_tposterior(t);
    let clustered = match clusters {
        Some(l) if methods.contains(&UpMethod::EPost) && t.n_draws() > l => {
            let cl = cluster_draws(&t.theta_rows(), l, &mut root.child(2))?;
            Some(Components::from_clusters(&cl, t))
        }
        _ => None,
    };
    let mut summary = Vec::new();
    for m in methods {
        let comps = match (m, &clustered) {
            (UpMethod::EPost, Some(c)) => c,
            _ => &full,
        };
        let post = infer(
            *m,
            &trained.surrogate,
            t,
            comps,
            meas,
            priors,
            sampler,
            epost_sampler,
            &root.child(3 + method_stream(*m)),
        )?;
        out.check_posterior(m.label(), &post);
        out.table(
            &format!("iposterior_{}.csv", m.label()),
            &draws_table(&[], &post.names, &post.draws)?,
        )?;
        summary.push(json!({
            "method": m.label(),
            "n_draws": post.len(),
            "max_rhat": post.diagnostics.max_rhat,
            "mean_acceptance": post.diagnostics.mean_acceptance,
            "n_components": comps.len(),
        }));
    }
    Ok(summary)
}

fn run_logistic(cfg: &ExperimentConfig, root: &StreamRng, out: &mut Out) -> Result<Value, Failure> {
    let sec = cfg.logistic.clone().unwrap_or_default();
    let methods = parse_methods(&sec.methods).map_err(Failure::Numerical)?;
    let sim = SimulatorSpec::new(SimulatorKind::Logistic);
    let spec = if cfg.kind == Kind::Case2Pce {
        cases::logistic_pce_surrogate(sec.degree)
    } else {
        cases::logistic_surrogate()
    };
    let plan = cases::logistic_training(sec.n_t, sec.train_sampler.clone());
    let trained = train(&sim, spec, &plan, &root.child(0), out)?;
    out.table("tposterior.csv", &tposterior_table(&[], &trained.tpost)?)?;
    let meas = generate_measurements(
        &sim,
        &[sec.omega_star],
        &MeasurementNoise::Normal {
            sigma: sec.sigma_i_star,
        },
        sec.n_i,
        None,
        &mut root.child(1),
    )?;
    let summary = run_methods(
        &methods,
        &trained,
        &meas,
        &cases::logistic_istep_priors(),
        sec.clusters,
        &sec.sampler,
        &sec.epost_sampler,
        root,
        out,
    )?;
    Ok(json!({ "measurements": meas.ys, "methods": summary }))
}

fn run_sir(cfg: &ExperimentConfig, root: &StreamRng, out: &mut Out) -> Result<Value, Failure> {
    let sec = cfg.sir.clone().unwrap_or_default();
    let methods = parse_methods(&sec.methods).map_err(Failure::Numerical)?;
    let sim = cases::sir_simulator(sec.solver.clone());
    let plan = cases::sir_training(sec.n_t, sec.train_sampler.clone());
    let trained = train(
        &sim,
        cases::sir_surrogate(sec.degree),
        &plan,
        &root.child(0),
        out,
    )?;
    out.table("tposterior.csv", &tposterior_table(&[], &trained.tpost)?)?;
    let meas = generate_measurements(
        &sim,
        &[sec.beta_star, sec.gamma_star],
        &MeasurementNoise::NegBin { phi: sec.phi },
        sec.n_i,
        Some(sec.time_span),
        &mut root.child(1),
    )?;
    let summary = run_methods(
        &methods,
        &trained,
        &meas,
        &cases::sir_istep_priors(),
        sec.clusters,
        &sec.sampler,
        &sec.epost_sampler,
        root,
        out,
    )?;
    Ok(json!({ "measurements": meas.ys, "times": meas.times, "methods": summary }))
}

fn sbc_config(sec: &crate::config::SbcSection, method: UpMethod) -> SbcConfig {
    let (surrogate, training) = match sec.case {
        SbcCase::Logistic => (
            cases::logistic_surrogate(),
            cases::logistic_training(sec.n_t, sec.train_sampler.clone()),
        ),
        SbcCase::LogisticPce => (
            cases::logistic_pce_surrogate(sec.degree),
            cases::logistic_training(sec.n_t, sec.train_sampler.clone()),
        ),
        SbcCase::LogisticCheat => (
            cases::logistic_surrogate(),
            TrainingPlan::Fixed {
                c: cases::LOGISTIC_TRUTH.to_vec(),
                sigma_a: None,
            },
        ),
    };
    SbcConfig {
        n_t_trials: sec.n_t_trials,
        n_i_trials: sec.n_i_trials,
        k_eff: sec.k_eff,
        simulator: SimulatorSpec::new(SimulatorKind::Logistic),
        surrogate,
        training,
        priors: cases::logistic_istep_priors(),
        n_i: cases::LOGISTIC_N_I,
        time_span: None,
        measurement_noise: None,
        method,
        sampler: sec.sampler.clone(),
        epost_sampler: Some(sec.epost_sampler.clone()),
        clusters: sec.clusters,
    }
}

fn run_sbc(cfg: &ExperimentConfig, root: &StreamRng, out: &mut Out) -> Result<Value, Failure> {
    let sec = cfg.sbc.clone().unwrap_or_default();
    let methods = parse_methods(&sec.methods).map_err(Failure::Numerical)?;
    let mut records = Table::default();
    let mut ecdf = Table::new(["method", "dim", "z", "lower", "upper", "observed"]);
    let mut summary = Vec::new();
    for m in &methods {
        // Every method sees the same truths and measurements.
        let run: SbcRun = sbc_run(&sbc_config(&sec, *m), &root.child(0))?;
        records.extend(sbc_table(m.label(), &run.records)?)?;
        let high_rhat = run
            .records
            .iter()
            .filter(|r| r.dim == 0 && r.rhat_max.is_some_and(|v| v > RHAT_LIMIT))
            .count();
        let n_done = run.records.iter().filter(|r| r.dim == 0).count();
        if high_rhat as f64 > 0.1 * n_done as f64 {
            out.diagnostics.push(format!(
                "sbc {}: {high_rhat} of {n_done} trials have R-hat above {RHAT_LIMIT}",
                m.label()
            ));
        }
        let mut dims = Vec::new();
        for dim in 0..run.n_dims() {
            let ranks = run.ranks(dim);
            let env = ecdf_envelope(&ranks, run.k_eff, sec.confidence, sec.n_sim, &root.child(1))?;
            for j in 0..env.z.len() {
                ecdf.push(vec![
                    m.label().into(),
                    dim.to_string(),
                    fmt_f64(env.z[j]),
                    fmt_f64(env.lower[j]),
                    fmt_f64(env.upper[j]),
                    fmt_f64(env.observed[j]),
                ])?;
            }
            let sharp: Vec<f64> = run
                .records
                .iter()
                .filter(|r| r.dim == dim)
                .map(|r| r.sharpness)
                .collect();
            dims.push(json!({
                "dim": dim,
                "n_ranks": ranks.len(),
                "log_gamma": log_gamma(&ranks, run.k_eff)?,
                "threshold": env.threshold,
                "calibrated": env.log_gamma >= env.threshold,
                "mean_sharpness": sharp.iter().sum::<f64>() / sharp.len().max(1) as f64,
            }));
        }
        summary.push(json!({
            "method": m.label(),
            "n_trials": run.n_trials,
            "n_excluded": run.n_excluded,
            "failures": run.failures,
            "trials_rhat_above_limit": high_rhat,
            "dims": dims,
        }));
    }
    out.table("sbc_records.csv", &records)?;
    out.table("sbc_ecdf.csv", &ecdf)?;
    let s = json!({
        "confidence": sec.confidence,
        "k_eff": sec.k_eff,
        "n_sim": sec.n_sim,
        "sharpness_level": twostep_core::calibration::SHARPNESS_LEVEL,
        "methods": summary,
    });
    out.json("sbc_summary.json", &s)?;
    Ok(json!({ "sbc_summary": "sbc_summary.json" }))
}

fn run_counterexample(cfg: &ExperimentConfig, out: &mut Out) -> Result<Value, Failure> {
    let sec = cfg.counterexample.clone();
    let tables = sec
        .as_ref()
        .and_then(|s| s.tables.clone())
        .unwrap_or_else(reference_counterexample);
    let y_obs = sec.map_or(0, |s| s.y_obs);
    let show = |m| -> Result<Vec<String>, Failure> {
        Ok(discrete_posterior(&tables, m, y_obs)?
            .iter()
            .map(|q| q.to_string())
            .collect())
    };
    let v = json!({
        "y_obs": y_obs,
        "epost": show(DiscreteMethod::EPost)?,
        "elik": show(DiscreteMethod::ELik)?,
    });
    out.json("discrete_posterior.json", &v)?;
    Ok(v)
}

struct TimingCell {
    method: UpMethod,
    degree: usize,
    clusters: usize,
    setup: usize,
    n_comps: usize,
    best: f64,
}

/// Wall-clock seconds per (method, degree, clusters), best of `repeats`.
/// Each repeat sweeps the whole grid, so a burst of load cannot hit every
/// measurement of one cell.
pub fn run_timing(cfg: &ExperimentConfig, out: &mut Out) -> Result<Value, Failure> {
    let sec = cfg.timing.clone().unwrap_or_default();
    let methods = parse_methods(&sec.methods).map_err(Failure::Numerical)?;
    let root = StreamRng::new(cfg.seed, 0);
    let sim = SimulatorSpec::new(SimulatorKind::Logistic);
    let priors = cases::logistic_istep_priors();
    let mut fitted = Vec::new();
    let mut setups = Vec::new();
    let mut cells = Vec::new();
    for (di, &d) in sec.degrees.iter().enumerate() {
        let rng = root.child(d as u64);
        let plan = cases::logistic_training(sec.n_t, sec.train_sampler.clone());
        let trained = train(
            &sim,
            cases::logistic_pce_surrogate(d),
            &plan,
            &rng.child(0),
            out,
        )?;
        let meas = generate_measurements(
            &sim,
            &[0.3],
            &MeasurementNoise::Normal { sigma: 0.02 },
            cases::LOGISTIC_N_I,
            None,
            &mut rng.child(1),
        )?;
        for &l in &sec.clusters {
            let t = &trained.tpost;
            let comps = if l < t.n_draws() {
                let cl = cluster_draws(&t.theta_rows(), l, &mut rng.child(2 + l as u64))?;
                Components::from_clusters(&cl, t)
            } else {
                Components::from_tposterior(t)
            };
            for m in &methods {
                let point = matches!(m, UpMethod::Point { .. });
                cells.push(TimingCell {
                    method: *m,
                    degree: d,
                    clusters: l,
                    setup: setups.len(),
                    n_comps: if point { 1 } else { comps.len() },
                    best: f64::INFINITY,
                });
            }
            setups.push((di, rng.clone(), comps));
        }
        fitted.push((trained, meas));
    }
    // The first sweep warms caches and is not recorded.
    for rep in 0..=sec.repeats {
        for cell in cells.iter_mut() {
            let (di, rng, comps) = &setups[cell.setup];
            let (trained, meas) = &fitted[*di];
            let start = Instant::now();
            infer(
                cell.method,
                &trained.surrogate,
                &trained.tpost,
                comps,
                meas,
                &priors,
                &sec.sampler,
                &sec.epost_sampler,
                &rng.child(1000 + method_stream(cell.method)),
            )?;
            if rep > 0 {
                cell.best = cell.best.min(start.elapsed().as_secs_f64());
            }
        }
    }
    let mut table = Table::new(["method", "degree", "clusters", "n_components", "seconds"]);
    for c in &cells {
        table.push(vec![
            c.method.label().into(),
            c.degree.to_string(),
            c.clusters.to_string(),
            c.n_comps.to_string(),
            fmt_f64(c.best),
        ])?;
    }
    out.table("timing.csv", &table)?;
    Ok(json!({ "rows": table.len() }))
}
