//! Reference simulators, space-filling designs and synthetic data generation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prob::{Dist, DistSpec, StreamRng};

/// SIR population and initial state at t = 0, plus the RK4 step count.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SirConfig {
    pub n_pop: f64,
    pub s0: f64,
    pub i0: f64,
    pub r0: f64,
    /// Number of RK4 steps spanning `[0, t_max]`.
    pub n_steps: usize,
}

impl Default for SirConfig {
    fn default() -> Self {
        Self {
            n_pop: 1000.0,
            s0: 990.0,
            i0: 10.0,
            r0: 0.0,
            n_steps: 2000,
        }
    }
}

/// Bounds of `(t, beta, gamma)` the SIR surrogate is trained on.
pub const SIR_BOUNDS: [(f64, f64); 3] = [(1.0, 14.0), (1.0, 3.0), (0.1, 0.9)];

impl SirConfig {
    pub fn validate(&self) -> Result<()> {
        if [self.n_pop, self.s0, self.i0, self.r0]
            .iter()
            .any(|v| !(v.is_finite() && *v >= 0.0))
        {
            return Err(Error::invalid(
                "SIR populations must be finite and nonnegative",
            ));
        }
        let total = self.s0 + self.i0 + self.r0;
        if (total - self.n_pop).abs() > 1e-9 * self.n_pop.max(1.0) {
            return Err(Error::invalid(format!(
                "SIR initial state sums to {total}, expected n_pop = {}",
                self.n_pop
            )));
        }
        if self.n_steps == 0 {
            return Err(Error::invalid("SIR n_steps must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SimulatorKind {
    Linear { a: f64, b: f64 },
    SlopeOnly { c: f64 },
    Logistic,
    Sir(SirConfig),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulatorSpec {
    pub kind: SimulatorKind,
    /// Simulator noise `e_S`, added to the deterministic output when a random stream is supplied.
    #[serde(default)]
    pub noise: Option<DistSpec>,
}

impl SimulatorSpec {
    pub fn new(kind: SimulatorKind) -> Self {
        Self { kind, noise: None }
    }

    pub fn input_dim(&self) -> usize {
        match self.kind {
            SimulatorKind::Sir(_) => 3,
            _ => 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let SimulatorKind::Sir(cfg) = &self.kind {
            cfg.validate()?;
        }
        if let Some(n) = &self.noise {
            Dist::new(n.clone())?;
        }
        Ok(())
    }

    /// Deterministic response at `omega` (for SIR, `omega = (t, beta, gamma)`).
    pub fn response(&self, omega: &[f64]) -> Result<f64> {
        if omega.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                got: omega.len(),
            });
        }
        Ok(match &self.kind {
            SimulatorKind::Linear { a, b } => a + b * omega[0],
            SimulatorKind::SlopeOnly { c } => c * omega[0],
            SimulatorKind::Logistic => logistic(omega[0]),
            SimulatorKind::Sir(cfg) => {
                let traj = sir_solve(cfg, omega[1], omega[2], &[omega[0]])?;
                traj.i[0]
            }
        })
    }

    /// Response plus an optional noise realization drawn from `self.noise`.
    pub fn simulate(&self, omega: &[f64], rng: Option<&mut StreamRng>) -> Result<f64> {
        let y = self.response(omega)?;
        match (&self.noise, rng) {
            (Some(noise), Some(rng)) => Ok(y + Dist::new(noise.clone())?.draw_f64(rng)),
            _ => Ok(y),
        }
    }
}

/// `2 / (1 + exp(-10 w)) - 1`
pub fn logistic(w: f64) -> f64 {
    2.0 / (1.0 + (-10.0 * w).exp()) - 1.0
}

/// Whether `(beta, gamma)` lies in the box the SIR surrogate is trained on.
pub fn sir_in_training_box(beta: f64, gamma: f64) -> bool {
    (SIR_BOUNDS[1].0..=SIR_BOUNDS[1].1).contains(&beta)
        && (SIR_BOUNDS[2].0..=SIR_BOUNDS[2].1).contains(&gamma)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SirTrajectory {
    pub t: Vec<f64>,
    pub s: Vec<f64>,
    pub i: Vec<f64>,
    pub r: Vec<f64>,
}

fn sir_rhs(state: [f64; 3], beta: f64, gamma: f64, n: f64) -> [f64; 3] {
    let [s, i, _] = state;
    let infection = beta * s * i / n;
    let recovery = gamma * i;
    [-infection, infection - recovery, recovery]
}

fn rk4_step(state: [f64; 3], h: f64, beta: f64, gamma: f64, n: f64) -> [f64; 3] {
    let add =
        |x: [f64; 3], k: [f64; 3], c: f64| [x[0] + c * k[0], x[1] + c * k[1], x[2] + c * k[2]];
    let k1 = sir_rhs(state, beta, gamma, n);
    let k2 = sir_rhs(add(state, k1, 0.5 * h), beta, gamma, n);
    let k3 = sir_rhs(add(state, k2, 0.5 * h), beta, gamma, n);
    let k4 = sir_rhs(add(state, k3, h), beta, gamma, n);
    std::array::from_fn(|j| state[j] + h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]))
}

/// Solve the SIR system from the initial state at t = 0 and report it on `t_grid`.
///
/// Fixed-step classical RK4 with nominal step `(t_max - t_min) / cfg.n_steps`; each grid
/// interval is split into a whole number of steps no longer than the nominal one.
pub fn sir_solve(cfg: &SirConfig, beta: f64, gamma: f64, t_grid: &[f64]) -> Result<SirTrajectory> {
    cfg.validate()?;
    if t_grid.is_empty() {
        return Err(Error::EmptyInput("SIR time grid"));
    }
    if !(beta.is_finite() && gamma.is_finite() && beta >= 0.0 && gamma >= 0.0) {
        return Err(Error::invalid(format!(
            "SIR rates must be nonnegative, got beta={beta}, gamma={gamma}"
        )));
    }
    if !(t_grid[0] >= 0.0)
        || t_grid.windows(2).any(|w| !(w[1] > w[0]))
        || !t_grid.iter().all(|t| t.is_finite())
    {
        return Err(Error::invalid(
            "SIR time grid must be finite, start at t >= 0 and be strictly increasing",
        ));
    }
    let t_max = *t_grid.last().unwrap();
    let horizon = if t_max > t_grid[0] {
        t_max - t_grid[0]
    } else {
        t_max.max(1.0)
    };
    let h_nominal = horizon / cfg.n_steps as f64;
    let mut state = [cfg.s0, cfg.i0, cfg.r0];
    let mut t = 0.0;
    let mut out = SirTrajectory {
        t: t_grid.to_vec(),
        s: Vec::with_capacity(t_grid.len()),
        i: Vec::with_capacity(t_grid.len()),
        r: Vec::with_capacity(t_grid.len()),
    };
    for &target in t_grid {
        let span = target - t;
        if span > 0.0 {
            let steps = ((span / h_nominal) - 1e-9).ceil().max(1.0) as usize;
            let h = span / steps as f64;
            if !(h > 0.0) || t + h == t {
                return Err(Error::Solver(format!(
                    "step size underflow at t={t} (h={h})"
                )));
            }
            for _ in 0..steps {
                state = rk4_step(state, h, beta, gamma, cfg.n_pop);
            }
            if state.iter().any(|v| !v.is_finite()) {
                return Err(Error::Solver(format!(
                    "non-finite state at t={target}: {state:?}"
                )));
            }
        }
        t = target;
        out.s.push(state[0]);
        out.i.push(state[1]);
        out.r.push(state[2]);
    }
    Ok(out)
}

/// Maximum difference in `I(t)` between the configured step and half of it.
pub fn sir_half_step_error(cfg: &SirConfig, beta: f64, gamma: f64, t_grid: &[f64]) -> Result<f64> {
    let coarse = sir_solve(cfg, beta, gamma, t_grid)?;
    let fine_cfg = SirConfig {
        n_steps: cfg.n_steps * 2,
        ..cfg.clone()
    };
    let fine = sir_solve(&fine_cfg, beta, gamma, t_grid)?;
    Ok(coarse
        .i
        .iter()
        .zip(&fine.i)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max))
}

/// Radical inverse of `index` in `base`.
pub fn van_der_corput(mut index: u64, base: u64) -> f64 {
    let mut result = 0.0;
    let mut f = 1.0 / base as f64;
    while index > 0 {
        result += f * (index % base) as f64;
        index /= base;
        f /= base as f64;
    }
    result
}

/// Boundary-first 1-D Halton design on `[-1, 1]`: `-1, 1, 0`, then the base-2
/// van der Corput points `1/4, 3/4, 1/8, ...` mapped affinely.
pub fn halton_design_1d(n: usize) -> Vec<f64> {
    let mut points: Vec<f64> = [-1.0, 1.0, 0.0].into_iter().take(n).collect();
    let mut index = 2u64;
    while points.len() < n {
        points.push(2.0 * van_der_corput(index, 2) - 1.0);
        index += 1;
    }
    points
}

const SOBOL_BITS: usize = 32;

/// Direction numbers for dimensions 1..=3 (Joe & Kuo, primitive polynomials
/// `x + 1` and `x^2 + x + 1`; dimension 1 is the van der Corput sequence).
fn sobol_directions() -> [[u32; SOBOL_BITS]; 3] {
    let mut v = [[0u32; SOBOL_BITS]; 3];
    for k in 0..SOBOL_BITS {
        v[0][k] = 1u32 << (SOBOL_BITS - 1 - k);
    }
    // (degree s, polynomial coefficients a, initial m values)
    let params: [(usize, u32, &[u32]); 2] = [(1, 0, &[1]), (2, 1, &[1, 3])];
    for (d, (s, a, m)) in params.iter().enumerate() {
        let dir = &mut v[d + 1];
        for k in 0..*s {
            dir[k] = m[k] << (SOBOL_BITS - 1 - k);
        }
        for k in *s..SOBOL_BITS {
            let mut x = dir[k - s] ^ (dir[k - s] >> s);
            for j in 1..*s {
                if (a >> (s - 1 - j)) & 1 == 1 {
                    x ^= dir[k - j];
                }
            }
            dir[k] = x;
        }
    }
    v
}

/// First `n` points of the unscrambled 3-D Sobol sequence in the unit cube,
/// in Gray-code order, starting with the origin.
pub fn sobol_unit_3d(n: usize) -> Vec<[f64; 3]> {
    let v = sobol_directions();
    let mut x = [0u32; 3];
    let mut out = Vec::with_capacity(n);
    let scale = 1.0 / (1u64 << SOBOL_BITS) as f64;
    for i in 0..n {
        if i > 0 {
            let c = (i - 1).trailing_ones() as usize;
            for d in 0..3 {
                x[d] ^= v[d][c];
            }
        }
        out.push([
            x[0] as f64 * scale,
            x[1] as f64 * scale,
            x[2] as f64 * scale,
        ]);
    }
    out
}

/// Sobol points mapped affinely into the box `bounds`.
pub fn sobol_design_3d(n: usize, bounds: &[(f64, f64); 3]) -> Result<Vec<Vec<f64>>> {
    for (lo, hi) in bounds {
        if !(lo < hi) {
            return Err(Error::invalid(format!(
                "Sobol bounds must satisfy lo < hi, got [{lo}, {hi}]"
            )));
        }
    }
    Ok(sobol_unit_3d(n)
        .into_iter()
        .map(|u| {
            (0..3)
                .map(|d| bounds[d].0 + u[d] * (bounds[d].1 - bounds[d].0))
                .collect()
        })
        .collect())
}

/// Simulator training data: inputs, per-point noise hyperparameter and outputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingDataset {
    pub inputs: Vec<Vec<f64>>,
    pub noise_hypers: Vec<f64>,
    pub outputs: Vec<f64>,
}

impl TrainingDataset {
    pub fn new(inputs: Vec<Vec<f64>>, noise_hypers: Vec<f64>, outputs: Vec<f64>) -> Result<Self> {
        if inputs.is_empty() {
            return Err(Error::EmptyInput("training inputs"));
        }
        for other in [noise_hypers.len(), outputs.len()] {
            if other != inputs.len() {
                return Err(Error::DimensionMismatch {
                    expected: inputs.len(),
                    got: other,
                });
            }
        }
        Ok(Self {
            inputs,
            noise_hypers,
            outputs,
        })
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }
}

/// Training input design.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Design {
    /// [`halton_design_1d`] on `[-1, 1]`.
    Halton {
        n: usize,
    },
    /// [`sobol_design_3d`] over `(t, beta, gamma)` bounds.
    Sobol {
        n: usize,
        bounds: [(f64, f64); 3],
    },
    Points {
        points: Vec<Vec<f64>>,
    },
}

impl Design {
    pub fn points(&self) -> Result<Vec<Vec<f64>>> {
        match self {
            Design::Halton { n } => Ok(halton_design_1d(*n).into_iter().map(|w| vec![w]).collect()),
            Design::Sobol { n, bounds } => sobol_design_3d(*n, bounds),
            Design::Points { points } => Ok(points.clone()),
        }
    }
}

/// Evaluate the simulator on `design`, adding `Normal(0, sigma_s)` noise when `sigma_s > 0`.
pub fn generate_training_data(
    spec: &SimulatorSpec,
    design: &[Vec<f64>],
    sigma_s: f64,
    rng: &mut StreamRng,
) -> Result<TrainingDataset> {
    if design.is_empty() {
        return Err(Error::EmptyInput("training design"));
    }
    if !(sigma_s.is_finite() && sigma_s >= 0.0) {
        return Err(Error::invalid(format!(
            "sigma_s must be >= 0, got {sigma_s}"
        )));
    }
    let noise = if sigma_s > 0.0 {
        Some(Dist::normal(0.0, sigma_s)?)
    } else {
        None
    };
    let mut outputs = Vec::with_capacity(design.len());
    for omega in design {
        let mut y = spec.response(omega)?;
        if let Some(n) = &noise {
            y += n.draw_f64(rng);
        }
        outputs.push(y);
    }
    TrainingDataset::new(design.to_vec(), vec![sigma_s; design.len()], outputs)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum MeasurementNoise {
    /// Additive `Normal(0, sigma)`; `sigma = 0` gives exact simulator outputs.
    Normal { sigma: f64 },
    /// Counts `NegBin(mean = I(t), shape = phi)`.
    NegBin { phi: f64 },
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MeasurementMeta {
    pub omega_star: Vec<f64>,
    pub sigma_i: Option<f64>,
    /// True when a SIR ground truth lies outside the surrogate training box.
    pub out_of_box: bool,
}

/// Observed outputs, optional observation times (SIR) and the synthetic truth.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Measurements {
    pub ys: Vec<f64>,
    pub times: Option<Vec<f64>>,
    pub meta: MeasurementMeta,
}

impl Measurements {
    pub fn new(ys: Vec<f64>) -> Self {
        Self {
            ys,
            times: None,
            meta: MeasurementMeta::default(),
        }
    }

    pub fn len(&self) -> usize {
        self.ys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ys.is_empty()
    }

    /// Simulator/surrogate input for measurement `i` at parameter `omega`.
    pub fn input_at(&self, i: usize, omega: &[f64]) -> Vec<f64> {
        match &self.times {
            Some(t) => std::iter::once(t[i]).chain(omega.iter().copied()).collect(),
            None => omega.to_vec(),
        }
    }
}

/// `n` evenly spaced points covering `[lo, hi]`.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![lo],
        _ => (0..n)
            .map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64)
            .collect(),
    }
}

/// Synthetic measurements at ground truth `omega_star`.
///
/// For SIR `omega_star = (beta, gamma)` and the observation times are `n_i`
/// evenly spaced points on `time_span`.
pub fn generate_measurements(
    spec: &SimulatorSpec,
    omega_star: &[f64],
    noise: &MeasurementNoise,
    n_i: usize,
    time_span: Option<(f64, f64)>,
    rng: &mut StreamRng,
) -> Result<Measurements> {
    let times = match (&spec.kind, time_span) {
        (SimulatorKind::Sir(_), Some((lo, hi))) => Some(linspace(lo, hi, n_i)),
        (SimulatorKind::Sir(_), None) => {
            return Err(Error::invalid("SIR measurements need a time span"))
        }
        _ => None,
    };
    let expected_dim = spec.input_dim() - usize::from(times.is_some());
    if omega_star.len() != expected_dim {
        return Err(Error::DimensionMismatch {
            expected: expected_dim,
            got: omega_star.len(),
        });
    }
    let means: Vec<f64> = match (&spec.kind, &times) {
        (SimulatorKind::Sir(cfg), Some(t)) if !t.is_empty() => {
            sir_solve(cfg, omega_star[0], omega_star[1], t)?.i
        }
        (SimulatorKind::Sir(_), _) => vec![],
        _ => {
            let y = spec.response(omega_star)?;
            vec![y; n_i]
        }
    };
    let (ys, sigma_i) = match noise {
        MeasurementNoise::Normal { sigma } => {
            if !(sigma.is_finite() && *sigma >= 0.0) {
                return Err(Error::invalid(format!(
                    "measurement sigma must be >= 0, got {sigma}"
                )));
            }
            let ys = if *sigma > 0.0 {
                let d = Dist::normal(0.0, *sigma)?;
                means.iter().map(|m| m + d.draw_f64(rng)).collect()
            } else {
                means.clone()
            };
            (ys, Some(*sigma))
        }
        MeasurementNoise::NegBin { phi } => {
            let mut ys = Vec::with_capacity(means.len());
            for m in &means {
                let d = Dist::new(DistSpec::NegativeBinomial {
                    mu: m.max(1e-12),
                    phi: *phi,
                })?;
                ys.push(d.draw_f64(rng));
            }
            (ys, None)
        }
    };
    let out_of_box = matches!(spec.kind, SimulatorKind::Sir(_))
        && !sir_in_training_box(omega_star[0], omega_star[1]);
    Ok(Measurements {
        ys,
        times,
        meta: MeasurementMeta {
            omega_star: omega_star.to_vec(),
            sigma_i,
            out_of_box,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_and_logistic_responses() {
        let lin = SimulatorSpec::new(SimulatorKind::Linear { a: 0.5, b: 2.0 });
        assert_eq!(lin.response(&[-0.5]).unwrap(), -0.5);
        let lg = SimulatorSpec::new(SimulatorKind::Logistic);
        assert_eq!(lg.response(&[0.0]).unwrap(), 0.0);
        for w in [0.03, 0.2, 0.77] {
            let (a, b) = (lg.response(&[w]).unwrap(), lg.response(&[-w]).unwrap());
            assert!((a + b).abs() < 1e-15);
        }
        assert!(lin.response(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn sir_without_contacts_decays_exponentially() {
        let cfg = SirConfig::default();
        let t = linspace(1.0, 14.0, 14);
        let traj = sir_solve(&cfg, 0.0, 0.4, &t).unwrap();
        for (ti, ii) in t.iter().zip(&traj.i) {
            let exact = cfg.i0 * (-0.4 * ti).exp();
            assert!(
                (ii - exact).abs() < 1e-9 * cfg.i0,
                "t={ti}: {ii} vs {exact}"
            );
        }
    }

    #[test]
    fn sir_without_recovery_keeps_r_fixed() {
        let cfg = SirConfig {
            r0: 5.0,
            s0: 985.0,
            ..SirConfig::default()
        };
        let traj = sir_solve(&cfg, 1.6, 0.0, &linspace(0.5, 14.0, 30)).unwrap();
        assert!(traj.r.iter().all(|r| *r == 5.0));
    }

    #[test]
    fn sir_rejects_bad_grids_and_rates() {
        let cfg = SirConfig::default();
        assert!(sir_solve(&cfg, 1.0, 0.2, &[2.0, 1.0]).is_err());
        assert!(sir_solve(&cfg, 1.0, 0.2, &[-1.0, 1.0]).is_err());
        assert!(sir_solve(&cfg, -1.0, 0.2, &[1.0]).is_err());
        assert!(sir_solve(&cfg, 1.0, 0.2, &[]).is_err());
        let bad = SirConfig { s0: 100.0, ..cfg };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn sir_half_step_check_is_small() {
        let err =
            sir_half_step_error(&SirConfig::default(), 1.6, 0.4, &linspace(1.0, 14.0, 50)).unwrap();
        assert!(err < 1e-6, "err = {err}");
    }

    #[test]
    fn sir_conserves_population() {
        let cfg = SirConfig::default();
        for (b, g) in [(1.6, 0.4), (3.0, 0.1), (1.0, 0.9), (2.2, 0.5)] {
            let traj = sir_solve(&cfg, b, g, &linspace(1.0, 14.0, 27)).unwrap();
            for k in 0..traj.t.len() {
                let total = traj.s[k] + traj.i[k] + traj.r[k];
                assert!((total - cfg.n_pop).abs() < 1e-6 * cfg.n_pop);
                assert!(traj.s[k] >= 0.0 && traj.i[k] >= 0.0 && traj.r[k] >= 0.0);
            }
        }
    }

    #[test]
    fn rk4_self_convergence_order() {
        let t = linspace(1.0, 14.0, 14);
        let solve = |n: usize| {
            let cfg = SirConfig {
                n_steps: n,
                ..SirConfig::default()
            };
            sir_solve(&cfg, 1.6, 0.4, &t).unwrap().i
        };
        let (a, b, c) = (solve(100), solve(200), solve(400));
        let e1 = a
            .iter()
            .zip(&b)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        let e2 = b
            .iter()
            .zip(&c)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        let order = (e1 / e2).log2();
        assert!(order >= 3.8, "observed order {order}");
    }

    #[test]
    fn halton_prefix_and_van_der_corput_tail() {
        assert_eq!(halton_design_1d(3), vec![-1.0, 1.0, 0.0]);
        let ten = halton_design_1d(10);
        // Textbook base-2 radical inverses of 2..=8: 1/4, 3/4, 1/8, 5/8, 3/8, 7/8, 1/16.
        let reference = [0.25, 0.75, 0.125, 0.625, 0.375, 0.875, 0.0625];
        for (p, r) in ten[3..].iter().zip(reference) {
            assert_eq!(*p, 2.0 * r - 1.0);
        }
        let five = halton_design_1d(5);
        for i in 0..5 {
            assert!((-1.0..=1.0).contains(&five[i]));
            for j in 0..i {
                assert_ne!(five[i], five[j]);
            }
        }
        assert_eq!(halton_design_1d(7)[..5], halton_design_1d(5)[..]);
    }

    #[test]
    fn sobol_prefix_matches_reference_table() {
        // Unscrambled Joe-Kuo Sobol points as produced by scipy.stats.qmc.Sobol(d=3).
        let reference = [
            [0.0, 0.0, 0.0],
            [0.5, 0.5, 0.5],
            [0.75, 0.25, 0.25],
            [0.25, 0.75, 0.75],
            [0.375, 0.375, 0.625],
            [0.875, 0.875, 0.125],
            [0.625, 0.125, 0.875],
            [0.125, 0.625, 0.375],
        ];
        assert_eq!(sobol_unit_3d(8), reference.to_vec());
    }

    #[test]
    fn sobol_design_inside_box() {
        let pts = sobol_design_3d(38, &SIR_BOUNDS).unwrap();
        assert_eq!(pts.len(), 38);
        for p in &pts {
            for d in 0..3 {
                assert!(p[d] >= SIR_BOUNDS[d].0 && p[d] <= SIR_BOUNDS[d].1);
            }
        }
        assert!(sobol_design_3d(4, &[(0.0, 1.0), (1.0, 1.0), (0.0, 1.0)]).is_err());
    }

    fn dyadic_box_deviation(points: &[[f64; 3]]) -> f64 {
        let mut counts = [0usize; 8];
        for p in points {
            let k = (0..3).fold(0, |acc, d| 2 * acc + usize::from(p[d] >= 0.5));
            counts[k] += 1;
        }
        let expect = points.len() as f64 / 8.0;
        counts
            .iter()
            .map(|c| (*c as f64 - expect).abs())
            .fold(0.0, f64::max)
            / points.len() as f64
    }

    #[test]
    fn sobol_beats_random_designs_on_dyadic_boxes() {
        use rand::Rng;
        let sobol = dyadic_box_deviation(&sobol_unit_3d(38));
        let mut rng = StreamRng::new(2024, 0);
        let mut random: Vec<f64> = (0..100)
            .map(|_| {
                let pts: Vec<[f64; 3]> = (0..38)
                    .map(|_| [rng.random(), rng.random(), rng.random()])
                    .collect();
                dyadic_box_deviation(&pts)
            })
            .collect();
        random.sort_by(f64::total_cmp);
        assert!(sobol < random[50], "sobol {sobol} vs median {}", random[50]);
    }

    #[test]
    fn design_prefixes_are_stable() {
        assert_eq!(sobol_unit_3d(38)[..20], sobol_unit_3d(20)[..]);
    }

    #[test]
    fn noiseless_linear_training_data_is_exact() {
        let spec = SimulatorSpec::new(SimulatorKind::Linear { a: 0.5, b: 2.0 });
        let design = vec![vec![-0.9], vec![-0.3]];
        let data = generate_training_data(&spec, &design, 0.0, &mut StreamRng::new(1, 0)).unwrap();
        assert_eq!(data.outputs, vec![0.5 + 2.0 * -0.9, 0.5 + 2.0 * -0.3]);
        assert!(generate_training_data(&spec, &[], 0.0, &mut StreamRng::new(1, 0)).is_err());
    }

    #[test]
    fn degenerate_measurement_noise() {
        let spec = SimulatorSpec::new(SimulatorKind::Logistic);
        let m = generate_measurements(
            &spec,
            &[0.1],
            &MeasurementNoise::Normal { sigma: 0.0 },
            1,
            None,
            &mut StreamRng::new(3, 0),
        )
        .unwrap();
        assert_eq!(m.ys, vec![logistic(0.1)]);
        assert_eq!(m.meta.omega_star, vec![0.1]);
    }

    #[test]
    fn sir_measurements_are_counts() {
        let spec = SimulatorSpec::new(SimulatorKind::Sir(SirConfig::default()));
        let m = generate_measurements(
            &spec,
            &[1.6, 0.4],
            &MeasurementNoise::NegBin { phi: 9.6 },
            50,
            Some((1.0, 14.0)),
            &mut StreamRng::new(3, 0),
        )
        .unwrap();
        assert_eq!(m.ys.len(), 50);
        assert!(m.ys.iter().all(|y| *y >= 0.0 && y.fract() == 0.0));
        assert!(!m.meta.out_of_box);
        assert_eq!(m.input_at(0, &[1.6, 0.4]), vec![1.0, 1.6, 0.4]);
    }
}
