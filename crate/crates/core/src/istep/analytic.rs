//! Closed-form and quadrature I-posteriors for linear surrogates with a
//! Gaussian training posterior and a normal prior on a single input.
//!
//! A two-dimensional training posterior means `y = c0 + c1 * omega`; a
//! one-dimensional one means the slope-only model `y = c * omega`.

use serde::{Deserialize, Serialize};

use super::UpMethod;
use crate::error::{Error, Result};
use crate::prob::{normal_ln_pdf, LN_SQRT_2PI};
use crate::quadrature::{adaptive_simpson, integrate_checked};
use crate::tstep::GaussianPosterior;

/// Prior `Normal(mu0, sd0)` on the input and fixed measurement noise `sigma_i`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearIPriors {
    pub mu0: f64,
    pub sd0: f64,
    pub sigma_i: f64,
}

/// Component normalizer used by the closed-form E-Post density.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EPostNormalizer {
    /// `N(y | c0 + c1 mu0, c1^2 sd0^2 + sigma_i^2)`, the evidence of each component.
    #[default]
    Exact,
    /// `N(y | c0 + c1 mu0, (c0^2 + c1^2) sd0^2 + sigma_i^2)`; single measurement only.
    CTransposeC,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AnalyticIPosterior {
    Normal {
        mean: f64,
        sd: f64,
    },
    /// Density tabulated on an even grid, with moments from adaptive quadrature.
    Grid {
        omega: Vec<f64>,
        density: Vec<f64>,
        mean: f64,
        sd: f64,
    },
}

const GRID_POINTS: usize = 4001;
const QUAD_TOL: f64 = 1e-12;
const QUAD_REL: f64 = 1e-6;
/// Nodes per axis for the two-dimensional Simpson rule over standardized `c`.
const TENSOR_NODES: usize = 201;
const Z_MAX: f64 = 10.0;

impl AnalyticIPosterior {
    pub fn mean(&self) -> f64 {
        match self {
            Self::Normal { mean, .. } | Self::Grid { mean, .. } => *mean,
        }
    }

    pub fn sd(&self) -> f64 {
        match self {
            Self::Normal { sd, .. } | Self::Grid { sd, .. } => *sd,
        }
    }

    /// Density at `w`; linear interpolation for gridded posteriors, zero outside the grid.
    pub fn pdf(&self, w: f64) -> f64 {
        match self {
            Self::Normal { mean, sd } => normal_ln_pdf(w, *mean, *sd).exp(),
            Self::Grid { omega, density, .. } => {
                let (lo, hi) = (omega[0], omega[omega.len() - 1]);
                if !(lo..=hi).contains(&w) {
                    return 0.0;
                }
                let h = (hi - lo) / (omega.len() - 1) as f64;
                let k = (((w - lo) / h) as usize).min(omega.len() - 2);
                let t = (w - omega[k]) / h;
                density[k] * (1.0 - t) + density[k + 1] * t
            }
        }
    }

    /// `(omega, density)` pairs on `n` even points spanning `mean +- half_width * sd`.
    pub fn tabulate(&self, half_width: f64, n: usize) -> Vec<(f64, f64)> {
        let (m, s) = (self.mean(), self.sd());
        let n = n.max(2);
        (0..n)
            .map(|k| {
                let w = m - half_width * s + 2.0 * half_width * s * k as f64 / (n - 1) as f64;
                (w, self.pdf(w))
            })
            .collect()
    }

    /// Number of strict local maxima of the tabulated density above `rel_floor * max`.
    pub fn count_modes(&self, rel_floor: f64) -> usize {
        let d: Vec<f64> = match self {
            Self::Normal { .. } => return 1,
            Self::Grid { density, .. } => density.clone(),
        };
        let top = d.iter().copied().fold(0.0, f64::max);
        (1..d.len() - 1)
            .filter(|&k| d[k] > d[k - 1] && d[k] >= d[k + 1] && d[k] > rel_floor * top)
            .count()
    }
}

struct Setup<'a> {
    g: &'a GaussianPosterior,
    p: LinearIPriors,
    n: f64,
    ybar: f64,
    ss: f64,
    intercept: bool,
}

impl<'a> Setup<'a> {
    fn new(g: &'a GaussianPosterior, ys: &[f64], p: &LinearIPriors) -> Result<Self> {
        if ys.is_empty() {
            return Err(Error::EmptyInput("measurements"));
        }
        if !(p.sd0 > 0.0 && p.sigma_i > 0.0 && p.mu0.is_finite()) {
            return Err(Error::invalid("prior sd and sigma_i must be > 0"));
        }
        let intercept = match g.mean.len() {
            1 => false,
            2 => true,
            d => {
                return Err(Error::Unsupported(format!(
                    "linear closed form needs 1 or 2 coefficients, got {d}"
                )))
            }
        };
        if g.cov.len() != g.mean.len() || g.cov.iter().any(|r| r.len() != g.mean.len()) {
            return Err(Error::DimensionMismatch {
                expected: g.mean.len(),
                got: g.cov.len(),
            });
        }
        let n = ys.len() as f64;
        let ybar = ys.iter().sum::<f64>() / n;
        let ss = ys.iter().map(|y| (y - ybar).powi(2)).sum();
        Ok(Self {
            g,
            p: *p,
            n,
            ybar,
            ss,
            intercept,
        })
    }

    /// `(mean, var)` of `c^T h` for `h = (1, w)` or `h = (w)`.
    fn projected(&self, w: f64) -> (f64, f64) {
        let (m, c) = (&self.g.mean, &self.g.cov);
        if self.intercept {
            (
                m[0] + m[1] * w,
                c[0][0] + 2.0 * w * c[0][1] + w * w * c[1][1],
            )
        } else {
            (m[0] * w, c[0][0] * w * w)
        }
    }

    /// Slope mean and variance.
    fn slope(&self) -> (f64, f64) {
        let k = usize::from(self.intercept);
        (self.g.mean[k], self.g.cov[k][k])
    }

    fn point(&self) -> (f64, f64) {
        let (m, _) = self.slope();
        let LinearIPriors { mu0, sd0, sigma_i } = self.p;
        let offset = if self.intercept { self.g.mean[0] } else { 0.0 };
        let var = 1.0 / (1.0 / (sd0 * sd0) + self.n * m * m / (sigma_i * sigma_i));
        let mean =
            var * (mu0 / (sd0 * sd0) + m * self.n * (self.ybar - offset) / (sigma_i * sigma_i));
        (mean, var.sqrt())
    }

    fn eloglik(&self) -> (f64, f64) {
        let (m, v) = self.slope();
        let LinearIPriors { mu0, sd0, sigma_i } = self.p;
        let s2 = sigma_i * sigma_i;
        let var = 1.0 / (1.0 / (sd0 * sd0) + self.n * (m * m + v) / s2);
        let lin = if self.intercept {
            let (m0, c01) = (self.g.mean[0], self.g.cov[0][1]);
            self.n * (m * (self.ybar - m0) - c01)
        } else {
            self.n * m * self.ybar
        };
        let mean = var * (mu0 / (sd0 * sd0) + lin / s2);
        (mean, var.sqrt())
    }

    /// Unnormalized E-Lik log density.
    fn elik_ln(&self, w: f64) -> f64 {
        let (m, v) = self.projected(w);
        let s2 = self.p.sigma_i * self.p.sigma_i;
        let tot = s2 + self.n * v;
        normal_ln_pdf(w, self.p.mu0, self.p.sd0)
            - self.n * LN_SQRT_2PI
            - 0.5 * (self.n - 1.0) * s2.ln()
            - 0.5 * tot.ln()
            - 0.5 * self.ss / s2
            - 0.5 * self.n * (self.ybar - m).powi(2) / tot
    }

    /// Mean and variance of the component posterior mixture conditional on
    /// the slope, after integrating out the intercept analytically.
    fn epost_conditional(&self, c_slope: f64) -> (f64, f64) {
        let LinearIPriors { mu0, sd0, sigma_i } = self.p;
        let s2 = sigma_i * sigma_i;
        let prec = 1.0 / (sd0 * sd0) + self.n * c_slope * c_slope / s2;
        let (offset_mean, offset_var) = if self.intercept {
            let (m, c) = (&self.g.mean, &self.g.cov);
            let reg = if c[1][1] > 0.0 {
                c[0][1] / c[1][1]
            } else {
                0.0
            };
            (
                m[0] + reg * (c_slope - m[1]),
                (c[0][0] - reg * c[0][1]).max(0.0),
            )
        } else {
            (0.0, 0.0)
        };
        let k = self.n * c_slope / (s2 * prec);
        let mean = (mu0 / (sd0 * sd0) + self.n * c_slope * (self.ybar - offset_mean) / s2) / prec;
        (mean, 1.0 / prec + k * k * offset_var)
    }

    /// `E[f(c_slope)]` under the slope marginal. `checked` compares against a
    /// refined estimate; density tails need only absolute accuracy.
    fn over_slope(&self, f: impl Fn(f64) -> f64, checked: bool) -> Result<f64> {
        let (m, v) = self.slope();
        if v <= 0.0 {
            return Ok(f(m));
        }
        let s = v.sqrt();
        let phi = |z: f64| (-0.5 * z * z - LN_SQRT_2PI).exp();
        let g = |z: f64| phi(z) * f(m + s * z);
        if checked {
            integrate_checked(g, -Z_MAX, Z_MAX, 256, QUAD_TOL, QUAD_REL)
        } else {
            adaptive_simpson(g, -Z_MAX, Z_MAX, 256, QUAD_TOL)
        }
    }
}

/// Tabulates over the wider of `mean +- 10 sd` and `mu0 +- 8 sd0`; mixtures
/// can carry prior-like tails well beyond ten posterior sds.
fn finish_grid(
    mean: f64,
    sd: f64,
    p: &LinearIPriors,
    pdf: impl Fn(f64) -> f64,
) -> AnalyticIPosterior {
    let lo = (mean - 10.0 * sd).min(p.mu0 - 8.0 * p.sd0);
    let hi = (mean + 10.0 * sd).max(p.mu0 + 8.0 * p.sd0);
    let omega: Vec<f64> = (0..GRID_POINTS)
        .map(|k| lo + (hi - lo) * k as f64 / (GRID_POINTS - 1) as f64)
        .collect();
    let density = omega.iter().map(|w| pdf(*w)).collect();
    AnalyticIPosterior::Grid {
        omega,
        density,
        mean,
        sd,
    }
}

fn elik(s: &Setup) -> Result<AnalyticIPosterior> {
    let (lo, hi) = (s.p.mu0 - 12.0 * s.p.sd0, s.p.mu0 + 12.0 * s.p.sd0);
    let shift = (0..=8000)
        .map(|k| s.elik_ln(lo + (hi - lo) * k as f64 / 8000.0))
        .fold(f64::NEG_INFINITY, f64::max);
    let f = |w: f64| (s.elik_ln(w) - shift).exp();
    let z = integrate_checked(f, lo, hi, 2048, QUAD_TOL, QUAD_REL)?;
    let m1 = integrate_checked(|w| w * f(w), lo, hi, 2048, QUAD_TOL, QUAD_REL)? / z;
    let m2 = integrate_checked(
        |w| (w - m1).powi(2) * f(w),
        lo,
        hi,
        2048,
        QUAD_TOL,
        QUAD_REL,
    )? / z;
    let ln_z = shift + z.ln();
    Ok(finish_grid(m1, m2.sqrt(), &s.p, |w| {
        (s.elik_ln(w) - ln_z).exp()
    }))
}

fn epost_exact(s: &Setup) -> Result<AnalyticIPosterior> {
    let mean = s.over_slope(|c| s.epost_conditional(c).0, true)?;
    let second = s.over_slope(
        |c| {
            let (m, v) = s.epost_conditional(c);
            (m - mean).powi(2) + v
        },
        true,
    )?;
    let sd = second.sqrt();
    let pdf = |w: f64| {
        s.over_slope(
            |c| {
                let (m, v) = s.epost_conditional(c);
                normal_ln_pdf(w, m, v.sqrt()).exp()
            },
            false,
        )
        .unwrap_or(f64::NAN)
    };
    let out = finish_grid(mean, sd, &s.p, pdf);
    if let AnalyticIPosterior::Grid { density, .. } = &out {
        if density.iter().any(|d| !d.is_finite()) {
            return Err(Error::Quadrature(
                "E-Post density quadrature failed on the grid".into(),
            ));
        }
    }
    Ok(out)
}

/// Tensor Simpson rule over standardized `(c0, c1)` with the
/// `CTransposeC` reweighting of each component.
fn epost_ctc(s: &Setup) -> Result<AnalyticIPosterior> {
    if s.n != 1.0 {
        return Err(Error::Unsupported(
            "the c^T c normalizer needs a single measurement".into(),
        ));
    }
    if !s.intercept {
        return epost_exact(s);
    }
    let LinearIPriors { mu0, sd0, sigma_i } = s.p;
    let (m, c) = (&s.g.mean, &s.g.cov);
    let s2 = sigma_i * sigma_i;
    let reg = if c[1][1] > 0.0 {
        c[0][1] / c[1][1]
    } else {
        0.0
    };
    let sd1 = c[1][1].max(0.0).sqrt();
    let sd0c = (c[0][0] - reg * c[0][1]).max(0.0).sqrt();
    let h = 2.0 * Z_MAX / (TENSOR_NODES - 1) as f64;
    let simpson = |k: usize| match k {
        0 => 1.0,
        k if k == TENSOR_NODES - 1 => 1.0,
        k if k % 2 == 1 => 4.0,
        _ => 2.0,
    };
    // (weight, component mean, component variance)
    let mut nodes = Vec::with_capacity(TENSOR_NODES * TENSOR_NODES);
    for i in 0..TENSOR_NODES {
        let z1 = -Z_MAX + h * i as f64;
        let c1 = m[1] + sd1 * z1;
        for j in 0..TENSOR_NODES {
            let z0 = -Z_MAX + h * j as f64;
            let c0 = m[0] + reg * (c1 - m[1]) + sd0c * z0;
            let ln_true = normal_ln_pdf(s.ybar, c0 + c1 * mu0, (c1 * c1 * sd0 * sd0 + s2).sqrt());
            let ln_lit = normal_ln_pdf(
                s.ybar,
                c0 + c1 * mu0,
                ((c0 * c0 + c1 * c1) * sd0 * sd0 + s2).sqrt(),
            );
            let w = simpson(i) * simpson(j) * (-0.5 * (z0 * z0 + z1 * z1) + ln_true - ln_lit).exp();
            let prec = 1.0 / (sd0 * sd0) + c1 * c1 / s2;
            let cm = (mu0 / (sd0 * sd0) + c1 * (s.ybar - c0) / s2) / prec;
            nodes.push((w, cm, 1.0 / prec));
        }
    }
    let total: f64 = nodes.iter().map(|n| n.0).sum();
    if !(total.is_finite() && total > 0.0) {
        return Err(Error::Quadrature(
            "c^T c reweighting produced no mass".into(),
        ));
    }
    let mean = nodes.iter().map(|n| n.0 * n.1).sum::<f64>() / total;
    let var = nodes
        .iter()
        .map(|n| n.0 * ((n.1 - mean).powi(2) + n.2))
        .sum::<f64>()
        / total;
    let pdf = |w: f64| {
        nodes
            .iter()
            .map(|n| n.0 * normal_ln_pdf(w, n.1, n.2.sqrt()).exp())
            .sum::<f64>()
            / total
    };
    Ok(finish_grid(mean, var.sqrt(), &s.p, pdf))
}

/// Closed-form I-posterior of `method` for a linear surrogate. Point estimates use the training mean.
pub fn analytic_linear_iposterior(
    method: UpMethod,
    g: &GaussianPosterior,
    ys: &[f64],
    priors: &LinearIPriors,
    normalizer: EPostNormalizer,
) -> Result<AnalyticIPosterior> {
    let s = Setup::new(g, ys, priors)?;
    match method {
        UpMethod::Point { .. } => {
            let (mean, sd) = s.point();
            Ok(AnalyticIPosterior::Normal { mean, sd })
        }
        UpMethod::ELogLik => {
            let (mean, sd) = s.eloglik();
            Ok(AnalyticIPosterior::Normal { mean, sd })
        }
        UpMethod::ELik => elik(&s),
        UpMethod::EPost => match normalizer {
            EPostNormalizer::Exact => epost_exact(&s),
            EPostNormalizer::CTransposeC => epost_ctc(&s),
        },
    }
}

/// E-Post `(mean, sd)` without tabulating the density.
pub fn epost_linear_moments(
    g: &GaussianPosterior,
    ys: &[f64],
    priors: &LinearIPriors,
) -> Result<(f64, f64)> {
    let s = Setup::new(g, ys, priors)?;
    let mean = s.over_slope(|c| s.epost_conditional(c).0, true)?;
    let second = s.over_slope(
        |c| {
            let (m, v) = s.epost_conditional(c);
            (m - mean).powi(2) + v
        },
        true,
    )?;
    Ok((mean, second.sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn case1(sigma_a: f64) -> GaussianPosterior {
        let (mean, cov) = match sigma_a {
            0.1 => ([0.499209, 1.998723], [0.024983, 0.033307, 0.055514]),
            0.5 => ([0.48059, 1.96865], [0.61435, 0.81687, 1.36315]),
            _ => ([0.42663, 1.88126], [2.33873, 3.08404, 5.16577]),
        };
        GaussianPosterior {
            mean: mean.to_vec(),
            cov: vec![vec![cov[0], cov[1]], vec![cov[1], cov[2]]],
        }
    }

    const PRIORS: LinearIPriors = LinearIPriors {
        mu0: 0.0,
        sd0: 1.0,
        sigma_i: 0.1,
    };

    fn run(m: UpMethod, sa: f64) -> AnalyticIPosterior {
        analytic_linear_iposterior(m, &case1(sa), &[-0.5], &PRIORS, EPostNormalizer::Exact).unwrap()
    }

    #[test]
    fn reference_moments() {
        // (sigma_a, method, mean, sd, abs tol)
        let cases = [
            (0.1, UpMethod::POINT, -0.49868, 0.04997, 2e-5),
            (0.5, UpMethod::POINT, -0.49682, 0.05073, 2e-5),
            (1.0, UpMethod::POINT, -0.49117, 0.05308, 2e-5),
            (0.1, UpMethod::ELogLik, -0.50006, 0.04963, 2e-5),
            (0.5, UpMethod::ELogLik, -0.52342, 0.04365, 2e-5),
            (1.0, UpMethod::ELogLik, -0.55391, 0.03387, 2e-5),
            (0.1, UpMethod::ELik, -0.49486, 0.06495, 2e-5),
            (0.5, UpMethod::ELik, -0.32828, 0.54957, 2e-5),
            (1.0, UpMethod::ELik, -0.30215, 0.68582, 2e-5),
            (0.1, UpMethod::EPost, -0.497179, 0.063819, 2e-5),
            (0.5, UpMethod::EPost, -0.467360, 0.503599, 2e-5),
            (1.0, UpMethod::EPost, -0.519615, 1.021937, 2e-5),
        ];
        for (sa, m, mean, sd, tol) in cases {
            let r = run(m, sa);
            assert!(
                (r.mean() - mean).abs() < tol,
                "{} {sa}: mean {} vs {mean}",
                m.label(),
                r.mean()
            );
            assert!(
                (r.sd() - sd).abs() < tol,
                "{} {sa}: sd {} vs {sd}",
                m.label(),
                r.sd()
            );
        }
    }

    #[test]
    fn grids_integrate_to_one() {
        for m in [UpMethod::ELik, UpMethod::EPost] {
            let r = run(m, 0.5);
            if let AnalyticIPosterior::Grid { omega, density, .. } = &r {
                let h = omega[1] - omega[0];
                let z: f64 = density.windows(2).map(|p| 0.5 * h * (p[0] + p[1])).sum();
                assert!((z - 1.0).abs() < 1e-4, "{}: {z}", m.label());
            } else {
                panic!("expected grid");
            }
        }
    }

    #[test]
    fn moments_helper_matches_grid_variant() {
        let (m, s) = epost_linear_moments(&case1(0.1), &[-0.5], &PRIORS).unwrap();
        let r = run(UpMethod::EPost, 0.1);
        assert!((m - r.mean()).abs() < 1e-12 && (s - r.sd()).abs() < 1e-12);
    }

    #[test]
    fn ctc_normalizer_differs_but_stays_close_when_certain() {
        let exact = run(UpMethod::EPost, 0.1);
        let lit = analytic_linear_iposterior(
            UpMethod::EPost,
            &case1(0.1),
            &[-0.5],
            &PRIORS,
            EPostNormalizer::CTransposeC,
        )
        .unwrap();
        assert!((exact.mean() - lit.mean()).abs() < 0.01);
        assert!(exact.mean() != lit.mean());
    }

    #[test]
    fn degenerate_training_posterior_collapses_methods() {
        let g = GaussianPosterior {
            mean: vec![0.5, 2.0],
            cov: vec![vec![0.0, 0.0], vec![0.0, 0.0]],
        };
        let p = analytic_linear_iposterior(
            UpMethod::POINT,
            &g,
            &[-0.5],
            &PRIORS,
            EPostNormalizer::Exact,
        )
        .unwrap();
        for m in [UpMethod::ELogLik, UpMethod::ELik, UpMethod::EPost] {
            let r = analytic_linear_iposterior(m, &g, &[-0.5], &PRIORS, EPostNormalizer::Exact)
                .unwrap();
            assert!((r.mean() - p.mean()).abs() < 1e-9, "{}", m.label());
            assert!((r.sd() - p.sd()).abs() < 1e-9, "{}", m.label());
        }
    }

    #[test]
    fn eloglik_variance_decreases_with_slope_variance() {
        let mut last = f64::INFINITY;
        for v in [0.0, 0.01, 0.1, 1.0, 10.0] {
            let g = GaussianPosterior {
                mean: vec![0.5, 2.0],
                cov: vec![vec![0.1, 0.0], vec![0.0, v]],
            };
            let r = analytic_linear_iposterior(
                UpMethod::ELogLik,
                &g,
                &[-0.5],
                &PRIORS,
                EPostNormalizer::Exact,
            )
            .unwrap();
            assert!(r.sd() < last);
            last = r.sd();
        }
    }

    #[test]
    fn slope_only_closed_forms() {
        // c ~ N(2, 0.3^2), y = 1, prior N(0, 1), sigma_i = 0.5
        let g = GaussianPosterior {
            mean: vec![2.0],
            cov: vec![vec![0.09]],
        };
        let p = LinearIPriors {
            mu0: 0.0,
            sd0: 1.0,
            sigma_i: 0.5,
        };
        let pt =
            analytic_linear_iposterior(UpMethod::POINT, &g, &[1.0], &p, EPostNormalizer::Exact)
                .unwrap();
        assert!((pt.sd().powi(2) - 1.0 / 17.0).abs() < 1e-12);
        assert!((pt.mean() - 8.0 / 17.0).abs() < 1e-12);
        let el =
            analytic_linear_iposterior(UpMethod::ELogLik, &g, &[1.0], &p, EPostNormalizer::Exact)
                .unwrap();
        assert!((el.sd().powi(2) - 1.0 / 17.36).abs() < 1e-12);
        assert!((el.mean() - 8.0 / 17.36).abs() < 1e-12);
    }

    #[test]
    fn slope_only_elik_is_bimodal_for_uncertain_slope() {
        let g = GaussianPosterior {
            mean: vec![0.05],
            cov: vec![vec![4.0]],
        };
        let p = LinearIPriors {
            mu0: 0.0,
            sd0: 1.0,
            sigma_i: 0.1,
        };
        let r = analytic_linear_iposterior(UpMethod::ELik, &g, &[1.5], &p, EPostNormalizer::Exact)
            .unwrap();
        assert_eq!(r.count_modes(1e-3), 2);
        let certain = GaussianPosterior {
            mean: vec![2.0],
            cov: vec![vec![0.01]],
        };
        let r = analytic_linear_iposterior(
            UpMethod::ELik,
            &certain,
            &[1.5],
            &p,
            EPostNormalizer::Exact,
        )
        .unwrap();
        assert_eq!(r.count_modes(1e-3), 1);
    }

    #[test]
    fn rejects_bad_inputs() {
        let g = case1(0.1);
        assert!(analytic_linear_iposterior(
            UpMethod::ELik,
            &g,
            &[],
            &PRIORS,
            EPostNormalizer::Exact
        )
        .is_err());
        let bad = LinearIPriors { sd0: 0.0, ..PRIORS };
        assert!(analytic_linear_iposterior(
            UpMethod::ELik,
            &g,
            &[0.0],
            &bad,
            EPostNormalizer::Exact
        )
        .is_err());
        assert!(analytic_linear_iposterior(
            UpMethod::EPost,
            &g,
            &[0.0, 1.0],
            &PRIORS,
            EPostNormalizer::CTransposeC
        )
        .is_err());
    }
}
