//! Shared fixtures for the benchmarks.

use twostep_core::istep::{Components, IStepPriors};
use twostep_core::simulators::Measurements;
use twostep_core::surrogates::Surrogate;
use twostep_core::tstep::TPosterior;
use twostep_core::{cases, StreamRng};

/// Legendre surrogate with `s` synthetic coefficient draws scattered around a
/// fixed center, plus logistic-case measurements and priors.
pub struct PceFixture {
    pub surrogate: Surrogate,
    pub tpost: TPosterior,
    pub comps: Components,
    pub meas: Measurements,
    pub priors: IStepPriors,
}

pub fn pce_fixture(degree: usize, s: usize, seed: u64) -> PceFixture {
    use rand_distr::{Distribution, StandardNormal};
    let surrogate = Surrogate::new(cases::logistic_pce_surrogate(degree)).expect("valid spec");
    let mut rng = StreamRng::new(seed, 0);
    let center: Vec<f64> = (0..=degree).map(|k| 0.5 / (k + 1) as f64).collect();
    let draws: Vec<Vec<f64>> = (0..s)
        .map(|_| {
            let mut row: Vec<f64> = center
                .iter()
                .map(|c| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    c + 0.05 * z
                })
                .collect();
            row.push(0.02);
            row
        })
        .collect();
    let mut tpost = TPosterior::point_mass(center, Some(0.02));
    tpost.draws = draws;
    let comps = Components::from_tposterior(&tpost);
    PceFixture {
        surrogate,
        tpost,
        comps,
        meas: Measurements::new(vec![0.55, 0.57, 0.56, 0.58, 0.55]),
        priors: cases::logistic_istep_priors(),
    }
}
