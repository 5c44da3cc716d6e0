//! Exact E-Post and E-Lik posteriors for finite inputs, parameters and outputs.

use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiscreteMethod {
    #[serde(rename = "epost")]
    EPost,
    #[serde(rename = "elik")]
    ELik,
}

/// Probability tables written as fractions such as `"1/4"`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscreteTables {
    pub p_omega: Vec<String>,
    pub p_theta: Vec<String>,
    /// `p_y[omega][theta][y]`
    pub p_y: Vec<Vec<Vec<String>>>,
}

fn parse(s: &str) -> Result<BigRational> {
    let t = s.trim();
    let r = BigRational::from_str(t)
        .or_else(|_| BigInt::from_str(t).map(BigRational::from_integer))
        .map_err(|_| Error::Parse(format!("not a fraction: {s:?}")))?;
    if r < BigRational::zero() {
        return Err(Error::invalid(format!("negative probability {s}")));
    }
    Ok(r)
}

fn pmf(v: &[String], what: &str) -> Result<Vec<BigRational>> {
    if v.is_empty() {
        return Err(Error::invalid(format!("{what} is empty")));
    }
    let p = v.iter().map(|s| parse(s)).collect::<Result<Vec<_>>>()?;
    let total: BigRational = p.iter().sum();
    if !total.is_one() {
        return Err(Error::NotNormalized(format!("{what} sums to {total}")));
    }
    Ok(p)
}

/// Posterior `P(omega = j | y = y_obs)` for every `j`, in exact arithmetic.
pub fn discrete_posterior(
    tables: &DiscreteTables,
    method: DiscreteMethod,
    y_obs: usize,
) -> Result<Vec<BigRational>> {
    let pw = pmf(&tables.p_omega, "p(omega)")?;
    let pt = pmf(&tables.p_theta, "p(theta)")?;
    if tables.p_y.len() != pw.len() {
        return Err(Error::DimensionMismatch {
            expected: pw.len(),
            got: tables.p_y.len(),
        });
    }
    let mut lik: Vec<Vec<BigRational>> = Vec::with_capacity(pw.len());
    let mut n_y = None;
    for (j, row) in tables.p_y.iter().enumerate() {
        if row.len() != pt.len() {
            return Err(Error::DimensionMismatch {
                expected: pt.len(),
                got: row.len(),
            });
        }
        let mut r = Vec::with_capacity(pt.len());
        for (i, cell) in row.iter().enumerate() {
            if *n_y.get_or_insert(cell.len()) != cell.len() {
                return Err(Error::invalid(
                    "p(y | omega, theta) rows have different lengths",
                ));
            }
            let p = pmf(cell, &format!("p(y | omega={j}, theta={i})"))?;
            let v = p
                .get(y_obs)
                .cloned()
                .ok_or_else(|| Error::invalid(format!("y = {y_obs} outside the output support")))?;
            r.push(v);
        }
        lik.push(r);
    }
    let nw = pw.len();
    let unnorm: Vec<BigRational> = match method {
        DiscreteMethod::ELik => (0..nw)
            .map(|j| {
                &pw[j]
                    * pt.iter()
                        .enumerate()
                        .map(|(i, t)| &lik[j][i] * t)
                        .sum::<BigRational>()
            })
            .collect(),
        DiscreteMethod::EPost => {
            let mut out = vec![BigRational::zero(); nw];
            for (i, t) in pt.iter().enumerate() {
                let z: BigRational = (0..nw).map(|j| &lik[j][i] * &pw[j]).sum();
                if z.is_zero() {
                    if t.is_zero() {
                        continue;
                    }
                    return Err(Error::invalid(format!(
                        "y = {y_obs} has zero evidence under theta = {i}"
                    )));
                }
                for j in 0..nw {
                    out[j] += t * &lik[j][i] * &pw[j] / &z;
                }
            }
            out
        }
    };
    let total: BigRational = unnorm.iter().sum();
    if total.is_zero() {
        return Err(Error::invalid(format!(
            "y = {y_obs} has zero marginal probability"
        )));
    }
    Ok(unnorm.into_iter().map(|v| v / &total).collect())
}

/// Two inputs, two parameter values and a binary output; the only pair that
/// differs is `p(y=0 | omega=0, theta=0) = 1/4`.
pub fn reference_counterexample() -> DiscreteTables {
    let half = || vec!["1/2".to_string(), "1/2".to_string()];
    DiscreteTables {
        p_omega: half(),
        p_theta: half(),
        p_y: vec![
            vec![vec!["1/4".into(), "3/4".into()], half()],
            vec![half(), half()],
        ],
    }
}
