//! Compressing training-posterior draws into weighted centroids.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prob::StreamRng;

const MAX_LLOYD_ITERS: usize = 200;
const MAX_REPAIRS: usize = 10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterSet {
    /// Member means in the original (unstandardized) coordinates.
    pub centroids: Vec<Vec<f64>>,
    /// Occupancy fractions; they sum to one.
    pub weights: Vec<f64>,
    /// Cluster index of every input draw.
    pub assignments: Vec<usize>,
}

impl ClusterSet {
    pub fn len(&self) -> usize {
        self.centroids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centroids.is_empty()
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(p: &[f64], centers: &[Vec<f64>]) -> (usize, f64) {
    centers
        .iter()
        .enumerate()
        .map(|(k, c)| (k, sq_dist(p, c)))
        .fold((0, f64::INFINITY), |b, x| if x.1 < b.1 { x } else { b })
}

/// k-means++ seeding followed by Lloyd iterations on per-dimension
/// standardized draws.
pub fn cluster_draws(draws: &[Vec<f64>], l: usize, rng: &mut StreamRng) -> Result<ClusterSet> {
    let s = draws.len();
    if s == 0 {
        return Err(Error::EmptyInput("draws to cluster"));
    }
    if l == 0 || l > s {
        return Err(Error::invalid(format!(
            "need 1 <= L <= {s} clusters, got {l}"
        )));
    }
    let d = draws[0].len();
    if draws.iter().any(|r| r.len() != d) {
        return Err(Error::invalid("draws have inconsistent widths"));
    }
    if draws.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::invalid("draws must be finite"));
    }
    let mean: Vec<f64> = (0..d)
        .map(|k| draws.iter().map(|r| r[k]).sum::<f64>() / s as f64)
        .collect();
    let scale: Vec<f64> = (0..d)
        .map(|k| {
            let v = draws.iter().map(|r| (r[k] - mean[k]).powi(2)).sum::<f64>() / s as f64;
            if v > 0.0 {
                v.sqrt()
            } else {
                1.0
            }
        })
        .collect();
    let z: Vec<Vec<f64>> = draws
        .iter()
        .map(|r| {
            r.iter()
                .enumerate()
                .map(|(k, v)| (v - mean[k]) / scale[k])
                .collect()
        })
        .collect();

    let mut centers = vec![z[rng.random_range(0..s)].clone()];
    let mut d2: Vec<f64> = z.iter().map(|p| sq_dist(p, &centers[0])).collect();
    while centers.len() < l {
        let total: f64 = d2.iter().sum();
        if total <= 0.0 {
            return Err(Error::invalid(format!(
                "only {} distinct draws for {l} clusters",
                centers.len()
            )));
        }
        let u = rng.random::<f64>() * total;
        let mut acc = 0.0;
        let mut pick = s - 1;
        for (i, w) in d2.iter().enumerate() {
            acc += w;
            if acc > u && *w > 0.0 {
                pick = i;
                break;
            }
        }
        if d2[pick] == 0.0 {
            pick = (0..s).rev().find(|&i| d2[i] > 0.0).unwrap_or(pick);
        }
        centers.push(z[pick].clone());
        for (i, p) in z.iter().enumerate() {
            d2[i] = d2[i].min(sq_dist(p, &z[pick]));
        }
    }

    let mut assign: Vec<usize> = z.iter().map(|p| nearest(p, &centers).0).collect();
    let mut repairs = 0;
    for _ in 0..MAX_LLOYD_ITERS {
        let mut sums = vec![vec![0.0; d]; l];
        let mut counts = vec![0usize; l];
        for (p, &a) in z.iter().zip(&assign) {
            counts[a] += 1;
            for k in 0..d {
                sums[a][k] += p[k];
            }
        }
        if let Some(empty) = counts.iter().position(|&c| c == 0) {
            repairs += 1;
            if repairs > MAX_REPAIRS {
                return Err(Error::invalid(
                    "k-means left a cluster empty after repeated repairs",
                ));
            }
            // Move the draw farthest from its centroid into the empty cluster.
            let far = (0..s)
                .filter(|&i| counts[assign[i]] > 1)
                .max_by(|&i, &j| {
                    sq_dist(&z[i], &centers[assign[i]])
                        .total_cmp(&sq_dist(&z[j], &centers[assign[j]]))
                })
                .ok_or_else(|| Error::invalid("cannot repair an empty cluster"))?;
            centers[empty] = z[far].clone();
            assign[far] = empty;
            continue;
        }
        for k in 0..l {
            centers[k] = sums[k].iter().map(|v| v / counts[k] as f64).collect();
        }
        let next: Vec<usize> = z.iter().map(|p| nearest(p, &centers).0).collect();
        if next == assign {
            break;
        }
        assign = next;
    }

    let mut counts = vec![0usize; l];
    let mut sums = vec![vec![0.0; d]; l];
    for (r, &a) in draws.iter().zip(&assign) {
        counts[a] += 1;
        for k in 0..d {
            sums[a][k] += r[k];
        }
    }
    if counts.contains(&0) {
        return Err(Error::invalid("k-means ended with an empty cluster"));
    }
    let centroids = sums
        .into_iter()
        .zip(&counts)
        .map(|(v, &c)| v.into_iter().map(|x| x / c as f64).collect())
        .collect();
    let weights = counts.iter().map(|&c| c as f64 / s as f64).collect();
    Ok(ClusterSet {
        centroids,
        weights,
        assignments: assign,
    })
}
