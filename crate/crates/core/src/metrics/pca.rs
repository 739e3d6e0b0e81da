//! Principal-component projection of labeled feature matrices, used to
//! inspect class separation in deep-feature space.

use serde::{Deserialize, Serialize};

use crate::ensemble::FeatureMatrix;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

const POWER_ITERATIONS: usize = 1000;
const CONVERGENCE: f64 = 1e-13;
/// Eigenvalues below this fraction of the total variance count as rank
/// deficiency rather than signal.
const RANK_FLOOR: f64 = 1e-12;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PcaProjection {
    /// Unit-norm principal directions, strongest first.
    pub components: [Vec<f64>; 3],
    /// Fraction of total variance along each component.
    pub explained: [f64; 3],
    /// Sample coordinates in the component basis, one triple per row.
    pub coordinates: Vec<[f64; 3]>,
    pub labels: Vec<u8>,
    /// Set when the data had rank < 3; trailing components then carry zero
    /// variance and arbitrary orthonormal directions.
    pub reduced_rank: bool,
}

/// Column-centered copy of the features in f64, plus column count.
fn centered<F: Scalar>(features: &FeatureMatrix<F>) -> (Vec<f64>, usize, usize) {
    let (n, d) = (features.len(), features.dim());
    let mut data = vec![0.0f64; n * d];
    for i in 0..n {
        for (j, &v) in features.row(i).iter().enumerate() {
            data[i * d + j] = v.to_f64().unwrap_or(f64::NAN);
        }
    }
    for j in 0..d {
        let mean = (0..n).map(|i| data[i * d + j]).sum::<f64>() / n as f64;
        for i in 0..n {
            data[i * d + j] -= mean;
        }
    }
    (data, n, d)
}

fn normalize(v: &mut [f64]) -> f64 {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        for x in v.iter_mut() {
            *x /= norm;
        }
    }
    norm
}

fn subtract_projections(v: &mut [f64], basis: &[Vec<f64>]) {
    for b in basis {
        let dot: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
        for (x, y) in v.iter_mut().zip(b) {
            *x -= dot * y;
        }
    }
}

/// Makes the largest-magnitude coordinate positive (first one on ties), so
/// the direction of each component is reproducible.
fn canonical_sign(v: &mut [f64]) {
    let mut pivot = 0;
    for (j, x) in v.iter().enumerate() {
        if x.abs() > v[pivot].abs() {
            pivot = j;
        }
    }
    if v[pivot] < 0.0 {
        for x in v.iter_mut() {
            *x = -*x;
        }
    }
}

/// Leading `k` eigenpairs of the sample covariance (divisor n − 1) by power
/// iteration with deflation. Returns unit directions, their variances, and
/// whether the data ran out of rank before `k` components.
pub fn principal_components<F: Scalar>(
    features: &FeatureMatrix<F>,
    k: usize,
) -> Result<(Vec<Vec<f64>>, Vec<f64>, bool)> {
    let (n, d) = (features.len(), features.dim());
    if k == 0 || k > d {
        return Err(Error::Argument(format!(
            "component count {k} outside 1..={d}"
        )));
    }
    if n < 2 {
        return Err(Error::Argument("need at least two samples".into()));
    }
    let (data, n, d) = centered(features);

    // Explicit covariance: d is a few hundred at most for our features.
    let mut cov = vec![0.0f64; d * d];
    for row in data.chunks_exact(d) {
        for (a, &ra) in row.iter().enumerate() {
            for (b, &rb) in row.iter().enumerate().skip(a) {
                cov[a * d + b] += ra * rb;
            }
        }
    }
    let scale = 1.0 / (n - 1) as f64;
    for a in 0..d {
        for b in a..d {
            cov[a * d + b] *= scale;
            cov[b * d + a] = cov[a * d + b];
        }
    }
    let total_variance: f64 = (0..d).map(|j| cov[j * d + j]).sum();

    let mut rng = crate::rng::seeded(0x90ca);
    let mut components: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut variances = Vec::with_capacity(k);
    let mut reduced_rank = false;
    for _ in 0..k {
        let mut v = random_unit(d, &mut rng, &components);
        let mut lambda = 0.0;
        for _ in 0..POWER_ITERATIONS {
            let mut next = vec![0.0f64; d];
            for (a, row) in cov.chunks_exact(d).enumerate() {
                next[a] = row.iter().zip(&v).map(|(c, x)| c * x).sum();
            }
            subtract_projections(&mut next, &components);
            lambda = normalize(&mut next);
            if lambda <= RANK_FLOOR * total_variance.max(1.0) {
                lambda = 0.0;
                break;
            }
            let drift: f64 =
                next.iter().zip(&v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            v = next;
            if drift < CONVERGENCE {
                break;
            }
        }
        if lambda == 0.0 {
            // Rank exhausted: keep an arbitrary orthonormal filler direction.
            reduced_rank = true;
            v = random_unit(d, &mut rng, &components);
            variances.push(0.0);
        } else {
            variances.push(v.iter().enumerate().fold(0.0, |acc, (a, &va)| {
                acc + va * (0..d).map(|b| cov[a * d + b] * v[b]).sum::<f64>()
            }));
        }
        canonical_sign(&mut v);
        components.push(v);
    }

    // Deflation can leave hairline inversions between near-equal eigenvalues.
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| variances[b].total_cmp(&variances[a]));
    let components = order.iter().map(|&i| components[i].clone()).collect();
    let variances = order.iter().map(|&i| variances[i]).collect();
    Ok((components, variances, reduced_rank))
}

fn random_unit(
    d: usize,
    rng: &mut rand_chacha::ChaCha8Rng,
    orthogonal_to: &[Vec<f64>],
) -> Vec<f64> {
    use rand::Rng;
    loop {
        let mut v: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        subtract_projections(&mut v, orthogonal_to);
        if normalize(&mut v) > 1e-6 {
            return v;
        }
    }
}

/// Projects the features onto their top three principal components.
pub fn pca_top3<F: Scalar>(features: &FeatureMatrix<F>) -> Result<PcaProjection> {
    let (n, d) = (features.len(), features.dim());
    if n < 4 {
        return Err(Error::Argument(format!("need at least 4 samples, got {n}")));
    }
    if d < 3 {
        return Err(Error::Argument(format!("need at least 3 features, got {d}")));
    }
    let (components_vec, variances, reduced_rank) = principal_components(features, 3)?;
    let mut components: [Vec<f64>; 3] = Default::default();
    for (slot, c) in components.iter_mut().zip(components_vec) {
        *slot = c;
    }

    let total: f64 = {
        let (data, n, d) = centered(features);
        (0..d)
            .map(|j| {
                (0..n).map(|i| data[i * d + j] * data[i * d + j]).sum::<f64>()
                    / (n - 1) as f64
            })
            .sum()
    };
    let explained = if total > 0.0 {
        [variances[0] / total, variances[1] / total, variances[2] / total]
    } else {
        [0.0; 3]
    };

    let (data, n, d) = centered(features);
    let mut coordinates = Vec::with_capacity(n);
    for row in data.chunks_exact(d) {
        let mut point = [0.0f64; 3];
        for (p, c) in point.iter_mut().zip(&components) {
            *p = row.iter().zip(c).map(|(x, y)| x * y).sum();
        }
        coordinates.push(point);
    }
    Ok(PcaProjection {
        components,
        explained,
        coordinates,
        labels: features.labels().to_vec(),
        reduced_rank: reduced_rank || total == 0.0,
    })
}
