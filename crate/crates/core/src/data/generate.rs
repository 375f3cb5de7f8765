use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::{Dataset, Label};
use crate::error::{MomError, Result};
use crate::rng::RngSeed;

/// Parameters of the corrupted two-Gaussian toy problem.
///
/// Inliers: `X | Y=+1 ~ N((-1,-1), 1.4 I)`, `X | Y=-1 ~ N((1,1), 1.4 I)`.
/// Outliers: `Y = +1`, `X ~ N((24,8), 0.1 I)`. Variances, not standard deviations.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ToyParams {
    pub positive_mean: [f64; 2],
    pub negative_mean: [f64; 2],
    pub inlier_variance: f64,
    pub outlier_mean: [f64; 2],
    pub outlier_variance: f64,
}

impl Default for ToyParams {
    fn default() -> Self {
        ToyParams {
            positive_mean: [-1.0, -1.0],
            negative_mean: [1.0, 1.0],
            inlier_variance: 1.4,
            outlier_mean: [24.0, 8.0],
            outlier_variance: 0.1,
        }
    }
}

const GAUSSIANS_SD: f64 = 1.4;

/// Toy training set: `n_inliers` split evenly between the classes (the extra
/// point of an odd count goes to `+1`) plus `n_outliers` labelled `+1`,
/// shuffled.
pub fn generate_toy(n_inliers: usize, n_outliers: usize, seed: RngSeed) -> Result<Dataset> {
    generate_toy_with(&ToyParams::default(), n_inliers, n_outliers, seed)
}

/// [`generate_toy`] with custom means and variances.
pub fn generate_toy_with(
    params: &ToyParams,
    n_inliers: usize,
    n_outliers: usize,
    seed: RngSeed,
) -> Result<Dataset> {
    if n_inliers < 2 {
        return Err(MomError::argument("toy dataset needs at least 2 inliers"));
    }
    if !(params.inlier_variance >= 0.0 && params.outlier_variance >= 0.0) {
        return Err(MomError::argument("variances must be non-negative"));
    }
    let mut rng = seed.rng();
    let n_pos = n_inliers.div_ceil(2);
    let n = n_inliers + n_outliers;
    let mut features = Vec::with_capacity(2 * n);
    let mut labels = Vec::with_capacity(n);
    let mut flags = Vec::with_capacity(n);

    let inlier_sd = params.inlier_variance.sqrt();
    for i in 0..n_inliers {
        let (mean, y) = if i < n_pos {
            (params.positive_mean, Label::Positive)
        } else {
            (params.negative_mean, Label::Negative)
        };
        push_gaussian(&mut features, mean, inlier_sd, &mut rng);
        labels.push(y);
        flags.push(false);
    }
    let outlier_sd = params.outlier_variance.sqrt();
    for _ in 0..n_outliers {
        push_gaussian(&mut features, params.outlier_mean, outlier_sd, &mut rng);
        labels.push(Label::Positive);
        flags.push(true);
    }
    Ok(Dataset::with_outlier_flags(2, features, labels, Some(flags))?.shuffled(&mut rng))
}

/// Two interlaced unit half-circles with isotropic Gaussian noise.
///
/// The upper moon is `(cos t, sin t)` labelled `+1`, the lower moon
/// `(1 - cos t, 0.5 - sin t)` labelled `-1`, with `t` evenly spaced on
/// `[0, pi]`. The upper moon receives `floor(n/2)` points.
pub fn generate_moons(n: usize, noise_sd: f64, seed: RngSeed) -> Result<Dataset> {
    if n < 2 {
        return Err(MomError::argument("moons dataset needs at least 2 points"));
    }
    if !(noise_sd >= 0.0 && noise_sd.is_finite()) {
        return Err(MomError::argument(format!("invalid noise sd {noise_sd}")));
    }
    let mut rng = seed.rng();
    let n_upper = n / 2;
    let n_lower = n - n_upper;
    let mut features = Vec::with_capacity(2 * n);
    let mut labels = Vec::with_capacity(n);
    for (count, y) in [(n_upper, Label::Positive), (n_lower, Label::Negative)] {
        for j in 0..count {
            let t = linspace_at(j, count, std::f64::consts::PI);
            let (x0, x1) = match y {
                Label::Positive => (t.cos(), t.sin()),
                Label::Negative => (1.0 - t.cos(), 0.5 - t.sin()),
            };
            features.push(x0);
            features.push(x1);
            labels.push(y);
        }
    }
    if noise_sd > 0.0 {
        let noise = Normal::new(0.0, noise_sd).expect("sd checked above");
        for v in &mut features {
            *v += noise.sample(&mut rng);
        }
    }
    Ok(Dataset::new(2, features, labels)?.shuffled(&mut rng))
}

/// Balanced blobs `N((-1,-1), 1.4^2 I)` labelled `+1` and `N((1,1), 1.4^2 I)`
/// labelled `-1`.
pub fn generate_gaussians(n: usize, seed: RngSeed) -> Result<Dataset> {
    if n < 2 {
        return Err(MomError::argument(
            "gaussians dataset needs at least 2 points",
        ));
    }
    let mut rng = seed.rng();
    let n_pos = n.div_ceil(2);
    let mut features = Vec::with_capacity(2 * n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let (mean, y) = if i < n_pos {
            ([-1.0, -1.0], Label::Positive)
        } else {
            ([1.0, 1.0], Label::Negative)
        };
        push_gaussian(&mut features, mean, GAUSSIANS_SD, &mut rng);
        labels.push(y);
    }
    Ok(Dataset::new(2, features, labels)?.shuffled(&mut rng))
}

fn push_gaussian<R: Rng + ?Sized>(out: &mut Vec<f64>, mean: [f64; 2], sd: f64, rng: &mut R) {
    let normal = Normal::new(0.0, sd).expect("positive sd");
    out.push(mean[0] + normal.sample(rng));
    out.push(mean[1] + normal.sample(rng));
}

fn linspace_at(j: usize, count: usize, end: f64) -> f64 {
    if count <= 1 {
        0.0
    } else {
        end * j as f64 / (count - 1) as f64
    }
}
