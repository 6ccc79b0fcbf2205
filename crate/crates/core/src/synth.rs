//! Seeded synthetic datasets used by the tests, benches and shipped fixtures.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::data::Dataset;
use crate::linalg::{dot, DenseMatrix, DenseVector};

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// `y = A w + b + noise` with standard normal features and weights.
pub fn linear(m: usize, n: usize, noise_sd: f64, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w: Vec<f64> = (0..n).map(|_| normal(&mut rng)).collect();
    let b = normal(&mut rng);
    let a: Vec<f64> = (0..m * n).map(|_| normal(&mut rng)).collect();
    let a = DenseMatrix::from_row_major(m, n, a).expect("finite");
    let y: DenseVector = a
        .row_iter()
        .map(|row| dot(row, &w) + b + noise_sd * normal(&mut rng))
        .collect();
    named(Dataset::new(a, y).expect("shapes agree"), "x", "y")
}

/// One-dimensional `sin(x)/x` on `[-π, π]` with Gaussian noise.
pub fn sinc(m: usize, noise_sd: f64, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let xs: Vec<f64> = (0..m)
        .map(|_| rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI))
        .collect();
    let y: DenseVector = xs.iter().map(|&x| sinc_fn(x) + noise_sd * normal(&mut rng)).collect();
    let a = DenseMatrix::from_row_major(m, 1, xs).expect("finite");
    named(Dataset::new(a, y).expect("shapes agree"), "x", "y")
}

pub fn sinc_fn(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        x.sin() / x
    }
}

/// Descriptor-like table: `n` correlated columns driven by a handful of latent
/// factors, some constant and some integer-valued, with an activity target
/// that depends nonlinearly on the factors and spans roughly `[-1, 3]`.
pub fn descriptor_table(m: usize, n: usize, seed: u64) -> Dataset {
    const FACTORS: usize = 6;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let loadings: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..FACTORS).map(|_| normal(&mut rng)).collect())
        .collect();
    let kinds: Vec<u8> = (0..n)
        .map(|j| {
            if j % 37 == 5 {
                0
            } else if j % 5 == 1 {
                1
            } else {
                2
            }
        })
        .collect();
    let offsets: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..50.0)).collect();

    let mut data = Vec::with_capacity(m * n);
    let mut y = Vec::with_capacity(m);
    for _ in 0..m {
        let z: Vec<f64> = (0..FACTORS).map(|_| normal(&mut rng)).collect();
        for j in 0..n {
            let v = match kinds[j] {
                0 => offsets[j],
                1 => (dot(&loadings[j], &z) + 3.0).round().max(0.0),
                _ => offsets[j] + 2.0 * dot(&loadings[j], &z) + 0.3 * normal(&mut rng),
            };
            data.push(v);
        }
        let activity = 1.0 + 0.6 * z[0] - 0.4 * z[1]
            + 0.3 * (z[2] * z[3]).tanh()
            + 0.25 * (1.5 * z[4]).sin()
            + 0.1 * normal(&mut rng);
        y.push(activity);
    }
    let a = DenseMatrix::from_row_major(m, n, data).expect("finite");
    let mut d = Dataset::new(a, y.into()).expect("shapes agree");
    d.feature_names = Some((1..=n).map(|j| format!("D{j:03}")).collect());
    d.target_name = Some("pIC50".into());
    d
}

/// Keeps the `keep` columns with the largest absolute correlation with the
/// target, in their original order. Constant columns are never kept.
pub fn most_correlated(d: &Dataset, keep: usize) -> Dataset {
    let m = d.len() as f64;
    let y_mean = d.targets.iter().sum::<f64>() / m;
    let score = |j: usize| {
        let col: Vec<f64> = d.features.row_iter().map(|r| r[j]).collect();
        let mean = col.iter().sum::<f64>() / m;
        let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
        for (x, y) in col.iter().zip(d.targets.iter()) {
            sxy += (x - mean) * (y - y_mean);
            sxx += (x - mean).powi(2);
            syy += (y - y_mean).powi(2);
        }
        if sxx == 0.0 || syy == 0.0 {
            f64::NEG_INFINITY
        } else {
            (sxy / (sxx * syy).sqrt()).abs()
        }
    };
    let mut ranked: Vec<(usize, f64)> = (0..d.n_features()).map(|j| (j, score(j))).collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let mut cols: Vec<usize> = ranked
        .into_iter()
        .filter(|&(_, s)| s.is_finite())
        .take(keep)
        .map(|(j, _)| j)
        .collect();
    cols.sort_unstable();
    d.select_columns(&cols)
}

fn named(mut d: Dataset, prefix: &str, target: &str) -> Dataset {
    d.feature_names = Some((0..d.n_features()).map(|j| format!("{prefix}{j}")).collect());
    d.target_name = Some(target.into());
    d
}
