//! Seeded two-class generator with skewed, heavy-tailed and partly missing
//! columns.
//!
//! Rows come from three regimes that shift the latent factors. The training
//! pool lists regime 0, then 1, then 2 in contiguous blocks, so splitting it
//! into contiguous thirds hands each party a different input distribution.
//! The test set mixes all regimes. The labelling rule is shared by every
//! regime; only the covariates move.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, StudentT};
use serde::{Deserialize, Serialize};

use super::dataset::{Dataset, MISSING};
use crate::error::{Error, Result};

pub const N_REGIMES: usize = 3;
const N_LATENT: usize = 6;
const N_INFORMATIVE: usize = 12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    /// Training pool size; split into equal regime blocks.
    pub n_pool: usize,
    pub n_test: usize,
    /// At least 12; columns past the informative ones are noise.
    pub n_features: usize,
    pub missing_rate: f64,
    /// Scale of the logistic noise added to the latent score before
    /// thresholding. Larger values lower the attainable accuracy.
    pub label_noise: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            n_pool: 3000,
            n_test: 1000,
            n_features: 30,
            missing_rate: 0.05,
            label_noise: 0.35,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticData {
    pub pool: Dataset,
    pub test: Dataset,
    /// Regime of every pool row.
    pub pool_regimes: Vec<usize>,
}

fn regime_shift(regime: usize) -> [f64; N_LATENT] {
    match regime {
        0 => [-0.6, 0.4, 0.0, 0.5, -0.3, 0.0],
        1 => [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        _ => [0.6, -0.4, 0.3, -0.5, 0.3, 0.4],
    }
}

fn latent_score(z: &[f64; N_LATENT]) -> f64 {
    1.3 * z[0] - 1.0 * z[1] + 0.8 * z[2] * z[3] + 1.1 * (1.5 * z[4]).sin() + 0.9 * ((z[5] > 0.5) as u8 as f64) - 0.35
}

fn draw_row(rng: &mut ChaCha8Rng, regime: usize, cfg: &SyntheticConfig, heavy: &StudentT<f64>) -> (Vec<f64>, f64) {
    let shift = regime_shift(regime);
    let mut z = [0.0; N_LATENT];
    for (zi, s) in z.iter_mut().zip(shift) {
        let e: f64 = StandardNormal.sample(rng);
        *zi = e + s;
    }
    let u: f64 = rng.random_range(1e-12..1.0);
    let logistic_noise = (u / (1.0 - u)).ln() * cfg.label_noise;
    let y = (latent_score(&z) + logistic_noise > 0.0) as u8 as f64;

    let mut row = Vec::with_capacity(cfg.n_features);
    row.push((0.7 * z[0]).exp());
    row.push(3.0 * z[1] + 10.0);
    row.push(z[2]);
    row.push(z[3].powi(3));
    row.push(z[4] + gauss(rng, 0.05));
    row.push(z[5]);
    row.push(z[0] + gauss(rng, 0.6));
    row.push((z[1] + gauss(rng, 0.6)).exp());
    row.push(z[2] * z[3] + gauss(rng, 0.3));
    row.push(z[4] - z[5] + gauss(rng, 0.5));
    row.push((100.0 * (z[0] + gauss(rng, 0.8))).round());
    row.push((z[1].abs() * 2.0).floor());
    debug_assert_eq!(row.len(), N_INFORMATIVE);
    for j in N_INFORMATIVE..cfg.n_features {
        let v = match j % 4 {
            0 => heavy.sample(rng),
            1 => gauss(rng, 1.0).exp(),
            2 => rng.random_range(0..10) as f64,
            _ => gauss(rng, 2.0) + regime as f64,
        };
        row.push(v);
    }
    for v in row.iter_mut() {
        if rng.random::<f64>() < cfg.missing_rate {
            *v = MISSING;
        }
    }
    (row, y)
}

fn gauss(rng: &mut ChaCha8Rng, scale: f64) -> f64 {
    let e: f64 = StandardNormal.sample(rng);
    e * scale
}

fn names(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("f{i:02}")).collect()
}

pub fn generate(cfg: &SyntheticConfig) -> Result<SyntheticData> {
    if cfg.n_features < N_INFORMATIVE {
        return Err(Error::InvalidInput(format!(
            "synthetic data needs at least {N_INFORMATIVE} features"
        )));
    }
    if cfg.n_pool == 0 || cfg.n_test == 0 {
        return Err(Error::EmptyDataset);
    }
    if !(0.0..1.0).contains(&cfg.missing_rate) || !(cfg.label_noise >= 0.0) {
        return Err(Error::InvalidInput(
            "missing_rate must lie in [0, 1) and label_noise be >= 0".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let heavy = StudentT::new(2.5).expect("valid degrees of freedom");

    let mut rows = Vec::with_capacity(cfg.n_pool);
    let mut labels = Vec::with_capacity(cfg.n_pool);
    let mut pool_regimes = Vec::with_capacity(cfg.n_pool);
    for i in 0..cfg.n_pool {
        let regime = i * N_REGIMES / cfg.n_pool;
        let (row, y) = draw_row(&mut rng, regime, cfg, &heavy);
        rows.push(row);
        labels.push(y);
        pool_regimes.push(regime);
    }
    let mut test_rows = Vec::with_capacity(cfg.n_test);
    let mut test_labels = Vec::with_capacity(cfg.n_test);
    for _ in 0..cfg.n_test {
        let regime = rng.random_range(0..N_REGIMES);
        let (row, y) = draw_row(&mut rng, regime, cfg, &heavy);
        test_rows.push(row);
        test_labels.push(y);
    }
    let pool = Dataset::new(rows, labels, names(cfg.n_features))?.with_seed(cfg.seed);
    let test = Dataset::new(test_rows, test_labels, names(cfg.n_features))?.with_seed(cfg.seed);
    Ok(SyntheticData {
        pool,
        test,
        pool_regimes,
    })
}
