use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::dataset::Dataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SampleMode {
    /// Uniform sampling without replacement.
    Random,
    /// Equal counts of label 0 and label 1 (label 1 takes the extra row when odd).
    #[serde(rename = "balanced")]
    LabelBalanced,
}

/// Disjoint train and test row indices, each sorted ascending.
pub fn sample_indices(
    ds: &Dataset,
    n_train: usize,
    n_test: usize,
    mode: SampleMode,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut train, mut test) = match mode {
        SampleMode::Random => {
            let n = ds.n_rows();
            if n_train + n_test > n {
                return Err(Error::Sampling(format!(
                    "requested {} rows from a dataset of {n}",
                    n_train + n_test
                )));
            }
            let picked = index::sample(&mut rng, n, n_train + n_test).into_vec();
            let (a, b) = picked.split_at(n_train);
            (a.to_vec(), b.to_vec())
        }
        SampleMode::LabelBalanced => {
            let (zeros, ones) = ds.indices_by_class();
            let (train0, test0) = (n_train / 2, n_test / 2);
            let (train1, test1) = (n_train - train0, n_test - test0);
            let mut draw = |pool: &[usize], k_train: usize, k_test: usize, class: u8| {
                if pool.len() < k_train + k_test {
                    return Err(Error::Sampling(format!(
                        "class {class} has {} rows, {} needed",
                        pool.len(),
                        k_train + k_test
                    )));
                }
                let picked: Vec<usize> = index::sample(&mut rng, pool.len(), k_train + k_test)
                    .into_iter()
                    .map(|i| pool[i])
                    .collect();
                Ok((picked[..k_train].to_vec(), picked[k_train..].to_vec()))
            };
            let (mut tr0, mut te0) = draw(&zeros, train0, test0, 0)?;
            let (tr1, te1) = draw(&ones, train1, test1, 1)?;
            tr0.extend(tr1);
            te0.extend(te1);
            (tr0, te0)
        }
    };
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

pub fn sample_split(
    ds: &Dataset,
    n_train: usize,
    n_test: usize,
    mode: SampleMode,
    seed: u64,
) -> Result<(Dataset, Dataset)> {
    let (train, test) = sample_indices(ds, n_train, n_test, mode, seed)?;
    Ok((ds.subset(&train)?, ds.subset(&test)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy(n: usize) -> Dataset {
        let rows = (0..n).map(|i| vec![i as f64]).collect();
        let labels = (0..n).map(|i| (i % 3 == 0) as u8 as f64).collect();
        Dataset::new(rows, labels, vec!["x".into()]).unwrap()
    }

    #[test]
    fn random_split_is_disjoint_and_sized() {
        let ds = toy(3000);
        let (tr, te) = sample_indices(&ds, 1000, 1000, SampleMode::Random, 1).unwrap();
        assert_eq!(tr.len(), 1000);
        assert_eq!(te.len(), 1000);
        assert!(tr.iter().all(|i| te.binary_search(i).is_err()));
    }

    #[test]
    fn balanced_split_has_equal_classes() {
        let ds = toy(60);
        let (train, test) = sample_split(&ds, 10, 7, SampleMode::LabelBalanced, 9).unwrap();
        let ones = |d: &Dataset| d.labels().iter().filter(|&&y| y == 1.0).count();
        assert_eq!(ones(&train), 5);
        assert_eq!(train.n_rows() - ones(&train), 5);
        assert_eq!(ones(&test), 4);
        assert_eq!(test.n_rows(), 7);
    }

    #[test]
    fn same_seed_same_indices() {
        let ds = toy(500);
        let a = sample_indices(&ds, 100, 50, SampleMode::Random, 42).unwrap();
        let b = sample_indices(&ds, 100, 50, SampleMode::Random, 42).unwrap();
        let c = sample_indices(&ds, 100, 50, SampleMode::Random, 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn insufficient_rows_are_errors() {
        let ds = toy(30);
        assert!(matches!(
            sample_indices(&ds, 20, 20, SampleMode::Random, 0),
            Err(Error::Sampling(_))
        ));
        // 10 rows of class 1 exist; 12 are needed.
        assert!(matches!(
            sample_indices(&ds, 12, 12, SampleMode::LabelBalanced, 0),
            Err(Error::Sampling(_))
        ));
    }
}
