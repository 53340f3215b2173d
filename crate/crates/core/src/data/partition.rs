//! Five-step re-partitioning of a pooled dataset across three parties.
//!
//! Step 1 splits the pool into equal contiguous thirds. Each later step moves
//! `floor(|P2| / 2)` random rows from party 2 to party 1, then
//! `floor(0.66 * |P3|)` random rows from party 3 to party 2. On 3000 rows this
//! yields party counts 1000/1000/1000, 1500/1160/340, 2080/804/116,
//! 2482/478/40 and 2721/265/14.

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const N_STEPS: usize = 5;
pub const N_PARTIES: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionStep {
    /// 1-based step number.
    pub step: usize,
    /// Row indices held by each party.
    pub parties: Vec<Vec<usize>>,
    /// Rows moved from party 2 to party 1 to reach this step.
    pub moved_2_to_1: Vec<usize>,
    /// Rows moved from party 3 to party 2 to reach this step.
    pub moved_3_to_2: Vec<usize>,
}

impl PartitionStep {
    pub fn counts(&self) -> Vec<usize> {
        self.parties.iter().map(Vec::len).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionSpec {
    pub seed: u64,
    pub steps: Vec<PartitionStep>,
}

/// One line of a partition manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub step: usize,
    pub party: usize,
    pub row_indices: Vec<usize>,
}

impl PartitionSpec {
    pub fn step(&self, step: usize) -> Result<&PartitionStep> {
        self.steps
            .get(step.wrapping_sub(1))
            .ok_or_else(|| Error::Partition(format!("step must be in 1..={N_STEPS}, got {step}")))
    }

    pub fn counts_table(&self) -> Vec<Vec<usize>> {
        self.steps.iter().map(PartitionStep::counts).collect()
    }

    pub fn manifest(&self) -> Vec<ManifestEntry> {
        self.steps
            .iter()
            .flat_map(|s| {
                s.parties.iter().enumerate().map(move |(p, rows)| ManifestEntry {
                    step: s.step,
                    party: p + 1,
                    row_indices: rows.clone(),
                })
            })
            .collect()
    }
}

/// Rows moved by `floor(numer / denom * n)`, computed in integers.
fn share(n: usize, numer: usize, denom: usize) -> usize {
    n * numer / denom
}

fn move_random(from: &mut Vec<usize>, to: &mut Vec<usize>, k: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut picked = index::sample(rng, from.len(), k).into_vec();
    let moved: Vec<usize> = picked.iter().map(|&i| from[i]).collect();
    picked.sort_unstable();
    for &i in picked.iter().rev() {
        from.remove(i);
    }
    to.extend_from_slice(&moved);
    moved
}

pub fn partition_schedule(n_rows: usize, seed: u64) -> Result<PartitionSpec> {
    if n_rows < N_PARTIES || !n_rows.is_multiple_of(N_PARTIES) {
        return Err(Error::Partition(format!(
            "pool of {n_rows} rows cannot be split into {N_PARTIES} equal parties"
        )));
    }
    let third = n_rows / N_PARTIES;
    let mut parties: Vec<Vec<usize>> = (0..N_PARTIES).map(|p| (p * third..(p + 1) * third).collect()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut steps = vec![PartitionStep {
        step: 1,
        parties: parties.clone(),
        moved_2_to_1: Vec::new(),
        moved_3_to_2: Vec::new(),
    }];
    for step in 2..=N_STEPS {
        let (first, rest) = parties.split_at_mut(1);
        let (second, third) = rest.split_at_mut(1);
        let k12 = share(second[0].len(), 1, 2);
        let moved_2_to_1 = move_random(&mut second[0], &mut first[0], k12, &mut rng);
        let k23 = share(third[0].len(), 66, 100);
        let moved_3_to_2 = move_random(&mut third[0], &mut second[0], k23, &mut rng);
        if parties.iter().any(Vec::is_empty) {
            return Err(Error::Partition(format!("a party is empty at step {step}")));
        }
        steps.push(PartitionStep {
            step,
            parties: parties.clone(),
            moved_2_to_1,
            moved_3_to_2,
        });
    }
    Ok(PartitionSpec { seed, steps })
}
