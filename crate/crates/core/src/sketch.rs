//! Greenwald-Khanna quantile summaries with an exact small-support mode.
//!
//! A sketch starts out exact: it stores every distinct value with its
//! multiplicity. Once the number of distinct values would exceed
//! `ceil(1 / epsilon)` it switches to the GK tuple form `(value, g, delta)`,
//! where `rmin(i) = g_0 + ... + g_i` and `rmax(i) = rmin(i) + delta_i` bound the
//! rank of entry `i`. Keeping `g_i + delta_i <= 2 * epsilon * n` for every
//! entry guarantees that some entry lies within `epsilon * n` of any target
//! rank.
//!
//! Compression is the simplified greedy pass (merge an entry into its
//! successor whenever the merged tuple still satisfies the bound) rather than
//! the banded variant; it preserves the same error guarantee.
//!
//! Merging interleaves entry lists and widens each entry's `delta` by the
//! `g + delta - 1` of the next entry taken from the other summary. The merged
//! rank error is at most `sum_k(epsilon_k * n_k) <= max_k(epsilon_k) * n`, so
//! there is no slack beyond the largest input epsilon. A merged sketch's
//! `epsilon` reports `max(target, sum_k(epsilon_k * n_k) / n)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "(f64, u64, u64)", into = "(f64, u64, u64)")]
pub struct SketchEntry {
    pub value: f64,
    pub g: u64,
    pub delta: u64,
}

impl From<(f64, u64, u64)> for SketchEntry {
    fn from((value, g, delta): (f64, u64, u64)) -> Self {
        SketchEntry { value, g, delta }
    }
}

impl From<SketchEntry> for (f64, u64, u64) {
    fn from(e: SketchEntry) -> Self {
        (e.value, e.g, e.delta)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileSketch {
    epsilon: f64,
    count: u64,
    exact: bool,
    entries: Vec<SketchEntry>,
    #[serde(skip)]
    since_compress: u64,
}

impl QuantileSketch {
    pub fn new(epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon <= 1.0) {
            return Err(Error::InvalidInput(format!(
                "sketch epsilon must lie in (0, 1], got {epsilon}"
            )));
        }
        Ok(QuantileSketch {
            epsilon,
            count: 0,
            exact: true,
            entries: Vec::new(),
            since_compress: 0,
        })
    }

    pub fn from_values(epsilon: f64, values: impl IntoIterator<Item = f64>) -> Result<Self> {
        let mut sk = QuantileSketch::new(epsilon)?;
        for v in values {
            sk.insert(v)?;
        }
        Ok(sk)
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    /// True while the sketch still holds every distinct value with its exact
    /// multiplicity.
    pub fn is_exact(&self) -> bool {
        self.exact
    }

    pub fn entries(&self) -> &[SketchEntry] {
        &self.entries
    }

    pub fn min(&self) -> Option<f64> {
        self.entries.first().map(|e| e.value)
    }

    pub fn max(&self) -> Option<f64> {
        self.entries.last().map(|e| e.value)
    }

    /// Guaranteed absolute rank error of [`query`](Self::query).
    pub fn rank_error_bound(&self) -> f64 {
        if self.exact {
            1.0
        } else {
            self.epsilon * self.count as f64
        }
    }

    fn exact_capacity(&self) -> usize {
        (1.0 / self.epsilon).ceil().max(1.0) as usize
    }

    fn compress_period(&self) -> u64 {
        ((1.0 / (2.0 * self.epsilon)).floor() as u64).max(1)
    }

    fn merge_threshold(&self) -> u64 {
        (2.0 * self.epsilon * self.count as f64).floor() as u64
    }

    pub fn insert(&mut self, value: f64) -> Result<()> {
        if !value.is_finite() {
            return Err(Error::InvalidInput(format!(
                "sketch values must be finite, got {value}"
            )));
        }
        // Fold -0.0 into 0.0 so the two never become separate entries.
        let value = value + 0.0;
        if self.exact {
            match self.entries.binary_search_by(|e| e.value.total_cmp(&value)) {
                Ok(i) => {
                    self.entries[i].g += 1;
                    self.count += 1;
                    return Ok(());
                }
                Err(i) if self.entries.len() < self.exact_capacity() => {
                    self.entries.insert(i, SketchEntry { value, g: 1, delta: 0 });
                    self.count += 1;
                    return Ok(());
                }
                Err(_) => self.leave_exact_mode(),
            }
        }
        self.count += 1;
        let pos = self.entries.partition_point(|e| e.value <= value);
        let delta = if pos == 0 || pos == self.entries.len() {
            0
        } else {
            let succ = self.entries[pos];
            succ.g + succ.delta - 1
        };
        self.entries.insert(pos, SketchEntry { value, g: 1, delta });
        self.since_compress += 1;
        if self.since_compress >= self.compress_period() {
            self.compress();
        }
        Ok(())
    }

    fn leave_exact_mode(&mut self) {
        self.entries = chunk_exact(&self.entries, self.epsilon, self.count);
        self.exact = false;
        self.compress();
    }

    /// Greedy right-to-left pass merging each entry into its successor when
    /// the result keeps `g + delta <= floor(2 * epsilon * n)`. The first and
    /// last entries (the extremes) are never absorbed.
    pub fn compress(&mut self) {
        self.since_compress = 0;
        if self.exact || self.entries.len() < 3 {
            return;
        }
        let threshold = self.merge_threshold();
        let n = self.entries.len();
        let mut out = Vec::with_capacity(n);
        let mut cur = self.entries[n - 1];
        for i in (1..n - 1).rev() {
            let e = self.entries[i];
            if e.g + cur.g + cur.delta <= threshold {
                cur.g += e.g;
            } else {
                out.push(cur);
                cur = e;
            }
        }
        out.push(cur);
        out.push(self.entries[0]);
        out.reverse();
        self.entries = out;
    }

    /// Approximate `phi`-quantile: a value whose rank lies within
    /// [`rank_error_bound`](Self::rank_error_bound) of `phi * n`.
    pub fn query(&self, phi: f64) -> Result<f64> {
        if self.count == 0 {
            return Err(Error::EmptySketch);
        }
        if !(0.0..=1.0).contains(&phi) {
            return Err(Error::InvalidInput(format!("quantile must lie in [0, 1], got {phi}")));
        }
        Ok(self.value_at_rank(phi * self.count as f64))
    }

    fn value_at_rank(&self, rank: f64) -> f64 {
        self.value_at_rank_with(rank, &self.cumulative_g())
    }

    fn cumulative_g(&self) -> Vec<u64> {
        self.entries
            .iter()
            .scan(0u64, |acc, e| {
                *acc += e.g;
                Some(*acc)
            })
            .collect()
    }

    /// `rmin` holds the running sums of `g`.
    fn value_at_rank_with(&self, rank: f64, rmin: &[u64]) -> f64 {
        let n = self.count as f64;
        let r = rank.clamp(1.0, n);
        if self.exact {
            let target = r.ceil() as u64;
            let i = rmin.partition_point(|&c| c < target).min(self.entries.len() - 1);
            return self.entries[i].value;
        }
        let err = |i: usize| {
            let lo = rmin[i] as f64;
            let hi = (rmin[i] + self.entries[i].delta) as f64;
            (r - lo).max(hi - r)
        };
        // Any entry within the bound has rmin in [r - bound, r + bound].
        let bound = self.rank_error_bound();
        let start = rmin.partition_point(|&x| (x as f64) < r - bound);
        let end = rmin.partition_point(|&x| (x as f64) <= r + bound);
        let pick = |range: std::ops::Range<usize>| range.min_by(|&a, &b| err(a).total_cmp(&err(b)).then(a.cmp(&b)));
        match pick(start..end) {
            Some(i) if err(i) <= bound => self.entries[i].value,
            _ => self.entries[pick(0..self.entries.len()).expect("nonempty")].value,
        }
    }

    /// Bin edges at the `k / n_bins` quantiles, `k = 1..n_bins-1`, fenced by
    /// the sketch minimum and maximum.
    ///
    /// When the sketch is exact and holds at most `n_bins` distinct values,
    /// every distinct value gets its own bin. Otherwise at most one bin per
    /// inserted item is produced.
    pub fn extract_bins(&self, n_bins: usize) -> Result<BinEdges> {
        if self.count == 0 {
            return Err(Error::EmptySketch);
        }
        if n_bins == 0 {
            return Err(Error::InvalidInput("n_bins must be positive".into()));
        }
        let lower = self.entries[0].value;
        let max = self.entries[self.entries.len() - 1].value;
        if self.exact && self.entries.len() <= n_bins {
            return BinEdges::new(lower, self.entries.iter().map(|e| e.value).collect());
        }
        let k_bins = n_bins.min(self.count as usize) as u64;
        let mut uppers: Vec<f64> = Vec::with_capacity(k_bins as usize);
        let rmin = self.cumulative_g();
        for k in 1..k_bins {
            let rank = (k * self.count) as f64 / k_bins as f64;
            let v = self.value_at_rank_with(rank, &rmin);
            if v < max && uppers.last().is_none_or(|&last| v > last) {
                uppers.push(v);
            }
        }
        uppers.push(max);
        BinEdges::new(lower, uppers)
    }

    /// Merges summaries of the same feature, compressing the result at
    /// `epsilon`. Empty inputs are ignored.
    pub fn merge(sketches: &[&QuantileSketch], epsilon: f64) -> Result<QuantileSketch> {
        let mut out = QuantileSketch::new(epsilon)?;
        let inputs: Vec<&QuantileSketch> = sketches.iter().copied().filter(|s| !s.is_empty()).collect();
        if inputs.is_empty() {
            return Err(Error::EmptySketch);
        }
        out.count = inputs.iter().map(|s| s.count).sum();

        if inputs.iter().all(|s| s.exact) {
            let mut values: Vec<SketchEntry> = inputs.iter().flat_map(|s| s.entries.iter().copied()).collect();
            values.sort_by(|a, b| a.value.total_cmp(&b.value));
            let mut merged: Vec<SketchEntry> = Vec::with_capacity(values.len());
            for e in values {
                match merged.last_mut() {
                    Some(last) if last.value == e.value => last.g += e.g,
                    _ => merged.push(e),
                }
            }
            if merged.len() <= out.exact_capacity() {
                out.entries = merged;
                return Ok(out);
            }
        }

        let weighted_error: f64 = inputs.iter().map(|s| s.epsilon * s.count as f64).sum();
        out.epsilon = epsilon.max(weighted_error / out.count as f64).min(1.0);
        out.exact = false;
        let mut acc: Vec<SketchEntry> = Vec::new();
        for s in inputs {
            let entries = if s.exact {
                chunk_exact(&s.entries, s.epsilon, s.count)
            } else {
                s.entries.clone()
            };
            acc = interleave(&acc, &entries);
        }
        out.entries = acc;
        out.compress();
        Ok(out)
    }
}

/// Merges sketches at the largest input epsilon.
pub fn merge_sketches(sketches: &[&QuantileSketch]) -> Result<QuantileSketch> {
    let eps = sketches
        .iter()
        .filter(|s| !s.is_empty())
        .map(|s| s.epsilon)
        .fold(f64::NAN, f64::max);
    if eps.is_nan() {
        return Err(Error::EmptySketch);
    }
    QuantileSketch::merge(sketches, eps)
}

/// Expands exact `(value, multiplicity)` entries into GK tuples whose `g`
/// never exceeds `max(1, floor(2 * epsilon * n))`.
fn chunk_exact(entries: &[SketchEntry], epsilon: f64, count: u64) -> Vec<SketchEntry> {
    let cap = ((2.0 * epsilon * count as f64).floor() as u64).max(1);
    let mut out = Vec::with_capacity(entries.len());
    for e in entries {
        let mut left = e.g;
        while left > 0 {
            let g = left.min(cap);
            out.push(SketchEntry {
                value: e.value,
                g,
                delta: 0,
            });
            left -= g;
        }
    }
    out
}

fn interleave(a: &[SketchEntry], b: &[SketchEntry]) -> Vec<SketchEntry> {
    let widen = |e: SketchEntry, succ: Option<&SketchEntry>| SketchEntry {
        delta: e.delta + succ.map_or(0, |s| s.g + s.delta - 1),
        ..e
    };
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        if j == b.len() || (i < a.len() && a[i].value <= b[j].value) {
            out.push(widen(a[i], b.get(j)));
            i += 1;
        } else {
            out.push(widen(b[j], a.get(i)));
            j += 1;
        }
    }
    out
}

/// Histogram bin layout: the first bin is `[lower, uppers[0]]`, bin `k > 0`
/// is `(uppers[k-1], uppers[k]]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinEdges {
    lower: f64,
    uppers: Vec<f64>,
}

impl BinEdges {
    pub fn new(lower: f64, uppers: Vec<f64>) -> Result<Self> {
        if uppers.is_empty() {
            return Err(Error::Structural("bin layout needs at least one bin".into()));
        }
        if !(lower <= uppers[0]) || uppers.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Structural("bin boundaries must be strictly increasing".into()));
        }
        Ok(BinEdges { lower, uppers })
    }

    pub fn n_bins(&self) -> usize {
        self.uppers.len()
    }

    pub fn lower(&self) -> f64 {
        self.lower
    }

    pub fn upper(&self) -> f64 {
        self.uppers[self.uppers.len() - 1]
    }

    /// Upper boundary of every bin; these are the split thresholds.
    pub fn uppers(&self) -> &[f64] {
        &self.uppers
    }

    /// Lower fence followed by the interior and upper boundaries, strictly
    /// increasing. Omits the lower fence when the first bin is degenerate.
    pub fn boundaries(&self) -> Vec<f64> {
        let mut b = Vec::with_capacity(self.uppers.len() + 1);
        if self.lower < self.uppers[0] {
            b.push(self.lower);
        }
        b.extend_from_slice(&self.uppers);
        b
    }

    /// Bin containing `x`; values outside the fences clamp to the end bins.
    pub fn bin_of(&self, x: f64) -> usize {
        self.uppers.partition_point(|&u| u < x).min(self.uppers.len() - 1)
    }

    pub fn interval(&self, bin: usize) -> (f64, f64) {
        let lo = if bin == 0 { self.lower } else { self.uppers[bin - 1] };
        (lo, self.uppers[bin])
    }

    /// Midpoint of the bin interval, or the single value of a degenerate bin.
    pub fn midpoint(&self, bin: usize) -> f64 {
        let (lo, hi) = self.interval(bin);
        let m = lo + (hi - lo) / 2.0;
        // Adjacent floats have no midpoint strictly above `lo`.
        if m <= lo {
            hi
        } else {
            m
        }
    }

    pub fn contains(&self, bin: usize, x: f64) -> bool {
        let (lo, hi) = self.interval(bin);
        if bin == 0 {
            lo <= x && x <= hi
        } else {
            lo < x && x <= hi
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Distance from `target` to the rank span of `v` in `sorted`.
    fn rank_error(sorted: &[f64], v: f64, target: f64) -> f64 {
        let first = sorted.partition_point(|&x| x < v) as f64 + 1.0;
        let last = sorted.partition_point(|&x| x <= v) as f64;
        if target < first {
            first - target
        } else if target > last {
            target - last
        } else {
            0.0
        }
    }

    #[test]
    fn one_to_hundred_median() {
        let sk = QuantileSketch::from_values(0.1, (1..=100).map(f64::from)).unwrap();
        let v = sk.query(0.5).unwrap();
        assert!((40.0..=60.0).contains(&v), "median estimate {v}");
    }

    #[test]
    fn singleton() {
        let sk = QuantileSketch::from_values(0.01, [5.0]).unwrap();
        for phi in [0.0, 0.3, 1.0] {
            assert_eq!(sk.query(phi).unwrap(), 5.0);
        }
    }

    #[test]
    fn extremes_of_two_values() {
        let sk = QuantileSketch::from_values(0.1, [1.0, 2.0]).unwrap();
        assert_eq!(sk.query(1.0).unwrap(), 2.0);
        assert_eq!(sk.query(0.0).unwrap(), 1.0);
    }

    #[test]
    fn uniform_ten_thousand() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let xs: Vec<f64> = (0..10_000).map(|_| rng.random::<f64>()).collect();
        let sk = QuantileSketch::from_values(0.01, xs.iter().copied()).unwrap();
        assert!(!sk.is_exact());
        let mut sorted = xs.clone();
        sorted.sort_by(f64::total_cmp);
        let v = sk.query(0.25).unwrap();
        assert!(rank_error(&sorted, v, 2500.0) <= 100.0);
    }

    #[test]
    fn thousand_sorted_integers() {
        let sk = QuantileSketch::from_values(0.05, (1..=1000).map(f64::from)).unwrap();
        let v = sk.query(0.9).unwrap();
        assert!((850.0..=950.0).contains(&v), "got {v}");
    }

    #[test]
    fn empty_errors() {
        let sk = QuantileSketch::new(0.1).unwrap();
        assert!(matches!(sk.query(0.5), Err(Error::EmptySketch)));
        assert!(matches!(sk.extract_bins(4), Err(Error::EmptySketch)));
        assert!(matches!(merge_sketches(&[&sk]), Err(Error::EmptySketch)));
        let mut sk = sk;
        assert!(sk.insert(f64::NAN).is_err());
        assert!(sk.insert(f64::INFINITY).is_err());
        assert!(QuantileSketch::new(0.0).is_err());
    }

    #[test]
    fn constant_column_is_one_degenerate_bin() {
        let sk = QuantileSketch::from_values(0.01, std::iter::repeat_n(7.0, 500)).unwrap();
        let edges = sk.extract_bins(100).unwrap();
        assert_eq!(edges.n_bins(), 1);
        assert_eq!(edges.interval(0), (7.0, 7.0));
        assert_eq!(edges.midpoint(0), 7.0);
    }

    #[test]
    fn quartiles_of_one_to_hundred() {
        let sk = QuantileSketch::from_values(0.005, (1..=100).map(f64::from)).unwrap();
        let edges = sk.extract_bins(4).unwrap();
        let oracle = [25.0, 50.0, 75.0, 100.0];
        assert_eq!(edges.n_bins(), 4);
        for (u, o) in edges.uppers().iter().zip(oracle) {
            assert!((u - o).abs() <= 0.005 * 100.0 + 1.0, "{u} vs {o}");
        }
    }

    #[test]
    fn one_bin_is_the_fence() {
        let sk = QuantileSketch::from_values(0.1, [3.0, 1.0, 2.0, 9.0]).unwrap();
        let edges = sk.extract_bins(1).unwrap();
        assert_eq!(edges.boundaries(), vec![1.0, 9.0]);
    }

    #[test]
    fn exact_support_gets_one_bin_per_value() {
        let xs = [1.0, 1.0, 1.0, 1.0, 2.0, 3.0, 3.0];
        let sk = QuantileSketch::from_values(0.2, xs).unwrap();
        let edges = sk.extract_bins(3).unwrap();
        assert_eq!(edges.uppers(), &[1.0, 2.0, 3.0]);
        assert_eq!(edges.bin_of(1.0), 0);
        assert_eq!(edges.bin_of(2.0), 1);
        assert_eq!(edges.bin_of(3.0), 2);
    }

    #[test]
    fn merge_with_empty_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let sk = QuantileSketch::from_values(0.02, (0..2000).map(|_| rng.random::<f64>())).unwrap();
        let empty = QuantileSketch::new(0.02).unwrap();
        let merged = QuantileSketch::merge(&[&sk, &empty], 0.02).unwrap();
        for k in 0..=20 {
            let phi = k as f64 / 20.0;
            assert_eq!(merged.query(phi).unwrap(), sk.query(phi).unwrap());
        }
    }

    #[test]
    fn merge_disjoint_halves() {
        let a = QuantileSketch::from_values(0.02, (1..=50).map(f64::from)).unwrap();
        let b = QuantileSketch::from_values(0.02, (51..=100).map(f64::from)).unwrap();
        let m = merge_sketches(&[&a, &b]).unwrap();
        assert_eq!(m.count(), 100);
        assert_eq!(m.min(), Some(1.0));
        assert_eq!(m.max(), Some(100.0));
        let v = m.query(0.5).unwrap();
        assert!((v - 50.0).abs() <= 0.02 * 100.0 + 1.0, "got {v}");
    }

    #[test]
    fn merge_of_copies_matches_one_copy() {
        let sk = QuantileSketch::from_values(0.1, (1..=40).map(f64::from)).unwrap();
        let m = QuantileSketch::merge(&[&sk, &sk, &sk], 0.1).unwrap();
        let sorted: Vec<f64> = (1..=40).map(f64::from).collect();
        for q in [0.1, 0.5, 0.9] {
            let v1 = sk.query(q).unwrap();
            let v3 = m.query(q).unwrap();
            // Both estimate the same quantile of the same distribution.
            assert!(rank_error(&sorted, v1, q * 40.0) <= 0.1 * 40.0);
            assert!(rank_error(&sorted, v3, q * 40.0) <= 0.1 * 40.0);
        }
    }

    #[test]
    fn deterministic_construction() {
        let xs: Vec<f64> = (0..3000).map(|i| ((i * 7919) % 1000) as f64 / 3.0).collect();
        let a = QuantileSketch::from_values(0.01, xs.iter().copied()).unwrap();
        let b = QuantileSketch::from_values(0.01, xs.iter().copied()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn json_entry_layout() {
        let sk = QuantileSketch::from_values(0.5, [2.0, 2.0]).unwrap();
        let v = serde_json::to_value(&sk).unwrap();
        assert_eq!(v["entries"][0], serde_json::json!([2.0, 2, 0]));
        let back: QuantileSketch = serde_json::from_value(v).unwrap();
        assert_eq!(back, sk);
    }

    #[test]
    fn space_stays_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let sk = QuantileSketch::from_values(0.01, (0..100_000).map(|_| rng.random::<f64>())).unwrap();
        // (1/eps) * log2(eps * n) = 100 * log2(1000) ~ 1000
        assert!(sk.entries().len() <= 1000, "{} entries", sk.entries().len());
    }

    proptest! {
        #[test]
        fn rank_error_within_bound(
            xs in proptest::collection::vec(-1e3f64..1e3, 1..600),
            eps in prop_oneof![Just(0.1f64), Just(0.05), Just(0.01)],
            phi in 0.0f64..=1.0,
        ) {
            let sk = QuantileSketch::from_values(eps, xs.iter().copied()).unwrap();
            let mut sorted = xs.clone();
            sorted.sort_by(f64::total_cmp);
            let n = xs.len() as f64;
            let v = sk.query(phi).unwrap();
            let target = (phi * n).clamp(1.0, n);
            prop_assert!(rank_error(&sorted, v, target) <= (eps * n).max(1.0));
        }

        #[test]
        fn bins_are_increasing_and_fence_all_values(
            xs in proptest::collection::vec(-50i32..50, 1..400),
            eps in prop_oneof![Just(0.2f64), Just(0.05), Just(0.01)],
            n_bins in 1usize..40,
        ) {
            let sk = QuantileSketch::from_values(eps, xs.iter().map(|&x| x as f64)).unwrap();
            let edges = sk.extract_bins(n_bins).unwrap();
            prop_assert!(edges.n_bins() <= n_bins);
            prop_assert!(edges.boundaries().windows(2).all(|w| w[0] < w[1]));
            for &x in &xs {
                let x = x as f64;
                prop_assert!(edges.lower() <= x && x <= edges.upper());
                prop_assert!(edges.contains(edges.bin_of(x), x));
            }
        }
    }
}
