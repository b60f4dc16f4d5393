//! Pools of i.i.d. codewords and Bernoulli-selected index sets.

use std::borrow::Cow;

use rand::Rng;

use crate::channel::{Pmf, Sequence};
use crate::error::{Error, Result};
use crate::seed;

/// Pools with at most this many symbols in total are kept in memory;
/// larger ones regenerate entries on demand from their key.
pub const MATERIALIZE_SYMBOLS: u64 = 1 << 26;

/// Side tags keying index-set streams.
pub const TAG_Y: u64 = 0;
pub const TAG_Z: u64 = 1;
pub const TAG_3: u64 = 2;

/// round(e^{n·rate}), at least 1.
pub fn pool_size(n: usize, rate: f64) -> Result<u64> {
    let v = (n as f64 * rate).exp().round();
    if !v.is_finite() || v >= 2f64.powi(62) {
        return Err(Error::Budget(format!("pool size e^({n}·{rate}) does not fit")));
    }
    Ok((v as u64).max(1))
}

/// e^{−n(R_pool − R̃)}, clamped to (0, 1].
pub fn selection_prob(n: usize, pool_rate: f64, bin_rate: f64) -> f64 {
    (-(n as f64) * (pool_rate - bin_rate)).exp().clamp(f64::MIN_POSITIVE, 1.0)
}

/// A pool of `size` sequences drawn i.i.d. from Pⁿ; entry v comes from its
/// own keyed stream, so materialized and lazy pools agree entry by entry.
#[derive(Clone, Debug, PartialEq)]
pub struct Pool {
    n: usize,
    size: u64,
    pmf: Pmf,
    seed: u64,
    entries: Option<Vec<Sequence>>,
}

impl Pool {
    pub fn generate(n: usize, size: u64, pmf: &Pmf, seed: u64) -> Self {
        let entries = (size.saturating_mul(n as u64) <= MATERIALIZE_SYMBOLS)
            .then(|| (0..size).map(|v| Self::entry(n, pmf, seed, v)).collect());
        Pool {
            n,
            size,
            pmf: pmf.clone(),
            seed,
            entries,
        }
    }

    /// A pool holding the given sequences; used for hand-built codes.
    pub fn from_sequences(entries: Vec<Sequence>, pmf: &Pmf) -> Result<Self> {
        let n = entries.first().map_or(0, |s| s.len());
        if entries.is_empty() || entries.iter().any(|s| s.len() != n) {
            return Err(Error::Param("pool needs equal-length sequences".into()));
        }
        for s in &entries {
            crate::channel::check_sequence(s, pmf.len())?;
        }
        Ok(Pool {
            n,
            size: entries.len() as u64,
            pmf: pmf.clone(),
            seed: 0,
            entries: Some(entries),
        })
    }

    /// Rebuilds a stored pool; without entries it is regenerated from the seed.
    pub(crate) fn restore(n: usize, size: u64, pmf: &Pmf, seed: u64, entries: Option<Vec<Sequence>>) -> Result<Self> {
        let Some(entries) = entries else {
            return Ok(Pool::generate(n, size, pmf, seed));
        };
        if entries.len() as u64 != size || entries.iter().any(|s| s.len() != n) {
            return Err(Error::Container("pool entries do not match the stored shape".into()));
        }
        for s in &entries {
            crate::channel::check_sequence(s, pmf.len())?;
        }
        Ok(Pool {
            n,
            size,
            pmf: pmf.clone(),
            seed,
            entries: Some(entries),
        })
    }

    fn entry(n: usize, pmf: &Pmf, seed: u64, v: u64) -> Sequence {
        pmf.sample_sequence(n, &mut seed::stream(seed, "pool", &[v]))
    }

    pub fn blocklength(&self) -> usize {
        self.n
    }

    pub fn size(&self) -> u64 {
        self.size
    }

    pub fn pmf(&self) -> &Pmf {
        &self.pmf
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn is_materialized(&self) -> bool {
        self.entries.is_some()
    }

    pub fn entries(&self) -> Option<&[Sequence]> {
        self.entries.as_deref()
    }

    pub fn get(&self, v: u64) -> Cow<'_, [u8]> {
        match &self.entries {
            Some(e) => Cow::Borrowed(&e[v as usize]),
            None => Cow::Owned(Self::entry(self.n, &self.pmf, self.seed, v)),
        }
    }
}

/// Includes each of 0..size independently with probability p, walking the
/// gaps geometrically so the cost is proportional to the set size.
pub fn draw_index_set<R: Rng + ?Sized>(size: u64, p: f64, rng: &mut R) -> Vec<u64> {
    if p >= 1.0 {
        return (0..size).collect();
    }
    let mut out = Vec::new();
    let denom = (1.0 - p).ln();
    let mut v: u64 = 0;
    loop {
        let u: f64 = 1.0 - rng.gen::<f64>();
        let skip = (u.ln() / denom).floor();
        if !skip.is_finite() || skip >= (size - v) as f64 {
            return out;
        }
        v += skip as u64;
        out.push(v);
        v += 1;
        if v >= size {
            return out;
        }
    }
}

/// The index set keyed by `[side tag, message components..]`; trailing zero
/// components are ignored so a singleton message axis keys like a missing one.
pub fn index_set(seed: u64, key: &[u64], size: u64, p: f64) -> Vec<u64> {
    draw_index_set(size, p, &mut seed::stream_trimmed(seed, "bin", key))
}

/// Intersection of sorted lists by merging.
pub fn intersect_sorted(a: &[u64], b: &[u64]) -> Vec<u64> {
    let (mut i, mut j) = (0, 0);
    let mut out = Vec::new();
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                out.push(a[i]);
                i += 1;
                j += 1;
            }
        }
    }
    out
}

/// Uniform draw from `candidates`, or from the whole pool when it is empty.
pub fn keyed_pick(candidates: &[u64], pool_size: u64, key: &mut seed::StreamRng) -> u64 {
    if candidates.is_empty() {
        key.gen_range(0..pool_size)
    } else {
        candidates[key.gen_range(0..candidates.len())]
    }
}

pub fn check_strictly_increasing(set: &[u64], size: u64) -> Result<()> {
    if set.windows(2).any(|w| w[0] >= w[1]) || set.last().is_some_and(|&v| v >= size) {
        return Err(Error::Param("index set must be strictly increasing and inside the pool".into()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pool_size_examples() {
        assert_eq!(pool_size(10, 0.4).unwrap(), 55);
        assert_eq!(pool_size(10, 0.0).unwrap(), 1);
        assert_eq!(pool_size(1, -5.0).unwrap(), 1);
        assert_eq!(selection_prob(10, 0.3, 0.3), 1.0);
        assert_eq!(selection_prob(10, 0.3, 0.5), 1.0);
    }

    #[test]
    fn lazy_and_materialized_pools_agree() {
        let p = Pmf::new(vec![0.3, 0.7]).unwrap();
        let a = Pool::generate(12, 40, &p, 9);
        assert!(a.is_materialized());
        let lazy = Pool { entries: None, ..a.clone() };
        for v in 0..40 {
            assert_eq!(a.get(v), lazy.get(v));
        }
    }

    #[test]
    fn index_sets_are_increasing_and_full_at_p_one() {
        let mut rng = seed::stream(1, "t", &[]);
        for p in [0.01, 0.3, 0.9] {
            let s = draw_index_set(500, p, &mut rng);
            check_strictly_increasing(&s, 500).unwrap();
        }
        assert_eq!(draw_index_set(7, 1.0, &mut rng), (0..7).collect::<Vec<_>>());
    }

    #[test]
    fn geometric_skipping_matches_bernoulli_mean() {
        let mut rng = seed::stream(2, "t", &[]);
        let (size, p, reps) = (2000u64, 0.05, 400);
        let total: usize = (0..reps).map(|_| draw_index_set(size, p, &mut rng).len()).sum();
        let mean = total as f64 / reps as f64;
        let sd = (size as f64 * p * (1.0 - p) / reps as f64).sqrt();
        assert!((mean - 100.0).abs() < 4.0 * sd, "{mean}");
    }

    #[test]
    fn merge_intersection() {
        assert_eq!(intersect_sorted(&[1, 3, 5, 7], &[2, 3, 7, 9]), vec![3, 7]);
        assert!(intersect_sorted(&[1], &[]).is_empty());
    }
}
