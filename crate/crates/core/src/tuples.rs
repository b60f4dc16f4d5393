//! Helpers shared by the deterministic-encoder multi-receiver codes: each
//! transmitted message tuple maps to one pool index, and each receiver sees
//! the tuples grouped by its own message.

use std::collections::BTreeMap;

use rand::seq::index::sample;

use crate::channel::Dmc;
use crate::error::Result;
use crate::eval::{self, BinDecoder, Criterion, ErrorReport, EvalMode, SideView, Transmission};
use crate::pool::Pool;
use crate::seed;

/// Other-side message tuples are enumerated up to this many, sampled beyond.
pub const OTHER_TUPLE_LIMIT: usize = 4096;

/// Mixed-radix digits of `idx` over `counts` (first axis least significant).
pub(crate) fn digits(mut idx: usize, counts: &[usize]) -> Vec<u32> {
    counts
        .iter()
        .map(|&c| {
            let d = idx % c;
            idx /= c;
            d as u32
        })
        .collect()
}

/// Tuples of the other receivers' messages to average over: all of them, or
/// a seeded sample of `limit` when the product space is larger.
pub(crate) fn other_tuples(counts: &[usize], limit: usize, seed: u64, side: u64) -> (Vec<Vec<u32>>, bool) {
    let total = counts.iter().try_fold(1usize, |a, &c| a.checked_mul(c));
    match total {
        Some(t) if t <= limit => ((0..t).map(|i| digits(i, counts)).collect(), false),
        _ => {
            let t = total.unwrap_or(usize::MAX);
            let mut rng = seed::stream(seed, "other", &[side]);
            let mut picks = sample(&mut rng, t, limit).into_vec();
            picks.sort_unstable();
            (picks.into_iter().map(|i| digits(i, counts)).collect(), true)
        }
    }
}

/// Point-mass transmission over pool indices, with duplicates merged.
pub(crate) fn point_mass_transmission(pool: &Pool, indices: &[u64]) -> Transmission {
    let mut ids: BTreeMap<u64, u32> = BTreeMap::new();
    let laws = indices
        .iter()
        .map(|&v| {
            let next = ids.len() as u32;
            vec![(*ids.entry(v).or_insert(next), 1.0)]
        })
        .collect();
    let mut codewords = vec![Vec::new(); ids.len()];
    for (v, i) in ids {
        codewords[i as usize] = pool.get(v).into_owned();
    }
    Transmission { codewords, laws }
}

/// Mixture transmission: laws[m] puts weight 1/k on each of the k indices
/// listed for message m.
pub(crate) fn mixture_transmission(pool: &Pool, per_message: &[Vec<u64>]) -> Transmission {
    let mut ids: BTreeMap<u64, u32> = BTreeMap::new();
    let laws = per_message
        .iter()
        .map(|list| {
            let mut w: BTreeMap<u32, f64> = BTreeMap::new();
            for &v in list {
                let next = ids.len() as u32;
                *w.entry(*ids.entry(v).or_insert(next)).or_insert(0.0) += 1.0 / list.len() as f64;
            }
            w.into_iter().collect()
        })
        .collect();
    let mut codewords = vec![Vec::new(); ids.len()];
    for (v, i) in ids {
        codewords[i as usize] = pool.get(v).into_owned();
    }
    Transmission { codewords, laws }
}

/// One receiver's report for a deterministic-encoder code.
///
/// `own_count` messages of interest; for each, every tuple in `others` is
/// combined by `index_of(own, other)` into a pool index.
#[allow(clippy::too_many_arguments)]
pub(crate) fn side_report(
    pool: &Pool,
    bins: &[Vec<u64>],
    w: &Dmc,
    eps: f64,
    own_count: usize,
    others: &[Vec<u32>],
    index_of: &(dyn Fn(u32, &[u32]) -> u64 + Sync),
    mode: EvalMode,
    criterion: Criterion,
    pair_seed: u64,
) -> Result<ErrorReport> {
    let mut indices = Vec::with_capacity(own_count * others.len());
    let mut project = Vec::with_capacity(indices.capacity());
    for m in 0..own_count as u32 {
        for o in others {
            indices.push(index_of(m, o));
            project.push(m);
        }
    }
    let tx = point_mass_transmission(pool, &indices);
    let joint = pool.pmf().joint_with(w)?;
    let dec = BinDecoder::new(pool, bins, &joint, w.output_size(), eps);
    let side = SideView {
        channel: w,
        decoder: &dec,
        project: &project,
    };
    eval::evaluate(&tx, &side, mode, criterion, pair_seed)
}
