//! Identification error evaluation shared by every code family.
//!
//! A code is seen as a list of transmitted tuples, each with a law over a
//! finite codeword list, plus one [`SideView`] per receiver: the receiver's
//! marginal channel, its decision sets and the map from tuples to the message
//! that receiver is interested in. Missed and wrong identification are then
//! averaged (or maximized) over the tuples sharing a receiver message.

use std::collections::BTreeMap;

use rand::seq::index::sample;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{Dmc, Pmf, Sequence};
use crate::error::{Error, Result};
use crate::pool::Pool;
use crate::seed;
use crate::typeskit::TypicalityTester;

pub const DEFAULT_BUDGET_STATES: u64 = 1 << 24;
/// All ordered message pairs are evaluated up to this many messages.
pub const FULL_PAIR_LIMIT: usize = 64;
pub const DEFAULT_PAIR_SAMPLE: usize = 4096;
pub const WILSON_Z: f64 = 1.96;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum EvalMode {
    /// Exhaustive sum over the output space; fails above the budget.
    Exact { budget_states: u64 },
    /// `trials` simulated transmissions per transmitted tuple.
    MonteCarlo { trials: u64, seed: u64 },
    /// Exact when affordable, otherwise Monte Carlo.
    Auto {
        budget_states: u64,
        trials: u64,
        seed: u64,
    },
}

impl EvalMode {
    pub fn exact() -> Self {
        EvalMode::Exact {
            budget_states: DEFAULT_BUDGET_STATES,
        }
    }

    pub fn monte_carlo(trials: u64, seed: u64) -> Self {
        EvalMode::MonteCarlo { trials, seed }
    }

    /// Same mode with the Monte Carlo seed re-keyed by `salt`.
    pub fn salted(self, salt: u64) -> Self {
        match self {
            EvalMode::MonteCarlo { trials, seed } => EvalMode::MonteCarlo {
                trials,
                seed: seed::derive(seed, "mode", &[salt]),
            },
            EvalMode::Auto {
                budget_states,
                trials,
                seed,
            } => EvalMode::Auto {
                budget_states,
                trials,
                seed: seed::derive(seed, "mode", &[salt]),
            },
            m => m,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Criterion {
    Average,
    Maximum,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Method {
    Exact,
    MonteCarlo { trials_per_tuple: u64 },
}

/// A probability with its uncertainty; exact values have zero half-width.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    /// Wilson interval center (equals `value` for exact results).
    pub center: f64,
    pub half_width: f64,
}

impl Estimate {
    pub fn exact(v: f64) -> Self {
        let v = v.clamp(0.0, 1.0);
        Estimate {
            value: v,
            center: v,
            half_width: 0.0,
        }
    }

    pub fn wilson(successes: u64, trials: u64) -> Self {
        let (center, half_width) = wilson_interval(successes, trials, WILSON_Z);
        Estimate {
            value: successes as f64 / trials as f64,
            center,
            half_width,
        }
    }

    /// Whether `v` lies within `k` half-widths of the interval center.
    pub fn covers(&self, v: f64, k: f64) -> bool {
        (v - self.center).abs() <= k * self.half_width + 1e-15
    }
}

/// Wilson score interval: (center, half-width).
pub fn wilson_interval(successes: u64, trials: u64, z: f64) -> (f64, f64) {
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let hw = z / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    (center, hw)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairEstimate {
    pub sent: u32,
    pub tested: u32,
    pub estimate: Estimate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub method: Method,
    pub criterion: Criterion,
    /// missed[m]: probability the m-focused receiver rejects when m was sent.
    pub missed: Vec<Estimate>,
    /// Wrong identification for the evaluated ordered pairs.
    pub wrong: Vec<PairEstimate>,
    /// True when `wrong` covers a seeded sample rather than all pairs, so
    /// `max_wrong` is a lower estimate of the true maximum.
    pub pairs_sampled: bool,
    pub max_missed: f64,
    pub max_wrong: f64,
}

impl ErrorReport {
    pub fn max_error(&self) -> f64 {
        self.max_missed.max(self.max_wrong)
    }

    pub fn wrong_of(&self, sent: u32, tested: u32) -> Option<&Estimate> {
        self.wrong
            .iter()
            .find(|p| p.sent == sent && p.tested == tested)
            .map(|p| &p.estimate)
    }

    /// Every probability estimate in a fixed order.
    pub fn all_estimates(&self) -> Vec<Estimate> {
        let mut v = self.missed.clone();
        v.extend(self.wrong.iter().map(|p| p.estimate));
        v
    }
}

/// Decision sets of one receiver.
pub trait Decoder: Sync {
    fn message_count(&self) -> usize;
    /// Sets out[m] to whether y lies in D_m.
    fn accept_all(&self, y: &[u8], out: &mut [bool]);

    fn accepts(&self, m: usize, y: &[u8]) -> bool {
        let mut v = vec![false; self.message_count()];
        self.accept_all(y, &mut v);
        v[m]
    }
}

/// D_m = ∪_{v ∈ bin(m)} T_ε(P×W | pool[v]).
#[derive(Clone, Debug)]
pub struct BinDecoder {
    union: Vec<Sequence>,
    bins: Vec<Vec<u32>>,
    tester: TypicalityTester,
}

impl BinDecoder {
    pub fn new(pool: &Pool, sets: &[Vec<u64>], joint: &Pmf, y_size: usize, eps: f64) -> Self {
        let mut ids: BTreeMap<u64, u32> = BTreeMap::new();
        for s in sets {
            for &v in s {
                let next = ids.len() as u32;
                ids.entry(v).or_insert(next);
            }
        }
        let mut union = vec![Vec::new(); ids.len()];
        for (&v, &i) in &ids {
            union[i as usize] = pool.get(v).into_owned();
        }
        let bins = sets
            .iter()
            .map(|s| s.iter().map(|v| ids[v]).collect())
            .collect();
        BinDecoder {
            union,
            bins,
            tester: TypicalityTester::new(joint, y_size, pool.blocklength(), eps),
        }
    }

    pub fn accepts_message(&self, m: usize, y: &[u8]) -> bool {
        self.bins[m]
            .iter()
            .any(|&i| self.tester.check(&self.union[i as usize], y))
    }
}

impl Decoder for BinDecoder {
    fn message_count(&self) -> usize {
        self.bins.len()
    }

    fn accept_all(&self, y: &[u8], out: &mut [bool]) {
        // 0 = unknown, 1 = typical, 2 = not typical
        let mut state = vec![0u8; self.union.len()];
        for (m, bin) in self.bins.iter().enumerate() {
            out[m] = bin.iter().any(|&i| {
                let s = &mut state[i as usize];
                if *s == 0 {
                    *s = if self.tester.check(&self.union[i as usize], y) { 1 } else { 2 };
                }
                *s == 1
            });
        }
    }

    fn accepts(&self, m: usize, y: &[u8]) -> bool {
        self.accepts_message(m, y)
    }
}

/// Codeword laws of the transmitted tuples.
#[derive(Clone, Debug, PartialEq)]
pub struct Transmission {
    pub codewords: Vec<Sequence>,
    /// laws[t] = [(codeword index, probability)].
    pub laws: Vec<Vec<(u32, f64)>>,
}

/// One receiver's view of a code.
pub struct SideView<'a> {
    pub channel: &'a Dmc,
    pub decoder: &'a dyn Decoder,
    /// project[t] = message of interest to this receiver when tuple t is sent.
    pub project: &'a [u32],
}

/// Ordered (sent, tested) pairs to evaluate, all of them for small message sets.
pub fn select_pairs(m: usize, sample_size: usize, seed: u64) -> (Vec<(u32, u32)>, bool) {
    if m <= FULL_PAIR_LIMIT || m * (m - 1) <= sample_size {
        let all = (0..m as u32)
            .flat_map(|a| (0..m as u32).filter(move |&b| b != a).map(move |b| (a, b)))
            .collect();
        return (all, false);
    }
    let mut rng = seed::stream(seed, "pairs", &[m as u64]);
    let total = m * (m - 1);
    let mut picks: Vec<usize> = sample(&mut rng, total, sample_size).into_vec();
    picks.sort_unstable();
    let pairs = picks
        .into_iter()
        .map(|k| {
            let a = k / (m - 1);
            let r = k % (m - 1);
            let b = if r >= a { r + 1 } else { r };
            (a as u32, b as u32)
        })
        .collect();
    (pairs, true)
}

pub(crate) fn output_states(ny: usize, n: usize) -> Option<u64> {
    (ny as u64).checked_pow(n as u32)
}

/// Writes the mixed-radix digits of `idx` (least significant first).
pub(crate) fn decode_index(mut idx: u64, ny: u64, y: &mut [u8]) {
    for s in y.iter_mut() {
        *s = (idx % ny) as u8;
        idx /= ny;
    }
}

/// acc[c·M + m] = Wⁿ(D_m | codeword c), by enumerating the output space.
fn exact_acceptance(tx: &Transmission, side: &SideView, n: usize, budget: u64) -> Result<Vec<f64>> {
    let ny = side.channel.output_size();
    let states = output_states(ny, n)
        .filter(|&s| s <= budget)
        .ok_or_else(|| Error::Budget(format!("|Y|^n = {ny}^{n} exceeds {budget} states")))?;
    let m = side.decoder.message_count();
    let c = tx.codewords.len();
    let chunks = 64u64.min(states);
    let per = states.div_ceil(chunks);
    let parts: Vec<Vec<f64>> = (0..chunks)
        .into_par_iter()
        .map(|k| {
            let mut acc = vec![0.0; c * m];
            let mut y = vec![0u8; n];
            let mut ok = vec![false; m];
            let mut hits = Vec::with_capacity(m);
            for idx in k * per..((k + 1) * per).min(states) {
                decode_index(idx, ny as u64, &mut y);
                side.decoder.accept_all(&y, &mut ok);
                hits.clear();
                hits.extend((0..m).filter(|&j| ok[j]));
                if hits.is_empty() {
                    continue;
                }
                for (ci, x) in tx.codewords.iter().enumerate() {
                    let p = side.channel.nfold_prob_unchecked(x, &y);
                    if p > 0.0 {
                        for &j in &hits {
                            acc[ci * m + j] += p;
                        }
                    }
                }
            }
            acc
        })
        .collect();
    let mut acc = vec![0.0; c * m];
    for part in parts {
        acc.iter_mut().zip(part).for_each(|(a, b)| *a += b);
    }
    Ok(acc)
}

fn tuples_by_message(project: &[u32], m: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new(); m];
    for (t, &mm) in project.iter().enumerate() {
        out[mm as usize].push(t);
    }
    out
}

pub(crate) fn fold(values: impl Iterator<Item = f64>, criterion: Criterion) -> f64 {
    let mut n = 0usize;
    let mut acc = match criterion {
        Criterion::Average => 0.0,
        Criterion::Maximum => f64::NEG_INFINITY,
    };
    for v in values {
        n += 1;
        match criterion {
            Criterion::Average => acc += v,
            Criterion::Maximum => acc = acc.max(v),
        }
    }
    match (criterion, n) {
        (_, 0) => 0.0,
        (Criterion::Average, n) => acc / n as f64,
        (Criterion::Maximum, _) => acc,
    }
}

pub(crate) fn finish(
    method: Method,
    criterion: Criterion,
    missed: Vec<Estimate>,
    wrong: Vec<PairEstimate>,
    pairs_sampled: bool,
) -> ErrorReport {
    let max_missed = missed.iter().map(|e| e.value).fold(0.0, f64::max);
    let max_wrong = wrong.iter().map(|e| e.estimate.value).fold(0.0, f64::max);
    ErrorReport {
        method,
        criterion,
        missed,
        wrong,
        pairs_sampled,
        max_missed,
        max_wrong,
    }
}

/// Evaluates missed and wrong identification for one receiver.
pub fn evaluate(
    tx: &Transmission,
    side: &SideView,
    mode: EvalMode,
    criterion: Criterion,
    pair_seed: u64,
) -> Result<ErrorReport> {
    let n = tx.codewords.first().map_or(0, |c| c.len());
    if side.project.len() != tx.laws.len() {
        return Err(Error::Dimension("projection and tuple list differ".into()));
    }
    let m = side.decoder.message_count();
    let (pairs, sampled) = select_pairs(m, DEFAULT_PAIR_SAMPLE, pair_seed);
    let exact_ok = |budget: u64| {
        output_states(side.channel.output_size(), n).is_some_and(|s| s <= budget)
    };
    match mode {
        EvalMode::Exact { budget_states } => {
            evaluate_exact(tx, side, n, budget_states, criterion, &pairs, sampled)
        }
        EvalMode::Auto { budget_states, .. } if exact_ok(budget_states) => {
            evaluate_exact(tx, side, n, budget_states, criterion, &pairs, sampled)
        }
        EvalMode::MonteCarlo { trials, seed } | EvalMode::Auto { trials, seed, .. } => {
            evaluate_mc(tx, side, trials, seed, criterion, &pairs, sampled)
        }
    }
}

fn evaluate_exact(
    tx: &Transmission,
    side: &SideView,
    n: usize,
    budget: u64,
    criterion: Criterion,
    pairs: &[(u32, u32)],
    sampled: bool,
) -> Result<ErrorReport> {
    let m = side.decoder.message_count();
    let acc = exact_acceptance(tx, side, n, budget)?;
    let accept = |t: usize, j: usize| -> f64 {
        tx.laws[t]
            .iter()
            .map(|&(c, w)| w * acc[c as usize * m + j])
            .sum::<f64>()
    };
    let groups = tuples_by_message(side.project, m);
    let missed = (0..m)
        .map(|j| {
            Estimate::exact(fold(
                groups[j].iter().map(|&t| 1.0 - accept(t, j)),
                criterion,
            ))
        })
        .collect();
    let wrong = pairs
        .iter()
        .map(|&(a, b)| PairEstimate {
            sent: a,
            tested: b,
            estimate: Estimate::exact(fold(
                groups[a as usize].iter().map(|&t| accept(t, b as usize)),
                criterion,
            )),
        })
        .collect();
    Ok(finish(Method::Exact, criterion, missed, wrong, sampled))
}

struct TupleCounts {
    missed: u64,
    /// Acceptance counts for the tested messages of this tuple's message.
    wrong: Vec<u64>,
}

fn evaluate_mc(
    tx: &Transmission,
    side: &SideView,
    trials: u64,
    seed: u64,
    criterion: Criterion,
    pairs: &[(u32, u32)],
    sampled: bool,
) -> Result<ErrorReport> {
    if trials == 0 {
        return Err(Error::Param("Monte Carlo needs at least one trial".into()));
    }
    let m = side.decoder.message_count();
    let mut targets: Vec<Vec<u32>> = vec![Vec::new(); m];
    for &(a, b) in pairs {
        targets[a as usize].push(b);
    }
    let counts: Vec<TupleCounts> = (0..tx.laws.len())
        .into_par_iter()
        .map(|t| {
            let mut rng = seed::stream(seed, "mc", &[t as u64]);
            let law = &tx.laws[t];
            let own = side.project[t] as usize;
            let tg = &targets[own];
            let mut cdf = Vec::with_capacity(law.len());
            let mut s = 0.0;
            for &(_, w) in law {
                s += w;
                cdf.push(s);
            }
            let mut ok = vec![false; m];
            let mut y = Vec::new();
            let mut out = TupleCounts {
                missed: 0,
                wrong: vec![0; tg.len()],
            };
            for _ in 0..trials {
                let u: f64 = rng.gen::<f64>() * s;
                let k = cdf.iter().position(|&c| u < c).unwrap_or(law.len() - 1);
                let x = &tx.codewords[law[k].0 as usize];
                side.channel.sample_output_into(x, &mut rng, &mut y);
                side.decoder.accept_all(&y, &mut ok);
                if !ok[own] {
                    out.missed += 1;
                }
                for (i, &b) in tg.iter().enumerate() {
                    if ok[b as usize] {
                        out.wrong[i] += 1;
                    }
                }
            }
            out
        })
        .collect();
    let groups = tuples_by_message(side.project, m);
    let combine = |ts: &[usize], get: &dyn Fn(&TupleCounts) -> u64| -> Estimate {
        match criterion {
            Criterion::Average => {
                let k: u64 = ts.iter().map(|&t| get(&counts[t])).sum();
                Estimate::wilson(k, trials * ts.len().max(1) as u64)
            }
            Criterion::Maximum => ts
                .iter()
                .map(|&t| Estimate::wilson(get(&counts[t]), trials))
                .fold(None::<Estimate>, |best, e| match best {
                    Some(b) if b.value >= e.value => Some(b),
                    _ => Some(e),
                })
                .unwrap_or(Estimate::exact(0.0)),
        }
    };
    let missed = (0..m).map(|j| combine(&groups[j], &|c| c.missed)).collect();
    let wrong = pairs
        .iter()
        .map(|&(a, b)| {
            let pos = targets[a as usize].iter().position(|&x| x == b).unwrap();
            PairEstimate {
                sent: a,
                tested: b,
                estimate: combine(&groups[a as usize], &|c| c.wrong[pos]),
            }
        })
        .collect();
    Ok(finish(
        Method::MonteCarlo {
            trials_per_tuple: trials,
        },
        criterion,
        missed,
        wrong,
        sampled,
    ))
}

/// Output law of a codeword mixture, by enumeration (for small n).
pub fn output_distribution(
    codewords: &[(Sequence, f64)],
    w: &Dmc,
    budget: u64,
) -> Result<Vec<f64>> {
    let n = codewords.first().map_or(0, |c| c.0.len());
    let ny = w.output_size();
    let states = output_states(ny, n)
        .filter(|&s| s <= budget)
        .ok_or_else(|| Error::Budget(format!("|Y|^n = {ny}^{n} exceeds {budget}")))?;
    let mut y = vec![0u8; n];
    Ok((0..states)
        .map(|idx| {
            decode_index(idx, ny as u64, &mut y);
            codewords
                .iter()
                .map(|(x, q)| q * w.nfold_prob_unchecked(x, &y))
                .sum()
        })
        .collect())
}

pub fn total_variation(a: &[f64], b: &[f64]) -> f64 {
    0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
}
