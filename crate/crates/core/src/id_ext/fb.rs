//! Broadcast ID with one-sided feedback from receiver Y.
//!
//! The first n channel uses carry the pool entry V_{m_Y,m_Z}, drawn from
//! bin(m_Z) only. The encoder then sees Y^n and sends, over k = ⌈√n⌉ more
//! uses, the transmission codeword of Φ(Y^n, m_Y), a keyed random map onto
//! the transmission messages. Receiver Y accepts m′ iff the tail decodes to
//! Φ(y^n, m′); receiver Z uses bin typicality on its first n outputs.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{Bc2, Dmc, Pmf, Sequence};
use crate::error::{Error, Result};
use crate::eval::{
    decode_index, finish, fold, output_distribution, output_states, select_pairs, total_variation, Criterion,
    ErrorReport, Estimate, EvalMode, Method, PairEstimate, DEFAULT_PAIR_SAMPLE,
};
use crate::id_bc::{check_entries, draw_bins, law_of, sparse_tv, uniform_on, IndexDiag, Side};
use crate::id_dmc::{eps_warning, pool_checks, structural};
use crate::id_ext::transmission::{build_transmission_code, CodebookSpec, TransmissionCode};
use crate::info::{capacity_value, entropy, mutual_information};
use crate::pool::{self, Pool};
use crate::seed;
use crate::tuples::{self, OTHER_TUPLE_LIMIT};
use crate::validate::{Reason, Validation};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FbIdParams {
    pub n: usize,
    pub m_y_count: usize,
    pub m_z_count: usize,
    pub id_rate_y: f64,
    pub id_rate_z: f64,
    pub bin_rate_z: f64,
    pub pool_rate: f64,
    /// Rate R̂_Y of the appended transmission code.
    pub transmission_rate: f64,
    pub input_pmf: Pmf,
    pub eps: f64,
    pub seed: u64,
    #[serde(default)]
    pub codebook: CodebookSpec,
}

/// Transmission blocklength ⌈√n⌉.
pub fn tail_length(n: usize) -> usize {
    let mut k = (n as f64).sqrt() as usize;
    while k * k < n {
        k += 1;
    }
    k
}

impl FbIdParams {
    pub fn validate(&self, bc: &Bc2) -> Validation {
        let mut v = Validation::default();
        structural(
            &mut v,
            self.n,
            &[self.m_y_count, self.m_z_count],
            &[self.id_rate_y, self.id_rate_z, self.bin_rate_z, self.pool_rate, self.transmission_rate],
            self.eps,
        );
        if self.input_pmf.len() != bc.input_size() {
            v.error(Reason::Structure, "input pmf does not match channel input");
            return v;
        }
        let (wy, wz) = (bc.marginal_y(), bc.marginal_z());
        let iy = mutual_information(&self.input_pmf, wy).unwrap_or(0.0);
        let iz = mutual_information(&self.input_pmf, wz).unwrap_or(0.0);
        let cy = capacity_value(wy);
        let hy = self.input_pmf.through(wy).map(|q| entropy(&q)).unwrap_or(0.0);
        let y_limit = if cy > crate::info::POSITIVE_CAPACITY { hy } else { 0.0 };
        v.require_below(Reason::IdRateNotBelowEntropy, self.id_rate_y, y_limit, "R_Y < H(PW_Y)");
        v.require_below(Reason::IdRateNotBelowBinRate, self.id_rate_z, self.bin_rate_z, "R_Z < R̃_Z");
        v.require_below(Reason::BinRateNotBelowInformation, self.bin_rate_z, iz, "R̃_Z < I(P,W_Z)");
        v.require_below(Reason::PoolRateNotAboveInformation, iy, self.pool_rate, "I(P,W_Y) < R_pool");
        v.require_below(Reason::BinRateNotBelowPoolRate, self.bin_rate_z, self.pool_rate, "R̃_Z < R_pool");
        if !(self.transmission_rate > 0.0 && self.transmission_rate < cy) {
            v.error(
                Reason::TransmissionRateOutOfRange,
                format!("R̂_Y = {} not in (0, {cy})", self.transmission_rate),
            );
        }
        pool_checks(&mut v, self.n, self.pool_rate, &[(self.m_z_count, self.bin_rate_z)]);
        eps_warning(&mut v, &self.input_pmf, wz, self.bin_rate_z, self.eps, "Z");
        if let Ok(j) = self.input_pmf.joint_with(wy) {
            let d = self.eps * entropy(&j);
            if !(3.0 * d < hy - self.id_rate_y) {
                v.warning(
                    Reason::EpsTooLarge,
                    format!("Y: 3·eps·H(P×W_Y) = {:.6} is not below H(PW_Y) − R_Y = {:.6}", 3.0 * d, hy - self.id_rate_y),
                );
            }
        }
        v
    }
}

#[derive(Clone, Debug)]
pub struct FbIdCode {
    pub pool: Pool,
    pub index_sets_z: Vec<Vec<u64>>,
    pub m_y_count: usize,
    /// Sent when bin(m_Z) is empty.
    pub v_star: u64,
    pub seed: u64,
    pub eps: f64,
    pub transmission: TransmissionCode,
}

pub fn build_fb_code(params: &FbIdParams, wy: &Dmc) -> Result<FbIdCode> {
    if params.n == 0 || params.m_y_count == 0 || params.m_z_count == 0 || params.input_pmf.is_empty() {
        return Err(Error::Param("blocklength and message counts must be positive".into()));
    }
    let size = pool::pool_size(params.n, params.pool_rate)?;
    let pz = pool::selection_prob(params.n, params.pool_rate, params.bin_rate_z);
    check_entries(params.m_z_count, size, pz)?;
    let transmission = build_transmission_code(
        wy,
        tail_length(params.n),
        params.transmission_rate,
        seed::derive(params.seed, "transmission", &[]),
        params.codebook,
    )?;
    Ok(FbIdCode {
        pool: Pool::generate(params.n, size, &params.input_pmf, params.seed),
        index_sets_z: draw_bins(params.seed, Side::Y.tag(), params.m_z_count, size, pz),
        m_y_count: params.m_y_count,
        v_star: 0,
        seed: params.seed,
        eps: params.eps,
        transmission,
    })
}

impl FbIdCode {
    pub fn n(&self) -> usize {
        self.pool.blocklength()
    }

    pub fn m_z_count(&self) -> usize {
        self.index_sets_z.len()
    }

    /// V_{m_Y,m_Z}: uniform over bin(m_Z), v★ when the bin is empty.
    pub fn codeword_index(&self, my: usize, mz: usize) -> u64 {
        let bin = &self.index_sets_z[mz];
        if bin.is_empty() {
            return self.v_star;
        }
        let mut rng = seed::stream_trimmed(self.seed, "codeword", &[my as u64, mz as u64]);
        bin[rng.gen_range(0..bin.len())]
    }

    /// Φ(y^n, m_Y).
    pub fn phi(&self, head: &[u8], my: usize) -> u32 {
        let key = seed::derive(self.seed, "phi", &[my as u64]);
        seed::reduce(seed::hash_bytes(key, head), self.transmission.size() as u64) as u32
    }

    /// Receiver Y's decision for m′ from its n + k outputs.
    pub fn accepts_y(&self, y: &[u8], m_prime: usize) -> bool {
        let n = self.n();
        self.transmission.decode(&y[n..]) == self.phi(&y[..n], m_prime)
    }
}

/// One simulated transmission: both phases at both receivers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FbTranscript {
    pub x: Sequence,
    pub y: Sequence,
    pub z: Sequence,
    /// Transmission message sent in the second phase.
    pub u: u32,
}

/// Runs the causal two-phase encoder over the broadcast channel.
pub fn encode_fb<R: Rng + ?Sized>(code: &FbIdCode, my: usize, mz: usize, bc: &Bc2, rng: &mut R) -> FbTranscript {
    let mut x = code.pool.get(code.codeword_index(my, mz)).into_owned();
    let (mut y, mut z) = bc.sample_outputs(&x, rng);
    let u = code.phi(&y, my);
    for &s in code.transmission.encode(u) {
        let (a, b) = bc.sample_pair(s as usize, rng);
        x.push(s);
        y.push(a);
        z.push(b);
    }
    FbTranscript { x, y, z, u }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FbReport {
    pub y: ErrorReport,
    pub z: ErrorReport,
    pub y_others_sampled: bool,
    pub z_others_sampled: bool,
}

impl FbReport {
    pub fn max_error(&self) -> f64 {
        self.y.max_error().max(self.z.max_error())
    }
}

struct Tuple {
    my: usize,
    x: Sequence,
}

fn y_side_exact(
    code: &FbIdCode,
    wy: &Dmc,
    tuples: &[Tuple],
    budget: u64,
) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let n = code.n();
    let ny = wy.output_size();
    let states = output_states(ny, n)
        .filter(|&s| s <= budget)
        .ok_or_else(|| Error::Budget(format!("|Y|^n = {ny}^{n} exceeds {budget}")))?;
    let t = code.transmission.transition_matrix(budget)?;
    let my_count = code.m_y_count;
    let chunks = 64u64.min(states);
    let per = states.div_ceil(chunks);
    let parts: Vec<(Vec<f64>, Vec<f64>)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut missed = vec![0.0; tuples.len()];
            let mut accept = vec![0.0; tuples.len() * my_count];
            let mut y = vec![0u8; n];
            let mut phis = vec![0u32; my_count];
            for idx in c * per..((c + 1) * per).min(states) {
                decode_index(idx, ny as u64, &mut y);
                for (m, p) in phis.iter_mut().enumerate() {
                    *p = code.phi(&y, m);
                }
                for (i, tp) in tuples.iter().enumerate() {
                    let w = wy.nfold_prob_unchecked(&tp.x, &y);
                    if w == 0.0 {
                        continue;
                    }
                    let row = &t[phis[tp.my] as usize];
                    missed[i] += w * (1.0 - row[phis[tp.my] as usize]);
                    for (m, &p) in phis.iter().enumerate() {
                        accept[i * my_count + m] += w * row[p as usize];
                    }
                }
            }
            (missed, accept)
        })
        .collect();
    let mut missed = vec![0.0; tuples.len()];
    let mut accept = vec![0.0; tuples.len() * my_count];
    for (a, b) in parts {
        missed.iter_mut().zip(a).for_each(|(s, v)| *s += v);
        accept.iter_mut().zip(b).for_each(|(s, v)| *s += v);
    }
    Ok((missed, accept.chunks(my_count).map(|c| c.to_vec()).collect()))
}

/// Per-tuple counts of missed and accepted-by-m′ events.
fn y_side_mc(code: &FbIdCode, wy: &Dmc, tuples: &[Tuple], trials: u64, seed: u64) -> Vec<(u64, Vec<u64>)> {
    let n = code.n();
    let my_count = code.m_y_count;
    tuples
        .par_iter()
        .enumerate()
        .map(|(i, tp)| {
            let mut rng = seed::stream(seed, "mc", &[i as u64]);
            let mut head = Vec::with_capacity(n);
            let mut tail = Vec::new();
            let mut missed = 0;
            let mut acc = vec![0u64; my_count];
            for _ in 0..trials {
                wy.sample_output_into(&tp.x, &mut rng, &mut head);
                let u = code.phi(&head, tp.my);
                wy.sample_output_into(code.transmission.encode(u), &mut rng, &mut tail);
                let d = code.transmission.decode(&tail);
                if d != u {
                    missed += 1;
                }
                for (m, a) in acc.iter_mut().enumerate() {
                    if code.phi(&head, m) == d {
                        *a += 1;
                    }
                }
            }
            (missed, acc)
        })
        .collect()
}

fn y_side_report(code: &FbIdCode, wy: &Dmc, mode: EvalMode, criterion: Criterion) -> Result<(ErrorReport, bool)> {
    let (others, sampled) = tuples::other_tuples(&[code.m_z_count()], OTHER_TUPLE_LIMIT, code.seed, Side::Y.tag());
    let mut list = Vec::new();
    for my in 0..code.m_y_count {
        for o in &others {
            list.push(Tuple {
                my,
                x: code.pool.get(code.codeword_index(my, o[0] as usize)).into_owned(),
            });
        }
    }
    let per = others.len();
    let m = code.m_y_count;
    let (pairs, pairs_sampled) = select_pairs(m, DEFAULT_PAIR_SAMPLE, seed::derive(code.seed, "pairs", &[0]));
    let n = code.n();
    let k = code.transmission.k;
    let ny = wy.output_size() as u64;
    let affordable = |b: u64| output_states(ny as usize, n.max(k)).is_some_and(|s| s <= b);
    let exact_budget = match mode {
        EvalMode::Exact { budget_states } => Some(budget_states),
        EvalMode::Auto { budget_states, .. } if affordable(budget_states) => Some(budget_states),
        _ => None,
    };
    let report = if let Some(budget) = exact_budget {
        let (missed, accept) = y_side_exact(code, wy, &list, budget)?;
        let missed_est = (0..m)
            .map(|j| Estimate::exact(fold(missed[j * per..(j + 1) * per].iter().cloned(), criterion)))
            .collect();
        let wrong = pairs
            .iter()
            .map(|&(a, b)| PairEstimate {
                sent: a,
                tested: b,
                estimate: Estimate::exact(fold(
                    (a as usize * per..(a as usize + 1) * per).map(|i| accept[i][b as usize]),
                    criterion,
                )),
            })
            .collect();
        finish(Method::Exact, criterion, missed_est, wrong, pairs_sampled)
    } else {
        let (trials, s) = match mode {
            EvalMode::MonteCarlo { trials, seed } | EvalMode::Auto { trials, seed, .. } => (trials, seed),
            EvalMode::Exact { .. } => unreachable!(),
        };
        if trials == 0 {
            return Err(Error::Param("Monte Carlo needs at least one trial".into()));
        }
        let counts = y_side_mc(code, wy, &list, trials, seed::derive(s, "mode", &[Side::Y.tag()]));
        let combine = |range: std::ops::Range<usize>, get: &dyn Fn(usize) -> u64| -> Estimate {
            match criterion {
                Criterion::Average => {
                    let total: u64 = range.clone().map(get).sum();
                    Estimate::wilson(total, trials * range.len() as u64)
                }
                Criterion::Maximum => range
                    .map(|i| Estimate::wilson(get(i), trials))
                    .fold(None::<Estimate>, |best, e| match best {
                        Some(b) if b.value >= e.value => Some(b),
                        _ => Some(e),
                    })
                    .unwrap_or(Estimate::exact(0.0)),
            }
        };
        let missed_est = (0..m)
            .map(|j| combine(j * per..(j + 1) * per, &|i| counts[i].0))
            .collect();
        let wrong = pairs
            .iter()
            .map(|&(a, b)| PairEstimate {
                sent: a,
                tested: b,
                estimate: combine(a as usize * per..(a as usize + 1) * per, &|i| counts[i].1[b as usize]),
            })
            .collect();
        finish(
            Method::MonteCarlo {
                trials_per_tuple: trials,
            },
            criterion,
            missed_est,
            wrong,
            pairs_sampled,
        )
    };
    Ok((report, sampled))
}

pub fn evaluate_fb(code: &FbIdCode, bc: &Bc2, mode: EvalMode, criterion: Criterion) -> Result<FbReport> {
    let (y, ys) = y_side_report(code, bc.marginal_y(), mode, criterion)?;
    let (others, zs) = tuples::other_tuples(&[code.m_y_count], OTHER_TUPLE_LIMIT, code.seed, Side::Z.tag());
    let index_of = |own: u32, o: &[u32]| code.codeword_index(o[0] as usize, own as usize);
    let z = tuples::side_report(
        &code.pool,
        &code.index_sets_z,
        bc.marginal_z(),
        code.eps,
        code.m_z_count(),
        &others,
        &index_of,
        mode.salted(Side::Z.tag()),
        criterion,
        seed::derive(code.seed, "pairs", &[Side::Z.tag()]),
    )?;
    Ok(FbReport {
        y,
        z,
        y_others_sampled: ys,
        z_others_sampled: zs,
    })
}

/// Law of V_{·,m_Z} against uniform on bin(m_Z). With `expected`, each
/// V_{m_Y,m_Z} is replaced by its generation law (uniform on the bin), so
/// the distance vanishes whenever the bin is nonempty.
pub fn fb_index_distribution_diag(code: &FbIdCode, mz: usize, expected: bool) -> IndexDiag {
    let bin = &code.index_sets_z[mz];
    let p_tilde = uniform_on(bin, code.v_star);
    let (p_v, sampled) = if expected {
        (p_tilde.clone(), false)
    } else {
        let (others, s) = tuples::other_tuples(&[code.m_y_count], crate::id_bc::DIAG_FULL_LIMIT, code.seed, 17);
        (law_of(others.iter().map(|o| code.codeword_index(o[0] as usize, mz)), others.len()), s)
    };
    IndexDiag {
        tv: sparse_tv(&p_v, &p_tilde),
        p_v,
        p_tilde,
        sampled,
    }
}

/// TV between the output law of a uniformly chosen pool entry and (PW)^n.
pub fn resolvability_tv(pool: &Pool, w: &Dmc, budget: u64) -> Result<f64> {
    let n = pool.blocklength();
    let size = pool.size();
    if size > budget {
        return Err(Error::Budget(format!("pool of {size} entries")));
    }
    let words: Vec<(Sequence, f64)> = (0..size).map(|v| (pool.get(v).into_owned(), 1.0 / size as f64)).collect();
    let induced = output_distribution(&words, w, budget)?;
    let q = pool.pmf().through(w)?;
    let ny = w.output_size() as u64;
    let mut y = vec![0u8; n];
    let product: Vec<f64> = (0..induced.len() as u64)
        .map(|idx| {
            decode_index(idx, ny, &mut y);
            y.iter().map(|&b| q.get(b as usize)).product()
        })
        .collect();
    Ok(total_variation(&induced, &product))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::id_ext::transmission::TxDecoder;

    fn params(n: usize) -> FbIdParams {
        FbIdParams {
            n,
            m_y_count: 3,
            m_z_count: 3,
            id_rate_y: 0.05,
            id_rate_z: 0.02,
            bin_rate_z: 0.1,
            pool_rate: 0.5,
            transmission_rate: 0.3,
            input_pmf: Pmf::uniform(2),
            eps: 1.0,
            seed: 21,
            codebook: CodebookSpec {
                decoder: TxDecoder::MaxLikelihood,
                candidates: 8,
            },
        }
    }

    fn bsc_pair() -> Bc2 {
        Bc2::product(&Dmc::bsc(0.05), &Dmc::bsc(0.1)).unwrap()
    }

    #[test]
    fn tail_is_ceiling_square_root() {
        assert_eq!(tail_length(16), 4);
        assert_eq!(tail_length(17), 5);
        assert_eq!(tail_length(36), 6);
        assert_eq!(tail_length(1), 1);
    }

    #[test]
    fn validator_requires_pool_above_information() {
        let bc = bsc_pair();
        let p = params(9);
        let v = p.validate(&bc);
        assert!(v.is_valid(), "{:?}", v);
        let mut q = params(9);
        q.pool_rate = 0.4;
        assert!(q.validate(&bc).has(Reason::PoolRateNotAboveInformation));
        let mut r = params(9);
        r.transmission_rate = 0.6;
        assert!(r.validate(&bc).has(Reason::TransmissionRateOutOfRange));
    }

    #[test]
    fn transcript_has_both_phases() {
        let bc = bsc_pair();
        let code = build_fb_code(&params(9), bc.marginal_y()).unwrap();
        let mut rng = seed::stream(0, "t", &[]);
        let t = encode_fb(&code, 1, 2, &bc, &mut rng);
        assert_eq!(t.x.len(), 12);
        assert_eq!(t.y.len(), 12);
        assert_eq!(&t.x[..9], &code.pool.get(code.codeword_index(1, 2))[..]);
        assert_eq!(&t.x[9..], code.transmission.encode(code.phi(&t.y[..9], 1)));
    }

    #[test]
    fn exact_and_monte_carlo_y_reports_agree() {
        let bc = bsc_pair();
        let code = build_fb_code(&params(9), bc.marginal_y()).unwrap();
        let e = evaluate_fb(&code, &bc, EvalMode::exact(), Criterion::Average).unwrap();
        let m = evaluate_fb(&code, &bc, EvalMode::monte_carlo(40_000, 1), Criterion::Average).unwrap();
        for (a, b) in e.y.all_estimates().iter().zip(m.y.all_estimates()) {
            assert!(b.covers(a.value, 4.0), "{} vs {:?}", a.value, b);
        }
    }

    #[test]
    fn noiseless_y_with_distinct_phi_has_no_wrong_identification() {
        let w = Dmc::noiseless(2);
        let bc = Bc2::product(&w, &Dmc::bsc(0.1)).unwrap();
        let mut p = params(9);
        p.m_y_count = 2;
        p.pool_rate = 0.75;
        p.transmission_rate = 0.6;
        let code = build_fb_code(&p, &w).unwrap();
        let r = evaluate_fb(&code, &bc, EvalMode::exact(), Criterion::Average).unwrap();
        assert_eq!(r.y.max_missed, 0.0);
        // Wrong identification happens exactly when Φ(y, 0) = Φ(y, 1).
        for my in 0..2 {
            for mz in 0..3 {
                let y = code.pool.get(code.codeword_index(my, mz)).into_owned();
                if code.phi(&y, 0) != code.phi(&y, 1) {
                    assert!(!code.accepts_y(&[y.clone(), code.transmission.encode(code.phi(&y, my)).to_vec()].concat(), 1 - my));
                }
            }
        }
    }

    #[test]
    fn expected_index_law_is_uniform_on_bin() {
        let bc = bsc_pair();
        let code = build_fb_code(&params(9), bc.marginal_y()).unwrap();
        for mz in 0..3 {
            if !code.index_sets_z[mz].is_empty() {
                assert_eq!(fb_index_distribution_diag(&code, mz, true).tv, 0.0);
            }
        }
    }

    #[test]
    fn z_bins_match_single_user_bins() {
        let bc = bsc_pair();
        let code = build_fb_code(&params(9), bc.marginal_y()).unwrap();
        let single = crate::id_dmc::build_dmc_code(&crate::id_dmc::IdParams {
            n: 9,
            m_count: 3,
            id_rate: 0.02,
            bin_rate: 0.1,
            pool_rate: 0.5,
            input_pmf: Pmf::uniform(2),
            eps: 1.0,
            seed: 21,
        })
        .unwrap();
        assert_eq!(single.index_sets, code.index_sets_z);
        assert_eq!(single.pool, code.pool);
    }

    #[test]
    fn resolvability_distance_is_a_distance() {
        let pool = Pool::generate(6, 40, &Pmf::uniform(2), 3);
        let tv = resolvability_tv(&pool, &Dmc::bsc(0.1), 1 << 20).unwrap();
        assert!(tv > 0.0 && tv < 1.0);
    }
}
