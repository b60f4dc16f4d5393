//! Single-user identification code: a pool of i.i.d. codewords, one random
//! bin of pool indices per message, a stochastic encoder choosing uniformly
//! within the bin and joint-typicality decision sets.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{Dmc, Pmf, Sequence};
use crate::error::{Error, Result};
use crate::eval::{self, BinDecoder, Criterion, ErrorReport, EvalMode, SideView, Transmission};
use crate::info::{entropy, mutual_information};
use crate::pool::{self, Pool, TAG_Y};
use crate::seed;
use crate::typeskit::check_eps;
use crate::validate::{Reason, Validation};

/// Codes whose bins would hold more indices than this are refused.
pub const MAX_INDEX_ENTRIES: f64 = (1u64 << 28) as f64;
/// Pools are capped at this size even when generated lazily.
pub const MAX_POOL: u64 = 1 << 52;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdParams {
    pub n: usize,
    pub m_count: usize,
    /// Nominal ID rate R; the message count itself is chosen freely.
    pub id_rate: f64,
    pub bin_rate: f64,
    pub pool_rate: f64,
    pub input_pmf: Pmf,
    pub eps: f64,
    pub seed: u64,
}

/// (1/n)·ln ln|M|, defined for |M| ≥ 3.
pub fn empirical_id_rate(n: usize, m_count: usize) -> Option<f64> {
    (m_count >= 3).then(|| (m_count as f64).ln().ln() / n as f64)
}

/// ε = (I − R̃) / (4·H(P×W)), half of the largest value the rate
/// constraint 2ε·H(P×W) < I − R̃ allows.
pub fn default_eps(pmf: &Pmf, w: &Dmc, bin_rate: f64) -> Result<f64> {
    let i = mutual_information(pmf, w)?;
    let h = entropy(&pmf.joint_with(w)?);
    Ok((0.25 * (i - bin_rate) / h).max(0.0))
}

pub(crate) fn structural(v: &mut Validation, n: usize, counts: &[usize], rates: &[f64], eps: f64) {
    if n == 0 || n > u8::MAX as usize * 64 {
        v.error(Reason::Structure, format!("blocklength {n} out of range"));
    }
    if counts.contains(&0) {
        v.error(Reason::Structure, "message counts must be positive");
    }
    if rates.iter().any(|r| !r.is_finite() || *r < 0.0) {
        v.error(Reason::Structure, "rates must be finite and non-negative");
    }
    if !(eps >= 0.0) {
        v.error(Reason::Structure, "eps must be non-negative");
    }
}

/// Checks the ε constraint for one receiver, as a warning.
pub(crate) fn eps_warning(v: &mut Validation, pmf: &Pmf, w: &Dmc, bin_rate: f64, eps: f64, side: &str) {
    let (Ok(i), Ok(joint)) = (mutual_information(pmf, w), pmf.joint_with(w)) else {
        return;
    };
    if let Err(e) = check_eps(eps, entropy(&joint), i, bin_rate) {
        v.warning(Reason::EpsTooLarge, format!("{side}: {e}"));
    }
}

pub(crate) fn pool_checks(v: &mut Validation, n: usize, pool_rate: f64, bins: &[(usize, f64)]) {
    match pool::pool_size(n, pool_rate) {
        Ok(s) if s <= MAX_POOL => {
            let entries: f64 = bins
                .iter()
                .map(|&(m, rate)| m as f64 * s as f64 * pool::selection_prob(n, pool_rate, rate))
                .sum();
            if entries > MAX_INDEX_ENTRIES {
                v.error(Reason::PoolTooLarge, format!("about {entries:.3e} bin entries"));
            }
        }
        _ => v.error(Reason::PoolTooLarge, format!("pool size e^({n}·{pool_rate})")),
    }
}

impl IdParams {
    pub fn pool_size(&self) -> Result<u64> {
        pool::pool_size(self.n, self.pool_rate)
    }

    pub fn selection_prob(&self) -> f64 {
        pool::selection_prob(self.n, self.pool_rate, self.bin_rate)
    }

    /// Structure plus R < R̃ < I(P,W), R̃ < R_pool; the ε constraint is a warning.
    pub fn validate(&self, w: &Dmc) -> Validation {
        let mut v = Validation::default();
        structural(
            &mut v,
            self.n,
            &[self.m_count],
            &[self.id_rate, self.bin_rate, self.pool_rate],
            self.eps,
        );
        if self.input_pmf.len() != w.input_size() {
            v.error(Reason::Structure, "input pmf does not match channel input");
            return v;
        }
        let i = mutual_information(&self.input_pmf, w).unwrap_or(0.0);
        v.require_below(Reason::IdRateNotBelowBinRate, self.id_rate, self.bin_rate, "R < R̃");
        v.require_below(Reason::BinRateNotBelowInformation, self.bin_rate, i, "R̃ < I(P,W)");
        v.require_below(Reason::BinRateNotBelowPoolRate, self.bin_rate, self.pool_rate, "R̃ < R_pool");
        pool_checks(&mut v, self.n, self.pool_rate, &[(self.m_count, self.bin_rate)]);
        eps_warning(&mut v, &self.input_pmf, w, self.bin_rate, self.eps, "receiver");
        v
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct IdCodeDmc {
    pub pool: Pool,
    pub index_sets: Vec<Vec<u64>>,
    /// Sent when a bin is empty.
    pub v_star: u64,
    pub eps: f64,
}

fn check_build(n: usize, counts: &[usize], pmf: &Pmf, pool_rate: f64, bins: &[(usize, f64)]) -> Result<()> {
    let mut v = Validation::default();
    structural(&mut v, n, counts, &[pool_rate], 0.0);
    pool_checks(&mut v, n, pool_rate, bins);
    if pmf.is_empty() {
        v.error(Reason::Structure, "empty input pmf");
    }
    let first = v.errors().next().map(|i| (i.reason, i.detail.clone()));
    match first {
        Some((Reason::PoolTooLarge, d)) => Err(Error::Budget(d)),
        Some((_, d)) => Err(Error::Param(d)),
        None => Ok(()),
    }
}

/// Draws the pool and the message bins.
pub fn build_dmc_code(params: &IdParams) -> Result<IdCodeDmc> {
    check_build(
        params.n,
        &[params.m_count],
        &params.input_pmf,
        params.pool_rate,
        &[(params.m_count, params.bin_rate)],
    )?;
    let size = params.pool_size()?;
    let p = params.selection_prob();
    let pool = Pool::generate(params.n, size, &params.input_pmf, params.seed);
    let index_sets = (0..params.m_count as u64)
        .map(|m| pool::index_set(params.seed, &[TAG_Y, m], size, p))
        .collect();
    Ok(IdCodeDmc {
        pool,
        index_sets,
        v_star: 0,
        eps: params.eps,
    })
}

impl IdCodeDmc {
    /// Assembles a code from explicit parts (index sets must be increasing).
    pub fn from_parts(pool: Pool, index_sets: Vec<Vec<u64>>, eps: f64) -> Result<Self> {
        for s in &index_sets {
            pool::check_strictly_increasing(s, pool.size())?;
        }
        Ok(IdCodeDmc {
            pool,
            index_sets,
            v_star: 0,
            eps,
        })
    }

    pub fn m_count(&self) -> usize {
        self.index_sets.len()
    }

    pub fn blocklength(&self) -> usize {
        self.pool.blocklength()
    }

    /// Uniform codeword from bin(m), or pool[v★] when the bin is empty.
    pub fn encode<R: Rng + ?Sized>(&self, m: usize, rng: &mut R) -> Sequence {
        let set = &self.index_sets[m];
        let v = if set.is_empty() {
            self.v_star
        } else {
            set[rng.gen_range(0..set.len())]
        };
        self.pool.get(v).into_owned()
    }

    pub fn decoder(&self, w: &Dmc) -> Result<BinDecoder> {
        let joint = self.pool.pmf().joint_with(w)?;
        Ok(BinDecoder::new(
            &self.pool,
            &self.index_sets,
            &joint,
            w.output_size(),
            self.eps,
        ))
    }

    /// Codeword laws: uniform over each bin, or a point mass on v★.
    pub fn transmission(&self) -> Transmission {
        let mut ids = std::collections::BTreeMap::new();
        let mut laws = Vec::with_capacity(self.m_count());
        for set in &self.index_sets {
            let members: Vec<u64> = if set.is_empty() { vec![self.v_star] } else { set.clone() };
            let w = 1.0 / members.len() as f64;
            laws.push(
                members
                    .iter()
                    .map(|v| {
                        let next = ids.len() as u32;
                        (*ids.entry(*v).or_insert(next), w)
                    })
                    .collect(),
            );
        }
        let mut codewords = vec![Vec::new(); ids.len()];
        for (v, i) in ids {
            codewords[i as usize] = self.pool.get(v).into_owned();
        }
        Transmission { codewords, laws }
    }
}

pub fn encode_dmc<R: Rng + ?Sized>(code: &IdCodeDmc, m: usize, rng: &mut R) -> Sequence {
    code.encode(m, rng)
}

/// Whether the m′-focused receiver accepts y.
pub fn decode_accepts(code: &IdCodeDmc, w: &Dmc, m_prime: usize, y: &[u8]) -> Result<bool> {
    if y.len() != code.blocklength() {
        return Err(Error::LengthMismatch {
            left: y.len(),
            right: code.blocklength(),
        });
    }
    Ok(code.decoder(w)?.accepts_message(m_prime, y))
}

pub fn error_report_dmc(code: &IdCodeDmc, w: &Dmc, mode: EvalMode) -> Result<ErrorReport> {
    let tx = code.transmission();
    let dec = code.decoder(w)?;
    let project: Vec<u32> = (0..code.m_count() as u32).collect();
    let side = SideView {
        channel: w,
        decoder: &dec,
        project: &project,
    };
    eval::evaluate(&tx, &side, mode, Criterion::Average, code.pool.seed())
}

/// Outcome of checking the bin-size and pairwise-overlap conditions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GMuDiagnostics {
    pub mu: f64,
    pub delta_n: f64,
    /// Bins with |I_m| ≤ (1 − δ_n)e^{nR̃}.
    pub size_low_failures: usize,
    /// Bins with |I_m| ≥ (1 + δ_n)e^{nR̃}.
    pub size_high_failures: usize,
    /// Pairs with |I_m ∩ I_m′| ≥ e^{n(R̃ − μ/2) + ln 2}.
    pub intersection_failures: usize,
    pub pairs_checked: usize,
    pub pairs_sampled: bool,
    pub pass: bool,
}

/// Upper bound on the probability that the bins violate the conditions:
/// |M|·exp(−e^{n(R̃−μ)−ln2}) + |M|²·exp(−e^{n(R̃−μ)−ln3}).
pub fn g_mu_failure_bound(m_count: usize, n: usize, bin_rate: f64, mu: f64) -> f64 {
    let a = n as f64 * (bin_rate - mu);
    let m = m_count as f64;
    m * (-(a - 2f64.ln()).exp()).exp() + m * m * (-(a - 3f64.ln()).exp()).exp()
}

/// Checks the three bin conditions for μ in (0, min{R_pool − R̃, R̃ − R}).
pub fn check_g_mu(
    code: &IdCodeDmc,
    n: usize,
    id_rate: f64,
    bin_rate: f64,
    pool_rate: f64,
    mu: f64,
    pair_budget: usize,
    seed: u64,
) -> Result<GMuDiagnostics> {
    let hi = (pool_rate - bin_rate).min(bin_rate - id_rate);
    if !(mu > 0.0 && mu < hi) {
        return Err(Error::Param(format!("mu {mu} outside (0, {hi})")));
    }
    let nf = n as f64;
    let delta_n = (-nf * mu / 2.0).exp();
    let target = (nf * bin_rate).exp();
    let cap = (nf * (bin_rate - mu / 2.0) + 2f64.ln()).exp();
    let sizes: Vec<f64> = code.index_sets.iter().map(|s| s.len() as f64).collect();
    let size_low_failures = sizes.iter().filter(|&&s| !(s > (1.0 - delta_n) * target)).count();
    let size_high_failures = sizes.iter().filter(|&&s| !(s < (1.0 + delta_n) * target)).count();
    let m = code.m_count();
    let (pairs, pairs_sampled) = if m * m.saturating_sub(1) / 2 <= pair_budget {
        let all: Vec<(usize, usize)> = (0..m).flat_map(|a| (a + 1..m).map(move |b| (a, b))).collect();
        (all, false)
    } else {
        let mut rng = seed::stream(seed, "gmu-pairs", &[]);
        let picks = (0..pair_budget)
            .map(|_| {
                let a = rng.gen_range(0..m);
                let mut b = rng.gen_range(0..m - 1);
                if b >= a {
                    b += 1;
                }
                (a.min(b), a.max(b))
            })
            .collect();
        (picks, true)
    };
    let intersection_failures = pairs
        .iter()
        .filter(|&&(a, b)| {
            let k = pool::intersect_sorted(&code.index_sets[a], &code.index_sets[b]).len() as f64;
            !(k < cap)
        })
        .count();
    Ok(GMuDiagnostics {
        mu,
        delta_n,
        size_low_failures,
        size_high_failures,
        intersection_failures,
        pairs_checked: pairs.len(),
        pairs_sampled,
        pass: size_low_failures + size_high_failures + intersection_failures == 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::EvalMode;

    fn params(n: usize, m: usize, bin: f64, pool: f64) -> IdParams {
        IdParams {
            n,
            m_count: m,
            id_rate: 0.01,
            bin_rate: bin,
            pool_rate: pool,
            input_pmf: Pmf::uniform(2),
            eps: 0.5,
            seed: 11,
        }
    }

    #[test]
    fn pool_size_and_full_bins() {
        let p = params(10, 3, 0.4, 0.4);
        let code = build_dmc_code(&p).unwrap();
        assert_eq!(code.pool.size(), 55);
        for s in &code.index_sets {
            assert_eq!(s, &(0..55).collect::<Vec<u64>>());
        }
    }

    #[test]
    fn encoder_singleton_and_empty_bins() {
        let pmf = Pmf::uniform(2);
        let seqs: Vec<Sequence> = (0..10u8).map(|i| vec![i & 1, (i >> 1) & 1, (i >> 2) & 1, i >> 3]).collect();
        let pool = Pool::from_sequences(seqs.clone(), &pmf).unwrap();
        let code = IdCodeDmc::from_parts(pool, vec![vec![7], vec![]], 0.0).unwrap();
        let mut rng = seed::stream(0, "t", &[]);
        for _ in 0..20 {
            assert_eq!(code.encode(0, &mut rng), seqs[7]);
            assert_eq!(code.encode(1, &mut rng), seqs[0]);
        }
    }

    #[test]
    fn noiseless_disjoint_singletons_have_no_errors() {
        let pmf = Pmf::uniform(2);
        let pool = Pool::from_sequences(vec![vec![0, 1, 0, 1], vec![1, 0, 1, 0], vec![0, 0, 1, 1]], &pmf).unwrap();
        let code = IdCodeDmc::from_parts(pool, vec![vec![0], vec![1], vec![2]], 0.0).unwrap();
        let r = error_report_dmc(&code, &Dmc::noiseless(2), EvalMode::exact()).unwrap();
        assert_eq!(r.max_missed, 0.0);
        assert_eq!(r.max_wrong, 0.0);
    }

    #[test]
    fn identical_bins_cannot_be_separated() {
        let code = build_dmc_code(&params(6, 2, 0.2, 0.3)).unwrap();
        let shared = code.index_sets[0].clone();
        let code = IdCodeDmc::from_parts(code.pool, vec![shared.clone(), shared], 0.5).unwrap();
        let r = error_report_dmc(&code, &Dmc::bsc(0.1), EvalMode::exact()).unwrap();
        let wrong = r.wrong_of(0, 1).unwrap().value;
        assert!(wrong >= 1.0 - r.missed[0].value - 1e-12);
    }

    #[test]
    fn validator_flags_rate_violations() {
        let w = Dmc::bsc(0.1);
        let mut p = params(10, 4, 0.2, 0.3);
        p.eps = 0.01;
        assert!(p.validate(&w).is_valid());
        p.bin_rate = 0.5;
        let v = p.validate(&w);
        assert!(v.has(Reason::BinRateNotBelowInformation));
        assert!(v.has(Reason::BinRateNotBelowPoolRate));
        assert!(!v.is_valid());
        let mut q = params(10, 4, 0.2, 0.3);
        q.eps = 0.9;
        let v = q.validate(&w);
        assert!(v.is_valid() && v.has(Reason::EpsTooLarge));
    }

    #[test]
    fn g_mu_identical_bins_fail_intersection() {
        let code = build_dmc_code(&params(14, 2, 0.3, 0.45)).unwrap();
        let shared = code.index_sets[0].clone();
        let twin = IdCodeDmc::from_parts(code.pool.clone(), vec![shared.clone(), shared], 0.5).unwrap();
        // e^{nμ/2} = e^{0.98} > 2, so a shared bin overlaps too much.
        let d = check_g_mu(&twin, 14, 0.05, 0.3, 0.45, 0.14, 100, 0).unwrap();
        assert_eq!(d.intersection_failures, 1);
        assert!(check_g_mu(&twin, 14, 0.05, 0.3, 0.45, 0.2, 100, 0).is_err());
    }

    #[test]
    fn g_mu_full_bins_pass_size_conditions() {
        let mut p = params(8, 3, 0.3, 0.3 + 1e-7);
        p.id_rate = 0.1;
        let code = build_dmc_code(&p).unwrap();
        let d = check_g_mu(&code, 8, 0.1, 0.3, 0.3 + 1e-7, 5e-8, 100, 0).unwrap();
        assert_eq!(d.size_low_failures + d.size_high_failures, 0);
    }

    #[test]
    fn empirical_rate_needs_three_messages() {
        assert!(empirical_id_rate(10, 2).is_none());
        assert!((empirical_id_rate(10, 16).unwrap() - 16f64.ln().ln() / 10.0).abs() < 1e-15);
    }
}
