//! Three-receiver broadcast ID code: one bin family per receiver and V drawn
//! from the triple intersection.

use serde::{Deserialize, Serialize};

use crate::channel::{Bc3, Pmf, Sequence};
use crate::error::{Error, Result};
use crate::eval::{Criterion, ErrorReport, EvalMode};
use crate::id_bc::{check_entries, draw_bins, keyed_index};
use crate::id_dmc::{eps_warning, pool_checks, structural};
use crate::info::mutual_information;
use crate::pool::{self, Pool};
use crate::seed;
use crate::tuples::{self, OTHER_TUPLE_LIMIT};
use crate::validate::{Reason, Validation};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bc3IdParams {
    pub n: usize,
    pub m_counts: [usize; 3],
    pub id_rates: [f64; 3],
    pub bin_rates: [f64; 3],
    pub pool_rate: f64,
    pub input_pmf: Pmf,
    pub eps: f64,
    pub seed: u64,
}

impl Bc3IdParams {
    pub fn validate(&self, bc: &Bc3) -> Validation {
        let mut v = Validation::default();
        let mut rates = self.id_rates.to_vec();
        rates.extend(self.bin_rates);
        rates.push(self.pool_rate);
        structural(&mut v, self.n, &self.m_counts, &rates, self.eps);
        if self.input_pmf.len() != bc.input_size() {
            v.error(Reason::Structure, "input pmf does not match channel input");
            return v;
        }
        let info: Vec<f64> = (0..3)
            .map(|k| mutual_information(&self.input_pmf, bc.marginal(k)).unwrap_or(0.0))
            .collect();
        let total: f64 = info.iter().sum();
        for k in 0..3 {
            let (r, rt) = (self.id_rates[k], self.bin_rates[k]);
            v.require_below(Reason::IdRateNotBelowBinRate, r, rt, &format!("R_{} < R̃_{}", k + 1, k + 1));
            v.require_below(Reason::BinRateNotBelowInformation, rt, info[k], &format!("R̃_{} < I(P,W_{})", k + 1, k + 1));
            v.require_below(
                Reason::BinRateNotBelowOtherSum,
                rt,
                total - info[k],
                &format!("R̃_{} < sum of the other informations", k + 1),
            );
            v.require_below(Reason::BinRateNotBelowPoolRate, rt, self.pool_rate, &format!("R̃_{} < R_pool", k + 1));
        }
        v.require_below(
            Reason::PoolRateNotBelowBinSum,
            2.0 * self.pool_rate,
            self.bin_rates.iter().sum(),
            "2 R_pool < R̃_1 + R̃_2 + R̃_3",
        );
        let bins: Vec<(usize, f64)> = (0..3).map(|k| (self.m_counts[k], self.bin_rates[k])).collect();
        pool_checks(&mut v, self.n, self.pool_rate, &bins);
        for k in 0..3 {
            eps_warning(&mut v, &self.input_pmf, bc.marginal(k), self.bin_rates[k], self.eps, &format!("receiver {}", k + 1));
        }
        v
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Bc3IdCode {
    pub pool: Pool,
    pub index_sets: [Vec<Vec<u64>>; 3],
    pub seed: u64,
    pub eps: f64,
}

pub fn build_bc3_code(params: &Bc3IdParams) -> Result<Bc3IdCode> {
    if params.n == 0 || params.m_counts.contains(&0) || params.input_pmf.is_empty() {
        return Err(Error::Param("blocklength and message counts must be positive".into()));
    }
    let size = pool::pool_size(params.n, params.pool_rate)?;
    let probs: Vec<f64> = params
        .bin_rates
        .iter()
        .map(|&r| pool::selection_prob(params.n, params.pool_rate, r))
        .collect();
    for k in 0..3 {
        check_entries(params.m_counts[k], size, probs[k])?;
    }
    let bins = |k: usize| draw_bins(params.seed, k as u64, params.m_counts[k], size, probs[k]);
    Ok(Bc3IdCode {
        pool: Pool::generate(params.n, size, &params.input_pmf, params.seed),
        index_sets: [bins(0), bins(1), bins(2)],
        seed: params.seed,
        eps: params.eps,
    })
}

impl Bc3IdCode {
    pub fn from_parts(pool: Pool, index_sets: [Vec<Vec<u64>>; 3], seed: u64, eps: f64) -> Result<Self> {
        for s in index_sets.iter().flatten() {
            pool::check_strictly_increasing(s, pool.size())?;
        }
        Ok(Bc3IdCode {
            pool,
            index_sets,
            seed,
            eps,
        })
    }

    pub fn m_counts(&self) -> [usize; 3] {
        [0, 1, 2].map(|k| self.index_sets[k].len())
    }

    /// V_{m1,m2,m3}.
    pub fn codeword_index(&self, m: [usize; 3]) -> u64 {
        keyed_index(
            self.pool.size(),
            self.seed,
            &m.map(|v| v as u64),
            &[
                &self.index_sets[0][m[0]],
                &self.index_sets[1][m[1]],
                &self.index_sets[2][m[2]],
            ],
        )
    }

    pub fn encode(&self, m: [usize; 3]) -> Sequence {
        self.pool.get(self.codeword_index(m)).into_owned()
    }
}

/// One report per receiver.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultiReport {
    pub sides: Vec<ErrorReport>,
    /// Whether each side's average over the other messages was sampled.
    pub others_sampled: Vec<bool>,
}

impl MultiReport {
    pub fn max_error(&self) -> f64 {
        self.sides.iter().map(|r| r.max_error()).fold(0.0, f64::max)
    }
}

pub fn evaluate_bc3(code: &Bc3IdCode, bc: &Bc3, mode: EvalMode, criterion: Criterion) -> Result<MultiReport> {
    let counts = code.m_counts();
    let mut sides = Vec::with_capacity(3);
    let mut sampled = Vec::with_capacity(3);
    for k in 0..3 {
        let rest: Vec<usize> = (0..3).filter(|&j| j != k).collect();
        let other_counts: Vec<usize> = rest.iter().map(|&j| counts[j]).collect();
        let (others, s) = tuples::other_tuples(&other_counts, OTHER_TUPLE_LIMIT, code.seed, k as u64);
        let index_of = |own: u32, o: &[u32]| {
            let mut m = [0usize; 3];
            m[k] = own as usize;
            m[rest[0]] = o[0] as usize;
            m[rest[1]] = o[1] as usize;
            code.codeword_index(m)
        };
        sides.push(tuples::side_report(
            &code.pool,
            &code.index_sets[k],
            bc.marginal(k),
            code.eps,
            counts[k],
            &others,
            &index_of,
            mode.salted(k as u64),
            criterion,
            seed::derive(code.seed, "pairs", &[k as u64]),
        )?);
        sampled.push(s);
    }
    Ok(MultiReport {
        sides,
        others_sampled: sampled,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::Dmc;
    use crate::id_bc::{build_bc_code, BcIdParams};

    fn bc3() -> Bc3 {
        Bc3::product(&Dmc::bsc(0.05), &Dmc::bsc(0.08), &Dmc::bsc(0.1)).unwrap()
    }

    fn params() -> Bc3IdParams {
        Bc3IdParams {
            n: 8,
            m_counts: [3, 2, 2],
            id_rates: [0.01; 3],
            bin_rates: [0.15, 0.15, 0.15],
            pool_rate: 0.2,
            input_pmf: Pmf::uniform(2),
            eps: 0.01,
            seed: 4,
        }
    }

    #[test]
    fn validator_rejects_pool_above_half_bin_sum() {
        let mut p = params();
        assert!(p.validate(&bc3()).is_valid(), "{:?}", p.validate(&bc3()));
        p.pool_rate = 0.23;
        assert!(p.validate(&bc3()).has(Reason::PoolRateNotBelowBinSum));
    }

    #[test]
    fn singleton_third_axis_with_full_bin_matches_two_receivers() {
        let p = Bc3IdParams {
            m_counts: [3, 4, 1],
            bin_rates: [0.15, 0.12, 0.2],
            ..params()
        };
        let c3 = build_bc3_code(&p).unwrap();
        assert_eq!(c3.index_sets[2][0].len() as u64, c3.pool.size());
        let c2 = build_bc_code(&BcIdParams {
            n: 8,
            m_y_count: 3,
            m_z_count: 4,
            id_rate_y: 0.01,
            id_rate_z: 0.01,
            bin_rate_y: 0.15,
            bin_rate_z: 0.12,
            pool_rate: 0.2,
            input_pmf: Pmf::uniform(2),
            eps: 0.01,
            seed: 4,
        })
        .unwrap();
        assert_eq!(c2.pool, c3.pool);
        assert_eq!(c2.index_sets_y, c3.index_sets[0]);
        assert_eq!(c2.index_sets_z, c3.index_sets[1]);
        for a in 0..3 {
            for b in 0..4 {
                assert_eq!(c2.codeword_index(a, b), c3.codeword_index([a, b, 0]));
            }
        }
    }

    #[test]
    fn reports_have_one_entry_per_receiver() {
        let code = build_bc3_code(&params()).unwrap();
        let r = evaluate_bc3(&code, &bc3(), EvalMode::exact(), Criterion::Average).unwrap();
        assert_eq!(r.sides.len(), 3);
        assert_eq!(r.sides[0].missed.len(), 3);
        assert_eq!(r.sides[1].wrong.len(), 2);
    }
}
