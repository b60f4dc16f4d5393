//! Two-receiver broadcast identification code with a deterministic encoder.
//!
//! Each receiver has its own message bins over a shared pool. The message
//! pair (m_Y, m_Z) is sent as the pool entry V_{m_Y,m_Z}, drawn uniformly
//! from the intersection of the two bins (or from the whole pool when they
//! are disjoint). V is derived on demand from a keyed stream, so the
//! |M_Y|·|M_Z| table is never stored.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::channel::{Bc2, Dmc, Pmf, Sequence};
use crate::error::{Error, Result};
use crate::eval::{self, BinDecoder, Criterion, Decoder, ErrorReport, EvalMode, SideView, Transmission};
use crate::id_dmc::{eps_warning, pool_checks, structural, MAX_INDEX_ENTRIES};
use crate::info::mutual_information;
use crate::pool::{self, Pool, TAG_Y, TAG_Z};
use crate::seed;
use crate::tuples::{self, OTHER_TUPLE_LIMIT};
use crate::validate::{Reason, Validation};

/// Other-side messages enumerated by the index-distribution diagnostic.
pub const DIAG_FULL_LIMIT: usize = 1 << 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Y,
    Z,
}

impl Side {
    pub fn tag(self) -> u64 {
        match self {
            Side::Y => TAG_Y,
            Side::Z => TAG_Z,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BcIdParams {
    pub n: usize,
    pub m_y_count: usize,
    pub m_z_count: usize,
    /// Nominal ID rates; only checked against the bin rates.
    pub id_rate_y: f64,
    pub id_rate_z: f64,
    pub bin_rate_y: f64,
    pub bin_rate_z: f64,
    pub pool_rate: f64,
    pub input_pmf: Pmf,
    pub eps: f64,
    pub seed: u64,
}

impl BcIdParams {
    pub fn validate(&self, bc: &Bc2) -> Validation {
        let mut v = Validation::default();
        structural(
            &mut v,
            self.n,
            &[self.m_y_count, self.m_z_count],
            &[self.id_rate_y, self.id_rate_z, self.bin_rate_y, self.bin_rate_z, self.pool_rate],
            self.eps,
        );
        if self.input_pmf.len() != bc.input_size() {
            v.error(Reason::Structure, "input pmf does not match channel input");
            return v;
        }
        let iy = mutual_information(&self.input_pmf, bc.marginal_y()).unwrap_or(0.0);
        let iz = mutual_information(&self.input_pmf, bc.marginal_z()).unwrap_or(0.0);
        v.require_below(Reason::IdRateNotBelowBinRate, self.id_rate_y, self.bin_rate_y, "R_Y < R̃_Y");
        v.require_below(Reason::IdRateNotBelowBinRate, self.id_rate_z, self.bin_rate_z, "R_Z < R̃_Z");
        v.require_below(Reason::BinRateNotBelowInformation, self.bin_rate_y, iy, "R̃_Y < I(P,W_Y)");
        v.require_below(Reason::BinRateNotBelowInformation, self.bin_rate_z, iz, "R̃_Z < I(P,W_Z)");
        v.require_below(Reason::BinRateNotBelowPoolRate, self.bin_rate_y, self.pool_rate, "R̃_Y < R_pool");
        v.require_below(Reason::BinRateNotBelowPoolRate, self.bin_rate_z, self.pool_rate, "R̃_Z < R_pool");
        v.require_below(
            Reason::PoolRateNotBelowBinSum,
            self.pool_rate,
            self.bin_rate_y + self.bin_rate_z,
            "R_pool < R̃_Y + R̃_Z",
        );
        pool_checks(
            &mut v,
            self.n,
            self.pool_rate,
            &[(self.m_y_count, self.bin_rate_y), (self.m_z_count, self.bin_rate_z)],
        );
        eps_warning(&mut v, &self.input_pmf, bc.marginal_y(), self.bin_rate_y, self.eps, "Y");
        eps_warning(&mut v, &self.input_pmf, bc.marginal_z(), self.bin_rate_z, self.eps, "Z");
        v
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BcIdCode {
    pub pool: Pool,
    pub index_sets_y: Vec<Vec<u64>>,
    pub index_sets_z: Vec<Vec<u64>>,
    /// Key of the V_{m_Y,m_Z} derivation.
    pub seed: u64,
    pub eps: f64,
}

pub(crate) fn draw_bins(seed: u64, tag: u64, count: usize, size: u64, p: f64) -> Vec<Vec<u64>> {
    (0..count as u64)
        .map(|m| pool::index_set(seed, &[tag, m], size, p))
        .collect()
}

pub(crate) fn check_entries(count: usize, size: u64, p: f64) -> Result<()> {
    let e = count as f64 * size as f64 * p;
    if e > MAX_INDEX_ENTRIES {
        return Err(Error::Budget(format!("about {e:.3e} bin entries")));
    }
    Ok(())
}

pub fn build_bc_code(params: &BcIdParams) -> Result<BcIdCode> {
    if params.n == 0 || params.m_y_count == 0 || params.m_z_count == 0 || params.input_pmf.is_empty() {
        return Err(Error::Param("blocklength and message counts must be positive".into()));
    }
    let size = pool::pool_size(params.n, params.pool_rate)?;
    let py = pool::selection_prob(params.n, params.pool_rate, params.bin_rate_y);
    let pz = pool::selection_prob(params.n, params.pool_rate, params.bin_rate_z);
    check_entries(params.m_y_count, size, py)?;
    check_entries(params.m_z_count, size, pz)?;
    Ok(BcIdCode {
        pool: Pool::generate(params.n, size, &params.input_pmf, params.seed),
        index_sets_y: draw_bins(params.seed, TAG_Y, params.m_y_count, size, py),
        index_sets_z: draw_bins(params.seed, TAG_Z, params.m_z_count, size, pz),
        seed: params.seed,
        eps: params.eps,
    })
}

/// Uniform keyed pick over the intersection of the listed bins.
pub(crate) fn keyed_index(pool_size: u64, seed: u64, key: &[u64], bins: &[&[u64]]) -> u64 {
    let mut inter = bins[0].to_vec();
    for b in &bins[1..] {
        inter = pool::intersect_sorted(&inter, b);
    }
    pool::keyed_pick(&inter, pool_size, &mut seed::stream_trimmed(seed, "codeword", key))
}

impl BcIdCode {
    pub fn from_parts(pool: Pool, ys: Vec<Vec<u64>>, zs: Vec<Vec<u64>>, seed: u64, eps: f64) -> Result<Self> {
        for s in ys.iter().chain(&zs) {
            pool::check_strictly_increasing(s, pool.size())?;
        }
        Ok(BcIdCode {
            pool,
            index_sets_y: ys,
            index_sets_z: zs,
            seed,
            eps,
        })
    }

    pub fn m_counts(&self) -> (usize, usize) {
        (self.index_sets_y.len(), self.index_sets_z.len())
    }

    pub fn bins(&self, side: Side) -> &[Vec<u64>] {
        match side {
            Side::Y => &self.index_sets_y,
            Side::Z => &self.index_sets_z,
        }
    }

    /// V_{m_Y,m_Z}.
    pub fn codeword_index(&self, my: usize, mz: usize) -> u64 {
        keyed_index(
            self.pool.size(),
            self.seed,
            &[my as u64, mz as u64],
            &[&self.index_sets_y[my], &self.index_sets_z[mz]],
        )
    }

    pub fn decoder(&self, side: Side, w: &Dmc) -> Result<BinDecoder> {
        let joint = self.pool.pmf().joint_with(w)?;
        Ok(BinDecoder::new(&self.pool, self.bins(side), &joint, w.output_size(), self.eps))
    }

    /// Index of the message of interest to `side` plus the other side's.
    fn split(side: Side, own: u32, other: u32) -> (usize, usize) {
        match side {
            Side::Y => (own as usize, other as usize),
            Side::Z => (other as usize, own as usize),
        }
    }

    fn other_count(&self, side: Side) -> usize {
        let (my, mz) = self.m_counts();
        match side {
            Side::Y => mz,
            Side::Z => my,
        }
    }

    /// Messages of the other side used in averages, plus whether they were sampled.
    pub fn other_messages(&self, side: Side) -> (Vec<u32>, bool) {
        let (t, s) = tuples::other_tuples(&[self.other_count(side)], OTHER_TUPLE_LIMIT, self.seed, side.tag());
        (t.into_iter().map(|v| v[0]).collect(), s)
    }

    /// The single-user mixture code seen by one side: message m sends
    /// V_{m,m_other} with m_other uniform.
    pub fn induced_mixture(&self, side: Side) -> Transmission {
        let (others, _) = self.other_messages(side);
        let per: Vec<Vec<u64>> = (0..self.bins(side).len() as u32)
            .map(|m| {
                others
                    .iter()
                    .map(|&o| {
                        let (a, b) = Self::split(side, m, o);
                        self.codeword_index(a, b)
                    })
                    .collect()
            })
            .collect();
        tuples::mixture_transmission(&self.pool, &per)
    }
}

pub fn encode_bc(code: &BcIdCode, my: usize, mz: usize) -> Sequence {
    code.pool.get(code.codeword_index(my, mz)).into_owned()
}

pub fn decoder_accepts(code: &BcIdCode, bc: &Bc2, side: Side, m_prime: usize, observed: &[u8]) -> Result<bool> {
    if observed.len() != code.pool.blocklength() {
        return Err(Error::LengthMismatch {
            left: observed.len(),
            right: code.pool.blocklength(),
        });
    }
    let w = match side {
        Side::Y => bc.marginal_y(),
        Side::Z => bc.marginal_z(),
    };
    Ok(code.decoder(side, w)?.accepts_message(m_prime, observed))
}

/// Reports of both receivers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BcReport {
    pub y: ErrorReport,
    pub z: ErrorReport,
    /// Whether the average over the other side used a seeded sample.
    pub y_others_sampled: bool,
    pub z_others_sampled: bool,
}

impl BcReport {
    pub fn max_error(&self) -> f64 {
        self.y.max_error().max(self.z.max_error())
    }
}

fn side_report(code: &BcIdCode, bc: &Bc2, side: Side, mode: EvalMode, criterion: Criterion) -> Result<(ErrorReport, bool)> {
    let (others, sampled) = code.other_messages(side);
    let others: Vec<Vec<u32>> = others.into_iter().map(|o| vec![o]).collect();
    let w = match side {
        Side::Y => bc.marginal_y(),
        Side::Z => bc.marginal_z(),
    };
    let index_of = |own: u32, o: &[u32]| {
        let (a, b) = BcIdCode::split(side, own, o[0]);
        code.codeword_index(a, b)
    };
    let r = tuples::side_report(
        &code.pool,
        code.bins(side),
        w,
        code.eps,
        code.bins(side).len(),
        &others,
        &index_of,
        mode.salted(side.tag()),
        criterion,
        seed::derive(code.seed, "pairs", &[side.tag()]),
    )?;
    Ok((r, sampled))
}

fn report(code: &BcIdCode, bc: &Bc2, mode: EvalMode, criterion: Criterion) -> Result<BcReport> {
    let (y, ys) = side_report(code, bc, Side::Y, mode, criterion)?;
    let (z, zs) = side_report(code, bc, Side::Z, mode, criterion)?;
    Ok(BcReport {
        y,
        z,
        y_others_sampled: ys,
        z_others_sampled: zs,
    })
}

/// Errors averaged over the other receiver's message.
pub fn avg_error_report_bc(code: &BcIdCode, bc: &Bc2, mode: EvalMode) -> Result<BcReport> {
    report(code, bc, mode, Criterion::Average)
}

/// Errors maximized over the other receiver's message.
pub fn max_error_report_bc(code: &BcIdCode, bc: &Bc2, mode: EvalMode) -> Result<BcReport> {
    report(code, bc, mode, Criterion::Maximum)
}

/// Single-user report of a mixture transmission on one marginal.
pub fn mixture_report(tx: &Transmission, decoder: &dyn Decoder, w: &Dmc, mode: EvalMode, pair_seed: u64) -> Result<ErrorReport> {
    let project: Vec<u32> = (0..tx.laws.len() as u32).collect();
    let side = SideView {
        channel: w,
        decoder,
        project: &project,
    };
    eval::evaluate(tx, &side, mode, Criterion::Average, pair_seed)
}

/// Sparse law on pool indices, sorted by index.
pub type IndexLaw = Vec<(u64, f64)>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndexDiag {
    /// Law of V_{m,·} with the other message uniform.
    pub p_v: IndexLaw,
    /// Uniform on bin(m), or a point mass on v★ = 0 when the bin is empty.
    pub p_tilde: IndexLaw,
    pub tv: f64,
    /// True when the other side was subsampled (the law is then an estimate).
    pub sampled: bool,
}

pub fn sparse_tv(a: &IndexLaw, b: &IndexLaw) -> f64 {
    let mut m: BTreeMap<u64, f64> = BTreeMap::new();
    for &(v, p) in a {
        *m.entry(v).or_insert(0.0) += p;
    }
    for &(v, p) in b {
        *m.entry(v).or_insert(0.0) -= p;
    }
    0.5 * m.values().map(|d| d.abs()).sum::<f64>()
}

pub(crate) fn uniform_on(bin: &[u64], v_star: u64) -> IndexLaw {
    if bin.is_empty() {
        vec![(v_star, 1.0)]
    } else {
        bin.iter().map(|&v| (v, 1.0 / bin.len() as f64)).collect()
    }
}

pub(crate) fn law_of(indices: impl Iterator<Item = u64>, count: usize) -> IndexLaw {
    let mut m: BTreeMap<u64, f64> = BTreeMap::new();
    for v in indices {
        *m.entry(v).or_insert(0.0) += 1.0 / count as f64;
    }
    m.into_iter().collect()
}

/// Compares the law of V_{m,·} (other message uniform) with uniform on bin(m).
pub fn index_distribution_diag(code: &BcIdCode, side: Side, m: usize) -> IndexDiag {
    let (others, sampled) =
        tuples::other_tuples(&[code.other_count(side)], DIAG_FULL_LIMIT, code.seed, 16 + side.tag());
    let p_v = law_of(
        others.iter().map(|o| {
            let (a, b) = BcIdCode::split(side, m as u32, o[0]);
            code.codeword_index(a, b)
        }),
        others.len(),
    );
    let p_tilde = uniform_on(&code.bins(side)[m], 0);
    IndexDiag {
        tv: sparse_tv(&p_v, &p_tilde),
        p_v,
        p_tilde,
        sampled,
    }
}

/// Largest index-distribution TV over the messages of one side.
pub fn max_index_tv(code: &BcIdCode, side: Side) -> f64 {
    use rayon::prelude::*;
    (0..code.bins(side).len())
        .into_par_iter()
        .map(|m| index_distribution_diag(code, side, m).tv)
        .reduce(|| 0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bsc_pair() -> Bc2 {
        Bc2::product(&Dmc::bsc(0.05), &Dmc::bsc(0.1)).unwrap()
    }

    fn params(n: usize, my: usize, mz: usize) -> BcIdParams {
        BcIdParams {
            n,
            m_y_count: my,
            m_z_count: mz,
            id_rate_y: 0.01,
            id_rate_z: 0.01,
            bin_rate_y: 0.15,
            bin_rate_z: 0.12,
            pool_rate: 0.2,
            input_pmf: Pmf::uniform(2),
            eps: 0.5,
            seed: 5,
        }
    }

    #[test]
    fn singleton_intersection_is_forced() {
        let pmf = Pmf::uniform(2);
        let pool = Pool::from_sequences((0..10u8).map(|i| vec![i & 1, i >> 1 & 1, i >> 2 & 1, i >> 3]).collect(), &pmf).unwrap();
        let code = BcIdCode::from_parts(pool, vec![vec![1, 7, 9]], vec![vec![2, 7]], 3, 0.0).unwrap();
        assert_eq!(code.codeword_index(0, 0), 7);
        assert_eq!(encode_bc(&code, 0, 0), encode_bc(&code, 0, 0));
        assert_eq!(encode_bc(&code, 0, 0), code.pool.get(7).into_owned());
    }

    #[test]
    fn full_bins_give_uniform_indices() {
        let pmf = Pmf::uniform(2);
        let size = 10u64;
        let pool = Pool::from_sequences((0..size as u8).map(|i| vec![i & 1, i >> 1 & 1, i >> 2 & 1, i >> 3]).collect(), &pmf).unwrap();
        let all: Vec<u64> = (0..size).collect();
        let code = BcIdCode::from_parts(pool, vec![all.clone(); 1000], vec![all; 100], 9, 0.0).unwrap();
        let mut counts = vec![0f64; size as usize];
        for my in 0..1000 {
            for mz in 0..100 {
                counts[code.codeword_index(my, mz) as usize] += 1.0;
            }
        }
        let e = 1e5 / size as f64;
        let chi2: f64 = counts.iter().map(|c| (c - e).powi(2) / e).sum();
        // 9 degrees of freedom, alpha = 0.01.
        assert!(chi2 < 21.666, "chi2 = {chi2}");
    }

    #[test]
    fn disjoint_bins_fall_back_to_whole_pool() {
        let pmf = Pmf::uniform(2);
        let pool = Pool::from_sequences((0..8u8).map(|i| vec![i & 1, i >> 1 & 1, i >> 2]).collect(), &pmf).unwrap();
        let zs: Vec<Vec<u64>> = (0..4000).map(|_| vec![5]).collect();
        let code = BcIdCode::from_parts(pool, vec![vec![0, 1]], zs, 1, 0.0).unwrap();
        let d = index_distribution_diag(&code, Side::Y, 0);
        let mut hit = [0usize; 8];
        for mz in 0..4000 {
            hit[code.codeword_index(0, mz) as usize] += 1;
        }
        assert!(hit.iter().all(|&h| h > 350 && h < 650));
        // Uniform on V against uniform on a 2-element bin: 1 − 2/8, up to sampling.
        assert!((d.tv - 0.75).abs() < 0.03, "{}", d.tv);
    }

    #[test]
    fn encoder_output_is_a_pool_member() {
        let code = build_bc_code(&params(8, 4, 4)).unwrap();
        for my in 0..4 {
            for mz in 0..4 {
                let x = encode_bc(&code, my, mz);
                assert!((0..code.pool.size()).any(|v| *code.pool.get(v) == x[..]));
            }
        }
    }

    #[test]
    fn single_z_message_matches_mixture_code() {
        let bc = bsc_pair();
        let code = build_bc_code(&params(6, 3, 1)).unwrap();
        let r = avg_error_report_bc(&code, &bc, EvalMode::exact()).unwrap();
        let tx = code.induced_mixture(Side::Y);
        let dec = code.decoder(Side::Y, bc.marginal_y()).unwrap();
        let s = mixture_report(&tx, &dec, bc.marginal_y(), EvalMode::exact(), 0).unwrap();
        for (a, b) in r.y.all_estimates().iter().zip(s.all_estimates()) {
            assert!((a.value - b.value).abs() < 1e-12);
        }
        let m = max_error_report_bc(&code, &bc, EvalMode::exact()).unwrap();
        assert_eq!(m.y.all_estimates(), r.y.all_estimates());
    }

    #[test]
    fn maximum_dominates_average() {
        let bc = bsc_pair();
        for s in 0..4 {
            let mut p = params(6, 3, 3);
            p.seed = s;
            let code = build_bc_code(&p).unwrap();
            let a = avg_error_report_bc(&code, &bc, EvalMode::exact()).unwrap();
            let m = max_error_report_bc(&code, &bc, EvalMode::exact()).unwrap();
            for (x, y) in [(&a.y, &m.y), (&a.z, &m.z)] {
                for (u, v) in x.all_estimates().iter().zip(y.all_estimates()) {
                    assert!(v.value >= u.value - 1e-12);
                }
            }
        }
    }

    #[test]
    fn codeword_outside_bin_shows_in_maximum_only() {
        // Noiseless channel, eps = 1: y is accepted by m iff y is in bin(m).
        let pmf = Pmf::uniform(2);
        let seqs: Vec<Sequence> = (0..16u8).map(|i| vec![i & 1, i >> 1 & 1, i >> 2 & 1, i >> 3]).collect();
        let pool = Pool::from_sequences(seqs, &pmf).unwrap();
        let ys = vec![vec![0, 1, 2, 3], vec![8, 9, 10, 11]];
        let mut zs: Vec<Vec<u64>> = (0..19).map(|_| vec![0, 1, 2, 3, 8, 9, 10, 11]).collect();
        zs.push(vec![14]);
        // A key whose fallback draw lands outside bin_Y(0).
        let code = (0..)
            .map(|k| BcIdCode::from_parts(pool.clone(), ys.clone(), zs.clone(), k, 1.0).unwrap())
            .find(|c| c.codeword_index(0, 19) >= 4)
            .unwrap();
        let bc = Bc2::identical(&Dmc::noiseless(2)).unwrap();
        let a = avg_error_report_bc(&code, &bc, EvalMode::exact()).unwrap();
        let m = max_error_report_bc(&code, &bc, EvalMode::exact()).unwrap();
        assert!((m.y.missed[0].value - 1.0).abs() < 1e-12);
        assert!((a.y.missed[0].value - 1.0 / 20.0).abs() < 1e-12);
    }

    #[test]
    fn validator_checks_each_constraint() {
        let bc = bsc_pair();
        let mut p = params(8, 2, 2);
        p.eps = 0.01;
        assert!(p.validate(&bc).is_valid(), "{:?}", p.validate(&bc));
        p.pool_rate = 0.3;
        assert!(p.validate(&bc).has(Reason::PoolRateNotBelowBinSum));
        let mut q = params(8, 2, 2);
        q.bin_rate_z = 0.4;
        let v = q.validate(&bc);
        assert!(v.has(Reason::BinRateNotBelowInformation) && v.has(Reason::BinRateNotBelowPoolRate));
    }

    #[test]
    fn tv_vanishes_for_one_element_pool() {
        let pmf = Pmf::uniform(2);
        let pool = Pool::from_sequences(vec![vec![0, 1]], &pmf).unwrap();
        let code = BcIdCode::from_parts(pool, vec![vec![0]], vec![vec![0], vec![]], 0, 0.0).unwrap();
        assert_eq!(index_distribution_diag(&code, Side::Y, 0).tv, 0.0);
    }

    #[test]
    fn data_processing_for_tv() {
        let bc = bsc_pair();
        let code = build_bc_code(&params(6, 2, 3)).unwrap();
        let w = bc.marginal_y();
        for m in 0..2 {
            let d = index_distribution_diag(&code, Side::Y, m);
            let mix = |law: &IndexLaw| -> Vec<(Sequence, f64)> {
                law.iter().map(|&(v, p)| (code.pool.get(v).into_owned(), p)).collect()
            };
            let a = eval::output_distribution(&mix(&d.p_v), w, 1 << 20).unwrap();
            let b = eval::output_distribution(&mix(&d.p_tilde), w, 1 << 20).unwrap();
            assert!(eval::total_variation(&a, &b) <= d.tv + 1e-12);
        }
    }
}
