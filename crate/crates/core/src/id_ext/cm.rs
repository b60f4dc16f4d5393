//! Broadcast ID code with a common message: receiver Ψ identifies the pair
//! (m, m_Ψ), with bins keyed by that pair.

use serde::{Deserialize, Serialize};

use crate::channel::{Bc2, Pmf, Sequence};
use crate::error::{Error, Result};
use crate::eval::{Criterion, EvalMode};
use crate::id_bc::{check_entries, keyed_index, Side};
use crate::id_dmc::{eps_warning, pool_checks, structural};
use crate::id_ext::bc3::MultiReport;
use crate::info::mutual_information;
use crate::pool::{self, Pool};
use crate::seed;
use crate::tuples::{self, OTHER_TUPLE_LIMIT};
use crate::validate::{Reason, Validation};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CmIdParams {
    pub n: usize,
    pub m_common: usize,
    pub m_y_count: usize,
    pub m_z_count: usize,
    pub id_rate_common: f64,
    pub id_rate_y: f64,
    pub id_rate_z: f64,
    pub bin_rate_y: f64,
    pub bin_rate_z: f64,
    pub pool_rate: f64,
    pub input_pmf: Pmf,
    pub eps: f64,
    pub seed: u64,
}

impl CmIdParams {
    pub fn validate(&self, bc: &Bc2) -> Validation {
        let mut v = Validation::default();
        structural(
            &mut v,
            self.n,
            &[self.m_common, self.m_y_count, self.m_z_count],
            &[
                self.id_rate_common,
                self.id_rate_y,
                self.id_rate_z,
                self.bin_rate_y,
                self.bin_rate_z,
                self.pool_rate,
            ],
            self.eps,
        );
        if self.input_pmf.len() != bc.input_size() {
            v.error(Reason::Structure, "input pmf does not match channel input");
            return v;
        }
        let iy = mutual_information(&self.input_pmf, bc.marginal_y()).unwrap_or(0.0);
        let iz = mutual_information(&self.input_pmf, bc.marginal_z()).unwrap_or(0.0);
        let r = self.id_rate_common;
        v.require_below(Reason::IdRateNotBelowBinRate, r, self.bin_rate_y, "R < R̃_Y");
        v.require_below(Reason::IdRateNotBelowBinRate, self.id_rate_y, self.bin_rate_y, "R_Y < R̃_Y");
        v.require_below(Reason::IdRateNotBelowBinRate, r, self.bin_rate_z, "R < R̃_Z");
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
            &[
                (self.m_common * self.m_y_count, self.bin_rate_y),
                (self.m_common * self.m_z_count, self.bin_rate_z),
            ],
        );
        eps_warning(&mut v, &self.input_pmf, bc.marginal_y(), self.bin_rate_y, self.eps, "Y");
        eps_warning(&mut v, &self.input_pmf, bc.marginal_z(), self.bin_rate_z, self.eps, "Z");
        v
    }
}

/// Bins are stored per side at position m·|M_Ψ| + m_Ψ.
#[derive(Clone, Debug, PartialEq)]
pub struct CmIdCode {
    pub pool: Pool,
    pub m_common: usize,
    pub index_sets_y: Vec<Vec<u64>>,
    pub index_sets_z: Vec<Vec<u64>>,
    pub seed: u64,
    pub eps: f64,
}

fn cm_bins(seed: u64, tag: u64, m_common: usize, private: usize, size: u64, p: f64) -> Vec<Vec<u64>> {
    let mut out = Vec::with_capacity(m_common * private);
    for m in 0..m_common as u64 {
        for mp in 0..private as u64 {
            out.push(pool::index_set(seed, &[tag, mp, m], size, p));
        }
    }
    out
}

pub fn build_cm_code(params: &CmIdParams) -> Result<CmIdCode> {
    if params.n == 0
        || params.m_common == 0
        || params.m_y_count == 0
        || params.m_z_count == 0
        || params.input_pmf.is_empty()
    {
        return Err(Error::Param("blocklength and message counts must be positive".into()));
    }
    let size = pool::pool_size(params.n, params.pool_rate)?;
    let py = pool::selection_prob(params.n, params.pool_rate, params.bin_rate_y);
    let pz = pool::selection_prob(params.n, params.pool_rate, params.bin_rate_z);
    check_entries(params.m_common * params.m_y_count, size, py)?;
    check_entries(params.m_common * params.m_z_count, size, pz)?;
    Ok(CmIdCode {
        pool: Pool::generate(params.n, size, &params.input_pmf, params.seed),
        m_common: params.m_common,
        index_sets_y: cm_bins(params.seed, Side::Y.tag(), params.m_common, params.m_y_count, size, py),
        index_sets_z: cm_bins(params.seed, Side::Z.tag(), params.m_common, params.m_z_count, size, pz),
        seed: params.seed,
        eps: params.eps,
    })
}

impl CmIdCode {
    pub fn private_counts(&self) -> (usize, usize) {
        (
            self.index_sets_y.len() / self.m_common,
            self.index_sets_z.len() / self.m_common,
        )
    }

    /// V_{m,m_Y,m_Z}.
    pub fn codeword_index(&self, m: usize, my: usize, mz: usize) -> u64 {
        let (ny, nz) = self.private_counts();
        keyed_index(
            self.pool.size(),
            self.seed,
            &[my as u64, mz as u64, m as u64],
            &[&self.index_sets_y[m * ny + my], &self.index_sets_z[m * nz + mz]],
        )
    }

    pub fn encode(&self, m: usize, my: usize, mz: usize) -> Sequence {
        self.pool.get(self.codeword_index(m, my, mz)).into_owned()
    }
}

/// Side reports indexed by the joint message m·|M_Ψ| + m_Ψ, averaged or
/// maximized over the other side's private message.
pub fn evaluate_cm(code: &CmIdCode, bc: &Bc2, mode: EvalMode, criterion: Criterion) -> Result<MultiReport> {
    let (ny, nz) = code.private_counts();
    let mut sides = Vec::with_capacity(2);
    let mut sampled = Vec::with_capacity(2);
    for side in [Side::Y, Side::Z] {
        let (own_private, other, bins, w) = match side {
            Side::Y => (ny, nz, &code.index_sets_y, bc.marginal_y()),
            Side::Z => (nz, ny, &code.index_sets_z, bc.marginal_z()),
        };
        let (others, s) = tuples::other_tuples(&[other], OTHER_TUPLE_LIMIT, code.seed, side.tag());
        let index_of = |own: u32, o: &[u32]| {
            let (m, mp) = (own as usize / own_private, own as usize % own_private);
            match side {
                Side::Y => code.codeword_index(m, mp, o[0] as usize),
                Side::Z => code.codeword_index(m, o[0] as usize, mp),
            }
        };
        sides.push(tuples::side_report(
            &code.pool,
            bins,
            w,
            code.eps,
            bins.len(),
            &others,
            &index_of,
            mode.salted(side.tag()),
            criterion,
            seed::derive(code.seed, "pairs", &[side.tag()]),
        )?);
        sampled.push(s);
    }
    Ok(MultiReport {
        sides,
        others_sampled: sampled,
    })
}
