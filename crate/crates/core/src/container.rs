//! Versioned JSON container for built codes.
//!
//! Pools are stored as symbol arrays when materialized and as (size, seed,
//! pmf) otherwise; index sets are delta-encoded and tagged with their side.

use serde::{Deserialize, Serialize};

use crate::channel::{Channel, ChannelDoc, Dmc, Pmf, Sequence};
use crate::error::{Error, Result};
use crate::id_bc::BcIdCode;
use crate::id_dmc::IdCodeDmc;
use crate::id_ext::{Bc3IdCode, CmIdCode, FbIdCode, TransmissionCode, TxDecoder};
use crate::pool::{self, Pool};

pub const FORMAT: &str = "idbc-code";
pub const VERSION: u32 = 1;

/// Any built code.
#[derive(Clone, Debug)]
pub enum AnyCode {
    Dmc(IdCodeDmc),
    Bc(BcIdCode),
    Bc3(Bc3IdCode),
    Cm(CmIdCode),
    Fb(FbIdCode),
}

impl AnyCode {
    pub fn scheme(&self) -> &'static str {
        match self {
            AnyCode::Dmc(_) => "dmc",
            AnyCode::Bc(_) => "bc",
            AnyCode::Bc3(_) => "bc3",
            AnyCode::Cm(_) => "cm",
            AnyCode::Fb(_) => "fb",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoolDoc {
    pub n: usize,
    pub size: u64,
    pub seed: u64,
    pub pmf: Vec<f64>,
    /// Absent for lazily generated pools.
    pub entries: Option<Vec<Sequence>>,
}

/// Index sets of one side, each stored as first element then gaps.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BinsDoc {
    pub side: String,
    pub sets: Vec<Vec<u64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransmissionDoc {
    pub rate: f64,
    pub channel: ChannelDoc,
    pub input_pmf: Vec<f64>,
    pub decoder: TxDecoder,
    pub codebook: Vec<Sequence>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CodeContainer {
    pub format: String,
    pub version: u32,
    pub scheme: String,
    pub seed: u64,
    pub eps: f64,
    pub v_star: u64,
    pub pool: PoolDoc,
    pub bins: Vec<BinsDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m_common: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m_y_count: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transmission: Option<TransmissionDoc>,
}

pub fn delta_encode(set: &[u64]) -> Vec<u64> {
    let mut prev = 0;
    set.iter()
        .enumerate()
        .map(|(i, &v)| {
            let d = if i == 0 { v } else { v - prev };
            prev = v;
            d
        })
        .collect()
}

pub fn delta_decode(deltas: &[u64]) -> Result<Vec<u64>> {
    let mut out = Vec::with_capacity(deltas.len());
    let mut acc = 0u64;
    for (i, &d) in deltas.iter().enumerate() {
        if i > 0 && d == 0 {
            return Err(Error::Container("zero gap in an index set".into()));
        }
        acc = acc
            .checked_add(d)
            .ok_or_else(|| Error::Container("index overflow".into()))?;
        out.push(acc);
    }
    Ok(out)
}

fn pool_doc(p: &Pool) -> PoolDoc {
    PoolDoc {
        n: p.blocklength(),
        size: p.size(),
        seed: p.seed(),
        pmf: p.pmf().probs().to_vec(),
        entries: p.entries().map(|e| e.to_vec()),
    }
}

fn bins_doc(side: &str, sets: &[Vec<u64>]) -> BinsDoc {
    BinsDoc {
        side: side.into(),
        sets: sets.iter().map(|s| delta_encode(s)).collect(),
    }
}

pub fn to_container(code: &AnyCode) -> CodeContainer {
    let (pool, seed, eps, v_star, bins) = match code {
        AnyCode::Dmc(c) => (&c.pool, c.pool.seed(), c.eps, c.v_star, vec![bins_doc("y", &c.index_sets)]),
        AnyCode::Bc(c) => (
            &c.pool,
            c.seed,
            c.eps,
            0,
            vec![bins_doc("y", &c.index_sets_y), bins_doc("z", &c.index_sets_z)],
        ),
        AnyCode::Bc3(c) => (
            &c.pool,
            c.seed,
            c.eps,
            0,
            vec![
                bins_doc("1", &c.index_sets[0]),
                bins_doc("2", &c.index_sets[1]),
                bins_doc("3", &c.index_sets[2]),
            ],
        ),
        AnyCode::Cm(c) => (
            &c.pool,
            c.seed,
            c.eps,
            0,
            vec![bins_doc("y", &c.index_sets_y), bins_doc("z", &c.index_sets_z)],
        ),
        AnyCode::Fb(c) => (&c.pool, c.seed, c.eps, c.v_star, vec![bins_doc("z", &c.index_sets_z)]),
    };
    let transmission = match code {
        AnyCode::Fb(c) => Some(TransmissionDoc {
            rate: c.transmission.rate,
            channel: Channel::Dmc(c.transmission.channel().clone()).to_doc(),
            input_pmf: c.transmission.input_pmf.probs().to_vec(),
            decoder: c.transmission.decoder,
            codebook: c.transmission.codebook.clone(),
        }),
        _ => None,
    };
    CodeContainer {
        format: FORMAT.into(),
        version: VERSION,
        scheme: code.scheme().into(),
        seed,
        eps,
        v_star,
        pool: pool_doc(pool),
        bins,
        m_common: match code {
            AnyCode::Cm(c) => Some(c.m_common),
            _ => None,
        },
        m_y_count: match code {
            AnyCode::Fb(c) => Some(c.m_y_count),
            _ => None,
        },
        transmission,
    }
}

impl CodeContainer {
    fn side(&self, name: &str) -> Result<Vec<Vec<u64>>> {
        let doc = self
            .bins
            .iter()
            .find(|b| b.side == name)
            .ok_or_else(|| Error::Container(format!("missing bins for side {name}")))?;
        doc.sets.iter().map(|s| delta_decode(s)).collect()
    }

    fn check_sides(&self, expected: &[&str]) -> Result<()> {
        let found: Vec<&str> = self.bins.iter().map(|b| b.side.as_str()).collect();
        if found != expected {
            return Err(Error::Container(format!("sides {found:?}, expected {expected:?}")));
        }
        Ok(())
    }

    fn restore_pool(&self) -> Result<Pool> {
        let p = &self.pool;
        let pmf = Pmf::new(p.pmf.clone())?;
        Pool::restore(p.n, p.size, &pmf, p.seed, p.entries.clone())
    }
}

pub fn from_container(doc: &CodeContainer) -> Result<AnyCode> {
    if doc.format != FORMAT {
        return Err(Error::Container(format!("unknown format `{}`", doc.format)));
    }
    if doc.version != VERSION {
        return Err(Error::Container(format!("unsupported version {}", doc.version)));
    }
    let pool = doc.restore_pool()?;
    if doc.v_star >= pool.size() {
        return Err(Error::Container("v★ outside the pool".into()));
    }
    let code = match doc.scheme.as_str() {
        "dmc" => {
            doc.check_sides(&["y"])?;
            let mut c = IdCodeDmc::from_parts(pool, doc.side("y")?, doc.eps)?;
            c.v_star = doc.v_star;
            AnyCode::Dmc(c)
        }
        "bc" => {
            doc.check_sides(&["y", "z"])?;
            AnyCode::Bc(BcIdCode::from_parts(pool, doc.side("y")?, doc.side("z")?, doc.seed, doc.eps)?)
        }
        "bc3" => {
            doc.check_sides(&["1", "2", "3"])?;
            AnyCode::Bc3(Bc3IdCode::from_parts(
                pool,
                [doc.side("1")?, doc.side("2")?, doc.side("3")?],
                doc.seed,
                doc.eps,
            )?)
        }
        "cm" => {
            doc.check_sides(&["y", "z"])?;
            let m_common = doc
                .m_common
                .filter(|&m| m > 0)
                .ok_or_else(|| Error::Container("cm code needs m_common".into()))?;
            let (ys, zs) = (doc.side("y")?, doc.side("z")?);
            if ys.len() % m_common != 0 || zs.len() % m_common != 0 {
                return Err(Error::Container("bin count is not a multiple of m_common".into()));
            }
            for s in ys.iter().chain(&zs) {
                pool::check_strictly_increasing(s, pool.size())?;
            }
            AnyCode::Cm(CmIdCode {
                pool,
                m_common,
                index_sets_y: ys,
                index_sets_z: zs,
                seed: doc.seed,
                eps: doc.eps,
            })
        }
        "fb" => {
            doc.check_sides(&["z"])?;
            let t = doc
                .transmission
                .as_ref()
                .ok_or_else(|| Error::Container("fb code needs a transmission code".into()))?;
            let w = match Channel::from_doc(&t.channel)? {
                Channel::Dmc(w) => w,
                _ => return Err(Error::Container("transmission channel must be a DMC".into())),
            };
            let zs = doc.side("z")?;
            for s in &zs {
                pool::check_strictly_increasing(s, pool.size())?;
            }
            AnyCode::Fb(FbIdCode {
                pool,
                index_sets_z: zs,
                m_y_count: doc
                    .m_y_count
                    .filter(|&m| m > 0)
                    .ok_or_else(|| Error::Container("fb code needs m_y_count".into()))?,
                v_star: doc.v_star,
                seed: doc.seed,
                eps: doc.eps,
                transmission: transmission_from(&w, t)?,
            })
        }
        s => return Err(Error::Container(format!("unknown scheme `{s}`"))),
    };
    Ok(code)
}

fn transmission_from(w: &Dmc, t: &TransmissionDoc) -> Result<TransmissionCode> {
    TransmissionCode::from_codebook(w, t.rate, t.codebook.clone(), Pmf::new(t.input_pmf.clone())?, t.decoder)
}

pub fn write_code(code: &AnyCode) -> Result<String> {
    Ok(serde_json::to_string(&to_container(code))?)
}

pub fn read_code(text: &str) -> Result<AnyCode> {
    from_container(&serde_json::from_str(text)?)
}
