//! Parameter sweeps: configuration, seed splitting, resumable runs and
//! aggregation.
//!
//! A sweep runs every (grid point, seed) pair of an [`ExperimentConfig`]. The
//! code seed of a run is `derive(seed, "sweep", [scheme id, grid index])`, so
//! each record can be reproduced on its own. Records are written to CSV in
//! grid order, one row each, next to a JSON sidecar holding the config and
//! the summary. Rows already present under the same config hash are reused.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::channel::{Bc2, Bc3, Channel, Dmc, Pmf};
use crate::container::AnyCode;
use crate::error::{Error, Result};
use crate::eval::{Criterion, ErrorReport, EvalMode, DEFAULT_BUDGET_STATES};
use crate::id_bc::{self, build_bc_code, BcIdParams, Side};
use crate::id_dmc::{build_dmc_code, check_g_mu, error_report_dmc, IdParams};
use crate::id_ext::fb::fb_index_distribution_diag;
use crate::id_ext::{
    build_bc3_code, build_cm_code, build_fb_code, evaluate_bc3, evaluate_cm, evaluate_fb, Bc3IdParams, CmIdParams,
    CodebookSpec, FbIdParams,
};
use crate::seed;
use crate::validate::{Reason, Validation};

/// Pairs checked per G_μ run before sampling.
pub const GMU_PAIR_BUDGET: usize = 1 << 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Dmc,
    Bc,
    Bc3,
    Cm,
    Fb,
}

impl Scheme {
    pub fn id(self) -> u64 {
        self as u64
    }

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Dmc => "dmc",
            Scheme::Bc => "bc",
            Scheme::Bc3 => "bc3",
            Scheme::Cm => "cm",
            Scheme::Fb => "fb",
        }
    }

    /// Length of a rate tuple.
    pub fn rate_arity(self) -> usize {
        match self {
            Scheme::Dmc => 3,
            Scheme::Bc | Scheme::Fb => 5,
            Scheme::Bc3 => 7,
            Scheme::Cm => 6,
        }
    }

    /// Length of a message-count tuple.
    pub fn count_arity(self) -> usize {
        match self {
            Scheme::Dmc => 1,
            Scheme::Bc | Scheme::Fb => 2,
            Scheme::Bc3 | Scheme::Cm => 3,
        }
    }

    /// Receiver labels, in report order.
    pub fn sides(self) -> &'static [&'static str] {
        match self {
            Scheme::Dmc => &["y"],
            Scheme::Bc3 => &["y", "z", "3"],
            _ => &["y", "z"],
        }
    }
}

/// Axes of the parameter grid; points are their Cartesian product in the
/// order n, rates, message counts, eps, μ (n varies slowest).
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub n: Vec<usize>,
    /// Scheme-specific rate tuples, see [`Scheme::rate_arity`]:
    /// dmc (R, R̃, R_pool); bc (R_Y, R_Z, R̃_Y, R̃_Z, R_pool);
    /// bc3 (R_1, R_2, R_3, R̃_1, R̃_2, R̃_3, R_pool);
    /// cm (R, R_Y, R_Z, R̃_Y, R̃_Z, R_pool); fb (R_Y, R_Z, R̃_Z, R_pool, R̂_Y).
    pub rates: Vec<Vec<f64>>,
    /// dmc (M); bc and fb (M_Y, M_Z); bc3 (M_1, M_2, M_3); cm (M, M_Y, M_Z).
    pub m_counts: Vec<Vec<usize>>,
    pub eps: Vec<f64>,
    /// Bin-condition margins; dmc only. Empty means no G_μ check.
    #[serde(default)]
    pub mu: Vec<f64>,
}

fn default_mode() -> EvalMode {
    EvalMode::Auto {
        budget_states: DEFAULT_BUDGET_STATES,
        trials: 10_000,
        seed: 0,
    }
}

fn default_criterion() -> Criterion {
    Criterion::Average
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Channel file; relative paths are resolved against the config file.
    pub channel: PathBuf,
    pub scheme: Scheme,
    pub grid: Grid,
    pub seeds: Vec<u64>,
    /// Defaults to uniform on the input alphabet.
    #[serde(default)]
    pub input_pmf: Option<Vec<f64>>,
    /// The Monte Carlo seed is re-derived per run from the code seed.
    #[serde(default = "default_mode")]
    pub mode: EvalMode,
    #[serde(default = "default_criterion")]
    pub criterion: Criterion,
    #[serde(default)]
    pub codebook: CodebookSpec,
    /// Also compute the codeword-index TV diagnostic (bc and fb).
    #[serde(default)]
    pub diagnostics: bool,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads a config and resolves its channel path.
    pub fn load(path: &Path) -> Result<Self> {
        let mut cfg = Self::parse(&fs::read_to_string(path)?)?;
        if cfg.channel.is_relative() {
            if let Some(dir) = path.parent() {
                cfg.channel = dir.join(&cfg.channel);
            }
        }
        Ok(cfg)
    }

    pub fn load_channel(&self) -> Result<Channel> {
        Channel::load(&self.channel)
    }

    pub fn points(&self) -> Vec<GridPoint> {
        let g = &self.grid;
        let mus: Vec<Option<f64>> = if g.mu.is_empty() {
            vec![None]
        } else {
            g.mu.iter().map(|&m| Some(m)).collect()
        };
        let mut out = Vec::new();
        for &n in &g.n {
            for rates in &g.rates {
                for counts in &g.m_counts {
                    for &eps in &g.eps {
                        for &mu in &mus {
                            out.push(GridPoint {
                                index: out.len(),
                                n,
                                rates: rates.clone(),
                                m_counts: counts.clone(),
                                eps,
                                mu,
                            });
                        }
                    }
                }
            }
        }
        out
    }

    /// SHA-256 over the canonical JSON of the config (output path and
    /// channel path dropped) and of the channel contents.
    pub fn hash(&self, channel: &Channel) -> String {
        let mut v = serde_json::to_value(self).expect("config serializes");
        if let Some(m) = v.as_object_mut() {
            m.remove("out");
            m.remove("channel");
        }
        let doc = serde_json::to_value(channel.to_doc()).expect("channel serializes");
        let canonical = serde_json::json!({ "config": v, "channel": doc });
        let digest = Sha256::digest(canonical.to_string().as_bytes());
        digest.iter().take(16).map(|b| format!("{b:02x}")).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub index: usize,
    pub n: usize,
    pub rates: Vec<f64>,
    pub m_counts: Vec<usize>,
    pub eps: f64,
    pub mu: Option<f64>,
}

/// Scheme parameters of one grid point and seed.
#[derive(Clone, Debug, PartialEq)]
pub enum SchemeParams {
    Dmc(IdParams),
    Bc(BcIdParams),
    Bc3(Bc3IdParams),
    Cm(CmIdParams),
    Fb(FbIdParams),
}

fn dmc_of(ch: &Channel) -> Result<&Dmc> {
    match ch {
        Channel::Dmc(w) => Ok(w),
        _ => Err(Error::Config("scheme dmc needs a single-output channel".into())),
    }
}

fn bc2_of(ch: &Channel) -> Result<&Bc2> {
    match ch {
        Channel::Bc2(b) => Ok(b),
        _ => Err(Error::Config("scheme needs a two-receiver channel".into())),
    }
}

fn bc3_of(ch: &Channel) -> Result<&Bc3> {
    match ch {
        Channel::Bc3(b) => Ok(b),
        _ => Err(Error::Config("scheme bc3 needs a three-receiver channel".into())),
    }
}

impl SchemeParams {
    /// Fails only on tuples of the wrong length; rate conditions are left to
    /// [`SchemeParams::validate`].
    pub fn new(cfg: &ExperimentConfig, point: &GridPoint, pmf: &Pmf, code_seed: u64) -> Result<Self> {
        let s = cfg.scheme;
        if point.rates.len() != s.rate_arity() || point.m_counts.len() != s.count_arity() {
            return Err(Error::Config(format!(
                "scheme {} takes {} rates and {} message counts",
                s.name(),
                s.rate_arity(),
                s.count_arity()
            )));
        }
        let (r, m, n, eps, pmf) = (&point.rates, &point.m_counts, point.n, point.eps, pmf.clone());
        Ok(match s {
            Scheme::Dmc => SchemeParams::Dmc(IdParams {
                n,
                m_count: m[0],
                id_rate: r[0],
                bin_rate: r[1],
                pool_rate: r[2],
                input_pmf: pmf,
                eps,
                seed: code_seed,
            }),
            Scheme::Bc => SchemeParams::Bc(BcIdParams {
                n,
                m_y_count: m[0],
                m_z_count: m[1],
                id_rate_y: r[0],
                id_rate_z: r[1],
                bin_rate_y: r[2],
                bin_rate_z: r[3],
                pool_rate: r[4],
                input_pmf: pmf,
                eps,
                seed: code_seed,
            }),
            Scheme::Bc3 => SchemeParams::Bc3(Bc3IdParams {
                n,
                m_counts: [m[0], m[1], m[2]],
                id_rates: [r[0], r[1], r[2]],
                bin_rates: [r[3], r[4], r[5]],
                pool_rate: r[6],
                input_pmf: pmf,
                eps,
                seed: code_seed,
            }),
            Scheme::Cm => SchemeParams::Cm(CmIdParams {
                n,
                m_common: m[0],
                m_y_count: m[1],
                m_z_count: m[2],
                id_rate_common: r[0],
                id_rate_y: r[1],
                id_rate_z: r[2],
                bin_rate_y: r[3],
                bin_rate_z: r[4],
                pool_rate: r[5],
                input_pmf: pmf,
                eps,
                seed: code_seed,
            }),
            Scheme::Fb => SchemeParams::Fb(FbIdParams {
                n,
                m_y_count: m[0],
                m_z_count: m[1],
                id_rate_y: r[0],
                id_rate_z: r[1],
                bin_rate_z: r[2],
                pool_rate: r[3],
                transmission_rate: r[4],
                input_pmf: pmf,
                eps,
                seed: code_seed,
                codebook: cfg.codebook,
            }),
        })
    }

    /// The module-level validator of the scheme.
    pub fn validate(&self, ch: &Channel) -> Result<Validation> {
        Ok(match self {
            SchemeParams::Dmc(p) => p.validate(dmc_of(ch)?),
            SchemeParams::Bc(p) => p.validate(bc2_of(ch)?),
            SchemeParams::Bc3(p) => p.validate(bc3_of(ch)?),
            SchemeParams::Cm(p) => p.validate(bc2_of(ch)?),
            SchemeParams::Fb(p) => p.validate(bc2_of(ch)?),
        })
    }

    pub fn build(&self, ch: &Channel) -> Result<AnyCode> {
        Ok(match self {
            SchemeParams::Dmc(p) => AnyCode::Dmc(build_dmc_code(p)?),
            SchemeParams::Bc(p) => AnyCode::Bc(build_bc_code(p)?),
            SchemeParams::Bc3(p) => AnyCode::Bc3(build_bc3_code(p)?),
            SchemeParams::Cm(p) => AnyCode::Cm(build_cm_code(p)?),
            SchemeParams::Fb(p) => AnyCode::Fb(build_fb_code(p, bc2_of(ch)?.marginal_y())?),
        })
    }
}

/// One report per receiver, in [`Scheme::sides`] order.
pub fn evaluate_code(code: &AnyCode, ch: &Channel, mode: EvalMode, criterion: Criterion) -> Result<Vec<ErrorReport>> {
    Ok(match code {
        AnyCode::Dmc(c) => vec![error_report_dmc(c, dmc_of(ch)?, mode)?],
        AnyCode::Bc(c) => {
            let r = match criterion {
                Criterion::Average => id_bc::avg_error_report_bc(c, bc2_of(ch)?, mode)?,
                Criterion::Maximum => id_bc::max_error_report_bc(c, bc2_of(ch)?, mode)?,
            };
            vec![r.y, r.z]
        }
        AnyCode::Bc3(c) => evaluate_bc3(c, bc3_of(ch)?, mode, criterion)?.sides,
        AnyCode::Cm(c) => evaluate_cm(c, bc2_of(ch)?, mode, criterion)?.sides,
        AnyCode::Fb(c) => {
            let r = evaluate_fb(c, bc2_of(ch)?, mode, criterion)?;
            vec![r.y, r.z]
        }
    })
}

/// Largest codeword-index TV over messages and sides, where defined.
fn index_tv(code: &AnyCode) -> Option<f64> {
    match code {
        AnyCode::Bc(c) => Some(id_bc::max_index_tv(c, Side::Y).max(id_bc::max_index_tv(c, Side::Z))),
        AnyCode::Fb(c) => Some(
            (0..c.m_z_count())
                .map(|mz| fb_index_distribution_diag(c, mz, false).tv)
                .fold(0.0, f64::max),
        ),
        _ => None,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Ok,
    /// A state or memory budget was exceeded; the sweep went on.
    Budget,
    Error,
}

/// One CSV row. Wall time is kept in memory only, so that files stay
/// byte-identical across runs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub config_hash: String,
    pub scheme: Scheme,
    pub point: usize,
    pub trial: usize,
    pub n: usize,
    /// Rate tuple, `;`-separated.
    pub rates: String,
    pub m_counts: String,
    pub eps: f64,
    pub mu: Option<f64>,
    pub seed: u64,
    pub code_seed: u64,
    pub status: Status,
    pub method: String,
    pub p_y_missed: Option<f64>,
    pub p_y_wrong: Option<f64>,
    pub p_z_missed: Option<f64>,
    pub p_z_wrong: Option<f64>,
    pub p_3_missed: Option<f64>,
    pub p_3_wrong: Option<f64>,
    pub max_error: Option<f64>,
    /// Largest Wilson half-width among the reported maxima.
    pub half_width: Option<f64>,
    pub tv_max: Option<f64>,
    pub gmu_pass: Option<bool>,
    pub bin_size_mean: Option<f64>,
    pub detail: String,
    #[serde(skip)]
    pub wall_ms: f64,
}

impl RunRecord {
    /// Named error quantities present in this record.
    pub fn quantities(&self) -> Vec<(&'static str, f64)> {
        [
            ("p_y_missed", self.p_y_missed),
            ("p_y_wrong", self.p_y_wrong),
            ("p_z_missed", self.p_z_missed),
            ("p_z_wrong", self.p_z_wrong),
            ("p_3_missed", self.p_3_missed),
            ("p_3_wrong", self.p_3_wrong),
            ("max_error", self.max_error),
        ]
        .into_iter()
        .filter_map(|(k, v)| v.map(|v| (k, v)))
        .collect()
    }

    fn family(&self) -> String {
        format!(
            "rates={} m={} eps={} mu={}",
            self.rates,
            self.m_counts,
            self.eps,
            self.mu.map_or("-".into(), |m| m.to_string())
        )
    }
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(";")
}

/// Validates every grid point before anything runs; the first rejected
/// point is reported with the validator's reason codes.
pub fn validate_config(cfg: &ExperimentConfig, ch: &Channel) -> Result<Vec<SchemeParams>> {
    if cfg.grid.mu.iter().any(|_| cfg.scheme != Scheme::Dmc) {
        return Err(Error::Config("mu is only used by the dmc scheme".into()));
    }
    let pmf = input_pmf(cfg, ch)?;
    let mut out = Vec::new();
    for p in cfg.points() {
        let params = SchemeParams::new(cfg, &p, &pmf, 0)?;
        let v = params.validate(ch)?;
        if !v.is_valid() {
            let detail: Vec<String> = v.errors().map(|i| i.detail.clone()).collect();
            return Err(Error::Config(format!(
                "grid point {} rejected [{}]: {}",
                p.index,
                v.error_codes(),
                detail.join("; ")
            )));
        }
        if let (Some(mu), SchemeParams::Dmc(d)) = (p.mu, &params) {
            let hi = (d.pool_rate - d.bin_rate).min(d.bin_rate - d.id_rate);
            if !(mu > 0.0 && mu < hi) {
                return Err(Error::Config(format!(
                    "grid point {} rejected [{}]: mu {mu} outside (0, {hi})",
                    p.index,
                    Reason::Structure.code()
                )));
            }
        }
        out.push(params);
    }
    Ok(out)
}

fn input_pmf(cfg: &ExperimentConfig, ch: &Channel) -> Result<Pmf> {
    match &cfg.input_pmf {
        Some(p) => {
            let p = Pmf::new(p.clone())?;
            if p.len() != ch.input_size() {
                return Err(Error::Config("input pmf does not match the channel input".into()));
            }
            Ok(p)
        }
        None => Ok(Pmf::uniform(ch.input_size())),
    }
}

/// Code seed of a run.
pub fn code_seed(scheme: Scheme, point: usize, seed: u64) -> u64 {
    seed::derive(seed, "sweep", &[scheme.id(), point as u64])
}

fn run_mode(mode: EvalMode, code_seed: u64) -> EvalMode {
    let s = seed::derive(code_seed, "mc", &[]);
    match mode {
        EvalMode::MonteCarlo { trials, .. } => EvalMode::MonteCarlo { trials, seed: s },
        EvalMode::Auto {
            budget_states, trials, ..
        } => EvalMode::Auto {
            budget_states,
            trials,
            seed: s,
        },
        m => m,
    }
}

fn run_one(cfg: &ExperimentConfig, ch: &Channel, hash: &str, point: &GridPoint, trial: usize, pmf: &Pmf) -> RunRecord {
    let start = Instant::now();
    let seed = cfg.seeds[trial];
    let cs = code_seed(cfg.scheme, point.index, seed);
    let mut rec = RunRecord {
        config_hash: hash.into(),
        scheme: cfg.scheme,
        point: point.index,
        trial,
        n: point.n,
        rates: join(&point.rates),
        m_counts: join(&point.m_counts),
        eps: point.eps,
        mu: point.mu,
        seed,
        code_seed: cs,
        status: Status::Ok,
        method: String::new(),
        p_y_missed: None,
        p_y_wrong: None,
        p_z_missed: None,
        p_z_wrong: None,
        p_3_missed: None,
        p_3_wrong: None,
        max_error: None,
        half_width: None,
        tv_max: None,
        gmu_pass: None,
        bin_size_mean: None,
        detail: String::new(),
        wall_ms: 0.0,
    };
    if let Err(e) = fill(cfg, ch, point, pmf, cs, &mut rec) {
        rec.status = if matches!(e, Error::Budget(_)) {
            Status::Budget
        } else {
            Status::Error
        };
        rec.detail = e.to_string();
    }
    rec.wall_ms = start.elapsed().as_secs_f64() * 1e3;
    rec
}

fn fill(cfg: &ExperimentConfig, ch: &Channel, point: &GridPoint, pmf: &Pmf, cs: u64, rec: &mut RunRecord) -> Result<()> {
    let params = SchemeParams::new(cfg, point, pmf, cs)?;
    let code = params.build(ch)?;
    if let (Some(mu), AnyCode::Dmc(c), SchemeParams::Dmc(p)) = (point.mu, &code, &params) {
        let g = check_g_mu(c, p.n, p.id_rate, p.bin_rate, p.pool_rate, mu, GMU_PAIR_BUDGET, cs)?;
        rec.gmu_pass = Some(g.pass);
        let total: usize = c.index_sets.iter().map(|s| s.len()).sum();
        rec.bin_size_mean = Some(total as f64 / c.m_count() as f64);
    }
    let reports = evaluate_code(&code, ch, run_mode(cfg.mode, cs), cfg.criterion)?;
    rec.method = match reports[0].method {
        crate::eval::Method::Exact => "exact".into(),
        crate::eval::Method::MonteCarlo { trials_per_tuple } => format!("mc:{trials_per_tuple}"),
    };
    let slots = [
        (&mut rec.p_y_missed, &mut rec.p_y_wrong),
        (&mut rec.p_z_missed, &mut rec.p_z_wrong),
        (&mut rec.p_3_missed, &mut rec.p_3_wrong),
    ];
    let mut hw: f64 = 0.0;
    for ((missed, wrong), r) in slots.into_iter().zip(&reports) {
        *missed = Some(r.max_missed);
        *wrong = Some(r.max_wrong);
        for e in r.all_estimates() {
            if e.value == r.max_missed || e.value == r.max_wrong {
                hw = hw.max(e.half_width);
            }
        }
    }
    rec.max_error = Some(reports.iter().map(|r| r.max_error()).fold(0.0, f64::max));
    rec.half_width = Some(hw);
    if cfg.diagnostics {
        rec.tv_max = index_tv(&code);
    }
    Ok(())
}

pub fn read_records(path: &Path) -> Result<Vec<RunRecord>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

pub fn write_records(path: &Path, records: &[RunRecord]) -> Result<()> {
    let tmp = path.with_extension("csv.tmp");
    {
        let mut w = csv::Writer::from_path(&tmp)?;
        for r in records {
            w.serialize(r)?;
        }
        w.flush()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepOutcome {
    pub records: Vec<RunRecord>,
    /// Runs computed in this call; the rest were reused.
    pub computed: usize,
}

impl SweepOutcome {
    pub fn all_completed(&self) -> bool {
        self.records.iter().all(|r| r.status == Status::Ok)
    }
}

/// Sidecar next to the CSV: the config, its hash and the summary.
#[derive(Clone, Debug, Serialize)]
struct Sidecar<'a> {
    config_hash: &'a str,
    config: &'a ExperimentConfig,
    summary: &'a Summary,
}

pub fn sidecar_path(csv: &Path) -> PathBuf {
    let mut s = csv.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

/// Runs the sweep. With an output path, rows with the same config hash
/// found there are reused and the full table is rewritten in grid order.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<SweepOutcome> {
    let ch = cfg.load_channel()?;
    run_sweep_on(cfg, &ch)
}

pub fn run_sweep_on(cfg: &ExperimentConfig, ch: &Channel) -> Result<SweepOutcome> {
    validate_config(cfg, ch)?;
    let hash = cfg.hash(ch);
    let pmf = input_pmf(cfg, ch)?;
    let points = cfg.points();
    let mut done: BTreeMap<(usize, usize), RunRecord> = BTreeMap::new();
    if let Some(out) = &cfg.out {
        if out.exists() {
            for r in read_records(out)? {
                if r.config_hash == hash && r.point < points.len() && r.trial < cfg.seeds.len() {
                    done.insert((r.point, r.trial), r);
                }
            }
        }
    }
    let todo: Vec<(usize, usize)> = points
        .iter()
        .flat_map(|p| (0..cfg.seeds.len()).map(move |t| (p.index, t)))
        .filter(|k| !done.contains_key(k))
        .collect();
    let fresh: Vec<RunRecord> = todo
        .par_iter()
        .map(|&(p, t)| run_one(cfg, ch, &hash, &points[p], t, &pmf))
        .collect();
    let computed = fresh.len();
    for r in fresh {
        done.insert((r.point, r.trial), r);
    }
    let records: Vec<RunRecord> = done.into_values().collect();
    if let Some(out) = &cfg.out {
        write_records(out, &records)?;
        let summary = summarize(&records);
        let side = Sidecar {
            config_hash: &hash,
            config: cfg,
            summary: &summary,
        };
        fs::write(sidecar_path(out), serde_json::to_string_pretty(&side)? + "\n")?;
    }
    Ok(SweepOutcome { records, computed })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuantitySummary {
    pub median: f64,
    /// Distribution-free 95% interval for the median from order statistics.
    pub ci_low: f64,
    pub ci_high: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointSummary {
    pub point: usize,
    pub n: usize,
    pub family: String,
    pub records: usize,
    /// Records that did not complete.
    pub failed: usize,
    pub flagged: bool,
    pub quantities: BTreeMap<String, QuantitySummary>,
}

/// Least-squares fit of ln(median) against n within one family.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trend {
    pub family: String,
    pub quantity: String,
    pub slope: f64,
    pub intercept: f64,
    pub points_used: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub points: Vec<PointSummary>,
    pub trends: Vec<Trend>,
}

pub fn median(sorted: &[f64]) -> f64 {
    let k = sorted.len();
    if k % 2 == 1 {
        sorted[k / 2]
    } else {
        0.5 * (sorted[k / 2 - 1] + sorted[k / 2])
    }
}

fn median_ci(sorted: &[f64]) -> (f64, f64) {
    let k = sorted.len() as f64;
    let half = 0.98 * k.sqrt();
    let lo = ((k / 2.0 - half).floor().max(1.0) as usize).min(sorted.len()) - 1;
    let hi = ((k / 2.0 + half + 1.0).ceil() as usize).clamp(1, sorted.len()) - 1;
    (sorted[lo], sorted[hi])
}

/// Returns (slope, intercept) of the least-squares line through the points.
pub fn least_squares(xs: &[f64], ys: &[f64]) -> Option<(f64, f64)> {
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if xs.len() < 2 || sxx == 0.0 {
        return None;
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

/// Per-point medians with intervals, and per-family slopes of ln(median)
/// against n over points whose median lies in (0, 0.5).
pub fn summarize(records: &[RunRecord]) -> Summary {
    let mut by_point: BTreeMap<usize, Vec<&RunRecord>> = BTreeMap::new();
    for r in records {
        by_point.entry(r.point).or_default().push(r);
    }
    let mut points = Vec::new();
    for (point, rs) in by_point {
        let ok: Vec<&&RunRecord> = rs.iter().filter(|r| r.status == Status::Ok).collect();
        let mut values: BTreeMap<String, Vec<f64>> = BTreeMap::new();
        for r in &ok {
            for (k, v) in r.quantities() {
                values.entry(k.to_string()).or_default().push(v);
            }
        }
        let quantities = values
            .into_iter()
            .map(|(k, mut v)| {
                v.sort_by(f64::total_cmp);
                let (ci_low, ci_high) = median_ci(&v);
                (
                    k,
                    QuantitySummary {
                        median: median(&v),
                        ci_low,
                        ci_high,
                    },
                )
            })
            .collect();
        let failed = rs.len() - ok.len();
        points.push(PointSummary {
            point,
            n: rs[0].n,
            family: rs[0].family(),
            records: rs.len(),
            failed,
            flagged: failed > 0,
            quantities,
        });
    }
    let mut families: BTreeMap<(String, String), Vec<(f64, f64)>> = BTreeMap::new();
    for p in &points {
        for (q, s) in &p.quantities {
            if s.median > 0.0 && s.median < 0.5 {
                families
                    .entry((p.family.clone(), q.clone()))
                    .or_default()
                    .push((p.n as f64, s.median.ln()));
            }
        }
    }
    let trends = families
        .into_iter()
        .filter_map(|((family, quantity), pts)| {
            let (xs, ys): (Vec<f64>, Vec<f64>) = pts.iter().copied().unzip();
            least_squares(&xs, &ys).map(|(slope, intercept)| Trend {
                family,
                quantity,
                slope,
                intercept,
                points_used: pts.len(),
            })
        })
        .collect();
    Summary { points, trends }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(point: usize, n: usize, err: f64, status: Status) -> RunRecord {
        RunRecord {
            config_hash: "h".into(),
            scheme: Scheme::Dmc,
            point,
            trial: 0,
            n,
            rates: "0.1;0.2;0.3".into(),
            m_counts: "4".into(),
            eps: 0.5,
            mu: None,
            seed: 0,
            code_seed: 0,
            status,
            method: "exact".into(),
            p_y_missed: Some(err),
            p_y_wrong: Some(err / 2.0),
            p_z_missed: None,
            p_z_wrong: None,
            p_3_missed: None,
            p_3_wrong: None,
            max_error: Some(err),
            half_width: Some(0.0),
            tv_max: None,
            gmu_pass: None,
            bin_size_mean: None,
            detail: String::new(),
            wall_ms: 0.0,
        }
    }

    #[test]
    fn single_record_medians_equal_the_record() {
        let s = summarize(&[record(0, 8, 0.3, Status::Ok)]);
        let q = &s.points[0].quantities["max_error"];
        assert_eq!((q.median, q.ci_low, q.ci_high), (0.3, 0.3, 0.3));
        assert_eq!(s.points[0].quantities["p_y_wrong"].median, 0.15);
    }

    #[test]
    fn exponential_errors_fit_their_rate() {
        let recs: Vec<RunRecord> = [10, 20, 30, 40]
            .iter()
            .enumerate()
            .map(|(i, &n)| record(i, n, (-0.1 * n as f64).exp(), Status::Ok))
            .collect();
        let s = summarize(&recs);
        let t = s.trends.iter().find(|t| t.quantity == "max_error").unwrap();
        // n = 10 gives e^{-1} = 0.37 < 0.5, so all four points enter.
        assert_eq!(t.points_used, 4);
        assert!((t.slope + 0.1).abs() < 1e-9, "{}", t.slope);
    }

    #[test]
    fn failed_records_are_flagged() {
        let mut b = record(0, 8, 0.0, Status::Budget);
        b.trial = 1;
        let s = summarize(&[record(0, 8, 0.2, Status::Ok), b]);
        assert!(s.points[0].flagged);
        assert_eq!((s.points[0].records, s.points[0].failed), (2, 1));
        assert_eq!(s.points[0].quantities["max_error"].median, 0.2);
    }

    #[test]
    fn median_interval_brackets_the_median() {
        let v: Vec<f64> = (0..32).map(f64::from).collect();
        let (lo, hi) = median_ci(&v);
        assert!(lo < median(&v) && median(&v) < hi);
        assert!(lo >= 8.0 && hi <= 23.0, "{lo} {hi}");
    }
}
