//! Statistical checks of the bin-concentration, L-type and feedback
//! type-concentration lemmas, driven by a JSON config.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{Channel, Dmc, Pmf};
use crate::error::{Error, Result};
use crate::id_dmc::{build_dmc_code, check_g_mu, g_mu_failure_bound, IdParams};
use crate::id_ext::{
    fb_type_concentration_check, CausalEncoder, ConcentrationResult, MemorylessEncoder, MessageDependentEncoder,
    SwitchingEncoder,
};
use crate::info::mutual_information;
use crate::pool;
use crate::seed;
use crate::typeskit::{enumerate_types, l_type_bound_check, rho, LTypeCheck, TypeVector};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GMuCase {
    pub n: usize,
    pub m_count: usize,
    /// (R, R̃, R_pool).
    pub rates: [f64; 3],
    pub mu: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LTypeCase {
    pub n: usize,
    pub delta: f64,
    pub eps: f64,
    /// Defaults to ⌈e^{n(I(P,W) + ρ(δ))}⌉ for each type P.
    #[serde(default)]
    pub l: Option<u64>,
    /// Random decision sets per type class and seed.
    pub sets: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EncoderFamily {
    Memoryless,
    Switching,
    MessageDependent,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FbTypeCase {
    pub n: usize,
    pub nu: f64,
    pub trials: u64,
    pub family: EncoderFamily,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LemmaConfig {
    /// A single-output channel; relative to the config file.
    pub channel: PathBuf,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub g_mu: Vec<GMuCase>,
    #[serde(default)]
    pub l_type: Vec<LTypeCase>,
    #[serde(default)]
    pub fb_type: Vec<FbTypeCase>,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

impl LemmaConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let mut cfg: LemmaConfig =
            serde_json::from_str(&fs::read_to_string(path)?).map_err(|e| Error::Config(e.to_string()))?;
        if cfg.channel.is_relative() {
            if let Some(dir) = path.parent() {
                cfg.channel = dir.join(&cfg.channel);
            }
        }
        Ok(cfg)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GMuResult {
    pub case: GMuCase,
    pub runs: usize,
    pub failures: usize,
    pub frequency: f64,
    pub bound: f64,
    /// Monte Carlo deviation of the frequency at the clipped bound.
    pub sigma: f64,
    pub bin_size_mean: f64,
    /// e^{nR̃}.
    pub bin_size_target: f64,
    /// Standard deviation of the mean bin size.
    pub bin_size_sigma: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LTypeResult {
    pub case: LTypeCase,
    pub checks: Vec<LTypeCheck>,
    pub failures: usize,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FbTypeResult {
    pub case: FbTypeCase,
    pub result: ConcentrationResult,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LemmaReport {
    pub g_mu: Vec<GMuResult>,
    pub l_type: Vec<LTypeResult>,
    pub fb_type: Vec<FbTypeResult>,
}

impl LemmaReport {
    pub fn all_pass(&self) -> bool {
        self.g_mu.iter().all(|r| r.pass)
            && self.l_type.iter().all(|r| r.pass)
            && self.fb_type.iter().all(|r| r.result.pass)
    }
}

/// Runs the bin-condition check once per seed.
pub fn g_mu_frequency(case: &GMuCase, pmf: &Pmf, seeds: &[u64]) -> Result<GMuResult> {
    let [r, rt, rp] = case.rates;
    let runs: Vec<(bool, usize)> = seeds
        .par_iter()
        .map(|&s| {
            let p = IdParams {
                n: case.n,
                m_count: case.m_count,
                id_rate: r,
                bin_rate: rt,
                pool_rate: rp,
                input_pmf: pmf.clone(),
                eps: 0.5,
                seed: seed::derive(s, "gmu", &[]),
            };
            let code = build_dmc_code(&p)?;
            let g = check_g_mu(&code, case.n, r, rt, rp, case.mu, 1 << 16, p.seed)?;
            Ok((g.pass, code.index_sets.iter().map(|b| b.len()).sum()))
        })
        .collect::<Result<_>>()?;
    let failures = runs.iter().filter(|r| !r.0).count();
    let frequency = failures as f64 / runs.len().max(1) as f64;
    let bound = g_mu_failure_bound(case.m_count, case.n, rt, case.mu);
    let b = bound.min(1.0);
    let sigma = (b * (1.0 - b) / runs.len().max(1) as f64).sqrt();
    let bins = (runs.len() * case.m_count) as f64;
    let bin_size_mean = runs.iter().map(|r| r.1 as f64).sum::<f64>() / bins;
    let size = pool::pool_size(case.n, rp)? as f64;
    let p = pool::selection_prob(case.n, rp, rt);
    let bin_size_sigma = (size * p * (1.0 - p) / bins).sqrt();
    let bin_size_target = (case.n as f64 * rt).exp();
    Ok(GMuResult {
        case: case.clone(),
        runs: runs.len(),
        failures,
        frequency,
        bound,
        sigma,
        bin_size_mean,
        bin_size_target,
        bin_size_sigma,
        pass: frequency <= bound + 3.0 * sigma && (bin_size_mean - bin_size_target).abs() <= 3.0 * bin_size_sigma,
    })
}

/// Smallest L allowed by the lemma for the type's distribution.
pub fn default_l(t: &TypeVector, w: &Dmc, delta: f64) -> u64 {
    let n = t.counts.iter().sum::<u32>() as f64;
    let i = mutual_information(&t.to_pmf(), w).unwrap_or(0.0);
    (n * (i + rho(delta, w.output_size()))).exp().ceil().min(u64::MAX as f64) as u64
}

/// Every type class of length n (except constant sequences), every seed.
pub fn l_type_results(case: &LTypeCase, w: &Dmc, seeds: &[u64]) -> Result<LTypeResult> {
    let types: Vec<_> = enumerate_types(case.n as u32, w.input_size())
        .into_iter()
        .filter(|t| t.counts.iter().filter(|&&c| c > 0).count() > 1)
        .collect();
    let jobs: Vec<(usize, u64)> = (0..types.len()).flat_map(|i| seeds.iter().map(move |&s| (i, s))).collect();
    let checks: Vec<LTypeCheck> = jobs
        .par_iter()
        .map(|&(i, s)| {
            l_type_bound_check(
                w,
                &types[i],
                case.l.unwrap_or_else(|| default_l(&types[i], w, case.delta)),
                case.delta,
                case.eps,
                case.sets,
                seed::derive(s, "ltype-case", &[i as u64]),
            )
        })
        .collect::<Result<_>>()?;
    let failures = checks.iter().map(|c| c.failures).sum();
    Ok(LTypeResult {
        case: case.clone(),
        checks,
        failures,
        pass: failures == 0,
    })
}

/// Input law putting 0.8 on symbol k and spreading the rest evenly.
fn leaning_law(x: usize, k: usize) -> Pmf {
    let mut p = vec![0.2 / (x - 1) as f64; x];
    p[k % x] = 0.8;
    Pmf::new(p).expect("valid law")
}

pub fn encoder_for(family: EncoderFamily, w: &Dmc) -> Box<dyn CausalEncoder> {
    let x = w.input_size();
    let laws = |k: usize| (0..k).map(|i| leaning_law(x.max(2), i)).collect::<Vec<_>>();
    match family {
        EncoderFamily::Memoryless => Box::new(MemorylessEncoder { pmf: Pmf::uniform(x) }),
        EncoderFamily::Switching => Box::new(SwitchingEncoder { laws: laws(w.output_size()) }),
        EncoderFamily::MessageDependent => Box::new(MessageDependentEncoder { messages: 4, laws: laws(x.max(2)) }),
    }
}

pub fn verify_lemmas(cfg: &LemmaConfig) -> Result<LemmaReport> {
    let w = match Channel::load(&cfg.channel)? {
        Channel::Dmc(w) => w,
        _ => return Err(Error::Config("lemma checks need a single-output channel".into())),
    };
    if w.input_size() < 2 {
        return Err(Error::Config("lemma checks need at least two input symbols".into()));
    }
    let pmf = Pmf::uniform(w.input_size());
    let mut report = LemmaReport::default();
    for c in &cfg.g_mu {
        report.g_mu.push(g_mu_frequency(c, &pmf, &cfg.seeds)?);
    }
    for c in &cfg.l_type {
        report.l_type.push(l_type_results(c, &w, &cfg.seeds)?);
    }
    for (i, c) in cfg.fb_type.iter().enumerate() {
        let enc = encoder_for(c.family, &w);
        let root = cfg.seeds.first().copied().unwrap_or(0);
        report.fb_type.push(FbTypeResult {
            case: c.clone(),
            result: fb_type_concentration_check(enc.as_ref(), &w, c.n, c.nu, c.trials, seed::derive(root, "fbtype", &[i as u64])),
        });
    }
    if let Some(out) = &cfg.out {
        fs::write(out, serde_json::to_string_pretty(&report)? + "\n")?;
    }
    Ok(report)
}
