//! Short random transmission codes used in the feedback phase.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{Dmc, Pmf, Sequence};
use crate::error::{Error, Result};
use crate::eval::{decode_index, output_states, Estimate};
use crate::info::capacity;
use crate::seed;
use crate::typeskit::TypicalityTester;

/// Codebooks larger than this are refused.
pub const MAX_CODEBOOK: u64 = 1 << 20;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TxDecoder {
    /// Unique jointly typical codeword; failures decode to message 0.
    Typicality { eps: f64 },
    /// Most likely codeword; ties go to the lowest index.
    MaxLikelihood,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CodebookSpec {
    pub decoder: TxDecoder,
    /// Number of random codebooks drawn; the one with the largest minimum
    /// Hamming distance is kept (lowest draw on ties).
    pub candidates: usize,
}

impl Default for CodebookSpec {
    fn default() -> Self {
        CodebookSpec {
            decoder: TxDecoder::Typicality { eps: 0.5 },
            candidates: 1,
        }
    }
}

#[derive(Clone, Debug)]
pub struct TransmissionCode {
    pub k: usize,
    pub rate: f64,
    pub codebook: Vec<Sequence>,
    pub input_pmf: Pmf,
    pub decoder: TxDecoder,
    channel: Dmc,
    log_w: Vec<f64>,
    tester: Option<TypicalityTester>,
}

fn min_distance(book: &[Sequence]) -> usize {
    let mut best = usize::MAX;
    for i in 0..book.len() {
        for j in i + 1..book.len() {
            let d = book[i].iter().zip(&book[j]).filter(|(a, b)| a != b).count();
            best = best.min(d);
        }
    }
    best
}

/// Random i.i.d. codebook of e^{k·rate} words drawn from a capacity-achieving
/// input law of `w`.
pub fn build_transmission_code(w: &Dmc, k: usize, rate: f64, seed: u64, spec: CodebookSpec) -> Result<TransmissionCode> {
    if k == 0 || !(rate > 0.0) {
        return Err(Error::Param("transmission code needs k > 0 and a positive rate".into()));
    }
    let cap = capacity(w, 1e-10, 100_000).or_else(|e| match e {
        Error::NoConvergence { pmf, lower, upper, iterations } => Ok(crate::info::CapacityResult {
            pmf: crate::info::normalized(&pmf),
            capacity: lower,
            upper,
            iterations,
        }),
        e => Err(e),
    })?;
    if rate >= cap.capacity {
        return Err(Error::Param(format!("rate {rate} is not below capacity {}", cap.capacity)));
    }
    let size = (k as f64 * rate).exp().round().max(1.0);
    if size > MAX_CODEBOOK as f64 {
        return Err(Error::Budget(format!("codebook of {size:.3e} words")));
    }
    let size = size as usize;
    let draw = |i: u64| -> Vec<Sequence> {
        let mut rng = seed::stream(seed, "txcode", &[i]);
        (0..size).map(|_| cap.pmf.sample_sequence(k, &mut rng)).collect()
    };
    let mut book = draw(0);
    let mut best = min_distance(&book);
    for i in 1..spec.candidates.max(1) as u64 {
        let c = draw(i);
        let d = min_distance(&c);
        if d > best {
            best = d;
            book = c;
        }
    }
    let tester = match spec.decoder {
        TxDecoder::Typicality { eps } => Some(TypicalityTester::new(&cap.pmf.joint_with(w)?, w.output_size(), k, eps)),
        TxDecoder::MaxLikelihood => None,
    };
    Ok(TransmissionCode {
        k,
        rate,
        codebook: book,
        input_pmf: cap.pmf,
        decoder: spec.decoder,
        log_w: w.flat().iter().map(|p| p.ln()).collect(),
        channel: w.clone(),
        tester,
    })
}

impl TransmissionCode {
    /// Reassembles a code from a stored codebook.
    pub fn from_codebook(w: &Dmc, rate: f64, codebook: Vec<Sequence>, input_pmf: Pmf, decoder: TxDecoder) -> Result<Self> {
        let k = codebook.first().map_or(0, |c| c.len());
        if k == 0 || codebook.iter().any(|c| c.len() != k) || input_pmf.len() != w.input_size() {
            return Err(Error::Param("codebook needs equal-length words over the channel input".into()));
        }
        for c in &codebook {
            crate::channel::check_sequence(c, w.input_size())?;
        }
        let tester = match decoder {
            TxDecoder::Typicality { eps } => Some(TypicalityTester::new(&input_pmf.joint_with(w)?, w.output_size(), k, eps)),
            TxDecoder::MaxLikelihood => None,
        };
        Ok(TransmissionCode {
            k,
            rate,
            codebook,
            input_pmf,
            decoder,
            log_w: w.flat().iter().map(|p| p.ln()).collect(),
            channel: w.clone(),
            tester,
        })
    }

    pub fn size(&self) -> usize {
        self.codebook.len()
    }

    pub fn encode(&self, u: u32) -> &[u8] {
        &self.codebook[u as usize]
    }

    pub fn channel(&self) -> &Dmc {
        &self.channel
    }

    pub fn decode(&self, y: &[u8]) -> u32 {
        match &self.tester {
            Some(t) => {
                let mut found = None;
                for (u, x) in self.codebook.iter().enumerate() {
                    if t.check(x, y) {
                        if found.is_some() {
                            return 0;
                        }
                        found = Some(u as u32);
                    }
                }
                found.unwrap_or(0)
            }
            None => {
                let ny = self.channel.output_size();
                let mut best = (f64::NEG_INFINITY, 0u32);
                for (u, x) in self.codebook.iter().enumerate() {
                    let ll: f64 = x.iter().zip(y).map(|(&a, &b)| self.log_w[a as usize * ny + b as usize]).sum();
                    if ll > best.0 {
                        best = (ll, u as u32);
                    }
                }
                best.1
            }
        }
    }

    /// t[u][u'] = probability that φ returns u' when f(u) is sent.
    pub fn transition_matrix(&self, budget: u64) -> Result<Vec<Vec<f64>>> {
        let ny = self.channel.output_size();
        let states = output_states(ny, self.k)
            .filter(|&s| s <= budget)
            .ok_or_else(|| Error::Budget(format!("|Y|^k = {ny}^{} exceeds {budget}", self.k)))?;
        let u = self.size();
        let chunks = 64u64.min(states);
        let per = states.div_ceil(chunks);
        let parts: Vec<Vec<f64>> = (0..chunks)
            .into_par_iter()
            .map(|c| {
                let mut t = vec![0.0; u * u];
                let mut y = vec![0u8; self.k];
                for idx in c * per..((c + 1) * per).min(states) {
                    decode_index(idx, ny as u64, &mut y);
                    let d = self.decode(&y) as usize;
                    for (a, x) in self.codebook.iter().enumerate() {
                        t[a * u + d] += self.channel.nfold_prob_unchecked(x, &y);
                    }
                }
                t
            })
            .collect();
        let mut t = vec![0.0; u * u];
        for p in parts {
            t.iter_mut().zip(p).for_each(|(a, b)| *a += b);
        }
        Ok(t.chunks(u).map(|r| r.to_vec()).collect())
    }

    /// max_u P(φ(Y^k) ≠ u | f(u)), exactly.
    pub fn max_error_exact(&self, budget: u64) -> Result<f64> {
        let t = self.transition_matrix(budget)?;
        Ok(t.iter().enumerate().map(|(u, r)| 1.0 - r[u]).fold(0.0, f64::max).max(0.0))
    }

    /// Monte Carlo estimate of the maximum error, with the Wilson interval of
    /// the worst codeword.
    pub fn max_error_mc(&self, trials: u64, seed: u64) -> Estimate {
        (0..self.size() as u32)
            .into_par_iter()
            .map(|u| {
                let mut rng = seed::stream(seed, "txerr", &[u as u64]);
                let mut y = Vec::new();
                let mut errs = 0;
                for _ in 0..trials {
                    self.channel.sample_output_into(self.encode(u), &mut rng, &mut y);
                    if self.decode(&y) != u {
                        errs += 1;
                    }
                }
                Estimate::wilson(errs, trials)
            })
            .collect::<Vec<_>>()
            .into_iter()
            .fold(Estimate::exact(0.0), |a, b| if b.value > a.value { b } else { a })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noiseless_distinct_codewords_never_err() {
        let w = Dmc::noiseless(2);
        for s in 0..8 {
            for dec in [TxDecoder::MaxLikelihood, TxDecoder::Typicality { eps: 1.0 }] {
                let c = build_transmission_code(&w, 8, 2f64.ln() * 0.5, s, CodebookSpec { decoder: dec, candidates: 1 }).unwrap();
                assert_eq!(c.size(), 16);
                if min_distance(&c.codebook) > 0 {
                    assert_eq!(c.max_error_exact(1 << 20).unwrap(), 0.0);
                }
            }
        }
    }

    #[test]
    fn rate_at_or_above_capacity_is_rejected() {
        let w = Dmc::bsc(0.11);
        assert!(build_transmission_code(&w, 8, 0.35, 0, CodebookSpec::default()).is_err());
        assert!(build_transmission_code(&w, 8, 0.3, 0, CodebookSpec::default()).is_ok());
    }

    #[test]
    fn exact_and_monte_carlo_errors_agree() {
        let w = Dmc::bsc(0.05);
        let spec = CodebookSpec {
            decoder: TxDecoder::MaxLikelihood,
            candidates: 16,
        };
        let c = build_transmission_code(&w, 8, 0.3, 1, spec).unwrap();
        let t = c.transition_matrix(1 << 20).unwrap();
        for r in &t {
            assert!((r.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        let e = c.max_error_mc(20_000, 3);
        let x = c.max_error_exact(1 << 20).unwrap();
        assert!((e.value - x).abs() < 0.03, "{} vs {x}", e.value);
    }
}
