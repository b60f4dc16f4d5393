//! Finite-alphabet channels: PMFs, DMCs and two/three-receiver broadcast
//! channels, with n-fold product laws and sampling.

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Stochasticity tolerance for PMFs and channel rows.
pub const PROB_TOL: f64 = 1e-12;
/// Alphabets are indexed by one byte.
pub const MAX_ALPHABET: usize = 256;

/// A length-n sequence of alphabet indices.
pub type Sequence = Vec<u8>;

pub fn check_sequence(x: &[u8], size: usize) -> Result<()> {
    match x.iter().find(|&&s| s as usize >= size) {
        Some(&s) => Err(Error::Symbol {
            symbol: s as usize,
            size,
        }),
        None => Ok(()),
    }
}

fn check_alphabet(k: usize) -> Result<()> {
    if k == 0 || k > MAX_ALPHABET {
        return Err(Error::InvalidChannel(format!(
            "alphabet size {k} outside 1..={MAX_ALPHABET}"
        )));
    }
    Ok(())
}

fn check_stochastic(probs: &[f64], what: &str) -> Result<()> {
    if let Some(p) = probs.iter().find(|p| !p.is_finite() || **p < 0.0) {
        return Err(Error::InvalidPmf(format!("{what}: entry {p} is not a probability")));
    }
    let s: f64 = probs.iter().sum();
    if (s - 1.0).abs() > PROB_TOL {
        return Err(Error::InvalidPmf(format!("{what}: entries sum to {s}")));
    }
    Ok(())
}

/// Draws an index from `cdf` (cumulative sums, last entry ~1).
#[inline]
fn draw(cdf: &[f64], u: f64) -> usize {
    cdf.iter()
        .position(|&c| u < c)
        .unwrap_or_else(|| {
            // u fell into the rounding gap above the last cumulative value;
            // return the last index with positive mass.
            let mut i = cdf.len() - 1;
            while i > 0 && cdf[i] == cdf[i - 1] {
                i -= 1;
            }
            i
        })
}

fn cumulative(probs: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    probs
        .iter()
        .map(|p| {
            acc += p;
            acc
        })
        .collect()
}

/// Probability vector over a finite alphabet.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Pmf {
    probs: Vec<f64>,
}

impl TryFrom<Vec<f64>> for Pmf {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Pmf::new(v)
    }
}

impl From<Pmf> for Vec<f64> {
    fn from(p: Pmf) -> Self {
        p.probs
    }
}

impl Pmf {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() || probs.len() > MAX_ALPHABET * MAX_ALPHABET * MAX_ALPHABET {
            return Err(Error::InvalidPmf(format!("bad length {}", probs.len())));
        }
        check_stochastic(&probs, "pmf")?;
        Ok(Pmf { probs })
    }

    pub fn uniform(k: usize) -> Self {
        Pmf {
            probs: vec![1.0 / k as f64; k],
        }
    }

    pub fn point(k: usize, i: usize) -> Self {
        let mut probs = vec![0.0; k];
        probs[i] = 1.0;
        Pmf { probs }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn get(&self, i: usize) -> f64 {
        self.probs[i]
    }

    pub fn support(&self) -> Vec<usize> {
        (0..self.probs.len()).filter(|&i| self.probs[i] > 0.0).collect()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        draw(&cumulative(&self.probs), rng.gen())
    }

    /// Product law P×W over X×Y, indexed x·|Y| + y.
    pub fn joint_with(&self, w: &Dmc) -> Result<Pmf> {
        if self.len() != w.input_size() {
            return Err(Error::Dimension(format!(
                "pmf over {} symbols, channel input {}",
                self.len(),
                w.input_size()
            )));
        }
        let mut probs = Vec::with_capacity(w.input_size() * w.output_size());
        for x in 0..w.input_size() {
            for y in 0..w.output_size() {
                probs.push(self.probs[x] * w.prob(x, y));
            }
        }
        Ok(Pmf { probs })
    }

    /// Output law PW.
    pub fn through(&self, w: &Dmc) -> Result<Pmf> {
        if self.len() != w.input_size() {
            return Err(Error::Dimension("pmf/channel input size".into()));
        }
        let mut out = vec![0.0; w.output_size()];
        for (x, px) in self.probs.iter().enumerate() {
            for (y, o) in out.iter_mut().enumerate() {
                *o += px * w.prob(x, y);
            }
        }
        Ok(Pmf { probs: out })
    }

    /// Samples an i.i.d. sequence of length n.
    pub fn sample_sequence<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Sequence {
        let cdf = cumulative(&self.probs);
        (0..n).map(|_| draw(&cdf, rng.gen()) as u8).collect()
    }
}

/// Row-stochastic matrix W(y|x).
#[derive(Clone, Debug, PartialEq)]
pub struct Dmc {
    x: usize,
    y: usize,
    w: Vec<f64>,
    cdf: Vec<f64>,
}

impl Dmc {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let x = rows.len();
        let y = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != y) {
            return Err(Error::InvalidChannel("ragged rows".into()));
        }
        Self::from_flat(x, y, rows.into_iter().flatten().collect())
    }

    pub fn from_flat(x: usize, y: usize, w: Vec<f64>) -> Result<Self> {
        check_alphabet(x)?;
        check_alphabet(y)?;
        if w.len() != x * y {
            return Err(Error::InvalidChannel(format!(
                "expected {} entries, got {}",
                x * y,
                w.len()
            )));
        }
        for r in 0..x {
            check_stochastic(&w[r * y..(r + 1) * y], &format!("row {r}"))?;
        }
        let cdf = w.chunks(y).flat_map(cumulative).collect();
        Ok(Dmc { x, y, w, cdf })
    }

    pub fn noiseless(k: usize) -> Self {
        let rows = (0..k)
            .map(|i| (0..k).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        Dmc::new(rows).expect("identity is stochastic")
    }

    pub fn bsc(p: f64) -> Self {
        Dmc::new(vec![vec![1.0 - p, p], vec![p, 1.0 - p]]).expect("valid crossover")
    }

    /// Binary erasure channel; outputs are {0, erasure, 1}.
    pub fn bec(e: f64) -> Self {
        Dmc::new(vec![vec![1.0 - e, e, 0.0], vec![0.0, e, 1.0 - e]]).expect("valid erasure")
    }

    /// Z-channel: 0 is received cleanly, 1 flips to 0 with probability p.
    pub fn z_channel(p: f64) -> Self {
        Dmc::new(vec![vec![1.0, 0.0], vec![p, 1.0 - p]]).expect("valid z-channel")
    }

    pub fn input_size(&self) -> usize {
        self.x
    }

    pub fn output_size(&self) -> usize {
        self.y
    }

    #[inline]
    pub fn prob(&self, x: usize, y: usize) -> f64 {
        self.w[x * self.y + y]
    }

    pub fn row(&self, x: usize) -> &[f64] {
        &self.w[x * self.y..(x + 1) * self.y]
    }

    pub fn flat(&self) -> &[f64] {
        &self.w
    }

    /// Cascade: first `self`, then `next`.
    pub fn compose(&self, next: &Dmc) -> Result<Dmc> {
        if self.y != next.x {
            return Err(Error::Dimension("cascade alphabets differ".into()));
        }
        let mut w = vec![0.0; self.x * next.y];
        for x in 0..self.x {
            for m in 0..self.y {
                for z in 0..next.y {
                    w[x * next.y + z] += self.prob(x, m) * next.prob(m, z);
                }
            }
        }
        Dmc::from_flat(self.x, next.y, renormalize_rows(w, next.y))
    }

    /// Π_i W(y_i|x_i).
    pub fn nfold_prob(&self, x: &[u8], y: &[u8]) -> Result<f64> {
        if x.len() != y.len() {
            return Err(Error::LengthMismatch {
                left: x.len(),
                right: y.len(),
            });
        }
        check_sequence(x, self.x)?;
        check_sequence(y, self.y)?;
        Ok(self.nfold_prob_unchecked(x, y))
    }

    #[inline]
    pub fn nfold_prob_unchecked(&self, x: &[u8], y: &[u8]) -> f64 {
        x.iter()
            .zip(y)
            .map(|(&a, &b)| self.w[a as usize * self.y + b as usize])
            .product()
    }

    #[inline]
    pub fn sample_symbol<R: Rng + ?Sized>(&self, x: usize, rng: &mut R) -> u8 {
        draw(&self.cdf[x * self.y..(x + 1) * self.y], rng.gen()) as u8
    }

    pub fn sample_output<R: Rng + ?Sized>(&self, x: &[u8], rng: &mut R) -> Sequence {
        x.iter().map(|&a| self.sample_symbol(a as usize, rng)).collect()
    }

    pub fn sample_output_into<R: Rng + ?Sized>(&self, x: &[u8], rng: &mut R, out: &mut Sequence) {
        out.clear();
        out.extend(x.iter().map(|&a| self.sample_symbol(a as usize, rng)));
    }
}

/// Pulls accumulated float error in composed rows back inside tolerance.
fn renormalize_rows(mut w: Vec<f64>, y: usize) -> Vec<f64> {
    for row in w.chunks_mut(y) {
        let s: f64 = row.iter().sum();
        row.iter_mut().for_each(|v| *v /= s);
    }
    w
}

/// Two-receiver broadcast channel W(y,z|x), indexed x·|Y||Z| + y·|Z| + z.
#[derive(Clone, Debug, PartialEq)]
pub struct Bc2 {
    x: usize,
    y: usize,
    z: usize,
    w: Vec<f64>,
    cdf: Vec<f64>,
    wy: Dmc,
    wz: Dmc,
}

impl Bc2 {
    pub fn from_flat(x: usize, y: usize, z: usize, w: Vec<f64>) -> Result<Self> {
        check_alphabet(x)?;
        check_alphabet(y)?;
        check_alphabet(z)?;
        let slice = y * z;
        if w.len() != x * slice {
            return Err(Error::InvalidChannel(format!(
                "expected {} entries, got {}",
                x * slice,
                w.len()
            )));
        }
        for r in 0..x {
            check_stochastic(&w[r * slice..(r + 1) * slice], &format!("slice {r}"))?;
        }
        let mut my = vec![0.0; x * y];
        let mut mz = vec![0.0; x * z];
        for a in 0..x {
            for b in 0..y {
                for c in 0..z {
                    let p = w[a * slice + b * z + c];
                    my[a * y + b] += p;
                    mz[a * z + c] += p;
                }
            }
        }
        let cdf = w.chunks(slice).flat_map(cumulative).collect();
        Ok(Bc2 {
            x,
            y,
            z,
            cdf,
            wy: Dmc::from_flat(x, y, my)?,
            wz: Dmc::from_flat(x, z, mz)?,
            w,
        })
    }

    /// Conditionally independent outputs: W(y,z|x) = W_Y(y|x)·W_Z(z|x).
    pub fn product(wy: &Dmc, wz: &Dmc) -> Result<Self> {
        if wy.input_size() != wz.input_size() {
            return Err(Error::Dimension("marginals have different inputs".into()));
        }
        let (x, y, z) = (wy.input_size(), wy.output_size(), wz.output_size());
        let mut w = Vec::with_capacity(x * y * z);
        for a in 0..x {
            for b in 0..y {
                for c in 0..z {
                    w.push(wy.prob(a, b) * wz.prob(a, c));
                }
            }
        }
        Bc2::from_flat(x, y, z, w)
    }

    /// Both receivers see the same output.
    pub fn identical(w: &Dmc) -> Result<Self> {
        let (x, y) = (w.input_size(), w.output_size());
        let mut t = vec![0.0; x * y * y];
        for a in 0..x {
            for b in 0..y {
                t[a * y * y + b * y + b] = w.prob(a, b);
            }
        }
        Bc2::from_flat(x, y, y, t)
    }

    pub fn input_size(&self) -> usize {
        self.x
    }

    pub fn output_sizes(&self) -> (usize, usize) {
        (self.y, self.z)
    }

    #[inline]
    pub fn prob(&self, x: usize, y: usize, z: usize) -> f64 {
        self.w[x * self.y * self.z + y * self.z + z]
    }

    pub fn flat(&self) -> &[f64] {
        &self.w
    }

    pub fn marginal_y(&self) -> &Dmc {
        &self.wy
    }

    pub fn marginal_z(&self) -> &Dmc {
        &self.wz
    }

    /// W̃_Z(z|x,y) = W(y,z|x)/W_Y(y|x); rows with W_Y(y|x) = 0 are `None`.
    pub fn conditional_z_given_xy(&self) -> ConditionalLaw {
        let mut rows = Vec::with_capacity(self.x * self.y);
        for a in 0..self.x {
            for b in 0..self.y {
                let wy = self.wy.prob(a, b);
                if wy > 0.0 {
                    rows.push(Some(
                        (0..self.z).map(|c| self.prob(a, b, c) / wy).collect(),
                    ));
                } else {
                    rows.push(None);
                }
            }
        }
        ConditionalLaw {
            x: self.x,
            y: self.y,
            z: self.z,
            rows,
        }
    }

    /// Draws one (y, z) output pair for input symbol x.
    pub fn sample_pair<R: Rng + ?Sized>(&self, x: usize, rng: &mut R) -> (u8, u8) {
        let slice = self.y * self.z;
        let k = draw(&self.cdf[x * slice..(x + 1) * slice], rng.gen());
        ((k / self.z) as u8, (k % self.z) as u8)
    }

    pub fn sample_outputs<R: Rng + ?Sized>(&self, x: &[u8], rng: &mut R) -> (Sequence, Sequence) {
        x.iter().map(|&a| self.sample_pair(a as usize, rng)).unzip()
    }
}

/// Conditional law of Z given (X, Y), with undefined rows flagged.
#[derive(Clone, Debug, PartialEq)]
pub struct ConditionalLaw {
    pub x: usize,
    pub y: usize,
    pub z: usize,
    rows: Vec<Option<Vec<f64>>>,
}

impl ConditionalLaw {
    pub fn row(&self, x: usize, y: usize) -> Option<&[f64]> {
        self.rows[x * self.y + y].as_deref()
    }

    pub fn is_defined(&self, x: usize, y: usize) -> bool {
        self.rows[x * self.y + y].is_some()
    }
}

/// Three-receiver broadcast channel W(y1,y2,y3|x).
#[derive(Clone, Debug, PartialEq)]
pub struct Bc3 {
    x: usize,
    sizes: [usize; 3],
    w: Vec<f64>,
    marginals: [Dmc; 3],
}

impl Bc3 {
    pub fn from_flat(x: usize, sizes: [usize; 3], w: Vec<f64>) -> Result<Self> {
        check_alphabet(x)?;
        sizes.iter().try_for_each(|&s| check_alphabet(s))?;
        let slice = sizes[0] * sizes[1] * sizes[2];
        if w.len() != x * slice {
            return Err(Error::InvalidChannel(format!(
                "expected {} entries, got {}",
                x * slice,
                w.len()
            )));
        }
        for r in 0..x {
            check_stochastic(&w[r * slice..(r + 1) * slice], &format!("slice {r}"))?;
        }
        let mut m: [Vec<f64>; 3] = [
            vec![0.0; x * sizes[0]],
            vec![0.0; x * sizes[1]],
            vec![0.0; x * sizes[2]],
        ];
        for a in 0..x {
            for i in 0..sizes[0] {
                for j in 0..sizes[1] {
                    for k in 0..sizes[2] {
                        let p = w[a * slice + (i * sizes[1] + j) * sizes[2] + k];
                        m[0][a * sizes[0] + i] += p;
                        m[1][a * sizes[1] + j] += p;
                        m[2][a * sizes[2] + k] += p;
                    }
                }
            }
        }
        let [m0, m1, m2] = m;
        Ok(Bc3 {
            x,
            sizes,
            w,
            marginals: [
                Dmc::from_flat(x, sizes[0], m0)?,
                Dmc::from_flat(x, sizes[1], m1)?,
                Dmc::from_flat(x, sizes[2], m2)?,
            ],
        })
    }

    pub fn product(w1: &Dmc, w2: &Dmc, w3: &Dmc) -> Result<Self> {
        let x = w1.input_size();
        if w2.input_size() != x || w3.input_size() != x {
            return Err(Error::Dimension("marginals have different inputs".into()));
        }
        let sizes = [w1.output_size(), w2.output_size(), w3.output_size()];
        let mut w = Vec::with_capacity(x * sizes.iter().product::<usize>());
        for a in 0..x {
            for i in 0..sizes[0] {
                for j in 0..sizes[1] {
                    for k in 0..sizes[2] {
                        w.push(w1.prob(a, i) * w2.prob(a, j) * w3.prob(a, k));
                    }
                }
            }
        }
        Bc3::from_flat(x, sizes, w)
    }

    pub fn input_size(&self) -> usize {
        self.x
    }

    pub fn output_sizes(&self) -> [usize; 3] {
        self.sizes
    }

    pub fn flat(&self) -> &[f64] {
        &self.w
    }

    pub fn marginal(&self, k: usize) -> &Dmc {
        &self.marginals[k]
    }

    pub fn marginals(&self) -> &[Dmc; 3] {
        &self.marginals
    }
}

/// Any channel a document can describe.
#[derive(Clone, Debug, PartialEq)]
pub enum Channel {
    Dmc(Dmc),
    Bc2(Bc2),
    Bc3(Bc3),
}

/// On-disk channel description: alphabet sizes plus a row-major probability
/// array. One output size gives a DMC, two a BC, three a three-receiver BC.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelDoc {
    pub input_size: usize,
    pub output_sizes: Vec<usize>,
    pub probs: Vec<f64>,
}

impl Channel {
    pub fn from_doc(doc: &ChannelDoc) -> Result<Self> {
        let p = doc.probs.clone();
        match doc.output_sizes.as_slice() {
            [y] => Ok(Channel::Dmc(Dmc::from_flat(doc.input_size, *y, p)?)),
            [y, z] => Ok(Channel::Bc2(Bc2::from_flat(doc.input_size, *y, *z, p)?)),
            [a, b, c] => Ok(Channel::Bc3(Bc3::from_flat(doc.input_size, [*a, *b, *c], p)?)),
            _ => Err(Error::InvalidChannel(format!(
                "{} output alphabets; expected 1, 2 or 3",
                doc.output_sizes.len()
            ))),
        }
    }

    pub fn to_doc(&self) -> ChannelDoc {
        match self {
            Channel::Dmc(w) => ChannelDoc {
                input_size: w.input_size(),
                output_sizes: vec![w.output_size()],
                probs: w.flat().to_vec(),
            },
            Channel::Bc2(b) => ChannelDoc {
                input_size: b.input_size(),
                output_sizes: vec![b.y, b.z],
                probs: b.flat().to_vec(),
            },
            Channel::Bc3(b) => ChannelDoc {
                input_size: b.input_size(),
                output_sizes: b.sizes.to_vec(),
                probs: b.flat().to_vec(),
            },
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let doc: ChannelDoc = serde_json::from_str(text)?;
        Channel::from_doc(&doc)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Channel::parse(&std::fs::read_to_string(path)?)
    }

    pub fn input_size(&self) -> usize {
        match self {
            Channel::Dmc(w) => w.input_size(),
            Channel::Bc2(b) => b.input_size(),
            Channel::Bc3(b) => b.input_size(),
        }
    }
}
