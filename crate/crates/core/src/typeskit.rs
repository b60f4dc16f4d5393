//! Method of types: empirical types, multiplicative typicality, type-class
//! sizes, the equitype decomposition of a DMC on a type class and random
//! L-type approximation.

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{Dmc, Pmf, Sequence};
use crate::error::{Error, Result};

/// Per-symbol counts of a length-n sequence.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TypeVector {
    pub counts: Vec<u32>,
    pub n: u32,
}

impl TypeVector {
    pub fn new(counts: Vec<u32>) -> Self {
        let n = counts.iter().sum();
        TypeVector { counts, n }
    }

    pub fn alphabet_size(&self) -> usize {
        self.counts.len()
    }

    pub fn to_pmf(&self) -> Pmf {
        Pmf::new(
            self.counts
                .iter()
                .map(|&c| c as f64 / self.n as f64)
                .collect(),
        )
        .expect("counts sum to n")
    }

    /// The lexicographically smallest sequence of this type.
    pub fn representative(&self) -> Sequence {
        self.counts
            .iter()
            .enumerate()
            .flat_map(|(a, &c)| std::iter::repeat_n(a as u8, c as usize))
            .collect()
    }
}

pub fn empirical_type(x: &[u8], alphabet_size: usize) -> TypeVector {
    let mut counts = vec![0u32; alphabet_size];
    for &s in x {
        counts[s as usize] += 1;
    }
    TypeVector {
        counts,
        n: x.len() as u32,
    }
}

/// |N/n − p| ≤ εp, and zero-probability cells must be empty.
#[inline]
fn cell_ok(count: u32, n: usize, p: f64, eps: f64) -> bool {
    if p <= 0.0 {
        return count == 0;
    }
    (count as f64 / n as f64 - p).abs() <= eps * p
}

pub fn is_typical(x: &[u8], p: &Pmf, eps: f64) -> bool {
    if x.iter().any(|&s| s as usize >= p.len()) {
        return false;
    }
    let t = empirical_type(x, p.len());
    t.counts
        .iter()
        .zip(p.probs())
        .all(|(&c, &pa)| cell_ok(c, x.len(), pa, eps))
}

/// Typicality of the pair sequence over X×Y; `joint` is indexed x·|Y| + y.
pub fn is_jointly_typical(x: &[u8], y: &[u8], joint: &Pmf, y_size: usize, eps: f64) -> Result<bool> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    let pair: Vec<usize> = x
        .iter()
        .zip(y)
        .map(|(&a, &b)| a as usize * y_size + b as usize)
        .collect();
    if pair.iter().any(|&c| c >= joint.len()) || y.iter().any(|&b| b as usize >= y_size) {
        return Ok(false);
    }
    let mut counts = vec![0u32; joint.len()];
    pair.iter().for_each(|&c| counts[c] += 1);
    Ok(counts
        .iter()
        .zip(joint.probs())
        .all(|(&c, &p)| cell_ok(c, x.len(), p, eps)))
}

/// Fast joint-typicality tester for a fixed blocklength: each cell's allowed
/// counts are tabulated once from the same inequality `is_jointly_typical` uses.
#[derive(Clone, Debug)]
pub struct TypicalityTester {
    n: usize,
    y_size: usize,
    cells: usize,
    /// allowed[c * (n + 1) + k]: may cell c hold k pairs.
    allowed: Vec<bool>,
    /// Largest allowed count per cell, for early exit.
    max_count: Vec<u32>,
}

impl TypicalityTester {
    pub fn new(joint: &Pmf, y_size: usize, n: usize, eps: f64) -> Self {
        let cells = joint.len();
        let mut allowed = vec![false; cells * (n + 1)];
        let mut max_count = vec![0u32; cells];
        for c in 0..cells {
            for k in 0..=n {
                let ok = cell_ok(k as u32, n, joint.get(c), eps);
                allowed[c * (n + 1) + k] = ok;
                if ok {
                    max_count[c] = k as u32;
                }
            }
        }
        TypicalityTester {
            n,
            y_size,
            cells,
            allowed,
            max_count,
        }
    }

    pub fn blocklength(&self) -> usize {
        self.n
    }

    /// Whether (x, y) is jointly typical; both must have length n.
    pub fn check(&self, x: &[u8], y: &[u8]) -> bool {
        debug_assert_eq!(x.len(), self.n);
        let mut counts = [0u32; 64];
        let mut heap;
        let counts: &mut [u32] = if self.cells <= 64 {
            &mut counts[..self.cells]
        } else {
            heap = vec![0u32; self.cells];
            &mut heap
        };
        for (&a, &b) in x.iter().zip(y) {
            let c = a as usize * self.y_size + b as usize;
            counts[c] += 1;
            if counts[c] > self.max_count[c] {
                return false;
            }
        }
        counts
            .iter()
            .enumerate()
            .all(|(c, &k)| self.allowed[c * (self.n + 1) + k as usize])
    }
}

/// n! / Π counts!.
pub fn type_class_size(t: &TypeVector) -> BigUint {
    let mut num = BigUint::one();
    for i in 2..=t.n {
        num *= i;
    }
    let mut den = BigUint::one();
    for &c in &t.counts {
        for i in 2..=c {
            den *= i;
        }
    }
    num / den
}

pub fn ln_factorial(n: u32) -> f64 {
    (2..=n).map(|i| (i as f64).ln()).sum()
}

/// ln |T_t|, for blocklengths where the exact integer is unwieldy.
pub fn log_type_class_size(t: &TypeVector) -> f64 {
    ln_factorial(t.n) - t.counts.iter().map(|&c| ln_factorial(c)).sum::<f64>()
}

/// All types of length-n sequences over k symbols.
pub fn enumerate_types(n: u32, k: usize) -> Vec<TypeVector> {
    fn rec(left: u32, k: usize, cur: &mut Vec<u32>, out: &mut Vec<TypeVector>) {
        if cur.len() + 1 == k {
            cur.push(left);
            out.push(TypeVector::new(cur.clone()));
            cur.pop();
            return;
        }
        for c in 0..=left {
            cur.push(c);
            rec(left - c, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if k > 0 {
        rec(n, k, &mut Vec::with_capacity(k), &mut out);
    }
    out
}

/// All sequences of a type class, in lexicographic order.
pub fn type_class_members(t: &TypeVector) -> Vec<Sequence> {
    fn rec(left: &mut [u32], cur: &mut Sequence, n: usize, out: &mut Vec<Sequence>) {
        if cur.len() == n {
            out.push(cur.clone());
            return;
        }
        for a in 0..left.len() {
            if left[a] > 0 {
                left[a] -= 1;
                cur.push(a as u8);
                rec(left, cur, n, out);
                cur.pop();
                left[a] += 1;
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut t.counts.clone(), &mut Vec::new(), t.n as usize, &mut out);
    out
}

/// One equitype component: a joint type of (x, y) with x's type fixed.
#[derive(Clone, Debug, PartialEq)]
pub struct EquitypeTerm {
    /// counts[x][y] = number of positions with input x and output y.
    pub counts: Vec<Vec<u32>>,
    /// c_V = Wⁿ(T_V(x) | x).
    pub weight: f64,
    /// |T_V(x)|: number of outputs of conditional type V given x.
    pub class_size: BigUint,
}

impl EquitypeTerm {
    /// Wⁿ(y|x) for any y in the component; the equitype channel is uniform.
    pub fn per_sequence_prob(&self) -> f64 {
        self.weight / self.class_size.to_f64().unwrap_or(f64::INFINITY)
    }
}

fn compositions(total: u32, parts: usize) -> Vec<Vec<u32>> {
    enumerate_types(total, parts)
        .into_iter()
        .map(|t| t.counts)
        .collect()
}

/// Splits Wⁿ(·|x) for x of type `t` into a mixture of uniform channels, one
/// per conditional type. Fails if more than `budget` components would arise.
pub fn equitype_decompose(w: &Dmc, t: &TypeVector, budget: usize) -> Result<Vec<EquitypeTerm>> {
    if t.alphabet_size() != w.input_size() {
        return Err(Error::Dimension("type alphabet differs from channel input".into()));
    }
    let ny = w.output_size();
    let per_symbol: Vec<Vec<Vec<u32>>> = t
        .counts
        .iter()
        .map(|&c| compositions(c, ny))
        .collect();
    let total = per_symbol
        .iter()
        .try_fold(1usize, |acc, v| acc.checked_mul(v.len()))
        .filter(|&n| n <= budget)
        .ok_or_else(|| Error::Budget(format!("more than {budget} conditional types")))?;
    let mut out = Vec::with_capacity(total);
    let mut idx = vec![0usize; per_symbol.len()];
    loop {
        let counts: Vec<Vec<u32>> = idx
            .iter()
            .zip(&per_symbol)
            .map(|(&i, v)| v[i].clone())
            .collect();
        let mut size = BigUint::one();
        let mut prob = 1.0;
        for (x, row) in counts.iter().enumerate() {
            size *= type_class_size(&TypeVector::new(row.clone()));
            for (y, &k) in row.iter().enumerate() {
                prob *= w.prob(x, y).powi(k as i32);
            }
        }
        let weight = prob * size.to_f64().unwrap_or(f64::INFINITY);
        if weight > 0.0 {
            out.push(EquitypeTerm {
                counts,
                weight,
                class_size: size,
            });
        }
        // Odometer over the per-symbol compositions.
        let mut j = 0;
        loop {
            if j == idx.len() {
                return Ok(out);
            }
            idx[j] += 1;
            if idx[j] < per_symbol[j].len() {
                break;
            }
            idx[j] = 0;
            j += 1;
        }
    }
}

/// Joint counts of (x, y) in the layout used by [`EquitypeTerm::counts`].
pub fn conditional_counts(x: &[u8], y: &[u8], nx: usize, ny: usize) -> Vec<Vec<u32>> {
    let mut c = vec![vec![0u32; ny]; nx];
    for (&a, &b) in x.iter().zip(y) {
        c[a as usize][b as usize] += 1;
    }
    c
}

/// Empirical distribution of L i.i.d. draws from a law on a type class.
#[derive(Clone, Debug, PartialEq)]
pub struct LType {
    pub l: u64,
    /// multiplicity[i]·/L is the weight of support[i] of the source law.
    pub multiplicity: Vec<u64>,
}

impl LType {
    pub fn weights(&self) -> Vec<f64> {
        self.multiplicity
            .iter()
            .map(|&m| m as f64 / self.l as f64)
            .collect()
    }
}

/// Draws an L-type from `q`, given as weights over `members` of one type class.
pub fn l_type_approximate<R: Rng + ?Sized>(
    members: &[Sequence],
    q: &[f64],
    l: u64,
    alphabet_size: usize,
    rng: &mut R,
) -> Result<LType> {
    if l == 0 {
        return Err(Error::Param("L must be at least 1".into()));
    }
    if members.len() != q.len() || members.is_empty() {
        return Err(Error::Dimension("law and member list differ".into()));
    }
    Pmf::new(q.to_vec())?;
    let t0 = empirical_type(&members[0], alphabet_size);
    for (m, &w) in members.iter().zip(q) {
        if w > 0.0 && empirical_type(m, alphabet_size) != t0 {
            return Err(Error::Param("law is not supported on one type class".into()));
        }
    }
    let mut cdf = Vec::with_capacity(q.len());
    let mut acc = 0.0;
    for &w in q {
        acc += w;
        cdf.push(acc);
    }
    let last = q.iter().rposition(|&w| w > 0.0).unwrap();
    let mut multiplicity = vec![0u64; q.len()];
    for _ in 0..l {
        let u: f64 = rng.gen();
        let i = cdf.iter().position(|&c| u < c).unwrap_or(last);
        multiplicity[i] += 1;
    }
    Ok(LType { l, multiplicity })
}

/// g(u) = −√(2u)·ln √(2u).
pub fn g_fn(u: f64) -> f64 {
    let s = (2.0 * u).sqrt();
    if s == 0.0 {
        0.0
    } else {
        -s * s.ln()
    }
}

/// ρ(u) = 6u + 2g(3u) + √(3u)·ln|Y|.
pub fn rho(u: f64, y_size: usize) -> f64 {
    6.0 * u + 2.0 * g_fn(3.0 * u) + (3.0 * u).sqrt() * (y_size as f64).ln()
}

/// Whether δ lies in the L-type lemma's feasibility range 3δ < 1/64.
pub fn delta_feasible(delta: f64) -> bool {
    delta > 0.0 && 3.0 * delta < 1.0 / 64.0
}

/// Two-sided bound of the L-type lemma for a decision set D:
/// returns (lower, upper) limits on (Q′Wⁿ)(D) given p = (QWⁿ)(D).
pub fn l_type_bounds(p: f64, n: usize, delta: f64, eps: f64) -> (f64, f64) {
    let t = (-(n as f64) * delta).exp();
    let upper = (1.0 + eps) / (1.0 - t) * p + t;
    let lower = (1.0 - eps) * (1.0 - t) * p - t;
    (lower, upper)
}

/// Checks 2δ(ε) < I − R̃ with δ(ε) = ε·H(P×W).
pub fn check_eps(eps: f64, joint_entropy: f64, mutual_info: f64, bin_rate: f64) -> Result<()> {
    let lhs = 2.0 * eps * joint_entropy;
    if eps > 0.0 && lhs < mutual_info - bin_rate {
        Ok(())
    } else {
        Err(Error::Param(format!(
            "eps {eps}: 2·eps·H(P×W) = {lhs} is not below I − R̃ = {}",
            mutual_info - bin_rate
        )))
    }
}

/// Chernoff lower bound on Pⁿ(T_ε): 1 − 2|X|·exp(−n ε² p_min / 3).
pub fn typical_set_lower_bound(p: &Pmf, n: usize, eps: f64) -> f64 {
    let pmin = p
        .probs()
        .iter()
        .cloned()
        .filter(|&v| v > 0.0)
        .fold(f64::INFINITY, f64::min);
    1.0 - 2.0 * p.len() as f64 * (-(n as f64) * eps * eps * pmin / 3.0).exp()
}

/// Outcome of testing the L-type bounds on random decision sets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LTypeCheck {
    pub l: u64,
    pub sets: usize,
    pub failures: usize,
    /// Largest amount by which (Q′Wⁿ)(D) left its interval (0 if none).
    pub max_excess: f64,
}

/// Draws a random law Q on the class of `t`, its L-type Q′ and `sets` random
/// decision sets D ⊆ Yⁿ (each output included with probability 1/2), and
/// counts the sets on which (Q′Wⁿ)(D) falls outside [`l_type_bounds`].
pub fn l_type_bound_check(
    w: &Dmc,
    t: &TypeVector,
    l: u64,
    delta: f64,
    eps: f64,
    sets: usize,
    seed: u64,
) -> Result<LTypeCheck> {
    if t.alphabet_size() != w.input_size() {
        return Err(Error::Dimension("type and channel input differ".into()));
    }
    let n = t.counts.iter().sum::<u32>() as usize;
    let ny = w.output_size();
    let states = crate::eval::output_states(ny, n)
        .filter(|&s| s <= 1 << 20)
        .ok_or_else(|| Error::Budget(format!("{ny}^{n} output sequences")))?;
    let members = type_class_members(t);
    let mut rng = crate::seed::stream(seed, "ltype", &[]);
    let raw: Vec<f64> = (0..members.len()).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
    let total: f64 = raw.iter().sum();
    let q: Vec<f64> = raw.iter().map(|v| v / total).collect();
    let lt = l_type_approximate(&members, &q, l, w.input_size(), &mut rng)?;
    let q2 = lt.weights();
    // Output laws of Q and Q′ over the enumerated Yⁿ.
    let mut out_q = vec![0.0; states as usize];
    let mut out_q2 = vec![0.0; states as usize];
    let mut y = vec![0u8; n];
    for (idx, (a, b)) in out_q.iter_mut().zip(out_q2.iter_mut()).enumerate() {
        crate::eval::decode_index(idx as u64, ny as u64, &mut y);
        for (i, x) in members.iter().enumerate() {
            if q[i] > 0.0 || q2[i] > 0.0 {
                let p = w.nfold_prob_unchecked(x, &y);
                *a += q[i] * p;
                *b += q2[i] * p;
            }
        }
    }
    let mut failures = 0;
    let mut max_excess: f64 = 0.0;
    for _ in 0..sets {
        let (mut p, mut p2) = (0.0, 0.0);
        for (a, b) in out_q.iter().zip(&out_q2) {
            if rng.gen::<bool>() {
                p += a;
                p2 += b;
            }
        }
        let (lo, hi) = l_type_bounds(p, n, delta, eps);
        let excess = (lo - p2).max(p2 - hi);
        if excess > 0.0 {
            failures += 1;
            max_excess = max_excess.max(excess);
        }
    }
    Ok(LTypeCheck {
        l,
        sets,
        failures,
        max_excess,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn type_examples() {
        assert_eq!(empirical_type(&[0, 1, 1, 0], 2).counts, vec![2, 2]);
        assert_eq!(empirical_type(&[2, 2, 2], 3).counts, vec![0, 0, 3]);
        assert_eq!(empirical_type(&[0, 1, 2, 0, 1, 2], 3).counts, vec![2, 2, 2]);
        assert_eq!(type_class_size(&TypeVector::new(vec![2, 2])), BigUint::from(6u32));
        assert_eq!(type_class_size(&TypeVector::new(vec![0, 5])), BigUint::one());
        assert_eq!(type_class_size(&TypeVector::new(vec![3, 2, 1])), BigUint::from(60u32));
        let t = TypeVector::new(vec![3, 2, 1]);
        assert!((log_type_class_size(&t) - 60f64.ln()).abs() < 1e-12);
        assert_eq!(type_class_members(&t).len(), 60);
    }

    #[test]
    fn typicality_examples() {
        let p = Pmf::uniform(2);
        let x5 = [0, 0, 0, 0, 0, 1, 1, 1, 1, 1];
        let x4 = [0, 0, 0, 0, 1, 1, 1, 1, 1, 1];
        assert!(is_typical(&x5, &p, 0.1));
        assert!(!is_typical(&x4, &p, 0.1));
        let p3 = Pmf::new(vec![0.5, 0.5, 0.0]).unwrap();
        assert!(!is_typical(&[0, 1, 2, 0], &p3, 100.0));
    }

    #[test]
    fn joint_typicality_examples() {
        let id = Dmc::noiseless(2);
        let joint = Pmf::uniform(2).joint_with(&id).unwrap();
        let x = [0, 1, 0, 1];
        assert!(is_jointly_typical(&x, &x, &joint, 2, 0.0).unwrap());
        let bsc = Pmf::uniform(2).joint_with(&Dmc::bsc(0.1)).unwrap();
        let x: Vec<u8> = (0..20).map(|i| (i % 2) as u8).collect();
        let mut y = x.clone();
        for i in 0..6 {
            y[i] ^= 1;
        }
        assert!(!is_jointly_typical(&x, &y, &bsc, 2, 0.2).unwrap());
        assert!(is_jointly_typical(&x, &y[..3], &bsc, 2, 0.2).is_err());
    }

    #[test]
    fn tester_agrees_with_definition_exhaustively() {
        let w = Dmc::new(vec![vec![0.7, 0.2, 0.1], vec![0.0, 0.4, 0.6]]).unwrap();
        let joint = Pmf::new(vec![0.5, 0.5]).unwrap().joint_with(&w).unwrap();
        let n = 6;
        for eps in [0.0, 0.3, 1.0, 2.5] {
            let t = TypicalityTester::new(&joint, 3, n, eps);
            for xi in 0..(1u32 << n) {
                let x: Vec<u8> = (0..n).map(|i| ((xi >> i) & 1) as u8).collect();
                for yi in 0..3usize.pow(n as u32) {
                    let y: Vec<u8> = (0..n).map(|i| ((yi / 3usize.pow(i as u32)) % 3) as u8).collect();
                    assert_eq!(t.check(&x, &y), is_jointly_typical(&x, &y, &joint, 3, eps).unwrap());
                }
            }
        }
    }

    #[test]
    fn noiseless_decomposition_is_a_single_identity_term() {
        let t = TypeVector::new(vec![3, 2]);
        let terms = equitype_decompose(&Dmc::noiseless(2), &t, 1000).unwrap();
        assert_eq!(terms.len(), 1);
        assert_eq!(terms[0].counts, vec![vec![3, 0], vec![0, 2]]);
        assert_eq!(terms[0].weight, 1.0);
    }

    #[test]
    fn decomposition_budget() {
        let t = TypeVector::new(vec![5, 5]);
        assert!(matches!(equitype_decompose(&Dmc::bsc(0.1), &t, 10), Err(Error::Budget(_))));
    }

    #[test]
    fn rho_and_bounds() {
        assert_eq!(g_fn(0.0), 0.0);
        assert!(delta_feasible(0.005) && !delta_feasible(0.006));
        let (lo, hi) = l_type_bounds(0.5, 8, 0.005, 0.1);
        assert!(lo < 0.5 && hi > 0.5);
        assert!(rho(0.001, 2) > 0.0);
    }

    #[test]
    fn check_eps_boundary() {
        assert!(check_eps(0.1, 1.0, 0.5, 0.2).is_ok());
        assert!(check_eps(0.15, 1.0, 0.5, 0.2).is_err());
    }
}
