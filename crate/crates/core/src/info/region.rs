use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::simplex::{maximize_min_slack, OptimizerOptions, SlackFn};
use super::{entropy_of, is_capacity_positive, output_law, row_divergence};
use crate::channel::{Bc2, Channel, Dmc, Pmf};
use crate::error::{Error, Result};
use crate::seed;

/// Membership tolerance in nats.
pub const MEMBERSHIP_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RegionKind {
    DmcCapacity,
    BcAvg,
    Bc3Inner,
    Bc3Outer,
    BcCommonMessage,
    FbTwoSided,
    FbOneSidedInner,
    FbOneSidedOuter,
    CommonRandomness,
}

impl RegionKind {
    pub const ALL: [RegionKind; 9] = [
        RegionKind::DmcCapacity,
        RegionKind::BcAvg,
        RegionKind::Bc3Inner,
        RegionKind::Bc3Outer,
        RegionKind::BcCommonMessage,
        RegionKind::FbTwoSided,
        RegionKind::FbOneSidedInner,
        RegionKind::FbOneSidedOuter,
        RegionKind::CommonRandomness,
    ];

    pub fn name(self) -> &'static str {
        match self {
            RegionKind::DmcCapacity => "dmc-capacity",
            RegionKind::BcAvg => "bc-avg",
            RegionKind::Bc3Inner => "bc3-inner",
            RegionKind::Bc3Outer => "bc3-outer",
            RegionKind::BcCommonMessage => "bc-common-message",
            RegionKind::FbTwoSided => "fb-two-sided",
            RegionKind::FbOneSidedInner => "fb-one-sided-inner",
            RegionKind::FbOneSidedOuter => "fb-one-sided-outer",
            RegionKind::CommonRandomness => "common-randomness",
        }
    }

    /// Number of rates in a query of this kind.
    pub fn arity(self) -> usize {
        match self {
            RegionKind::DmcCapacity => 1,
            RegionKind::Bc3Inner | RegionKind::Bc3Outer | RegionKind::BcCommonMessage => 3,
            _ => 2,
        }
    }
}

impl fmt::Display for RegionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RegionKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        RegionKind::ALL
            .iter()
            .copied()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::RegionKind(s.to_string()))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegionQuery {
    pub kind: RegionKind,
    pub rates: Vec<f64>,
    /// Auxiliary alphabet size; required for the common-randomness kind.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u_size: Option<usize>,
}

impl RegionQuery {
    pub fn new(kind: RegionKind, rates: &[f64]) -> Self {
        RegionQuery {
            kind,
            rates: rates.to_vec(),
            u_size: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Inside,
    Boundary,
    Outside,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegionAnswer {
    pub inside: bool,
    pub verdict: Verdict,
    /// Max over inputs of the minimum constraint slack.
    pub slack: f64,
    /// Input distribution attaining `slack`.
    pub witness: Vec<f64>,
    /// Per-constraint slacks at the witness.
    pub constraint_slacks: Vec<f64>,
    /// Joint law of (U, X), row-major in U, for the common-randomness kind.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness_joint: Option<Vec<Vec<f64>>>,
    /// Which of the two alternative constraint sets the witness satisfies.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub form: Option<usize>,
}

fn verdict(slack: f64) -> Verdict {
    if slack > MEMBERSHIP_TOL {
        Verdict::Inside
    } else if slack >= -MEMBERSHIP_TOL {
        Verdict::Boundary
    } else {
        Verdict::Outside
    }
}

#[derive(Clone, Debug)]
enum Term {
    Zero,
    Mi(usize),
    OutEntropy(usize),
    /// I(P×W_Y, W̃_Z) written as H(PW_Z) − Σ_x P(x) κ_x.
    CondMi,
    Sum(Vec<Term>),
    Scaled(f64, Box<Term>),
}

struct Concave<'a> {
    chans: Vec<&'a Dmc>,
    /// κ_x = H(Y,Z | X=x) − H(Y | X=x), used by `CondMi`; channel 1 is W_Z.
    kappa: Vec<f64>,
    constraints: Vec<(Term, f64)>,
}

impl Concave<'_> {
    fn term(&self, t: &Term, p: &[f64]) -> (f64, Vec<f64>) {
        let k = p.len();
        match t {
            Term::Zero => (0.0, vec![0.0; k]),
            Term::Mi(c) => {
                let w = self.chans[*c];
                let q = output_law(p, w);
                let d: Vec<f64> = (0..k).map(|x| row_divergence(w.row(x), &q)).collect();
                let v = p.iter().zip(&d).map(|(a, b)| a * b).sum::<f64>().max(0.0);
                (v, d)
            }
            Term::OutEntropy(c) => {
                let w = self.chans[*c];
                let q = output_law(p, w);
                (entropy_of(&q), neg_log_grad(w, &q))
            }
            Term::CondMi => {
                let wz = self.chans[1];
                let q = output_law(p, wz);
                let mut g = neg_log_grad(wz, &q);
                let mut v = entropy_of(&q);
                for x in 0..k {
                    v -= p[x] * self.kappa[x];
                    g[x] -= self.kappa[x];
                }
                (v.max(0.0), g)
            }
            Term::Sum(ts) => {
                let mut v = 0.0;
                let mut g = vec![0.0; k];
                for t in ts {
                    let (a, b) = self.term(t, p);
                    v += a;
                    g.iter_mut().zip(&b).for_each(|(x, y)| *x += y);
                }
                (v, g)
            }
            Term::Scaled(s, t) => {
                let (a, b) = self.term(t, p);
                (s * a, b.into_iter().map(|v| s * v).collect())
            }
        }
    }
}

fn neg_log_grad(w: &Dmc, q: &[f64]) -> Vec<f64> {
    (0..w.input_size())
        .map(|x| {
            -w.row(x)
                .iter()
                .zip(q)
                .filter(|(a, _)| **a > 0.0)
                .map(|(a, qy)| a * qy.max(1e-300).ln())
                .sum::<f64>()
        })
        .collect()
}

impl SlackFn for Concave<'_> {
    fn dim(&self) -> usize {
        self.chans[0].input_size()
    }
    fn slacks(&self, p: &[f64]) -> Vec<f64> {
        self.constraints
            .iter()
            .map(|(t, r)| self.term(t, p).0 - r)
            .collect()
    }
    fn slacks_grad(&self, p: &[f64]) -> (Vec<f64>, Vec<Vec<f64>>) {
        self.constraints
            .iter()
            .map(|(t, r)| {
                let (v, g) = self.term(t, p);
                (v - r, g)
            })
            .unzip()
    }
}

fn kappa(bc: &Bc2) -> Vec<f64> {
    let (ny, nz) = bc.output_sizes();
    (0..bc.input_size())
        .map(|x| {
            let joint: Vec<f64> = (0..ny)
                .flat_map(|y| (0..nz).map(move |z| (y, z)))
                .map(|(y, z)| bc.prob(x, y, z))
                .collect();
            entropy_of(&joint) - entropy_of(bc.marginal_y().row(x))
        })
        .collect()
}

fn indicator(on: bool, t: Term) -> Term {
    if on {
        t
    } else {
        Term::Zero
    }
}

/// Builds the concave right-hand sides (c_Y, c_Z) for the two-receiver kinds.
fn pair_terms(kind: RegionKind, bc: &Bc2) -> Option<(Term, Term)> {
    let cy = || is_capacity_positive(bc.marginal_y());
    let cz = || is_capacity_positive(bc.marginal_z());
    Some(match kind {
        RegionKind::BcAvg => (Term::Mi(0), Term::Mi(1)),
        RegionKind::FbTwoSided => (
            indicator(cy(), Term::OutEntropy(0)),
            indicator(cz(), Term::OutEntropy(1)),
        ),
        RegionKind::FbOneSidedInner => (indicator(cy(), Term::OutEntropy(0)), Term::Mi(1)),
        RegionKind::FbOneSidedOuter => (
            indicator(cy(), Term::OutEntropy(0)),
            indicator(cz(), Term::CondMi),
        ),
        _ => return None,
    })
}

fn build<'a>(kind: RegionKind, ch: &'a Channel, r: &[f64]) -> Result<Concave<'a>> {
    let bad = || Error::RegionKind(kind.name().to_string());
    let c = match (kind, ch) {
        (RegionKind::DmcCapacity, Channel::Dmc(w)) => Concave {
            chans: vec![w],
            kappa: vec![],
            constraints: vec![(Term::Mi(0), r[0])],
        },
        (RegionKind::BcCommonMessage, Channel::Bc2(bc)) => Concave {
            chans: vec![bc.marginal_y(), bc.marginal_z()],
            kappa: vec![],
            constraints: vec![
                (Term::Mi(0), r[0]),
                (Term::Mi(0), r[1]),
                (Term::Mi(1), r[0]),
                (Term::Mi(1), r[2]),
            ],
        },
        (_, Channel::Bc2(bc)) => {
            let (ty, tz) = pair_terms(kind, bc).ok_or_else(bad)?;
            Concave {
                chans: vec![bc.marginal_y(), bc.marginal_z()],
                kappa: kappa(bc),
                constraints: vec![(ty, r[0]), (tz, r[1])],
            }
        }
        (RegionKind::Bc3Outer, Channel::Bc3(b)) => Concave {
            chans: b.marginals().iter().collect(),
            kappa: vec![],
            constraints: (0..3).map(|k| (Term::Mi(k), r[k])).collect(),
        },
        (RegionKind::Bc3Inner, Channel::Bc3(b)) => {
            let mut constraints = Vec::new();
            for k in 0..3 {
                constraints.push((Term::Mi(k), r[k]));
                let others = (0..3).filter(|&l| l != k).map(Term::Mi).collect();
                constraints.push((Term::Sum(others), r[k]));
            }
            Concave {
                chans: b.marginals().iter().collect(),
                kappa: vec![],
                constraints,
            }
        }
        _ => return Err(bad()),
    };
    Ok(c)
}

fn check_rates(kind: RegionKind, rates: &[f64]) -> Result<()> {
    if rates.len() != kind.arity() {
        return Err(Error::Param(format!(
            "{kind} takes {} rates, got {}",
            kind.arity(),
            rates.len()
        )));
    }
    if rates.iter().any(|r| !r.is_finite() || *r < 0.0) {
        return Err(Error::Param("rates must be finite and non-negative".into()));
    }
    Ok(())
}

/// Decides whether a rate tuple lies in the region, by maximizing the
/// minimum constraint slack over input distributions.
pub fn region_membership(
    q: &RegionQuery,
    ch: &Channel,
    opts: &OptimizerOptions,
) -> Result<RegionAnswer> {
    check_rates(q.kind, &q.rates)?;
    if q.kind == RegionKind::CommonRandomness {
        let Channel::Bc2(bc) = ch else {
            return Err(Error::RegionKind(q.kind.name().into()));
        };
        let u = q.u_size.ok_or_else(|| {
            Error::Param("common-randomness region needs an auxiliary alphabet size".into())
        })?;
        return cr_region_membership(bc, &q.rates, u, opts);
    }
    let f = build(q.kind, ch, &q.rates)?;
    let (p, slack) = maximize_min_slack(&f, &[], opts);
    Ok(RegionAnswer {
        inside: slack >= -MEMBERSHIP_TOL,
        verdict: verdict(slack),
        slack,
        constraint_slacks: f.slacks(&p),
        witness: p,
        witness_joint: None,
        form: None,
    })
}

/// One achieved point of the boundary trace.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryPoint {
    pub lambda: f64,
    pub witness: Vec<f64>,
    /// (c_Y(P), c_Z(P)); the rectangle below it is inside the region.
    pub rates: [f64; 2],
}

/// Traces the two-receiver region by maximizing λ·c_Y + (1−λ)·c_Z on a λ grid.
pub fn region_boundary(
    ch: &Channel,
    kind: RegionKind,
    resolution: usize,
    opts: &OptimizerOptions,
) -> Result<Vec<BoundaryPoint>> {
    if resolution < 2 {
        return Err(Error::Param("boundary resolution must be at least 2".into()));
    }
    let Channel::Bc2(bc) = ch else {
        return Err(Error::RegionKind(kind.name().into()));
    };
    let (ty, tz) = pair_terms(kind, bc).ok_or_else(|| Error::RegionKind(kind.name().into()))?;
    let base = Concave {
        chans: vec![bc.marginal_y(), bc.marginal_z()],
        kappa: kappa(bc),
        constraints: vec![],
    };
    let mut out = Vec::with_capacity(resolution);
    for i in 0..resolution {
        let lambda = i as f64 / (resolution - 1) as f64;
        let f = Concave {
            constraints: vec![(
                Term::Sum(vec![
                    Term::Scaled(lambda, Box::new(ty.clone())),
                    Term::Scaled(1.0 - lambda, Box::new(tz.clone())),
                ]),
                0.0,
            )],
            chans: base.chans.clone(),
            kappa: base.kappa.clone(),
        };
        let (p, _) = maximize_min_slack(&f, &[], opts);
        out.push(BoundaryPoint {
            lambda,
            rates: [base.term(&ty, &p).0, base.term(&tz, &p).0],
            witness: p,
        });
    }
    Ok(out)
}

/// Slack functions of one of the two alternative constraint sets of the
/// common-randomness region, over a joint law of (U, X). Receiver `a` is the
/// one whose rate is bounded by I(U; a).
struct CrSlack<'a> {
    wa: &'a Dmc,
    wb: &'a Dmc,
    u: usize,
    x: usize,
    ra: f64,
    rb: f64,
}

impl CrSlack<'_> {
    fn marg_u(&self, p: &[f64]) -> Vec<f64> {
        (0..self.u)
            .map(|u| p[u * self.x..(u + 1) * self.x].iter().sum())
            .collect()
    }

    fn marg_x(&self, p: &[f64]) -> Vec<f64> {
        (0..self.x)
            .map(|x| (0..self.u).map(|u| p[u * self.x + x]).sum())
            .collect()
    }

    fn joint_out(&self, p: &[f64], w: &Dmc) -> Vec<Vec<f64>> {
        (0..self.u)
            .map(|u| output_law(&p[u * self.x..(u + 1) * self.x], w))
            .collect()
    }

    /// I(U; B) for channel w, with gradient.
    fn i_u(&self, p: &[f64], w: &Dmc) -> (f64, Vec<f64>) {
        let s = self.marg_u(p);
        let r = self.joint_out(p, w);
        let mut q = vec![0.0; w.output_size()];
        r.iter().for_each(|ru| q.iter_mut().zip(ru).for_each(|(a, b)| *a += b));
        let mut v = 0.0;
        for u in 0..self.u {
            for (y, &ruy) in r[u].iter().enumerate() {
                if ruy > 0.0 {
                    v += ruy * (ruy / (s[u] * q[y])).ln();
                }
            }
        }
        let mut g = vec![0.0; p.len()];
        for u in 0..self.u {
            for x in 0..self.x {
                let row = w.row(x);
                g[u * self.x + x] = if s[u] > 1e-300 {
                    row.iter()
                        .zip(&r[u])
                        .zip(&q)
                        .filter(|((a, _), _)| **a > 0.0)
                        .map(|((a, ruy), qy)| a * (ruy.max(1e-300) / qy.max(1e-300)).ln())
                        .sum::<f64>()
                        - s[u].ln()
                } else {
                    row_divergence(row, &q)
                };
            }
        }
        (v.max(0.0), g)
    }

    /// I(X; B | U), with gradient.
    fn i_cond(&self, p: &[f64], w: &Dmc) -> (f64, Vec<f64>) {
        let s = self.marg_u(p);
        let r = self.joint_out(p, w);
        let mut v = 0.0;
        let mut g = vec![0.0; p.len()];
        for u in 0..self.u {
            if s[u] <= 1e-300 {
                continue;
            }
            for x in 0..self.x {
                let d: f64 = w
                    .row(x)
                    .iter()
                    .zip(&r[u])
                    .filter(|(a, _)| **a > 0.0)
                    .map(|(a, rub)| a * (a * s[u] / rub.max(1e-300)).ln())
                    .sum();
                g[u * self.x + x] = d;
                v += p[u * self.x + x] * d;
            }
        }
        (v.max(0.0), g)
    }

    /// I(X; B), with gradient.
    fn i_x(&self, p: &[f64], w: &Dmc) -> (f64, Vec<f64>) {
        let px = self.marg_x(p);
        let q = output_law(&px, w);
        let d: Vec<f64> = (0..self.x).map(|x| row_divergence(w.row(x), &q)).collect();
        let v = px.iter().zip(&d).map(|(a, b)| a * b).sum::<f64>().max(0.0);
        let g = (0..p.len()).map(|i| d[i % self.x]).collect();
        (v, g)
    }
}

impl SlackFn for CrSlack<'_> {
    fn dim(&self) -> usize {
        self.u * self.x
    }
    fn slacks(&self, p: &[f64]) -> Vec<f64> {
        self.slacks_grad(p).0
    }
    fn slacks_grad(&self, p: &[f64]) -> (Vec<f64>, Vec<Vec<f64>>) {
        let (iu, gu) = self.i_u(p, self.wa);
        let (ic, gc) = self.i_cond(p, self.wb);
        let (ix, gx) = self.i_x(p, self.wb);
        let sum_g = gu.iter().zip(&gc).map(|(a, b)| a + b).collect();
        (
            vec![iu - self.ra, iu + ic - self.rb, ix - self.rb],
            vec![gu, sum_g, gx],
        )
    }
}

/// Membership in the common-randomness region with auxiliary alphabet size
/// `u_size`, searching jointly over P_{U,X}. A positive answer is certified by
/// the returned witness; a negative one only says no witness was found.
pub fn cr_region_membership(
    bc: &Bc2,
    rates: &[f64],
    u_size: usize,
    opts: &OptimizerOptions,
) -> Result<RegionAnswer> {
    check_rates(RegionKind::CommonRandomness, rates)?;
    if u_size == 0 {
        return Err(Error::Param("auxiliary alphabet size must be at least 1".into()));
    }
    let x = bc.input_size();
    let mut starts = structured_starts(u_size, x);
    let mut rng = seed::stream(opts.seed, "cr-starts", &[u_size as u64, x as u64]);
    for _ in 0..opts.random_starts {
        let e: Vec<f64> = (0..u_size * x)
            .map(|_| -(1.0 - rng.gen::<f64>()).ln())
            .collect();
        let s: f64 = e.iter().sum();
        starts.push(e.into_iter().map(|v| v / s).collect());
    }
    let (wy, wz) = (bc.marginal_y(), bc.marginal_z());
    let forms = [
        CrSlack { wa: wy, wb: wz, u: u_size, x, ra: rates[0], rb: rates[1] },
        CrSlack { wa: wz, wb: wy, u: u_size, x, ra: rates[1], rb: rates[0] },
    ];
    let mut best: Option<(usize, Vec<f64>, f64)> = None;
    for (i, f) in forms.iter().enumerate() {
        let (p, v) = maximize_min_slack(f, &starts, opts);
        if best.as_ref().is_none_or(|b| v > b.2) {
            best = Some((i, p, v));
        }
    }
    let (form, p, slack) = best.unwrap();
    let f = &forms[form];
    let witness_joint: Vec<Vec<f64>> = p.chunks(x).map(|c| c.to_vec()).collect();
    Ok(RegionAnswer {
        inside: slack >= -MEMBERSHIP_TOL,
        verdict: verdict(slack),
        slack,
        constraint_slacks: f.slacks(&p),
        witness: f.marg_x(&p),
        witness_joint: Some(witness_joint),
        form: Some(form),
    })
}

fn structured_starts(u: usize, x: usize) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    // U independent of X.
    out.push(vec![1.0 / (u * x) as f64; u * x]);
    // U a copy of X (or of X folded onto U).
    let mut copy = vec![0.0; u * x];
    for a in 0..x {
        copy[(a % u) * x + a] = 1.0 / x as f64;
    }
    out.push(copy);
    // U constant.
    let mut constant = vec![0.0; u * x];
    constant[..x].iter_mut().for_each(|v| *v = 1.0 / x as f64);
    out.push(constant);
    out
}

/// Convenience for callers holding only a pmf-valued witness.
impl RegionAnswer {
    pub fn witness_pmf(&self) -> Result<Pmf> {
        let s: f64 = self.witness.iter().sum();
        Pmf::new(self.witness.iter().map(|v| v / s).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::info::mutual_information;

    #[test]
    fn kind_names_round_trip() {
        for k in RegionKind::ALL {
            assert_eq!(k.name().parse::<RegionKind>().unwrap(), k);
            let j = serde_json::to_string(&k).unwrap();
            assert_eq!(j, format!("\"{}\"", k.name()));
        }
        assert!("bc-nope".parse::<RegionKind>().is_err());
    }

    #[test]
    fn cond_mi_term_matches_direct_definition() {
        let bc = Bc2::from_flat(
            2,
            2,
            2,
            vec![0.5, 0.1, 0.1, 0.3, 0.05, 0.15, 0.2, 0.6],
        )
        .unwrap();
        let f = Concave {
            chans: vec![bc.marginal_y(), bc.marginal_z()],
            kappa: kappa(&bc),
            constraints: vec![],
        };
        for a in [0.1, 0.5, 0.8] {
            let p = Pmf::new(vec![a, 1.0 - a]).unwrap();
            let direct = crate::info::conditional_mutual_information(&p, &bc).unwrap();
            let (v, _) = f.term(&Term::CondMi, p.probs());
            assert!((direct - v).abs() < 1e-13);
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let bc = Bc2::product(&Dmc::bsc(0.1), &Dmc::z_channel(0.3)).unwrap();
        let f = Concave {
            chans: vec![bc.marginal_y(), bc.marginal_z()],
            kappa: kappa(&bc),
            constraints: vec![
                (Term::Mi(0), 0.0),
                (Term::OutEntropy(1), 0.0),
                (Term::CondMi, 0.0),
            ],
        };
        let p = [0.35, 0.65];
        let (_, g) = f.slacks_grad(&p);
        let h = 1e-6;
        let plus = f.slacks(&[p[0] + h, p[1] - h]);
        let minus = f.slacks(&[p[0] - h, p[1] + h]);
        for j in 0..3 {
            let fd = (plus[j] - minus[j]) / (2.0 * h);
            assert!((fd - (g[j][0] - g[j][1])).abs() < 1e-6, "constraint {j}");
        }
        let cr = CrSlack { wa: bc.marginal_y(), wb: bc.marginal_z(), u: 2, x: 2, ra: 0.0, rb: 0.0 };
        let p = [0.1, 0.3, 0.4, 0.2];
        let (_, g) = cr.slacks_grad(&p);
        for (i, j) in [(0usize, 1usize), (1, 2), (0, 3)] {
            let mut a = p;
            let mut b = p;
            a[i] += h;
            a[j] -= h;
            b[i] -= h;
            b[j] += h;
            let (sa, sb) = (cr.slacks(&a), cr.slacks(&b));
            for c in 0..3 {
                let fd = (sa[c] - sb[c]) / (2.0 * h);
                assert!((fd - (g[c][i] - g[c][j])).abs() < 1e-5, "cr constraint {c}, ({i},{j})");
            }
        }
    }

    #[test]
    fn mi_of_witness_matches_slack() {
        let ch = Channel::Dmc(Dmc::z_channel(0.3));
        let a = region_membership(
            &RegionQuery::new(RegionKind::DmcCapacity, &[0.2]),
            &ch,
            &OptimizerOptions::default(),
        )
        .unwrap();
        let Channel::Dmc(w) = &ch else { unreachable!() };
        let i = mutual_information(&a.witness_pmf().unwrap(), w).unwrap();
        assert!((i - 0.2 - a.slack).abs() < 1e-12);
    }

    #[test]
    fn constant_auxiliary_leaves_only_the_axes() {
        let bc = Bc2::product(&Dmc::bsc(0.1), &Dmc::bsc(0.2)).unwrap();
        let opts = OptimizerOptions::default();
        let at = |r: [f64; 2]| cr_region_membership(&bc, &r, 1, &opts).unwrap();
        assert!(at([0.3, 0.0]).inside);
        assert!(at([0.0, 0.15]).inside);
        assert!(!at([0.05, 0.05]).inside);
        assert!((at([0.05, 0.05]).slack + 0.05).abs() < 1e-9);
    }

    #[test]
    fn cr_matches_average_region_for_comparable_bsc_pair() {
        let bc = Bc2::product(&Dmc::bsc(0.1), &Dmc::bsc(0.2)).unwrap();
        let ch = Channel::Bc2(bc.clone());
        let opts = OptimizerOptions::default();
        for i in 0..6 {
            for j in 0..6 {
                let r = [0.08 * i as f64, 0.045 * j as f64];
                let avg = region_membership(&RegionQuery::new(RegionKind::BcAvg, &r), &ch, &opts).unwrap();
                let cr = cr_region_membership(&bc, &r, 2, &opts).unwrap();
                assert_eq!(avg.inside, cr.inside, "{r:?}");
                assert!((avg.slack - cr.slack).abs() < 1e-6, "{r:?}");
            }
        }
    }
}
