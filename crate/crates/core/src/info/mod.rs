//! Entropies, mutual information, channel capacity and capacity regions.
//! All quantities are in nats.

mod region;
mod simplex;

pub use region::{
    cr_region_membership, region_boundary, region_membership, BoundaryPoint, RegionAnswer,
    RegionKind, RegionQuery, Verdict, MEMBERSHIP_TOL,
};
pub use simplex::{project_simplex, simplex_grid, OptimizerOptions};

use crate::channel::{Bc2, Dmc, Pmf};
use crate::error::{Error, Result};

/// Capacity of a channel is treated as positive above this threshold.
pub const POSITIVE_CAPACITY: f64 = 1e-9;

#[inline]
fn xlnx(p: f64) -> f64 {
    if p > 0.0 {
        p * p.ln()
    } else {
        0.0
    }
}

pub fn entropy_of(probs: &[f64]) -> f64 {
    -probs.iter().map(|&p| xlnx(p)).sum::<f64>()
}

pub fn entropy(p: &Pmf) -> f64 {
    entropy_of(p.probs())
}

/// Binary entropy h(p) in nats.
pub fn binary_entropy(p: f64) -> f64 {
    entropy_of(&[p, 1.0 - p])
}

fn check_dims(p: &[f64], w: &Dmc) -> Result<()> {
    if p.len() != w.input_size() {
        return Err(Error::Dimension(format!(
            "input pmf has {} entries, channel input alphabet {}",
            p.len(),
            w.input_size()
        )));
    }
    Ok(())
}

pub(crate) fn output_law(p: &[f64], w: &Dmc) -> Vec<f64> {
    let mut q = vec![0.0; w.output_size()];
    for (x, &px) in p.iter().enumerate() {
        if px > 0.0 {
            for (y, qy) in q.iter_mut().enumerate() {
                *qy += px * w.prob(x, y);
            }
        }
    }
    q
}

/// D(W(·|x) ‖ q) for one row.
pub(crate) fn row_divergence(row: &[f64], q: &[f64]) -> f64 {
    row.iter()
        .zip(q)
        .filter(|(w, _)| **w > 0.0)
        .map(|(&w, &qy)| w * (w / qy.max(f64::MIN_POSITIVE)).ln())
        .sum()
}

pub(crate) fn mi_raw(p: &[f64], w: &Dmc) -> f64 {
    let q = output_law(p, w);
    let i: f64 = p
        .iter()
        .enumerate()
        .filter(|(_, px)| **px > 0.0)
        .map(|(x, &px)| px * row_divergence(w.row(x), &q))
        .sum();
    i.max(0.0)
}

/// I(P, W) = H(PW) − H(W|P).
pub fn mutual_information(p: &Pmf, w: &Dmc) -> Result<f64> {
    check_dims(p.probs(), w)?;
    Ok(mi_raw(p.probs(), w))
}

/// I(P×W_Y, W̃_Z): information the pair (X, Y) carries about Z when X ~ P.
/// Undefined conditional rows carry zero weight.
pub fn conditional_mutual_information(p: &Pmf, bc: &Bc2) -> Result<f64> {
    let wy = bc.marginal_y();
    check_dims(p.probs(), wy)?;
    let cond = bc.conditional_z_given_xy();
    let (ny, nz) = bc.output_sizes();
    let mut qz = vec![0.0; nz];
    let mut weights = Vec::new();
    for x in 0..p.len() {
        for y in 0..ny {
            let a = p.get(x) * wy.prob(x, y);
            if a > 0.0 {
                let row = cond.row(x, y).expect("positive weight implies defined row");
                for (z, q) in qz.iter_mut().enumerate() {
                    *q += a * row[z];
                }
                weights.push((a, row));
            }
        }
    }
    let i: f64 = weights
        .iter()
        .map(|(a, row)| a * row_divergence(row, &qz))
        .sum();
    Ok(i.max(0.0))
}

/// Blahut–Arimoto result with its duality-gap certificate.
#[derive(Clone, Debug, PartialEq)]
pub struct CapacityResult {
    pub pmf: Pmf,
    /// Lower bound on capacity; the reported value.
    pub capacity: f64,
    /// Upper bound max_x D(W_x ‖ PW).
    pub upper: f64,
    pub iterations: usize,
}

impl CapacityResult {
    pub fn gap(&self) -> f64 {
        self.upper - self.capacity
    }
}

/// Capacity by Blahut–Arimoto; stops once max_x D(W_x‖PW) − ln Σ P e^{D} ≤ tol.
pub fn capacity(w: &Dmc, tol: f64, max_iter: usize) -> Result<CapacityResult> {
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::Param(format!("tolerance must be positive, got {tol}")));
    }
    let k = w.input_size();
    let mut p = vec![1.0 / k as f64; k];
    let mut d = vec![0.0; k];
    let mut best: Option<(f64, f64, Vec<f64>)> = None;
    for it in 0..=max_iter {
        let q = output_law(&p, w);
        for x in 0..k {
            d[x] = row_divergence(w.row(x), &q);
        }
        let dmax = d.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let z: f64 = p.iter().zip(&d).map(|(px, dx)| px * (dx - dmax).exp()).sum();
        let lower = (dmax + z.ln()).min(dmax).max(0.0);
        let upper = dmax.max(lower);
        if best.as_ref().is_none_or(|b| upper - lower < b.1 - b.0) {
            best = Some((lower, upper, p.clone()));
        }
        if upper - lower <= tol {
            return Ok(CapacityResult {
                pmf: Pmf::new(p.clone()).unwrap_or_else(|_| normalized(&p)),
                capacity: lower,
                upper,
                iterations: it,
            });
        }
        if it == max_iter {
            break;
        }
        for x in 0..k {
            p[x] *= (d[x] - dmax).exp();
        }
        let s: f64 = p.iter().sum();
        p.iter_mut().for_each(|v| *v /= s);
    }
    let (lower, upper, pmf) = best.expect("at least one iteration");
    Err(Error::NoConvergence {
        lower,
        upper,
        iterations: max_iter,
        pmf,
    })
}

pub(crate) fn normalized(p: &[f64]) -> Pmf {
    let s: f64 = p.iter().sum();
    Pmf::new(p.iter().map(|v| v / s).collect()).expect("normalized vector")
}

/// Capacity with default settings, for indicator evaluation.
pub fn capacity_value(w: &Dmc) -> f64 {
    match capacity(w, 1e-10, 100_000) {
        Ok(c) => c.capacity,
        Err(Error::NoConvergence { lower, .. }) => lower,
        Err(_) => 0.0,
    }
}

pub fn is_capacity_positive(w: &Dmc) -> bool {
    capacity_value(w) > POSITIVE_CAPACITY
}
