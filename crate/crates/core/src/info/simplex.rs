use rayon::prelude::*;

/// Euclidean projection onto the probability simplex (sort-based).
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut css = 0.0;
    let mut theta = 0.0;
    for (i, &ui) in u.iter().enumerate() {
        css += ui;
        let t = (css - 1.0) / (i + 1) as f64;
        if ui - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|&x| (x - theta).max(0.0)).collect()
}

/// All points of the simplex in dimension k with coordinates in multiples of 1/res.
pub fn simplex_grid(k: usize, res: usize) -> Vec<Vec<f64>> {
    fn rec(k: usize, left: usize, res: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<f64>>) {
        if cur.len() + 1 == k {
            cur.push(left);
            out.push(cur.iter().map(|&c| c as f64 / res as f64).collect());
            cur.pop();
            return;
        }
        for c in (0..=left).rev() {
            cur.push(c);
            rec(k, left - c, res, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(k, res, res, &mut Vec::with_capacity(k), &mut out);
    out
}

fn binom(n: usize, k: usize) -> usize {
    (0..k).fold(1usize, |acc, i| acc.saturating_mul(n - i) / (i + 1))
}

/// Settings for max-min slack optimization over a simplex.
#[derive(Clone, Debug)]
pub struct OptimizerOptions {
    /// Upper bound on the number of grid seeds; the grid resolution is the
    /// largest one staying below it.
    pub max_grid_points: usize,
    /// Local searches launched from the best grid seeds.
    pub starts: usize,
    /// Gradient steps per smoothing level.
    pub max_iter: usize,
    /// Smoothing temperatures, largest first.
    pub temperatures: Vec<f64>,
    /// Extra random starts (used by non-concave objectives).
    pub random_starts: usize,
    pub seed: u64,
}

impl Default for OptimizerOptions {
    fn default() -> Self {
        OptimizerOptions {
            max_grid_points: 400,
            starts: 4,
            max_iter: 400,
            temperatures: vec![1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-8],
            random_starts: 16,
            seed: 0x5eed,
        }
    }
}

impl OptimizerOptions {
    pub(crate) fn grid_resolution(&self, k: usize) -> usize {
        let mut res = 1;
        while binom(res + 1 + k - 1, k - 1) <= self.max_grid_points && res < 1000 {
            res += 1;
        }
        res
    }
}

/// A vector of slack functions s_j(P) with gradients.
pub(crate) trait SlackFn: Sync {
    fn dim(&self) -> usize;
    fn slacks(&self, p: &[f64]) -> Vec<f64>;
    /// Slacks and their gradients; constant shifts per gradient are allowed.
    fn slacks_grad(&self, p: &[f64]) -> (Vec<f64>, Vec<Vec<f64>>);
}

fn hard_min(s: &[f64]) -> f64 {
    s.iter().cloned().fold(f64::INFINITY, f64::min)
}

fn soft_min(s: &[f64], t: f64) -> (f64, Vec<f64>) {
    let m = hard_min(s);
    let e: Vec<f64> = s.iter().map(|&v| (-(v - m) / t).exp()).collect();
    let z: f64 = e.iter().sum();
    (m - t * z.ln(), e.into_iter().map(|v| v / z).collect())
}

fn soft_eval<F: SlackFn + ?Sized>(f: &F, p: &[f64], t: f64) -> (f64, Vec<f64>, f64) {
    let (s, g) = f.slacks_grad(p);
    let (v, w) = soft_min(&s, t);
    let mut grad = vec![0.0; p.len()];
    for (wj, gj) in w.iter().zip(&g) {
        for (a, b) in grad.iter_mut().zip(gj) {
            *a += wj * b;
        }
    }
    (v, grad, hard_min(&s))
}

/// Smoothed projected-gradient ascent of min_j s_j from `start`.
pub(crate) fn local_ascent<F: SlackFn + ?Sized>(
    f: &F,
    start: &[f64],
    opts: &OptimizerOptions,
) -> (Vec<f64>, f64) {
    let mut p = project_simplex(start);
    let mut best_p = p.clone();
    let mut best = hard_min(&f.slacks(&p));
    for &t in &opts.temperatures {
        let mut step = 1.0;
        for _ in 0..opts.max_iter {
            let (v, g, hard) = soft_eval(f, &p, t);
            if hard > best {
                best = hard;
                best_p = p.clone();
            }
            let mut moved = false;
            step *= 4.0;
            while step > 1e-14 {
                let cand: Vec<f64> =
                    project_simplex(&p.iter().zip(&g).map(|(a, b)| a + step * b).collect::<Vec<_>>());
                let dir: f64 = cand.iter().zip(&p).zip(&g).map(|((c, a), b)| (c - a) * b).sum();
                let s = f.slacks(&cand);
                let (vc, _) = soft_min(&s, t);
                if vc >= v + 1e-4 * dir && dir > 0.0 {
                    let delta = cand
                        .iter()
                        .zip(&p)
                        .map(|(a, b)| (a - b).abs())
                        .fold(0.0, f64::max);
                    p = cand;
                    moved = delta > 1e-15;
                    break;
                }
                step *= 0.5;
            }
            if !moved {
                break;
            }
        }
        let hard = hard_min(&f.slacks(&p));
        if hard > best {
            best = hard;
            best_p = p.clone();
        }
    }
    (best_p, best)
}

/// Multistart maximization of min_j s_j(P); ties go to the lowest start.
pub(crate) fn maximize_min_slack<F: SlackFn + ?Sized>(
    f: &F,
    extra_starts: &[Vec<f64>],
    opts: &OptimizerOptions,
) -> (Vec<f64>, f64) {
    let k = f.dim();
    let res = opts.grid_resolution(k);
    let grid = simplex_grid(k, res);
    let mut scored: Vec<(usize, f64)> = grid
        .par_iter()
        .map(|p| hard_min(&f.slacks(p)))
        .enumerate()
        .collect();
    scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    let mut starts: Vec<Vec<f64>> = vec![vec![1.0 / k as f64; k]];
    starts.extend(scored.iter().take(opts.starts).map(|(i, _)| grid[*i].clone()));
    starts.extend(extra_starts.iter().cloned());
    let results: Vec<(Vec<f64>, f64)> = starts
        .par_iter()
        .map(|s| local_ascent(f, s, opts))
        .collect();
    let mut best = 0;
    for i in 1..results.len() {
        if results[i].1 > results[best].1 {
            best = i;
        }
    }
    results.into_iter().nth(best).unwrap()
}
