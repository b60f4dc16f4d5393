//! Exact reports checked against brute-force sums written independently of
//! the library's evaluator, plus closed-form capacities.

use idbc::channel::{Bc2, Dmc, Pmf};
use idbc::eval::{Criterion, ErrorReport, EvalMode};
use idbc::id_bc::{avg_error_report_bc, build_bc_code, max_error_report_bc, BcIdParams};
use idbc::id_dmc::{build_dmc_code, error_report_dmc, IdParams};
use idbc::id_ext::{build_cm_code, evaluate_cm, CmIdParams};
use idbc::info::capacity;

const TOL: f64 = 1e-12;

fn all_outputs(n: usize, k: usize) -> Vec<Vec<u8>> {
    let mut out = vec![vec![]];
    for _ in 0..n {
        out = out
            .into_iter()
            .flat_map(|v| {
                (0..k as u8).map(move |b| {
                    let mut w = v.clone();
                    w.push(b);
                    w
                })
            })
            .collect();
    }
    out
}

fn likelihood(w: &Dmc, x: &[u8], y: &[u8]) -> f64 {
    x.iter().zip(y).map(|(&a, &b)| w.prob(a as usize, b as usize)).product()
}

/// Every pair count within a factor ε of its expectation; impossible pairs absent.
fn typical(x: &[u8], y: &[u8], p: &Pmf, w: &Dmc, eps: f64) -> bool {
    let (nx, ny) = (w.input_size(), w.output_size());
    let mut counts = vec![0usize; nx * ny];
    for (&a, &b) in x.iter().zip(y) {
        counts[a as usize * ny + b as usize] += 1;
    }
    (0..nx * ny).all(|c| {
        let q = p.get(c / ny) * w.prob(c / ny, c % ny);
        if q == 0.0 {
            counts[c] == 0
        } else {
            (counts[c] as f64 / x.len() as f64 - q).abs() <= eps * q
        }
    })
}

/// One receiver: `sent(own, other)` is the transmitted codeword, `bins[m]`
/// the codewords whose typical shells make up D_m.
struct Side<'a> {
    w: &'a Dmc,
    pmf: &'a Pmf,
    eps: f64,
    n: usize,
    bins: Vec<Vec<Vec<u8>>>,
    others: usize,
}

impl Side<'_> {
    fn accepts(&self, m: usize, y: &[u8]) -> bool {
        self.bins[m].iter().any(|x| typical(x, y, self.pmf, self.w, self.eps))
    }

    /// (missed[m], wrong[m][m']) for a fixed other-side message.
    fn exact(&self, sent: &dyn Fn(usize, usize) -> Vec<(Vec<u8>, f64)>, other: usize) -> (Vec<f64>, Vec<Vec<f64>>) {
        let m = self.bins.len();
        let ys = all_outputs(self.n, self.w.output_size());
        let mut missed = vec![0.0; m];
        let mut wrong = vec![vec![0.0; m]; m];
        for own in 0..m {
            for (x, weight) in &sent(own, other) {
                for y in &ys {
                    let p = weight * likelihood(self.w, x, y);
                    if p == 0.0 {
                        continue;
                    }
                    for t in 0..m {
                        let acc = self.accepts(t, y);
                        if t == own && !acc {
                            missed[own] += p;
                        } else if t != own && acc {
                            wrong[own][t] += p;
                        }
                    }
                }
            }
        }
        (missed, wrong)
    }

    /// Average (or maximum) over the other side's messages.
    fn report(&self, sent: &dyn Fn(usize, usize) -> Vec<(Vec<u8>, f64)>, max: bool) -> (Vec<f64>, Vec<Vec<f64>>) {
        let m = self.bins.len();
        let mut missed = vec![0.0; m];
        let mut wrong = vec![vec![0.0; m]; m];
        for o in 0..self.others {
            let (a, b) = self.exact(sent, o);
            for i in 0..m {
                missed[i] = fold(missed[i], a[i], max, self.others);
                for j in 0..m {
                    wrong[i][j] = fold(wrong[i][j], b[i][j], max, self.others);
                }
            }
        }
        (missed, wrong)
    }
}

fn fold(acc: f64, v: f64, max: bool, count: usize) -> f64 {
    if max {
        acc.max(v)
    } else {
        acc + v / count as f64
    }
}

fn assert_matches(r: &ErrorReport, missed: &[f64], wrong: &[Vec<f64>]) {
    for (m, want) in missed.iter().enumerate() {
        assert!((r.missed[m].value - want).abs() < TOL, "missed {m}: {} vs {want}", r.missed[m].value);
    }
    for (i, row) in wrong.iter().enumerate() {
        for (j, want) in row.iter().enumerate() {
            if i != j {
                let got = r.wrong_of(i as u32, j as u32).expect("pair evaluated").value;
                assert!((got - want).abs() < TOL, "wrong {i}->{j}: {got} vs {want}");
            }
        }
    }
}

fn pool_word(pool: &idbc::pool::Pool, v: u64) -> Vec<u8> {
    pool.get(v).into_owned()
}

#[test]
fn dmc_exact_report_matches_brute_force() {
    for (w, seed) in [(Dmc::bsc(0.1), 3), (Dmc::z_channel(0.3), 11), (Dmc::bec(0.25), 5)] {
        let pmf = Pmf::uniform(2);
        let code = build_dmc_code(&IdParams {
            n: 6,
            m_count: 3,
            id_rate: 0.01,
            bin_rate: 0.2,
            pool_rate: 0.35,
            input_pmf: pmf.clone(),
            eps: 0.6,
            seed,
        })
        .unwrap();
        let bins: Vec<Vec<Vec<u8>>> = code
            .index_sets
            .iter()
            .map(|s| s.iter().map(|&v| pool_word(&code.pool, v)).collect())
            .collect();
        let sent = |m: usize, _: usize| {
            let set = &code.index_sets[m];
            let members = if set.is_empty() { vec![code.v_star] } else { set.clone() };
            let p = 1.0 / members.len() as f64;
            members.iter().map(|&v| (pool_word(&code.pool, v), p)).collect()
        };
        let side = Side {
            w: &w,
            pmf: &pmf,
            eps: code.eps,
            n: code.pool.blocklength(),
            bins,
            others: 1,
        };
        let (missed, wrong) = side.report(&sent, false);
        let r = error_report_dmc(&code, &w, EvalMode::exact()).unwrap();
        assert_matches(&r, &missed, &wrong);
    }
}

fn bc_params(seed: u64) -> BcIdParams {
    BcIdParams {
        n: 5,
        m_y_count: 2,
        m_z_count: 3,
        id_rate_y: 0.01,
        id_rate_z: 0.01,
        bin_rate_y: 0.3,
        bin_rate_z: 0.25,
        pool_rate: 0.4,
        input_pmf: Pmf::uniform(2),
        eps: 0.7,
        seed,
    }
}

#[test]
fn bc_exact_reports_match_brute_force() {
    let bc = Bc2::product(&Dmc::bsc(0.1), &Dmc::z_channel(0.2)).unwrap();
    let pmf = Pmf::uniform(2);
    for seed in [1, 9] {
        let code = build_bc_code(&bc_params(seed)).unwrap();
        let words = |sets: &[Vec<u64>]| -> Vec<Vec<Vec<u8>>> {
            sets.iter()
                .map(|s| s.iter().map(|&v| pool_word(&code.pool, v)).collect())
                .collect()
        };
        let y_sent = |my: usize, mz: usize| vec![(pool_word(&code.pool, code.codeword_index(my, mz)), 1.0)];
        let z_sent = |mz: usize, my: usize| vec![(pool_word(&code.pool, code.codeword_index(my, mz)), 1.0)];
        let y = Side {
            w: bc.marginal_y(),
            pmf: &pmf,
            eps: code.eps,
            n: code.pool.blocklength(),
            bins: words(&code.index_sets_y),
            others: 3,
        };
        let z = Side {
            w: bc.marginal_z(),
            pmf: &pmf,
            eps: code.eps,
            n: code.pool.blocklength(),
            bins: words(&code.index_sets_z),
            others: 2,
        };
        for max in [false, true] {
            let r = if max {
                max_error_report_bc(&code, &bc, EvalMode::exact()).unwrap()
            } else {
                avg_error_report_bc(&code, &bc, EvalMode::exact()).unwrap()
            };
            let (m, w) = y.report(&y_sent, max);
            assert_matches(&r.y, &m, &w);
            let (m, w) = z.report(&z_sent, max);
            assert_matches(&r.z, &m, &w);
        }
    }
}

#[test]
fn common_message_exact_report_matches_brute_force() {
    // Two common messages, two private messages per side, binary alphabets.
    let bc = Bc2::product(&Dmc::bsc(0.05), &Dmc::bsc(0.15)).unwrap();
    let pmf = Pmf::uniform(2);
    let code = build_cm_code(&CmIdParams {
        n: 5,
        m_common: 2,
        m_y_count: 2,
        m_z_count: 2,
        id_rate_common: 0.01,
        id_rate_y: 0.01,
        id_rate_z: 0.01,
        bin_rate_y: 0.3,
        bin_rate_z: 0.3,
        pool_rate: 0.45,
        input_pmf: pmf.clone(),
        eps: 0.7,
        seed: 4,
    })
    .unwrap();
    let words = |sets: &[Vec<u64>]| -> Vec<Vec<Vec<u8>>> {
        sets.iter()
            .map(|s| s.iter().map(|&v| pool_word(&code.pool, v)).collect())
            .collect()
    };
    // Joint own message j = m·2 + m_own.
    let y_sent = |j: usize, mz: usize| vec![(code.encode(j / 2, j % 2, mz), 1.0)];
    let z_sent = |j: usize, my: usize| vec![(code.encode(j / 2, my, j % 2), 1.0)];
    let r = evaluate_cm(&code, &bc, EvalMode::exact(), Criterion::Average).unwrap();
    for (k, (w, bins, sent)) in [
        (bc.marginal_y(), words(&code.index_sets_y), &y_sent as &dyn Fn(usize, usize) -> Vec<(Vec<u8>, f64)>),
        (bc.marginal_z(), words(&code.index_sets_z), &z_sent),
    ]
    .into_iter()
    .enumerate()
    {
        let side = Side {
            w,
            pmf: &pmf,
            eps: code.eps,
            n: code.pool.blocklength(),
            bins,
            others: 2,
        };
        let (m, wr) = side.report(sent, false);
        assert_matches(&r.sides[k], &m, &wr);
    }
}

fn h2(p: f64) -> f64 {
    -p * p.ln() - (1.0 - p) * (1.0 - p).ln()
}

#[test]
fn capacities_match_closed_forms() {
    let ln2 = 2f64.ln();
    let cases = [
        (Dmc::bsc(0.05), ln2 - h2(0.05)),
        (Dmc::bsc(0.3), ln2 - h2(0.3)),
        (Dmc::bec(0.2), 0.8 * ln2),
        (Dmc::bec(0.6), 0.4 * ln2),
        (Dmc::noiseless(3), 3f64.ln()),
        (Dmc::noiseless(5), 5f64.ln()),
        // Z-channel with flip probability p: ln(1 + (1 − p)p^{p/(1−p)}).
        (Dmc::z_channel(0.3), (1.0 + 0.7 * 0.3f64.powf(0.3 / 0.7)).ln()),
        (Dmc::z_channel(0.5), (1.0 + 0.5 * 0.5f64.powf(1.0)).ln()),
    ];
    for (w, c) in cases {
        let r = capacity(&w, 1e-12, 200_000).unwrap();
        assert!((r.capacity - c).abs() < 1e-8, "{} vs {c}", r.capacity);
        assert!(r.capacity <= r.upper + 1e-15 && r.upper - c < 1e-8);
    }
}
