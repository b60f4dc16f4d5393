use proptest::prelude::*;

use idbc::channel::{Bc2, Channel, Dmc, Pmf};
use idbc::container::{delta_decode, delta_encode, read_code, write_code, AnyCode};
use idbc::eval::total_variation;
use idbc::id_dmc::{build_dmc_code, IdParams};
use idbc::info::{capacity, mutual_information, region_membership, OptimizerOptions, RegionKind, RegionQuery};
use idbc::seed;
use idbc::typeskit::{is_jointly_typical, is_typical};

fn weights(k: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.01f64..1.0, k)
}

fn normalize(v: Vec<f64>) -> Vec<f64> {
    let s: f64 = v.iter().sum();
    v.into_iter().map(|x| x / s).collect()
}

fn pmf(k: usize) -> impl Strategy<Value = Pmf> {
    weights(k).prop_map(|v| Pmf::new(normalize(v)).unwrap())
}

fn dmc(x: usize, y: usize) -> impl Strategy<Value = Dmc> {
    prop::collection::vec(weights(y), x).prop_map(|rows| Dmc::new(rows.into_iter().map(normalize).collect()).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pmf_rejects_mass_off_by_more_than_tolerance(v in weights(4), off in 1e-9f64..1e-3) {
        let mut p = normalize(v);
        p[0] += off;
        prop_assert!(Pmf::new(p).is_err());
    }

    #[test]
    fn pmf_rejects_negative_entries(v in weights(3)) {
        let mut p = normalize(v);
        p[1] = -p[1];
        p[0] -= 2.0 * p[1];
        prop_assert!(Pmf::new(p).is_err());
    }

    #[test]
    fn tv_is_a_metric(a in pmf(5), b in pmf(5), c in pmf(5)) {
        let (ab, bc, ac) = (
            total_variation(a.probs(), b.probs()),
            total_variation(b.probs(), c.probs()),
            total_variation(a.probs(), c.probs()),
        );
        prop_assert!((0.0..=1.0).contains(&ab));
        prop_assert!((ab - total_variation(b.probs(), a.probs())).abs() < 1e-15);
        prop_assert!(ac <= ab + bc + 1e-12);
        prop_assert!(total_variation(a.probs(), a.probs()) == 0.0);
    }

    #[test]
    fn channels_contract_tv(a in pmf(3), b in pmf(3), w in dmc(3, 4)) {
        let before = total_variation(a.probs(), b.probs());
        let after = total_variation(a.through(&w).unwrap().probs(), b.through(&w).unwrap().probs());
        prop_assert!(after <= before + 1e-12);
    }

    #[test]
    fn mutual_information_is_concave(a in pmf(3), b in pmf(3), lambda in 0.0f64..1.0, w in dmc(3, 3)) {
        let mix = Pmf::new(
            a.probs().iter().zip(b.probs()).map(|(x, y)| lambda * x + (1.0 - lambda) * y).collect(),
        )
        .unwrap();
        let ia = mutual_information(&a, &w).unwrap();
        let ib = mutual_information(&b, &w).unwrap();
        prop_assert!(lambda * ia + (1.0 - lambda) * ib <= mutual_information(&mix, &w).unwrap() + 1e-10);
    }

    #[test]
    fn capacity_dominates_every_input(w in dmc(3, 3), p in pmf(3)) {
        let c = capacity(&w, 1e-10, 100_000).unwrap();
        prop_assert!(c.capacity + 1e-9 >= mutual_information(&p, &w).unwrap());
        prop_assert!(c.capacity <= c.upper + 1e-12);
        prop_assert!(c.capacity <= 3f64.ln() + 1e-12);
    }

    #[test]
    fn delta_coding_round_trips(mut set in prop::collection::btree_set(0u64..1 << 40, 0..64)) {
        let v: Vec<u64> = std::mem::take(&mut set).into_iter().collect();
        prop_assert_eq!(delta_decode(&delta_encode(&v)).unwrap(), v);
    }

    #[test]
    fn seeded_streams_are_reproducible(root in any::<u64>(), a in any::<u64>(), b in any::<u64>()) {
        use rand::Rng;
        let draw = |parts: &[u64]| -> Vec<u64> {
            let mut r = seed::stream(root, "prop", parts);
            (0..8).map(|_| r.gen()).collect()
        };
        prop_assert_eq!(draw(&[a, b]), draw(&[a, b]));
        prop_assert_eq!(seed::derive(root, "prop", &[a]), seed::derive(root, "prop", &[a]));
        if a != b {
            prop_assert_ne!(draw(&[a]), draw(&[b]));
        }
    }

    #[test]
    fn typicality_grows_with_eps(x in prop::collection::vec(0u8..3, 1..40), p in pmf(3), e in 0.0f64..1.0) {
        if is_typical(&x, &p, e) {
            prop_assert!(is_typical(&x, &p, e + 0.1));
        }
    }

    #[test]
    fn sequences_of_the_exact_type_are_typical(k in 1usize..6) {
        // n = 4k with counts (k, 2k, k) matches P = (1/4, 1/2, 1/4) exactly.
        let mut x = vec![0u8; k];
        x.extend(vec![1u8; 2 * k]);
        x.extend(vec![2u8; k]);
        let p = Pmf::new(vec![0.25, 0.5, 0.25]).unwrap();
        prop_assert!(is_typical(&x, &p, 0.0));
        let joint = p.joint_with(&Dmc::noiseless(3)).unwrap();
        prop_assert!(is_jointly_typical(&x, &x, &joint, 3, 0.0).unwrap());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn region_membership_is_monotone(wy in dmc(2, 2), wz in dmc(2, 3), r in (0.0f64..0.7, 0.0f64..0.7), s in (0.0f64..1.0, 0.0f64..1.0)) {
        let ch = Channel::Bc2(Bc2::product(&wy, &wz).unwrap());
        let opts = OptimizerOptions::default();
        let at = |q: [f64; 2]| region_membership(&RegionQuery::new(RegionKind::BcAvg, &q), &ch, &opts).unwrap();
        let big = at([r.0, r.1]);
        let small = at([r.0 * s.0, r.1 * s.1]);
        prop_assert!(small.slack >= big.slack - 1e-9);
        if big.inside {
            prop_assert!(small.inside);
        }
    }

    #[test]
    fn containers_round_trip(seed in any::<u64>(), m in 1usize..6, n in 4usize..10) {
        let code = build_dmc_code(&IdParams {
            n,
            m_count: m,
            id_rate: 0.01,
            bin_rate: 0.2,
            pool_rate: 0.4,
            input_pmf: Pmf::new(vec![0.3, 0.7]).unwrap(),
            eps: 0.5,
            seed,
        })
        .unwrap();
        let text = write_code(&AnyCode::Dmc(code.clone())).unwrap();
        let AnyCode::Dmc(back) = read_code(&text).unwrap() else {
            panic!("scheme changed");
        };
        prop_assert_eq!(write_code(&AnyCode::Dmc(back.clone())).unwrap(), text);
        prop_assert_eq!(back, code);
    }
}
