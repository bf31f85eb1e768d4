mod common;

use rds_core::hitting::{
    build_reachable, hitting_distribution, hitting_full, hitting_probability, seed_survival_curve, survival_table,
};
use rds_core::ModelParams;

#[test]
fn reachable_cardinality_matches_bfs() {
    for big_n in [6, 10, 15] {
        for c in 1..=4 {
            let p = ModelParams::new(big_n, 2.0, c, 1).unwrap();
            for (m, ell) in [(0, 1), (0, 3), (2, 2), (4, 1)] {
                if ell > big_n - m {
                    continue;
                }
                let set = build_reachable(m, ell, &p, None).unwrap();
                assert_eq!(set.cardinality(), common::bfs_reachable(m, ell, &p, None), "N={big_n} c={c} ({m},{ell})");
                for n0 in [m + ell, big_n - 2, big_n] {
                    if n0 < m || n0 > big_n {
                        continue;
                    }
                    let set = build_reachable(m, ell, &p, Some(n0)).unwrap();
                    assert_eq!(
                        set.cardinality(),
                        common::bfs_reachable(m, ell, &p, Some(n0)),
                        "N={big_n} c={c} ({m},{ell}) n0={n0}"
                    );
                }
            }
        }
    }
}

#[test]
fn restricted_band_under_the_dashed_line() {
    let p = ModelParams::new(60, 2.0, 3, 1).unwrap();
    let set = build_reachable(0, 1, &p, Some(50)).unwrap();
    for n in 0..=50 {
        if let Some((_, hi)) = set.bounds(n) {
            assert!(hi <= 50 - n);
        }
    }
}

#[test]
fn survival_is_complement_of_hitting() {
    for (big_n, c) in [(12, 2), (15, 3), (20, 1)] {
        let p = ModelParams::new(big_n, 2.0, c, 1).unwrap();
        for n0 in [3, 7, big_n] {
            let surv = survival_table(n0, &p).unwrap();
            let tables: Vec<_> = (0..=n0).map(|m| hitting_full(m, &p).unwrap()).collect();
            for n in 0..=n0 {
                for a in 1..=big_n - n {
                    let hit: f64 = tables.iter().skip(n).map(|t| t.get(n, a)).sum();
                    assert!(
                        (surv.get(n, a) - (1.0 - hit)).abs() < 1e-9,
                        "N={big_n} c={c} n0={n0} ({n},{a}): {} vs {}",
                        surv.get(n, a),
                        1.0 - hit
                    );
                }
            }
        }
    }
}

#[test]
fn hitting_law_is_a_distribution() {
    let p = ModelParams::new(30, 2.0, 2, 1).unwrap();
    let total: f64 = (1..=30).map(|n0| hitting_probability(n0, 0, 1, &p).unwrap()).sum();
    assert!((total - 1.0).abs() < 1e-9, "{total}");
    for n0 in [1, 5, 17, 30] {
        let table = hitting_distribution(n0, 0, 1, &p).unwrap();
        assert!((table.get(0, 1) - hitting_probability(n0, 0, 1, &p).unwrap()).abs() < 1e-15);
        assert_eq!(table.get(n0, 0), 1.0);
        for (n, a, u) in table.table.iter() {
            assert!((0.0..=1.0 + 1e-12).contains(&u));
            if a > n0 - n {
                assert_eq!(u, 0.0);
            }
        }
    }
}

#[test]
fn survival_monotone_in_holders() {
    for c in 1..=4 {
        let p = ModelParams::new(40, 2.0, c, 1).unwrap();
        let surv = survival_table(35, &p).unwrap();
        for n in 0..35 {
            for a in 1..40 - n {
                assert!(surv.get(n, a + 1) + 1e-12 >= surv.get(n, a), "c={c} ({n},{a})");
            }
        }
    }
}

#[test]
fn seed_curve_agrees_with_backward_tables() {
    let p = ModelParams::new(50, 2.0, 3, 1).unwrap();
    let curve = seed_survival_curve(&p, 40).unwrap();
    for n0 in [1, 10, 40] {
        let v = survival_table(n0, &p).unwrap().get(0, 1);
        assert!((curve[n0] - v).abs() < 1e-12);
    }
    assert!(curve.windows(2).all(|w| w[1] <= w[0] + 1e-15));
}
