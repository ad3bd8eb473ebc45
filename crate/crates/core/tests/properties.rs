use proptest::prelude::*;

use xrelay::analysis::{dof_report, reduced_achievable_full, sajic_achievable_dof};
use xrelay::design::Transceiver;
use xrelay::exchange::{run_exchange, MessageSet};
use xrelay::model::allocate_streams;
use xrelay::numerics::{column_space_intersection, numerical_rank, orthonormality_error};
use xrelay::reduced::{design_reduced, reduced_split_budget};
use xrelay::sajic::design_full;
use xrelay::{draw_channels, Error, NetworkConfig, Node, Pair, TolerancePolicy};

#[test]
fn invariants_hold_over_many_seeds() {
    let tol = TolerancePolicy::default();
    for (m, n) in [(3, 4), (4, 6), (5, 7), (5, 8), (5, 9), (4, 4)] {
        let cfg = NetworkConfig::antennas(m, n).unwrap();
        for seed in 0..100 {
            let d = design_full(&draw_channels(&cfg, 10_000 + seed), &cfg, &tol).unwrap();
            let diag = d.diagnostics(&tol);
            assert!(
                diag.passes(&tol),
                "M={m} N={n} seed={seed}: {:?}",
                diag.failures(&tol)
            );
            assert_eq!(2 * d.link.total_streams(), sajic_achievable_dof(m, n));
            for node in Node::ALL {
                let power: f64 = node
                    .pairs()
                    .iter()
                    .map(|&p| d.link.stream_power * d.link.precoder(node, p).norm_squared())
                    .sum();
                assert!(power <= cfg.power * (1.0 + 1e-9));
            }
        }
    }
}

#[test]
fn intersection_bases_are_orthonormal_and_inside_both_spaces() {
    let tol = TolerancePolicy::default();
    for (m, n) in [(3, 4), (5, 8), (6, 3)] {
        let cfg = NetworkConfig::antennas(m, n).unwrap();
        for seed in 0..30 {
            let ch = draw_channels(&cfg, seed);
            let (a, b) = (ch.up(Node::N1), ch.up(Node::N3));
            let q = column_space_intersection(a, b, &tol);
            assert!(orthonormality_error(&q) < 1e-10);
            for h in [a, b] {
                let mut stacked = h.clone().insert_columns(m, q.ncols(), Default::default());
                stacked.columns_mut(m, q.ncols()).copy_from(&q);
                assert_eq!(numerical_rank(&stacked, &tol), numerical_rank(h, &tol));
            }
        }
    }
}

#[test]
fn noiseless_exchange_across_feasible_configurations() {
    let tol = TolerancePolicy::default();
    for m in 1..=6usize {
        for n in 1..2 * m {
            let cfg = NetworkConfig::antennas(m, n).unwrap();
            for seed in 0..50 {
                let ch = draw_channels(&cfg, 500 + seed);
                let d = design_full(&ch, &cfg, &tol).unwrap();
                let msgs = MessageSet::random(&d.link.allocation, seed);
                let rep = run_exchange(&d, &msgs, 0.0, 0, &tol).unwrap();
                assert_eq!(rep.message_errors, 0, "SAJIC M={m} N={n} seed={seed}");
                if reduced_achievable_full(m, n) {
                    let d = design_reduced(&ch, &cfg, &tol).unwrap();
                    let msgs = MessageSet::random(&d.link.allocation, seed);
                    let rep = run_exchange(&d, &msgs, 0.0, 0, &tol).unwrap();
                    assert_eq!(rep.message_errors, 0, "reduced M={m} N={n} seed={seed}");
                }
            }
        }
    }
}

#[test]
fn reduced_feasibility_equivalence() {
    let tol = TolerancePolicy::default();
    for m in 1..=8usize {
        for n in 1..=2 * m {
            let cfg = NetworkConfig::antennas(m, n).unwrap();
            let budget_ok = allocate_streams(&cfg)
                .map(|_| xrelay::StreamAllocation::full_dof(n))
                .and_then(|a| reduced_split_budget(m, n, &a))
                .is_ok();
            let expected = 3 * n <= 4 * m;
            assert_eq!(budget_ok, expected, "budget M={m} N={n}");
            for seed in 0..20 {
                let built = design_reduced(&draw_channels(&cfg, seed), &cfg, &tol);
                assert_eq!(
                    built.is_ok(),
                    expected,
                    "design M={m} N={n} seed={seed}: {built:?}",
                    built = built.err()
                );
            }
        }
    }
}

#[test]
fn infeasible_regime_is_reported_everywhere() {
    let tol = TolerancePolicy::default();
    for m in 1..=5usize {
        for n in 2 * m..=2 * m + 3 {
            let cfg = NetworkConfig::antennas(m, n).unwrap();
            let ch = draw_channels(&cfg, 0);
            assert_eq!(
                design_full(&ch, &cfg, &tol).unwrap_err(),
                Error::InfeasibleRegime { m, n }
            );
            assert!(design_reduced(&ch, &cfg, &tol).unwrap_err().is_infeasible());
        }
    }
}

#[test]
fn reduced_victims_lie_in_relay_null_space() {
    let tol = TolerancePolicy::default();
    for (m, n) in [(3, 4), (6, 8), (4, 5), (7, 9)] {
        let cfg = NetworkConfig::antennas(m, n).unwrap();
        for seed in 0..20 {
            let d = design_reduced(&draw_channels(&cfg, seed), &cfg, &tol).unwrap();
            assert!(d.relay_null_residual() <= 1e-9, "M={m} N={n} seed={seed}");
            for (col, victim) in d.nulled_toward.iter().enumerate() {
                let Some(victim) = victim else { continue };
                let u = d.link.relay_beamformers.column(col);
                let hit = (d.link.channels.down(*victim) * u).norm();
                assert!(hit <= 1e-9 * d.link.channels.down(*victim).norm());
            }
            for node in Node::ALL {
                assert_eq!(
                    d.relay_nulled_count(node),
                    d.link.total_streams().saturating_sub(m)
                );
            }
        }
    }
}

proptest! {
    #[test]
    fn dof_report_is_consistent(m in 1usize..200, n in 1usize..400) {
        let r = dof_report(m, n);
        prop_assert!(r.sajic_dof <= r.upper_bound);
        prop_assert!(r.time_share_dof <= r.upper_bound);
        prop_assert_eq!(r.sajic_full, n < 2 * m && 5 * n <= 8 * m);
        if r.reduced_full {
            prop_assert!(r.sajic_full);
            prop_assert_eq!(r.reduced_dof, Some(r.upper_bound));
        }
        prop_assert_eq!(r.half_duplex().upper_bound * 2, r.upper_bound);
    }

    #[test]
    fn allocation_fills_relay_exactly_when_full(m in 1usize..40, n in 1usize..80) {
        let cfg = NetworkConfig::antennas(m, n).unwrap();
        match allocate_streams(&cfg) {
            Ok(a) => {
                prop_assert_eq!(2 * a.total(), sajic_achievable_dof(m, n));
                for p in Pair::ALL {
                    // Each pair fits inside its uplink intersection.
                    prop_assert!(a.count(p) <= 2 * m - n);
                }
            }
            Err(e) => prop_assert_eq!(e, Error::InfeasibleRegime { m, n }),
        }
    }
}
