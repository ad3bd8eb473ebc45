//! Acceptance gate. Runs every criterion in order, prints one PASS/FAIL line
//! each, and exits nonzero if any fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use xrelay::cli;
use xrelay::design::Transceiver;
use xrelay::exchange::{run_exchange, MessageSet};
use xrelay::numerics::column_space_intersection;
use xrelay::rates::{ergodic_sweep, Scheme};
use xrelay::reduced::design_reduced;
use xrelay::sajic::{design_full, design_with_allocation};
use xrelay::{draw_channels, NetworkConfig, StreamAllocation, TolerancePolicy};

const ALIGN_TOL: f64 = 1e-9;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome, Option<Duration>);

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn alignment_correctness() -> Outcome {
    let tol = TolerancePolicy::default();
    let mut worst: f64 = 0.0;
    let mut designs = 0;
    for (m, n) in [(3, 4), (4, 6), (5, 7), (5, 8), (5, 9)] {
        let cfg = NetworkConfig::antennas(m, n).unwrap();
        for seed in 0..100 {
            let d = design_full(&draw_channels(&cfg, seed), &cfg, &tol)
                .map_err(|e| format!("M={m} N={n} seed={seed}: {e}"))?;
            let diag = d.diagnostics(&tol);
            let bc = diag.bc_alignment_residual.unwrap_or(f64::INFINITY);
            let max = diag.mac_residual.max(bc).max(diag.leakage);
            check(max <= ALIGN_TOL, || {
                format!("M={m} N={n} seed={seed}: residual {max:.3e}")
            })?;
            let total = d.link.total_streams();
            check(
                diag.mac_rank == total && diag.beamformer_rank == total,
                || {
                    format!(
                        "M={m} N={n} seed={seed}: ranks G_r {} U_r {} of {total}",
                        diag.mac_rank, diag.beamformer_rank
                    )
                },
            )?;
            worst = worst.max(max);
            designs += 1;
        }
    }
    Ok(format!("{designs} designs, worst residual {worst:.2e}"))
}

fn gaussian(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DMatrix<Complex64> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    DMatrix::from_fn(rows, cols, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        Complex64::new(re * s, im * s)
    })
}

/// Rank from singular values of the matrix itself, independent of the crate's helpers.
fn svd_rank(a: &DMatrix<Complex64>) -> usize {
    let sv = a.clone().svd(false, false).singular_values;
    let max = sv.iter().cloned().fold(0.0, f64::max);
    sv.iter().filter(|&&s| s > 1e-8 * max).count()
}

fn intersection_dimension() -> Outcome {
    let tol = TolerancePolicy::default();
    let shapes: [(usize, usize); 8] = [
        (3, 4),
        (4, 6),
        (5, 7),
        (5, 8),
        (2, 4),
        (4, 4),
        (6, 3),
        (3, 7),
    ];
    for (m, n) in shapes {
        let expected = (2 * m.min(n)).saturating_sub(n);
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + (m * 100 + n) as u64);
        for draw in 0..100 {
            let a = gaussian(n, m, &mut rng);
            let b = gaussian(n, m, &mut rng);
            let built = column_space_intersection(&a, &b, &tol).ncols();
            let mut ab = DMatrix::zeros(n, 2 * m);
            ab.columns_mut(0, m).copy_from(&a);
            ab.columns_mut(m, m).copy_from(&b);
            let oracle = svd_rank(&a) + svd_rank(&b) - svd_rank(&ab);
            check(built == expected && oracle == expected, || {
                format!(
                    "M={m} N={n} draw {draw}: built {built}, oracle {oracle}, formula {expected}"
                )
            })?;
        }
    }
    Ok(format!("{} shapes x 100 draws, exact match", shapes.len()))
}

fn feasibility_boundaries() -> Outcome {
    let tol = TolerancePolicy::default();
    let mut cases = 0;
    for m in 1..=8usize {
        for n in 1..2 * m {
            let sajic_pred = xrelay::analysis::sajic_achievable_dof(m, n)
                == xrelay::analysis::dof_upper_bound(m, n);
            let reduced_pred = xrelay::analysis::reduced_achievable_full(m, n);
            check(sajic_pred == (5 * n <= 8 * m), || {
                format!("SAJIC predicate at M={m} N={n}")
            })?;
            check(reduced_pred == (3 * n <= 4 * m), || {
                format!("reduced predicate at M={m} N={n}")
            })?;
            let cfg = NetworkConfig::antennas(m, n).unwrap();
            let full = StreamAllocation::full_dof(n);
            for seed in 0..20 {
                let ch = draw_channels(&cfg, 7000 + seed);
                let sajic_ok = design_with_allocation(&ch, &cfg, &full, &tol).is_ok();
                check(sajic_ok == sajic_pred, || {
                    format!("SAJIC full-DOF design at M={m} N={n} seed={seed}: built={sajic_ok}, predicate={sajic_pred}")
                })?;
                let reduced_ok = design_reduced(&ch, &cfg, &tol).is_ok();
                check(reduced_ok == reduced_pred, || {
                    format!("reduced design at M={m} N={n} seed={seed}: built={reduced_ok}, predicate={reduced_pred}")
                })?;
                cases += 1;
            }
        }
    }
    Ok(format!(
        "{cases} (M,N,seed) cases agree with 5N<=8M and 3N<=4M"
    ))
}

fn end_to_end_exchange() -> Outcome {
    let tol = TolerancePolicy::default();
    let mut messages = 0;
    for seed in 0..100u64 {
        let cfg = NetworkConfig::antennas(5, 8).unwrap();
        let d = design_full(&draw_channels(&cfg, seed), &cfg, &tol).map_err(|e| e.to_string())?;
        let msgs = MessageSet::random(&d.link.allocation, seed ^ 0xABCD);
        let rep = run_exchange(&d, &msgs, 0.0, 0, &tol).map_err(|e| e.to_string())?;
        check(rep.message_errors == 0 && rep.recovered == msgs, || {
            format!("SAJIC (5,8) seed {seed}: {} bit errors", rep.message_errors)
        })?;

        let cfg = NetworkConfig::antennas(3, 4).unwrap();
        let d =
            design_reduced(&draw_channels(&cfg, seed), &cfg, &tol).map_err(|e| e.to_string())?;
        let msgs = MessageSet::random(&d.link.allocation, seed ^ 0x1234);
        let rep = run_exchange(&d, &msgs, 0.0, 0, &tol).map_err(|e| e.to_string())?;
        check(rep.message_errors == 0 && rep.recovered == msgs, || {
            format!(
                "reduced (3,4) seed {seed}: {} bit errors",
                rep.message_errors
            )
        })?;
        messages += 16;
    }
    Ok(format!(
        "{messages} directed messages recovered with 0 bit errors"
    ))
}

fn slope_reproduction() -> Outcome {
    let tol = TolerancePolicy::default();
    let grid = [40.0, 45.0, 50.0, 55.0, 60.0];
    let mut parts = Vec::new();
    for (scheme, m, n, target) in [
        (Scheme::Sajic, 5, 8, 16.0),
        (Scheme::Reduced, 3, 4, 8.0),
        (Scheme::Timeshare, 5, 8, 10.0),
    ] {
        let cfg = NetworkConfig::antennas(m, n).unwrap();
        let curve =
            ergodic_sweep(&cfg, scheme, &grid, 1000, 2024, &tol).map_err(|e| e.to_string())?;
        let slope = curve.fitted_slope_per_3db.unwrap_or(f64::NAN);
        check((slope - target).abs() <= 0.1 * target, || {
            format!("{scheme} ({m},{n}) slope {slope:.3} outside {target} +/- 10%")
        })?;
        parts.push(format!("{scheme} ({m},{n}) {slope:.2} (target {target})"));
    }
    Ok(parts.join(", "))
}

fn relay_antenna_ordering() -> Outcome {
    let tol = TolerancePolicy::default();
    let mut at_top = Vec::new();
    for n in 5..=8 {
        let cfg = NetworkConfig::antennas(5, n).unwrap();
        let curve = ergodic_sweep(&cfg, Scheme::Sajic, &[50.0, 55.0, 60.0], 300, 606, &tol)
            .map_err(|e| e.to_string())?;
        at_top.push(curve.points.last().unwrap().mean_sum_rate);
    }
    check(at_top.windows(2).all(|w| w[1] > w[0]), || {
        format!("60 dB sum rates {at_top:?}")
    })?;
    Ok(format!(
        "60 dB sum rates for N=5..8: {}",
        at_top
            .iter()
            .map(|r| format!("{r:.1}"))
            .collect::<Vec<_>>()
            .join(" < ")
    ))
}

fn dof_table() -> Outcome {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = cli::run(
        ["xrelay", "analyze", "--M", "1..10", "--N", "1..20"],
        None,
        &mut out,
        &mut err,
    );
    check(code == 0, || format!("analyze exited {code}"))?;
    let text = String::from_utf8(out).unwrap();
    let mut rows = 0;
    for line in text.lines().skip(1) {
        let f: Vec<&str> = line.split_whitespace().collect();
        let num = |i: usize| f[i].parse::<usize>().unwrap();
        let (m, n) = (num(0), num(1));
        let upper = 2 * (2 * m).min(n);
        let sajic = if 5 * n <= 8 * m {
            2 * n
        } else if n < 2 * m {
            16 * m - 8 * n
        } else {
            0
        };
        let reduced = if 3 * n <= 4 * m { "yes" } else { "no" };
        let ts = 2 * m.min(n);
        check(
            num(2) == upper && num(3) == sajic && f[4] == reduced && num(5) == ts,
            || format!("row mismatch: {line}"),
        )?;
        rows += 1;
    }
    check(rows == 200, || format!("{rows} rows, expected 200"))?;
    Ok(format!("{rows} rows match the closed forms"))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 7] = [
        (
            "alignment correctness",
            alignment_correctness,
            Some(Duration::from_secs(10)),
        ),
        (
            "intersection dimension oracle",
            intersection_dimension,
            None,
        ),
        (
            "feasibility boundaries",
            feasibility_boundaries,
            Some(Duration::from_secs(60)),
        ),
        (
            "end-to-end exchange",
            end_to_end_exchange,
            Some(Duration::from_secs(10)),
        ),
        ("DOF slope reproduction", slope_reproduction, None),
        ("relay antenna ordering", relay_antenna_ordering, None),
        ("DOF table", dof_table, None),
    ];
    let mut failed = 0;
    for (i, (name, run, budget)) in criteria.into_iter().enumerate() {
        let start = Instant::now();
        let mut outcome = run();
        let elapsed = start.elapsed();
        if let (Ok(_), Some(limit)) = (&outcome, budget) {
            if elapsed > limit {
                outcome = Err(format!("took {elapsed:.1?}, budget {limit:?}"));
            }
        }
        match outcome {
            Ok(detail) => println!("criterion {} PASS  {name}: {detail} [{elapsed:.1?}]", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {} FAIL  {name}: {detail} [{elapsed:.1?}]", i + 1);
            }
        }
    }
    if failed == 0 {
        println!("acceptance: all criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {failed} criteria failed");
        ExitCode::FAILURE
    }
}
