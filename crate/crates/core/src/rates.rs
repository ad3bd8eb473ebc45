//! Finite-SNR rates and Monte Carlo ergodic sum-rate sweeps.
//!
//! Rate model (decode-and-forward, per pair):
//! * MAC: the relay zero-forces with `F_r = G_r⁺`; stream `k` carries the sum
//!   of two unit-amplitude symbols, so its SNR is `2·p_stream / (σ²‖f_k‖²)`.
//! * BC: node `i` filters with `D_i` and zero-forces its desired block. The
//!   post-detection noise covariance `σ² A Aᴴ` (with `A = T_i⁺ D_i`) is kept,
//!   and each pair's rate is `log2 det(I + p_relay · C_pair⁻¹)`.
//! * Pair rate is the minimum of the MAC rate and both nodes' BC rates; the
//!   sum rate counts each pair twice (one message per direction).
//!
//! Sweeps are reproducible: trial `t` at grid point `s` uses channel seed
//! `sub_seed(master, s, t, attempt)`, and per-point averages are folded in
//! trial order no matter how the trials were scheduled.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::design::{LinkDesign, Transceiver};
use crate::error::{Error, Result};
use crate::model::{draw_channels, ChannelRealization, NetworkConfig, Node, Pair};
use crate::numerics::{
    column_space_intersection_with_coefficients, hstack, null_space_basis, pseudo_inverse, vstack,
    ComplexMatrix, TolerancePolicy,
};
use crate::reduced::design_reduced;
use crate::sajic::design_full;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Sajic,
    Reduced,
    Timeshare,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::Sajic, Scheme::Reduced, Scheme::Timeshare];

    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::Sajic => "sajic",
            Scheme::Reduced => "reduced",
            Scheme::Timeshare => "timeshare",
        }
    }

    /// Rejects antenna configurations the scheme has no construction for.
    pub fn check_feasible(self, m: usize, n: usize) -> Result<()> {
        match self {
            Scheme::Sajic if n >= 2 * m => Err(Error::InfeasibleRegime { m, n }),
            Scheme::Reduced if n >= 2 * m => Err(Error::InfeasibleRegime { m, n }),
            Scheme::Reduced if 3 * n > 4 * m => Err(Error::ReducedInfeasible { m, n }),
            _ => Ok(()),
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scheme {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "sajic" => Ok(Scheme::Sajic),
            "reduced" => Ok(Scheme::Reduced),
            "timeshare" => Ok(Scheme::Timeshare),
            other => Err(format!("unknown scheme '{other}'")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairRates {
    pub mac: [f64; 4],
    /// `bc[pair] = [left node, right node]`.
    pub bc: [[f64; 2]; 4],
    /// `min(mac, bc_left, bc_right)` per pair; both directions run at this rate.
    pub pair: [f64; 4],
}

impl PairRates {
    pub fn sum_rate(&self) -> f64 {
        2.0 * self.pair.iter().sum::<f64>()
    }
}

fn log2_det_hpd(a: &ComplexMatrix) -> Result<f64> {
    if a.nrows() == 0 {
        return Ok(0.0);
    }
    let chol = a
        .clone()
        .cholesky()
        .ok_or_else(|| Error::DesignInvalid("noise covariance is not positive definite".into()))?;
    let l = chol.l();
    Ok(2.0 * (0..l.nrows()).map(|k| l[(k, k)].re.ln()).sum::<f64>() / std::f64::consts::LN_2)
}

/// `log2 det(I + p · C⁻¹) = log2 det(C + p I) − log2 det(C)`.
fn whitened_rate(cov: &ComplexMatrix, power: f64) -> Result<f64> {
    let d = cov.nrows();
    let shifted = cov + ComplexMatrix::identity(d, d).scale(power);
    Ok(log2_det_hpd(&shifted)? - log2_det_hpd(cov)?)
}

fn hermitian(a: ComplexMatrix) -> ComplexMatrix {
    (&a + a.adjoint()).scale(0.5)
}

/// Per-pair rates of a design at the power and noise level in `cfg`.
pub fn instantaneous_rates<D: Transceiver + ?Sized>(
    design: &D,
    cfg: &NetworkConfig,
    tol: &TolerancePolicy,
) -> Result<PairRates> {
    let link = design.link();
    let alloc = &link.allocation;
    let (p_stream, p_relay) = LinkDesign::powers(cfg, alloc);
    let noise = cfg.noise_var;

    let detector = pseudo_inverse(&link.mac_basis, tol);
    let mut mac = [0.0; 4];
    for pair in Pair::ALL {
        let at = alloc.offset(pair);
        mac[pair.index()] = (at..at + alloc.count(pair))
            .map(|k| {
                let f2 = detector.row(k).norm_squared();
                (1.0 + 2.0 * p_stream / (noise * f2)).log2()
            })
            .sum();
    }

    let mut bc = [[0.0; 2]; 4];
    for node in Node::ALL {
        let t = link.effective_desired(node);
        let a = pseudo_inverse(&t, tol) * link.receive_filter(node);
        let cov = hermitian((&a * a.adjoint()).scale(noise));
        let mut at = 0;
        for pair in node.pairs() {
            let d = alloc.count(pair);
            let block = cov.view((at, at), (d, d)).into_owned();
            let side = usize::from(!node.is_left());
            bc[pair.index()][side] = whitened_rate(&block, p_relay)?;
            at += d;
        }
    }

    let pair = Pair::ALL.map(|p| {
        let [l, r] = bc[p.index()];
        mac[p.index()].min(l).min(r)
    });
    Ok(PairRates { mac, bc, pair })
}

/// Time-shared baseline: in each of four slots one pair runs a MIMO two-way
/// relay exchange with `min(M, N)` streams per direction; the slots' sum
/// rates are averaged.
///
/// Within a slot the pair aligns as many streams as its uplink intersection
/// allows; the rest are decoded individually at the relay (which then XORs
/// them). The relay broadcasts along the leading right singular vectors of
/// the two stacked downlinks and both nodes zero-force.
pub fn timeshare_sum_rate(
    ch: &ChannelRealization,
    cfg: &NetworkConfig,
    tol: &TolerancePolicy,
) -> Result<f64> {
    let total: f64 = Pair::ALL
        .iter()
        .map(|&p| timeshare_slot_rate(ch, cfg, p, tol))
        .sum::<Result<f64>>()?;
    Ok(total / 4.0)
}

fn timeshare_slot_rate(
    ch: &ChannelRealization,
    cfg: &NetworkConfig,
    pair: Pair,
    tol: &TolerancePolicy,
) -> Result<f64> {
    let (m, n) = (cfg.source_antennas, cfg.relay_antennas);
    let streams = m.min(n);
    let p = cfg.power / streams as f64;
    let noise = cfg.noise_var;
    let (hl, hr) = (ch.up(pair.left()), ch.up(pair.right()));

    let it = column_space_intersection_with_coefficients(hl, hr, tol);
    let aligned = it.basis.ncols().min(streams);
    let single = streams - aligned;

    let mut g = it.basis.columns(0, aligned).into_owned();
    let mut vl = it.from_a.columns(0, aligned).into_owned();
    let mut vr = it.from_b.columns(0, aligned).into_owned();
    for k in 0..aligned {
        let s = 1.0 / vl.column(k).norm().max(vr.column(k).norm());
        g.column_mut(k).scale_mut(s);
        vl.column_mut(k).scale_mut(s);
        vr.column_mut(k).scale_mut(s);
    }
    // Remaining streams use directions orthogonal to the aligned precoders.
    let extra = |v: &ComplexMatrix| -> ComplexMatrix {
        let comp = null_space_basis(&v.adjoint(), tol);
        comp.columns(0, single.min(comp.ncols())).into_owned()
    };
    let (el, er) = if aligned == 0 {
        let id = ComplexMatrix::identity(m, m);
        let cols = id.columns(0, single).into_owned();
        (cols.clone(), cols)
    } else {
        (extra(&vl), extra(&vr))
    };
    if el.ncols() < single || er.ncols() < single {
        return Err(Error::RankDeficient {
            what: "time-share precoders",
            rank: el.ncols().min(er.ncols()),
            expected: single,
        });
    }
    let relay_rx = hstack(&[&g, &(hl * &el), &(hr * &er)], n);
    let detector = pseudo_inverse(&relay_rx, tol);
    let snr =
        |k: usize, gain: f64| (1.0 + gain * p / (noise * detector.row(k).norm_squared())).log2();
    let mac: Vec<f64> = (0..streams)
        .map(|k| {
            if k < aligned {
                snr(k, 2.0)
            } else {
                let j = k - aligned;
                snr(aligned + j, 1.0).min(snr(aligned + single + j, 1.0))
            }
        })
        .collect();

    let (dl, dr) = (ch.down(pair.left()), ch.down(pair.right()));
    let stacked = vstack(&[dl, dr], n);
    // min(M, N) never exceeds the min(2M, N) right singular vectors available.
    let u = {
        let svd = stacked.svd(false, true);
        let vt = svd.v_t.expect("v_t requested");
        let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
        order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
        ComplexMatrix::from_fn(n, streams, |r, c| vt[(order[c], r)].conj())
    };
    let p_relay = cfg.power / streams as f64;
    let bc_rates = |h: &ComplexMatrix| -> Vec<f64> {
        let a = pseudo_inverse(&(h * &u), tol);
        (0..streams)
            .map(|k| (1.0 + p_relay / (noise * a.row(k).norm_squared())).log2())
            .collect()
    };
    let (bl, br) = (bc_rates(dl), bc_rates(dr));
    let per_stream: f64 = (0..streams).map(|k| mac[k].min(bl[k]).min(br[k])).sum();
    Ok(2.0 * per_stream)
}

/// Instantaneous sum rate of one scheme on one channel draw.
pub fn scheme_sum_rate(
    scheme: Scheme,
    ch: &ChannelRealization,
    cfg: &NetworkConfig,
    tol: &TolerancePolicy,
) -> Result<f64> {
    match scheme {
        Scheme::Sajic => {
            let d = design_full(ch, cfg, tol)?;
            Ok(instantaneous_rates(&d, cfg, tol)?.sum_rate())
        }
        Scheme::Reduced => {
            let d = design_reduced(ch, cfg, tol)?;
            Ok(instantaneous_rates(&d, cfg, tol)?.sum_rate())
        }
        Scheme::Timeshare => timeshare_sum_rate(ch, cfg, tol),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatePoint {
    pub snr_db: f64,
    pub mean_sum_rate: f64,
    pub trials: usize,
    pub std_err: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateCurve {
    pub scheme: Scheme,
    pub source_antennas: usize,
    pub relay_antennas: usize,
    pub points: Vec<RatePoint>,
    /// Least-squares slope over the upper half of the grid, scaled to 3 dB.
    pub fitted_slope_per_3db: Option<f64>,
    /// Draws discarded for numerical degeneracy and replaced.
    pub redraws: usize,
}

/// How sweep trials are scheduled. Results are identical either way.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    #[cfg_attr(not(feature = "parallel"), default)]
    Sequential,
    #[cfg(feature = "parallel")]
    #[default]
    Parallel,
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Channel seed for one trial. Chained SplitMix64 over
/// `(master, grid index, trial index, attempt)`.
pub fn sub_seed(master: u64, point: u64, trial: u64, attempt: u64) -> u64 {
    splitmix(splitmix(splitmix(splitmix(master) ^ point) ^ trial) ^ attempt)
}

const MAX_ATTEMPTS: u64 = 32;

/// One trial: draws, designs and evaluates, redrawing on numerical degeneracy.
fn run_trial(
    scheme: Scheme,
    cfg: &NetworkConfig,
    seed: u64,
    point: u64,
    trial: u64,
    tol: &TolerancePolicy,
) -> Result<(f64, usize)> {
    let mut last = None;
    for attempt in 0..MAX_ATTEMPTS {
        let ch = draw_channels(cfg, sub_seed(seed, point, trial, attempt));
        match scheme_sum_rate(scheme, &ch, cfg, tol) {
            Ok(rate) => return Ok((rate, attempt as usize)),
            Err(e) if e.is_degenerate() => last = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(last.expect("at least one attempt"))
}

fn validate_grid(snr_grid_db: &[f64], trials: usize) -> Result<()> {
    if snr_grid_db.is_empty() {
        return Err(Error::InvalidConfig("SNR grid is empty".into()));
    }
    if snr_grid_db.windows(2).any(|w| w[1] <= w[0]) || snr_grid_db.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidConfig(
            "SNR grid must be finite and strictly increasing".into(),
        ));
    }
    if trials == 0 {
        return Err(Error::InvalidConfig("trials must be at least 1".into()));
    }
    Ok(())
}

pub fn ergodic_sweep(
    cfg: &NetworkConfig,
    scheme: Scheme,
    snr_grid_db: &[f64],
    trials: usize,
    seed: u64,
    tol: &TolerancePolicy,
) -> Result<RateCurve> {
    ergodic_sweep_with(
        Execution::default(),
        cfg,
        scheme,
        snr_grid_db,
        trials,
        seed,
        tol,
    )
}

pub fn timeshare_sweep(
    cfg: &NetworkConfig,
    snr_grid_db: &[f64],
    trials: usize,
    seed: u64,
    tol: &TolerancePolicy,
) -> Result<RateCurve> {
    ergodic_sweep(cfg, Scheme::Timeshare, snr_grid_db, trials, seed, tol)
}

pub fn ergodic_sweep_with(
    exec: Execution,
    cfg: &NetworkConfig,
    scheme: Scheme,
    snr_grid_db: &[f64],
    trials: usize,
    seed: u64,
    tol: &TolerancePolicy,
) -> Result<RateCurve> {
    let (m, n) = (cfg.source_antennas, cfg.relay_antennas);
    scheme.check_feasible(m, n)?;
    validate_grid(snr_grid_db, trials)?;

    let jobs: Vec<(usize, usize)> = (0..snr_grid_db.len())
        .flat_map(|s| (0..trials).map(move |t| (s, t)))
        .collect();
    let eval = |&(s, t): &(usize, usize)| {
        let point_cfg = cfg.at_snr_db(snr_grid_db[s]);
        run_trial(scheme, &point_cfg, seed, s as u64, t as u64, tol)
    };
    let outcomes: Vec<Result<(f64, usize)>> = match exec {
        Execution::Sequential => jobs.iter().map(eval).collect(),
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            jobs.par_iter().map(eval).collect()
        }
    };

    let mut redraws = 0;
    let mut points = Vec::with_capacity(snr_grid_db.len());
    let mut outcomes = outcomes.into_iter();
    for &snr_db in snr_grid_db {
        let mut samples = Vec::with_capacity(trials);
        for outcome in outcomes.by_ref().take(trials) {
            let (rate, extra) = outcome?;
            samples.push(rate);
            redraws += extra;
        }
        let (mean, std_err) = mean_and_std_err(&samples);
        points.push(RatePoint {
            snr_db,
            mean_sum_rate: mean,
            trials,
            std_err,
        });
    }
    let fitted_slope_per_3db = fit_slope_per_3db(&points);
    Ok(RateCurve {
        scheme,
        source_antennas: m,
        relay_antennas: n,
        points,
        fitted_slope_per_3db,
        redraws,
    })
}

fn mean_and_std_err(samples: &[f64]) -> (f64, f64) {
    let k = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / k;
    if samples.len() < 2 {
        return (mean, 0.0);
    }
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1.0);
    (mean, (var / k).sqrt())
}

/// Least-squares slope of rate vs SNR (dB) over the upper half of the grid
/// (at least two points), multiplied by 3.
pub fn fit_slope_per_3db(points: &[RatePoint]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let start = (points.len() / 2).min(points.len() - 2);
    let tail = &points[start..];
    let k = tail.len() as f64;
    let mx = tail.iter().map(|p| p.snr_db).sum::<f64>() / k;
    let my = tail.iter().map(|p| p.mean_sum_rate).sum::<f64>() / k;
    let sxy: f64 = tail
        .iter()
        .map(|p| (p.snr_db - mx) * (p.mean_sum_rate - my))
        .sum();
    let sxx: f64 = tail.iter().map(|p| (p.snr_db - mx).powi(2)).sum();
    Some(3.0 * sxy / sxx)
}
