//! Closed-form DOF arithmetic. All values use the full-duplex convention: a
//! pair exchanging `d` streams each way contributes `2d`.

use serde::Serialize;

/// Cut-set bound on the total DOF.
pub fn dof_upper_bound(m: usize, n: usize) -> usize {
    2 * (2 * m).min(n)
}

/// Total DOF SAJIC reaches: `2N` up to `⌊8M/5⌋`, `16M − 8N` until `N = 2M`,
/// nothing beyond.
pub fn sajic_achievable_dof(m: usize, n: usize) -> usize {
    if 5 * n <= 8 * m {
        2 * n
    } else if n < 2 * m {
        16 * m - 8 * n
    } else {
        0
    }
}

/// Whether the reduced (relay-nulling only) scheme reaches the upper bound.
pub fn reduced_achievable_full(m: usize, n: usize) -> bool {
    3 * n <= 4 * m
}

/// One pair at a time over the relay, time-shared across the four pairs.
pub fn time_share_dof(m: usize, n: usize) -> usize {
    2 * m.min(n)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct DofReport {
    pub source_antennas: usize,
    pub relay_antennas: usize,
    pub upper_bound: usize,
    pub sajic_dof: usize,
    /// `Some(2N)` when the reduced scheme is full-DOF; no partial value is defined otherwise.
    pub reduced_dof: Option<usize>,
    pub time_share_dof: usize,
    pub sajic_full: bool,
    pub reduced_full: bool,
}

pub fn dof_report(m: usize, n: usize) -> DofReport {
    let upper_bound = dof_upper_bound(m, n);
    let sajic_dof = sajic_achievable_dof(m, n);
    let reduced_full = reduced_achievable_full(m, n) && n <= 2 * m;
    DofReport {
        source_antennas: m,
        relay_antennas: n,
        upper_bound,
        sajic_dof,
        reduced_dof: reduced_full.then_some(upper_bound),
        time_share_dof: time_share_dof(m, n),
        sajic_full: n <= 2 * m && sajic_dof == upper_bound,
        reduced_full,
    }
}

impl DofReport {
    /// Half-duplex presentation: every count halved.
    pub fn half_duplex(mut self) -> Self {
        self.upper_bound /= 2;
        self.sajic_dof /= 2;
        self.reduced_dof = self.reduced_dof.map(|d| d / 2);
        self.time_share_dof /= 2;
        self
    }
}
