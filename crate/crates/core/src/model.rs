//! Network configuration, seeded Rayleigh channels and per-pair stream counts.

use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::ComplexMatrix;
use num_complex::Complex64;

/// One of the four source nodes. Nodes 1 and 2 form the left group, 3 and 4 the right.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Node {
    N1,
    N2,
    N3,
    N4,
}

impl Node {
    pub const ALL: [Node; 4] = [Node::N1, Node::N2, Node::N3, Node::N4];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn number(self) -> usize {
        self.index() + 1
    }

    pub fn is_left(self) -> bool {
        matches!(self, Node::N1 | Node::N2)
    }

    /// Pairs this node belongs to, in canonical pair order.
    pub fn pairs(self) -> [Pair; 2] {
        match self {
            Node::N1 => [Pair::P13, Pair::P14],
            Node::N2 => [Pair::P23, Pair::P24],
            Node::N3 => [Pair::P13, Pair::P23],
            Node::N4 => [Pair::P14, Pair::P24],
        }
    }

    /// Pairs whose broadcast is interference at this node.
    pub fn interfering_pairs(self) -> [Pair; 2] {
        match self {
            Node::N1 => [Pair::P23, Pair::P24],
            Node::N2 => [Pair::P13, Pair::P14],
            Node::N3 => [Pair::P14, Pair::P24],
            Node::N4 => [Pair::P13, Pair::P23],
        }
    }
}

impl fmt::Display for Node {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.number())
    }
}

/// A communicating pair (one left node, one right node). The pair exchanges two
/// messages, one per direction, and the relay forwards their XOR.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Pair {
    P13,
    P14,
    P23,
    P24,
}

impl Pair {
    pub const ALL: [Pair; 4] = [Pair::P13, Pair::P14, Pair::P23, Pair::P24];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn left(self) -> Node {
        match self {
            Pair::P13 | Pair::P14 => Node::N1,
            Pair::P23 | Pair::P24 => Node::N2,
        }
    }

    pub fn right(self) -> Node {
        match self {
            Pair::P13 | Pair::P23 => Node::N3,
            Pair::P14 | Pair::P24 => Node::N4,
        }
    }

    pub fn nodes(self) -> [Node; 2] {
        [self.left(), self.right()]
    }

    pub fn contains(self, node: Node) -> bool {
        self.left() == node || self.right() == node
    }

    pub fn partner(self, node: Node) -> Option<Node> {
        if node == self.left() {
            Some(self.right())
        } else if node == self.right() {
            Some(self.left())
        } else {
            None
        }
    }
}

impl fmt::Display for Pair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.left(), self.right())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    /// Antennas at every source node.
    pub source_antennas: usize,
    /// Antennas at the relay.
    pub relay_antennas: usize,
    /// Transmit power budget of each source and of the relay.
    pub power: f64,
    /// Noise variance per receive antenna.
    pub noise_var: f64,
}

impl NetworkConfig {
    pub fn new(source_antennas: usize, relay_antennas: usize, power: f64) -> Result<Self> {
        Self::with_noise(source_antennas, relay_antennas, power, 1.0)
    }

    pub fn with_noise(
        source_antennas: usize,
        relay_antennas: usize,
        power: f64,
        noise_var: f64,
    ) -> Result<Self> {
        if source_antennas == 0 || relay_antennas == 0 {
            return Err(Error::InvalidConfig(
                "antenna counts must be at least 1".into(),
            ));
        }
        if !(power > 0.0 && power.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "power must be positive, got {power}"
            )));
        }
        if !(noise_var > 0.0 && noise_var.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "noise variance must be positive, got {noise_var}"
            )));
        }
        Ok(Self {
            source_antennas,
            relay_antennas,
            power,
            noise_var,
        })
    }

    /// Unit power, unit noise. Convenient for structural work where SNR is irrelevant.
    pub fn antennas(source_antennas: usize, relay_antennas: usize) -> Result<Self> {
        Self::new(source_antennas, relay_antennas, 1.0)
    }

    /// Sets power so that `power / noise_var` equals the given SNR in dB.
    pub fn at_snr_db(mut self, snr_db: f64) -> Self {
        self.power = self.noise_var * 10f64.powf(snr_db / 10.0);
        self
    }
}

/// One draw of the eight channel matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    /// `uplink[i]` is the N×M channel from node i+1 to the relay.
    pub uplink: [ComplexMatrix; 4],
    /// `downlink[i]` is the M×N channel from the relay to node i+1.
    pub downlink: [ComplexMatrix; 4],
    pub seed: u64,
}

impl ChannelRealization {
    pub fn up(&self, node: Node) -> &ComplexMatrix {
        &self.uplink[node.index()]
    }

    pub fn down(&self, node: Node) -> &ComplexMatrix {
        &self.downlink[node.index()]
    }

    pub fn source_antennas(&self) -> usize {
        self.uplink[0].ncols()
    }

    pub fn relay_antennas(&self) -> usize {
        self.uplink[0].nrows()
    }
}

/// Draws i.i.d. CN(0,1) channels from a ChaCha8 stream seeded with `seed`.
///
/// Draw order is fixed: uplinks for nodes 1..4, then downlinks for nodes 1..4,
/// each matrix filled column-major, real part before imaginary part. Both
/// parts are N(0, 1/2).
pub fn draw_channels(cfg: &NetworkConfig, seed: u64) -> ChannelRealization {
    let (m, n) = (cfg.source_antennas, cfg.relay_antennas);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |rows: usize, cols: usize| {
        let entries: Vec<Complex64> = (0..rows * cols)
            .map(|_| {
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = StandardNormal.sample(&mut rng);
                Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
            })
            .collect();
        ComplexMatrix::from_vec(rows, cols, entries)
    };
    let uplink = std::array::from_fn(|_| draw(n, m));
    let downlink = std::array::from_fn(|_| draw(m, n));
    ChannelRealization {
        uplink,
        downlink,
        seed,
    }
}

/// Streams per pair (same count in both directions), plus the relay-nulling
/// split used by the reduced scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StreamAllocation {
    pub per_pair: [usize; 4],
    /// Per pair: how many of its broadcast streams the relay nulls toward the
    /// pair's left-group victim (node 1 or 2).
    pub relay_null_splits: Option<[usize; 4]>,
}

impl StreamAllocation {
    pub fn new(d13: usize, d14: usize, d23: usize, d24: usize) -> Self {
        Self {
            per_pair: [d13, d14, d23, d24],
            relay_null_splits: None,
        }
    }

    pub fn uniform(d: usize) -> Self {
        Self::new(d, d, d, d)
    }

    /// The N mod 4 table that fills all N relay dimensions.
    pub fn full_dof(relay_antennas: usize) -> Self {
        let f = relay_antennas / 4;
        match relay_antennas % 4 {
            0 => Self::new(f, f, f, f),
            1 => Self::new(f, f, f, f + 1),
            2 => Self::new(f, f + 1, f + 1, f),
            _ => Self::new(f, f + 1, f + 1, f + 1),
        }
    }

    pub fn count(&self, pair: Pair) -> usize {
        self.per_pair[pair.index()]
    }

    /// Streams relayed per direction; the total DOF is twice this.
    pub fn total(&self) -> usize {
        self.per_pair.iter().sum()
    }

    /// Streams a node receives (equivalently, transmits).
    pub fn node_streams(&self, node: Node) -> usize {
        node.pairs().iter().map(|&p| self.count(p)).sum()
    }

    /// First column of `pair`'s block in relay-side matrices (G_r, U_r).
    pub fn offset(&self, pair: Pair) -> usize {
        self.per_pair[..pair.index()].iter().sum()
    }

    pub fn with_splits(mut self, splits: [usize; 4]) -> Self {
        self.relay_null_splits = Some(splits);
        self
    }
}

/// Per-pair streams for SAJIC: the full-DOF table when `5N ≤ 8M`, otherwise
/// `2M − N` per pair.
pub fn allocate_streams(cfg: &NetworkConfig) -> Result<StreamAllocation> {
    let (m, n) = (cfg.source_antennas, cfg.relay_antennas);
    if n >= 2 * m {
        return Err(Error::InfeasibleRegime { m, n });
    }
    if 5 * n <= 8 * m {
        Ok(StreamAllocation::full_dof(n))
    } else {
        Ok(StreamAllocation::uniform(2 * m - n))
    }
}
