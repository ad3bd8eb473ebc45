//! Reduced scheme: SAJIC's MAC alignment, but no joint receive design in the
//! BC phase. The relay steers some of each pair's streams into the null space
//! of one victim's downlink; every node removes the rest of its interference
//! on its own with a left-null-space filter.
//!
//! Each relay column is nulled toward at most one victim. Victim choices per
//! pair: the left-group node it interferes with (node 2 for pairs (1,3) and
//! (1,4), node 1 for (2,3) and (2,4)) or the right-group one (node 4 for (1,3)
//! and (2,3), node 3 for (1,4) and (2,4)). The split records how many go left.

use crate::design::{Diagnostics, LinkDesign, Transceiver};
use crate::error::{Error, Result};
use crate::model::{ChannelRealization, NetworkConfig, Node, Pair, StreamAllocation};
use crate::numerics::{
    column_space_basis, hstack, left_null_space_basis, null_space_basis, numerical_rank,
    ComplexMatrix, TolerancePolicy,
};
use crate::sajic::design_mac;

#[derive(Debug, Clone)]
pub struct ReducedDesign {
    pub link: LinkDesign,
    /// Per relay column: the node whose downlink null space it lies in.
    pub nulled_toward: Vec<Option<Node>>,
}

fn left_victim(pair: Pair) -> Node {
    match pair {
        Pair::P13 | Pair::P14 => Node::N2,
        Pair::P23 | Pair::P24 => Node::N1,
    }
}

fn right_victim(pair: Pair) -> Node {
    match pair {
        Pair::P13 | Pair::P23 => Node::N4,
        Pair::P14 | Pair::P24 => Node::N3,
    }
}

/// Order in which pairs take slots in a victim's relay-side null space.
/// Matches the symmetric assignment (1,3)→4, (1,4)→2, (2,3)→1, (2,4)→3.
fn fill_order(victim: Node) -> [Pair; 2] {
    match victim {
        Node::N1 => [Pair::P23, Pair::P24],
        Node::N2 => [Pair::P14, Pair::P13],
        Node::N3 => [Pair::P24, Pair::P14],
        Node::N4 => [Pair::P13, Pair::P23],
    }
}

/// Interference dimension the relay must null at each node: streams beyond
/// what an M-antenna receiver can separate.
fn relay_nulling_need(m: usize, alloc: &StreamAllocation) -> usize {
    alloc.total().saturating_sub(m)
}

/// Left-victim split per pair, found by exhaustive search.
///
/// Constraints (with `r = total − M`): nodes 1 and 2 each get exactly `r`
/// relay-nulled streams from their left splits; nodes 3 and 4 can absorb the
/// left-nulled streams of their interferers only within their spare
/// dimensions `M − (own streams)`. Among feasible splits the one closest to
/// the symmetric assignment (most streams on (1,4) and (2,3)) wins.
pub fn reduced_split_budget(m: usize, n: usize, alloc: &StreamAllocation) -> Result<[usize; 4]> {
    let r = relay_nulling_need(m, alloc);
    if r == 0 {
        return Ok([0; 4]);
    }
    // Each victim's relay-side null space has N − M dimensions.
    if n <= m || r > n - m {
        return Err(Error::ReducedInfeasible { m, n });
    }
    let d = alloc.per_pair;
    let spare = |node: Node| m as i64 - alloc.node_streams(node) as i64;

    let mut best: Option<([usize; 4], usize)> = None;
    for s13 in 0..=d[0] {
        for s14 in 0..=d[1] {
            if s13 + s14 != r {
                continue;
            }
            for s23 in 0..=d[2] {
                for s24 in 0..=d[3] {
                    if s23 + s24 != r {
                        continue;
                    }
                    if (s14 + s24) as i64 > spare(Node::N3) || (s13 + s23) as i64 > spare(Node::N4)
                    {
                        continue;
                    }
                    // Right victims need r streams from what is left over.
                    if (d[1] - s14) + (d[3] - s24) < r || (d[0] - s13) + (d[2] - s23) < r {
                        continue;
                    }
                    let score = s14 + s23;
                    if best.is_none_or(|(_, b)| score > b) {
                        best = Some(([s13, s14, s23, s24], score));
                    }
                }
            }
        }
    }
    best.map(|(s, _)| s)
        .ok_or(Error::ReducedInfeasible { m, n })
}

/// Victim of every relay column given a split.
fn assign_victims(m: usize, alloc: &StreamAllocation, splits: &[usize; 4]) -> Vec<Option<Node>> {
    let r = relay_nulling_need(m, alloc);
    let mut victims = vec![None; alloc.total()];
    for pair in Pair::ALL {
        let at = alloc.offset(pair);
        for slot in &mut victims[at..at + splits[pair.index()]] {
            *slot = Some(left_victim(pair));
        }
    }
    for victim in [Node::N3, Node::N4] {
        let mut need = r;
        for pair in fill_order(victim) {
            let at = alloc.offset(pair) + splits[pair.index()];
            let free = alloc.count(pair) - splits[pair.index()];
            let take = need.min(free);
            for slot in &mut victims[at..at + take] {
                *slot = Some(right_victim(pair));
            }
            need -= take;
        }
    }
    victims
}

pub fn design_reduced(
    ch: &ChannelRealization,
    cfg: &NetworkConfig,
    tol: &TolerancePolicy,
) -> Result<ReducedDesign> {
    let (m, n) = (cfg.source_antennas, cfg.relay_antennas);
    if n >= 2 * m {
        return Err(Error::InfeasibleRegime { m, n });
    }
    let alloc = StreamAllocation::full_dof(n);
    let splits = reduced_split_budget(m, n, &alloc)?;
    let alloc = alloc.with_splits(splits);
    let mac = design_mac(ch, &alloc, tol)?;

    let victims = assign_victims(m, &alloc, &splits);
    let relay_beamformers = relay_beamformers(ch, &victims, n, tol)?;

    let desired_cols = |node: Node| {
        let [p, q] = node.pairs();
        let cols = |pair: Pair| {
            relay_beamformers
                .columns(alloc.offset(pair), alloc.count(pair))
                .into_owned()
        };
        hstack(&[&cols(p), &cols(q)], n)
    };
    let mut receive_filters: [ComplexMatrix; 4] =
        std::array::from_fn(|_| ComplexMatrix::zeros(0, m));
    for node in Node::ALL {
        let residual = residual_interference(&relay_beamformers, &alloc, &victims, node);
        let h = ch.down(node);
        let free = left_null_space_basis(&(h * &residual), tol);
        let want = alloc.node_streams(node);
        if free.nrows() < want {
            return Err(Error::RankDeficient {
                what: "receive filter free space",
                rank: free.nrows(),
                expected: want,
            });
        }
        let filter = if free.nrows() == want {
            free
        } else {
            // Keep the `want` directions of the free space that carry the most signal.
            let seen = &free * h * desired_cols(node);
            let basis = column_space_basis(&seen, tol);
            if basis.ncols() < want {
                return Err(Error::RankDeficient {
                    what: "desired link",
                    rank: basis.ncols(),
                    expected: want,
                });
            }
            basis.columns(0, want).adjoint() * &free
        };
        receive_filters[node.index()] = filter;
    }

    let (stream_power, relay_power) = LinkDesign::powers(cfg, &alloc);
    let design = ReducedDesign {
        link: LinkDesign {
            config: *cfg,
            channels: ch.clone(),
            allocation: alloc,
            precoders: mac.precoders,
            mac_basis: mac.mac_basis,
            receive_filters,
            relay_beamformers,
            stream_power,
            relay_power,
        },
        nulled_toward: victims,
    };
    design.validate(tol)?;
    Ok(design)
}

/// Relay columns: victim null-space slots first, then an orthonormal fill of
/// the remaining space for unconstrained columns.
fn relay_beamformers(
    ch: &ChannelRealization,
    victims: &[Option<Node>],
    n: usize,
    tol: &TolerancePolicy,
) -> Result<ComplexMatrix> {
    let total = victims.len();
    let mut u = ComplexMatrix::zeros(n, total);
    let mut used = [0usize; 4];
    let nulls = Node::ALL.map(|node| null_space_basis(ch.down(node), tol));
    for (col, victim) in victims.iter().enumerate() {
        if let Some(v) = victim {
            let basis = &nulls[v.index()];
            let k = used[v.index()];
            if k >= basis.ncols() {
                return Err(Error::RankDeficient {
                    what: "victim null space",
                    rank: basis.ncols(),
                    expected: k + 1,
                });
            }
            u.set_column(col, &basis.column(k));
            used[v.index()] += 1;
        }
    }
    let constrained: Vec<usize> = (0..total).filter(|&c| victims[c].is_some()).collect();
    let fixed = ComplexMatrix::from_fn(n, constrained.len(), |r, c| u[(r, constrained[c])]);
    let fill = null_space_basis(&fixed.adjoint(), tol);
    let mut next = 0;
    for (col, victim) in victims.iter().enumerate() {
        if victim.is_none() {
            if next >= fill.ncols() {
                return Err(Error::RankDeficient {
                    what: "U_r",
                    rank: constrained.len() + fill.ncols(),
                    expected: total,
                });
            }
            u.set_column(col, &fill.column(next));
            next += 1;
        }
    }
    let rank = numerical_rank(&u, tol);
    if rank != total {
        return Err(Error::RankDeficient {
            what: "U_r",
            rank,
            expected: total,
        });
    }
    Ok(u)
}

/// Interfering relay columns at `node` that the relay did not null there.
fn residual_interference(
    u: &ComplexMatrix,
    alloc: &StreamAllocation,
    victims: &[Option<Node>],
    node: Node,
) -> ComplexMatrix {
    let cols: Vec<usize> = node
        .interfering_pairs()
        .iter()
        .flat_map(|&p| alloc.offset(p)..alloc.offset(p) + alloc.count(p))
        .filter(|&c| victims[c] != Some(node))
        .collect();
    ComplexMatrix::from_fn(u.nrows(), cols.len(), |r, c| u[(r, cols[c])])
}

impl ReducedDesign {
    /// Interference dimensions `node` must cancel itself.
    pub fn residual_interference_dims(&self, node: Node) -> usize {
        residual_interference(
            &self.link.relay_beamformers,
            &self.link.allocation,
            &self.nulled_toward,
            node,
        )
        .ncols()
    }

    /// Receive dimensions left after the desired streams.
    pub fn free_dims(&self, node: Node) -> usize {
        self.link.config.source_antennas - self.link.allocation.node_streams(node)
    }

    /// Worst `‖H_{r,m} u‖ / ‖u‖` over relay columns nulled toward m.
    pub fn relay_null_residual(&self) -> f64 {
        let u = &self.link.relay_beamformers;
        self.nulled_toward
            .iter()
            .enumerate()
            .filter_map(|(c, v)| v.map(|node| (c, node)))
            .map(|(c, node)| {
                let col = u.column(c);
                (self.link.channels.down(node) * col).norm() / col.norm()
            })
            .fold(0.0, f64::max)
    }

    /// Relay-nulled interference streams per node.
    pub fn relay_nulled_count(&self, node: Node) -> usize {
        self.nulled_toward
            .iter()
            .filter(|&&v| v == Some(node))
            .count()
    }
}

impl Transceiver for ReducedDesign {
    fn link(&self) -> &LinkDesign {
        &self.link
    }

    fn diagnostics(&self, tol: &TolerancePolicy) -> Diagnostics {
        let mut d = self.link.diagnostics(tol);
        // Fold relay-side nulling into the leakage figure.
        d.leakage = d.leakage.max(self.relay_null_residual());
        d
    }
}
