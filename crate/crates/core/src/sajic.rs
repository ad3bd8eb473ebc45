//! Signal alignment with joint interference cancellation.
//!
//! MAC phase: both members of a pair precode into the intersection of their
//! uplink column spaces, so the relay sees one direction per pair-stream and
//! decodes the sum. BC phase: both members choose receive rows that land on
//! the same relay-side row `w`, which lets the relay null each pair's
//! broadcast at the other two nodes with a single null-space computation.

use crate::design::{Diagnostics, LinkDesign, Transceiver};
use crate::error::{Error, Result};
use crate::model::{
    allocate_streams, ChannelRealization, NetworkConfig, Node, Pair, StreamAllocation,
};
use crate::numerics::{
    column_space_intersection_with_coefficients, hstack, null_space_basis, numerical_rank,
    pseudo_inverse, row_space_intersection, vstack, ComplexMatrix, TolerancePolicy,
};

#[derive(Debug, Clone)]
pub struct TransceiverDesign {
    pub link: LinkDesign,
    /// One aligned row `w` per pair-stream (total × N), pair-grouped like `U_r`.
    pub effective_rows: ComplexMatrix,
}

#[derive(Debug, Clone)]
pub struct MacDesign {
    pub precoders: [[ComplexMatrix; 2]; 4],
    pub mac_basis: ComplexMatrix,
}

#[derive(Debug, Clone)]
pub struct BcReceiveDesign {
    pub receive_filters: [ComplexMatrix; 4],
    pub effective_rows: ComplexMatrix,
}

fn empty_precoders(m: usize) -> [[ComplexMatrix; 2]; 4] {
    std::array::from_fn(|_| std::array::from_fn(|_| ComplexMatrix::zeros(m, 0)))
}

/// Aligned precoders and the relay decoding basis G_r.
///
/// Each `g` is rescaled so the larger of its two precoders has unit norm.
pub fn design_mac(
    ch: &ChannelRealization,
    alloc: &StreamAllocation,
    tol: &TolerancePolicy,
) -> Result<MacDesign> {
    let (m, n) = (ch.source_antennas(), ch.relay_antennas());
    let mut precoders = empty_precoders(m);
    let mut blocks = Vec::with_capacity(4);

    for pair in Pair::ALL {
        let d = alloc.count(pair);
        if d == 0 {
            blocks.push(ComplexMatrix::zeros(n, 0));
            continue;
        }
        let it = column_space_intersection_with_coefficients(
            ch.up(pair.left()),
            ch.up(pair.right()),
            tol,
        );
        if it.basis.ncols() < d {
            return Err(Error::AlignmentInfeasible {
                pair,
                needed: d,
                available: it.basis.ncols(),
            });
        }
        let mut g = it.basis.columns(0, d).into_owned();
        let mut vl = it.from_a.columns(0, d).into_owned();
        let mut vr = it.from_b.columns(0, d).into_owned();
        for k in 0..d {
            let s = 1.0 / vl.column(k).norm().max(vr.column(k).norm());
            g.column_mut(k).scale_mut(s);
            vl.column_mut(k).scale_mut(s);
            vr.column_mut(k).scale_mut(s);
        }
        precoders[pair.index()] = [vl, vr];
        blocks.push(g);
    }

    let refs: Vec<&ComplexMatrix> = blocks.iter().collect();
    let mac_basis = hstack(&refs, n);
    let rank = numerical_rank(&mac_basis, tol);
    if rank != alloc.total() {
        return Err(Error::RankDeficient {
            what: "G_r",
            rank,
            expected: alloc.total(),
        });
    }
    Ok(MacDesign {
        precoders,
        mac_basis,
    })
}

/// Receive filters whose effective rows coincide across each pair.
pub fn design_bc_receive(
    ch: &ChannelRealization,
    alloc: &StreamAllocation,
    tol: &TolerancePolicy,
) -> Result<BcReceiveDesign> {
    let (m, n) = (ch.source_antennas(), ch.relay_antennas());
    // Per node, per pair slot: filter rows.
    let mut rows_by_node: [Vec<ComplexMatrix>; 4] = std::array::from_fn(|_| Vec::new());
    let mut w_blocks = Vec::with_capacity(4);

    for pair in Pair::ALL {
        let d = alloc.count(pair);
        if d == 0 {
            w_blocks.push(ComplexMatrix::zeros(0, n));
            for node in pair.nodes() {
                rows_by_node[node.index()].push(ComplexMatrix::zeros(0, m));
            }
            continue;
        }
        let (hl, hr) = (ch.down(pair.left()), ch.down(pair.right()));
        let common = row_space_intersection(hl, hr, tol);
        if common.nrows() < d {
            return Err(Error::AlignmentInfeasible {
                pair,
                needed: d,
                available: common.nrows(),
            });
        }
        let w = common.rows(0, d).into_owned();
        for node in pair.nodes() {
            let filter = &w * pseudo_inverse(ch.down(node), tol);
            rows_by_node[node.index()].push(filter);
        }
        w_blocks.push(w);
    }

    // rows_by_node was filled in Pair::ALL order, which matches Node::pairs order.
    let receive_filters = Node::ALL.map(|node| {
        let refs: Vec<&ComplexMatrix> = rows_by_node[node.index()].iter().collect();
        vstack(&refs, m)
    });
    let refs: Vec<&ComplexMatrix> = w_blocks.iter().collect();
    let effective_rows = vstack(&refs, n);
    let rank = numerical_rank(&effective_rows, tol);
    if rank != alloc.total() {
        return Err(Error::RankDeficient {
            what: "effective BC rows",
            rank,
            expected: alloc.total(),
        });
    }
    Ok(BcReceiveDesign {
        receive_filters,
        effective_rows,
    })
}

/// Effective rows of every other pair. Each aligned row appears once even
/// though two nodes share it.
pub fn unintended_rows(
    effective_rows: &ComplexMatrix,
    alloc: &StreamAllocation,
    pair: Pair,
) -> ComplexMatrix {
    let n = effective_rows.ncols();
    let blocks: Vec<ComplexMatrix> = Pair::ALL
        .iter()
        .filter(|&&p| p != pair)
        .map(|&p| {
            effective_rows
                .rows(alloc.offset(p), alloc.count(p))
                .into_owned()
        })
        .collect();
    let refs: Vec<&ComplexMatrix> = blocks.iter().collect();
    vstack(&refs, n)
}

/// Relay beamformers: each pair's block lies in the null space of every other
/// pair's effective rows.
pub fn design_bc_transmit(
    effective_rows: &ComplexMatrix,
    alloc: &StreamAllocation,
    tol: &TolerancePolicy,
) -> Result<ComplexMatrix> {
    let n = effective_rows.ncols();
    let mut blocks = Vec::with_capacity(4);
    for pair in Pair::ALL {
        let d = alloc.count(pair);
        if d == 0 {
            blocks.push(ComplexMatrix::zeros(n, 0));
            continue;
        }
        let null = null_space_basis(&unintended_rows(effective_rows, alloc, pair), tol);
        if null.ncols() < d {
            return Err(Error::AlignmentInfeasible {
                pair,
                needed: d,
                available: null.ncols(),
            });
        }
        blocks.push(null.columns(0, d).into_owned());
    }
    let refs: Vec<&ComplexMatrix> = blocks.iter().collect();
    let u = hstack(&refs, n);
    let rank = numerical_rank(&u, tol);
    if rank != alloc.total() {
        return Err(Error::RankDeficient {
            what: "U_r",
            rank,
            expected: alloc.total(),
        });
    }
    Ok(u)
}

/// Full SAJIC design with the allocation from [`allocate_streams`].
pub fn design_full(
    ch: &ChannelRealization,
    cfg: &NetworkConfig,
    tol: &TolerancePolicy,
) -> Result<TransceiverDesign> {
    let alloc = allocate_streams(cfg)?;
    design_with_allocation(ch, cfg, &alloc, tol)
}

/// SAJIC with a caller-chosen allocation, e.g. the full-DOF table outside its
/// feasible range to confirm that alignment breaks down.
pub fn design_with_allocation(
    ch: &ChannelRealization,
    cfg: &NetworkConfig,
    alloc: &StreamAllocation,
    tol: &TolerancePolicy,
) -> Result<TransceiverDesign> {
    let (m, n) = (cfg.source_antennas, cfg.relay_antennas);
    if n >= 2 * m {
        return Err(Error::InfeasibleRegime { m, n });
    }
    let mac = design_mac(ch, alloc, tol)?;
    let bc = design_bc_receive(ch, alloc, tol)?;
    let relay_beamformers = design_bc_transmit(&bc.effective_rows, alloc, tol)?;
    let (stream_power, relay_power) = LinkDesign::powers(cfg, alloc);

    let design = TransceiverDesign {
        link: LinkDesign {
            config: *cfg,
            channels: ch.clone(),
            allocation: *alloc,
            precoders: mac.precoders,
            mac_basis: mac.mac_basis,
            receive_filters: bc.receive_filters,
            relay_beamformers,
            stream_power,
            relay_power,
        },
        effective_rows: bc.effective_rows,
    };
    design.validate(tol)?;
    Ok(design)
}

impl TransceiverDesign {
    /// Effective row block of one pair.
    pub fn pair_rows(&self, pair: Pair) -> ComplexMatrix {
        let a = &self.link.allocation;
        self.effective_rows
            .rows(a.offset(pair), a.count(pair))
            .into_owned()
    }

    /// Filter rows node `node` uses for `pair`.
    pub fn filter_rows(&self, node: Node, pair: Pair) -> ComplexMatrix {
        let a = &self.link.allocation;
        let [first, _] = node.pairs();
        let start = if pair == first { 0 } else { a.count(first) };
        self.link
            .receive_filter(node)
            .rows(start, a.count(pair))
            .into_owned()
    }

    fn bc_alignment_residual(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for pair in Pair::ALL {
            let w = self.pair_rows(pair);
            for node in pair.nodes() {
                let got = self.filter_rows(node, pair) * self.link.channels.down(node);
                for k in 0..w.nrows() {
                    worst = worst.max((got.row(k) - w.row(k)).norm() / w.row(k).norm());
                }
            }
        }
        worst
    }
}

impl Transceiver for TransceiverDesign {
    fn link(&self) -> &LinkDesign {
        &self.link
    }

    fn diagnostics(&self, tol: &TolerancePolicy) -> Diagnostics {
        let mut d = self.link.diagnostics(tol);
        d.bc_alignment_residual = Some(self.bc_alignment_residual());
        d
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::draw_channels;
    use crate::numerics::fro;

    fn fixture(m: usize, n: usize, seed: u64) -> (NetworkConfig, ChannelRealization) {
        let cfg = NetworkConfig::antennas(m, n).unwrap();
        let ch = draw_channels(&cfg, seed);
        (cfg, ch)
    }

    #[test]
    fn mac_on_canonical_fixture() {
        let tol = TolerancePolicy::default();
        let (_, ch) = fixture(5, 8, 1);
        let alloc = StreamAllocation::uniform(2);
        let mac = design_mac(&ch, &alloc, &tol).unwrap();
        assert_eq!(mac.mac_basis.shape(), (8, 8));
        assert_eq!(numerical_rank(&mac.mac_basis, &tol), 8);
        for pair in Pair::ALL {
            let [vl, vr] = &mac.precoders[pair.index()];
            let diff = ch.up(pair.left()) * vl - ch.up(pair.right()) * vr;
            assert!(fro(&diff) < 1e-9);
        }
    }

    #[test]
    fn mac_rejects_oversized_allocation() {
        let tol = TolerancePolicy::default();
        let (_, ch) = fixture(3, 7, 2);
        let err = design_mac(&ch, &StreamAllocation::full_dof(7), &tol).unwrap_err();
        assert!(matches!(
            err,
            Error::AlignmentInfeasible { available: 0, .. }
        ));
    }

    #[test]
    fn intersection_dimension_per_pair() {
        let tol = TolerancePolicy::default();
        let (_, ch) = fixture(5, 8, 3);
        for pair in Pair::ALL {
            let it = column_space_intersection_with_coefficients(
                ch.up(pair.left()),
                ch.up(pair.right()),
                &tol,
            );
            assert_eq!(it.basis.ncols(), 2);
        }
    }

    #[test]
    fn bc_receive_on_canonical_fixture() {
        let tol = TolerancePolicy::default();
        let (_, ch) = fixture(5, 8, 4);
        let alloc = StreamAllocation::uniform(2);
        let bc = design_bc_receive(&ch, &alloc, &tol).unwrap();
        assert_eq!(bc.effective_rows.shape(), (8, 8));
        assert_eq!(numerical_rank(&bc.effective_rows, &tol), 8);
        // Node 2's (2,4) rows and node 4's (2,4) rows map onto the same w.
        let w24 = bc.effective_rows.rows(6, 2).into_owned();
        let d2 = bc.receive_filters[1].rows(2, 2).into_owned();
        let d4 = bc.receive_filters[3].rows(2, 2).into_owned();
        assert!(fro(&(&d2 * ch.down(Node::N2) - &w24)) < 1e-9);
        assert!(fro(&(&d4 * ch.down(Node::N4) - &w24)) < 1e-9);
        assert_eq!(bc.receive_filters[0].shape(), (4, 5));
    }

    #[test]
    fn bc_transmit_on_canonical_fixture() {
        let tol = TolerancePolicy::default();
        let (_, ch) = fixture(5, 8, 5);
        let alloc = StreamAllocation::uniform(2);
        let bc = design_bc_receive(&ch, &alloc, &tol).unwrap();
        for pair in Pair::ALL {
            let stacked = unintended_rows(&bc.effective_rows, &alloc, pair);
            assert_eq!(stacked.shape(), (6, 8));
            assert_eq!(null_space_basis(&stacked, &tol).ncols(), 2);
        }
        let u = design_bc_transmit(&bc.effective_rows, &alloc, &tol).unwrap();
        assert_eq!(numerical_rank(&u, &tol), 8);
        // (2,3)'s rows must not see (1,3)'s beamformers.
        let w23 = bc.effective_rows.rows(4, 2).into_owned();
        let u13 = u.columns(0, 2).into_owned();
        assert!(fro(&(w23 * u13)) < 1e-9);
    }

    #[test]
    fn full_designs_on_named_configurations() {
        let tol = TolerancePolicy::default();
        for (m, n, streams) in [
            (5, 8, 8),
            (3, 4, 4),
            (5, 9, 4),
            (4, 4, 4),
            (1, 1, 1),
            (5, 7, 7),
        ] {
            let (cfg, ch) = fixture(m, n, 6);
            let d = design_full(&ch, &cfg, &tol).unwrap();
            assert_eq!(d.link.total_streams(), streams, "M={m} N={n}");
            let diag = d.diagnostics(&tol);
            assert!(diag.passes(&tol), "M={m} N={n}: {:?}", diag.failures(&tol));
        }
    }

    #[test]
    fn infeasible_regime_is_reported() {
        let tol = TolerancePolicy::default();
        let (cfg, ch) = fixture(2, 4, 7);
        assert_eq!(
            design_full(&ch, &cfg, &tol).unwrap_err(),
            Error::InfeasibleRegime { m: 2, n: 4 }
        );
    }

    #[test]
    fn power_budget_respected() {
        let tol = TolerancePolicy::default();
        let cfg = NetworkConfig::new(5, 7, 10.0).unwrap();
        let ch = draw_channels(&cfg, 8);
        let d = design_full(&ch, &cfg, &tol).unwrap();
        let diag = d.diagnostics(&tol);
        for p in diag.node_power {
            assert!(p <= 10.0 * (1.0 + 1e-12));
        }
        assert!((diag.relay_power - 10.0).abs() < 1e-9);
    }
}
