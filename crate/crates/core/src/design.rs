//! The transceiver set shared by both schemes, and the invariant checks that
//! every design must pass before it is handed to the exchange or rate code.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{ChannelRealization, NetworkConfig, Node, Pair, StreamAllocation};
use crate::numerics::{fro, hstack, numerical_rank, ComplexMatrix, TolerancePolicy};

/// Precoders, relay decoding basis, relay beamformers and receive filters for
/// one channel realization.
///
/// Relay-side matrices (`mac_basis`, `relay_beamformers`) hold one column per
/// pair-stream, grouped by pair in the order (1,3), (1,4), (2,3), (2,4).
/// Receive filter `D_i` has one row per stream node `i` receives, grouped by
/// [`Node::pairs`].
#[derive(Debug, Clone)]
pub struct LinkDesign {
    pub config: NetworkConfig,
    pub channels: ChannelRealization,
    pub allocation: StreamAllocation,
    /// `precoders[pair][0]` is the left node's M×d precoder, `[1]` the right node's.
    pub precoders: [[ComplexMatrix; 2]; 4],
    /// G_r: column k is the aligned relay-side direction of pair-stream k.
    pub mac_basis: ComplexMatrix,
    pub receive_filters: [ComplexMatrix; 4],
    /// U_r, unit-norm columns.
    pub relay_beamformers: ComplexMatrix,
    /// Per-stream transmit power at the sources.
    pub stream_power: f64,
    /// Per-stream transmit power at the relay.
    pub relay_power: f64,
}

impl LinkDesign {
    pub fn precoder(&self, node: Node, pair: Pair) -> &ComplexMatrix {
        assert!(pair.contains(node), "node {node} is not in pair {pair}");
        let side = usize::from(!node.is_left());
        &self.precoders[pair.index()][side]
    }

    pub fn receive_filter(&self, node: Node) -> &ComplexMatrix {
        &self.receive_filters[node.index()]
    }

    pub fn total_streams(&self) -> usize {
        self.allocation.total()
    }

    pub fn relay_columns(&self, pair: Pair) -> ComplexMatrix {
        let a = &self.allocation;
        self.relay_beamformers
            .columns(a.offset(pair), a.count(pair))
            .into_owned()
    }

    pub fn mac_columns(&self, pair: Pair) -> ComplexMatrix {
        let a = &self.allocation;
        self.mac_basis
            .columns(a.offset(pair), a.count(pair))
            .into_owned()
    }

    /// Relay beamformers carrying what `node` wants, in filter-row order.
    pub fn desired_beamformers(&self, node: Node) -> ComplexMatrix {
        let [p, q] = node.pairs();
        let n = self.relay_beamformers.nrows();
        hstack(&[&self.relay_columns(p), &self.relay_columns(q)], n)
    }

    pub fn interfering_beamformers(&self, node: Node) -> ComplexMatrix {
        let [p, q] = node.interfering_pairs();
        let n = self.relay_beamformers.nrows();
        hstack(&[&self.relay_columns(p), &self.relay_columns(q)], n)
    }

    /// `D_i H_{r,i} U_desired`: square, and invertible for a valid design.
    pub fn effective_desired(&self, node: Node) -> ComplexMatrix {
        self.receive_filter(node) * self.channels.down(node) * self.desired_beamformers(node)
    }

    /// Source power normalization: unit-max precoders with an equal per-stream
    /// share sized for the busiest node; unit relay columns with an equal share.
    pub(crate) fn powers(cfg: &NetworkConfig, alloc: &StreamAllocation) -> (f64, f64) {
        let busiest = Node::ALL
            .iter()
            .map(|&n| alloc.node_streams(n))
            .max()
            .unwrap_or(0)
            .max(1);
        let total = alloc.total().max(1);
        (cfg.power / busiest as f64, cfg.power / total as f64)
    }

    pub fn diagnostics(&self, tol: &TolerancePolicy) -> Diagnostics {
        let ch = &self.channels;
        let mut mac_residual: f64 = 0.0;
        for pair in Pair::ALL {
            let g = self.mac_columns(pair);
            let left = ch.up(pair.left()) * self.precoder(pair.left(), pair);
            let right = ch.up(pair.right()) * self.precoder(pair.right(), pair);
            for k in 0..g.ncols() {
                let diff = (left.column(k) - right.column(k)).norm();
                let side = (left.column(k) - g.column(k)).norm();
                mac_residual = mac_residual.max(diff.max(side) / g.column(k).norm());
            }
        }

        let mut leakage: f64 = 0.0;
        let mut desired_rank = [0usize; 4];
        for node in Node::ALL {
            let eff = self.receive_filter(node) * ch.down(node);
            let interference = self.interfering_beamformers(node);
            let hit = &eff * &interference;
            for r in 0..eff.nrows() {
                let row_norm = eff.row(r).norm();
                for c in 0..interference.ncols() {
                    let rel = hit[(r, c)].norm() / (row_norm * interference.column(c).norm());
                    leakage = leakage.max(rel);
                }
            }
            desired_rank[node.index()] = numerical_rank(&self.effective_desired(node), tol);
        }

        let node_power = Node::ALL.map(|node| {
            node.pairs()
                .iter()
                .map(|&p| self.stream_power * fro(self.precoder(node, p)).powi(2))
                .sum::<f64>()
        });
        let relay_power = self.relay_power * fro(&self.relay_beamformers).powi(2);

        Diagnostics {
            total_streams: self.total_streams(),
            mac_residual,
            bc_alignment_residual: None,
            leakage,
            mac_rank: numerical_rank(&self.mac_basis, tol),
            beamformer_rank: numerical_rank(&self.relay_beamformers, tol),
            desired_rank,
            desired_expected: Node::ALL.map(|n| self.allocation.node_streams(n)),
            node_power,
            relay_power,
            power_budget: self.config.power,
        }
    }
}

/// Residuals and ranks of a design. `passes` compares them against a tolerance.
#[derive(Debug, Clone, Serialize)]
pub struct Diagnostics {
    pub total_streams: usize,
    /// Worst `‖H_i v_i − H_j v_j‖ / ‖g‖` over pair-streams.
    pub mac_residual: f64,
    /// Worst `‖d_{i,j} H_{r,i} − w‖ / ‖w‖`; only SAJIC has aligned receive rows.
    pub bc_alignment_residual: Option<f64>,
    /// Worst cosine between a filtered receive row and an interfering beamformer.
    pub leakage: f64,
    pub mac_rank: usize,
    pub beamformer_rank: usize,
    pub desired_rank: [usize; 4],
    pub desired_expected: [usize; 4],
    pub node_power: [f64; 4],
    pub relay_power: f64,
    pub power_budget: f64,
}

impl Diagnostics {
    pub fn failures(&self, tol: &TolerancePolicy) -> Vec<String> {
        let eps = tol.residual_eps;
        let mut out = Vec::new();
        if self.mac_residual > eps {
            out.push(format!("MAC alignment residual {:.3e}", self.mac_residual));
        }
        if let Some(r) = self.bc_alignment_residual {
            if r > eps {
                out.push(format!("BC alignment residual {r:.3e}"));
            }
        }
        if self.leakage > eps {
            out.push(format!("interference leakage {:.3e}", self.leakage));
        }
        if self.mac_rank != self.total_streams {
            out.push(format!(
                "rank(G_r) = {} of {}",
                self.mac_rank, self.total_streams
            ));
        }
        if self.beamformer_rank != self.total_streams {
            out.push(format!(
                "rank(U_r) = {} of {}",
                self.beamformer_rank, self.total_streams
            ));
        }
        for node in Node::ALL {
            let i = node.index();
            if self.desired_rank[i] != self.desired_expected[i] {
                out.push(format!(
                    "node {node} desired rank {} of {}",
                    self.desired_rank[i], self.desired_expected[i]
                ));
            }
        }
        let slack = 1.0 + eps;
        for node in Node::ALL {
            if self.node_power[node.index()] > self.power_budget * slack {
                out.push(format!(
                    "node {node} power {:.6}",
                    self.node_power[node.index()]
                ));
            }
        }
        if self.relay_power > self.power_budget * slack {
            out.push(format!("relay power {:.6}", self.relay_power));
        }
        out
    }

    pub fn passes(&self, tol: &TolerancePolicy) -> bool {
        self.failures(tol).is_empty()
    }
}

/// Either scheme's design, as consumed by the exchange and rate code.
pub trait Transceiver {
    fn link(&self) -> &LinkDesign;
    fn diagnostics(&self, tol: &TolerancePolicy) -> Diagnostics;

    fn validate(&self, tol: &TolerancePolicy) -> Result<()> {
        let failures = self.diagnostics(tol).failures(tol);
        if failures.is_empty() {
            Ok(())
        } else {
            Err(Error::DesignInvalid(failures.join("; ")))
        }
    }
}
