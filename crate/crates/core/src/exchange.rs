//! End-to-end two-phase exchange with BPSK and XOR network coding.
//!
//! MAC: each stream is ±1 (bit 0 → +1). The relay zero-forces with `G_r⁺`,
//! which yields `s + s′ ∈ {−2, 0, 2}` per aligned pair-stream, and maps
//! `|·| < 1` to XOR bit 1. BC: the relay sends the XOR bits as ±1 along
//! `U_r`; node `i` filters with `D_i`, inverts its desired effective matrix,
//! slices, and XORs with its own bits to obtain its partner's message.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::design::Transceiver;
use crate::error::{Error, Result};
use crate::model::{Node, Pair, StreamAllocation};
use crate::numerics::{pseudo_inverse, ComplexMatrix, TolerancePolicy};
use nalgebra::DVector;
use num_complex::Complex64;

/// Bits for the eight directed messages.
///
/// `bits[pair][0]` travels left→right, `[1]` right→left; both have the pair's
/// stream count.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MessageSet {
    pub bits: [[Vec<bool>; 2]; 4],
}

impl MessageSet {
    pub fn zeros(alloc: &StreamAllocation) -> Self {
        Self {
            bits: Pair::ALL.map(|p| [vec![false; alloc.count(p)], vec![false; alloc.count(p)]]),
        }
    }

    pub fn random(alloc: &StreamAllocation, seed: u64) -> Self {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self {
            bits: Pair::ALL.map(|p| {
                let d = alloc.count(p);
                [
                    (0..d).map(|_| rng.random()).collect(),
                    (0..d).map(|_| rng.random()).collect(),
                ]
            }),
        }
    }

    /// Message sent by `from` inside `pair`.
    pub fn sent_by(&self, from: Node, pair: Pair) -> &[bool] {
        &self.bits[pair.index()][usize::from(!from.is_left())]
    }

    pub fn matches(&self, alloc: &StreamAllocation) -> bool {
        Pair::ALL.iter().all(|&p| {
            self.bits[p.index()]
                .iter()
                .all(|b| b.len() == alloc.count(p))
        })
    }

    fn errors_against(&self, other: &MessageSet) -> usize {
        self.bits
            .iter()
            .flatten()
            .zip(other.bits.iter().flatten())
            .map(|(a, b)| a.iter().zip(b).filter(|(x, y)| x != y).count())
            .sum()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ExchangeReport {
    /// What each node decoded for its partners' messages, laid out like the input.
    pub recovered: MessageSet,
    /// Wrong XOR bits at the relay.
    pub relay_errors: usize,
    /// Wrong XOR bits at the nodes, before side-information removal.
    pub node_xor_errors: usize,
    /// Wrong message bits after side-information removal.
    pub message_errors: usize,
}

fn antipodal(bit: bool) -> f64 {
    if bit {
        -1.0
    } else {
        1.0
    }
}

/// PNC demapping of zero-forced relay outputs. Only sees `F_r y_r`.
pub fn relay_demap(estimates: &[Complex64]) -> Vec<bool> {
    estimates.iter().map(|z| z.re.abs() < 1.0).collect()
}

fn noise_vector(rng: &mut ChaCha8Rng, len: usize, noise_var: f64) -> DVector<Complex64> {
    let s = (noise_var / 2.0).sqrt();
    DVector::from_fn(len, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        Complex64::new(re * s, im * s)
    })
}

/// Runs one MAC + BC round. `noise_seed` drives the AWGN when `noise_var > 0`.
pub fn run_exchange<D: Transceiver + ?Sized>(
    design: &D,
    msgs: &MessageSet,
    noise_var: f64,
    noise_seed: u64,
    tol: &TolerancePolicy,
) -> Result<ExchangeReport> {
    design.validate(tol)?;
    let link = design.link();
    let alloc = &link.allocation;
    if !msgs.matches(alloc) {
        return Err(Error::DesignInvalid(
            "message lengths do not match the allocation".into(),
        ));
    }
    if noise_var.is_nan() || noise_var < 0.0 {
        return Err(Error::InvalidConfig(format!(
            "noise variance must be >= 0, got {noise_var}"
        )));
    }
    let ch = &link.channels;
    let (m, n) = (ch.source_antennas(), ch.relay_antennas());
    let mut rng = ChaCha8Rng::seed_from_u64(noise_seed);

    // MAC phase.
    let mut y_r = DVector::<Complex64>::zeros(n);
    for node in Node::ALL {
        let mut x = DVector::<Complex64>::zeros(m);
        for pair in node.pairs() {
            let v = link.precoder(node, pair);
            let s = DVector::from_iterator(
                v.ncols(),
                msgs.sent_by(node, pair)
                    .iter()
                    .map(|&b| Complex64::new(antipodal(b), 0.0)),
            );
            x += v * s;
        }
        y_r += ch.up(node) * x;
    }
    if noise_var > 0.0 {
        y_r += noise_vector(&mut rng, n, noise_var);
    }
    let detector = pseudo_inverse(&link.mac_basis, tol);
    let estimates = &detector * &y_r;
    let relay_bits = relay_demap(estimates.as_slice());

    let mut relay_errors = 0;
    for pair in Pair::ALL {
        let at = alloc.offset(pair);
        let [a, b] = &msgs.bits[pair.index()];
        for k in 0..alloc.count(pair) {
            relay_errors += usize::from(relay_bits[at + k] != (a[k] ^ b[k]));
        }
    }

    // BC phase.
    let q = DVector::from_iterator(
        relay_bits.len(),
        relay_bits
            .iter()
            .map(|&b| Complex64::new(antipodal(b), 0.0)),
    );
    let x_r = &link.relay_beamformers * q;

    let mut recovered = MessageSet::zeros(alloc);
    let mut node_xor_errors = 0;
    for node in Node::ALL {
        let mut y = ch.down(node) * &x_r;
        if noise_var > 0.0 {
            y += noise_vector(&mut rng, m, noise_var);
        }
        let z = link.receive_filter(node) * y;
        let t: ComplexMatrix = link.effective_desired(node);
        let q_hat = pseudo_inverse(&t, tol) * z;
        let mut at = 0;
        for pair in node.pairs() {
            let partner = pair.partner(node).expect("node belongs to its own pairs");
            let own = msgs.sent_by(node, pair);
            let [a, b] = &msgs.bits[pair.index()];
            let side = usize::from(!partner.is_left());
            for (k, &own_bit) in own.iter().enumerate() {
                let xor_bit = q_hat[at + k].re < 0.0;
                node_xor_errors += usize::from(xor_bit != (a[k] ^ b[k]));
                recovered.bits[pair.index()][side][k] = xor_bit ^ own_bit;
            }
            at += own.len();
        }
    }

    let message_errors = recovered.errors_against(msgs);
    Ok(ExchangeReport {
        recovered,
        relay_errors,
        node_xor_errors,
        message_errors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{draw_channels, NetworkConfig};
    use crate::reduced::design_reduced;
    use crate::sajic::design_full;

    #[test]
    fn pnc_demap_truth_table() {
        for (a, b) in [(false, false), (false, true), (true, false), (true, true)] {
            let sum = antipodal(a) + antipodal(b);
            assert_eq!(relay_demap(&[Complex64::new(sum, 0.0)]), vec![a ^ b]);
        }
        assert_eq!(antipodal(false) + antipodal(true), 0.0);
    }

    #[test]
    fn noiseless_canonical_fixture() {
        let tol = TolerancePolicy::default();
        let cfg = NetworkConfig::antennas(5, 8).unwrap();
        let d = design_full(&draw_channels(&cfg, 1), &cfg, &tol).unwrap();
        let msgs = MessageSet::random(&d.link.allocation, 99);
        let rep = run_exchange(&d, &msgs, 0.0, 0, &tol).unwrap();
        assert_eq!(rep.recovered, msgs);
        assert_eq!(
            (rep.relay_errors, rep.node_xor_errors, rep.message_errors),
            (0, 0, 0)
        );
    }

    #[test]
    fn all_zero_messages_round_trip() {
        let tol = TolerancePolicy::default();
        let cfg = NetworkConfig::antennas(3, 4).unwrap();
        let d = design_reduced(&draw_channels(&cfg, 2), &cfg, &tol).unwrap();
        let msgs = MessageSet::zeros(&d.link.allocation);
        let rep = run_exchange(&d, &msgs, 0.0, 0, &tol).unwrap();
        assert_eq!(rep.recovered, msgs);
    }

    #[test]
    fn rejects_mismatched_messages() {
        let tol = TolerancePolicy::default();
        let cfg = NetworkConfig::antennas(5, 8).unwrap();
        let d = design_full(&draw_channels(&cfg, 3), &cfg, &tol).unwrap();
        let msgs = MessageSet::zeros(&StreamAllocation::uniform(1));
        assert!(matches!(
            run_exchange(&d, &msgs, 0.0, 0, &tol),
            Err(Error::DesignInvalid(_))
        ));
    }

    #[test]
    fn corrupted_design_is_refused() {
        let tol = TolerancePolicy::default();
        let cfg = NetworkConfig::antennas(5, 8).unwrap();
        let mut d = design_full(&draw_channels(&cfg, 4), &cfg, &tol).unwrap();
        d.link.relay_beamformers[(0, 0)] += Complex64::new(0.5, 0.0);
        let msgs = MessageSet::zeros(&d.link.allocation);
        assert!(matches!(
            run_exchange(&d, &msgs, 0.0, 0, &tol),
            Err(Error::DesignInvalid(_))
        ));
    }

    #[test]
    fn ber_falls_with_snr() {
        let tol = TolerancePolicy::default();
        let cfg = NetworkConfig::antennas(5, 8).unwrap();
        let designs: Vec<_> = (0..40)
            .map(|s| design_full(&draw_channels(&cfg, 100 + s), &cfg, &tol).unwrap())
            .collect();
        let mut rates = Vec::new();
        for noise_var in [1.0, 0.1, 0.01, 1e-4] {
            let mut errs = 0;
            let mut bits = 0;
            for (i, d) in designs.iter().enumerate() {
                let msgs = MessageSet::random(&d.link.allocation, i as u64);
                let rep = run_exchange(d, &msgs, noise_var, 7 + i as u64, &tol).unwrap();
                errs += rep.message_errors;
                bits += 2 * d.link.total_streams();
            }
            rates.push(errs as f64 / bits as f64);
        }
        for w in rates.windows(2) {
            assert!(w[1] <= w[0] + 0.02, "BER sequence {rates:?}");
        }
        assert!(rates[0] > rates[3]);
    }
}
