//! Signal-alignment transceiver design for the MIMO two-way X relay channel.
//!
//! Four source nodes with `M` antennas exchange messages through one relay
//! with `N` antennas. Nodes 1 and 2 each talk to nodes 3 and 4. The crate
//! builds the alignment precoders, relay beamformers and receive filters,
//! checks their invariants, simulates the exchange, and estimates ergodic
//! sum rates.

pub mod analysis;
pub mod cli;
pub mod design;
pub mod error;
pub mod exchange;
pub mod model;
pub mod numerics;
pub mod rates;
pub mod reduced;
pub mod sajic;

pub use design::{Diagnostics, LinkDesign, Transceiver};
pub use error::{Error, Result};
pub use model::{draw_channels, ChannelRealization, NetworkConfig, Node, Pair, StreamAllocation};
pub use numerics::{ComplexMatrix, TolerancePolicy};
pub use rates::{RateCurve, Scheme};
