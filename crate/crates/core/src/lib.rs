//! Agent-based simulation of innovation in bit-string societies.
//!
//! Two models share the bit-string machinery in [`bitstring`]:
//!
//! - [`market`]: producers and consumers exchanging through product/needs matching,
//!   with market-oriented, process and product innovation on the producer side and
//!   adaptation on the consumer side.
//! - [`selforg`]: a society where every agent carries a P (extraction) and an N
//!   (exposure) string and fitness moves between agents in a zero-sum exchange.
//!
//! [`harness`] runs seeded Monte Carlo batches over a scenario catalog and writes
//! CSV/JSON reports.

pub mod bitstring;
pub mod error;
pub mod harness;
pub mod market;
pub mod rng;
pub mod selforg;
pub mod threshold;

pub use bitstring::BitString;
pub use error::{Error, Result};
pub use rng::{Entropy, ScriptedEntropy, SimRng};
pub use threshold::{MatchThreshold, ThresholdKind};
