//! Secret key rate analysis for quantum repeaters: Bell-diagonal state maps, repeater rate
//! formulas, a truncated Fock-space optics engine, and search/sweep tooling.

pub mod detector;
pub mod ensemble;
pub mod error;
pub mod fock;
pub mod harness;
pub mod hybrid;
pub mod mc;
pub mod original;
pub mod rate;
pub mod states;

pub use detector::DetectorModel;
pub use error::{Error, Result};
pub use rate::{ChannelModel, RateBreakdown, RepeaterGeometry};
pub use states::{BellDiagonalState, QberTriple, QkdProtocol};
