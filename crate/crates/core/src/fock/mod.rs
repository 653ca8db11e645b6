//! Truncated multimode Fock-space engine: sparse states and density operators, passive linear
//! networks, photon-number-resolving detection, and dual-rail QKD statistics.

pub mod coherent;
pub mod density;
pub mod measure;
pub mod network;
pub mod pnrd;
pub mod qkd;
pub mod state;
pub mod usd;

pub use coherent::coherent_state;
pub use density::DensityOperator;
pub use measure::{joint_measurement, measure_pattern, project_pattern, project_pure_mixture, IMPOSSIBLE_PROBABILITY};
pub use network::LinearNetwork;
pub use pnrd::{pnrd_operator, PnrdElement};
pub use qkd::{dual_rail_bell_state, qkd_click_and_error, Basis, ClickStats};
pub use state::{FockStateVector, Occupation, Truncation};
pub use usd::{usd_link_oracle, UsdOutcome};
