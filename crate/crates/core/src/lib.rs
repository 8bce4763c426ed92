//! Pricing equilibria under consumer consideration sets, and the cost
//! pass-through they imply.
//!
//! The computation is split in two layers. The margin game ([`margin_game`])
//! depends only on the [`consideration`] structure and yields each firm's
//! distribution of normalized margins. The curvature layer ([`curvature`])
//! maps margins to prices for a given demand curve and marginal cost.
//! [`passthrough`], [`bounds`] and [`comparative`] compose the two, and
//! [`oracle`] checks the results by brute force in price space and by
//! simulation.

pub mod bounds;
pub mod cli;
pub mod comparative;
pub mod consideration;
pub mod curvature;
pub mod error;
pub mod margin_game;
pub mod numerics;
pub mod oracle;
pub mod passthrough;

pub use consideration::{ConsiderationStructure, FirmStats, RivalCountPgf};
pub use curvature::{DemandSpec, Invertibility};
pub use error::{Error, Result};
pub use margin_game::{EquilibriumProfile, MarginDistribution, SolverTag};
