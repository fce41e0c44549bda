//! Optimal hop distance and water-filling power control for single-cell
//! multihop wireless networks under a random-access MAC.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod discrete;
pub mod error;
pub mod fading;
pub mod hopopt;
pub mod macmodel;
pub mod quad;
pub mod roots;
pub mod simulator;
pub mod special;
pub mod waterfill;

pub use discrete::DiscreteWaterfillTable;
pub use error::{Boundary, Error, Result};
pub use fading::{DiscreteStates, FadingKind, FadingModel, TabulatedDensity};
pub use hopopt::{HopProblem, Maximizer, Optimum, ScanConfig, StationaryPoint, StationarySet};
pub use macmodel::MacProfile;
pub use simulator::{PowerPolicy, SimConfig, SimReport};
pub use waterfill::WaterfillSolution;
