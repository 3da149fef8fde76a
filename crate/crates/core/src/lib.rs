//! Kohonen maps as a stochastic process: simulation, mean-field analysis,
//! quantization and categorical data maps.

// `!(x > 0.0)` style checks are deliberate: they reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod categorical;
pub mod cells;
pub mod error;
pub mod meanfield;
pub mod order_analysis;
pub mod quad;
pub mod quantization;
pub mod report;
pub mod som_engine;
pub mod state;
pub mod stimuli;
pub mod topology;

pub use categorical::{BurtTable, ContingencyTable, ModalityMap, Responses};
pub use error::{Error, Result};
pub use meanfield::{MeanField, Stability};
pub use som_engine::{GainSchedule, Init, Metric, Som};
pub use state::NetworkState;
pub use stimuli::{Marginal, StimuliDistribution};
pub use topology::{Lattice, Neighborhood};
