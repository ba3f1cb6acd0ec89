//! Network-flow keylogger detection: preprocessing, resampling, feature
//! selection, classifiers, ensembles, evaluation and explanations.

pub mod binning;
pub mod bundle;
pub mod ensemble;
pub mod error;
pub mod evaluate;
pub mod experiment;
pub mod explain;
pub mod featsel;
pub mod fixture;
pub mod flowdata;
pub mod learners;
pub mod linalg;
pub mod resample;
pub mod rng;
pub mod svg;

pub use error::{Error, Result};
pub use flowdata::FlowTable;
pub use learners::{Learner, ModelConfig, ModelKind, TrainedModel};
